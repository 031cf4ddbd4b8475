//! Flat `key = value` run configuration.

use crate::CliError;
use nlcasimir::{EpsilonTable, MaterialResponse, Permittivity, Temperature, Tolerance};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Every accepted key with its default. `None` means unset.
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("eps_nl", Some("1.1")),
    ("eps_lin", Some("inf")),
    ("eps_nl_table", None),
    ("eps_lin_table", None),
    ("chi3", Some("2e-16")),
    ("regime", Some("zero")),
    ("temperature", Some("300")),
    ("distance", Some("1e-7")),
    ("d_min", Some("1e-9")),
    ("d_max", Some("1e-6")),
    ("d_count", Some("31")),
    ("eps_nl_values", Some("1,2,5,10,100")),
    ("eps_lin_values", Some("2,10,inf")),
    ("tol", Some("1e-6")),
    ("seed", Some("0")),
    ("threads", Some("0")),
    ("lab_n", Some("32")),
    ("lab_length", Some("1")),
    ("lab_k0", Some("10")),
    ("lab_eta", None),
    ("lab_chi_scale", Some("1")),
    ("lab_b", Some("1")),
];

// Keys that cannot change any emitted number.
const UNHASHED: &[&str] = &["threads"];

/// Raw key/value pairs after merging file and flags.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    base: Option<PathBuf>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected key = value", i + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !known(k) {
                return Err(CliError::Config(format!("line {}: unknown key '{k}'", i + 1)));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key '{k}'", i + 1)));
            }
        }
        Ok(RawConfig { values, base: None })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut c = Self::parse(&text)?;
        c.base = path.parent().map(Path::to_path_buf);
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !known(key) {
            return Err(CliError::Config(format!("unknown key '{key}'")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .or_else(|| KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d))
    }

    fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v = self.get(key).ok_or_else(|| CliError::Config(format!("missing key '{key}'")))?;
        parse_f64(key, v)
    }

    fn usize(&self, key: &str) -> Result<usize, CliError> {
        let v = self.get(key).unwrap_or("");
        v.parse()
            .map_err(|_| CliError::Config(format!("{key}: expected a non-negative integer, got '{v}'")))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.get(key).unwrap_or("");
        let out: Vec<f64> = v
            .split(',')
            .map(|s| parse_f64(key, s.trim()))
            .collect::<Result<_, _>>()?;
        if out.is_empty() {
            return Err(CliError::Config(format!("{key}: empty list")));
        }
        Ok(out)
    }

    fn material(&self, eps_key: &str, table_key: &str, chi3: f64) -> Result<MaterialResponse, CliError> {
        let eps = if let Some(path) = self.values.get(table_key) {
            if self.is_set(eps_key) {
                return Err(CliError::Config(format!("set either {eps_key} or {table_key}, not both")));
            }
            let path = match &self.base {
                Some(b) if Path::new(path).is_relative() => b.join(path),
                _ => PathBuf::from(path),
            };
            Permittivity::Tabulated(read_table(&path)?)
        } else {
            let e = self.f64(eps_key)?;
            if e.is_infinite() {
                Permittivity::PerfectMirror
            } else {
                Permittivity::Constant(e)
            }
        };
        MaterialResponse::new(eps, chi3).map_err(|e| CliError::Config(format!("{eps_key}: {e}")))
    }

    /// Validate and convert.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let chi3 = self.f64("chi3")?;
        let nonlinear = self.material("eps_nl", "eps_nl_table", chi3)?;
        let linear = self.material("eps_lin", "eps_lin_table", 0.0)?;
        let kelvin = self.f64("temperature")?;
        let temperature = match self.get("regime").unwrap_or("") {
            "zero" => Temperature::Zero,
            "finite" => Temperature::Finite(kelvin),
            "high" => Temperature::High(kelvin),
            other => {
                return Err(CliError::Config(format!(
                    "regime must be zero, finite or high, got '{other}'"
                )))
            }
        };
        if !matches!(temperature, Temperature::Zero) && !(kelvin.is_finite() && kelvin > 0.0) {
            return Err(CliError::Config(format!("temperature must be > 0, got {kelvin}")));
        }
        let distance = self.f64("distance")?;
        if !(distance.is_finite() && distance > 0.0) {
            return Err(CliError::Config(format!("distance must be > 0, got {distance}")));
        }
        let grid = DistanceGrid::new(self.f64("d_min")?, self.f64("d_max")?, self.usize("d_count")?)?;
        let tol_value = self.f64("tol")?;
        let tol = Tolerance::new(tol_value).map_err(|e| CliError::Config(format!("tol: {e}")))?;
        let seed = self
            .get("seed")
            .unwrap_or("")
            .parse()
            .map_err(|_| CliError::Config("seed: expected an unsigned integer".into()))?;
        let eps_nl_values = self.list("eps_nl_values")?;
        if eps_nl_values.iter().any(|e| !(e.is_finite() && *e >= 1.0)) {
            return Err(CliError::Config("eps_nl_values must be finite and >= 1".into()));
        }
        let eps_lin_values = self.list("eps_lin_values")?;
        if eps_lin_values.iter().any(|e| !(*e >= 1.0)) {
            return Err(CliError::Config("eps_lin_values must be >= 1 or inf".into()));
        }
        let eta = match self.values.get("lab_eta") {
            Some(v) => Some(parse_f64("lab_eta", v)?),
            None => None,
        };
        let lab = LabSettings {
            n: self.usize("lab_n")?,
            length: self.f64("lab_length")?,
            k0: self.f64("lab_k0")?,
            eta,
            chi_scale: self.f64("lab_chi_scale")?,
            b: self.f64("lab_b")?,
        };
        Ok(RunConfig {
            nonlinear,
            linear,
            chi3,
            temperature,
            distance,
            grid,
            eps_nl_values,
            eps_lin_values,
            tol,
            seed,
            threads: self.usize("threads")?,
            lab,
            hash: self.hash(),
        })
    }

    /// SHA-256 over the fully defaulted, sorted key list.
    fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, _) in KEYS {
            if UNHASHED.contains(k) {
                continue;
            }
            if let Some(v) = self.get(k) {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    match v.parse::<f64>() {
        Ok(x) if !x.is_nan() => Ok(x),
        _ => Err(CliError::Config(format!("{key}: expected a number or inf, got '{v}'"))),
    }
}

/// Two columns per line, ξ [rad/s] and ε(iξ), separated by commas or
/// whitespace. `#` starts a comment.
fn read_table(path: &Path) -> Result<EpsilonTable, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read table {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if cols.len() != 2 {
            return Err(CliError::Config(format!("{}: expected two columns in '{line}'", path.display())));
        }
        points.push((parse_f64("table", cols[0])?, parse_f64("table", cols[1])?));
    }
    EpsilonTable::new(points).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Log-spaced gap widths.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl DistanceGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self, CliError> {
        let ok = min.is_finite() && max.is_finite() && min > 0.0 && count >= 1
            && if count == 1 { min == max } else { min < max };
        if !ok {
            return Err(CliError::Config(format!(
                "distance grid must be positive and increasing, got d_min={min} d_max={max} d_count={count}"
            )));
        }
        Ok(DistanceGrid { min, max, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        let step = (b - a) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| match i {
                0 => self.min,
                i if i == self.count - 1 => self.max,
                i => (a + step * i as f64).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabSettings {
    pub n: usize,
    pub length: f64,
    pub k0: f64,
    pub eta: Option<f64>,
    pub chi_scale: f64,
    pub b: f64,
}

/// Validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub nonlinear: MaterialResponse,
    pub linear: MaterialResponse,
    pub chi3: f64,
    pub temperature: Temperature,
    pub distance: f64,
    pub grid: DistanceGrid,
    pub eps_nl_values: Vec<f64>,
    pub eps_lin_values: Vec<f64>,
    pub tol: Tolerance,
    pub seed: u64,
    pub threads: usize,
    pub lab: LabSettings,
    pub hash: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let c = RawConfig::parse("# header\n\neps_nl = 2.5  # trailing\nchi3=1e-16\n").unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.nonlinear.epsilon, Permittivity::Constant(2.5));
        assert_eq!(r.chi3, 1e-16);
        assert_eq!(r.linear.epsilon, Permittivity::PerfectMirror);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(RawConfig::parse("eps_nll = 2").is_err());
        assert!(RawConfig::parse("chi3 = 1\nchi3 = 2").is_err());
        assert!(RawConfig::parse("chi3 2").is_err());
        assert!(RawConfig::default().set("nope", "1").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "eps_nl = 0.5",
            "eps_nl = nan",
            "tol = 0.5",
            "d_min = 1e-6\nd_max = 1e-9",
            "d_count = 0",
            "regime = warm",
            "regime = high\ntemperature = -3",
            "distance = 0",
            "eps_nl_values = 1,inf",
            "seed = -1",
        ] {
            assert!(RawConfig::parse(text).unwrap().resolve().is_err(), "{text}");
        }
    }

    #[test]
    fn hash_ignores_spelling_of_defaults_but_not_values() {
        let a = RawConfig::parse("").unwrap().resolve().unwrap().hash;
        let b = RawConfig::parse("eps_nl = 1.1\nthreads = 4").unwrap().resolve().unwrap().hash;
        let c = RawConfig::parse("eps_nl = 2").unwrap().resolve().unwrap().hash;
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn log_grid_endpoints_are_exact() {
        let g = DistanceGrid::new(1e-9, 1e-6, 4).unwrap();
        let p = g.points();
        assert_eq!(p[0], 1e-9);
        assert_eq!(p[3], 1e-6);
        assert!((p[1] / 1e-8 - 1.0).abs() < 1e-12);
        assert_eq!(DistanceGrid::new(2e-9, 2e-9, 1).unwrap().points(), vec![2e-9]);
    }
}
