//! Subcommand bodies. Each returns a table; rows keep grid order.

use crate::config::RunConfig;
use crate::{CliError, Command};
use nlcasimir::lab::{verify_suite, LabConfig};
use nlcasimir::{
    crossover_distance, i_lin_high_t, i_lin_zero_t, i_nl_high_t, i_nl_zero_t, pressure,
    pressure_nonlinear, pressure_transparent_mirror, Crossover, LayerStack, MaterialResponse,
    Permittivity, Temperature,
};
use rayon::prelude::*;

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Diagnostics for stderr.
    pub notes: Vec<String>,
    /// Set when the numbers are present but not trustworthy.
    pub failure: Option<String>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
            notes: Vec::new(),
            failure: None,
        }
    }

    pub fn render(&self, hash: &str) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&format!("# config-hash: {hash}\n"));
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    fn unconverged(&mut self, count: usize) {
        if count > 0 {
            self.failure = Some(format!("{count} row(s) did not reach the requested tolerance"));
        }
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        // + 0.0 folds −0 into 0.
        format!("{:.16e}", x + 0.0)
    } else {
        format!("{x}")
    }
}

fn kelvin(t: Temperature) -> f64 {
    t.kelvin().unwrap_or(0.0)
}

fn config_err(e: nlcasimir::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn stack(cfg: &RunConfig, gap: f64) -> Result<LayerStack, CliError> {
    LayerStack::new(cfg.nonlinear.clone(), cfg.linear.clone(), gap, cfg.temperature).map_err(config_err)
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Table, CliError> {
    match command {
        Command::Pressure => pressure_rows(cfg, &[cfg.distance]),
        Command::ScanDistance => pressure_rows(cfg, &cfg.grid.points()),
        Command::ScanEpsilon => scan_epsilon(cfg),
        Command::Transparent => transparent(cfg),
        Command::Crossover => crossover(cfg),
        Command::Verify => verify(cfg),
    }
}

fn pressure_rows(cfg: &RunConfig, gaps: &[f64]) -> Result<Table, CliError> {
    let stacks: Vec<LayerStack> = gaps.iter().map(|&d| stack(cfg, d)).collect::<Result<_, _>>()?;
    let results: Vec<_> = stacks.par_iter().map(|s| pressure(s, cfg.tol)).collect();
    let mut t = Table::new(vec!["d", "T", "P_lin", "P_nl", "P_total", "err_lin", "err_nl"]);
    let t_k = kelvin(cfg.temperature);
    for (d, r) in gaps.iter().zip(&results) {
        t.rows.push(
            [*d, t_k, r.p_linear, r.p_nonlinear, r.p_total, r.err_linear, r.err_nonlinear]
                .map(num)
                .to_vec(),
        );
    }
    t.unconverged(results.iter().filter(|r| !r.converged).count());
    Ok(t)
}

fn scan_epsilon(cfg: &RunConfig) -> Result<Table, CliError> {
    type IFn = fn(f64, f64, nlcasimir::Tolerance) -> nlcasimir::Result<nlcasimir::IntegrationResult>;
    let (lin, nl): (IFn, IFn) = match cfg.temperature {
        Temperature::Zero => (i_lin_zero_t, i_nl_zero_t),
        Temperature::High(_) => (i_lin_high_t, i_nl_high_t),
        Temperature::Finite(_) => {
            return Err(CliError::Config(
                "scan-epsilon tabulates the T -> 0 and T -> inf functions; use regime = zero or high".into(),
            ))
        }
    };
    let pairs: Vec<(f64, f64)> = cfg
        .eps_lin_values
        .iter()
        .flat_map(|&el| cfg.eps_nl_values.iter().map(move |&en| (el, en)))
        .collect();
    let results = pairs
        .par_iter()
        .map(|&(el, en)| Ok((lin(en, el, cfg.tol)?, nl(en, el, cfg.tol)?)))
        .collect::<nlcasimir::Result<Vec<_>>>()
        .map_err(config_err)?;
    let mut t = Table::new(vec!["eps_lin", "eps_nl", "I_lin", "err_lin", "I_nl", "err_nl"]);
    let mut bad = 0;
    for ((el, en), (a, b)) in pairs.iter().zip(&results) {
        t.rows.push([*el, *en, a.value, a.abs_error, b.value, b.abs_error].map(num).to_vec());
        bad += usize::from(!(a.converged && b.converged));
    }
    t.unconverged(bad);
    Ok(t)
}

fn transparent(cfg: &RunConfig) -> Result<Table, CliError> {
    let gaps = cfg.grid.points();
    let plate = MaterialResponse::new(Permittivity::Constant(1.0), cfg.chi3).map_err(config_err)?;
    let stacks: Vec<LayerStack> = gaps
        .iter()
        .map(|&d| LayerStack::new(plate.clone(), MaterialResponse::perfect_mirror(), d, cfg.temperature))
        .collect::<nlcasimir::Result<_>>()
        .map_err(config_err)?;
    let results = stacks
        .par_iter()
        .map(|s| {
            let general = pressure_nonlinear(s, cfg.tol);
            let closed = pressure_transparent_mirror(s.gap, s.temperature, cfg.chi3, cfg.tol)?;
            Ok((general, closed))
        })
        .collect::<nlcasimir::Result<Vec<_>>>()
        .map_err(config_err)?;
    let mut t = Table::new(vec!["d", "T", "P_nl", "P_transparent", "err_nl", "err_transparent", "rel_diff"]);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for (d, (g, c)) in gaps.iter().zip(&results) {
        let rel = if c.value == 0.0 && g.value == 0.0 {
            0.0
        } else {
            (g.value / c.value - 1.0).abs()
        };
        worst = worst.max(rel);
        bad += usize::from(!(g.converged && c.converged));
        t.rows.push(
            [*d, kelvin(cfg.temperature), g.value, c.value, g.error, c.error, rel]
                .map(num)
                .to_vec(),
        );
    }
    t.notes.push(format!(
        "transparent plate vs mirror: largest relative difference between the two paths {worst:.3e}"
    ));
    t.unconverged(bad);
    Ok(t)
}

fn crossover(cfg: &RunConfig) -> Result<Table, CliError> {
    let s = stack(cfg, cfg.distance)?;
    let mut t = Table::new(vec!["T", "d_star", "iterations"]);
    match crossover_distance(&s, cfg.tol).map_err(config_err)? {
        Crossover::Found { distance, iterations } => {
            t.rows.push(vec![num(kelvin(cfg.temperature)), num(distance), iterations.to_string()]);
        }
        Crossover::None => {
            t.rows.push(vec![num(kelvin(cfg.temperature)), num(f64::NAN), "0".into()]);
            t.notes.push("no crossover inside the search window".into());
        }
    }
    Ok(t)
}

fn verify(cfg: &RunConfig) -> Result<Table, CliError> {
    let lab = LabConfig {
        n: cfg.lab.n,
        length: cfg.lab.length,
        k0: cfg.lab.k0,
        eta: cfg.lab.eta,
        b: cfg.lab.b,
        ..LabConfig::default()
    }
    .with_chi_scaled(cfg.lab.chi_scale);
    let checks = verify_suite(&lab, cfg.seed).map_err(config_err)?;
    let mut t = Table::new(vec!["check", "value", "limit", "pass"]);
    let mut failed = Vec::new();
    for c in &checks {
        t.rows.push(vec![c.name.to_string(), num(c.value), num(c.limit), c.pass.to_string()]);
        if !c.pass {
            failed.push(c.name);
        }
    }
    if !failed.is_empty() {
        t.failure = Some(format!("verification checks failed: {}", failed.join(", ")));
    }
    Ok(t)
}
