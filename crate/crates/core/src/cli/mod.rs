//! Command-line front end: configuration, subcommands and report emission.
//!
//! Every subcommand writes its value output (`<name>.json`, optionally CSV)
//! deterministically; wall-clock data goes to `<command>.meta.json`.

mod commands;
mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub use commands::{
    ansatz_symmetry, cmd_construct, cmd_reduce, cmd_report, cmd_residual, cmd_solve, cmd_spectrum, cmd_tune,
    trivial_family, tune_row, AnsatzDescription, BasisSummary, CenterInfo, NamedReport, SolveReport,
    SpectrumOutput, TuneRow, TuneTable,
};
pub use output::{error_json, to_json_string, Sink};
pub use verify::{
    cmd_verify, fd_laplacian, fd_orders, fd_points, identity_defect, kernel_pairing, symmetrized_random_field,
    uneven_field, CheckResult, VerifySummary, FD_STEPS,
};

use crate::bubbles::AnsatzFamily;
use crate::error::{Error, Result};
use crate::geometry::{ConfigKind, Configuration};
use crate::quadrature::QuadratureSpec;
use crate::reduction::log_grid;

/// Shortest decimal with 17 significant digits, round-trip exact.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{:.16e}", v)
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

/// Galerkin and iteration settings for `spectrum` and `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Bubble widths per space.
    pub widths: usize,
    /// Radial envelopes per space.
    pub radial: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Gauss–Newton steps after the fixed point; 0 disables.
    pub gauss_newton_iter: usize,
    pub quadrature: QuadratureSpec,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            widths: 3,
            radial: 3,
            max_iter: 50,
            tol: 1e-10,
            gauss_newton_iter: 0,
            quadrature: QuadratureSpec::with_tolerances(1e-6, 1e-12),
        }
    }
}

/// Options of `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneParams {
    pub betas: Vec<f64>,
    pub ks: Vec<usize>,
}

impl Default for TuneParams {
    fn default() -> Self {
        TuneParams {
            betas: vec![-1.0, -0.5, -0.1],
            ks: vec![2, 3, 4],
        }
    }
}

/// Everything a run needs. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ConfigKind,
    pub k: usize,
    pub q: usize,
    pub delta: f64,
    /// δ samples for `residual` and `reduce`; each has its own default.
    pub delta_grid: Option<Vec<f64>>,
    pub beta: f64,
    pub alpha: f64,
    pub quadrature: QuadratureSpec,
    pub solver: SolverParams,
    pub tune: TuneParams,
    /// Output directory, overridden by `--out`.
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: ConfigKind::Ring,
            k: 2,
            q: 1,
            delta: 0.05,
            delta_grid: None,
            beta: -0.05,
            alpha: 0.0,
            quadrature: QuadratureSpec::default(),
            solver: SolverParams::default(),
            tune: TuneParams::default(),
            out: None,
        }
    }
}

/// Default grid of `reduce`.
pub fn default_reduce_grid() -> Vec<f64> {
    log_grid(1e-3, 1e-1, 7)
}

/// Default grid of `residual`.
pub fn default_residual_grid() -> Vec<f64> {
    log_grid(1e-4, 1e-1, 7)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn configuration(&self) -> Result<Configuration> {
        let c = match self.kind {
            ConfigKind::Ring => {
                if self.q != 1 {
                    return Err(Error::InvalidConfiguration(format!(
                        "ring configuration requires q = 1, got {}",
                        self.q
                    )));
                }
                Configuration::ring(self.k, self.delta)?
            }
            ConfigKind::Torus => Configuration::torus(self.k, self.q, self.delta)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn family(&self) -> Result<AnsatzFamily> {
        AnsatzFamily::new(self.configuration()?, self.beta, self.alpha)
    }

    /// Module-level checks shared by every subcommand.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta < 0.0) {
            return Err(Error::Validation(format!("beta must be negative, got {}", self.beta)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Validation("alpha must be finite".into()));
        }
        self.configuration()?;
        self.quadrature.validate()?;
        self.solver.quadrature.validate()?;
        if let Some(g) = &self.delta_grid {
            check_grid(g)?;
        }
        if self.solver.widths == 0 || self.solver.radial == 0 {
            return Err(Error::Validation("basis sizes must be positive".into()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::Validation("solver tol must be positive".into()));
        }
        for &b in &self.tune.betas {
            if !(b < 0.0) {
                return Err(Error::Validation(format!("tune beta must be negative, got {b}")));
            }
        }
        for &k in &self.tune.ks {
            if k < 2 {
                return Err(Error::Validation(format!("tune k must be at least 2, got {k}")));
            }
        }
        Ok(())
    }

    pub fn grid_or(&self, default: Vec<f64>) -> Vec<f64> {
        self.delta_grid.clone().unwrap_or(default)
    }
}

fn check_grid(g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::Validation("empty delta grid".into()));
    }
    for &d in g {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::Validation(format!("grid width {d} outside (0,1)")));
        }
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "critsys", version, about = "Multi-bubble ansatz diagnostics for a critical system in R^4")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "both")]
    pub format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Centers, peak values and symmetry report of the ansatz.
    Construct,
    /// Residual norms along the δ grid.
    Residual,
    /// Reduced-equation integrals, coefficient fit and δ*.
    Reduce,
    /// δ*(β) table from the two-term model.
    Tune,
    /// Spectrum of the linearized form on the Galerkin basis.
    Spectrum,
    /// Projected fixed point, optionally followed by Gauss–Newton.
    Solve {
        /// Single bubble with β = 0 instead of the configured family.
        #[arg(long)]
        trivial: bool,
    },
    /// Invariant suite; nonzero exit on any failed check.
    Verify,
    /// Collect existing outputs of the output directory into report.json.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Construct => "construct",
            Command::Residual => "residual",
            Command::Reduce => "reduce",
            Command::Tune => "tune",
            Command::Spectrum => "spectrum",
            Command::Solve { .. } => "solve",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    config_path: Option<String>,
    threads: usize,
    unix_time: u64,
    elapsed_seconds: f64,
    files: Vec<String>,
}

/// Run one subcommand; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let sink = Sink::new(out, cli.format)?;
    let start = Instant::now();
    let run_cmd = || dispatch(&cli.command, &cfg, &sink);
    let files = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?
            .install(run_cmd)?,
        None => run_cmd()?,
    };
    let meta = Metadata {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        threads: cli.threads.unwrap_or_else(rayon::current_num_threads),
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        files: files.iter().map(|p| p.display().to_string()).collect(),
    };
    let mut all = files;
    all.push(sink.write_meta(cli.command.name(), &meta)?);
    Ok(all)
}

fn dispatch(command: &Command, cfg: &RunConfig, sink: &Sink) -> Result<Vec<PathBuf>> {
    if !matches!(command, Command::Report | Command::Verify) {
        cfg.validate()?;
    }
    let mut files = Vec::new();
    match command {
        Command::Construct => {
            let d = cmd_construct(cfg)?;
            files.extend(sink.json("ansatz", &d)?);
        }
        Command::Residual => {
            let r = cmd_residual(cfg)?;
            files.extend(sink.json("residual", &r)?);
            files.extend(sink.csv("residual", &r.csv())?);
        }
        Command::Reduce => {
            let r = cmd_reduce(cfg)?;
            files.extend(sink.json("reduce", &r)?);
            files.extend(sink.csv("reduce", &r.csv())?);
        }
        Command::Tune => {
            let t = cmd_tune(cfg)?;
            files.extend(sink.json("tune", &t)?);
            files.extend(sink.csv("tune", &t.csv())?);
        }
        Command::Spectrum => {
            let s = cmd_spectrum(cfg)?;
            files.extend(sink.json("spectrum", &s)?);
            for (name, m) in s.matrices() {
                files.extend(sink.csv(name, &output::matrix_csv(m))?);
            }
        }
        Command::Solve { trivial } => {
            let s = cmd_solve(cfg, *trivial)?;
            files.extend(sink.json("solve", &s)?);
            files.extend(sink.csv("solve_history", &s.history_csv())?);
        }
        Command::Verify => {
            let v = cmd_verify(cfg)?;
            files.extend(sink.json("verify", &v)?);
            files.extend(sink.csv("verify", &v.csv())?);
            if v.failed > 0 {
                return Err(Error::VerificationFailed {
                    failed: v.failed,
                    total: v.checks.len(),
                });
            }
        }
        Command::Report => {
            let r = cmd_report(sink.dir())?;
            files.extend(sink.json("report", &r)?);
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(RunConfig::from_json(r#"{"kind":"ring","kk":2}"#).is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = RunConfig::from_json(r#"{"k":3,"quadrature":{"rel_tol":1e-7}}"#).unwrap();
        assert_eq!(c.k, 3);
        assert_eq!(c.quadrature.rel_tol, 1e-7);
        assert_eq!(c.quadrature.abs_tol, 1e-12);
        assert_eq!(c.beta, -0.05);
    }

    #[test]
    fn odd_torus_rejected_with_code_2() {
        let c = RunConfig::from_json(r#"{"kind":"torus","k":3,"q":2}"#).unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn nonnegative_beta_rejected() {
        let c = RunConfig {
            beta: 0.1,
            ..Default::default()
        };
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn fmt_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }
}
