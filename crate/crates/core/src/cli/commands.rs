use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{Map, Value};

use super::{default_reduce_grid, default_residual_grid, fmt_f64, RunConfig};
use crate::bubbles::{ansatz_field, AnsatzFamily, C4};
use crate::error::{Error, Result};
use crate::geometry::{
    ring_symmetry_ops, sample_points, symmetry_report, torus_symmetry_ops, Configuration, Point4, SymmetryEntry,
    SymmetryOp, SymmetryReport,
};
use crate::reduction::{
    predicted_ratio, reduction_report, residual_report, solve_log_delta_star, ReductionReport, ResidualReport,
};
use crate::solver::{
    ansatz_residual_norm, assemble_linearized, build_basis, exact_kernel_singular_value, gauss_newton_full,
    projected_fixed_point_with, residual_sq, spectrum_report, FamilyResidual, GalerkinBasis, LinearizedOperator,
    SolveState, SpectrumReport,
};

const SYMMETRY_SAMPLES: usize = 200;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct CenterInfo {
    /// 1-based index within the sheet.
    pub index: usize,
    pub sheet: usize,
    pub position: Point4,
    pub norm: f64,
    /// c₄/δ, the maximum of the single bubble.
    pub bubble_peak: f64,
    /// The sheet's bubble sum at the center.
    pub ansatz_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedReport {
    pub field: String,
    pub report: SymmetryReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnsatzDescription {
    pub config: Configuration,
    pub rho: f64,
    pub beta: f64,
    pub alpha: f64,
    pub m: usize,
    pub min_center_distance: f64,
    pub centers: Vec<CenterInfo>,
    pub symmetry: Vec<NamedReport>,
    pub all_symmetries_passed: bool,
}

/// Max over samples of |Ṽᵣ(x) − Ṽ₁(𝒯ᵣx)|, r = 2..q.
fn sheet_relations(family: &AnsatzFamily, samples: usize, tol: f64) -> SymmetryReport {
    let q = family.sheets();
    let points = sample_points(samples, 0x5eed);
    let entries = (2..=q)
        .map(|r| {
            let m = *SymmetryOp::sheet_map(r, q).matrix().expect("orthogonal");
            let dev = points
                .iter()
                .map(|x| (family.sheet_value(r, x) - family.sheet_value(1, &x.transform(&m))).abs())
                .fold(0.0, f64::max);
            SymmetryEntry {
                op: format!("sheet {r} = sheet 1 after T_{r}"),
                max_deviation: dev,
                passed: dev <= tol,
            }
        })
        .collect();
    SymmetryReport {
        samples,
        tol,
        entries,
    }
}

/// Symmetry reports of every ansatz component under its declared class.
pub fn ansatz_symmetry(family: &AnsatzFamily) -> Result<Vec<NamedReport>> {
    let k = family.k();
    let mut out = Vec::new();
    if family.is_torus() {
        // the other sheets follow from sheet 1 through the sheet relations
        out.push(NamedReport {
            field: "V_1".into(),
            report: symmetry_report(
                &ansatz_field(family, 1)?,
                &torus_symmetry_ops(k, None),
                SYMMETRY_SAMPLES,
                SYMMETRY_TOL,
            ),
        });
        out.push(NamedReport {
            field: "U".into(),
            report: symmetry_report(
                &ansatz_field(family, family.m)?,
                &torus_symmetry_ops(k, Some(family.sheets())),
                SYMMETRY_SAMPLES,
                SYMMETRY_TOL,
            ),
        });
        out.push(NamedReport {
            field: "sheets".into(),
            report: sheet_relations(family, SYMMETRY_SAMPLES, SYMMETRY_TOL),
        });
    } else {
        let ops = ring_symmetry_ops(k);
        out.push(NamedReport {
            field: "V".into(),
            report: symmetry_report(&ansatz_field(family, 1)?, &ops, SYMMETRY_SAMPLES, SYMMETRY_TOL),
        });
        out.push(NamedReport {
            field: "U".into(),
            report: symmetry_report(&ansatz_field(family, 2)?, &ops, SYMMETRY_SAMPLES, SYMMETRY_TOL),
        });
    }
    Ok(out)
}

pub fn cmd_construct(cfg: &RunConfig) -> Result<AnsatzDescription> {
    let family = cfg.family()?;
    let c = &family.config;
    let k = c.k;
    let centers = c
        .centers
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let sheet = i / k + 1;
            CenterInfo {
                index: i % k + 1,
                sheet,
                position: *p,
                norm: p.norm(),
                bubble_peak: C4 / c.delta,
                ansatz_value: family.sheet_value(sheet, p),
            }
        })
        .collect();
    let symmetry = ansatz_symmetry(&family)?;
    Ok(AnsatzDescription {
        rho: c.rho,
        beta: family.beta,
        alpha: family.alpha,
        m: family.m,
        min_center_distance: c.min_center_distance(),
        centers,
        all_symmetries_passed: symmetry.iter().all(|s| s.report.all_passed()),
        symmetry,
        config: c.clone(),
    })
}

pub fn cmd_residual(cfg: &RunConfig) -> Result<ResidualReport> {
    let grid = cfg.grid_or(default_residual_grid());
    residual_report(&cfg.family()?, &grid, &cfg.quadrature)
}

pub fn cmd_reduce(cfg: &RunConfig) -> Result<ReductionReport> {
    let grid = cfg.grid_or(default_reduce_grid());
    reduction_report(&cfg.family()?, &grid, &cfg.quadrature)
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneRow {
    pub k: usize,
    pub beta: f64,
    /// 𝔞/𝔟 of the two-term model.
    pub ratio: f64,
    /// Bisection root d_β = −ln δ*.
    pub d_beta: f64,
    pub delta_star: f64,
    /// exp(−π²k²/(6|β|)).
    pub closed_form: f64,
    /// |d_β − π²k²/(6|β|)| / (π²k²/(6|β|)).
    pub log_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneTable {
    pub rows: Vec<TuneRow>,
}

impl TuneTable {
    pub fn csv(&self) -> String {
        let mut s = String::from("k,beta,d_beta,delta_star,closed_form,log_rel_error\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.k,
                fmt_f64(r.beta),
                fmt_f64(r.d_beta),
                fmt_f64(r.delta_star),
                fmt_f64(r.closed_form),
                fmt_f64(r.log_rel_error)
            ));
        }
        s
    }
}

pub fn tune_row(k: usize, beta: f64) -> Result<TuneRow> {
    let ratio = predicted_ratio(k);
    let d = solve_log_delta_star(beta, ratio)?;
    let exact = PI * PI * (k * k) as f64 / (6.0 * beta.abs());
    Ok(TuneRow {
        k,
        beta,
        ratio,
        d_beta: d,
        delta_star: (-d).exp(),
        closed_form: (-exact).exp(),
        log_rel_error: (d - exact).abs() / exact,
    })
}

pub fn cmd_tune(cfg: &RunConfig) -> Result<TuneTable> {
    let mut rows = Vec::new();
    for &k in &cfg.tune.ks {
        for &b in &cfg.tune.betas {
            rows.push(tune_row(k, b)?);
        }
    }
    Ok(TuneTable { rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisSummary {
    pub delta: f64,
    pub widths: Vec<f64>,
    pub exponents: Vec<f64>,
    pub phi_labels: Vec<String>,
    pub psi_labels: Vec<String>,
    pub phi_condition: f64,
    pub psi_condition: f64,
    pub gram_asymmetry: f64,
}

impl BasisSummary {
    fn new(b: &GalerkinBasis) -> Self {
        BasisSummary {
            delta: b.family.delta(),
            widths: b.widths.clone(),
            exponents: b.exponents.clone(),
            phi_labels: b.phi.iter().map(|e| e.label.clone()).collect(),
            psi_labels: b.psi_frame().iter().map(|e| e.label.clone()).collect(),
            phi_condition: b.phi_condition,
            psi_condition: b.psi_condition,
            gram_asymmetry: b.gram_asymmetry,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumOutput {
    pub basis: BasisSummary,
    pub spectrum: SpectrumReport,
    /// Smallest singular value for span{Z⁰, U, U_{1/2}, U_2} with
    /// potential 3U²; zero up to quadrature error.
    pub exact_kernel_singular_value: f64,
    #[serde(skip)]
    pub operator: Option<LinearizedOperator>,
}

impl SpectrumOutput {
    /// Gram and form matrices for CSV export.
    pub fn matrices(&self) -> Vec<(&'static str, &DMatrix<f64>)> {
        match &self.operator {
            Some(op) => vec![
                ("phi_gram", &op.phi.gram),
                ("phi_form", &op.phi.form),
                ("psi_gram", &op.psi.gram),
                ("psi_form", &op.psi.form),
            ],
            None => Vec::new(),
        }
    }
}

fn basis_for(cfg: &RunConfig, family: &AnsatzFamily) -> Result<GalerkinBasis> {
    build_basis(family, cfg.solver.widths, cfg.solver.radial, &cfg.solver.quadrature)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<SpectrumOutput> {
    let family = cfg.family()?;
    let basis = basis_for(cfg, &family)?;
    let op = assemble_linearized(&family, &basis, &cfg.solver.quadrature)?;
    Ok(SpectrumOutput {
        basis: BasisSummary::new(&basis),
        spectrum: spectrum_report(&op, &basis)?,
        exact_kernel_singular_value: exact_kernel_singular_value(&cfg.solver.quadrature)?,
        operator: Some(op),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub trivial: bool,
    pub delta: f64,
    pub beta: f64,
    pub basis: BasisSummary,
    pub fixed_point: SolveState,
    /// L² norm of the full strong residual at zero correction.
    pub ansatz_residual: f64,
    /// The same at the fixed point.
    pub fixed_point_residual: f64,
    pub gauss_newton: Option<SolveState>,
    /// ansatz_residual over the final residual.
    pub residual_reduction: f64,
}

impl SolveReport {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("stage,iteration,value,contraction\n");
        for (i, v) in self.fixed_point.history.iter().enumerate() {
            let c = if i == 0 {
                f64::NAN
            } else {
                self.fixed_point.contraction.get(i - 1).copied().unwrap_or(f64::NAN)
            };
            s.push_str(&format!("picard,{},{},{}\n", i + 1, fmt_f64(*v), fmt_f64(c)));
        }
        if let Some(g) = &self.gauss_newton {
            for (i, v) in g.history.iter().enumerate() {
                s.push_str(&format!("gauss_newton,{},{},NaN\n", i, fmt_f64(*v)));
            }
        }
        s
    }
}

/// The single bubble with β = 0: the ansatz is exact, so the fixed point
/// is zero.
pub fn trivial_family(delta: f64) -> Result<AnsatzFamily> {
    AnsatzFamily::decoupled(Configuration::degenerate_single(delta)?, 0.0)
}

pub fn cmd_solve(cfg: &RunConfig, trivial: bool) -> Result<SolveReport> {
    let family = if trivial {
        trivial_family(cfg.delta)?
    } else {
        cfg.family()?
    };
    let spec = &cfg.solver.quadrature;
    let basis = basis_for(cfg, &family)?;
    let op = assemble_linearized(&family, &basis, spec)?;
    let state = projected_fixed_point_with(&family, &basis, &op, cfg.solver.max_iter, cfg.solver.tol, spec)?;
    let raw = ansatz_residual_norm(&family, &basis, spec)?;
    let problem = FamilyResidual::new(&family, &basis);
    let mut c = state.phi.clone();
    c.extend_from_slice(&state.psi);
    let at_fixed_point = residual_sq(&problem, &c, spec)?.sqrt();
    let gn = if cfg.solver.gauss_newton_iter > 0 {
        Some(gauss_newton_full(&family, &basis, &state, cfg.solver.gauss_newton_iter, spec)?)
    } else {
        None
    };
    let last = gn
        .as_ref()
        .and_then(|g| g.history.last().copied())
        .unwrap_or(at_fixed_point);
    Ok(SolveReport {
        trivial,
        delta: family.delta(),
        beta: family.beta,
        basis: BasisSummary::new(&basis),
        fixed_point: state,
        ansatz_residual: raw,
        fixed_point_residual: at_fixed_point,
        gauss_newton: gn,
        residual_reduction: if last > 0.0 { raw / last } else { f64::INFINITY },
    })
}

/// Outputs bundled by `report`, in this order.
pub const REPORT_INPUTS: [&str; 7] = ["ansatz", "residual", "reduce", "tune", "spectrum", "solve", "verify"];

/// Bundle the JSON outputs present in `dir`.
pub fn cmd_report(dir: &Path) -> Result<Value> {
    let mut outputs = Map::new();
    let mut missing = Vec::new();
    for name in REPORT_INPUTS {
        let p = dir.join(format!("{name}.json"));
        if p.exists() {
            let v: Value = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
            outputs.insert(name.into(), v);
        } else {
            missing.push(Value::String(name.into()));
        }
    }
    if outputs.is_empty() {
        return Err(Error::Validation(format!(
            "no subcommand outputs found in {}",
            dir.display()
        )));
    }
    let mut report = Map::new();
    report.insert("present".into(), Value::Array(outputs.keys().cloned().map(Value::String).collect()));
    report.insert("missing".into(), Value::Array(missing));
    report.insert("outputs".into(), Value::Object(outputs));
    Ok(Value::Object(report))
}
