use rayon::prelude::*;
use serde::Serialize;

use super::fit::{log_log_slope, two_term_norm_fit, TwoTermFit};
use super::rebuild;
use crate::bubbles::{AnsatzFamily, ResidualComponent};
use crate::cli::fmt_f64;
use crate::error::Result;
use crate::quadrature::{integrate_vector, ErrorNorm, QuadratureSpec, VectorIntegrand};

const P: f64 = 4.0 / 3.0;

const PIECES: [ResidualComponent; 5] = [
    ResidualComponent::E1,
    ResidualComponent::E2,
    ResidualComponent::E2Cross,
    ResidualComponent::E2Beta,
    ResidualComponent::E2Alpha,
];

/// L^{4/3} norms of the error pieces at one width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSample {
    pub delta: f64,
    pub beta: f64,
    pub norm_e1: f64,
    pub norm_e2: f64,
    pub norm_e2_cross: f64,
    pub norm_e2_beta: f64,
    pub norm_e2_alpha: f64,
    /// Share of ∫|𝓔̄₂|^{4/3} carried by the peak balls.
    pub interior_share: f64,
    /// Same for 𝓔̄₁.
    pub interior_share_e1: f64,
}

pub fn residual_norms(family: &AnsatzFamily, spec: &QuadratureSpec) -> Result<ResidualSample> {
    let eval = |x: &crate::geometry::Point4, out: &mut [f64]| {
        let l = family.local(x);
        for (o, c) in out.iter_mut().zip(PIECES) {
            let v = c.from_local(family, &l).abs();
            *o = if v > 0.0 { v.powf(P) } else { 0.0 };
        }
    };
    let r = integrate_vector(
        &VectorIntegrand {
            dim: PIECES.len(),
            eval: &eval,
            tag: family.tag(),
            layout: family.peaks(),
            norm: ErrorNorm::Individual,
        },
        spec,
    )?;
    let norm = |j: usize| r.values[j].max(0.0).powf(1.0 / P);
    let share = |j: usize| {
        if r.values[j] > 0.0 {
            r.interior[j] / r.values[j]
        } else {
            0.0
        }
    };
    Ok(ResidualSample {
        delta: family.delta(),
        beta: family.beta,
        norm_e1: norm(0),
        norm_e2: norm(1),
        norm_e2_cross: norm(2),
        norm_e2_beta: norm(3),
        norm_e2_alpha: norm(4),
        interior_share: share(1),
        interior_share_e1: share(0),
    })
}

/// L^{4/3} norm of a single piece. A scalar integral, so scaling the
/// piece by a constant leaves the refinement pattern unchanged.
pub fn piece_norm(family: &AnsatzFamily, which: ResidualComponent, spec: &QuadratureSpec) -> Result<f64> {
    let eval = |x: &crate::geometry::Point4, out: &mut [f64]| {
        let v = which.eval(family, x).abs();
        out[0] = if v > 0.0 { v.powf(P) } else { 0.0 };
    };
    let r = integrate_vector(
        &VectorIntegrand {
            dim: 1,
            eval: &eval,
            tag: family.tag(),
            layout: family.peaks(),
            norm: ErrorNorm::Individual,
        },
        spec,
    )?;
    Ok(r.values[0].max(0.0).powf(1.0 / P))
}

/// Residual norms along a δ grid with their scaling fits.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub kind: String,
    pub k: usize,
    pub q: usize,
    pub beta: f64,
    pub alpha: f64,
    pub samples: Vec<ResidualSample>,
    /// Log-log slopes in δ.
    pub delta_exponent_e1: Option<f64>,
    pub delta_exponent_e2: Option<f64>,
    pub delta_exponent_e2_cross: Option<f64>,
    pub delta_exponent_e2_alpha: Option<f64>,
    /// log₂ of the norm ratio under β → 2β at the first grid point.
    pub beta_exponent_e1: f64,
    pub beta_exponent_e2_beta: f64,
    pub two_term_fit: Option<TwoTermFit>,
}

impl ResidualReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("delta,beta,norm_E1,norm_E2,interior_share\n");
        for r in &self.samples {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(r.delta),
                fmt_f64(r.beta),
                fmt_f64(r.norm_e1),
                fmt_f64(r.norm_e2),
                fmt_f64(r.interior_share)
            ));
        }
        s
    }
}

fn slope(samples: &[ResidualSample], f: impl Fn(&ResidualSample) -> f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.delta, f(s))).collect();
    log_log_slope(&pts).ok()
}

pub fn residual_report(family: &AnsatzFamily, delta_grid: &[f64], spec: &QuadratureSpec) -> Result<ResidualReport> {
    if delta_grid.is_empty() {
        return Err(crate::error::Error::Validation("empty delta grid".into()));
    }
    let samples: Vec<ResidualSample> = delta_grid
        .par_iter()
        .map(|&d| residual_norms(&rebuild(family, d)?, spec))
        .collect::<Result<Vec<_>>>()?;
    let first = rebuild(family, delta_grid[0])?;
    let doubled = first.with_beta(2.0 * family.beta);
    let ratio = |a: f64, b: f64| if a > 0.0 && b > 0.0 { (b / a).log2() } else { f64::NAN };
    let e1 = ratio(
        piece_norm(&first, ResidualComponent::E1, spec)?,
        piece_norm(&doubled, ResidualComponent::E1, spec)?,
    );
    let e2b = ratio(
        piece_norm(&first, ResidualComponent::E2Beta, spec)?,
        piece_norm(&doubled, ResidualComponent::E2Beta, spec)?,
    );
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.delta, s.norm_e2)).collect();
    Ok(ResidualReport {
        kind: if family.is_torus() { "torus".into() } else { "ring".into() },
        k: family.k(),
        q: family.sheets(),
        beta: family.beta,
        alpha: family.alpha,
        delta_exponent_e1: slope(&samples, |s| s.norm_e1),
        delta_exponent_e2: slope(&samples, |s| s.norm_e2),
        delta_exponent_e2_cross: slope(&samples, |s| s.norm_e2_cross),
        delta_exponent_e2_alpha: slope(&samples, |s| s.norm_e2_alpha),
        beta_exponent_e1: e1,
        beta_exponent_e2_beta: e2b,
        two_term_fit: two_term_norm_fit(&pts, family.beta.abs()).ok(),
        samples,
    })
}
