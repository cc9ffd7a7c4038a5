//! Deterministic adaptive integration over R^4.
//!
//! Space is split by a smooth partition of unity into balls of radius
//! ϑ = peak_radius × (minimal center distance) around every peak and a
//! compactified exterior. Each ball uses polar coordinates with a logarithmic
//! radial map resolving the width δ; the exterior is folded into the unit
//! ball by inversion (or mapped by a tangent-type stretch). All charts share
//! one global adaptive Genz–Malik pool.

mod adaptive;
mod genz_malik;

use serde::{Deserialize, Serialize};

pub use adaptive::{integrate_vector, ErrorNorm, VectorIntegrand, VectorResult};

use crate::error::{Error, Result};
use crate::field::{ScalarField, SmoothField};
use crate::geometry::Point4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExteriorMap {
    /// x ↦ x/|x|², folding |x| > 1 onto the unit ball with Jacobian |x|⁻⁸.
    Inversion,
    /// |x| = s/(1−s), s ∈ [0, 1).
    TangentMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub peak_radius: f64,
    pub use_symmetry: bool,
    pub exterior_map: ExteriorMap,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 1_000_000,
            peak_radius: 0.45,
            use_symmetry: true,
            exterior_map: ExteriorMap::Inversion,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        QuadratureSpec {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Validation(format!("rel_tol {} outside (0,1)", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::Validation(format!("abs_tol {} must be positive", self.abs_tol)));
        }
        if !(self.peak_radius > 0.0 && self.peak_radius < 0.5) {
            return Err(Error::Validation(format!(
                "peak_radius {} outside (0, 1/2)",
                self.peak_radius
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Validation("max_subdivisions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub regions: usize,
}

/// ∫_{R⁴} f, using the field's peak layout and (when licensed by its tag
/// and `spec.use_symmetry`) the rotation reduction.
pub fn integrate(f: &dyn ScalarField, spec: &QuadratureSpec) -> Result<IntegralResult> {
    let eval = |x: &Point4, out: &mut [f64]| out[0] = f.eval(x);
    let r = integrate_vector(
        &VectorIntegrand {
            dim: 1,
            eval: &eval,
            tag: f.tag(),
            layout: f.peaks(),
            norm: ErrorNorm::Individual,
        },
        spec,
    )?;
    Ok(r.scalar())
}

/// (∫|f|ᵖ)^{1/p}.
pub fn lp_norm(f: &dyn ScalarField, p: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p = {p} < 1")));
    }
    let eval = |x: &Point4, out: &mut [f64]| out[0] = f.eval(x).abs().powf(p);
    let r = integrate_vector(
        &VectorIntegrand {
            dim: 1,
            eval: &eval,
            tag: f.tag(),
            layout: f.peaks(),
            norm: ErrorNorm::Individual,
        },
        spec,
    )?;
    Ok(r.values[0].max(0.0).powf(1.0 / p))
}

/// ⟨f, g⟩ = ∫∇f·∇g computed as ∫ f·(−Δg) with g's exact Laplacian.
pub fn energy_product(f: &dyn ScalarField, g: &dyn SmoothField, spec: &QuadratureSpec) -> Result<f64> {
    let eval = |x: &Point4, out: &mut [f64]| out[0] = -f.eval(x) * g.laplacian(x);
    let r = integrate_vector(
        &VectorIntegrand {
            dim: 1,
            eval: &eval,
            tag: f.tag().meet(g.tag()),
            layout: f.peaks().merge(&g.peaks()),
            norm: ErrorNorm::Individual,
        },
        spec,
    )?;
    Ok(r.values[0])
}

/// Neumaier-compensated sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
