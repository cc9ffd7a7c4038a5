//! Reduced-equation ingredients: the dilation mode and its energy, the
//! projection onto its complement, the integrals I₁ and I₂, c₀(δ), residual
//! norms, coefficient fits and the concentration scale δ*(β).

mod fit;
mod residual;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

pub use fit::{
    fit_coefficients, fit_separated, linear_least_squares, log_log_slope, two_term_norm_fit, CoefficientFit,
    SeparatedFit, TwoTermFit,
};
pub use residual::{piece_norm, residual_norms, residual_report, ResidualReport, ResidualSample};

use crate::bubbles::{bubble_profile, nonlinear_terms_eval, AnsatzFamily, KernelSum, C4};
use crate::error::{Error, Result};
use crate::field::{Field, PeakLayout, ScalarField, SymmetryTag};
use crate::geometry::{lattice_sum, torus_lattice_sum, Point4, LATTICE_A};
use crate::quadrature::{energy_product, integrate_vector, ErrorNorm, QuadratureSpec, VectorIntegrand};

/// ‖∇Z⁰‖² = 4π²/5.
pub const A1: f64 = 4.0 * PI * PI / 5.0;

/// ∫U³ = 8√2π².
pub const INT_U3: f64 = 8.0 * std::f64::consts::SQRT_2 * PI * PI;

/// ∫U⁴ = 32π²/3.
pub const INT_U4: f64 = 32.0 * PI * PI / 3.0;

/// Leading coefficient of −I₁/δ² as used by the reduced-equation model:
/// A·k³·∫U³ with A = 1/12.
pub fn predicted_c1(k: usize) -> f64 {
    LATTICE_A * (k as f64).powi(3) * INT_U3
}

/// Leading coefficient of I₂/(βδ²lnδ) in the model: ¼c₄³k.
pub fn predicted_c2(k: usize) -> f64 {
    0.25 * C4.powi(3) * k as f64
}

/// 𝔠₁/𝔠₂ = π²k²/6.
pub fn predicted_ratio(k: usize) -> f64 {
    PI * PI * (k * k) as f64 / 6.0
}

/// Finite-k leading coefficient of −I₁/δ²: k·Σ_{j≥2}|ξ₁−ξⱼ|⁻²·∫U³ on the
/// unit circle, i.e. k(k²−1)/12·∫U³.
pub fn finite_k_c1(k: usize) -> f64 {
    (k as f64) * lattice_sum(k, 1.0).unwrap_or(0.0) * INT_U3
}

/// Leading coefficient of I₂/(βδ²lnδ) with the full angular measure:
/// U(ξ)² ≈ 2 at |ξ| = 1 gives k·c₄·2·|S³|·c₄²/... = 2π²·¼c₄³k.
pub fn sphere_area_c2(k: usize) -> f64 {
    2.0 * PI * PI * predicted_c2(k)
}

/// The dilation mode Z and its energy, fixed once per family.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionContext {
    pub family: AnsatzFamily,
    pub z: KernelSum,
    pub z_energy: f64,
}

impl ProjectionContext {
    pub fn new(family: &AnsatzFamily, spec: &QuadratureSpec) -> Result<Self> {
        let z = family.kernel_sum();
        let z_energy = energy_product(&z, &z, spec)?;
        if !(z_energy > 0.0) {
            return Err(Error::Validation("non-positive energy of Z".into()));
        }
        Ok(ProjectionContext {
            family: family.clone(),
            z,
            z_energy,
        })
    }

    /// ⟨ψ, Z⟩ = ∫ψ·(−ΔZ).
    pub fn pairing(&self, psi: &dyn ScalarField, spec: &QuadratureSpec) -> Result<f64> {
        energy_product(psi, &self.z, spec)
    }
}

/// ‖∇Z‖² of the context.
pub fn z_energy(context: &ProjectionContext) -> f64 {
    context.z_energy
}

/// ψ − (⟨ψ,Z⟩/‖∇Z‖²)Z.
pub struct ProjectedField {
    inner: Field,
    z: KernelSum,
    pub coefficient: f64,
}

impl ScalarField for ProjectedField {
    fn eval(&self, x: &Point4) -> f64 {
        self.inner.eval(x) - self.coefficient * self.z.eval(x)
    }
    fn tag(&self) -> SymmetryTag {
        self.inner.tag().meet(self.z.tag())
    }
    fn peaks(&self) -> PeakLayout {
        self.inner.peaks().merge(&self.z.peaks())
    }
}

/// Remove the Z component of ψ in the gradient inner product.
pub fn project_out(context: &ProjectionContext, psi: Field, spec: &QuadratureSpec) -> Result<ProjectedField> {
    let c = context.pairing(&*psi, spec)?;
    Ok(ProjectedField {
        inner: psi,
        z: context.z.clone(),
        coefficient: c / context.z_energy,
    })
}

/// Per-δ reduction integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionSample {
    pub delta: f64,
    /// ∫(Ṽ³ − ΣU³)Z.
    pub i1: f64,
    /// β∫U²ṼZ.
    pub i2: f64,
    /// α∫ṼΣ_{r≥2}Ṽᵣ²Z (torus only, 0 otherwise).
    pub i_alpha: f64,
    /// ‖∇Z‖².
    pub z_energy: f64,
}

impl ReductionSample {
    pub fn numerator(&self) -> f64 {
        self.i1 + self.i2 + self.i_alpha
    }

    pub fn c0(&self) -> f64 {
        self.numerator() / self.z_energy
    }
}

/// All reduction integrals of one family from a single vector quadrature.
pub fn reduction_integrals(family: &AnsatzFamily, spec: &QuadratureSpec) -> Result<ReductionSample> {
    let d = family.delta();
    let sheet1 = family.config.sheet(1).to_vec();
    let eval = |x: &Point4, out: &mut [f64]| {
        let l = family.local(x);
        let mut z = 0.0;
        let mut lz = 0.0;
        for c in &sheet1 {
            let r2 = x.dist_sq(c) / (d * d);
            let zi = (1.0 - r2) / ((1.0 + r2) * (1.0 + r2)) / d;
            let ui = bubble_profile(d, x.dist_sq(c));
            z += zi;
            lz += 3.0 * ui * ui * zi;
        }
        out[0] = l.cross * z;
        out[1] = l.u * l.u * l.v() * z;
        out[2] = l.v() * l.other_sheets_sq() * z;
        out[3] = z * lz;
    };
    let r = integrate_vector(
        &VectorIntegrand {
            dim: 4,
            eval: &eval,
            tag: family.tag(),
            layout: family.peaks(),
            norm: ErrorNorm::Individual,
        },
        spec,
    )?;
    Ok(ReductionSample {
        delta: d,
        i1: r.values[0],
        i2: family.beta * r.values[1],
        i_alpha: family.alpha * r.values[2],
        z_energy: r.values[3],
    })
}

/// I₁ = ∫(V³ + ΔV)Z = ∫(V³ − ΣᵢU³_{δ,ξᵢ})Z.
pub fn i1_num(family: &AnsatzFamily, spec: &QuadratureSpec) -> Result<f64> {
    Ok(reduction_integrals(family, spec)?.i1)
}

/// I₂ = β∫U²VZ.
pub fn i2_num(family: &AnsatzFamily, spec: &QuadratureSpec) -> Result<f64> {
    Ok(reduction_integrals(family, spec)?.i2)
}

/// How c₀ is formed.
#[derive(Clone)]
pub enum C0Mode {
    /// (I₁ + I₂ [+ α term])/‖∇Z‖².
    LeadingOrder,
    /// Adds the pairings of 𝓝₂(φ,ψ) and −𝓛₂ψ with Z.
    WithCorrections { phi: Field, psi: Field },
}

/// c₀(δ) for the family rebuilt at width `delta`.
pub fn c0(family: &AnsatzFamily, delta: f64, spec: &QuadratureSpec, mode: &C0Mode) -> Result<f64> {
    let fam = rebuild(family, delta)?;
    let s = reduction_integrals(&fam, spec)?;
    match mode {
        C0Mode::LeadingOrder => Ok(s.c0()),
        C0Mode::WithCorrections { phi, psi } => {
            let z = fam.kernel_sum();
            let dz = fam.delta();
            let sheet1 = fam.config.sheet(1).to_vec();
            let eval = |x: &Point4, out: &mut [f64]| {
                let n = nonlinear_terms_eval(&fam, &**phi, &**psi, x);
                let zv = z.eval(x);
                let v = fam.sheet_value(1, x);
                let p = psi.eval(x);
                let mut lz = 0.0;
                for c in &sheet1 {
                    let r2 = x.dist_sq(c) / (dz * dz);
                    let zi = (1.0 - r2) / ((1.0 + r2) * (1.0 + r2)) / dz;
                    let ui = bubble_profile(dz, x.dist_sq(c));
                    lz += 3.0 * ui * ui * zi;
                }
                out[0] = n.n2 * zv;
                out[1] = 3.0 * v * v * p * zv;
                out[2] = p * lz;
            };
            let r = integrate_vector(
                &VectorIntegrand {
                    dim: 3,
                    eval: &eval,
                    tag: fam.tag().meet(psi.tag()).meet(phi.tag()),
                    layout: fam.peaks(),
                    norm: ErrorNorm::Max,
                },
                spec,
            )?;
            // ⟨𝓔₂ + 𝓝₂ − 𝓛₂ψ, Z⟩ with ⟨𝓛₂ψ, Z⟩ = ⟨ψ,Z⟩ − ∫3V²ψZ
            let num = s.numerator() + r.values[0] + r.values[1] - r.values[2];
            Ok(num / s.z_energy)
        }
    }
}

fn rebuild(family: &AnsatzFamily, delta: f64) -> Result<AnsatzFamily> {
    let config = match family.config.kind {
        crate::geometry::ConfigKind::Ring if family.config.k == 1 => {
            crate::geometry::Configuration::degenerate_single(delta)?
        }
        crate::geometry::ConfigKind::Ring => crate::geometry::Configuration::ring(family.k(), delta)?,
        crate::geometry::ConfigKind::Torus => {
            crate::geometry::Configuration::torus(family.k(), family.sheets(), delta)?
        }
    };
    let mut f = family.clone();
    f.config = config;
    Ok(f)
}

/// Family at another width, same couplings.
pub fn family_at(family: &AnsatzFamily, delta: f64) -> Result<AnsatzFamily> {
    rebuild(family, delta)
}

/// Geometric grid of `n` widths from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Root of −𝔞 + 𝔟β lnδ = 0 in d = −lnδ by bisection, for 𝔞/𝔟 = `ratio`.
/// Returns d.
pub fn solve_log_delta_star(beta: f64, ratio: f64) -> Result<f64> {
    if !(beta < 0.0) {
        return Err(Error::Domain(format!("beta must be negative, got {beta}")));
    }
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::Domain(format!("coefficient ratio must be positive, got {ratio}")));
    }
    // g(d) = −ratio + |β|d, increasing in d
    let g = |d: f64| -ratio + beta.abs() * d;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while g(hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Domain("no root of the two-term model".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// δ* = exp(−d_β) with the model ratio 𝔞/𝔟 = π²k²/6.
pub fn solve_delta_star(beta: f64, k: usize) -> Result<f64> {
    Ok((-solve_log_delta_star(beta, predicted_ratio(k))?).exp())
}

/// Everything the reduced equation needs along a δ grid.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub kind: String,
    pub k: usize,
    pub q: usize,
    pub beta: f64,
    pub alpha: f64,
    pub delta_grid: Vec<f64>,
    #[serde(rename = "I1_samples")]
    pub i1_samples: Vec<f64>,
    #[serde(rename = "I2_samples")]
    pub i2_samples: Vec<f64>,
    pub i_alpha_samples: Vec<f64>,
    pub z_energy_samples: Vec<f64>,
    pub c0_samples: Vec<f64>,
    pub fitted_c1: f64,
    pub fitted_c2: f64,
    pub predicted_c1: f64,
    pub predicted_c2: f64,
    pub a_coeff: f64,
    pub b_coeff: f64,
    pub delta_star: f64,
    pub delta_star_model: f64,
    pub fit_r_squared: f64,
    pub lattice_sum: f64,
    pub empirical_lattice_a: f64,
    pub finite_k_c1: f64,
    pub sphere_area_c2: f64,
    pub separated_fit: SeparatedFit,
}

impl ReductionReport {
    /// Rows (δ, I₁, I₂, c₀, model c₀) for plotting.
    pub fn csv(&self) -> String {
        let mut s = String::from("delta,I1,I2,c0,model\n");
        let a1k = A1 * self.k as f64;
        for i in 0..self.delta_grid.len() {
            let d = self.delta_grid[i];
            let model = (-self.fitted_c1 * d * d + self.fitted_c2 * self.beta * d * d * d.ln()) / a1k;
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::cli::fmt_f64(d),
                crate::cli::fmt_f64(self.i1_samples[i]),
                crate::cli::fmt_f64(self.i2_samples[i]),
                crate::cli::fmt_f64(self.c0_samples[i]),
                crate::cli::fmt_f64(model)
            ));
        }
        s
    }
}

/// Sample the reduction integrals over `delta_grid` and fit the two-term
/// model −𝔠₁δ² + 𝔠₂βδ²lnδ to the numerators.
pub fn reduction_report(family: &AnsatzFamily, delta_grid: &[f64], spec: &QuadratureSpec) -> Result<ReductionReport> {
    if delta_grid.is_empty() {
        return Err(Error::Validation("empty delta grid".into()));
    }
    let samples: Vec<ReductionSample> = delta_grid
        .par_iter()
        .map(|&d| reduction_integrals(&rebuild(family, d)?, spec))
        .collect::<Result<Vec<_>>>()?;
    let k = family.k();
    let beta = family.beta;
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.delta, s.numerator())).collect();
    let fit = fit_coefficients(&pts, beta)?;
    let separated = fit_separated(&samples, beta)?;
    let a1k = A1 * k as f64;
    let ratio = fit.c1 / fit.c2;
    let delta_star = match solve_log_delta_star(beta, ratio) {
        Ok(d) => (-d).exp(),
        Err(_) => f64::NAN,
    };
    let lsum = if family.is_torus() {
        torus_lattice_sum(&family.config)
    } else {
        lattice_sum(k, family.config.rho)?
    };
    Ok(ReductionReport {
        kind: if family.is_torus() { "torus".into() } else { "ring".into() },
        k,
        q: family.sheets(),
        beta,
        alpha: family.alpha,
        delta_grid: delta_grid.to_vec(),
        i1_samples: samples.iter().map(|s| s.i1).collect(),
        i2_samples: samples.iter().map(|s| s.i2).collect(),
        i_alpha_samples: samples.iter().map(|s| s.i_alpha).collect(),
        z_energy_samples: samples.iter().map(|s| s.z_energy).collect(),
        c0_samples: samples.iter().map(|s| s.c0()).collect(),
        fitted_c1: fit.c1,
        fitted_c2: fit.c2,
        predicted_c1: predicted_c1(k),
        predicted_c2: predicted_c2(k),
        a_coeff: fit.c1 / a1k,
        b_coeff: fit.c2 / a1k,
        delta_star,
        delta_star_model: solve_delta_star(beta, k)?,
        fit_r_squared: fit.r_squared,
        lattice_sum: lsum,
        empirical_lattice_a: lsum * family.config.rho.powi(2) / (k * k) as f64,
        finite_k_c1: finite_k_c1(k),
        sphere_area_c2: sphere_area_c2(k),
        separated_fit: separated,
    })
}

/// U²_{δ,ξ₁}U_{δ,ξ₂} for the ring pair, used by the cross-term bound.
pub fn cross_term_field(family: &AnsatzFamily) -> Field {
    let d = family.delta();
    let c1 = family.config.centers[0];
    let c2 = family.config.centers[1 % family.config.centers.len()];
    crate::field::field_fn(SymmetryTag::None, family.peaks(), move |x| {
        let a = bubble_profile(d, x.dist_sq(&c1));
        let b = bubble_profile(d, x.dist_sq(&c2));
        a * a * b
    })
}
