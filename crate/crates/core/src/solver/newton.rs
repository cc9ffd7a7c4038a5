use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::basis::{BasisElement, GalerkinBasis};
use super::fixed_point::{sheet_maps, SolveState};
use crate::bubbles::{standard_bubble, AnsatzFamily};
use crate::error::{Error, Result};
use crate::field::{PeakLayout, SmoothField, SymmetryTag};
use crate::geometry::Point4;
use crate::quadrature::{integrate_vector, ErrorNorm, QuadratureSpec, VectorIntegrand};

/// Armijo sufficient-decrease constant.
pub const ARMIJO: f64 = 1e-4;
/// Step halvings before the line search gives up.
pub const MAX_HALVINGS: usize = 30;

/// A pointwise strong-form residual r(x; c), linear-in-basis unknowns c.
pub trait ResidualProblem: Sync {
    fn unknowns(&self) -> usize;
    fn components(&self) -> usize;
    fn tag(&self) -> SymmetryTag;
    fn layout(&self) -> PeakLayout;
    /// Writes r (len `components`) and, when given, the Jacobian
    /// (component-major rows of length `unknowns`).
    fn eval(&self, x: &Point4, c: &[f64], r: &mut [f64], jac: Option<&mut [f64]>);
}

/// ‖r‖²_{L²}.
pub fn residual_sq(problem: &dyn ResidualProblem, c: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    let m = problem.components();
    let eval = |x: &Point4, out: &mut [f64]| {
        let mut r = vec![0.0; m];
        problem.eval(x, c, &mut r, None);
        out[0] = r.iter().map(|v| v * v).sum();
    };
    let res = integrate_vector(
        &VectorIntegrand {
            dim: 1,
            eval: &eval,
            tag: problem.tag(),
            layout: problem.layout(),
            norm: ErrorNorm::Individual,
        },
        spec,
    )?;
    Ok(res.values[0].max(0.0))
}

/// ∫JᵀJ, ∫Jᵀr and ∫rᵀr.
fn normal_equations(
    problem: &dyn ResidualProblem,
    c: &[f64],
    spec: &QuadratureSpec,
) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    let n = problem.unknowns();
    let m = problem.components();
    let tri = n * (n + 1) / 2;
    let eval = |x: &Point4, out: &mut [f64]| {
        let mut r = vec![0.0; m];
        let mut j = vec![0.0; m * n];
        problem.eval(x, c, &mut r, Some(&mut j));
        let mut k = 0;
        for a in 0..n {
            for b in a..n {
                out[k] = (0..m).map(|i| j[i * n + a] * j[i * n + b]).sum();
                k += 1;
            }
        }
        for a in 0..n {
            out[tri + a] = (0..m).map(|i| j[i * n + a] * r[i]).sum();
        }
        out[tri + n] = r.iter().map(|v| v * v).sum();
    };
    let res = integrate_vector(
        &VectorIntegrand {
            dim: tri + n + 1,
            eval: &eval,
            tag: problem.tag(),
            layout: problem.layout(),
            norm: ErrorNorm::Max,
        },
        spec,
    )?;
    let mut h = DMatrix::zeros(n, n);
    let mut k = 0;
    for a in 0..n {
        for b in a..n {
            h[(a, b)] = res.values[k];
            h[(b, a)] = res.values[k];
            k += 1;
        }
    }
    let g = DVector::from_column_slice(&res.values[tri..tri + n]);
    Ok((h, g, res.values[tri + n].max(0.0)))
}

/// Outcome of a damped Gauss–Newton run.
#[derive(Debug, Clone, Serialize)]
pub struct GaussNewtonResult {
    pub coefficients: Vec<f64>,
    /// ‖r‖_{L²} of the initial point and of every accepted step.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize ½‖r(c)‖² by Gauss–Newton steps with Armijo backtracking.
/// Stops when the predicted decrease falls to the level of the quadrature
/// tolerance.
pub fn gauss_newton(
    problem: &dyn ResidualProblem,
    initial: &[f64],
    max_iter: usize,
    spec: &QuadratureSpec,
) -> Result<GaussNewtonResult> {
    let n = problem.unknowns();
    if initial.len() != n {
        return Err(Error::Validation(format!("{} initial coefficients for {n} unknowns", initial.len())));
    }
    let mut c = DVector::from_column_slice(initial);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut f_cur: Option<f64> = None;
    for it in 0..max_iter {
        let (h, g, rr) = normal_equations(problem, c.as_slice(), spec)?;
        let f0 = 0.5 * f_cur.unwrap_or(rr);
        if history.is_empty() {
            history.push((2.0 * f0).sqrt());
        }
        // Levenberg floor keeps the system solvable for redundant spans
        let scale = (0..n).map(|i| h[(i, i)]).fold(0.0f64, f64::max);
        let mut hreg = h.clone();
        for i in 0..n {
            hreg[(i, i)] += 1e-14 * scale;
        }
        let step = hreg
            .cholesky()
            .map(|ch| ch.solve(&(-&g)))
            .ok_or_else(|| Error::Eigensolver("normal equations not positive definite".into()))?;
        let slope = g.dot(&step);
        let noise = 8.0 * spec.rel_tol * f0 + spec.abs_tol;
        if !(slope < 0.0) || -slope <= noise {
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = &c + &step * t;
            let f = 0.5 * residual_sq(problem, trial.as_slice(), spec)?;
            if f <= f0 + ARMIJO * t * slope {
                accepted = Some((trial, f));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, f)) = accepted else {
            return Err(Error::LineSearch(MAX_HALVINGS));
        };
        c = trial;
        f_cur = Some(2.0 * f);
        history.push((2.0 * f).sqrt());
        iterations = it + 1;
    }
    Ok(GaussNewtonResult {
        coefficients: c.iter().cloned().collect(),
        history,
        iterations,
        converged,
    })
}

/// Full strong-form residual of the two-equation system at
/// (U + φ, Ṽ + ψ), unknowns (φ coefficients, ψ frame coefficients).
pub struct FamilyResidual<'a> {
    pub family: &'a AnsatzFamily,
    pub basis: &'a GalerkinBasis,
    maps: Vec<nalgebra::Matrix4<f64>>,
}

impl<'a> FamilyResidual<'a> {
    pub fn new(family: &'a AnsatzFamily, basis: &'a GalerkinBasis) -> Self {
        FamilyResidual {
            family,
            basis,
            maps: sheet_maps(family),
        }
    }
}

impl ResidualProblem for FamilyResidual<'_> {
    fn unknowns(&self) -> usize {
        self.basis.phi.len() + self.basis.psi.len() + 1
    }
    fn components(&self) -> usize {
        2
    }
    fn tag(&self) -> SymmetryTag {
        self.family.tag()
    }
    fn layout(&self) -> PeakLayout {
        self.basis.layout()
    }

    fn eval(&self, x: &Point4, c: &[f64], r: &mut [f64], jac: Option<&mut [f64]>) {
        let fam = self.family;
        let (b, a) = (fam.beta, fam.alpha);
        let np = self.basis.phi.len();
        let frame = self.basis.psi_frame();
        let nf = frame.len();
        let q = self.maps.len();

        let u0 = standard_bubble(x);
        let mut ev = vec![0.0; np];
        let mut el = vec![0.0; np];
        let (mut phi, mut lphi) = (0.0, 0.0);
        for (i, e) in self.basis.phi.iter().enumerate() {
            let (v, l) = e.value_and_laplacian(x);
            ev[i] = v;
            el[i] = l;
            phi += c[i] * v;
            lphi += c[i] * l;
        }
        // frame values at 𝒯ᵣx, Laplacians at x
        let mut fv = vec![0.0; q * nf];
        let mut fl = vec![0.0; nf];
        let mut psis = vec![0.0; q];
        let mut lpsi = 0.0;
        for rr in 0..q {
            let y = if rr == 0 { *x } else { x.transform(&self.maps[rr]) };
            for (j, f) in frame.iter().enumerate() {
                let (v, l) = if rr == 0 {
                    f.value_and_laplacian(&y)
                } else {
                    (crate::field::ScalarField::eval(*f, &y), 0.0)
                };
                fv[rr * nf + j] = v;
                psis[rr] += c[np + j] * v;
                if rr == 0 {
                    fl[j] = l;
                    lpsi += c[np + j] * l;
                }
            }
        }
        let vt: Vec<f64> = (1..=q).map(|s| fam.sheet_value(s, x)).collect();
        let v: Vec<f64> = vt.iter().zip(&psis).map(|(p, s)| p + s).collect();
        let u = u0 + phi;
        let sv2: f64 = v.iter().map(|t| t * t).sum();
        let sv2_rest = sv2 - v[0] * v[0];
        let p1 = psis[0];

        r[0] = lphi + phi * (3.0 * u0 * u0 + 3.0 * u0 * phi + phi * phi) + b * u * sv2;
        r[1] = fam.sheet_cube_excess(1, x)
            + lpsi
            + p1 * (3.0 * vt[0] * vt[0] + 3.0 * vt[0] * p1 + p1 * p1)
            + a * v[0] * sv2_rest
            + b * u * u * v[0];

        if let Some(j) = jac {
            let n = np + nf;
            for i in 0..np {
                j[i] = el[i] + (3.0 * u * u + b * sv2) * ev[i];
                j[n + i] = 2.0 * b * u * v[0] * ev[i];
            }
            for k in 0..nf {
                let mut sum_all = 0.0;
                let mut sum_rest = 0.0;
                for rr in 0..q {
                    let t = v[rr] * fv[rr * nf + k];
                    sum_all += t;
                    if rr > 0 {
                        sum_rest += t;
                    }
                }
                j[np + k] = 2.0 * b * u * sum_all;
                j[n + np + k] =
                    fl[k] + (3.0 * v[0] * v[0] + a * sv2_rest + b * u * u) * fv[k] + 2.0 * a * v[0] * sum_rest;
            }
        }
    }
}

/// Gauss–Newton on the full residual starting from `initial`; returns the
/// best state with the residual history.
pub fn gauss_newton_full(
    family: &AnsatzFamily,
    basis: &GalerkinBasis,
    initial: &SolveState,
    max_iter: usize,
    spec: &QuadratureSpec,
) -> Result<SolveState> {
    let problem = FamilyResidual::new(family, basis);
    let mut c = initial.phi.clone();
    c.extend_from_slice(&initial.psi);
    let res = gauss_newton(&problem, &c, max_iter, spec)?;
    let np = basis.phi.len();
    let mut state = SolveState {
        phi: res.coefficients[..np].to_vec(),
        psi: res.coefficients[np..].to_vec(),
        history: res.history,
        contraction: Vec::new(),
        iterations: res.iterations,
        converged: res.converged,
        phi_norm: 0.0,
        psi_norm: 0.0,
        z_pairing: 0.0,
    };
    state.refresh_norms(basis);
    Ok(state)
}

/// ‖(Ē₁, Ē₂)‖_{L²} of the bare ansatz.
pub fn ansatz_residual_norm(family: &AnsatzFamily, basis: &GalerkinBasis, spec: &QuadratureSpec) -> Result<f64> {
    let problem = FamilyResidual::new(family, basis);
    let c = vec![0.0; problem.unknowns()];
    Ok(residual_sq(&problem, &c, spec)?.sqrt())
}

/// Single equation Δu + u³ = 0 for u = Σcᵢeᵢ.
pub struct ScalarBubbleProblem {
    pub elements: Vec<BasisElement>,
}

impl ResidualProblem for ScalarBubbleProblem {
    fn unknowns(&self) -> usize {
        self.elements.len()
    }
    fn components(&self) -> usize {
        1
    }
    fn tag(&self) -> SymmetryTag {
        SymmetryTag::None
    }
    fn layout(&self) -> PeakLayout {
        PeakLayout::none()
    }
    fn eval(&self, x: &Point4, c: &[f64], r: &mut [f64], jac: Option<&mut [f64]>) {
        let vl: Vec<(f64, f64)> = self.elements.iter().map(|e| e.value_and_laplacian(x)).collect();
        let u: f64 = vl.iter().zip(c).map(|(p, ci)| ci * p.0).sum();
        let lu: f64 = vl.iter().zip(c).map(|(p, ci)| ci * p.1).sum();
        r[0] = lu + u * u * u;
        if let Some(j) = jac {
            for (i, p) in vl.iter().enumerate() {
                j[i] = p.1 + 3.0 * u * u * p.0;
            }
        }
    }
}
