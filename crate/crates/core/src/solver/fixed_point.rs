use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::GalerkinBasis;
use super::operator::{assemble_linearized, LinearizedOperator};
use crate::bubbles::{nonlinear_from_values, standard_bubble, AnsatzFamily};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{Point4, SymmetryOp};
use crate::quadrature::{integrate_vector, ErrorNorm, QuadratureSpec, VectorIntegrand};

/// Ratio above which a step counts as non-contracting.
pub const CONTRACTION_LIMIT: f64 = 0.95;
/// Consecutive non-contracting steps tolerated.
pub const CONTRACTION_PATIENCE: usize = 5;

/// Coefficients of (φ, ψ) and iteration diagnostics. `phi` refers to the
/// φ elements, `psi` to the ψ frame (ψ elements then the dilation
/// direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveState {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// Picard: successive-iterate energy distances. Gauss–Newton: L²
    /// norms of the full residual, starting with the initial state.
    pub history: Vec<f64>,
    /// dₙ/dₙ₋₁ for Picard; empty for Gauss–Newton.
    pub contraction: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Energy norms ‖φ‖, ‖ψ‖ of the current state.
    pub phi_norm: f64,
    pub psi_norm: f64,
    /// ⟨ψ, Z⟩/‖∇Z‖² from the Gram matrix.
    pub z_pairing: f64,
}

impl SolveState {
    pub fn zero(basis: &GalerkinBasis) -> Self {
        SolveState {
            phi: vec![0.0; basis.phi.len()],
            psi: vec![0.0; basis.psi.len() + 1],
            history: Vec::new(),
            contraction: Vec::new(),
            iterations: 0,
            converged: false,
            phi_norm: 0.0,
            psi_norm: 0.0,
            z_pairing: 0.0,
        }
    }

    pub fn correction_norm(&self) -> f64 {
        self.phi_norm + self.psi_norm
    }

    pub(crate) fn refresh_norms(&mut self, basis: &GalerkinBasis) {
        let a = DVector::from_column_slice(&self.phi);
        let b = DVector::from_column_slice(&self.psi);
        self.phi_norm = a.dot(&(&basis.phi_gram * &a)).max(0.0).sqrt();
        self.psi_norm = b.dot(&(&basis.psi_gram * &b)).max(0.0).sqrt();
        let n = basis.psi_gram.nrows();
        let gz = basis.psi_gram.column(n - 1);
        self.z_pairing = gz.dot(&b) / basis.psi_gram[(n - 1, n - 1)];
    }
}

/// Sheet maps 𝒯ᵣ, r = 1..q (𝒯₁ = identity).
pub(crate) fn sheet_maps(family: &AnsatzFamily) -> Vec<nalgebra::Matrix4<f64>> {
    let q = family.sheets();
    (1..=q)
        .map(|r| *SymmetryOp::sheet_map(r, q).matrix().expect("orthogonal"))
        .collect()
}

/// Right-hand sides ∫(Ē₁ + 𝓝₁)eᵢ and ∫(Ē₂ + 𝓝₂)fⱼ for the current state.
pub fn right_hand_side(
    family: &AnsatzFamily,
    basis: &GalerkinBasis,
    phi: &[f64],
    psi: &[f64],
    spec: &QuadratureSpec,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let maps = sheet_maps(family);
    let frame = basis.psi_frame();
    let np = basis.phi.len();
    let nf = frame.len();
    let q = maps.len();
    let eval = |x: &Point4, out: &mut [f64]| {
        let u = standard_bubble(x);
        let mut ephi = vec![0.0; np];
        let mut p = 0.0;
        for (i, e) in basis.phi.iter().enumerate() {
            ephi[i] = e.eval(x);
            p += phi[i] * ephi[i];
        }
        let mut fpsi = vec![0.0; nf];
        let mut v = vec![0.0; q];
        let mut ps = vec![0.0; q];
        for r in 0..q {
            v[r] = family.sheet_value(r + 1, x);
            let y = if r == 0 { *x } else { x.transform(&maps[r]) };
            let mut s = 0.0;
            for (j, f) in frame.iter().enumerate() {
                let val = f.eval(&y);
                if r == 0 {
                    fpsi[j] = val;
                }
                s += psi[j] * val;
            }
            ps[r] = s;
        }
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let vv2 = vv - v[0] * v[0];
        let e1 = family.beta * u * vv;
        let e2 = family.sheet_cube_excess(1, x) + family.beta * u * u * v[0] + family.alpha * v[0] * vv2;
        let n = nonlinear_from_values(family, u, &v, p, &ps);
        let s1 = e1 + n.n1;
        let s2 = e2 + n.n2;
        for i in 0..np {
            out[i] = s1 * ephi[i];
        }
        for j in 0..nf {
            out[np + j] = s2 * fpsi[j];
        }
    };
    let r = integrate_vector(
        &VectorIntegrand {
            dim: np + nf,
            eval: &eval,
            tag: family.tag(),
            layout: basis.layout(),
            norm: ErrorNorm::Max,
        },
        spec,
    )?;
    Ok((
        DVector::from_column_slice(&r.values[..np]),
        DVector::from_column_slice(&r.values[np..]),
    ))
}

/// Picard iteration (φ, ψ) ← 𝓛⁻¹(𝓔 + 𝓝(φ, ψ)) on φ-space × K⊥, from the
/// zero state. Converged once the energy distance of successive iterates
/// drops below `tol`.
pub fn projected_fixed_point(
    family: &AnsatzFamily,
    basis: &GalerkinBasis,
    max_iter: usize,
    tol: f64,
    spec: &QuadratureSpec,
) -> Result<SolveState> {
    let op = assemble_linearized(family, basis, spec)?;
    projected_fixed_point_with(family, basis, &op, max_iter, tol, spec)
}

/// As [`projected_fixed_point`] with a pre-assembled operator.
pub fn projected_fixed_point_with(
    family: &AnsatzFamily,
    basis: &GalerkinBasis,
    op: &LinearizedOperator,
    max_iter: usize,
    tol: f64,
    spec: &QuadratureSpec,
) -> Result<SolveState> {
    if max_iter == 0 {
        return Err(Error::Validation("max_iter must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation("tol must be positive".into()));
    }
    let p = op.projector();
    let a_phi = op.phi.form.clone().lu();
    let proj = op.projected_psi();
    let a_psi = proj.form.clone().lu();
    let solve = |lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, b: &DVector<f64>| {
        lu.solve(b)
            .ok_or_else(|| Error::Eigensolver("singular linearized block".into()))
    };

    let mut state = SolveState::zero(basis);
    let mut prev: Option<f64> = None;
    let mut bad = 0usize;
    for it in 1..=max_iter {
        let (b1, b2) = right_hand_side(family, basis, &state.phi, &state.psi, spec)?;
        let a = solve(&a_phi, &b1)?;
        let c = solve(&a_psi, &(p.transpose() * b2))?;
        let b = &p * c;
        let da = &a - DVector::from_column_slice(&state.phi);
        let db = &b - DVector::from_column_slice(&state.psi);
        let dist = energy(&op.phi.gram, &da) + energy(&op.psi.gram, &db);
        let dist = dist.max(0.0).sqrt();
        state.phi = a.iter().cloned().collect();
        state.psi = b.iter().cloned().collect();
        state.iterations = it;
        state.history.push(dist);
        if let Some(d0) = prev {
            let ratio = if d0 > 0.0 { dist / d0 } else { 0.0 };
            state.contraction.push(ratio);
            if ratio > CONTRACTION_LIMIT {
                bad += 1;
                if bad >= CONTRACTION_PATIENCE {
                    return Err(Error::NonContraction { step: it, ratio });
                }
            } else {
                bad = 0;
            }
        }
        prev = Some(dist);
        if dist < tol {
            state.converged = true;
            break;
        }
    }
    state.refresh_norms(basis);
    if !state.converged {
        return Err(Error::MaxIterations(max_iter));
    }
    Ok(state)
}

fn energy(g: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(g * v))
}
