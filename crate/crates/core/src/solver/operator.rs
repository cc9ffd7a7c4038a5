use nalgebra::DMatrix;
use serde::Serialize;

use super::basis::{gram_matrices, BasisElement, GalerkinBasis, Term};
use crate::bubbles::{standard_bubble, AnsatzFamily};
use crate::error::{Error, Result};
use crate::field::{PeakLayout, SymmetryTag};
use crate::geometry::Point4;
use crate::quadrature::{integrate_vector, ErrorNorm, QuadratureSpec, VectorIntegrand};

/// One diagonal block of the linearized form: Gram G = ∫∇eᵢ∇eⱼ and the
/// quadratic form A = G − ∫3W²eᵢeⱼ of φ ↦ φ − (−Δ)⁻¹(3W²φ).
#[derive(Debug, Clone, Serialize)]
pub struct OperatorBlock {
    pub gram: DMatrix<f64>,
    pub form: DMatrix<f64>,
}

impl OperatorBlock {
    /// Eigenvalues of G^{-1/2}AG^{-1/2}, ascending. These are the
    /// eigenvalues of the self-adjoint operator compressed to the span; their
    /// moduli are its singular values in the energy norm.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let n = self.gram.nrows();
        if n == 0 {
            return Ok(Vec::new());
        }
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Eigensolver("Gram matrix not positive definite".into()))?;
        let l = chol.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Eigensolver("singular Cholesky factor".into()))?;
        let m = &linv * &self.form * linv.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let eig = m.symmetric_eigen();
        let mut v: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Eigensolver("non-finite eigenvalue".into()));
        }
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    pub fn min_singular_value(&self) -> Result<f64> {
        Ok(self
            .spectrum()?
            .iter()
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min))
    }

    /// PᵀBP for both matrices.
    pub fn restrict(&self, p: &DMatrix<f64>) -> OperatorBlock {
        OperatorBlock {
            gram: p.transpose() * &self.gram * p,
            form: p.transpose() * &self.form * p,
        }
    }

    pub fn asymmetry(&self) -> f64 {
        let d = &self.form - self.form.transpose();
        d.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// The block-diagonal linearized form on φ-space × ψ-frame. The last ψ
/// frame element is the dilation direction.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizedOperator {
    pub phi: OperatorBlock,
    pub psi: OperatorBlock,
    /// Largest |A − Aᵀ| before symmetrization.
    pub raw_asymmetry: f64,
}

impl LinearizedOperator {
    /// Columns eⱼ − (G_{jz}/G_{zz})e_z: the ψ frame restricted to the
    /// complement of the dilation direction.
    pub fn projector(&self) -> DMatrix<f64> {
        projector(&self.psi.gram)
    }

    pub fn projected_psi(&self) -> OperatorBlock {
        self.psi.restrict(&self.projector())
    }
}

/// Gram–Schmidt removal of the last frame element.
pub fn projector(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let n = gram.nrows();
    let z = n - 1;
    DMatrix::from_fn(n, n - 1, |i, j| {
        if i == j {
            1.0
        } else if i == z {
            -gram[(j, z)] / gram[(z, z)]
        } else {
            0.0
        }
    })
}

/// Quadratic form ∫3W²eᵢeⱼ for several element lists, upper triangles in
/// one quadrature. `potentials[b]` gives W² for block b at a point.
pub fn potential_matrices(
    blocks: &[Vec<&BasisElement>],
    potentials: &[&(dyn Fn(&Point4) -> f64 + Sync)],
    tag: SymmetryTag,
    layout: PeakLayout,
    spec: &QuadratureSpec,
) -> Result<Vec<DMatrix<f64>>> {
    let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
    let dim: usize = sizes.iter().map(|n| n * (n + 1) / 2).sum();
    let nmax = sizes.iter().cloned().max().unwrap_or(0);
    let eval = |x: &Point4, out: &mut [f64]| {
        let mut vals = vec![0.0; nmax];
        let mut off = 0;
        for (b, w2) in blocks.iter().zip(potentials) {
            let n = b.len();
            let p = 3.0 * w2(x);
            for (i, e) in b.iter().enumerate() {
                vals[i] = crate::field::ScalarField::eval(*e, x);
            }
            for i in 0..n {
                for j in i..n {
                    out[off] = p * vals[i] * vals[j];
                    off += 1;
                }
            }
        }
    };
    let r = integrate_vector(
        &VectorIntegrand {
            dim,
            eval: &eval,
            tag,
            layout,
            norm: ErrorNorm::Max,
        },
        spec,
    )?;
    let mut out = Vec::new();
    let mut off = 0;
    for &n in &sizes {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                m[(i, j)] = r.values[off];
                m[(j, i)] = r.values[off];
                off += 1;
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Assemble both blocks: potential 3U² on the φ space, 3V² (sheet-1 sum)
/// on the ψ frame. No β enters.
pub fn assemble_linearized(family: &AnsatzFamily, basis: &GalerkinBasis, spec: &QuadratureSpec) -> Result<LinearizedOperator> {
    let phi: Vec<&BasisElement> = basis.phi.iter().collect();
    let frame = basis.psi_frame();
    let u2 = |x: &Point4| {
        let u = standard_bubble(x);
        u * u
    };
    let v2 = |x: &Point4| {
        let v = family.sheet_value(1, x);
        v * v
    };
    let w = potential_matrices(&[phi, frame], &[&u2, &v2], family.tag(), basis.layout(), spec)?;
    let phi_form = &basis.phi_gram - &w[0];
    let psi_form = &basis.psi_gram - &w[1];
    Ok(LinearizedOperator {
        phi: OperatorBlock {
            gram: basis.phi_gram.clone(),
            form: phi_form,
        },
        psi: OperatorBlock {
            gram: basis.psi_gram.clone(),
            form: psi_form,
        },
        raw_asymmetry: basis.gram_asymmetry,
    })
}

/// Smallest singular value of the linearized operator in the energy norm,
/// on φ-space × (ψ frame minus the dilation direction) when
/// `project_out_z`, and on the full frame otherwise.
pub fn min_singular_value(op: &LinearizedOperator, project_out_z: bool) -> Result<f64> {
    let a = op.phi.min_singular_value()?;
    let b = if project_out_z {
        op.projected_psi().min_singular_value()?
    } else {
        op.psi.min_singular_value()?
    };
    Ok(a.min(b))
}

/// Spectra of both blocks for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub phi_eigenvalues: Vec<f64>,
    pub psi_eigenvalues: Vec<f64>,
    pub psi_projected_eigenvalues: Vec<f64>,
    pub min_singular_projected: f64,
    pub min_singular_unprojected: f64,
    pub ratio: f64,
    pub phi_condition: f64,
    pub psi_condition: f64,
    pub raw_asymmetry: f64,
}

pub fn spectrum_report(op: &LinearizedOperator, basis: &GalerkinBasis) -> Result<SpectrumReport> {
    let p = min_singular_value(op, true)?;
    let u = min_singular_value(op, false)?;
    Ok(SpectrumReport {
        phi_eigenvalues: op.phi.spectrum()?,
        psi_eigenvalues: op.psi.spectrum()?,
        psi_projected_eigenvalues: op.projected_psi().spectrum()?,
        min_singular_projected: p,
        min_singular_unprojected: u,
        ratio: if u > 0.0 { p / u } else { f64::INFINITY },
        phi_condition: basis.phi_condition,
        psi_condition: basis.psi_condition,
        raw_asymmetry: op.raw_asymmetry,
    })
}

/// Single-bubble sanity case: potential 3U² on span{Z⁰, U, U_{1/2}, U_2}.
/// Z⁰ is an exact kernel element, so the block is singular up to
/// quadrature error; returns its smallest singular value.
pub fn exact_kernel_singular_value(spec: &QuadratureSpec) -> Result<f64> {
    let origin = vec![Point4::ORIGIN];
    let layout = PeakLayout::none();
    let tag = SymmetryTag::None;
    let elems = [
        BasisElement::new("Z0", vec![(1.0, Term::Kernel { j: 0 })], tag, layout.clone()),
        BasisElement::new("U", vec![(1.0, Term::Radial { a: 0.0, s: 1.0 })], tag, layout.clone()),
        BasisElement::new(
            "U_1/2",
            vec![(1.0, Term::Bubbles { width: 0.5, centers: origin.clone() })],
            tag,
            layout.clone(),
        ),
        BasisElement::new("U_2", vec![(1.0, Term::Bubbles { width: 2.0, centers: origin })], tag, layout.clone()),
    ];
    let refs: Vec<&BasisElement> = elems.iter().collect();
    let (g, _) = gram_matrices(&[refs.clone()], tag, layout.clone(), spec)?;
    let u2 = |x: &Point4| {
        let u = standard_bubble(x);
        u * u
    };
    let w = potential_matrices(&[refs], &[&u2], tag, layout, spec)?;
    let block = OperatorBlock {
        form: &g[0] - &w[0],
        gram: g[0].clone(),
    };
    block.min_singular_value()
}
