use nalgebra::DMatrix;
use serde::Serialize;

use crate::bubbles::{bubble_profile, kernel_eval, AnsatzFamily, KernelElement, C4};
use crate::error::{Error, Result};
use crate::field::{PeakLayout, ScalarField, SmoothField, SymmetryTag};
use crate::geometry::Point4;
use crate::quadrature::{integrate_vector, ErrorNorm, QuadratureSpec, VectorIntegrand};

/// Gram condition numbers above this are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Building blocks of basis elements, each with a closed-form Laplacian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Term {
    /// Σ_c U_{w,c}.
    Bubbles { width: f64, centers: Vec<Point4> },
    /// c₄ tᵃ(1+t)^{−s}, t = |x|².
    Radial { a: f64, s: f64 },
    /// Σ_c Z⁰_{δ,c}.
    Dilation { delta: f64, centers: Vec<Point4> },
    /// Unscaled Zʲ.
    Kernel { j: usize },
    /// |x|⁻² T(x/|x|²).
    Kelvin(Box<Term>),
}

impl Term {
    pub fn value_and_laplacian(&self, x: &Point4) -> (f64, f64) {
        match self {
            Term::Bubbles { width, centers } => {
                let mut v = 0.0;
                let mut l = 0.0;
                for c in centers {
                    let u = bubble_profile(*width, x.dist_sq(c));
                    v += u;
                    l -= u * u * u;
                }
                (v, l)
            }
            Term::Radial { a, s } => radial(*a, *s, x.norm_sq()),
            Term::Dilation { delta, centers } => {
                let d = *delta;
                let mut v = 0.0;
                let mut l = 0.0;
                for c in centers {
                    let r2 = x.dist_sq(c) / (d * d);
                    let z = (1.0 - r2) / ((1.0 + r2) * (1.0 + r2)) / d;
                    let u = C4 / (1.0 + r2) / d;
                    v += z;
                    l -= 3.0 * u * u * z;
                }
                (v, l)
            }
            Term::Kernel { j } => {
                let e = KernelElement { j: *j, scaling: None };
                let z = kernel_eval(&e, x);
                let u = C4 / (1.0 + x.norm_sq());
                (z, -3.0 * u * u * z)
            }
            Term::Kelvin(inner) => {
                let r2 = x.norm_sq();
                let y = *x * (1.0 / r2);
                let (v, l) = inner.value_and_laplacian(&y);
                (v / r2, l / (r2 * r2 * r2))
            }
        }
    }

    pub fn eval(&self, x: &Point4) -> f64 {
        match self {
            Term::Bubbles { width, centers } => centers.iter().map(|c| bubble_profile(*width, x.dist_sq(c))).sum(),
            Term::Radial { a, s } => {
                let t = x.norm_sq();
                C4 * t.powf(*a) * (1.0 + t).powf(-s)
            }
            _ => self.value_and_laplacian(x).0,
        }
    }

    /// The Kelvin image, in closed form where one exists.
    pub fn kelvin(&self) -> Term {
        match self {
            Term::Bubbles { width, centers } => {
                // U_{w,ξ} ↦ U_{w/σ,ξ/σ} with σ = w² + |ξ|², equal on the orbit
                let sigma = width * width + centers.first().map_or(0.0, |c| c.norm_sq());
                Term::Bubbles {
                    width: width / sigma,
                    centers: centers.iter().map(|c| *c * (1.0 / sigma)).collect(),
                }
            }
            Term::Radial { a, s } => Term::Radial { a: s - a - 1.0, s: *s },
            Term::Kelvin(inner) => (**inner).clone(),
            other => Term::Kelvin(Box::new(other.clone())),
        }
    }

    fn approx_eq(&self, other: &Term) -> bool {
        match (self, other) {
            (Term::Bubbles { width: w1, centers: c1 }, Term::Bubbles { width: w2, centers: c2 }) => {
                (w1 - w2).abs() <= 1e-14 * w1.abs()
                    && c1.len() == c2.len()
                    && c1.iter().zip(c2).all(|(a, b)| a.dist_sq(b) <= 1e-28)
            }
            (Term::Radial { a: a1, s: s1 }, Term::Radial { a: a2, s: s2 }) => a1 == a2 && s1 == s2,
            _ => false,
        }
    }
}

/// Radial c₄tᵃ(1+t)^{−s} and its Laplacian 4t f_tt + 8f_t.
fn radial(a: f64, s: f64, t: f64) -> (f64, f64) {
    let base = C4 * (1.0 + t).powf(-s);
    let ta = if a == 0.0 { 1.0 } else { t.powf(a) };
    let v = base * ta;
    let inv = 1.0 / (1.0 + t);
    let mut l = -8.0 * s * (a + 1.0) * ta * inv + 4.0 * s * (s + 1.0) * ta * t * inv * inv;
    if a != 0.0 {
        l += 4.0 * a * (a + 1.0) * ta / t;
    }
    (v, base * l)
}

/// A basis function: a finite combination of terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisElement {
    pub label: String,
    pub terms: Vec<(f64, Term)>,
    #[serde(skip)]
    pub tag: SymmetryTag,
    #[serde(skip)]
    pub layout: PeakLayout,
}

impl BasisElement {
    pub fn new(label: impl Into<String>, terms: Vec<(f64, Term)>, tag: SymmetryTag, layout: PeakLayout) -> Self {
        BasisElement {
            label: label.into(),
            terms,
            tag,
            layout,
        }
    }

    /// ½(T + KT), collapsed to T when T is Kelvin invariant.
    pub fn kelvin_average(label: impl Into<String>, term: Term, tag: SymmetryTag, layout: PeakLayout) -> Self {
        let image = term.kelvin();
        let terms = if term.approx_eq(&image) {
            vec![(1.0, term)]
        } else {
            vec![(0.5, term), (0.5, image)]
        };
        BasisElement::new(label, terms, tag, layout)
    }
}

impl ScalarField for BasisElement {
    fn eval(&self, x: &Point4) -> f64 {
        self.terms.iter().map(|(c, t)| c * t.eval(x)).sum()
    }
    fn tag(&self) -> SymmetryTag {
        self.tag
    }
    fn peaks(&self) -> PeakLayout {
        self.layout.clone()
    }
}

impl SmoothField for BasisElement {
    fn laplacian(&self, x: &Point4) -> f64 {
        self.value_and_laplacian(x).1
    }
    fn value_and_laplacian(&self, x: &Point4) -> (f64, f64) {
        let mut v = 0.0;
        let mut l = 0.0;
        for (c, t) in &self.terms {
            let (a, b) = t.value_and_laplacian(x);
            v += c * a;
            l += c * b;
        }
        (v, l)
    }
}

/// Symmetry class of a block of the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Space {
    /// Ring space X.
    X,
    /// Torus space for φ (all sheets).
    X1,
    /// Torus space for ψ (sheet 1).
    X2,
}

/// The Galerkin spaces for (φ, ψ) with the dilation direction of the ψ
/// space. Gram matrices are in the gradient inner product; the ψ frame is
/// `psi` followed by `z`.
#[derive(Debug, Clone, Serialize)]
pub struct GalerkinBasis {
    #[serde(skip)]
    pub family: AnsatzFamily,
    pub phi_space: Space,
    pub psi_space: Space,
    pub widths: Vec<f64>,
    pub exponents: Vec<f64>,
    pub phi: Vec<BasisElement>,
    pub psi: Vec<BasisElement>,
    /// ½(Z + KZ): the Kelvin-symmetric dilation direction. For every
    /// Kelvin-invariant ψ, ⟨ψ, Z⟩ = ⟨ψ, z⟩.
    pub z: BasisElement,
    pub phi_gram: DMatrix<f64>,
    pub psi_gram: DMatrix<f64>,
    pub phi_condition: f64,
    pub psi_condition: f64,
    /// max |G − Gᵀ| before symmetrization, a quadrature diagnostic.
    pub gram_asymmetry: f64,
}

impl GalerkinBasis {
    pub fn dimension(&self) -> usize {
        self.phi.len() + self.psi.len()
    }

    /// ψ frame: the ψ elements and z.
    pub fn psi_frame(&self) -> Vec<&BasisElement> {
        self.psi.iter().chain(std::iter::once(&self.z)).collect()
    }

    pub fn layout(&self) -> PeakLayout {
        let w = self.widths.iter().cloned().fold(self.family.delta(), f64::min);
        PeakLayout::new(self.family.config.centers.clone(), w)
    }

    /// ψ(x) for frame coefficients.
    pub fn psi_value(&self, coef: &[f64], x: &Point4) -> f64 {
        self.psi_frame().iter().zip(coef).map(|(e, c)| c * e.eval(x)).sum()
    }

    pub fn phi_value(&self, coef: &[f64], x: &Point4) -> f64 {
        self.phi.iter().zip(coef).map(|(e, c)| c * e.eval(x)).sum()
    }
}

/// Geometric widths δ·2^{j−(n−1)/2}.
pub fn basis_widths(delta: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| delta * 2f64.powf(j as f64 - (count as f64 - 1.0) / 2.0))
        .collect()
}

/// Envelope exponents 1, 3/2, 5/2, 3, ... The Kelvin average of
/// (1+t)^{−2} is (1+t)^{−1}/2, so s = 2 would repeat s = 1 and is skipped.
pub fn envelope_exponents(count: usize) -> Vec<f64> {
    (0..)
        .map(|j| 1.0 + 0.5 * j as f64)
        .filter(|s| *s != 2.0)
        .take(count)
        .collect()
}

fn bubble_elements(
    family: &AnsatzFamily,
    widths: &[f64],
    centers: &[Point4],
    tag: SymmetryTag,
    layout: &PeakLayout,
) -> Vec<BasisElement> {
    let d = family.delta();
    widths
        .iter()
        .map(|&w| {
            BasisElement::kelvin_average(
                format!("bubbles w={:.4}δ n={}", w / d, centers.len()),
                Term::Bubbles {
                    width: w,
                    centers: centers.to_vec(),
                },
                tag,
                layout.clone(),
            )
        })
        .collect()
}

fn envelope_elements(exponents: &[f64], tag: SymmetryTag, layout: &PeakLayout) -> Vec<BasisElement> {
    exponents
        .iter()
        .map(|&s| {
            BasisElement::kelvin_average(format!("envelope s={s}"), Term::Radial { a: 0.0, s }, tag, layout.clone())
        })
        .collect()
}

/// Symmetrized dilation direction of the ψ space.
pub fn symmetric_dilation(family: &AnsatzFamily) -> BasisElement {
    let z = Term::Dilation {
        delta: family.delta(),
        centers: family.config.sheet(1).to_vec(),
    };
    BasisElement::new(
        "dilation (Z + KZ)/2",
        vec![(0.5, z.clone()), (0.5, z.kelvin())],
        family.tag(),
        family.peaks(),
    )
}

/// Full Gram matrix ∫eᵢ(−Δeⱼ) of several element lists in one quadrature.
/// Returns symmetrized matrices and the largest asymmetry.
pub fn gram_matrices(
    blocks: &[Vec<&BasisElement>],
    tag: SymmetryTag,
    layout: PeakLayout,
    spec: &QuadratureSpec,
) -> Result<(Vec<DMatrix<f64>>, f64)> {
    let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
    let dim: usize = sizes.iter().map(|n| n * n).sum();
    let nmax = sizes.iter().cloned().max().unwrap_or(0);
    let eval = |x: &Point4, out: &mut [f64]| {
        let mut vals = vec![0.0; nmax];
        let mut laps = vec![0.0; nmax];
        let mut off = 0;
        for b in blocks {
            let n = b.len();
            for (i, e) in b.iter().enumerate() {
                let (v, l) = e.value_and_laplacian(x);
                vals[i] = v;
                laps[i] = l;
            }
            for i in 0..n {
                for j in 0..n {
                    out[off + i * n + j] = -vals[i] * laps[j];
                }
            }
            off += n * n;
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
    let mut asym = 0.0f64;
    let mut off = 0;
    for &n in &sizes {
        let g = DMatrix::from_fn(n, n, |i, j| r.values[off + i * n + j]);
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((g[(i, j)] - g[(j, i)]).abs());
            }
        }
        out.push((&g + g.transpose()) * 0.5);
        off += n * n;
    }
    Ok((out, asym))
}

/// Condition number of the Jacobi-scaled Gram matrix; non-positive
/// spectra give infinity.
pub fn scaled_condition(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    let d: Vec<f64> = (0..n).map(|i| g[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return f64::INFINITY;
    }
    let s = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = s.symmetric_eigen();
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Group-averaged Galerkin basis: per center orbit, bubble sums at
/// `widths_count` widths around δ; plus `radial_count` radial envelopes;
/// each Kelvin-averaged. The ring uses the same list for φ and ψ; the torus
/// uses all-sheet orbits for φ and the sheet-1 orbit for ψ.
pub fn build_basis(
    family: &AnsatzFamily,
    widths_count: usize,
    radial_count: usize,
    spec: &QuadratureSpec,
) -> Result<GalerkinBasis> {
    if widths_count == 0 || radial_count == 0 {
        return Err(Error::Validation("basis counts must be at least 1".into()));
    }
    let widths = basis_widths(family.delta(), widths_count);
    let exponents = envelope_exponents(radial_count);
    let tag = family.tag();
    let w_min = widths[0];
    let layout = PeakLayout::new(family.config.centers.clone(), w_min);
    let mut phi = bubble_elements(family, &widths, &family.config.centers, tag, &layout);
    phi.extend(envelope_elements(&exponents, tag, &layout));
    let (phi_space, psi_space, psi) = if family.is_torus() {
        let sheet = family.config.sheet(1).to_vec();
        let mut p = bubble_elements(family, &widths, &sheet, tag, &layout);
        p.extend(envelope_elements(&exponents, tag, &layout));
        (Space::X1, Space::X2, p)
    } else {
        (Space::X, Space::X, phi.clone())
    };
    let z = symmetric_dilation(family);
    let frame: Vec<&BasisElement> = psi.iter().chain(std::iter::once(&z)).collect();
    let phi_refs: Vec<&BasisElement> = phi.iter().collect();
    let (grams, asym) = gram_matrices(&[phi_refs, frame], tag, layout, spec)?;
    let phi_condition = scaled_condition(&grams[0]);
    let psi_condition = scaled_condition(&grams[1]);
    let worst = phi_condition.max(psi_condition);
    if !(worst <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditionedBasis { condition: worst });
    }
    Ok(GalerkinBasis {
        family: family.clone(),
        phi_space,
        psi_space,
        widths,
        exponents,
        phi,
        psi,
        z,
        phi_gram: grams[0].clone(),
        psi_gram: grams[1].clone(),
        phi_condition,
        psi_condition,
        gram_asymmetry: asym,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_laplacian(t: &Term, x: &Point4, h: f64) -> f64 {
        let mut s = -8.0 * t.eval(x);
        for i in 0..4 {
            let mut a = x.to_array();
            let mut b = x.to_array();
            a[i] += h;
            b[i] -= h;
            s += t.eval(&Point4::from_array(a)) + t.eval(&Point4::from_array(b));
        }
        s / (h * h)
    }

    #[test]
    fn closed_form_laplacians_match_differences() {
        let x = Point4::new(0.3, -0.7, 0.45, 0.2);
        let c = vec![Point4::new(0.6, 0.0, 0.0, 0.0), Point4::new(-0.6, 0.0, 0.0, 0.0)];
        let terms = [
            Term::Radial { a: 0.0, s: 1.5 },
            Term::Radial { a: 0.5, s: 1.5 },
            Term::Radial { a: 1.0, s: 2.0 },
            Term::Bubbles { width: 0.4, centers: c.clone() },
            Term::Dilation { delta: 0.4, centers: c.clone() },
            Term::Kernel { j: 2 },
            Term::Kelvin(Box::new(Term::Dilation { delta: 0.4, centers: c })),
        ];
        for t in &terms {
            let exact = t.value_and_laplacian(&x).1;
            let fd = fd_laplacian(t, &x, 1e-3);
            assert!((exact - fd).abs() < 1e-4 * (1.0 + exact.abs()), "{t:?}: {exact} vs {fd}");
        }
    }

    #[test]
    fn radial_kelvin_image_in_closed_form() {
        let t = Term::Radial { a: 0.0, s: 2.0 };
        let k = t.kelvin();
        let x = Point4::new(0.4, 1.1, -0.3, 0.9);
        let r2 = x.norm_sq();
        let direct = t.eval(&(x * (1.0 / r2))) / r2;
        assert!((k.eval(&x) - direct).abs() < 1e-14);
        assert_eq!(Term::Radial { a: 0.0, s: 1.0 }.kelvin(), Term::Radial { a: 0.0, s: 1.0 });
    }

    #[test]
    fn widths_are_geometric() {
        let w = basis_widths(0.1, 3);
        assert!((w[0] - 0.05).abs() < 1e-15 && (w[1] - 0.1).abs() < 1e-15 && (w[2] - 0.2).abs() < 1e-15);
        assert_eq!(envelope_exponents(3), vec![1.0, 1.5, 2.5]);
    }
}
