//! Bubbles, kernel elements, the multi-bubble ansatz and its error terms.

mod ansatz;
mod expand;

pub use ansatz::{
    ansatz_eval, ansatz_field, nonlinear_from_values, nonlinear_terms_eval, residual_field, residual_strong,
    AnsatzFamily, LocalAnsatz, NonlinearTerms, ResidualComponent,
};
pub use expand::{reduction_identity_check, two_to_m_expand};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{PeakLayout, ScalarField, SmoothField, SymmetryTag};
use crate::geometry::Point4;

/// c₄ = 2√2.
pub const C4: f64 = 2.828_427_124_746_190_1;

/// The standard bubble U(x) = c₄/(1+|x|²).
#[inline]
pub fn standard_bubble(x: &Point4) -> f64 {
    C4 / (1.0 + x.norm_sq())
}

/// U_{δ,ξ}(x) = c₄δ/(δ² + |x−ξ|²) from the squared distance.
#[inline]
pub fn bubble_profile(delta: f64, dist_sq: f64) -> f64 {
    C4 * delta / (delta * delta + dist_sq)
}

/// U_{δ,ξ}(x) = δ⁻¹U((x−ξ)/δ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BubbleField {
    pub delta: f64,
    pub xi: Point4,
}

impl BubbleField {
    pub fn new(delta: f64, xi: Point4) -> Self {
        BubbleField { delta, xi }
    }

    /// U itself (δ = 1, ξ = 0).
    pub fn standard() -> Self {
        BubbleField::new(1.0, Point4::ORIGIN)
    }

    pub fn peak_value(&self) -> f64 {
        C4 / self.delta
    }
}

pub fn bubble_eval(field: &BubbleField, x: &Point4) -> f64 {
    bubble_profile(field.delta, x.dist_sq(&field.xi))
}

pub fn bubble_grad(field: &BubbleField, x: &Point4) -> [f64; 4] {
    let d = *x - field.xi;
    let den = field.delta * field.delta + d.norm_sq();
    let s = -2.0 * C4 * field.delta / (den * den);
    [s * d.x1, s * d.x2, s * d.x3, s * d.x4]
}

/// ΔU_{δ,ξ} = −U³_{δ,ξ}.
pub fn bubble_laplacian(field: &BubbleField, x: &Point4) -> f64 {
    let u = bubble_eval(field, x);
    -u * u * u
}

impl ScalarField for BubbleField {
    fn eval(&self, x: &Point4) -> f64 {
        bubble_eval(self, x)
    }
    fn peaks(&self) -> PeakLayout {
        PeakLayout::new(vec![self.xi], self.delta)
    }
}

impl SmoothField for BubbleField {
    fn laplacian(&self, x: &Point4) -> f64 {
        bubble_laplacian(self, x)
    }
}

/// Generator Zʲ of the kernel of −Δ − 3U², optionally rescaled as
/// δ⁻¹Zʲ((x−ξ)/δ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelElement {
    pub j: usize,
    pub scaling: Option<(f64, Point4)>,
}

impl KernelElement {
    pub fn new(j: usize) -> Result<Self> {
        if j > 4 {
            return Err(Error::InvalidIndex(format!("kernel index {j} outside 0..=4")));
        }
        Ok(KernelElement { j, scaling: None })
    }

    pub fn scaled(j: usize, delta: f64, xi: Point4) -> Result<Self> {
        let mut z = Self::new(j)?;
        z.scaling = Some((delta, xi));
        Ok(z)
    }

    fn frame(&self, x: &Point4) -> (f64, Point4) {
        match self.scaling {
            None => (1.0, *x),
            Some((d, xi)) => (d, (*x - xi) * (1.0 / d)),
        }
    }
}

#[inline]
fn kernel_unit(j: usize, y: &Point4) -> f64 {
    let r2 = y.norm_sq();
    let den = (1.0 + r2) * (1.0 + r2);
    match j {
        0 => (1.0 - r2) / den,
        _ => y.coord(j - 1) / den,
    }
}

/// Z⁰(x) = (1−|x|²)/(1+|x|²)², Zʲ(x) = xⱼ/(1+|x|²)², rescaled by δ⁻¹ when
/// the element carries a (δ, ξ) scaling.
pub fn kernel_eval(element: &KernelElement, x: &Point4) -> f64 {
    let (d, y) = element.frame(x);
    kernel_unit(element.j, &y) / d
}

impl ScalarField for KernelElement {
    fn eval(&self, x: &Point4) -> f64 {
        kernel_eval(self, x)
    }
    fn peaks(&self) -> PeakLayout {
        match self.scaling {
            None => PeakLayout::new(vec![Point4::ORIGIN], 1.0),
            Some((d, xi)) => PeakLayout::new(vec![xi], d),
        }
    }
}

impl SmoothField for KernelElement {
    /// ΔZ = −3U²Z with the matching scaled bubble.
    fn laplacian(&self, x: &Point4) -> f64 {
        let (d, y) = self.frame(x);
        let u = standard_bubble(&y) / d;
        -3.0 * u * u * kernel_unit(self.j, &y) / d
    }
}

/// Σ_c Z⁰_{δ,c}: the dilation mode of a bubble sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSum {
    pub delta: f64,
    pub centers: Vec<Point4>,
    pub tag: SymmetryTag,
}

impl KernelSum {
    /// Σ Z⁰_{δ,ξ} scaled kernel value and bubble at a point, per center.
    #[inline]
    fn parts(&self, x: &Point4, mut f: impl FnMut(f64, f64)) {
        let d = self.delta;
        for c in &self.centers {
            let r2 = x.dist_sq(c) / (d * d);
            let z = (1.0 - r2) / ((1.0 + r2) * (1.0 + r2)) / d;
            let u = C4 / (1.0 + r2) / d;
            f(z, u);
        }
    }
}

impl ScalarField for KernelSum {
    fn eval(&self, x: &Point4) -> f64 {
        let mut s = 0.0;
        self.parts(x, |z, _| s += z);
        s
    }
    fn tag(&self) -> SymmetryTag {
        self.tag
    }
    fn peaks(&self) -> PeakLayout {
        PeakLayout::new(self.centers.clone(), self.delta)
    }
}

impl SmoothField for KernelSum {
    fn laplacian(&self, x: &Point4) -> f64 {
        let mut s = 0.0;
        self.parts(x, |z, u| s -= 3.0 * u * u * z);
        s
    }
    fn value_and_laplacian(&self, x: &Point4) -> (f64, f64) {
        let (mut v, mut l) = (0.0, 0.0);
        self.parts(x, |z, u| {
            v += z;
            l -= 3.0 * u * u * z;
        });
        (v, l)
    }
}

/// Σ_c U_{δ,c}: a bubble sum with its exact Laplacian −Σ U³_{δ,c}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubbleSum {
    pub delta: f64,
    pub centers: Vec<Point4>,
    pub tag: SymmetryTag,
}

impl ScalarField for BubbleSum {
    fn eval(&self, x: &Point4) -> f64 {
        self.centers
            .iter()
            .map(|c| bubble_profile(self.delta, x.dist_sq(c)))
            .sum()
    }
    fn tag(&self) -> SymmetryTag {
        self.tag
    }
    fn peaks(&self) -> PeakLayout {
        PeakLayout::new(self.centers.clone(), self.delta)
    }
}

impl SmoothField for BubbleSum {
    fn laplacian(&self, x: &Point4) -> f64 {
        -self
            .centers
            .iter()
            .map(|c| bubble_profile(self.delta, x.dist_sq(c)).powi(3))
            .sum::<f64>()
    }
}

/// S³ − Σaᵢ³ for S = Σaᵢ, written as Σ aᵢ(S−aᵢ)(S+aᵢ) with S−aᵢ summed
/// directly so that no cancellation occurs near a dominant term.
pub fn cube_excess(a: &[f64]) -> f64 {
    let s: f64 = a.iter().sum();
    let mut out = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        let rest: f64 = a
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v)
            .sum();
        out += ai * rest * (s + ai);
    }
    out
}
