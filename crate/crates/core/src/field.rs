//! Scalar fields on R^4 as shareable evaluation closures.

use std::sync::Arc;

use serde::Serialize;

use crate::geometry::{Point4, SymmetryOp};

/// Invariance certified by a field, used to license symmetry-reduced
/// integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryTag {
    None,
    /// Invariant under Θ_k in the (x1,x2) plane.
    Ring { k: usize },
    /// Invariant under ℛ_k.
    Torus { k: usize },
}

impl SymmetryTag {
    /// The weaker of two tags (the invariance shared by a product or sum).
    pub fn meet(self, other: SymmetryTag) -> SymmetryTag {
        if self == other {
            self
        } else {
            SymmetryTag::None
        }
    }
}

/// Points where an integrand concentrates, with the smallest width there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakLayout {
    pub centers: Vec<Point4>,
    pub width: f64,
}

impl PeakLayout {
    pub fn none() -> Self {
        PeakLayout {
            centers: Vec::new(),
            width: 1.0,
        }
    }

    pub fn new(centers: Vec<Point4>, width: f64) -> Self {
        PeakLayout { centers, width }
    }

    /// Union of two layouts, keeping the smaller width and dropping
    /// duplicated centers.
    pub fn merge(&self, other: &PeakLayout) -> PeakLayout {
        let mut centers = self.centers.clone();
        for c in &other.centers {
            if !centers.iter().any(|d| d.dist_sq(c) < 1e-24) {
                centers.push(*c);
            }
        }
        let width = match (self.centers.is_empty(), other.centers.is_empty()) {
            (true, true) => self.width.min(other.width),
            (false, true) => self.width,
            (true, false) => other.width,
            (false, false) => self.width.min(other.width),
        };
        PeakLayout { centers, width }
    }
}

/// A real-valued field, safely evaluable from many threads.
pub trait ScalarField: Send + Sync {
    fn eval(&self, x: &Point4) -> f64;

    fn tag(&self) -> SymmetryTag {
        SymmetryTag::None
    }

    fn peaks(&self) -> PeakLayout {
        PeakLayout::none()
    }
}

/// A field with a closed-form Laplacian.
pub trait SmoothField: ScalarField {
    fn laplacian(&self, x: &Point4) -> f64;

    fn value_and_laplacian(&self, x: &Point4) -> (f64, f64) {
        (self.eval(x), self.laplacian(x))
    }
}

pub type Field = Arc<dyn ScalarField>;
pub type Smooth = Arc<dyn SmoothField>;

/// Closure-backed field.
pub struct FnField<F> {
    f: F,
    tag: SymmetryTag,
    peaks: PeakLayout,
}

impl<F> ScalarField for FnField<F>
where
    F: Fn(&Point4) -> f64 + Send + Sync,
{
    fn eval(&self, x: &Point4) -> f64 {
        (self.f)(x)
    }
    fn tag(&self) -> SymmetryTag {
        self.tag
    }
    fn peaks(&self) -> PeakLayout {
        self.peaks.clone()
    }
}

/// Wrap a closure as a shared field.
pub fn field_fn<F>(tag: SymmetryTag, peaks: PeakLayout, f: F) -> Field
where
    F: Fn(&Point4) -> f64 + Send + Sync + 'static,
{
    Arc::new(FnField { f, tag, peaks })
}

/// The zero field.
pub fn zero_field() -> Field {
    field_fn(SymmetryTag::None, PeakLayout::none(), |_| 0.0)
}

/// Pullback of a field by a symmetry op.
pub struct Conjugated {
    op: SymmetryOp,
    inner: Field,
}

impl Conjugated {
    pub fn new(op: SymmetryOp, inner: Field) -> Self {
        Conjugated { op, inner }
    }
}

impl ScalarField for Conjugated {
    fn eval(&self, x: &Point4) -> f64 {
        match self.op.matrix() {
            Some(m) => self.inner.eval(&x.transform(m)),
            None => {
                let r2 = x.norm_sq();
                self.inner.eval(&(*x * (1.0 / r2))) / r2
            }
        }
    }
}

impl ScalarField for Arc<dyn ScalarField> {
    fn eval(&self, x: &Point4) -> f64 {
        (**self).eval(x)
    }
    fn tag(&self) -> SymmetryTag {
        (**self).tag()
    }
    fn peaks(&self) -> PeakLayout {
        (**self).peaks()
    }
}
