use std::f64::consts::{PI, TAU};

use nalgebra::Matrix4;
use serde::Serialize;

use super::Point4;
use crate::error::{Error, Result};

/// Reduce an angle to [0, 2π).
pub fn reduce_angle(theta: f64) -> f64 {
    theta.rem_euclid(TAU)
}

/// The angle 2π·n/d computed with the integer part removed first.
pub fn fraction_of_turn(n: i64, d: i64) -> f64 {
    TAU * (n.rem_euclid(d) as f64) / d as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SymmetryKind {
    /// Rotation by `angle` in the coordinate plane `plane` (0-based axes).
    PlanarRotation { angle: f64, plane: (usize, usize) },
    /// 𝒯_θ: rotation by θ in (x1,x2) and by −θ in (x3,x4).
    DoubleRotation { angle: f64 },
    /// ℛ_k: rotation by 2π/k in both coordinate planes.
    BlockRotation { k: usize },
    /// x_axis ↦ −x_axis.
    Reflection { axis: usize },
    /// (x1,x2,x3,x4) ↦ (x3,x4,x1,x2).
    CoordinateSwap,
    /// x ↦ −x.
    Antipodal,
    /// x ↦ x/|x|², acting on functions with weight |x|⁻².
    Kelvin,
    /// Product of orthogonal ops, applied right to left.
    Composite { label: String },
}

/// A symmetry of R^4 used by the constructions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryOp {
    pub kind: SymmetryKind,
    #[serde(skip)]
    matrix: Option<Matrix4<f64>>,
}

fn planar(angle: f64, a: usize, b: usize) -> Matrix4<f64> {
    let (s, c) = reduce_angle(angle).sin_cos();
    let mut m = Matrix4::identity();
    m[(a, a)] = c;
    m[(a, b)] = -s;
    m[(b, a)] = s;
    m[(b, b)] = c;
    m
}

/// Matrix of 𝒯_θ.
pub fn double_rotation_matrix(theta: f64) -> Matrix4<f64> {
    let (s, c) = reduce_angle(theta).sin_cos();
    Matrix4::new(
        c, -s, 0.0, 0.0, //
        s, c, 0.0, 0.0, //
        0.0, 0.0, c, s, //
        0.0, 0.0, -s, c,
    )
}

/// Matrix of ℛ_k.
pub fn block_rotation_matrix(k: usize) -> Matrix4<f64> {
    let (s, c) = fraction_of_turn(1, k as i64).sin_cos();
    Matrix4::new(
        c, -s, 0.0, 0.0, //
        s, c, 0.0, 0.0, //
        0.0, 0.0, c, -s, //
        0.0, 0.0, s, c,
    )
}

impl SymmetryOp {
    fn with_matrix(kind: SymmetryKind, m: Matrix4<f64>) -> Self {
        SymmetryOp {
            kind,
            matrix: Some(m),
        }
    }

    pub fn planar_rotation(angle: f64, plane: (usize, usize)) -> Result<Self> {
        let (a, b) = plane;
        if a >= 4 || b >= 4 || a == b {
            return Err(Error::InvalidIndex(format!("rotation plane ({a},{b})")));
        }
        Ok(Self::with_matrix(
            SymmetryKind::PlanarRotation { angle, plane },
            planar(angle, a, b),
        ))
    }

    /// Θ_k acting in the (x1,x2) plane.
    pub fn theta_k(k: usize) -> Self {
        let angle = fraction_of_turn(1, k as i64);
        Self::with_matrix(
            SymmetryKind::PlanarRotation {
                angle,
                plane: (0, 1),
            },
            planar(angle, 0, 1),
        )
    }

    /// The sheet map 𝒯_r = 𝒯_{(r−1)π/q}.
    pub fn sheet_map(r: usize, q: usize) -> Self {
        Self::double_rotation(PI * (r as f64 - 1.0) / q as f64)
    }

    pub fn double_rotation(angle: f64) -> Self {
        Self::with_matrix(
            SymmetryKind::DoubleRotation { angle },
            double_rotation_matrix(angle),
        )
    }

    pub fn block_rotation(k: usize) -> Self {
        Self::with_matrix(SymmetryKind::BlockRotation { k }, block_rotation_matrix(k))
    }

    pub fn reflection(axis: usize) -> Result<Self> {
        if axis >= 4 {
            return Err(Error::InvalidIndex(format!("reflection axis {axis}")));
        }
        let mut m = Matrix4::identity();
        m[(axis, axis)] = -1.0;
        Ok(Self::with_matrix(SymmetryKind::Reflection { axis }, m))
    }

    pub fn coordinate_swap() -> Self {
        let mut m = Matrix4::zeros();
        m[(0, 2)] = 1.0;
        m[(1, 3)] = 1.0;
        m[(2, 0)] = 1.0;
        m[(3, 1)] = 1.0;
        Self::with_matrix(SymmetryKind::CoordinateSwap, m)
    }

    pub fn antipodal() -> Self {
        Self::with_matrix(SymmetryKind::Antipodal, -Matrix4::identity())
    }

    pub fn kelvin() -> Self {
        SymmetryOp {
            kind: SymmetryKind::Kelvin,
            matrix: None,
        }
    }

    /// `a ∘ b` for two orthogonal ops.
    pub fn compose(a: &SymmetryOp, b: &SymmetryOp, label: &str) -> Result<Self> {
        match (a.matrix, b.matrix) {
            (Some(ma), Some(mb)) => Ok(Self::with_matrix(
                SymmetryKind::Composite {
                    label: label.to_string(),
                },
                ma * mb,
            )),
            _ => Err(Error::Domain(
                "Kelvin cannot be composed into a matrix op".into(),
            )),
        }
    }

    /// The simultaneous reflection (x2,x4) ↦ (−x2,−x4).
    pub fn reflect_x2_x4() -> Self {
        let mut m = Matrix4::identity();
        m[(1, 1)] = -1.0;
        m[(3, 3)] = -1.0;
        Self::with_matrix(
            SymmetryKind::Composite {
                label: "reflect_x2_x4".into(),
            },
            m,
        )
    }

    pub fn is_conformal(&self) -> bool {
        matches!(self.kind, SymmetryKind::Kelvin)
    }

    /// Orthogonal matrix of the op; `None` for Kelvin.
    pub fn matrix(&self) -> Option<&Matrix4<f64>> {
        self.matrix.as_ref()
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match &self.kind {
            SymmetryKind::PlanarRotation { angle, plane } => {
                format!("rotation({:.6}, x{}x{})", angle, plane.0 + 1, plane.1 + 1)
            }
            SymmetryKind::DoubleRotation { angle } => format!("double_rotation({angle:.6})"),
            SymmetryKind::BlockRotation { k } => format!("block_rotation({k})"),
            SymmetryKind::Reflection { axis } => format!("reflection(x{})", axis + 1),
            SymmetryKind::CoordinateSwap => "coordinate_swap".into(),
            SymmetryKind::Antipodal => "antipodal".into(),
            SymmetryKind::Kelvin => "kelvin".into(),
            SymmetryKind::Composite { label } => label.clone(),
        }
    }
}

/// Apply a symmetry op to a point.
pub fn apply_op(op: &SymmetryOp, x: &Point4) -> Result<Point4> {
    match op.matrix() {
        Some(m) => Ok(x.transform(m)),
        None => {
            let r2 = x.norm_sq();
            if r2 == 0.0 {
                return Err(Error::Domain("Kelvin transform at the origin".into()));
            }
            Ok(*x * (1.0 / r2))
        }
    }
}

/// ‖MᵀM − I‖∞ for the op's matrix (0 for Kelvin).
pub fn orthogonality_defect(op: &SymmetryOp) -> f64 {
    match op.matrix() {
        Some(m) => (m.transpose() * m - Matrix4::identity()).abs().max(),
        None => 0.0,
    }
}
