//! Points, symmetry ops, bubble-center configurations and lattice identities.

mod config;
mod point;
mod symmetry;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{
    lattice_sum, lattice_sum_closed_form, pair_distance_sq, ring_centers, torus_centers,
    torus_lattice_sum, ConfigKind, ConfigSpec, Configuration,
};
pub(crate) use config::min_pairwise_distance;
pub use point::Point4;
pub use symmetry::{
    apply_op, block_rotation_matrix, double_rotation_matrix, fraction_of_turn,
    orthogonality_defect, reduce_angle, SymmetryKind, SymmetryOp,
};

use crate::field::{Conjugated, Field};

/// The Lattice constant A = 1/12 (limit of lattice_sum(k,1)/k²).
pub const LATTICE_A: f64 = 1.0 / 12.0;

/// Pull a field back by `op`: plain composition for orthogonal ops,
/// x ↦ |x|⁻² f(x/|x|²) for Kelvin.
pub fn conjugate_function(op: &SymmetryOp, f: Field) -> Field {
    Arc::new(Conjugated::new(op.clone(), f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConeMode {
    Ring,
    Torus,
}

fn near_multiple_of_pi(theta: f64, half_width: f64) -> bool {
    // distance from theta to the set {0, π} modulo 2π
    let t = theta.rem_euclid(PI);
    t.min(PI - t) <= half_width + 1e-12
}

/// Membership in the closed fundamental cone Σ_k (ring) or the angular
/// region Λ_k (torus).
pub fn in_fundamental_cone(x: &Point4, k: usize, mode: ConeMode) -> bool {
    let w = PI / k as f64;
    match mode {
        ConeMode::Ring => x.x2.atan2(x.x1).abs() <= w + 1e-12,
        ConeMode::Torus => {
            let t1 = x.x2.atan2(x.x1);
            let t2 = x.x4.atan2(x.x3);
            // Λ¹ ∪ Λ² ∪ Λ³ = {θ₁ ∈ I} ∪ {θ₂ ∈ I}, I = [−π/k, π/k] ∪ [π − π/k, π + π/k]
            near_multiple_of_pi(t1, w) || near_multiple_of_pi(t2, w)
        }
    }
}

/// Which of Λ¹, Λ², Λ³ contains the angle pair of `x` (1, 2, 3), or 0.
pub fn torus_cone_piece(x: &Point4, k: usize) -> usize {
    let w = PI / k as f64;
    let a = near_multiple_of_pi(x.x2.atan2(x.x1), w);
    let b = near_multiple_of_pi(x.x4.atan2(x.x3), w);
    match (a, b) {
        (true, true) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (false, false) => 0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryEntry {
    pub op: String,
    pub max_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub samples: usize,
    pub tol: f64,
    pub entries: Vec<SymmetryEntry>,
}

impl SymmetryReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn max_deviation(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_deviation)
            .fold(0.0, f64::max)
    }
}

/// Deterministic sample points in the ball of radius 2.5, away from the
/// origin (the Kelvin singularity).
pub fn sample_points(count: usize, seed: u64) -> Vec<Point4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Point4::new(
            rng.gen_range(-2.5..2.5),
            rng.gen_range(-2.5..2.5),
            rng.gen_range(-2.5..2.5),
            rng.gen_range(-2.5..2.5),
        );
        let r = p.norm();
        if r < 1e-2 || r > 2.5 {
            continue;
        }
        out.push(p);
    }
    out
}

/// Max over samples of |f(x) − (op* f)(x)| for each op.
pub fn symmetry_report(f: &Field, ops: &[SymmetryOp], samples: usize, tol: f64) -> SymmetryReport {
    let points = sample_points(samples, 0x5eed);
    let entries = ops
        .iter()
        .map(|op| {
            let g = conjugate_function(op, f.clone());
            let max_deviation = points
                .iter()
                .map(|x| (f.eval(x) - g.eval(x)).abs())
                .fold(0.0, f64::max);
            SymmetryEntry {
                op: op.label(),
                max_deviation,
                passed: max_deviation <= tol,
            }
        })
        .collect();
    SymmetryReport {
        samples,
        tol,
        entries,
    }
}

/// Generators of the ring symmetry class: evenness in x2, x3, x4, Θ_k and
/// Kelvin.
pub fn ring_symmetry_ops(k: usize) -> Vec<SymmetryOp> {
    vec![
        SymmetryOp::reflection(1).expect("axis"),
        SymmetryOp::reflection(2).expect("axis"),
        SymmetryOp::reflection(3).expect("axis"),
        SymmetryOp::theta_k(k),
        SymmetryOp::kelvin(),
    ]
}

/// Generators of the torus class for the second component: the (x2,x4)
/// reflection, the plane swap, ℛ_k and Kelvin. With `sheets = Some(q)` the
/// sheet maps 𝒯_r, r = 2..q, are added (first-component class).
pub fn torus_symmetry_ops(k: usize, sheets: Option<usize>) -> Vec<SymmetryOp> {
    let mut ops = vec![
        SymmetryOp::reflect_x2_x4(),
        SymmetryOp::coordinate_swap(),
        SymmetryOp::block_rotation(k),
        SymmetryOp::kelvin(),
    ];
    if let Some(q) = sheets {
        for r in 2..=q {
            ops.push(SymmetryOp::sheet_map(r, q));
        }
    }
    ops
}
