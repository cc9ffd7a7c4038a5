//! The invariant suite behind `critsys verify`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::commands::{ansatz_symmetry, tune_row};
use super::{fmt_f64, to_json_string, RunConfig};
use crate::bubbles::{
    ansatz_field, bubble_laplacian, nonlinear_terms_eval, reduction_identity_check, standard_bubble, AnsatzFamily,
    BubbleField, KernelElement, ResidualComponent,
};
use crate::error::Result;
use crate::field::{field_fn, zero_field, Field, PeakLayout, ScalarField, SymmetryTag};
use crate::geometry::{
    apply_op, lattice_sum, orthogonality_defect, pair_distance_sq, ring_symmetry_ops, sample_points, symmetry_report,
    torus_symmetry_ops, Configuration, Point4, SymmetryOp,
};
use crate::quadrature::{energy_product, integrate, QuadratureSpec};
use crate::reduction::{fit_coefficients, piece_norm, reduction_integrals, A1, INT_U3, INT_U4};
use crate::solver::exact_kernel_singular_value;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub module: String,
    pub name: String,
    pub passed: bool,
    /// The measured quantity the check compares.
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifySummary {
    pub fn csv(&self) -> String {
        let mut s = String::from("module,name,passed,value\n");
        for c in &self.checks {
            s.push_str(&format!("{},{},{},{}\n", c.module, c.name, c.passed, fmt_f64(c.value)));
        }
        s
    }
}

/// Seven-point central-difference Laplacian with step h.
pub fn fd_laplacian(f: &dyn Fn(&Point4) -> f64, x: &Point4, h: f64) -> f64 {
    let f0 = f(x);
    let mut s = 0.0;
    for i in 0..4 {
        let e = Point4::axis(i) * h;
        s += f(&(*x + e)) + f(&(*x - e)) - 2.0 * f0;
    }
    s / (h * h)
}

/// Max over `points` of |Δ_h f − Δf| for each step, and the observed
/// orders log₂(e(h)/e(h/2)).
pub fn fd_orders(
    f: &dyn Fn(&Point4) -> f64,
    lap: &dyn Fn(&Point4) -> f64,
    points: &[Point4],
    steps: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let errs: Vec<f64> = steps
        .iter()
        .map(|&h| {
            points
                .iter()
                .map(|x| (fd_laplacian(f, x, h) - lap(x)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let orders = errs
        .windows(2)
        .zip(steps.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    (errs, orders)
}

pub const FD_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Points in the shell 0.2 ≤ |x| ≤ 1.5, where U varies on the unit scale.
pub fn fd_points(count: usize, seed: u64) -> Vec<Point4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Point4::new(
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
        );
        let r = p.norm();
        if (0.2..=1.5).contains(&r) {
            out.push(p);
        }
    }
    out
}

/// A random smooth field averaged over the ring group generated by the
/// reflections in x2, x3, x4, Θ_k and Kelvin.
pub fn symmetrized_random_field(k: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, Point4, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.5..1.5),
                Point4::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ),
                rng.gen_range(0.6..1.2),
            )
        })
        .collect();
    let g = move |x: &Point4| -> f64 {
        bumps
            .iter()
            .map(|(a, p, w)| a * (-x.dist_sq(p) / (2.0 * w * w)).exp())
            .sum()
    };
    let mut mats = Vec::with_capacity(8 * k);
    for l in 0..k {
        let rot = *SymmetryOp::planar_rotation(2.0 * PI * l as f64 / k as f64, (0, 1))
            .expect("plane")
            .matrix()
            .expect("orthogonal");
        for mask in 0..8u32 {
            let mut m = rot;
            for (bit, axis) in [(1u32, 1usize), (2, 2), (4, 3)] {
                if mask & bit != 0 {
                    m.row_mut(axis).neg_mut();
                }
            }
            mats.push(m);
        }
    }
    let n = mats.len() as f64;
    let avg = move |x: &Point4| -> f64 { mats.iter().map(|m| g(&x.transform(m))).sum::<f64>() / n };
    field_fn(SymmetryTag::None, PeakLayout::none(), move |x| {
        let r2 = x.norm_sq();
        let kelvin = if r2 > 0.0 { avg(&(*x * (1.0 / r2))) / r2 } else { 0.0 };
        0.5 * (avg(x) + kelvin)
    })
}

/// ∫3U²Zʲφ and ∫|3U²Zʲφ|. The signed integral is computed with absolute
/// tolerance `rel_tol`·∫|3U²Zʲφ|/10, since its exact value is zero.
pub fn kernel_pairing(phi: &Field, j: usize, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let z = KernelElement::new(j)?;
    let p1 = phi.clone();
    let z1 = z.clone();
    let f = field_fn(SymmetryTag::None, PeakLayout::none(), move |x| {
        let u = standard_bubble(x);
        3.0 * u * u * z1.eval(x) * p1.eval(x)
    });
    let p2 = phi.clone();
    let g = field_fn(SymmetryTag::None, PeakLayout::none(), move |x| {
        let u = standard_bubble(x);
        (3.0 * u * u * z.eval(x) * p2.eval(x)).abs()
    });
    let scale = integrate(&g, spec)?.value;
    let signed = QuadratureSpec {
        abs_tol: 0.1 * spec.rel_tol * scale,
        ..*spec
    };
    Ok((integrate(&f, &signed)?.value, scale))
}

/// A bubble off every symmetry axis, so the sheet relations fail.
pub fn uneven_field() -> Field {
    let b = BubbleField::new(0.5, Point4::new(0.3, 0.1, -0.2, 0.05));
    field_fn(SymmetryTag::None, PeakLayout::none(), move |x| crate::bubbles::bubble_eval(&b, x))
}

/// Max over `count` sample points and all i of the m→2 identity defect.
pub fn identity_defect(v: &Field, q: usize, count: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in sample_points(count, 0x1d) {
        for i in 1..=q {
            worst = worst.max(reduction_identity_check(v, q, i, &x)?);
        }
    }
    Ok(worst)
}

struct Suite {
    checks: Vec<CheckResult>,
}

impl Suite {
    fn record(&mut self, module: &str, name: &str, outcome: Result<(bool, f64, String)>) {
        let (passed, value, detail) = match outcome {
            Ok(t) => t,
            Err(e) => (false, f64::NAN, format!("error: {e}")),
        };
        self.checks.push(CheckResult {
            module: module.into(),
            name: name.into(),
            passed,
            value,
            detail,
        });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Runs the invariant suite. Failed checks are reported, not raised.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifySummary> {
    let spec = cfg.quadrature;
    let mut s = Suite { checks: Vec::new() };

    s.record("geometry", "ring_centers_on_sphere", (|| {
        let mut worst = 0.0f64;
        for k in 2..=8 {
            let c = Configuration::ring(k, 0.1)?;
            for p in &c.centers {
                worst = worst.max((p.norm() - c.rho).abs());
            }
        }
        Ok((worst <= 1e-12, worst, "max | |xi| - rho |, k = 2..8".into()))
    })());

    s.record("geometry", "torus_centers_on_sphere", (|| {
        let mut worst = 0.0f64;
        for k in [2, 4, 6, 8] {
            for q in 1..=4 {
                let c = Configuration::torus(k, q, 0.1)?;
                for p in &c.centers {
                    worst = worst.max((p.norm() - c.rho).abs());
                }
            }
        }
        Ok((worst <= 1e-12, worst, "k even <= 8, q <= 4".into()))
    })());

    s.record("geometry", "pair_distance_formula", (|| {
        let mut worst = 0.0f64;
        for k in [2, 4, 6, 8] {
            for q in 1..=4 {
                let c = Configuration::torus(k, q, 0.3)?;
                for r in 1..=q {
                    for t in 1..=q {
                        for i in 1..=k {
                            for j in 1..=k {
                                let f = pair_distance_sq(&c, i, j, r, t)?;
                                let e = c.center(i, r)?.dist_sq(&c.center(j, t)?);
                                worst = worst.max((f - e).abs());
                            }
                        }
                    }
                }
            }
        }
        Ok((worst <= 1e-12, worst, "all index quadruples".into()))
    })());

    s.record("geometry", "lattice_sum_closed_form", (|| {
        let mut worst = 0.0f64;
        for k in (2..=2000).chain([5_000, 10_000]) {
            let exact = ((k * k - 1) as f64) / 12.0;
            worst = worst.max(rel(lattice_sum(k, 1.0)?, exact));
        }
        Ok((worst <= 1e-12, worst, "relative, k = 2..2000, 5000, 10000".into()))
    })());

    s.record("geometry", "orthogonality_of_ops", (|| {
        let mut ops = ring_symmetry_ops(4);
        ops.extend(torus_symmetry_ops(4, Some(3)));
        let worst = ops.iter().map(orthogonality_defect).fold(0.0, f64::max);
        Ok((worst <= 1e-12, worst, "max |M^T M - I|".into()))
    })());

    s.record("geometry", "kelvin_involution", (|| {
        let k = SymmetryOp::kelvin();
        let mut worst = 0.0f64;
        for x in sample_points(100, 7) {
            let y = apply_op(&k, &apply_op(&k, &x)?)?;
            worst = worst.max(y.dist_sq(&x).sqrt() / x.norm());
        }
        Ok((worst <= 1e-12, worst, "relative |KKx - x|".into()))
    })());

    s.record("geometry", "rotation_counterexample", (|| {
        let f = AnsatzFamily::ring(2, 0.1, -0.05)?;
        let op = SymmetryOp::planar_rotation(2.0 * PI / 3.0, (0, 1))?;
        let r = symmetry_report(&ansatz_field(&f, 1)?, &[op], 200, 0.1);
        let dev = r.max_deviation();
        Ok((dev > 0.1, dev, "V under rotation by 2pi/3 must deviate".into()))
    })());

    s.record("bubbles", "ring_ansatz_symmetry", (|| {
        let f = AnsatzFamily::ring(3, 0.1, -0.05)?;
        let reps = ansatz_symmetry(&f)?;
        let dev = reps.iter().map(|r| r.report.max_deviation()).fold(0.0, f64::max);
        Ok((reps.iter().all(|r| r.report.all_passed()), dev, "sim1/sim2/kel".into()))
    })());

    s.record("bubbles", "torus_ansatz_symmetry", (|| {
        let f = AnsatzFamily::torus(2, 3, 0.1, -0.05, 1.0)?;
        let reps = ansatz_symmetry(&f)?;
        let dev = reps.iter().map(|r| r.report.max_deviation()).fold(0.0, f64::max);
        Ok((reps.iter().all(|r| r.report.all_passed()), dev, "24/e611/e62/e63".into()))
    })());

    s.record("bubbles", "peak_value", (|| {
        let f = AnsatzFamily::ring(2, 0.1, -0.05)?;
        let b = BubbleField::new(0.1, f.config.centers[0]);
        let v = b.peak_value();
        Ok((rel(v, 2f64.sqrt() * 2.0 / 0.1) <= 1e-14, v, "c4/delta".into()))
    })());

    s.record("bubbles", "bubble_fd_order", (|| {
        let b = BubbleField::new(0.7, Point4::new(0.2, -0.1, 0.0, 0.3));
        let f = |x: &Point4| crate::bubbles::bubble_eval(&b, x);
        let lap = |x: &Point4| bubble_laplacian(&b, x);
        let (_, orders) = fd_orders(&f, &lap, &fd_points(200, 3), &FD_STEPS);
        let worst = orders.iter().map(|o| (o - 2.0).abs()).fold(0.0, f64::max);
        Ok((worst <= 0.1, orders[orders.len() - 1], "order of -Delta_h U - U^3".into()))
    })());

    s.record("bubbles", "kernel_fd_order", (|| {
        let pts = fd_points(200, 4);
        let mut worst = 0.0f64;
        for j in 0..5 {
            let z = KernelElement::new(j)?;
            let f = |x: &Point4| z.eval(x);
            let lap = |x: &Point4| crate::field::SmoothField::laplacian(&z, x);
            let (_, orders) = fd_orders(&f, &lap, &pts, &FD_STEPS);
            worst = worst.max(orders.iter().map(|o| (o - 2.0).abs()).fold(0.0, f64::max));
        }
        Ok((worst <= 0.1, worst, "max |order - 2|, j = 0..4".into()))
    })());

    s.record("bubbles", "nonlinear_vanishes_at_zero", (|| {
        let f = AnsatzFamily::torus(2, 2, 0.1, -0.05, 1.0)?;
        let z = zero_field();
        let worst = sample_points(50, 11)
            .iter()
            .map(|x| {
                let n = nonlinear_terms_eval(&f, &z, &z, x);
                n.n1.abs().max(n.n2.abs())
            })
            .fold(0.0, f64::max);
        Ok((worst == 0.0, worst, "phi = psi = 0".into()))
    })());

    s.record("bubbles", "reduction_identity", (|| {
        let mut worst = 0.0f64;
        for q in [2, 3] {
            let f = AnsatzFamily::torus(2, q, 0.1, -0.05, 1.0)?;
            worst = worst.max(identity_defect(&ansatz_field(&f, 1)?, q, 100)?);
        }
        Ok((worst <= 1e-12, worst, "torus V, q = 2, 3".into()))
    })());

    s.record("bubbles", "reduction_identity_counterexample", (|| {
        let d = identity_defect(&uneven_field(), 3, 100)?;
        Ok((d > 1e-3, d, "shifted bubble, q = 3".into()))
    })());

    s.record("quadrature", "integral_u4", (|| {
        let f = field_fn(SymmetryTag::None, PeakLayout::none(), |x| standard_bubble(x).powi(4));
        let v = integrate(&f, &spec)?.value;
        Ok((rel(v, INT_U4) <= 1e-6, v, "32 pi^2 / 3".into()))
    })());

    s.record("quadrature", "integral_u3", (|| {
        let f = field_fn(SymmetryTag::None, PeakLayout::none(), |x| standard_bubble(x).powi(3));
        let v = integrate(&f, &spec)?.value;
        Ok((rel(v, INT_U3) <= 1e-6, v, "8 sqrt2 pi^2".into()))
    })());

    s.record("quadrature", "kernel_energy", (|| {
        let z = KernelElement::new(0)?;
        let v = energy_product(&z, &z, &spec)?;
        Ok((rel(v, A1) <= 1e-6, v, "|grad Z0|^2 = 4 pi^2 / 5".into()))
    })());

    s.record("quadrature", "odd_integrand_vanishes", (|| {
        let f = field_fn(SymmetryTag::None, PeakLayout::none(), |x| x.x1 * standard_bubble(x).powi(4));
        let v = integrate(&f, &QuadratureSpec::with_tolerances(1e-8, 1e-9))?.value;
        Ok((v.abs() <= 1e-8, v, "x1 U^4".into()))
    })());

    s.record("bubbles", "kernel_orthogonality", (|| {
        let phi = symmetrized_random_field(2, 21);
        let mut worst = 0.0f64;
        for j in 0..5 {
            let (v, a) = kernel_pairing(&phi, j, &QuadratureSpec::with_tolerances(1e-6, 1e-12))?;
            worst = worst.max(v.abs() / a.max(1e-300));
        }
        Ok((worst <= 1e-6, worst, "|int 3U^2 Z_j phi| / int |.|, j = 0..4".into()))
    })());

    s.record("reduction", "delta_star_closed_form", (|| {
        let mut worst = 0.0f64;
        for k in [2, 3, 4] {
            for b in [-1.0, -0.5, -0.1] {
                worst = worst.max(tune_row(k, b)?.log_rel_error);
            }
        }
        Ok((worst <= 1e-10, worst, "relative error in ln delta".into()))
    })());

    s.record("reduction", "tune_example", (|| {
        let v = tune_row(2, -0.5)?.delta_star;
        Ok((rel(v, 1.93e-6) <= 1e-2, v, "k = 2, beta = -0.5".into()))
    })());

    s.record("reduction", "fit_recovers_exact_model", (|| {
        let (c1, c2, beta) = (74.0, 11.0, -0.05);
        let pts: Vec<(f64, f64)> = crate::reduction::log_grid(1e-3, 1e-1, 7)
            .into_iter()
            .map(|d| (d, -c1 * d * d + c2 * beta * d * d * d.ln()))
            .collect();
        let f = fit_coefficients(&pts, beta)?;
        let e = rel(f.c1, c1).max(rel(f.c2, c2));
        Ok((e <= 1e-8, e, "synthetic samples".into()))
    })());

    s.record("reduction", "integral_signs_and_z_energy", (|| {
        let f = AnsatzFamily::ring(2, 0.01, -0.05)?;
        let r = reduction_integrals(&f, &spec)?;
        let e = rel(r.z_energy, 2.0 * A1);
        let ok = r.i1 < 0.0 && r.i2 > 0.0 && e <= 1e-2;
        Ok((ok, r.z_energy, format!("I1 = {:e}, I2 = {:e}, |Z|^2 vs A1 k", r.i1, r.i2)))
    })());

    s.record("reduction", "residual_beta_linear", (|| {
        let f = AnsatzFamily::ring(2, 0.05, -0.05)?;
        let a = piece_norm(&f, ResidualComponent::E1, &spec)?;
        let b = piece_norm(&f.with_beta(-0.1), ResidualComponent::E1, &spec)?;
        let e = (b / a - 2.0).abs();
        Ok((e <= 1e-10, b / a, "norm E1 under beta -> 2 beta".into()))
    })());

    s.record("solver", "exact_kernel_singular", (|| {
        let v = exact_kernel_singular_value(&cfg.solver.quadrature)?;
        Ok((v <= 1e-6, v, "span{Z0, U, U_1/2, U_2}".into()))
    })());

    s.record("solver", "projected_coercivity", (|| {
        let c = RunConfig {
            kind: crate::geometry::ConfigKind::Ring,
            k: 2,
            q: 1,
            delta: 0.05,
            beta: -0.05,
            ..cfg.clone()
        };
        let out = super::cmd_spectrum(&c)?;
        let r = &out.spectrum;
        let ok = r.min_singular_projected >= 0.1 && r.ratio >= 10.0;
        Ok((ok, r.min_singular_projected, format!("ratio {:.3}", r.ratio)))
    })());

    s.record("cli", "json_round_trip", (|| {
        let vals = vec![0.1, 1.0 / 3.0, PI, 1e-300, -2.5e17];
        let back: Vec<f64> = serde_json::from_str(&to_json_string(&vals)?)?;
        Ok((back == vals, vals.len() as f64, "17 significant digits".into()))
    })());

    s.record("cli", "odd_torus_rejected", (|| {
        let c = RunConfig {
            kind: crate::geometry::ConfigKind::Torus,
            k: 3,
            q: 2,
            ..RunConfig::default()
        };
        let code = c.validate().err().map(|e| e.exit_code()).unwrap_or(0);
        Ok((code == 2, code as f64, "exit code".into()))
    })());

    let passed = s.checks.iter().filter(|c| c.passed).count();
    Ok(VerifySummary {
        passed,
        failed: s.checks.len() - passed,
        checks: s.checks,
    })
}
