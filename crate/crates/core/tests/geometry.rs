use std::f64::consts::PI;

use approx::assert_relative_eq;
use critsys::geometry::*;
use proptest::prelude::*;

fn arb_point() -> impl Strategy<Value = Point4> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b, c, d)| Point4::new(a, b, c, d))
}

#[test]
fn ring_k2_centers() {
    let c = Configuration::ring(2, 0.6).unwrap();
    assert_relative_eq!(c.rho, 0.8, epsilon = 1e-15);
    assert_eq!(c.centers.len(), 2);
    assert_relative_eq!(c.centers[0].x1, 0.8, epsilon = 1e-15);
    assert_relative_eq!(c.centers[1].x1, -0.8, epsilon = 1e-15);
    assert!(c.centers[1].x2.abs() < 1e-15);
}

#[test]
fn torus_k2_q2_has_four_centers_on_sphere() {
    let c = Configuration::torus(2, 2, 0.1).unwrap();
    assert_eq!(c.centers.len(), 4);
    assert_eq!(c.m(), 3);
    for p in &c.centers {
        assert_relative_eq!(p.norm(), c.rho, epsilon = 1e-15);
    }
}

#[test]
fn constructor_errors() {
    assert_eq!(Configuration::torus(3, 2, 0.1).unwrap_err().kind(), "invalid_configuration");
    assert_eq!(Configuration::ring(1, 0.1).unwrap_err().kind(), "invalid_configuration");
    assert!(Configuration::ring(2, 1.0).is_err());
    assert!(Configuration::ring(2, 0.0).is_err());
    assert!(Configuration::ring(2, f64::NAN).is_err());
    assert_eq!(Configuration::torus(2, 0, 0.1).unwrap_err().exit_code(), 2);
}

#[test]
fn configuration_json_round_trip_derives_rho() {
    let c = Configuration::torus(4, 3, 0.2).unwrap();
    let s = serde_json::to_string(&c).unwrap();
    assert!(!s.contains("rho"));
    assert!(!s.contains("centers"));
    let back: Configuration = serde_json::from_str(&s).unwrap();
    assert_eq!(back, c);
    let ring: Configuration = serde_json::from_str(r#"{"kind":"ring","k":3,"delta":0.1}"#).unwrap();
    assert_eq!(ring.q, 1);
    assert!(serde_json::from_str::<Configuration>(r#"{"kind":"torus","k":3,"q":2,"delta":0.1}"#).is_err());
}

#[test]
fn pair_distance_examples() {
    let c = Configuration::ring(2, 1e-9).unwrap();
    let t = Configuration::torus(2, 2, 1e-9).unwrap();
    assert_relative_eq!(pair_distance_sq(&t, 1, 1, 2, 1).unwrap(), 2.0, epsilon = 1e-12);
    assert_relative_eq!(pair_distance_sq(&t, 1, 2, 1, 1).unwrap(), 4.0, epsilon = 1e-12);
    assert_eq!(pair_distance_sq(&t, 0, 1, 1, 1).unwrap_err().kind(), "invalid_index");
    assert_eq!(c.centers.len(), 2);
}

#[test]
fn pair_distance_exhaustive() {
    for k in [2, 4, 6, 8] {
        for q in 1..=4 {
            let c = Configuration::torus(k, q, 0.35).unwrap();
            for r in 1..=q {
                for s in 1..=q {
                    for i in 1..=k {
                        for j in 1..=k {
                            let f = pair_distance_sq(&c, i, j, r, s).unwrap();
                            let e = c.center(i, r).unwrap().dist_sq(&c.center(j, s).unwrap());
                            assert!((f - e).abs() <= 1e-12, "k={k} q={q} ({i},{j},{r},{s})");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn lattice_sum_values() {
    assert_relative_eq!(lattice_sum(2, 1.0).unwrap(), 0.25, epsilon = 1e-15);
    assert_relative_eq!(lattice_sum(3, 1.0).unwrap(), 8.0 / 12.0, epsilon = 1e-15);
    assert_relative_eq!(lattice_sum(4, 0.5).unwrap(), lattice_sum_closed_form(4, 0.5), max_relative = 1e-14);
    assert!(lattice_sum(1, 1.0).is_err());
    let big = 10_000;
    assert_relative_eq!(
        lattice_sum(big, 1.0).unwrap(),
        ((big * big - 1) as f64) / 12.0,
        max_relative = 1e-12
    );
}

#[test]
fn lattice_sum_over_k_squared_increases_to_a() {
    let mut prev = 0.0;
    for k in [2, 4, 8, 16, 64, 256, 1024] {
        let v = lattice_sum(k, 1.0).unwrap() / (k * k) as f64;
        assert!(v > prev && v < LATTICE_A);
        prev = v;
    }
    assert!((prev - LATTICE_A).abs() < 1e-6);
}

#[test]
fn torus_lattice_sum_matches_planar_sum_scaled() {
    // each sheet is a regular k-gon of radius ρ in a 2-plane of R^4
    let c = Configuration::torus(4, 2, 0.1).unwrap();
    assert_relative_eq!(torus_lattice_sum(&c), lattice_sum(4, c.rho).unwrap(), max_relative = 1e-13);
}

#[test]
fn generator_matrices() {
    let m = double_rotation_matrix(PI / 2.0);
    let x = m * nalgebra::Vector4::new(1.0, 0.0, 0.0, 0.0);
    assert_relative_eq!(x[1], 1.0, epsilon = 1e-15);
    let r = block_rotation_matrix(4);
    assert!((r * r * r * r - nalgebra::Matrix4::identity()).abs().max() < 1e-14);
    assert!(SymmetryOp::reflection(4).is_err());
    assert!(SymmetryOp::planar_rotation(0.1, (2, 2)).is_err());
}

#[test]
fn fraction_of_turn_is_exact_on_quarters() {
    assert_eq!(fraction_of_turn(1, 4), PI / 2.0);
    assert_eq!(fraction_of_turn(0, 7), 0.0);
    assert_relative_eq!(reduce_angle(3.0 * PI), PI, epsilon = 1e-15);
}

#[test]
fn kelvin_has_no_matrix() {
    let k = SymmetryOp::kelvin();
    assert!(k.matrix().is_none());
    assert!(k.is_conformal());
    assert!(apply_op(&k, &Point4::ORIGIN).is_err());
}

#[test]
fn cone_membership() {
    assert!(in_fundamental_cone(&Point4::new(1.0, 0.1, 0.3, 0.0), 2, ConeMode::Ring));
    assert!(!in_fundamental_cone(&Point4::new(-1.0, 0.1, 0.0, 0.0), 2, ConeMode::Ring));
    assert_eq!(torus_cone_piece(&Point4::new(1.0, 0.0, 1.0, 0.0), 4), 1);
    assert_eq!(torus_cone_piece(&Point4::new(1.0, 0.0, 1.0, 2.0), 4), 2);
    assert_eq!(torus_cone_piece(&Point4::new(1.0, 2.0, 1.0, 0.0), 4), 3);
    assert_eq!(torus_cone_piece(&Point4::new(1.0, 2.0, 1.0, 2.0), 4), 0);
}

#[test]
fn rotation_by_wrong_angle_breaks_ring_symmetry() {
    let f = critsys::bubbles::AnsatzFamily::ring(2, 0.1, -0.05).unwrap();
    let v = critsys::bubbles::ansatz_field(&f, 1).unwrap();
    let op = SymmetryOp::planar_rotation(2.0 * PI / 3.0, (0, 1)).unwrap();
    assert!(symmetry_report(&v, &[op], 200, 1e-12).max_deviation() > 0.1);
}

proptest! {
    #[test]
    fn ops_are_orthogonal(k in 2usize..12, q in 1usize..6, theta in -10.0..10.0f64) {
        let mut ops = ring_symmetry_ops(k);
        ops.extend(torus_symmetry_ops(2 * (k / 2).max(1), Some(q)));
        ops.push(SymmetryOp::double_rotation(theta));
        for op in ops.iter().filter(|o| !o.is_conformal()) {
            prop_assert!(orthogonality_defect(op) <= 1e-12);
        }
    }

    #[test]
    fn kelvin_is_an_involution(x in arb_point()) {
        prop_assume!(x.norm() > 1e-3);
        let k = SymmetryOp::kelvin();
        let y = apply_op(&k, &apply_op(&k, &x).unwrap()).unwrap();
        prop_assert!(y.dist_sq(&x).sqrt() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn double_rotations_compose(a in -PI..PI, b in -PI..PI, x in arb_point()) {
        let lhs = x.transform(&double_rotation_matrix(a)).transform(&double_rotation_matrix(b));
        let rhs = x.transform(&double_rotation_matrix(a + b));
        prop_assert!(lhs.dist_sq(&rhs).sqrt() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn pair_distance_random(k2 in 1usize..5, q in 1usize..5, delta in 0.01..0.9f64, seed in any::<u64>()) {
        let k = 2 * k2;
        let c = Configuration::torus(k, q, delta).unwrap();
        let pick = |s: u64, n: usize| (s % n as u64) as usize + 1;
        let (i, j, r, s) = (pick(seed, k), pick(seed >> 8, k), pick(seed >> 16, q), pick(seed >> 24, q));
        let f = pair_distance_sq(&c, i, j, r, s).unwrap();
        let e = c.center(i, r).unwrap().dist_sq(&c.center(j, s).unwrap());
        prop_assert!((f - e).abs() <= 1e-12);
    }

    #[test]
    fn lattice_sum_closed_form_holds(k in 2usize..3000) {
        let v = lattice_sum(k, 1.0).unwrap();
        prop_assert!(((v - lattice_sum_closed_form(k, 1.0)) / v).abs() <= 1e-12);
    }

    #[test]
    fn centers_satisfy_invariants(k in 2usize..10, delta in 1e-4..0.99f64) {
        let c = Configuration::ring(k, delta).unwrap();
        prop_assert!(c.validate().is_ok());
        prop_assert!((delta * delta + c.rho * c.rho - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn reduce_angle_range(t in -100.0..100.0f64) {
        let r = reduce_angle(t);
        prop_assert!((0.0..2.0 * PI).contains(&r));
        prop_assert!((r.cos() - t.cos()).abs() < 1e-12 && (r.sin() - t.sin()).abs() < 1e-12);
    }
}
