use approx::assert_relative_eq;
use critsys::bubbles::*;
use critsys::cli::{fd_laplacian, fd_orders, fd_points, identity_defect, uneven_field, FD_STEPS};
use critsys::field::{zero_field, ScalarField, SmoothField};
use critsys::geometry::{ring_symmetry_ops, symmetry_report, torus_symmetry_ops, Point4, SymmetryOp};
use proptest::prelude::*;

fn arb_point() -> impl Strategy<Value = Point4> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c, d)| Point4::new(a, b, c, d))
}

#[test]
fn c4_is_two_root_two() {
    assert_relative_eq!(C4, 2.0 * 2f64.sqrt(), max_relative = 1e-16);
    assert_eq!(standard_bubble(&Point4::ORIGIN), C4);
    assert_relative_eq!(BubbleField::new(0.01, Point4::ORIGIN).peak_value(), 100.0 * C4, max_relative = 1e-15);
}

#[test]
fn bubble_pde_has_second_order_fd_convergence() {
    let b = BubbleField::new(0.8, Point4::new(0.1, 0.0, -0.2, 0.1));
    let f = |x: &Point4| bubble_eval(&b, x);
    let lap = |x: &Point4| bubble_laplacian(&b, x);
    let (errs, orders) = fd_orders(&f, &lap, &fd_points(100, 1), &FD_STEPS);
    assert!(errs.windows(2).all(|e| e[1] < e[0]));
    for o in orders {
        assert!((o - 2.0).abs() <= 0.1, "order {o}");
    }
}

#[test]
fn kernel_pde_has_second_order_fd_convergence() {
    let pts = fd_points(100, 2);
    for j in 0..5 {
        let z = KernelElement::new(j).unwrap();
        let f = |x: &Point4| z.eval(x);
        let lap = |x: &Point4| z.laplacian(x);
        let (_, orders) = fd_orders(&f, &lap, &pts, &FD_STEPS);
        for o in orders {
            assert!((o - 2.0).abs() <= 0.1, "j={j} order {o}");
        }
    }
}

#[test]
fn kernel_index_out_of_range() {
    assert_eq!(KernelElement::new(5).unwrap_err().kind(), "invalid_index");
}

#[test]
fn scaled_kernel_matches_rescaling() {
    let xi = Point4::new(0.5, 0.0, 0.0, 0.0);
    let z = KernelElement::scaled(0, 0.1, xi).unwrap();
    let x = Point4::new(0.55, 0.02, 0.0, -0.01);
    let y = (x - xi) * 10.0;
    assert_relative_eq!(z.eval(&x), kernel_eval(&KernelElement::new(0).unwrap(), &y) * 10.0, max_relative = 1e-14);
}

#[test]
fn bubble_sum_laplacian_is_sum_of_cubes() {
    let f = AnsatzFamily::ring(3, 0.2, -0.1).unwrap();
    let s = f.bubble_sum();
    let x = Point4::new(0.3, 0.4, 0.1, 0.0);
    let fd = fd_laplacian(&|p: &Point4| s.eval(p), &x, 1e-3);
    assert_relative_eq!(fd, s.laplacian(&x), max_relative = 1e-4);
}

#[test]
fn cube_excess_examples() {
    assert_eq!(cube_excess(&[2.0]), 0.0);
    assert_relative_eq!(cube_excess(&[1.0, 2.0]), 27.0 - 9.0, max_relative = 1e-15);
    let a = [1e-8, 1.0];
    assert_relative_eq!(cube_excess(&a), 3e-8 + 3e-16 + 0.0, max_relative = 1e-7);
}

#[test]
fn ansatz_component_indexing() {
    let f = AnsatzFamily::torus(2, 2, 0.1, -0.05, 1.0).unwrap();
    assert_eq!(f.m, 3);
    let x = Point4::new(0.1, 0.2, 0.3, 0.4);
    assert_eq!(ansatz_eval(&f, 3, &x).unwrap(), standard_bubble(&x));
    assert_eq!(ansatz_eval(&f, 4, &x).unwrap_err().kind(), "invalid_index");
    assert_eq!(ansatz_eval(&f, 0, &x).unwrap_err().kind(), "invalid_index");
}

#[test]
fn beta_must_be_negative() {
    assert_eq!(AnsatzFamily::ring(2, 0.1, 0.0).unwrap_err().kind(), "domain");
    assert!(AnsatzFamily::ring(2, 0.1, 0.1).is_err());
    assert!(AnsatzFamily::torus(2, 2, 0.1, -0.1, f64::INFINITY).is_err());
}

#[test]
fn ring_alpha_is_dropped() {
    let c = critsys::geometry::Configuration::ring(2, 0.1).unwrap();
    assert_eq!(AnsatzFamily::new(c, -0.1, 3.0).unwrap().alpha, 0.0);
}

#[test]
fn ring_ansatz_invariances() {
    for k in [2, 3, 5] {
        let f = AnsatzFamily::ring(k, 0.1, -0.05).unwrap();
        let ops = ring_symmetry_ops(k);
        for c in 1..=2 {
            let r = symmetry_report(&ansatz_field(&f, c).unwrap(), &ops, 200, 1e-12);
            assert!(r.all_passed(), "k={k} component {c}: {}", r.max_deviation());
        }
    }
}

#[test]
fn torus_ansatz_invariances() {
    let f = AnsatzFamily::torus(4, 2, 0.1, -0.05, 1.0).unwrap();
    let v = ansatz_field(&f, 1).unwrap();
    let r = symmetry_report(&v, &torus_symmetry_ops(4, None), 200, 1e-12);
    assert!(r.all_passed(), "{}", r.max_deviation());
    let u = ansatz_field(&f, f.m).unwrap();
    assert!(symmetry_report(&u, &torus_symmetry_ops(4, Some(2)), 200, 1e-12).all_passed());
}

#[test]
fn sheets_are_rotations_of_the_first() {
    let f = AnsatzFamily::torus(2, 3, 0.1, -0.05, 1.0).unwrap();
    for x in fd_points(50, 9) {
        for r in 2..=3 {
            let t = SymmetryOp::sheet_map(r, 3);
            let y = x.transform(t.matrix().unwrap());
            assert_relative_eq!(f.sheet_value(r, &x), f.sheet_value(1, &y), max_relative = 1e-12);
        }
    }
}

#[test]
fn residual_strong_matches_component_pieces() {
    let f = AnsatzFamily::torus(2, 2, 0.1, -0.05, 0.7).unwrap();
    for x in fd_points(30, 5) {
        let e1 = ResidualComponent::E1.eval(&f, &x);
        let e2 = ResidualComponent::E2.eval(&f, &x);
        let sum = ResidualComponent::E2Cross.eval(&f, &x)
            + ResidualComponent::E2Beta.eval(&f, &x)
            + ResidualComponent::E2Alpha.eval(&f, &x);
        assert_relative_eq!(e2, sum, epsilon = 1e-12 * e2.abs().max(1.0));
        assert_relative_eq!(residual_strong(&f, f.m, &x).unwrap(), e1, max_relative = 1e-12);
        assert_relative_eq!(residual_strong(&f, 1, &x).unwrap(), e2, epsilon = 1e-10 * e2.abs().max(1.0));
    }
}

#[test]
fn nonlinear_terms_vanish_at_zero_corrections() {
    let f = AnsatzFamily::ring(2, 0.1, -0.05).unwrap();
    let z = zero_field();
    for x in fd_points(20, 6) {
        let n = nonlinear_terms_eval(&f, &z, &z, &x);
        assert_eq!((n.n1, n.n2), (0.0, 0.0));
    }
}

#[test]
fn reduction_identity_holds_for_torus_sheet() {
    for q in [2, 3] {
        let f = AnsatzFamily::torus(2, q, 0.1, -0.05, 1.0).unwrap();
        assert!(identity_defect(&ansatz_field(&f, 1).unwrap(), q, 100).unwrap() <= 1e-12);
    }
    assert!(identity_defect(&uneven_field(), 3, 100).unwrap() > 1e-3);
}

#[test]
fn expansion_produces_m_components() {
    let f = AnsatzFamily::torus(2, 3, 0.1, -0.05, 1.0).unwrap();
    let u = ansatz_field(&f, f.m).unwrap();
    let v = ansatz_field(&f, 1).unwrap();
    let comps = two_to_m_expand(u, v, 3).unwrap();
    assert_eq!(comps.len(), 4);
    let x = Point4::new(0.2, -0.1, 0.5, 0.3);
    for r in 1..=3 {
        assert_relative_eq!(comps[r - 1].eval(&x), f.sheet_value(r, &x), max_relative = 1e-12);
    }
    assert!(reduction_identity_check(&comps[0], 3, 4, &x).is_err());
}

proptest! {
    #[test]
    fn bubble_is_positive_and_bounded(d in 1e-3..2.0f64, x in arb_point()) {
        let b = BubbleField::new(d, Point4::ORIGIN);
        let v = bubble_eval(&b, &x);
        prop_assert!(v > 0.0 && v <= b.peak_value() * (1.0 + 1e-15));
    }

    #[test]
    fn bubble_gradient_matches_fd(x in arb_point()) {
        let b = BubbleField::new(0.6, Point4::new(0.1, 0.2, 0.0, -0.3));
        let g = bubble_grad(&b, &x);
        let h = 1e-6;
        for i in 0..4 {
            let e = Point4::axis(i) * h;
            let fd = (bubble_eval(&b, &(x + e)) - bubble_eval(&b, &(x - e))) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()));
        }
    }

    #[test]
    fn bubble_is_kelvin_invariant(x in arb_point()) {
        prop_assume!(x.norm() > 1e-2);
        let r2 = x.norm_sq();
        let k = standard_bubble(&(x * (1.0 / r2))) / r2;
        prop_assert!((k - standard_bubble(&x)).abs() <= 1e-13 * standard_bubble(&x));
    }

    #[test]
    fn cube_excess_matches_direct(a in proptest::collection::vec(0.0..10.0f64, 1..6)) {
        let s: f64 = a.iter().sum();
        let direct = s.powi(3) - a.iter().map(|v| v.powi(3)).sum::<f64>();
        prop_assert!((cube_excess(&a) - direct).abs() <= 1e-11 * s.powi(3).max(1.0));
    }

    #[test]
    fn e1_is_linear_in_beta(beta in -2.0..-1e-3f64, x in arb_point()) {
        let f = AnsatzFamily::ring(2, 0.1, beta).unwrap();
        let g = f.with_beta(2.0 * beta);
        let a = ResidualComponent::E1.eval(&f, &x);
        let b = ResidualComponent::E1.eval(&g, &x);
        prop_assert!((b - 2.0 * a).abs() <= 1e-12 * b.abs().max(1e-300));
    }
}
