use approx::assert_relative_eq;
use critsys::bubbles::AnsatzFamily;
use critsys::field::{PeakLayout, SymmetryTag};
use critsys::geometry::{Configuration, Point4};
use critsys::quadrature::QuadratureSpec;
use critsys::solver::*;
use proptest::prelude::*;

fn spec() -> QuadratureSpec {
    QuadratureSpec::with_tolerances(1e-6, 1e-12)
}

fn small_basis(family: &AnsatzFamily) -> GalerkinBasis {
    build_basis(family, 2, 2, &spec()).unwrap()
}

#[test]
fn basis_grams_are_symmetric_positive_definite() {
    let f = AnsatzFamily::ring(2, 0.05, -0.05).unwrap();
    let b = small_basis(&f);
    assert_eq!(b.phi.len(), 4);
    assert_eq!(b.psi_gram.nrows(), b.psi.len() + 1);
    for g in [&b.phi_gram, &b.psi_gram] {
        assert!((g - g.transpose()).abs().max() == 0.0);
        assert!(g.clone().cholesky().is_some());
    }
    assert!(b.phi_condition <= MAX_GRAM_CONDITION);
}

#[test]
fn projector_removes_dilation_direction() {
    let f = AnsatzFamily::ring(2, 0.05, -0.05).unwrap();
    let b = small_basis(&f);
    let p = projector(&b.psi_gram);
    let n = b.psi_gram.nrows();
    let gp = &b.psi_gram * &p;
    for j in 0..n - 1 {
        assert!(gp[(n - 1, j)].abs() <= 1e-12 * b.psi_gram[(n - 1, n - 1)].abs());
    }
}

#[test]
fn linearized_spectrum_is_sorted_and_projected_is_coercive() {
    let f = AnsatzFamily::ring(2, 0.05, -0.05).unwrap();
    let b = small_basis(&f);
    let op = assemble_linearized(&f, &b, &spec()).unwrap();
    let r = spectrum_report(&op, &b).unwrap();
    assert!(r.phi_eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(r.psi_projected_eigenvalues.len(), b.psi.len());
    assert!(r.min_singular_projected >= r.min_singular_unprojected);
    assert!(r.min_singular_projected >= 0.1);
}

#[test]
fn exact_kernel_is_detected() {
    assert!(exact_kernel_singular_value(&spec()).unwrap() <= 1e-6);
}

#[test]
fn uncoupled_single_bubble_has_zero_correction() {
    let c = Configuration::degenerate_single(0.05).unwrap();
    let f = AnsatzFamily::decoupled(c, 0.0).unwrap();
    let b = small_basis(&f);
    let s = projected_fixed_point(&f, &b, 10, 1e-10, &spec()).unwrap();
    assert!(s.converged);
    assert_eq!(s.correction_norm(), 0.0);
}

#[test]
fn fixed_point_contracts() {
    let f = AnsatzFamily::ring(2, 0.05, -0.05).unwrap();
    let b = small_basis(&f);
    let s = projected_fixed_point(&f, &b, 30, 1e-9, &spec()).unwrap();
    assert!(s.converged);
    assert!(s.contraction.iter().all(|&r| r < CONTRACTION_LIMIT));
    assert_eq!(s.history.len(), s.iterations);
    assert!(s.z_pairing.abs() <= 1e-8);
    assert!(s.correction_norm() > 0.0);
}

#[test]
fn fixed_point_input_validation() {
    let f = AnsatzFamily::ring(2, 0.05, -0.05).unwrap();
    let b = small_basis(&f);
    let op = assemble_linearized(&f, &b, &spec()).unwrap();
    assert!(projected_fixed_point_with(&f, &b, &op, 0, 1e-9, &spec()).is_err());
    assert!(projected_fixed_point_with(&f, &b, &op, 5, 0.0, &spec()).is_err());
}

#[test]
fn gauss_newton_recovers_the_bubble() {
    let elems = vec![
        BasisElement::new("U", vec![(1.0, Term::Radial { a: 0.0, s: 1.0 })], SymmetryTag::None, PeakLayout::none()),
        BasisElement::new(
            "U_1/2",
            vec![(1.0, Term::Bubbles { width: 0.5, centers: vec![Point4::ORIGIN] })],
            SymmetryTag::None,
            PeakLayout::none(),
        ),
    ];
    let p = ScalarBubbleProblem { elements: elems };
    let r = gauss_newton(&p, &[0.9, 0.05], 30, &spec()).unwrap();
    assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.history.last().unwrap() < &(1e-3 * r.history[0]));
    assert_relative_eq!(r.coefficients[0], 1.0, epsilon = 1e-3);
    assert!(r.coefficients[1].abs() < 1e-3);
    assert!(gauss_newton(&p, &[1.0], 3, &spec()).is_err());
}

#[test]
fn envelope_exponents_skip_two() {
    assert_eq!(envelope_exponents(4), vec![1.0, 1.5, 2.5, 3.0]);
    let w = basis_widths(0.05, 3);
    assert_relative_eq!(w[1], 0.05);
    assert_relative_eq!(w[2] / w[0], 4.0);
}

#[test]
fn degenerate_basis_counts_rejected() {
    let f = AnsatzFamily::ring(2, 0.05, -0.05).unwrap();
    assert_eq!(build_basis(&f, 0, 2, &spec()).unwrap_err().exit_code(), 2);
}

proptest! {
    #[test]
    fn kelvin_image_of_terms_is_an_involution(a in 0.0..2.0f64, s in 1.0..4.0f64, w in 0.05..2.0f64, x1 in 0.1..2.0f64) {
        let x = Point4::new(x1, 0.3, -0.2, 0.1);
        let r2 = x.norm_sq();
        let y = x * (1.0 / r2);
        for t in [Term::Radial { a, s }, Term::Bubbles { width: w, centers: vec![Point4::new(0.4, 0.0, 0.0, 0.0)] }] {
            // (Kf)(x) = |x|⁻² f(x/|x|²)
            let direct = t.eval(&y) / r2;
            let image = t.kelvin().eval(&x);
            prop_assert!((direct - image).abs() <= 1e-10 * direct.abs().max(1e-12));
        }
    }

    #[test]
    fn projector_shape(n in 2usize..8) {
        let g = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| if i == j { 2.0 } else { 0.3 });
        let p = projector(&g);
        prop_assert_eq!((p.nrows(), p.ncols()), (n, n - 1));
        let gp = &g * &p;
        for j in 0..n - 1 {
            prop_assert!(gp[(n - 1, j)].abs() <= 1e-14);
        }
    }
}
