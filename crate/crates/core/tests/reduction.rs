use std::f64::consts::PI;

use approx::assert_relative_eq;
use critsys::bubbles::{AnsatzFamily, ResidualComponent};
use critsys::quadrature::QuadratureSpec;
use critsys::reduction::*;
use proptest::prelude::*;

fn spec() -> QuadratureSpec {
    QuadratureSpec::with_tolerances(1e-6, 1e-12)
}

// Independent reference values for k = 2, β = −0.05, from a separate
// one-dimensional reduction of the same integrals (frozen to 4 digits).
const I1_OVER_D2: [(f64, f64); 2] = [(0.1, -63.36), (0.01, -55.98)];
const I2_OVER_BD2LN: [(f64, f64); 2] = [(0.1, 195.5), (0.01, 208.5)];

#[test]
fn reduction_integrals_match_reference() {
    for i in 0..2 {
        let d = I1_OVER_D2[i].0;
        let f = AnsatzFamily::ring(2, d, -0.05).unwrap();
        let s = reduction_integrals(&f, &spec()).unwrap();
        assert_relative_eq!(s.i1 / (d * d), I1_OVER_D2[i].1, max_relative = 1e-3);
        assert_relative_eq!(s.i2 / (-0.05 * d * d * d.ln()), I2_OVER_BD2LN[i].1, max_relative = 1e-3);
        assert_eq!(s.i_alpha, 0.0);
        assert!(s.i1 < 0.0 && s.i2 > 0.0);
        assert_relative_eq!(s.z_energy, 2.0 * A1, max_relative = 2e-2);
    }
}

#[test]
fn model_coefficients() {
    assert_relative_eq!(predicted_ratio(2), 4.0 * PI * PI / 6.0);
    for k in 2..6 {
        assert_relative_eq!(predicted_c1(k) / predicted_c2(k), predicted_ratio(k), max_relative = 1e-12);
        assert_relative_eq!(finite_k_c1(k), (k * (k * k - 1)) as f64 / 12.0 * INT_U3, max_relative = 1e-12);
    }
}

#[test]
fn delta_star_matches_closed_form() {
    for k in [2, 3, 4] {
        for beta in [-1.0, -0.5, -0.1] {
            let d = solve_log_delta_star(beta, predicted_ratio(k)).unwrap();
            let exact = PI * PI * (k * k) as f64 / (6.0 * beta.abs());
            assert!(((d - exact) / exact).abs() <= 1e-10);
        }
    }
    let d = solve_delta_star(-0.5, 2).unwrap();
    assert_relative_eq!(d, 1.93e-6, max_relative = 1e-2);
    assert_eq!(solve_log_delta_star(0.1, 1.0).unwrap_err().kind(), "domain");
    assert!(solve_log_delta_star(-0.1, -1.0).is_err());
}

#[test]
fn log_grid_has_exact_endpoints() {
    let g = log_grid(1e-3, 1e-1, 7);
    assert_eq!(g.len(), 7);
    assert_eq!(g[0], 1e-3);
    assert_eq!(g[6], 1e-1);
    assert_relative_eq!(g[1] / g[0], g[5] / g[4], max_relative = 1e-12);
    assert_eq!(log_grid(0.1, 0.2, 1), vec![0.1]);
}

#[test]
fn fit_rejects_short_or_narrow_grids() {
    let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.02].iter().map(|&d| (d, -d * d)).collect();
    assert_eq!(fit_coefficients(&pts, -0.05).unwrap_err().kind(), "singular_design");
    let narrow: Vec<(f64, f64)> = log_grid(0.05, 0.1, 6).into_iter().map(|d| (d, -d * d)).collect();
    assert!(fit_coefficients(&narrow, -0.05).is_err());
}

#[test]
fn two_term_norm_fit_exact_model() {
    let pts: Vec<(f64, f64)> = log_grid(1e-4, 1e-1, 7)
        .into_iter()
        .map(|d| (d, 3.0 * d * d + 7.0 * 0.05 * d))
        .collect();
    let f = two_term_norm_fit(&pts, 0.05).unwrap();
    assert_relative_eq!(f.c_a, 3.0, max_relative = 1e-9);
    assert_relative_eq!(f.c_b, 7.0, max_relative = 1e-9);
    assert!(f.r_squared > 1.0 - 1e-12);
}

#[test]
fn log_log_slope_of_power_law() {
    let pts: Vec<(f64, f64)> = log_grid(1e-3, 1.0, 5).into_iter().map(|d| (d, 4.0 * d.powf(1.5))).collect();
    assert_relative_eq!(log_log_slope(&pts).unwrap(), 1.5, max_relative = 1e-12);
    assert!(log_log_slope(&[(1.0, 1.0)]).is_err());
}

#[test]
fn least_squares_detects_rank_deficiency() {
    let a = nalgebra::DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
    let y = nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]);
    assert!(linear_least_squares(&a, &y).is_err());
}

#[test]
fn e1_norm_doubles_with_beta() {
    let f = AnsatzFamily::ring(2, 0.05, -0.05).unwrap();
    let a = piece_norm(&f, ResidualComponent::E1, &spec()).unwrap();
    let b = piece_norm(&f.with_beta(-0.1), ResidualComponent::E1, &spec()).unwrap();
    assert!((b / a - 2.0).abs() <= 1e-10);
}

#[test]
fn residual_norms_are_consistent() {
    let f = AnsatzFamily::ring(2, 0.05, -0.05).unwrap();
    let s = residual_norms(&f, &spec()).unwrap();
    assert!(s.norm_e2 <= s.norm_e2_cross + s.norm_e2_beta + 1e-9);
    assert_eq!(s.norm_e2_alpha, 0.0);
    assert!(s.interior_share > 0.0 && s.interior_share <= 1.0);
}

#[test]
fn family_at_keeps_couplings() {
    let f = AnsatzFamily::torus(2, 2, 0.1, -0.2, 0.5).unwrap();
    let g = family_at(&f, 0.01).unwrap();
    assert_eq!((g.beta, g.alpha, g.m), (f.beta, f.alpha, f.m));
    assert_eq!(g.delta(), 0.01);
    assert!(family_at(&f, 2.0).is_err());
}

proptest! {
    #[test]
    fn fit_recovers_synthetic_model(c1 in 1.0..500.0f64, c2 in 1.0..500.0f64, beta in -1.0..-0.01f64) {
        let pts: Vec<(f64, f64)> = log_grid(1e-3, 1e-1, 7)
            .into_iter()
            .map(|d| (d, -c1 * d * d + c2 * beta * d * d * d.ln()))
            .collect();
        let f = fit_coefficients(&pts, beta).unwrap();
        prop_assert!(((f.c1 - c1) / c1).abs() <= 1e-8);
        prop_assert!(((f.c2 - c2) / c2).abs() <= 1e-8);
        prop_assert!(f.r_squared > 1.0 - 1e-10);
    }

    #[test]
    fn bisection_root_is_ratio_over_beta(beta in -5.0..-1e-3f64, ratio in 1e-2..1e3f64) {
        let d = solve_log_delta_star(beta, ratio).unwrap();
        let exact = ratio / beta.abs();
        prop_assert!(((d - exact) / exact).abs() <= 1e-12);
    }

    #[test]
    fn log_grid_is_monotone(lo in 1e-6..1e-2f64, span in 1.0..4.0f64, n in 2usize..20) {
        let hi = lo * 10f64.powf(span);
        let g = log_grid(lo, hi, n);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(g[0] == lo && g[n - 1] == hi);
    }
}
