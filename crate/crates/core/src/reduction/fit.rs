use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::ReductionSample;
use crate::error::{Error, Result};

/// Least squares min ‖Ax − y‖ by SVD; rank deficiency is an error.
pub fn linear_least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() < a.ncols() {
        return Err(Error::SingularDesign(format!(
            "{} samples for {} unknowns",
            a.nrows(),
            a.ncols()
        )));
    }
    // column scaling keeps the rank test meaningful
    let scales: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).norm()).collect();
    if scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::SingularDesign("zero or non-finite design column".into()));
    }
    let mut b = a.clone();
    for (j, s) in scales.iter().enumerate() {
        b.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = b.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::SingularDesign(format!(
            "design condition {:.3e}",
            smax / smin
        )));
    }
    let x = svd
        .solve(y, 0.0)
        .map_err(|e| Error::SingularDesign(e.to_string()))?;
    Ok(DVector::from_iterator(
        x.len(),
        x.iter().zip(&scales).map(|(v, s)| v / s),
    ))
}

fn r_squared(y: &[f64], yhat: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    let mean = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ss_res: f64 = y.iter().zip(yhat).zip(w).map(|((a, b), c)| c * (a - b) * (a - b)).sum();
    let ss_tot: f64 = y.iter().zip(w).map(|(a, c)| c * (a - mean) * (a - mean)).sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn check_grid(deltas: &[f64]) -> Result<()> {
    if deltas.len() < 4 {
        return Err(Error::SingularDesign(format!("{} grid points, need at least 4", deltas.len())));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::Domain("grid widths must lie in (0,1)".into()));
    }
    let lo = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = deltas.iter().cloned().fold(0.0, f64::max);
    if hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(Error::SingularDesign(format!("grid spans {:.3} decades", (hi / lo).log10())));
    }
    Ok(())
}

/// Fit of numerator samples to −𝔠₁δ² + 𝔠₂βδ²lnδ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientFit {
    pub c1: f64,
    pub c2: f64,
    pub r_squared: f64,
}

/// Fits (δ, numerator) samples in the scaled coordinates numerator/δ² =
/// −𝔠₁ + 𝔠₂β lnδ, which weights every decade of the grid equally.
pub fn fit_coefficients(samples: &[(f64, f64)], beta: f64) -> Result<CoefficientFit> {
    let deltas: Vec<f64> = samples.iter().map(|s| s.0).collect();
    check_grid(&deltas)?;
    let n = samples.len();
    let a = DMatrix::from_fn(n, 2, |i, j| {
        let d = samples[i].0;
        if j == 0 {
            -1.0
        } else {
            beta * d.ln()
        }
    });
    let y: Vec<f64> = samples.iter().map(|(d, v)| v / (d * d)).collect();
    let x = linear_least_squares(&a, &DVector::from_vec(y.clone()))?;
    let yhat: Vec<f64> = (0..n).map(|i| (a.row(i) * &x)[0]).collect();
    Ok(CoefficientFit {
        c1: x[0],
        c2: x[1],
        r_squared: r_squared(&y, &yhat, &vec![1.0; n]),
    })
}

/// Separate fits of the two integrals with their subleading terms:
/// I₁/δ² = −𝔠₁ + e₁δ² and I₂/(βδ²) = 𝔠₂lnδ + e₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparatedFit {
    pub c1: f64,
    pub e1: f64,
    pub r_squared_i1: f64,
    pub c2: f64,
    pub e2: f64,
    pub r_squared_i2: f64,
}

pub fn fit_separated(samples: &[ReductionSample], beta: f64) -> Result<SeparatedFit> {
    let deltas: Vec<f64> = samples.iter().map(|s| s.delta).collect();
    check_grid(&deltas)?;
    let n = samples.len();
    let a1 = DMatrix::from_fn(n, 2, |i, j| if j == 0 { -1.0 } else { deltas[i] * deltas[i] });
    let y1: Vec<f64> = samples.iter().map(|s| s.i1 / (s.delta * s.delta)).collect();
    let x1 = linear_least_squares(&a1, &DVector::from_vec(y1.clone()))?;
    let h1: Vec<f64> = (0..n).map(|i| (a1.row(i) * &x1)[0]).collect();

    let (c2, e2, r2) = if beta != 0.0 {
        let a2 = DMatrix::from_fn(n, 2, |i, j| if j == 0 { deltas[i].ln() } else { 1.0 });
        let y2: Vec<f64> = samples.iter().map(|s| s.i2 / (beta * s.delta * s.delta)).collect();
        let x2 = linear_least_squares(&a2, &DVector::from_vec(y2.clone()))?;
        let h2: Vec<f64> = (0..n).map(|i| (a2.row(i) * &x2)[0]).collect();
        (x2[0], x2[1], r_squared(&y2, &h2, &vec![1.0; n]))
    } else {
        (0.0, 0.0, 1.0)
    };
    Ok(SeparatedFit {
        c1: x1[0],
        e1: x1[1],
        r_squared_i1: r_squared(&y1, &h1, &vec![1.0; n]),
        c2,
        e2,
        r_squared_i2: r2,
    })
}

/// ‖𝓔̄₂‖ ≈ c_a δ² + c_b|β|δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoTermFit {
    pub c_a: f64,
    pub c_b: f64,
    /// Relative (1/y²-weighted) coefficient of determination.
    pub r_squared: f64,
    pub r_squared_unweighted: f64,
}

/// Weighted least squares with weights 1/yᵢ², so every sample counts by its
/// relative misfit.
pub fn two_term_norm_fit(samples: &[(f64, f64)], beta_abs: f64) -> Result<TwoTermFit> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::SingularDesign(format!("{n} samples, need at least 3")));
    }
    if samples.iter().any(|s| !(s.1 > 0.0)) {
        return Err(Error::SingularDesign("non-positive norm sample".into()));
    }
    let a = DMatrix::from_fn(n, 2, |i, j| {
        let (d, y) = samples[i];
        if j == 0 {
            d * d / y
        } else {
            beta_abs * d / y
        }
    });
    let x = linear_least_squares(&a, &DVector::from_element(n, 1.0))?;
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let yhat: Vec<f64> = samples
        .iter()
        .map(|&(d, _)| x[0] * d * d + x[1] * beta_abs * d)
        .collect();
    let w: Vec<f64> = y.iter().map(|v| 1.0 / (v * v)).collect();
    Ok(TwoTermFit {
        c_a: x[0],
        c_b: x[1],
        r_squared: r_squared(&y, &yhat, &w),
        r_squared_unweighted: r_squared(&y, &yhat, &vec![1.0; n]),
    })
}

/// Least-squares slope of log y against log x.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::SingularDesign("log-log fit needs two positive samples".into()));
    }
    let n = points.len();
    let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { points[i].0.ln() } else { 1.0 });
    let y = DVector::from_iterator(n, points.iter().map(|p| p.1.ln()));
    Ok(linear_least_squares(&a, &y)?[0])
}
