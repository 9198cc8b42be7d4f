//! Weighted least-squares fits used throughout the pipeline.
//!
//! Linear models are solved through a QR factorisation of the weighted design
//! matrix. The single non-linear model (a Gaussian peak) uses
//! Levenberg–Marquardt on normalised abscissae.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Outcome of a weighted least-squares fit.
///
/// `covariance` is computed from the supplied weights as absolute inverse
/// variances; use [`FitResult::scaled_covariance`] when the weights are only
/// relative.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub chi_square: f64,
    pub points: usize,
}

impl FitResult {
    pub fn degrees_of_freedom(&self) -> usize {
        self.points.saturating_sub(self.coefficients.len())
    }

    pub fn reduced_chi_square(&self) -> f64 {
        match self.degrees_of_freedom() {
            0 => f64::NAN,
            dof => self.chi_square / dof as f64,
        }
    }

    pub fn std_error(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }

    /// Covariance multiplied by the reduced chi-square.
    pub fn scaled_covariance(&self) -> DMatrix<f64> {
        let s = self.reduced_chi_square();
        if s.is_finite() {
            &self.covariance * s
        } else {
            self.covariance.clone()
        }
    }

    pub fn scaled_std_error(&self, i: usize) -> f64 {
        self.scaled_covariance()[(i, i)].max(0.0).sqrt()
    }
}

/// Fits `y ≈ Σ_j c_j · basis_j(x)` given each column of the design matrix
/// and the per-point variance of `y`.
pub fn weighted_linear_fit(columns: &[Vec<f64>], y: &[f64], variance: &[f64]) -> Result<FitResult> {
    let n = y.len();
    let p = columns.len();
    if p == 0 || columns.iter().any(|c| c.len() != n) || variance.len() != n {
        return Err(Error::Fit("design matrix and data lengths disagree".into()));
    }
    if n < p {
        return Err(Error::Fit(format!("{n} points cannot determine {p} coefficients")));
    }
    if let Some(v) = variance.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit(format!("variances must be positive and finite, got {v}")));
    }
    let sqrt_w: Vec<f64> = variance.iter().map(|v| v.sqrt().recip()).collect();
    let a = DMatrix::from_fn(n, p, |i, j| columns[j][i] * sqrt_w[i]);
    let b = DVector::from_fn(n, |i, _| y[i] * sqrt_w[i]);

    let qr = a.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || (0..p).any(|i| r[(i, i)].abs() <= 1e-12 * scale) {
        return Err(Error::Fit("design matrix is rank deficient".into()));
    }
    let qtb = qr.q().transpose() * &b;
    let coeffs = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Fit("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Fit("triangular inverse failed".into()))?;
    let covariance = &r_inv * r_inv.transpose();
    let residual = &a * &coeffs - &b;
    Ok(FitResult {
        coefficients: coeffs.iter().copied().collect(),
        covariance,
        chi_square: residual.norm_squared(),
        points: n,
    })
}

/// `y ≈ slope · x`.
pub fn fit_through_origin(x: &[f64], y: &[f64], variance: &[f64]) -> Result<FitResult> {
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::Fit("abscissa is identically zero".into()));
    }
    weighted_linear_fit(&[x.to_vec()], y, variance)
}

/// Fitted Gaussian peak `A exp(-(x - μ)²/w²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPeak {
    pub amplitude: f64,
    pub center: f64,
    /// 1/e half-width `w`.
    pub width: f64,
    /// Coefficients ordered `[amplitude, center, width]`.
    pub fit: FitResult,
    pub iterations: usize,
}

const LM_MAX_ITER: usize = 500;

/// Weighted Levenberg–Marquardt fit of a Gaussian peak. `weight` holds
/// inverse variances (absolute or relative).
pub fn fit_gaussian_peak(x: &[f64], y: &[f64], weight: &[f64]) -> Result<GaussianPeak> {
    let n = x.len();
    if y.len() != n || weight.len() != n {
        return Err(Error::Fit("data lengths disagree".into()));
    }
    if n < 4 {
        return Err(Error::Fit(format!("a Gaussian peak needs at least 4 points, got {n}")));
    }
    if weight.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Fit("weights must be positive and finite".into()));
    }
    let (ymin, ymax) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(ymax > 0.0) || (ymax - ymin) <= 1e-9 * ymax.abs() {
        return Err(Error::Fit("data show no peak".into()));
    }

    // Work on x normalised to the data span for conditioning.
    let (xmin, xmax) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let span = xmax - xmin;
    if !(span > 0.0) {
        return Err(Error::Fit("abscissa has zero span".into()));
    }
    let mid = 0.5 * (xmin + xmax);
    let u: Vec<f64> = x.iter().map(|v| (v - mid) / span).collect();

    let mut params = initial_guess(&u, y, ymax);
    let model = |p: &Vector3<f64>, ui: f64| {
        let d = (ui - p[1]) / p[2];
        p[0] * (-d * d).exp()
    };
    let cost = |p: &Vector3<f64>| -> f64 {
        u.iter()
            .zip(y)
            .zip(weight)
            .map(|((ui, yi), wi)| wi * (yi - model(p, *ui)).powi(2))
            .sum()
    };
    let normal = |p: &Vector3<f64>| -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((ui, yi), wi) in u.iter().zip(y).zip(weight) {
            let d = (ui - p[1]) / p[2];
            let e = (-d * d).exp();
            let j = Vector3::new(e, p[0] * e * 2.0 * d / p[2], p[0] * e * 2.0 * d * d / p[2]);
            let r = yi - p[0] * e;
            jtj += j * j.transpose() * *wi;
            jtr += j * (r * wi);
        }
        (jtj, jtr)
    };

    let mut lambda = 1e-3;
    let mut current = cost(&params);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < LM_MAX_ITER {
        iterations += 1;
        let (jtj, jtr) = normal(&params);
        let mut damped = jtj;
        for i in 0..3 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial = params + step;
        if !(trial[2] > 0.0) {
            lambda *= 10.0;
            if lambda > 1e20 {
                break;
            }
            continue;
        }
        let trial_cost = cost(&trial);
        if trial_cost <= current {
            let small_step = (0..3).all(|i| step[i].abs() <= 1e-14 * params[i].abs().max(1e-12));
            let small_gain = current - trial_cost <= 1e-30 + 1e-15 * current;
            params = trial;
            current = trial_cost;
            lambda = (lambda * 0.1).max(1e-15);
            if small_step || (small_gain && current <= 1e-28 * ymax * ymax) || current == 0.0 {
                converged = true;
                break;
            }
            if small_gain && iterations > 20 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e20 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::Fit(format!("Gaussian fit did not converge in {LM_MAX_ITER} iterations")));
    }

    let (jtj, _) = normal(&params);
    let cov_u = jtj
        .try_inverse()
        .ok_or_else(|| Error::Fit("Gaussian fit has a singular information matrix".into()))?;
    // Back to original abscissa units: center and width scale with `span`.
    let scale = Vector3::new(1.0, span, span);
    let covariance = DMatrix::from_fn(3, 3, |i, j| cov_u[(i, j)] * scale[i] * scale[j]);
    let center = mid + params[1] * span;
    let width = params[2].abs() * span;
    if !width.is_finite() || width > 1e3 * span {
        return Err(Error::Fit("fitted peak is unbounded; data show no peak".into()));
    }
    Ok(GaussianPeak {
        amplitude: params[0],
        center,
        width,
        fit: FitResult {
            coefficients: vec![params[0], center, width],
            covariance,
            chi_square: current,
            points: n,
        },
        iterations,
    })
}

fn initial_guess(u: &[f64], y: &[f64], ymax: f64) -> Vector3<f64> {
    let positive: Vec<(f64, f64)> = u.iter().zip(y).map(|(a, b)| (*a, b.max(0.0))).collect();
    let total: f64 = positive.iter().map(|p| p.1).sum();
    let mean = positive.iter().map(|p| p.0 * p.1).sum::<f64>() / total;
    let var = positive.iter().map(|p| (p.0 - mean).powi(2) * p.1).sum::<f64>() / total;
    let width = (2.0 * var).sqrt().clamp(1e-3, 10.0);
    Vector3::new(ymax, mean, width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn through_origin_exact() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.123 * v).collect();
        let fit = fit_through_origin(&x, &y, &[1.0; 4]).unwrap();
        assert!((fit.coefficients[0] - 0.123).abs() < 1e-15);
        assert!(fit.chi_square < 1e-28);
        assert!(fit_through_origin(&[0.0; 3], &[1.0; 3], &[1.0; 3]).is_err());
    }

    #[test]
    fn weighted_slope_uncertainty_matches_formula() {
        let x = [1.0, 2.0, 3.0];
        let var = [0.5, 1.0, 2.0];
        let fit = fit_through_origin(&x, &[1.0, 2.1, 2.9], &var).unwrap();
        let sxx: f64 = x.iter().zip(&var).map(|(a, v)| a * a / v).sum();
        assert!((fit.covariance[(0, 0)] - 1.0 / sxx).abs() < 1e-14);
    }

    #[test]
    fn two_term_rank_deficiency() {
        let p = [1.0, 1.0, 1.0, 1.0];
        let p2: Vec<f64> = p.iter().map(|v| v * v).collect();
        let err = weighted_linear_fit(&[p.to_vec(), p2], &[1.0; 4], &[1.0; 4]);
        assert!(matches!(err, Err(Error::Fit(_))));
    }

    #[test]
    fn gaussian_peak_recovered_exactly() {
        let x: Vec<f64> = (0..11).map(|i| 1.0e12 + (i as f64 - 5.0) * 2.0e11).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 3.5 * (-((v - 1.03e12) / 4.1e11).powi(2)).exp())
            .collect();
        let w: Vec<f64> = y.iter().map(|v| 1.0 / v.max(1e-3)).collect();
        let peak = fit_gaussian_peak(&x, &y, &w).unwrap();
        assert!((peak.width / 4.1e11 - 1.0).abs() < 1e-9);
        assert!((peak.center / 1.03e12 - 1.0).abs() < 1e-9);
        assert!((peak.amplitude / 3.5 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_data_have_no_peak() {
        let x: Vec<f64> = (0..7).map(|i| i as f64).collect();
        assert!(fit_gaussian_peak(&x, &[2.0; 7], &[1.0; 7]).is_err());
        assert!(fit_gaussian_peak(&x, &[0.0; 7], &[1.0; 7]).is_err());
    }
}
