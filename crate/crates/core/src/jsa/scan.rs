//! Recovering the heralded spectrum width from a scan of the signal filter
//! center.
//!
//! Scanning a Gaussian filter of half-width `σ_s` across a Gaussian heralded
//! spectrum of half-width `σ₀` traces out a Gaussian of half-width
//! `σ₀' = sqrt(σ₀² + σ_s²)`, so `σ₀` follows from the fitted `σ₀'`.

use super::conditional::{collection_efficiency, ConditionalSpectrum};
use crate::error::{domain, Error, Result};
use crate::fit::{fit_gaussian_peak, GaussianPeak};
use crate::spectral::{detuning_from_wavelength, FilterSpec};

/// One position of the scanned signal filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRecord {
    pub lambda_s0_prime_nm: f64,
    /// True coincidence rate divided by the channel transmission at this point.
    pub true_coincidence_normalized: f64,
    pub eta_ts_at_point: f64,
}

impl ScanRecord {
    /// Background subtraction can leave small negative rates; they are kept.
    pub fn is_negative(&self) -> bool {
        self.true_coincidence_normalized < 0.0
    }
}

#[derive(Debug, Clone)]
pub struct ScanDeduction {
    /// Fitted scan width `σ₀'`, rad/s.
    pub sigma0_prime: f64,
    pub sigma0_prime_std: f64,
    /// Heralded spectrum width `σ₀`, rad/s.
    pub sigma0: f64,
    pub sigma0_std: f64,
    /// Collection efficiency of the scanned filter for the recovered spectrum.
    pub xi_s: f64,
    pub xi_s_std: f64,
    /// Fitted peak position, nm.
    pub center_nm: f64,
    pub peak: GaussianPeak,
    pub negative_points: usize,
}

/// Fits the scan and returns `σ₀ = sqrt(σ₀'² - σ_s²)` together with the
/// collection efficiency of `signal_filter` for a Gaussian heralded spectrum of
/// that width.
///
/// Points are weighted by `η_ts / rate`, the inverse Poisson variance of a
/// transmission-normalised count rate up to a common factor.
pub fn deduce_sigma0_from_scan(scan: &[ScanRecord], signal_filter: &FilterSpec) -> Result<ScanDeduction> {
    if scan.len() < 5 {
        return domain(format!("a scan needs at least 5 points, got {}", scan.len()));
    }
    if let Some(r) = scan.iter().find(|r| !(r.eta_ts_at_point > 0.0 && r.eta_ts_at_point <= 1.0)) {
        return domain(format!("eta_ts must lie in (0, 1], got {}", r.eta_ts_at_point));
    }
    let reference = signal_filter.center_wavelength_nm();
    let x = scan
        .iter()
        .map(|r| detuning_from_wavelength(r.lambda_s0_prime_nm, reference))
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = scan.iter().map(|r| r.true_coincidence_normalized).collect();
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = 1e-3 * ymax.abs().max(f64::MIN_POSITIVE);
    let w: Vec<f64> = scan
        .iter()
        .map(|r| r.eta_ts_at_point / r.true_coincidence_normalized.max(floor))
        .collect();

    let peak = fit_gaussian_peak(&x, &y, &w)?;
    let (xmin, xmax) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if peak.center < xmin || peak.center > xmax {
        return Err(Error::Fit("scan does not bracket the fitted peak".into()));
    }

    let sigma_s = signal_filter.width();
    let sigma0_prime = peak.width;
    if sigma0_prime <= sigma_s {
        return Err(Error::Domain(format!(
            "degenerate scan: fitted width {sigma0_prime:.4e} rad/s does not exceed the filter width {sigma_s:.4e} rad/s"
        )));
    }
    let sigma0 = (sigma0_prime * sigma0_prime - sigma_s * sigma_s).sqrt();
    let sigma0_prime_std = peak.fit.scaled_std_error(2);
    let sigma0_std = sigma0_prime / sigma0 * sigma0_prime_std;

    let xi_at = |s: f64| -> Result<f64> { collection_efficiency(signal_filter, &ConditionalSpectrum::gaussian(s)?) };
    let xi_s = xi_at(sigma0)?;
    let h = 1e-4 * sigma0;
    let slope = (xi_at(sigma0 + h)? - xi_at(sigma0 - h)?) / (2.0 * h);
    let center_nm = crate::spectral::wavelength_from_detuning(peak.center, reference)?;
    Ok(ScanDeduction {
        sigma0_prime,
        sigma0_prime_std,
        sigma0,
        sigma0_std,
        xi_s,
        xi_s_std: slope.abs() * sigma0_std,
        center_nm,
        negative_points: scan.iter().filter(|r| r.is_negative()).count(),
        peak,
    })
}

/// Noise-free scan whose normalised coincidence is an exact Gaussian of
/// half-width `sigma0_prime` (rad/s) in detuning from `center_nm`.
pub fn synthetic_scan(
    center_nm: f64,
    sigma0_prime: f64,
    amplitude: f64,
    wavelengths_nm: &[f64],
    eta_ts: f64,
) -> Result<Vec<ScanRecord>> {
    if !(sigma0_prime > 0.0) {
        return domain("scan width must be positive");
    }
    wavelengths_nm
        .iter()
        .map(|&lambda| {
            let omega = detuning_from_wavelength(lambda, center_nm)?;
            Ok(ScanRecord {
                lambda_s0_prime_nm: lambda,
                true_coincidence_normalized: amplitude * (-(omega / sigma0_prime).powi(2)).exp(),
                eta_ts_at_point: eta_ts,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::linspace;
    use crate::spectral::width_nm_to_angular;

    const CENTER: f64 = 1550.72;

    fn filter() -> FilterSpec {
        FilterSpec::gaussian_nm(CENTER, 0.36).unwrap()
    }

    #[test]
    fn recovers_first_experiment_collection_efficiency() {
        let width = width_nm_to_angular(0.73, CENTER).unwrap();
        let scan = synthetic_scan(CENTER, width, 1.0e-3, &linspace(1548.7, 1552.7, 17), 0.1).unwrap();
        let d = deduce_sigma0_from_scan(&scan, &filter()).unwrap();
        assert!((d.sigma0_prime / width - 1.0).abs() < 1e-6);
        let sigma0_nm = (0.73f64.powi(2) - 0.36f64.powi(2)).sqrt();
        let sigma0 = width_nm_to_angular(sigma0_nm, CENTER).unwrap();
        assert!((d.sigma0 / sigma0 - 1.0).abs() < 1e-5);
        // ξ = (1 + (σ₀/σ_s)²)^-1/2 with σ₀ ≈ 0.635 nm, σ_s = 0.36 nm
        assert!((d.xi_s - 0.4931).abs() < 2e-4, "{}", d.xi_s);
        assert!((d.center_nm - CENTER).abs() < 1e-9);
        assert!(d.sigma0_std < 1e-6 * d.sigma0);
    }

    #[test]
    fn flat_scan_is_a_fit_error() {
        let scan: Vec<ScanRecord> = linspace(1549.0, 1552.0, 9)
            .into_iter()
            .map(|l| ScanRecord {
                lambda_s0_prime_nm: l,
                true_coincidence_normalized: 5e-4,
                eta_ts_at_point: 0.1,
            })
            .collect();
        assert!(matches!(deduce_sigma0_from_scan(&scan, &filter()), Err(Error::Fit(_))));
    }

    #[test]
    fn scan_narrower_than_filter_is_degenerate() {
        let width = width_nm_to_angular(0.30, CENTER).unwrap();
        let scan = synthetic_scan(CENTER, width, 1.0, &linspace(1549.5, 1552.0, 11), 0.1).unwrap();
        assert!(matches!(deduce_sigma0_from_scan(&scan, &filter()), Err(Error::Domain(_))));
    }

    #[test]
    fn too_few_points() {
        let width = width_nm_to_angular(0.73, CENTER).unwrap();
        let scan = synthetic_scan(CENTER, width, 1.0, &[1550.0, 1550.5, 1551.0, 1551.5], 0.1).unwrap();
        assert!(deduce_sigma0_from_scan(&scan, &filter()).is_err());
    }
}
