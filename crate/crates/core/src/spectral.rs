//! Parametric filter and pump spectra, and conversions between vacuum
//! wavelength and angular-frequency detuning.
//!
//! Everything downstream works in angular frequency (rad/s). Wavelengths in
//! nm only appear when a spec is constructed or a result is reported.

use std::f64::consts::{LN_2, PI};

use crate::error::{domain, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `2πc` expressed for wavelengths in nm: `Ω = TWO_PI_C_NM * (1/λ₁ - 1/λ₂)`.
const TWO_PI_C_NM: f64 = 2.0 * PI * SPEED_OF_LIGHT * 1e9;

/// Angular frequency (rad/s) of light with vacuum wavelength `lambda_nm`.
pub fn angular_frequency(lambda_nm: f64) -> f64 {
    TWO_PI_C_NM / lambda_nm
}

/// Detuning `Ω = ω(λ) - ω(λ_center)` in rad/s, using the exact `1/λ` relation.
///
/// Longer wavelengths than the center give negative detuning.
pub fn detuning_from_wavelength(lambda_nm: f64, center_nm: f64) -> Result<f64> {
    if !(lambda_nm > 0.0 && center_nm > 0.0) {
        return domain(format!(
            "wavelengths must be positive (got {lambda_nm} nm, center {center_nm} nm)"
        ));
    }
    Ok(TWO_PI_C_NM * (1.0 / lambda_nm - 1.0 / center_nm))
}

/// Inverse of [`detuning_from_wavelength`].
pub fn wavelength_from_detuning(omega: f64, center_nm: f64) -> Result<f64> {
    if !(center_nm > 0.0) {
        return domain(format!("center wavelength must be positive, got {center_nm}"));
    }
    let inv = omega / TWO_PI_C_NM + 1.0 / center_nm;
    if !(inv > 0.0) {
        return domain(format!("detuning {omega:e} rad/s maps to a non-positive wavelength"));
    }
    Ok(1.0 / inv)
}

/// Converts a spectral half-width given in nm around `center_nm` to rad/s.
///
/// Uses the half-distance between `ω(λc - a)` and `ω(λc + a)`, so the result
/// is exact for a band symmetric in wavelength.
pub fn width_nm_to_angular(width_nm: f64, center_nm: f64) -> Result<f64> {
    if !(width_nm > 0.0 && center_nm > 0.0 && width_nm < center_nm) {
        return domain(format!(
            "width must satisfy 0 < a < center (got a = {width_nm} nm, center = {center_nm} nm)"
        ));
    }
    Ok(TWO_PI_C_NM * width_nm / ((center_nm - width_nm) * (center_nm + width_nm)))
}

/// Inverse of [`width_nm_to_angular`].
pub fn width_angular_to_nm(width: f64, center_nm: f64) -> Result<f64> {
    if !(width > 0.0 && center_nm > 0.0) {
        return domain(format!("width and center must be positive (got {width:e}, {center_nm})"));
    }
    // 2a/(λ² - a²) = x  =>  a = (sqrt(1 + x²λ²) - 1) / x, written without the cancellation
    let x = width / (0.5 * TWO_PI_C_NM);
    let xl = x * center_nm;
    Ok(xl * center_nm / ((1.0 + xl * xl).sqrt() + 1.0))
}

/// 1/e half-width `a` of a super-Gaussian `exp(-(x/a)^{2m})` with the given FWHM.
///
/// Unit-agnostic: the result carries the unit of `fwhm`.
pub fn width_param_from_fwhm(fwhm: f64, order: u32) -> Result<f64> {
    if !(fwhm > 0.0) || !fwhm.is_finite() {
        return domain(format!("FWHM must be positive and finite, got {fwhm}"));
    }
    if order == 0 {
        return domain("super-Gaussian order must be at least 1");
    }
    Ok(fwhm / fwhm_factor(order))
}

/// `FWHM / a = 2 (ln 2)^{1/(2m)}`.
fn fwhm_factor(order: u32) -> f64 {
    2.0 * LN_2.powf(1.0 / (2.0 * order as f64))
}

/// A Gaussian (`order = 1`) or super-Gaussian passband
/// `T(Ω) = T₀ exp(-(Ω/a)^{2m})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    center_wavelength_nm: f64,
    width: f64,
    order: u32,
    peak_transmittance: f64,
}

impl FilterSpec {
    /// Builds a filter from its 1/e half-width in rad/s.
    pub fn new(center_wavelength_nm: f64, width: f64, order: u32, peak_transmittance: f64) -> Result<Self> {
        if !(center_wavelength_nm > 0.0) {
            return domain(format!("filter center must be positive, got {center_wavelength_nm}"));
        }
        if !(width > 0.0) || !width.is_finite() {
            return domain(format!("filter width must be positive, got {width}"));
        }
        if order == 0 {
            return domain("filter order must be at least 1");
        }
        if !(peak_transmittance > 0.0 && peak_transmittance <= 1.0) {
            return domain(format!("peak transmittance must be in (0, 1], got {peak_transmittance}"));
        }
        Ok(Self {
            center_wavelength_nm,
            width,
            order,
            peak_transmittance,
        })
    }

    /// Builds a filter from its 1/e half-width in nm, as quoted by spectral fits.
    pub fn from_width_nm(center_nm: f64, width_nm: f64, order: u32, peak_transmittance: f64) -> Result<Self> {
        Self::new(center_nm, width_nm_to_angular(width_nm, center_nm)?, order, peak_transmittance)
    }

    pub fn from_fwhm_nm(center_nm: f64, fwhm_nm: f64, order: u32, peak_transmittance: f64) -> Result<Self> {
        Self::from_width_nm(center_nm, width_param_from_fwhm(fwhm_nm, order)?, order, peak_transmittance)
    }

    /// Unit-peak Gaussian with half-width in nm.
    pub fn gaussian_nm(center_nm: f64, width_nm: f64) -> Result<Self> {
        Self::from_width_nm(center_nm, width_nm, 1, 1.0)
    }

    /// Unit-peak sixth-order (`m = 3`) super-Gaussian with half-width in nm.
    pub fn super_gaussian6_nm(center_nm: f64, width_nm: f64) -> Result<Self> {
        Self::from_width_nm(center_nm, width_nm, 3, 1.0)
    }

    pub fn center_wavelength_nm(&self) -> f64 {
        self.center_wavelength_nm
    }

    /// 1/e half-width `a`, rad/s.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn width_nm(&self) -> f64 {
        // Cannot fail: both quantities were validated on construction.
        width_angular_to_nm(self.width, self.center_wavelength_nm).unwrap_or(f64::NAN)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn peak_transmittance(&self) -> f64 {
        self.peak_transmittance
    }

    /// Full width at half maximum, rad/s.
    pub fn fwhm(&self) -> f64 {
        self.width * fwhm_factor(self.order)
    }

    /// Passband shape normalised to unit peak.
    pub fn profile(&self, omega: f64) -> f64 {
        let x = (omega / self.width).powi(2);
        (-x.powi(self.order as i32)).exp()
    }

    /// Power transmittance at detuning `omega` from the filter center.
    pub fn transmittance(&self, omega: f64) -> f64 {
        self.peak_transmittance * self.profile(omega)
    }

    /// Same filter with a different half-width (rad/s).
    pub fn with_width(&self, width: f64) -> Result<Self> {
        Self::new(self.center_wavelength_nm, width, self.order, self.peak_transmittance)
    }

    /// Same passband shape, unit peak.
    pub fn normalized(&self) -> Self {
        Self {
            peak_transmittance: 1.0,
            ..*self
        }
    }
}

/// Free-function form of [`FilterSpec::transmittance`].
pub fn filter_transmittance(filter: &FilterSpec, omega: f64) -> f64 {
    filter.transmittance(omega)
}

/// Pulsed pump: Gaussian spectrum with 1/e half-width `sigma` and the power
/// figures that set the nonlinear phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpec {
    pub center_wavelength_nm: f64,
    /// 1/e half-width of the fitted pump spectrum, rad/s.
    pub sigma: f64,
    pub average_power_mw: f64,
    pub repetition_rate_hz: f64,
    pub pulse_duration_s: f64,
    pub peak_power_w: f64,
}

impl PumpSpec {
    /// Peak power is derived from the duty factor.
    pub fn new(
        center_wavelength_nm: f64,
        sigma_nm: f64,
        average_power_mw: f64,
        repetition_rate_hz: f64,
        pulse_duration_s: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("average power", average_power_mw),
            ("repetition rate", repetition_rate_hz),
            ("pulse duration", pulse_duration_s),
        ] {
            if !(v > 0.0) {
                return domain(format!("pump {name} must be positive, got {v}"));
            }
        }
        let sigma = width_nm_to_angular(sigma_nm, center_wavelength_nm)?;
        Ok(Self {
            center_wavelength_nm,
            sigma,
            average_power_mw,
            repetition_rate_hz,
            pulse_duration_s,
            peak_power_w: derived_peak_power(average_power_mw, repetition_rate_hz, pulse_duration_s),
        })
    }

    pub fn with_peak_power(mut self, peak_power_w: f64) -> Result<Self> {
        if !(peak_power_w > 0.0) {
            return domain(format!("peak power must be positive, got {peak_power_w}"));
        }
        self.peak_power_w = peak_power_w;
        Ok(self)
    }

    pub fn angular_frequency(&self) -> f64 {
        angular_frequency(self.center_wavelength_nm)
    }
}

/// `P_p = P_ave / (f_rep τ)` with `P_ave` in mW, result in W.
pub fn derived_peak_power(average_power_mw: f64, repetition_rate_hz: f64, pulse_duration_s: f64) -> f64 {
    average_power_mw * 1e-3 / (repetition_rate_hz * pulse_duration_s)
}

/// Dispersion and nonlinearity of the fiber at the pump center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub length_m: f64,
    /// Nonlinear coefficient γ, 1/(W·m).
    pub gamma: f64,
    pub zero_dispersion_wavelength_nm: f64,
    /// k'' at the pump center, s²/m.
    pub k2: f64,
    /// k''' at the pump center, s³/m.
    pub k3: f64,
}

impl FiberSpec {
    pub fn new(length_m: f64, gamma: f64, zero_dispersion_wavelength_nm: f64, k2: f64, k3: f64) -> Result<Self> {
        if !(length_m > 0.0) {
            return domain(format!("fiber length must be positive, got {length_m}"));
        }
        if !(gamma >= 0.0) {
            return domain(format!("nonlinear coefficient must be non-negative, got {gamma}"));
        }
        Ok(Self {
            length_m,
            gamma,
            zero_dispersion_wavelength_nm,
            k2,
            k3,
        })
    }
}

/// First-order estimate `k''(ω_p) ≈ k'''·(ω_p - ω₀)` from the zero-dispersion wavelength.
pub fn k2_from_zero_dispersion(k3: f64, pump_center_nm: f64, zero_dispersion_nm: f64) -> f64 {
    k3 * (angular_frequency(pump_center_nm) - angular_frequency(zero_dispersion_nm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_from_fwhm_matches_fitted_parameters() {
        assert!((width_param_from_fwhm(0.60, 1).unwrap() - 0.36).abs() < 5e-4);
        assert!((width_param_from_fwhm(0.15, 1).unwrap() - 0.09).abs() < 5e-4);
        let fwhm = 2.0 * LN_2.powf(1.0 / 6.0);
        assert!((width_param_from_fwhm(fwhm, 3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn width_from_fwhm_rejects_bad_input() {
        assert!(width_param_from_fwhm(0.0, 1).is_err());
        assert!(width_param_from_fwhm(-1.0, 1).is_err());
        assert!(width_param_from_fwhm(1.0, 0).is_err());
    }

    #[test]
    fn detuning_examples() {
        assert_eq!(detuning_from_wavelength(1550.7, 1550.7).unwrap(), 0.0);
        let omega = detuning_from_wavelength(1551.06, 1550.70).unwrap();
        // first-order 2πcΔλ/λ²
        let approx = -2.0 * PI * SPEED_OF_LIGHT * 0.36e-9 / (1550.70e-9f64).powi(2);
        assert!((omega / approx - 1.0).abs() < 5e-3);
        assert!((omega / -2.82e11 - 1.0).abs() < 5e-3);
        assert!(detuning_from_wavelength(-1.0, 1550.0).is_err());
    }

    #[test]
    fn detuning_is_nearly_antisymmetric() {
        let c = 1550.0;
        for i in 1..=20 {
            let d = 0.1 * i as f64;
            let up = detuning_from_wavelength(c + d, c).unwrap();
            let down = detuning_from_wavelength(c - d, c).unwrap();
            // the asymmetry is second order, about 2d/λ
            assert!(((up + down) / up).abs() < 1.5 * 2.0 * d / c);
        }
    }

    #[test]
    fn transmittance_reference_points() {
        let f = FilterSpec::new(1550.0, 2.0e11, 1, 0.8).unwrap();
        assert_eq!(f.transmittance(0.0), 0.8);
        assert!((f.transmittance(2.0e11) - 0.8 / std::f64::consts::E).abs() < 1e-15);
        for m in 1..=4 {
            let g = FilterSpec::new(1550.0, 3.0e11, m, 0.5).unwrap();
            let half = 3.0e11 * LN_2.powf(1.0 / (2.0 * m as f64));
            assert!((g.transmittance(half) - 0.25).abs() < 1e-14);
            assert!((g.fwhm() - 2.0 * half).abs() / g.fwhm() < 1e-15);
        }
    }

    #[test]
    fn filter_validation() {
        assert!(FilterSpec::new(1550.0, 0.0, 1, 1.0).is_err());
        assert!(FilterSpec::new(1550.0, 1e11, 0, 1.0).is_err());
        assert!(FilterSpec::new(1550.0, 1e11, 1, 0.0).is_err());
        assert!(FilterSpec::new(1550.0, 1e11, 1, 1.01).is_err());
    }

    #[test]
    fn width_conversion_round_trip() {
        let w = width_nm_to_angular(0.36, 1550.7).unwrap();
        let back = width_angular_to_nm(w, 1550.7).unwrap();
        assert!((back - 0.36).abs() < 1e-12);
        // agrees with first order to (a/λ)²
        let first = 2.0 * PI * SPEED_OF_LIGHT * 0.36e-9 / (1550.7e-9f64).powi(2);
        assert!((w / first - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pump_peak_power_from_duty_factor() {
        let p = PumpSpec::new(1544.0, 0.18, 0.3, 41e6, 10e-12).unwrap();
        assert!((p.peak_power_w - 0.3e-3 / (41e6 * 10e-12)).abs() < 1e-12);
        let q = p.with_peak_power(1.0).unwrap();
        assert_eq!(q.peak_power_w, 1.0);
        assert!(PumpSpec::new(1544.0, 0.18, 0.0, 41e6, 10e-12).is_err());
    }
}
