//! Two-photon spectral function of pulsed four-wave mixing in fiber, the
//! heralded (conditional) spectrum it induces, and the collection efficiency
//! of a filter placed on the heralded photon.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::quadrature::GaussLegendre;
use crate::spectral::{angular_frequency, FiberSpec, PumpSpec};

mod conditional;
mod scan;

pub use conditional::{
    analytic_conditional_width, collection_efficiency, conditional_spectrum, gaussian_collection_efficiency,
    symmetric_grid, xi_curve, ConditionalSpectrum, SpectralModel, SpectrumShape,
};
pub use scan::{deduce_sigma0_from_scan, synthetic_scan, ScanDeduction, ScanRecord};

/// Minimum number of z panels accepted for the phase-matching integral.
pub const MIN_QUADRATURE_STEPS: usize = 16;
const MAX_DOUBLINGS: usize = 12;
const CONVERGENCE_TOL: f64 = 1e-9;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// Wave-vector mismatch `Δk(Ω̃_s, Ω̃_i)` in 1/m, as a function of the signal and
/// idler detunings from the pump center.
#[derive(Debug, Clone, Copy)]
pub enum DeltaKModel {
    /// `k''(Ω̃_s² + Ω̃_i²)/2 + k'''(Ω̃_s³ + Ω̃_i³)/6`.
    Taylor,
    Constant(f64),
    Custom(fn(f64, f64) -> f64),
}

impl DeltaKModel {
    pub fn evaluate(&self, fiber: &FiberSpec, signal: f64, idler: f64) -> f64 {
        match *self {
            DeltaKModel::Taylor => {
                fiber.k2 * (signal * signal + idler * idler) / 2.0
                    + fiber.k3 * (signal.powi(3) + idler.powi(3)) / 6.0
            }
            DeltaKModel::Constant(dk) => dk,
            DeltaKModel::Custom(f) => f(signal, idler),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralFunctionParams {
    pub fiber: FiberSpec,
    pub pump: PumpSpec,
    pub delta_k: DeltaKModel,
    /// Signal filter center minus pump center, rad/s. The idler filter sits at
    /// the energy-conserving mirror frequency.
    pub signal_offset: f64,
    pub quadrature_steps: usize,
}

impl SpectralFunctionParams {
    pub fn new(fiber: FiberSpec, pump: PumpSpec, signal_center_nm: f64) -> Result<Self> {
        if !(signal_center_nm > 0.0) {
            return domain(format!("signal center must be positive, got {signal_center_nm}"));
        }
        Ok(Self {
            fiber,
            pump,
            delta_k: DeltaKModel::Taylor,
            signal_offset: angular_frequency(signal_center_nm) - pump.angular_frequency(),
            quadrature_steps: 32,
        })
    }

    /// Perfect phase matching, no dispersion and negligible nonlinear phase:
    /// `F` collapses to `L exp(-(Ω_s+Ω_i)²/4σ_p²)`.
    pub fn phase_matched(mut self) -> Self {
        self.fiber.k2 = 0.0;
        self.fiber.k3 = 0.0;
        self.fiber.gamma = 0.0;
        self.delta_k = DeltaKModel::Constant(0.0);
        self
    }

    pub fn with_delta_k(mut self, delta_k: DeltaKModel) -> Self {
        self.delta_k = delta_k;
        self
    }

    pub fn with_quadrature_steps(mut self, steps: usize) -> Self {
        self.quadrature_steps = steps;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.quadrature_steps < MIN_QUADRATURE_STEPS {
            return domain(format!(
                "quadrature_steps must be at least {MIN_QUADRATURE_STEPS}, got {}",
                self.quadrature_steps
            ));
        }
        if !(self.pump.sigma > 0.0) {
            return domain("pump bandwidth must be positive");
        }
        Ok(())
    }
}

/// Two-photon spectral amplitude `F` at detunings `Ω_s`, `Ω_i` measured from
/// the signal and idler filter centers.
///
/// The z-integral over the fiber is evaluated with composite Gauss–Legendre
/// panels, doubling the panel count until successive results agree to 1e-9
/// relative.
pub fn spectral_function(params: &SpectralFunctionParams, signal: f64, idler: f64) -> Result<Complex64> {
    params.validate()?;
    let sigma_p = params.pump.sigma;
    let sum = signal + idler;
    let envelope = (-(sum * sum) / (4.0 * sigma_p * sigma_p)).exp();
    if envelope == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(phase_matching_integral(params, signal, idler)? * envelope)
}

/// `|F|²` without the intermediate complex allocation in callers.
pub fn spectral_intensity(params: &SpectralFunctionParams, signal: f64, idler: f64) -> Result<f64> {
    spectral_function(params, signal, idler).map(|f| f.norm_sqr())
}

fn phase_matching_integral(params: &SpectralFunctionParams, signal: f64, idler: f64) -> Result<Complex64> {
    let fiber = &params.fiber;
    let sigma2 = params.pump.sigma * params.pump.sigma;
    let sum = signal + idler;
    let dk = params
        .delta_k
        .evaluate(fiber, signal + params.signal_offset, idler - params.signal_offset);
    let phase_rate = dk + 2.0 * fiber.gamma * params.pump.peak_power_w;
    let spread = fiber.k2 * sigma2 + 0.5 * fiber.k3 * sum * sigma2;
    let integrand = |z: f64| {
        let numerator = Complex64::new(0.0, -phase_rate * z).exp();
        let denominator = Complex64::new(1.0, -spread * z).sqrt();
        numerator / denominator
    };

    let length = fiber.length_m;
    let floor = 1e-12 * length;
    let mut steps = params.quadrature_steps;
    let mut previous: Complex64 = rule().integrate(integrand, -length, 0.0, steps);
    let mut change = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        steps *= 2;
        let current: Complex64 = rule().integrate(integrand, -length, 0.0, steps);
        change = (current - previous).norm() / current.norm().max(floor);
        if change < CONVERGENCE_TOL {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::Numerical {
        message: format!("phase-matching integral did not converge at Ω_s = {signal:e}, Ω_i = {idler:e}"),
        last_change: change,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::width_param_from_fwhm;

    fn reference_params() -> SpectralFunctionParams {
        let fiber = FiberSpec::new(300.0, 2.0e-3, 1544.0, 1.0e-29, 1.2e-40).unwrap();
        let pump = PumpSpec::new(1544.0, width_param_from_fwhm(0.3, 1).unwrap(), 0.3, 41e6, 10e-12).unwrap();
        SpectralFunctionParams::new(fiber, pump, 1550.7).unwrap()
    }

    #[test]
    fn phase_matched_limit_is_gaussian_envelope() {
        let p = reference_params().phase_matched();
        let s = p.pump.sigma;
        for (a, b) in [(0.0, 0.0), (0.5 * s, 0.3 * s), (-1.2 * s, 0.1 * s), (2.0 * s, 1.0 * s)] {
            let f = spectral_function(&p, a, b).unwrap();
            let expected = 300.0 * (-(a + b) * (a + b) / (4.0 * s * s)).exp();
            assert!((f.re - expected).abs() <= 1e-10 * 300.0, "{f} vs {expected}");
            assert!(f.im.abs() <= 1e-10 * 300.0);
        }
    }

    #[test]
    fn magnitude_symmetric_under_exchange_for_symmetric_mismatch() {
        let mut p = reference_params();
        p.signal_offset = 0.0;
        let s = p.pump.sigma;
        for (a, b) in [(0.4 * s, -0.1 * s), (1.3 * s, 0.2 * s), (-0.7 * s, 0.9 * s)] {
            let f = spectral_function(&p, a, b).unwrap().norm();
            let g = spectral_function(&p, b, a).unwrap().norm();
            assert!((f - g).abs() <= 1e-12 * f.max(1e-300));
        }
    }

    #[test]
    fn step_doubling_self_convergence() {
        let p = reference_params();
        let s = p.pump.sigma;
        for (a, b) in [(0.0, 0.0), (0.8 * s, -0.3 * s), (-1.5 * s, 0.4 * s)] {
            let coarse = spectral_function(&p, a, b).unwrap().norm();
            let fine = spectral_function(&p.with_quadrature_steps(p.quadrature_steps * 2), a, b)
                .unwrap()
                .norm();
            assert!((coarse - fine).abs() / fine < 1e-6);
        }
    }

    #[test]
    fn rejects_too_few_steps() {
        let p = reference_params().with_quadrature_steps(8);
        assert!(matches!(spectral_function(&p, 0.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn wildly_oscillating_integrand_reports_non_convergence() {
        let p = reference_params().with_delta_k(DeltaKModel::Constant(1.0e9));
        match spectral_function(&p, 0.0, 0.0) {
            Err(Error::Numerical { steps, .. }) => assert!(steps > p.quadrature_steps),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }
}
