//! From count records to a quantum efficiency.
//!
//! Rates are per gated pulse. Scattering coefficients follow the usual
//! convention of 10⁻³ photons per pulse per mW (`s1'`) or per mW² (`s2`), so
//! that `N_T = (η_ti s1' P + s2 P²) × 10⁻³`.

use crate::error::{domain, Error, Result};
use crate::fit::{fit_through_origin, weighted_linear_fit, FitResult};
use crate::simulator::CountRecord;

mod calibrate;

pub use calibrate::{
    calibrate, select_operating_point, CalibrationFlags, DeviationOverrides, CalibrationResult, CalibrationSetup, OperatingPoint,
    XiEstimate, XiSource,
};

/// Default ceiling on the pair rate at the chosen operating point.
pub const DEFAULT_PAIR_RATE_CAP: f64 = 0.03;

/// How accidental coincidences are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccidentalMode {
    /// `gates · p_s · p_i` from the raw per-gate singles probabilities.
    #[default]
    Computed,
    /// As `Computed`, with dark counts removed from both singles first.
    ComputedDarkSubtracted,
    /// The adjacent-gate count stored in the record.
    Measured,
}

/// Per-gate dark-click probabilities of the two detectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DarkProbs {
    pub signal: f64,
    pub idler: f64,
}

impl DarkProbs {
    pub fn new(signal: f64, idler: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&signal) || !(0.0..1.0).contains(&idler) {
            return domain("dark-count probabilities must lie in [0, 1)");
        }
        Ok(Self { signal, idler })
    }
}

fn dark_subtracted(p: f64, dark: f64, already: bool) -> f64 {
    if already {
        p
    } else {
        p - dark
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueCoincidence {
    /// `C_c` per gate.
    pub rate: f64,
    pub variance: f64,
    /// Accidentals per gate that were subtracted.
    pub accidental: f64,
    pub mode: AccidentalMode,
    pub negative: bool,
}

impl TrueCoincidence {
    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `C_c = (coincidences_raw − accidentals) / gates`.
pub fn true_coincidence(record: &CountRecord, dark: DarkProbs, mode: AccidentalMode) -> Result<TrueCoincidence> {
    if record.gates == 0 {
        return domain("record has zero gates");
    }
    let n = record.gates as f64;
    let raw = record.coincidence_probability();
    let (accidental, acc_variance) = match mode {
        AccidentalMode::Computed | AccidentalMode::ComputedDarkSubtracted => {
            let (p_s, p_i) = if mode == AccidentalMode::Computed {
                (record.signal_probability(), record.idler_probability())
            } else {
                (
                    dark_subtracted(record.signal_probability(), dark.signal, record.dark_corrected),
                    dark_subtracted(record.idler_probability(), dark.idler, record.dark_corrected),
                )
            };
            let acc = p_s * p_i;
            let rel2 = 1.0 / (record.singles_signal.max(1) as f64) + 1.0 / (record.singles_idler.max(1) as f64);
            (acc, acc * acc * rel2)
        }
        AccidentalMode::Measured => {
            let m = record.accidentals_measured.ok_or_else(|| {
                Error::Domain("measured accidentals requested but the record has none".into())
            })?;
            (m as f64 / n, m as f64 / (n * n))
        }
    };
    let rate = raw - accidental;
    Ok(TrueCoincidence {
        rate,
        variance: record.coincidences_raw.max(1) as f64 / (n * n) + acc_variance,
        accidental,
        mode,
        negative: rate < 0.0,
    })
}

/// Dark-subtracted idler singles `N_T` per gate and its Poisson variance.
pub fn idler_rate(record: &CountRecord, dark_idler: f64) -> Result<(f64, f64)> {
    if record.gates == 0 {
        return domain("record has zero gates");
    }
    let n = record.gates as f64;
    let n_t = dark_subtracted(record.idler_probability(), dark_idler, record.dark_corrected);
    Ok((n_t, record.singles_idler.max(1) as f64 / (n * n)))
}

/// Fitted linear Raman coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct RamanFit {
    /// `s1'` in 10⁻³ photons per pulse per mW.
    pub s1_prime: f64,
    pub s1_prime_std: f64,
    pub fit: FitResult,
}

/// Fits `N_T / η_ti = s1' P × 10⁻³` through the origin on Raman-only records.
pub fn fit_raman(records: &[CountRecord], eta_ti: f64, dark_idler: f64) -> Result<RamanFit> {
    if records.len() < 3 {
        return Err(Error::Fit(format!("Raman fit needs at least 3 power points, got {}", records.len())));
    }
    if !(eta_ti > 0.0 && eta_ti <= 1.0) {
        return domain(format!("η_ti must lie in (0, 1], got {eta_ti}"));
    }
    if records.iter().all(|r| r.singles_idler == 0) {
        return Err(Error::Fit("all Raman records have zero idler counts".into()));
    }
    let mut x = Vec::with_capacity(records.len());
    let mut y = Vec::with_capacity(records.len());
    let mut var = Vec::with_capacity(records.len());
    for r in records {
        let (n_t, v) = idler_rate(r, dark_idler)?;
        x.push(r.p_ave_mw);
        y.push(n_t / eta_ti * 1e3);
        var.push(v / (eta_ti * eta_ti) * 1e6);
    }
    let fit = fit_through_origin(&x, &y, &var)?;
    Ok(RamanFit {
        s1_prime: fit.coefficients[0],
        s1_prime_std: fit.std_error(0),
        fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfwmRate {
    /// Dark-subtracted idler singles per gate.
    pub n_t: f64,
    /// Raman part `η_ti s1' P × 10⁻³`.
    pub raman: f64,
    /// `R_iF = N_T − raman`.
    pub r_if: f64,
    /// Poisson variance of `N_T`; the `s1'` uncertainty is not included.
    pub variance: f64,
    pub negative: bool,
}

/// Idler-band SFWM rate left after removing the Raman contribution.
pub fn sfwm_rate(n_t: f64, s1_prime: f64, eta_ti: f64, p_ave_mw: f64) -> SfwmRate {
    let raman = eta_ti * s1_prime * p_ave_mw * 1e-3;
    let r_if = n_t - raman;
    SfwmRate {
        n_t,
        raman,
        r_if,
        variance: 0.0,
        negative: r_if < 0.0,
    }
}

/// [`sfwm_rate`] applied to a count record.
pub fn extract_sfwm_rate(record: &CountRecord, s1_prime: f64, eta_ti: f64, dark_idler: f64) -> Result<SfwmRate> {
    let (n_t, variance) = idler_rate(record, dark_idler)?;
    Ok(SfwmRate {
        variance,
        ..sfwm_rate(n_t, s1_prime, eta_ti, record.p_ave_mw)
    })
}

/// `N_T × 10³ = η_ti s1' P + s2 P²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSweepFit {
    pub s1_prime: f64,
    /// Zero when `s1'` was supplied rather than fitted.
    pub s1_prime_std: f64,
    pub s2: f64,
    pub s2_std: f64,
    pub s1_fixed: bool,
    pub fit: FitResult,
}

impl PowerSweepFit {
    /// Fitted `N_T` per gate at power `p`.
    pub fn total(&self, eta_ti: f64, p: f64) -> f64 {
        (eta_ti * self.s1_prime * p + self.s2 * p * p) * 1e-3
    }

    /// Fitted `R_iF = s2 P² × 10⁻³`.
    pub fn sfwm(&self, p: f64) -> f64 {
        self.s2 * p * p * 1e-3
    }
}

/// Weighted fit of the idler singles against pump power. With `s1_prime`
/// given only `s2` is free.
pub fn fit_power_sweep(
    records: &[CountRecord],
    eta_ti: f64,
    dark_idler: f64,
    s1_prime: Option<f64>,
) -> Result<PowerSweepFit> {
    if records.len() < 4 {
        return Err(Error::Fit(format!("power sweep needs at least 4 points, got {}", records.len())));
    }
    if !(eta_ti > 0.0 && eta_ti <= 1.0) {
        return domain(format!("η_ti must lie in (0, 1], got {eta_ti}"));
    }
    let mut p = Vec::with_capacity(records.len());
    let mut y = Vec::with_capacity(records.len());
    let mut var = Vec::with_capacity(records.len());
    for r in records {
        let (n_t, v) = idler_rate(r, dark_idler)?;
        p.push(r.p_ave_mw);
        y.push(n_t * 1e3);
        var.push(v * 1e6);
    }
    let p2: Vec<f64> = p.iter().map(|v| v * v).collect();
    match s1_prime {
        Some(s1) => {
            let rest: Vec<f64> = y.iter().zip(&p).map(|(y, p)| y - eta_ti * s1 * p).collect();
            let fit = fit_through_origin(&p2, &rest, &var)?;
            Ok(PowerSweepFit {
                s1_prime: s1,
                s1_prime_std: 0.0,
                s2: fit.coefficients[0],
                s2_std: fit.std_error(0),
                s1_fixed: true,
                fit,
            })
        }
        None => {
            let linear: Vec<f64> = p.iter().map(|v| eta_ti * v).collect();
            let fit = weighted_linear_fit(&[linear, p2], &y, &var)?;
            Ok(PowerSweepFit {
                s1_prime: fit.coefficients[0],
                s1_prime_std: fit.std_error(0),
                s2: fit.coefficients[1],
                s2_std: fit.std_error(1),
                s1_fixed: false,
                fit,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QeEstimate {
    pub eta: f64,
    /// Outside `[0, 1]`: noise or inconsistent inputs.
    pub unphysical: bool,
}

/// `η = C_c / (ξ_s R_iF η_ts)`.
pub fn deduce_qe(c_c: f64, xi_s: f64, r_if: f64, eta_ts: f64) -> Result<QeEstimate> {
    if !c_c.is_finite() {
        return domain("C_c must be finite");
    }
    for (name, v) in [("ξ_s", xi_s), ("R_iF", r_if), ("η_ts", eta_ts)] {
        if !(v > 0.0) || !v.is_finite() {
            return domain(format!("{name} must be positive, got {v}"));
        }
    }
    let eta = c_c / (xi_s * r_if * eta_ts);
    Ok(QeEstimate {
        eta,
        unphysical: !(0.0..=1.0).contains(&eta),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaFit {
    pub zeta: f64,
    pub zeta_std: f64,
    pub fit: FitResult,
}

/// Slope of `C_c = ζ η_ts R_iF` through the origin. `variance` holds the
/// variance of each `C_c`.
pub fn fit_zeta(eta_ts_r_if: &[f64], c_c: &[f64], variance: &[f64]) -> Result<ZetaFit> {
    if eta_ts_r_if.len() < 3 {
        return Err(Error::Fit(format!("ζ fit needs at least 3 points, got {}", eta_ts_r_if.len())));
    }
    let fit = fit_through_origin(eta_ts_r_if, c_c, variance)?;
    Ok(ZetaFit {
        zeta: fit.coefficients[0],
        zeta_std: fit.scaled_std_error(0),
        fit,
    })
}

/// `η = ζ / ξ_s`.
pub fn qe_from_zeta(zeta: f64, xi_s: f64) -> Result<f64> {
    if !(xi_s > 0.0 && xi_s <= 1.0) {
        return domain(format!("ξ_s must lie in (0, 1], got {xi_s}"));
    }
    Ok(zeta / xi_s)
}

/// Mean idler photon number per pulse and the end-to-end detection
/// probabilities of the two arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiPairParams {
    pub n_bar: f64,
    pub eta_ts_eta_s0: f64,
    pub eta_ti_eta_i0: f64,
}

impl MultiPairParams {
    pub fn new(n_bar: f64, eta_ts_eta_s0: f64, eta_ti_eta_i0: f64) -> Result<Self> {
        for (name, v) in [("n̄", n_bar), ("η_ts η_s0", eta_ts_eta_s0), ("η_ti η_i0", eta_ti_eta_i0)] {
            if !(0.0..1.0).contains(&v) {
                return domain(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        Ok(Self {
            n_bar,
            eta_ts_eta_s0,
            eta_ti_eta_i0,
        })
    }
}

/// Ratio of the measured to the true efficiency for a single-mode thermal
/// pair source. Reported as a bound; the pipeline does not divide it out.
pub fn multipair_ratio(params: &MultiPairParams) -> f64 {
    let n = params.n_bar;
    let a = params.eta_ts_eta_s0;
    let b = params.eta_ti_eta_i0;
    (1.0 + n) / ((1.0 + n * a) * (1.0 + n * (a + b - a * b)))
}

fn check_gate_widths(mu: f64, nominal_ns: f64, effective_ns: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return domain(format!("photon number per gate must be positive, got {mu}"));
    }
    if !(nominal_ns > 0.0 && effective_ns > 0.0) {
        return domain("gate widths must be positive");
    }
    Ok(mu * effective_ns / nominal_ns)
}

/// Efficiency from the click probability under attenuated CW light with `μ`
/// photons per nominal gate, of which the fraction inside the effective gate
/// counts.
pub fn cw_reference_qe(mu: f64, nominal_gate_ns: f64, effective_gate_ns: f64, click_prob: f64) -> Result<f64> {
    let mu_eff = check_gate_widths(mu, nominal_gate_ns, effective_gate_ns)?;
    if !(0.0..1.0).contains(&click_prob) {
        return domain(format!("click probability must lie in [0, 1), got {click_prob}"));
    }
    Ok(-(-click_prob).ln_1p() / mu_eff)
}

/// Forward model of [`cw_reference_qe`]: `1 − exp(−η μ_eff)`.
pub fn cw_click_probability(eta: f64, mu: f64, nominal_gate_ns: f64, effective_gate_ns: f64) -> Result<f64> {
    let mu_eff = check_gate_widths(mu, nominal_gate_ns, effective_gate_ns)?;
    if !(0.0..=1.0).contains(&eta) {
        return domain(format!("efficiency must lie in [0, 1], got {eta}"));
    }
    Ok(-(-eta * mu_eff).exp_m1())
}
