//! The full calibration chain for one filter configuration.

use super::{
    extract_sfwm_rate, fit_power_sweep, fit_raman, fit_zeta, multipair_ratio, qe_from_zeta, true_coincidence,
    AccidentalMode, DarkProbs, MultiPairParams, PowerSweepFit, QeEstimate, RamanFit, SfwmRate, TrueCoincidence,
    ZetaFit, DEFAULT_PAIR_RATE_CAP,
};
use crate::error::{domain, Result};
use crate::jsa::{
    collection_efficiency, conditional_spectrum, deduce_sigma0_from_scan, symmetric_grid, ScanDeduction, ScanRecord,
    SpectralModel,
};
use crate::simulator::CountRecord;
use crate::spectral::FilterSpec;
use crate::uncertainty::{budget_report, BudgetReport, UncertaintyInputs};

/// Where the collection efficiency comes from.
#[derive(Debug, Clone)]
pub enum XiSource {
    /// A known value with its relative deviation.
    Fixed { xi_s: f64, rel_std: f64 },
    /// Fit of a scan of the signal filter center.
    Scan {
        records: Vec<ScanRecord>,
        signal_filter: FilterSpec,
    },
    /// Computed from the spectral model and the two filters.
    Model {
        model: SpectralModel,
        signal_filter: FilterSpec,
        idler_filter: FilterSpec,
        rel_std: f64,
    },
}

#[derive(Debug, Clone)]
pub struct XiEstimate {
    pub xi_s: f64,
    pub rel_std: f64,
    /// Width of the heralded spectrum, rad/s, when known.
    pub sigma0: Option<f64>,
    pub scan: Option<ScanDeduction>,
    pub source: &'static str,
}

impl XiSource {
    pub fn evaluate(&self) -> Result<XiEstimate> {
        match self {
            XiSource::Fixed { xi_s, rel_std } => {
                if !(*xi_s > 0.0 && *xi_s <= 1.0) {
                    return domain(format!("ξ_s must lie in (0, 1], got {xi_s}"));
                }
                Ok(XiEstimate {
                    xi_s: *xi_s,
                    rel_std: *rel_std,
                    sigma0: None,
                    scan: None,
                    source: "fixed",
                })
            }
            XiSource::Scan { records, signal_filter } => {
                let d = deduce_sigma0_from_scan(records, signal_filter)?;
                Ok(XiEstimate {
                    xi_s: d.xi_s,
                    rel_std: d.xi_s_std / d.xi_s,
                    sigma0: Some(d.sigma0),
                    source: "scan",
                    scan: Some(d),
                })
            }
            XiSource::Model {
                model,
                signal_filter,
                idler_filter,
                rel_std,
            } => {
                let sigma_p = match model {
                    SpectralModel::Analytic { sigma_p } => *sigma_p,
                    SpectralModel::Full(p) => p.pump.sigma,
                };
                let reach = idler_filter.width() * 40f64.powf(1.0 / (2.0 * idler_filter.order() as f64));
                let sigma0 = (2.0 * sigma_p * sigma_p + idler_filter.width().powi(2)).sqrt();
                let grid = symmetric_grid(reach + 5.0 * sigma0, 257);
                let spectrum = conditional_spectrum(model, idler_filter, &grid)?;
                let xi_s = collection_efficiency(signal_filter, &spectrum)?;
                Ok(XiEstimate {
                    xi_s,
                    rel_std: *rel_std,
                    sigma0: Some(spectrum.width()),
                    scan: None,
                    source: match model {
                        SpectralModel::Analytic { .. } => "analytic",
                        SpectralModel::Full(_) => "full",
                    },
                })
            }
        }
    }
}

/// Relative deviations not measured by the counting itself. `None` entries
/// are taken from the Poisson statistics of the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationOverrides {
    pub rel_eta_ti: f64,
    pub rel_eta_ts: f64,
    pub rel_p_ave: f64,
    pub rel_xi_s: Option<f64>,
    pub rel_c_c: Option<f64>,
    pub rel_n_t: Option<f64>,
    pub rel_r_ri: Option<f64>,
}

impl Default for DeviationOverrides {
    fn default() -> Self {
        Self {
            rel_eta_ti: 0.04,
            rel_eta_ts: 0.04,
            rel_p_ave: 0.02,
            rel_xi_s: None,
            rel_c_c: None,
            rel_n_t: None,
            rel_r_ri: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSetup {
    pub eta_ts: f64,
    pub eta_ti: f64,
    /// Nominal idler detector efficiency, used only to convert `R_iF` into a
    /// pair rate for operating-point selection and the multi-pair bound.
    pub eta_di_nominal: f64,
    pub dark: DarkProbs,
    pub accidental_mode: AccidentalMode,
    pub pair_rate_cap: f64,
    pub deviations: DeviationOverrides,
}

impl CalibrationSetup {
    pub fn new(eta_ts: f64, eta_ti: f64, eta_di_nominal: f64, dark: DarkProbs) -> Result<Self> {
        let setup = Self {
            eta_ts,
            eta_ti,
            eta_di_nominal,
            dark,
            accidental_mode: AccidentalMode::Computed,
            pair_rate_cap: DEFAULT_PAIR_RATE_CAP,
            deviations: DeviationOverrides::default(),
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("η_ts", self.eta_ts), ("η_ti", self.eta_ti), ("η_di", self.eta_di_nominal)] {
            if !(v > 0.0 && v <= 1.0) {
                return domain(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.pair_rate_cap > 0.0) {
            return domain("pair-rate cap must be positive");
        }
        Ok(())
    }
}

/// Derived quantities of one power point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub index: usize,
    pub p_ave_mw: f64,
    pub coincidence: TrueCoincidence,
    pub sfwm: SfwmRate,
    /// `R_iF / (η_ti η_di)`.
    pub pair_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CalibrationFlags {
    /// No point satisfied the pair-rate cap; the lowest pair rate was used.
    pub operating_point_fallback: bool,
    pub pair_rate_exceeds_cap: bool,
    pub negative_rates: usize,
    pub unphysical: bool,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub eta_ut: f64,
    /// Statistical standard error from the counting alone.
    pub eta_stat_std: f64,
    /// Standard deviation from the full budget.
    pub eta_std: f64,
    pub xi: XiEstimate,
    pub operating: OperatingPoint,
    pub points: Vec<OperatingPoint>,
    pub eta_ts: f64,
    pub eta_ti: f64,
    pub s1_prime: f64,
    pub s1_prime_std: f64,
    pub raman: Option<RamanFit>,
    pub sweep: PowerSweepFit,
    pub zeta: Option<ZetaFit>,
    pub eta_from_zeta: Option<f64>,
    pub uncertainty_inputs: UncertaintyInputs,
    pub budget: BudgetReport,
    /// Measured over true efficiency expected from multi-pair emission.
    pub multipair_bound: f64,
    pub accidental_mode: AccidentalMode,
    pub flags: CalibrationFlags,
}

impl CalibrationResult {
    pub fn qe(&self) -> QeEstimate {
        QeEstimate {
            eta: self.eta_ut,
            unphysical: self.flags.unphysical,
        }
    }
}

/// Record with the largest `C_c` whose pair rate stays within `cap`.
pub fn select_operating_point(points: &[OperatingPoint], cap: f64) -> Option<(usize, bool)> {
    let admissible = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.pair_rate <= cap)
        .max_by(|a, b| a.1.coincidence.rate.total_cmp(&b.1.coincidence.rate));
    match admissible {
        Some((i, _)) => Some((i, false)),
        None => points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.pair_rate.total_cmp(&b.1.pair_rate))
            .map(|(i, _)| (i, true)),
    }
}

/// Raman fit (when Raman-only records are given), power-sweep fit, operating
/// point, `ξ_s`, `η` and its budget.
///
/// Without Raman records `s1'` is taken from a two-parameter power-sweep fit.
pub fn calibrate(
    setup: &CalibrationSetup,
    counts: &[CountRecord],
    raman: Option<&[CountRecord]>,
    xi: &XiSource,
) -> Result<CalibrationResult> {
    setup.validate()?;
    if counts.is_empty() {
        return domain("no count records");
    }
    for r in counts.iter().chain(raman.unwrap_or(&[])) {
        r.validate()?;
    }
    let dark = setup.dark;
    let raman_fit = raman.map(|r| fit_raman(r, setup.eta_ti, dark.idler)).transpose()?;
    let sweep = fit_power_sweep(counts, setup.eta_ti, dark.idler, raman_fit.as_ref().map(|f| f.s1_prime))?;
    let (s1_prime, s1_prime_std) = match &raman_fit {
        Some(f) => (f.s1_prime, f.s1_prime_std),
        None => (sweep.s1_prime, sweep.s1_prime_std),
    };

    let points = counts
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let coincidence = true_coincidence(r, dark, setup.accidental_mode)?;
            let sfwm = extract_sfwm_rate(r, s1_prime, setup.eta_ti, dark.idler)?;
            Ok(OperatingPoint {
                index,
                p_ave_mw: r.p_ave_mw,
                coincidence,
                sfwm,
                pair_rate: sfwm.r_if / (setup.eta_ti * setup.eta_di_nominal),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (chosen, fallback) = select_operating_point(&points, setup.pair_rate_cap)
        .ok_or_else(|| crate::Error::Domain("no operating point".into()))?;
    let op = points[chosen];

    let xi_est = xi.evaluate()?;
    let qe = super::deduce_qe(op.coincidence.rate, xi_est.xi_s, op.sfwm.r_if, setup.eta_ts)?;

    // statistical error: counting noise on C_c and N_T plus the s1' fit
    let raman_var = (setup.eta_ti * op.p_ave_mw * 1e-3 * s1_prime_std).powi(2);
    let r_if_var = op.sfwm.variance + raman_var;
    let stat_rel = (op.coincidence.variance / op.coincidence.rate.powi(2) + r_if_var / op.sfwm.r_if.powi(2)).sqrt();

    let dev = setup.deviations;
    let n_t = op.sfwm.n_t;
    let inputs = UncertaintyInputs {
        rel_eta_ti: dev.rel_eta_ti,
        rel_eta_ts: dev.rel_eta_ts,
        rel_p_ave: dev.rel_p_ave,
        rel_n_t: dev.rel_n_t.unwrap_or(op.sfwm.variance.sqrt() / n_t.abs()),
        rel_r_ri: dev.rel_r_ri.unwrap_or(if s1_prime > 0.0 { s1_prime_std / s1_prime } else { 0.0 }),
        rel_c_c: dev
            .rel_c_c
            .unwrap_or(op.coincidence.std_error() / op.coincidence.rate.abs()),
        rel_xi_s: dev.rel_xi_s.unwrap_or(xi_est.rel_std),
        n_t: n_t.max(0.0),
        eta_ti: setup.eta_ti,
        s1_prime: s1_prime.max(0.0),
        p_ave_mw: op.p_ave_mw,
        r_if: op.sfwm.r_if,
    };
    let budget = budget_report(&[("operating_point".to_string(), inputs)])?;
    let rel_eta = budget.rows[0].rel_eta;

    let zeta = if points.len() >= 3 {
        let x: Vec<f64> = points.iter().map(|p| setup.eta_ts * p.sfwm.r_if).collect();
        let y: Vec<f64> = points.iter().map(|p| p.coincidence.rate).collect();
        let v: Vec<f64> = points.iter().map(|p| p.coincidence.variance).collect();
        fit_zeta(&x, &y, &v).ok()
    } else {
        None
    };
    let eta_from_zeta = zeta
        .as_ref()
        .map(|z| qe_from_zeta(z.zeta, xi_est.xi_s))
        .transpose()?;

    let multipair_bound = MultiPairParams::new(
        op.pair_rate.clamp(0.0, 0.999),
        (setup.eta_ts * qe.eta).clamp(0.0, 0.999),
        (setup.eta_ti * setup.eta_di_nominal).clamp(0.0, 0.999),
    )
    .map(|p| multipair_ratio(&p))?;

    let negative_rates = points
        .iter()
        .filter(|p| p.coincidence.negative || p.sfwm.negative)
        .count();
    Ok(CalibrationResult {
        eta_ut: qe.eta,
        eta_stat_std: stat_rel * qe.eta.abs(),
        eta_std: rel_eta * qe.eta.abs(),
        xi: xi_est,
        operating: op,
        points,
        eta_ts: setup.eta_ts,
        eta_ti: setup.eta_ti,
        s1_prime,
        s1_prime_std,
        raman: raman_fit,
        sweep,
        zeta,
        eta_from_zeta,
        uncertainty_inputs: inputs,
        budget,
        multipair_bound,
        accidental_mode: setup.accidental_mode,
        flags: CalibrationFlags {
            operating_point_fallback: fallback,
            pair_rate_exceeds_cap: op.pair_rate > setup.pair_rate_cap,
            negative_rates,
            unphysical: qe.unphysical,
        },
    })
}
