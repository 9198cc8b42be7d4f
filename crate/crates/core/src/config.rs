//! Run configuration: a TOML file with one table per physical component and
//! unit-suffixed keys.
//!
//! ```toml
//! [signal_filter]
//! center_nm = 1550.7
//! fwhm_nm = 0.60
//! order = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsa::{SpectralFunctionParams, SpectralModel};
use crate::pipeline::{AccidentalMode, CalibrationSetup, DarkProbs, DeviationOverrides, XiSource, DEFAULT_PAIR_RATE_CAP};
use crate::simulator::{Arm, ChannelSpec, DetectorSpec, PairExperiment, SourceCoefficients};
use crate::spectral::{k2_from_zero_dispersion, FiberSpec, FilterSpec, PumpSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub center_nm: f64,
    /// 1/e half-width of the spectrum; give this or `fwhm_nm`.
    pub width_nm: Option<f64>,
    pub fwhm_nm: Option<f64>,
    pub average_power_mw: f64,
    pub repetition_rate_mhz: f64,
    pub pulse_duration_ps: f64,
    pub peak_power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSection {
    pub length_m: f64,
    pub gamma_per_w_km: f64,
    pub zero_dispersion_nm: f64,
    pub k3_ps3_per_km: f64,
    /// Overrides the value derived from the zero-dispersion wavelength.
    pub k2_ps2_per_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub center_nm: f64,
    pub width_nm: Option<f64>,
    pub fwhm_nm: Option<f64>,
    #[serde(default = "one_u32")]
    pub order: u32,
    #[serde(default = "one_f64")]
    pub peak_transmittance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub transmission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub quantum_efficiency: f64,
    pub dark_count_prob: f64,
    pub afterpulse_prob: f64,
    pub gate_width_ns: f64,
    pub effective_gate_width_ns: f64,
    pub dead_time_us: f64,
    pub gate_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    /// Raman photons per arm, 10⁻³ per pulse per mW, at the fiber output.
    pub s1_per_mw: f64,
    /// Pairs, 10⁻³ per pulse per mW².
    pub s2_per_mw2: f64,
    #[serde(default = "yes")]
    pub sfwm_enabled: bool,
    /// Collection efficiency used by the simulator; computed from the
    /// filters when absent.
    pub xi_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Analytic,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AccidentalKind {
    #[default]
    Computed,
    ComputedDarkSubtracted,
    Measured,
}

impl From<AccidentalKind> for AccidentalMode {
    fn from(k: AccidentalKind) -> Self {
        match k {
            AccidentalKind::Computed => AccidentalMode::Computed,
            AccidentalKind::ComputedDarkSubtracted => AccidentalMode::ComputedDarkSubtracted,
            AccidentalKind::Measured => AccidentalMode::Measured,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub gates_per_point: u64,
    pub powers_mw: Vec<f64>,
    /// Powers of the Raman-only run; defaults to `powers_mw`.
    pub raman_powers_mw: Option<Vec<f64>>,
    #[serde(default)]
    pub spectral_model: ModelKind,
    #[serde(default)]
    pub accidentals: AccidentalKind,
    #[serde(default = "default_cap")]
    pub pair_rate_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySection {
    pub rel_eta_ti: f64,
    pub rel_eta_ts: f64,
    pub rel_p_ave: f64,
    pub rel_xi_s: Option<f64>,
    pub rel_c_c: Option<f64>,
    pub rel_n_t: Option<f64>,
    pub rel_r_ri: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pump: PumpSection,
    pub fiber: Option<FiberSection>,
    pub signal_filter: FilterSection,
    pub idler_filter: FilterSection,
    pub signal_channel: ChannelSection,
    pub idler_channel: ChannelSection,
    pub signal_detector: DetectorSection,
    pub idler_detector: DetectorSection,
    pub source: SourceSection,
    pub run: RunSection,
    pub uncertainty: Option<UncertaintySection>,
}

fn one_u32() -> u32 {
    1
}

fn one_f64() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_cap() -> f64 {
    DEFAULT_PAIR_RATE_CAP
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn half_width(section: &str, width: Option<f64>, fwhm: Option<f64>, order: u32) -> Result<f64> {
    match (width, fwhm) {
        (Some(w), None) => Ok(w),
        (None, Some(f)) => crate::spectral::width_param_from_fwhm(f, order),
        _ => Err(Error::Config(format!("[{section}] needs exactly one of width_nm, fwhm_nm"))),
    }
}

impl FilterSection {
    pub fn to_spec(&self, name: &str) -> Result<FilterSpec> {
        let w = half_width(name, self.width_nm, self.fwhm_nm, self.order)?;
        FilterSpec::from_width_nm(self.center_nm, w, self.order, self.peak_transmittance)
    }

    pub fn from_spec(spec: &FilterSpec) -> Self {
        Self {
            center_nm: spec.center_wavelength_nm(),
            width_nm: Some(spec.width_nm()),
            fwhm_nm: None,
            order: spec.order(),
            peak_transmittance: spec.peak_transmittance(),
        }
    }
}

impl DetectorSection {
    pub fn to_spec(&self) -> DetectorSpec {
        DetectorSpec {
            quantum_efficiency: self.quantum_efficiency,
            dark_count_prob: self.dark_count_prob,
            afterpulse_prob: self.afterpulse_prob,
            gate_width_ns: self.gate_width_ns,
            effective_gate_width_ns: self.effective_gate_width_ns,
            dead_time_us: self.dead_time_us,
            gate_rate_hz: self.gate_rate_hz,
        }
    }

    pub fn from_spec(d: &DetectorSpec) -> Self {
        Self {
            quantum_efficiency: d.quantum_efficiency,
            dark_count_prob: d.dark_count_prob,
            afterpulse_prob: d.afterpulse_prob,
            gate_width_ns: d.gate_width_ns,
            effective_gate_width_ns: d.effective_gate_width_ns,
            dead_time_us: d.dead_time_us,
            gate_rate_hz: d.gate_rate_hz,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(config_err)
    }

    /// Checks every section by building the domain objects it describes.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.pump_spec().map_err(wrap)?;
        self.signal_filter().map_err(wrap)?;
        self.idler_filter().map_err(wrap)?;
        if let Some(f) = &self.fiber {
            FiberSpec::new(f.length_m, f.gamma_per_w_km * 1e-3, f.zero_dispersion_nm, 0.0, 0.0).map_err(wrap)?;
        }
        if self.run.spectral_model == ModelKind::Full && self.fiber.is_none() {
            return Err(Error::Config("spectral_model = \"full\" needs a [fiber] section".into()));
        }
        if self.run.powers_mw.is_empty() {
            return Err(Error::Config("[run] powers_mw is empty".into()));
        }
        self.base_experiment(0.5)?.validate().map_err(wrap)?;
        Ok(())
    }

    pub fn pump_spec(&self) -> Result<PumpSpec> {
        let p = &self.pump;
        let w = half_width("pump", p.width_nm, p.fwhm_nm, 1)?;
        let spec = PumpSpec::new(
            p.center_nm,
            w,
            p.average_power_mw,
            p.repetition_rate_mhz * 1e6,
            p.pulse_duration_ps * 1e-12,
        )?;
        match p.peak_power_w {
            Some(pp) => spec.with_peak_power(pp),
            None => Ok(spec),
        }
    }

    pub fn fiber_spec(&self) -> Result<Option<FiberSpec>> {
        let Some(f) = &self.fiber else { return Ok(None) };
        let k3 = f.k3_ps3_per_km * 1e-36 * 1e-3;
        let k2 = match f.k2_ps2_per_km {
            Some(v) => v * 1e-24 * 1e-3,
            None => k2_from_zero_dispersion(k3, self.pump.center_nm, f.zero_dispersion_nm),
        };
        FiberSpec::new(f.length_m, f.gamma_per_w_km * 1e-3, f.zero_dispersion_nm, k2, k3).map(Some)
    }

    pub fn signal_filter(&self) -> Result<FilterSpec> {
        self.signal_filter.to_spec("signal_filter")
    }

    pub fn idler_filter(&self) -> Result<FilterSpec> {
        self.idler_filter.to_spec("idler_filter")
    }

    pub fn spectral_model(&self) -> Result<SpectralModel> {
        let pump = self.pump_spec()?;
        match self.run.spectral_model {
            ModelKind::Analytic => Ok(SpectralModel::Analytic { sigma_p: pump.sigma }),
            ModelKind::Full => {
                let fiber = self
                    .fiber_spec()?
                    .ok_or_else(|| Error::Config("full spectral model needs [fiber]".into()))?;
                Ok(SpectralModel::Full(SpectralFunctionParams::new(
                    fiber,
                    pump,
                    self.signal_filter.center_nm,
                )?))
            }
        }
    }

    /// `ξ_s` computed from the spectral model and both filters.
    pub fn model_xi_source(&self, rel_std: f64) -> Result<XiSource> {
        Ok(XiSource::Model {
            model: self.spectral_model()?,
            signal_filter: self.signal_filter()?,
            idler_filter: self.idler_filter()?,
            rel_std,
        })
    }

    fn base_experiment(&self, xi_s: f64) -> Result<PairExperiment> {
        Ok(PairExperiment {
            source: SourceCoefficients {
                s1: self.source.s1_per_mw,
                s2: self.source.s2_per_mw2,
                sfwm_enabled: self.source.sfwm_enabled,
            },
            xi_s,
            signal: Arm {
                channel: ChannelSpec {
                    transmission: self.signal_channel.transmission,
                    filter: self.signal_filter()?,
                },
                detector: self.signal_detector.to_spec(),
            },
            idler: Arm {
                channel: ChannelSpec {
                    transmission: self.idler_channel.transmission,
                    filter: self.idler_filter()?,
                },
                detector: self.idler_detector.to_spec(),
            },
        })
    }

    /// Simulator inputs. `ξ_s` comes from `[source] xi_s` or the model.
    pub fn experiment(&self) -> Result<PairExperiment> {
        let xi_s = match self.source.xi_s {
            Some(x) => x,
            None => self.model_xi_source(0.0)?.evaluate()?.xi_s,
        };
        let exp = self.base_experiment(xi_s)?;
        exp.validate()?;
        Ok(exp)
    }

    pub fn raman_powers(&self) -> &[f64] {
        self.run.raman_powers_mw.as_deref().unwrap_or(&self.run.powers_mw)
    }

    /// Calibration inputs; fails with a config error when the setup cannot
    /// be calibrated, e.g. with a blind idler detector.
    pub fn calibration_setup(&self) -> Result<CalibrationSetup> {
        self.build_setup().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    fn build_setup(&self) -> Result<CalibrationSetup> {
        let mut setup = CalibrationSetup::new(
            self.signal_channel.transmission,
            self.idler_channel.transmission,
            self.idler_detector.quantum_efficiency,
            DarkProbs::new(self.signal_detector.dark_count_prob, self.idler_detector.dark_count_prob)?,
        )?;
        setup.accidental_mode = self.run.accidentals.into();
        setup.pair_rate_cap = self.run.pair_rate_cap;
        if let Some(u) = &self.uncertainty {
            setup.deviations = DeviationOverrides {
                rel_eta_ti: u.rel_eta_ti,
                rel_eta_ts: u.rel_eta_ts,
                rel_p_ave: u.rel_p_ave,
                rel_xi_s: u.rel_xi_s,
                rel_c_c: u.rel_c_c,
                rel_n_t: u.rel_n_t,
                rel_r_ri: u.rel_r_ri,
            };
        }
        setup.validate()?;
        Ok(setup)
    }
}

/// Configuration of the first heralded-pair experiment, used by the demo
/// commands when no file is given.
pub fn demo_config() -> RunConfig {
    let detector = |eta: f64, dark: f64| DetectorSection {
        quantum_efficiency: eta,
        dark_count_prob: dark,
        afterpulse_prob: 0.005,
        gate_width_ns: 2.5,
        effective_gate_width_ns: 0.62,
        dead_time_us: 10.0,
        gate_rate_hz: 1.29e6,
    };
    RunConfig {
        pump: PumpSection {
            center_nm: 1544.0,
            width_nm: Some(0.18),
            fwhm_nm: None,
            average_power_mw: 0.18,
            repetition_rate_mhz: 41.3,
            pulse_duration_ps: 4.0,
            peak_power_w: None,
        },
        fiber: Some(FiberSection {
            length_m: 300.0,
            gamma_per_w_km: 2.0,
            zero_dispersion_nm: 1538.0,
            k3_ps3_per_km: 0.12,
            k2_ps2_per_km: None,
        }),
        signal_filter: FilterSection {
            center_nm: 1550.7,
            width_nm: None,
            fwhm_nm: Some(0.60),
            order: 1,
            peak_transmittance: 1.0,
        },
        idler_filter: FilterSection {
            center_nm: 1537.4,
            width_nm: None,
            fwhm_nm: Some(1.02),
            order: 1,
            peak_transmittance: 1.0,
        },
        signal_channel: ChannelSection { transmission: 0.1 },
        idler_channel: ChannelSection { transmission: 0.1 },
        signal_detector: detector(0.117, 1.7e-5),
        idler_detector: detector(0.4, 3.0e-5),
        source: SourceSection {
            s1_per_mw: 83.5 / 0.4,
            s2_per_mw2: 0.02 / (0.18 * 0.18 * 1e-3),
            sfwm_enabled: true,
            xi_s: Some(0.496),
        },
        run: RunSection {
            seed: 2011,
            gates_per_point: 2_000_000_000,
            powers_mw: vec![0.06, 0.09, 0.12, 0.15, 0.18],
            raman_powers_mw: None,
            spectral_model: ModelKind::Analytic,
            accidentals: AccidentalKind::Computed,
            pair_rate_cap: DEFAULT_PAIR_RATE_CAP,
        },
        uncertainty: Some(UncertaintySection {
            rel_eta_ti: 0.04,
            rel_eta_ts: 0.04,
            rel_p_ave: 0.02,
            rel_xi_s: Some(0.04),
            rel_c_c: Some(0.01),
            rel_n_t: Some(0.001),
            rel_r_ri: Some(0.001),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_round_trips_through_toml() {
        let cfg = demo_config();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        let exp = back.experiment().unwrap();
        assert_eq!(exp.xi_s, 0.496);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = demo_config().to_toml().unwrap().replace("[run]\n", "[run]\nbogus_key = 1\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn missing_section_is_rejected() {
        let mut cfg = demo_config();
        cfg.fiber = None;
        cfg.run.spectral_model = ModelKind::Full;
        let text = cfg.to_toml().unwrap();
        assert!(RunConfig::from_toml(&text).is_err());
        let cut = demo_config().to_toml().unwrap().replace("[idler_channel]", "[idler_channel_x]");
        assert!(RunConfig::from_toml(&cut).is_err());
    }

    #[test]
    fn width_and_fwhm_are_exclusive() {
        let mut cfg = demo_config();
        cfg.signal_filter.width_nm = Some(0.36);
        assert!(RunConfig::from_toml(&cfg.to_toml().unwrap()).is_err());
    }

    #[test]
    fn model_xi_without_fixed_value() {
        let mut cfg = demo_config();
        cfg.source.xi_s = None;
        let exp = cfg.experiment().unwrap();
        assert!(exp.xi_s > 0.3 && exp.xi_s < 0.7, "{}", exp.xi_s);
    }
}
