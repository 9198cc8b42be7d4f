//! Seeded Monte Carlo of gated photon counting with a fiber photon-pair source.
//!
//! Each gate carries a Poisson number of pairs (`s2 P² × 10⁻³`) and Poisson
//! Raman photons in both arms (`s1 P × 10⁻³`). Every pair's idler reaches a
//! click with probability `η_ti η_di`; its signal partner with probability
//! `ξ_s η_ts η_ds`. Poisson thinning splits the pairs into independent
//! streams (both detected, idler only, signal only), so a gate reduces to
//! three independent Bernoulli events:
//!
//! * `B`: at least one pair detected in both arms,
//! * `S`: a signal-only photon, Raman photon or dark click,
//! * `I`: the same for the idler arm.
//!
//! The signal detector fires on `B ∨ S`, the idler detector on `B ∨ I`.
//! Gates with none of the three events are skipped geometrically, which keeps
//! runs of 10⁸–10⁹ gates cheap at the low click probabilities of gated
//! InGaAs detectors. Dead time and single-gate afterpulsing are applied per
//! detector on top of that event stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::spectral::FilterSpec;

mod stationary;
pub use stationary::{stationary_rates, StationaryRates};

/// Minimum number of gates simulated per power point.
pub const MIN_GATES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub quantum_efficiency: f64,
    /// Probability of a dark click per gate.
    pub dark_count_prob: f64,
    /// Probability of a spurious click on the first live gate after a click.
    pub afterpulse_prob: f64,
    pub gate_width_ns: f64,
    pub effective_gate_width_ns: f64,
    pub dead_time_us: f64,
    pub gate_rate_hz: f64,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.quantum_efficiency >= 0.0 && self.quantum_efficiency <= 1.0) {
            return domain(format!("quantum efficiency must lie in [0, 1], got {}", self.quantum_efficiency));
        }
        for (name, p) in [("dark count", self.dark_count_prob), ("afterpulse", self.afterpulse_prob)] {
            if !(0.0..1.0).contains(&p) {
                return domain(format!("{name} probability must lie in [0, 1), got {p}"));
            }
        }
        if !(self.gate_width_ns > 0.0) || !(self.effective_gate_width_ns > 0.0) {
            return domain("gate widths must be positive");
        }
        if self.effective_gate_width_ns > self.gate_width_ns {
            return domain(format!(
                "effective gate width {} ns exceeds the gate width {} ns",
                self.effective_gate_width_ns, self.gate_width_ns
            ));
        }
        if !(self.dead_time_us >= 0.0) {
            return domain("dead time must be non-negative");
        }
        if !(self.gate_rate_hz > 0.0) {
            return domain("gate rate must be positive");
        }
        Ok(())
    }

    /// Gates after a click that fall inside the dead time.
    pub fn dead_gates(&self) -> u64 {
        let periods = self.dead_time_us * 1e-6 * self.gate_rate_hz;
        (periods.ceil() - 1.0).max(0.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub transmission: f64,
    pub filter: FilterSpec,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return domain(format!("channel transmission must lie in (0, 1], got {}", self.transmission));
        }
        Ok(())
    }
}

/// Scattering strengths at the fiber output, in units of 10⁻³ photons per
/// pulse per mW (`s1`, each arm) and per mW² (`s2`, pairs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCoefficients {
    pub s1: f64,
    pub s2: f64,
    /// `false` models the pump tuned away from phase matching: Raman only.
    pub sfwm_enabled: bool,
}

impl SourceCoefficients {
    pub fn validate(&self) -> Result<()> {
        if !(self.s1 >= 0.0 && self.s2 >= 0.0) {
            return domain("scattering coefficients must be non-negative");
        }
        Ok(())
    }

    /// Mean number of pairs per gated pulse at average power `p_ave_mw`.
    pub fn pair_rate(&self, p_ave_mw: f64) -> f64 {
        if self.sfwm_enabled {
            self.s2 * p_ave_mw * p_ave_mw * 1e-3
        } else {
            0.0
        }
    }

    /// Mean number of Raman photons per arm per gated pulse.
    pub fn raman_rate(&self, p_ave_mw: f64) -> f64 {
        self.s1 * p_ave_mw * 1e-3
    }

    /// Coefficients whose detected Raman rate in an arm with detector
    /// efficiency `eta_d` equals `eta_t · s1_prime · P × 10⁻³`.
    pub fn from_normalized_raman(s1_prime: f64, eta_d: f64, s2: f64) -> Result<Self> {
        if !(eta_d > 0.0) {
            return domain("detector efficiency must be positive to un-normalise s1'");
        }
        Ok(Self {
            s1: s1_prime / eta_d,
            s2,
            sfwm_enabled: true,
        })
    }
}

/// One arm of the experiment: collection channel and detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub channel: ChannelSpec,
    pub detector: DetectorSpec,
}

impl Arm {
    /// End-to-end probability that a photon entering the channel clicks.
    pub fn detection_efficiency(&self) -> f64 {
        self.channel.transmission * self.detector.quantum_efficiency
    }
}

/// Everything the simulator needs for one filter configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairExperiment {
    pub source: SourceCoefficients,
    /// Collection efficiency of the heralded (signal) photon.
    pub xi_s: f64,
    pub signal: Arm,
    pub idler: Arm,
}

impl PairExperiment {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if !(self.xi_s >= 0.0 && self.xi_s <= 1.0) {
            return domain(format!("collection efficiency must lie in [0, 1], got {}", self.xi_s));
        }
        self.signal.channel.validate()?;
        self.idler.channel.validate()?;
        self.signal.detector.validate()?;
        self.idler.detector.validate()
    }

    /// Raman-only variant used for the `s1'` calibration run.
    pub fn raman_only(&self) -> Self {
        let mut other = *self;
        other.source.sfwm_enabled = false;
        other
    }

    fn gate_probabilities(&self, p_ave_mw: f64) -> GateProbabilities {
        let pairs = self.source.pair_rate(p_ave_mw);
        let raman = self.source.raman_rate(p_ave_mw);
        let q_i = self.idler.detection_efficiency();
        let q_s = self.xi_s * self.signal.detection_efficiency();
        let d_s = self.signal.detector.dark_count_prob;
        let d_i = self.idler.detector.dark_count_prob;
        let both = -(-pairs * q_i * q_s).exp_m1();
        let signal_only = 1.0 - (-pairs * (1.0 - q_i) * q_s - raman * self.signal.detection_efficiency()).exp() * (1.0 - d_s);
        let idler_only = 1.0 - (-pairs * q_i * (1.0 - q_s) - raman * self.idler.detection_efficiency()).exp() * (1.0 - d_i);
        GateProbabilities {
            both,
            signal_only,
            idler_only,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct GateProbabilities {
    both: f64,
    signal_only: f64,
    idler_only: f64,
}

impl GateProbabilities {
    fn any(&self) -> f64 {
        1.0 - (1.0 - self.both) * (1.0 - self.signal_only) * (1.0 - self.idler_only)
    }
}

/// One power point of a photon-counting run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRecord {
    pub p_ave_mw: f64,
    pub gates: u64,
    pub singles_signal: u64,
    pub singles_idler: u64,
    pub coincidences_raw: u64,
    /// Signal click in one gate followed by an idler click in the next.
    pub accidentals_measured: Option<u64>,
    /// Singles already have dark counts removed.
    pub dark_corrected: bool,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        if self.gates == 0 {
            return domain("record has zero gates");
        }
        if self.coincidences_raw > self.singles_signal.min(self.singles_idler) {
            return domain(format!(
                "coincidences ({}) exceed the smaller singles count ({})",
                self.coincidences_raw,
                self.singles_signal.min(self.singles_idler)
            ));
        }
        if !(self.p_ave_mw >= 0.0) {
            return domain("pump power must be non-negative");
        }
        Ok(())
    }

    pub fn signal_probability(&self) -> f64 {
        self.singles_signal as f64 / self.gates as f64
    }

    pub fn idler_probability(&self) -> f64 {
        self.singles_idler as f64 / self.gates as f64
    }

    pub fn coincidence_probability(&self) -> f64 {
        self.coincidences_raw as f64 / self.gates as f64
    }
}

/// Closed-form per-gate means, excluding dead time and afterpulsing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub singles_signal: f64,
    pub singles_idler: f64,
    /// Probability that both detectors click in the same gate.
    pub coincidence_raw: f64,
    /// `ξ_s η_ds η_ts R_iF`: heralded coincidences to first order.
    pub coincidence: f64,
    /// `singles_signal × singles_idler`.
    pub accidental: f64,
    /// Detected SFWM idler rate `R_iF`, per gate.
    pub r_if: f64,
    /// Mean pairs per gate.
    pub pair_rate: f64,
}

pub fn expected_rates(experiment: &PairExperiment, p_ave_mw: f64) -> Result<ExpectedRates> {
    experiment.validate()?;
    if !(p_ave_mw >= 0.0) {
        return domain("pump power must be non-negative");
    }
    let g = experiment.gate_probabilities(p_ave_mw);
    let singles_signal = 1.0 - (1.0 - g.both) * (1.0 - g.signal_only);
    let singles_idler = 1.0 - (1.0 - g.both) * (1.0 - g.idler_only);
    let pair_rate = experiment.source.pair_rate(p_ave_mw);
    let r_if = pair_rate * experiment.idler.detection_efficiency();
    Ok(ExpectedRates {
        singles_signal,
        singles_idler,
        coincidence_raw: g.both + (1.0 - g.both) * g.signal_only * g.idler_only,
        coincidence: experiment.xi_s
            * experiment.signal.detector.quantum_efficiency
            * experiment.signal.channel.transmission
            * r_if,
        accidental: singles_signal * singles_idler,
        r_if,
        pair_rate,
    })
}

/// Simulates every power point with `gates_per_point` gates.
///
/// Point `k` draws from ChaCha8 stream `2k` (photon events) and `2k + 1`
/// (afterpulses) of `seed`, so results do not depend on scheduling.
pub fn simulate_power_sweep(
    experiment: &PairExperiment,
    powers_mw: &[f64],
    gates_per_point: u64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    experiment.validate()?;
    if gates_per_point == 0 {
        return domain("gates_per_point must be positive");
    }
    if gates_per_point < MIN_GATES {
        return domain(format!("gates_per_point must be at least {MIN_GATES}, got {gates_per_point}"));
    }
    if let Some(p) = powers_mw.iter().find(|p| !(**p > 0.0)) {
        return domain(format!("pump powers must be positive, got {p}"));
    }
    Ok(powers_mw
        .par_iter()
        .enumerate()
        .map(|(k, &p)| simulate_point(experiment, p, gates_per_point, seed, k as u64))
        .collect())
}

fn simulate_point(experiment: &PairExperiment, p_ave_mw: f64, gates: u64, seed: u64, index: u64) -> CountRecord {
    let mut events = ChaCha8Rng::seed_from_u64(seed);
    events.set_stream(2 * index);
    let mut afterpulses = ChaCha8Rng::seed_from_u64(seed);
    afterpulses.set_stream(2 * index + 1);

    let probs = experiment.gate_probabilities(p_ave_mw);
    let p_any = probs.any();
    let log_miss = (-p_any).ln_1p();
    let skip = |rng: &mut ChaCha8Rng| -> u64 {
        if p_any <= 0.0 {
            return u64::MAX;
        }
        if p_any >= 1.0 {
            return 0;
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        let k = (u.ln() / log_miss).floor();
        if k >= u64::MAX as f64 { u64::MAX } else { k as u64 }
    };

    let mut signal = DetectorState::new(&experiment.signal.detector);
    let mut idler = DetectorState::new(&experiment.idler.detector);
    let mut record = CountRecord {
        p_ave_mw,
        gates,
        singles_signal: 0,
        singles_idler: 0,
        coincidences_raw: 0,
        accidentals_measured: Some(0),
        dark_corrected: false,
    };
    let mut adjacent = 0u64;

    let mut next_event = skip(&mut events);
    loop {
        let gate = next_event
            .min(signal.afterpulse_at.unwrap_or(u64::MAX))
            .min(idler.afterpulse_at.unwrap_or(u64::MAX));
        if gate >= gates {
            break;
        }
        let (both, s_only, i_only) = if gate == next_event {
            let outcome = sample_event(&probs, p_any, &mut events);
            next_event = gate.saturating_add(1).saturating_add(skip(&mut events));
            outcome
        } else {
            (false, false, false)
        };
        let previous_signal = signal.last_click;
        let s_click = signal.fire(gate, both || s_only, &mut afterpulses);
        let i_click = idler.fire(gate, both || i_only, &mut afterpulses);
        if s_click {
            record.singles_signal += 1;
        }
        if i_click {
            record.singles_idler += 1;
            if gate > 0 && previous_signal == Some(gate - 1) {
                adjacent += 1;
            }
        }
        if s_click && i_click {
            record.coincidences_raw += 1;
        }
    }
    record.accidentals_measured = Some(adjacent);
    record
}

/// Draws which of `B`, `S`, `I` occurred given that at least one did.
fn sample_event(p: &GateProbabilities, p_any: f64, rng: &mut ChaCha8Rng) -> (bool, bool, bool) {
    if rng.random::<f64>() * p_any < p.both {
        return (true, rng.random::<f64>() < p.signal_only, rng.random::<f64>() < p.idler_only);
    }
    let p_si = 1.0 - (1.0 - p.signal_only) * (1.0 - p.idler_only);
    if rng.random::<f64>() * p_si < p.signal_only {
        (false, true, rng.random::<f64>() < p.idler_only)
    } else {
        (false, false, true)
    }
}

struct DetectorState {
    dead_gates: u64,
    afterpulse_prob: f64,
    live_from: u64,
    afterpulse_at: Option<u64>,
    last_click: Option<u64>,
}

impl DetectorState {
    fn new(spec: &DetectorSpec) -> Self {
        Self {
            dead_gates: spec.dead_gates(),
            afterpulse_prob: spec.afterpulse_prob,
            live_from: 0,
            afterpulse_at: None,
            last_click: None,
        }
    }

    fn fire(&mut self, gate: u64, photon: bool, rng: &mut ChaCha8Rng) -> bool {
        let afterpulse = self.afterpulse_at == Some(gate);
        if afterpulse {
            self.afterpulse_at = None;
        }
        if !(photon || afterpulse) || gate < self.live_from {
            return false;
        }
        self.live_from = gate + 1 + self.dead_gates;
        self.last_click = Some(gate);
        if self.afterpulse_prob > 0.0 && rng.random::<f64>() < self.afterpulse_prob {
            self.afterpulse_at = Some(self.live_from);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(super) fn detector(eta: f64, dark: f64, afterpulse: f64, dead_us: f64) -> DetectorSpec {
        DetectorSpec {
            quantum_efficiency: eta,
            dark_count_prob: dark,
            afterpulse_prob: afterpulse,
            gate_width_ns: 2.5,
            effective_gate_width_ns: 0.62,
            dead_time_us: dead_us,
            gate_rate_hz: 1.29e6,
        }
    }

    pub(super) fn experiment(eta_ds: f64, eta_di: f64, dark: f64) -> PairExperiment {
        let filter = FilterSpec::gaussian_nm(1550.7, 0.36).unwrap();
        PairExperiment {
            source: SourceCoefficients {
                s1: 80.0,
                s2: 400.0,
                sfwm_enabled: true,
            },
            xi_s: 0.496,
            signal: Arm {
                channel: ChannelSpec {
                    transmission: 0.1,
                    filter,
                },
                detector: detector(eta_ds, dark, 0.0, 10.0),
            },
            idler: Arm {
                channel: ChannelSpec {
                    transmission: 0.1,
                    filter,
                },
                detector: detector(eta_di, dark, 0.0, 10.0),
            },
        }
    }

    #[test]
    fn dead_gate_count() {
        assert_eq!(detector(0.1, 0.0, 0.0, 10.0).dead_gates(), 12);
        assert_eq!(detector(0.1, 0.0, 0.0, 0.0).dead_gates(), 0);
        let mut d = detector(0.1, 0.0, 0.0, 0.0);
        d.dead_time_us = 2.0;
        d.gate_rate_hz = 1.0e6;
        assert_eq!(d.dead_gates(), 1);
    }

    #[test]
    fn blind_detectors_count_nothing() {
        let exp = experiment(0.0, 0.0, 0.0);
        let records = simulate_power_sweep(&exp, &[0.1, 0.3], 100_000, 7).unwrap();
        for r in records {
            assert_eq!((r.singles_signal, r.singles_idler, r.coincidences_raw), (0, 0, 0));
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let exp = experiment(0.12, 0.2, 3e-5);
        let a = simulate_power_sweep(&exp, &[0.1, 0.2, 0.3], 1_000_000, 42).unwrap();
        let b = simulate_power_sweep(&exp, &[0.1, 0.2, 0.3], 1_000_000, 42).unwrap();
        let c = simulate_power_sweep(&exp, &[0.1, 0.2, 0.3], 1_000_000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for r in &a {
            r.validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let exp = experiment(0.1, 0.1, 0.0);
        assert!(simulate_power_sweep(&exp, &[0.1], 0, 1).is_err());
        assert!(simulate_power_sweep(&exp, &[0.1], 100, 1).is_err());
        assert!(simulate_power_sweep(&exp, &[0.0], 100_000, 1).is_err());
        let mut bad = exp;
        bad.signal.detector.effective_gate_width_ns = 3.0;
        assert!(simulate_power_sweep(&bad, &[0.1], 100_000, 1).is_err());
    }

    #[test]
    fn zero_power_leaves_only_dark_rates() {
        let exp = experiment(0.12, 0.2, 3e-5);
        let e = expected_rates(&exp, 0.0).unwrap();
        assert!((e.singles_signal / 3e-5 - 1.0).abs() < 1e-9);
        assert!((e.singles_idler / 3e-5 - 1.0).abs() < 1e-9);
        assert_eq!(e.coincidence, 0.0);
        assert_eq!(e.r_if, 0.0);
    }

    #[test]
    fn expected_coincidence_follows_heralding_relation() {
        let exp = experiment(0.12, 0.2, 3e-5);
        let e = expected_rates(&exp, 0.25).unwrap();
        let r_if = 400.0 * 0.0625 * 1e-3 * 0.1 * 0.2;
        assert!((e.r_if - r_if).abs() < 1e-15);
        assert!((e.coincidence - 0.496 * 0.12 * 0.1 * r_if).abs() < 1e-18);
        // to first order the raw coincidence exceeds the heralded one by the accidentals
        assert!((e.coincidence_raw - e.coincidence - e.accidental).abs() < 0.05 * e.coincidence);
    }

    #[test]
    fn accidental_is_product_of_uncorrelated_singles() {
        let mut exp = experiment(0.12, 0.2, 3e-5);
        exp.source.sfwm_enabled = false;
        let e = expected_rates(&exp, 0.3).unwrap();
        let g = exp.gate_probabilities(0.3);
        // enumerate the joint outcomes of one gate
        let mut both = 0.0;
        for s in [false, true] {
            for i in [false, true] {
                let p = if s { g.signal_only } else { 1.0 - g.signal_only }
                    * if i { g.idler_only } else { 1.0 - g.idler_only };
                if s && i {
                    both += p;
                }
            }
        }
        assert!((e.accidental - both).abs() < 1e-18);
        assert!((e.coincidence_raw - both).abs() < 1e-18);
    }

    #[test]
    fn singles_match_closed_form_without_dead_time() {
        let mut exp = experiment(0.12, 0.2, 3e-5);
        exp.signal.detector.dead_time_us = 0.0;
        exp.idler.detector.dead_time_us = 0.0;
        let gates = 20_000_000;
        let r = &simulate_power_sweep(&exp, &[0.3], gates, 3).unwrap()[0];
        let e = expected_rates(&exp, 0.3).unwrap();
        for (count, p) in [
            (r.singles_signal, e.singles_signal),
            (r.singles_idler, e.singles_idler),
            (r.coincidences_raw, e.coincidence_raw),
        ] {
            let mean = p * gates as f64;
            assert!((count as f64 - mean).abs() < 4.0 * mean.sqrt(), "{count} vs {mean}");
        }
        let acc = r.accidentals_measured.unwrap() as f64;
        let mean = e.accidental * gates as f64;
        assert!((acc - mean).abs() < 4.0 * mean.sqrt(), "{acc} vs {mean}");
    }
}
