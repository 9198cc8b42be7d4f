//! First-order propagation of relative standard deviations through
//! `η = C_c / (ξ_s R_iF η_ts)` with `R_iF = N_T − η_ti s1' P`, and a Monte
//! Carlo resampling check of the same chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, Result};

/// Fewest draws accepted by [`mc_resample_oracle`].
pub const MIN_DRAWS: usize = 10_000;
const CHUNK: usize = 4096;

/// Relative deviations (fractions, not percent) and the absolute values they
/// refer to. `n_t` and `r_if` are per pulse, `s1_prime` in 10⁻³ photons per
/// pulse per mW, `p_ave_mw` in mW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyInputs {
    pub rel_eta_ti: f64,
    pub rel_eta_ts: f64,
    pub rel_p_ave: f64,
    pub rel_n_t: f64,
    /// Raman count rate used to fit `s1'`.
    pub rel_r_ri: f64,
    pub rel_c_c: f64,
    pub rel_xi_s: f64,
    pub n_t: f64,
    pub eta_ti: f64,
    pub s1_prime: f64,
    pub p_ave_mw: f64,
    pub r_if: f64,
}

impl UncertaintyInputs {
    /// Counting-setup deviations: 4% transmission, 2% power, 0.1% on the
    /// count rates, 1% on the coincidences. `ξ_s` is left at zero.
    pub fn typical(eta_ti: f64, s1_prime: f64, p_ave_mw: f64, r_if: f64) -> Self {
        Self {
            rel_eta_ti: 0.04,
            rel_eta_ts: 0.04,
            rel_p_ave: 0.02,
            rel_n_t: 0.001,
            rel_r_ri: 0.001,
            rel_c_c: 0.01,
            rel_xi_s: 0.0,
            n_t: r_if + raman_term(eta_ti, s1_prime, p_ave_mw),
            eta_ti,
            s1_prime,
            p_ave_mw,
            r_if,
        }
    }

    /// Same deviations with the Raman rate set to `ratio × R_iF`.
    pub fn with_raman_ratio(mut self, ratio: f64) -> Result<Self> {
        if !(ratio >= 0.0) || !(self.eta_ti > 0.0 && self.p_ave_mw > 0.0) {
            return domain("Raman ratio must be non-negative and η_ti, P positive");
        }
        self.s1_prime = ratio * self.r_if / (self.eta_ti * self.p_ave_mw * 1e-3);
        self.n_t = self.r_if * (1.0 + ratio);
        Ok(self)
    }

    pub fn with_xi_s(mut self, rel: f64) -> Self {
        self.rel_xi_s = rel;
        self
    }

    pub fn with_c_c(mut self, rel: f64) -> Self {
        self.rel_c_c = rel;
        self
    }

    /// Raman counts expected in the idler arm, per pulse.
    pub fn raman_rate(&self) -> f64 {
        raman_term(self.eta_ti, self.s1_prime, self.p_ave_mw)
    }

    pub fn validate(&self) -> Result<()> {
        let rel = [
            self.rel_eta_ti,
            self.rel_eta_ts,
            self.rel_p_ave,
            self.rel_n_t,
            self.rel_r_ri,
            self.rel_c_c,
            self.rel_xi_s,
        ];
        if rel.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return domain("relative deviations must be finite and non-negative");
        }
        if [self.n_t, self.eta_ti, self.s1_prime, self.p_ave_mw]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return domain("N_T, η_ti, s1' and P must be non-negative");
        }
        Ok(())
    }
}

fn raman_term(eta_ti: f64, s1_prime: f64, p_ave_mw: f64) -> f64 {
    eta_ti * s1_prime * p_ave_mw * 1e-3
}

fn quadrature(terms: &[f64]) -> f64 {
    terms.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// `δs1'/s1'`.
pub fn propagate_s1prime(inputs: &UncertaintyInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(quadrature(&[inputs.rel_r_ri, inputs.rel_eta_ti, inputs.rel_p_ave]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RifDeviation {
    pub absolute: f64,
    pub relative: f64,
}

/// `δR_iF` from the counting noise on `N_T` and the uncertainty of the
/// subtracted Raman rate.
pub fn propagate_rif(inputs: &UncertaintyInputs) -> Result<RifDeviation> {
    let rel_s1 = propagate_s1prime(inputs)?;
    if !(inputs.r_if > 0.0) {
        return domain(format!("R_iF must be positive, got {}", inputs.r_if));
    }
    let raman_rel = quadrature(&[inputs.rel_eta_ti, rel_s1, inputs.rel_p_ave]);
    let absolute = quadrature(&[inputs.rel_n_t * inputs.n_t, inputs.raman_rate() * raman_rel]);
    Ok(RifDeviation {
        absolute,
        relative: absolute / inputs.r_if,
    })
}

/// `δη/η` as the quadrature sum of the four relative deviations.
pub fn propagate_qe(rel_c_c: f64, rel_xi_s: f64, rel_r_if: f64, rel_eta_ts: f64) -> Result<f64> {
    let terms = [rel_c_c, rel_xi_s, rel_r_if, rel_eta_ts];
    if terms.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return domain("relative deviations must be finite and non-negative");
    }
    Ok(quadrature(&terms))
}

/// Full chain: `δη/η` from the raw inputs.
pub fn propagate_all(inputs: &UncertaintyInputs) -> Result<f64> {
    let rif = propagate_rif(inputs)?;
    propagate_qe(inputs.rel_c_c, inputs.rel_xi_s, rif.relative, inputs.rel_eta_ts)
}

/// Raman-to-SFWM ratio at which `δR_iF/R_iF` equals `target`, holding the
/// relative deviations of `inputs` fixed.
pub fn raman_ratio_for_rif_deviation(inputs: &UncertaintyInputs, target: f64) -> Result<f64> {
    let rel_s1 = propagate_s1prime(inputs)?;
    let a = inputs.rel_n_t.powi(2);
    let b = inputs.rel_eta_ti.powi(2) + rel_s1.powi(2) + inputs.rel_p_ave.powi(2);
    // (target)² = a (1 + k)² + b k²
    let qa = a + b;
    let qb = 2.0 * a;
    let qc = a - target * target;
    if !(qa > 0.0) || qc > 0.0 {
        return domain(format!("no non-negative Raman ratio gives δR_iF/R_iF = {target}"));
    }
    Ok((-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa))
}

/// Monte Carlo estimate next to the first-order result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McComparison {
    /// Sample standard deviation over sample mean of `η`.
    pub relative_deviation: f64,
    pub formula: f64,
    /// `|mc − formula| / formula`, or `|mc|` when the formula gives zero.
    pub divergence: f64,
    pub draws: usize,
}

/// Draws every input from an independent Gaussian with its relative
/// deviation, recomputes `R_iF` and `η`, and returns the spread of `η`.
///
/// `s1'` is drawn with the deviation given by [`propagate_s1prime`]. Chunk
/// `k` of 4096 draws uses ChaCha8 stream `k` of `seed`.
pub fn mc_resample_oracle(inputs: &UncertaintyInputs, draws: usize, seed: u64) -> Result<McComparison> {
    if draws < MIN_DRAWS {
        return domain(format!("draws must be at least {MIN_DRAWS}, got {draws}"));
    }
    let formula = propagate_all(inputs)?;
    let rel_s1 = propagate_s1prime(inputs)?;
    // η is sampled relative to its nominal value
    let nominal_r = inputs.r_if;

    let chunks = draws.div_ceil(CHUNK);
    let samples: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let n = CHUNK.min(draws - k * CHUNK);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let mut g = |rel: f64| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    1.0 + rel * z
                };
                let n_t = (inputs.r_if + inputs.raman_rate()) * g(inputs.rel_n_t);
                let raman = inputs.raman_rate() * g(inputs.rel_eta_ti) * g(rel_s1) * g(inputs.rel_p_ave);
                let r_if = (n_t - raman) / nominal_r;
                let eta = g(inputs.rel_c_c) / (g(inputs.rel_xi_s) * r_if * g(inputs.rel_eta_ts));
                out.push(eta);
            }
            out
        })
        .collect();

    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let relative_deviation = var.sqrt() / mean.abs();
    let divergence = if formula > 0.0 {
        (relative_deviation - formula).abs() / formula
    } else {
        relative_deviation
    };
    Ok(McComparison {
        relative_deviation,
        formula,
        divergence,
        draws,
    })
}

/// Biases that are bounded but not propagated.
pub const SYSTEMATIC_BOUNDS: [(&str, f64); 3] = [("timing_drift", 0.005), ("afterpulse", 0.005), ("multi_pair", 0.03)];

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow {
    pub label: String,
    pub rel_r_if: f64,
    pub rel_eta: f64,
    /// `(term, relative deviation)` entering `δη/η`.
    pub terms: Vec<(&'static str, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub rows: Vec<BudgetRow>,
    /// `sqrt(Σ σ_k²) / N`: deviation of the mean of the `N` configurations.
    pub mean_combined: f64,
    pub systematic_bounds: Vec<(&'static str, f64)>,
}

pub fn budget_row(label: impl Into<String>, inputs: &UncertaintyInputs) -> Result<BudgetRow> {
    let rif = propagate_rif(inputs)?;
    let rel_eta = propagate_qe(inputs.rel_c_c, inputs.rel_xi_s, rif.relative, inputs.rel_eta_ts)?;
    Ok(BudgetRow {
        label: label.into(),
        rel_r_if: rif.relative,
        rel_eta,
        terms: vec![
            ("c_c", inputs.rel_c_c),
            ("xi_s", inputs.rel_xi_s),
            ("r_if", rif.relative),
            ("eta_ts", inputs.rel_eta_ts),
            ("s1_prime", propagate_s1prime(inputs)?),
            ("n_t", inputs.rel_n_t),
            ("eta_ti", inputs.rel_eta_ti),
            ("p_ave", inputs.rel_p_ave),
        ],
    })
}

pub fn budget_report(configurations: &[(String, UncertaintyInputs)]) -> Result<BudgetReport> {
    if configurations.is_empty() {
        return domain("budget needs at least one configuration");
    }
    let rows = configurations
        .iter()
        .map(|(label, inputs)| budget_row(label.clone(), inputs))
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let mean_combined = rows.iter().map(|r| r.rel_eta * r.rel_eta).sum::<f64>().sqrt() / n;
    Ok(BudgetReport {
        rows,
        mean_combined,
        systematic_bounds: SYSTEMATIC_BOUNDS.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table3() -> UncertaintyInputs {
        UncertaintyInputs::typical(0.1, 83.5, 0.18, 0.01)
    }

    #[test]
    fn s1prime_deviation() {
        let mut z = table3();
        z.rel_r_ri = 0.0;
        z.rel_eta_ti = 0.0;
        z.rel_p_ave = 0.0;
        assert_eq!(propagate_s1prime(&z).unwrap(), 0.0);
        z.rel_p_ave = 0.03;
        assert_eq!(propagate_s1prime(&z).unwrap(), 0.03);
        assert!((propagate_s1prime(&table3()).unwrap() - 0.044733).abs() < 1e-5);
    }

    #[test]
    fn rif_deviation() {
        let mut free = table3();
        free.s1_prime = 0.0;
        free.rel_n_t = 0.0;
        free.n_t = free.r_if;
        assert_eq!(propagate_rif(&free).unwrap().absolute, 0.0);

        let r = propagate_rif(&table3().with_raman_ratio(1.24).unwrap()).unwrap();
        assert!((r.relative - 0.0785).abs() < 5e-4, "{}", r.relative);

        let mut no_nt = table3().with_raman_ratio(0.8).unwrap();
        no_nt.rel_n_t = 0.0;
        let single = propagate_rif(&no_nt).unwrap().absolute;
        let double = propagate_rif(&no_nt.with_raman_ratio(1.6).unwrap()).unwrap().absolute;
        let mut d2 = no_nt.with_raman_ratio(1.6).unwrap();
        d2.rel_n_t = 0.0;
        assert!((propagate_rif(&d2).unwrap().absolute / single - 2.0).abs() < 1e-12);
        assert!(double > 0.0);

        let mut bad = table3();
        bad.r_if = 0.0;
        assert!(propagate_rif(&bad).is_err());
    }

    #[test]
    fn qe_deviation() {
        assert_eq!(propagate_qe(0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!((propagate_qe(0.01, 0.015, 0.0785, 0.04).unwrap() - 0.0899).abs() < 5e-4);
        let first = propagate_qe(0.01, 0.04, 0.12, 0.04).unwrap();
        assert!((first - 0.135).abs() < 0.01, "{first}");
        assert!(propagate_qe(-0.1, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ratio_inversion_round_trips() {
        for k in [0.2, 1.24, 1.9, 3.0] {
            let inputs = table3().with_raman_ratio(k).unwrap();
            let rel = propagate_rif(&inputs).unwrap().relative;
            let back = raman_ratio_for_rif_deviation(&table3(), rel).unwrap();
            assert!((back - k).abs() < 1e-10);
        }
        assert!(raman_ratio_for_rif_deviation(&table3(), 1e-5).is_err());
    }

    #[test]
    fn monte_carlo_matches_formula_for_small_deviations() {
        let inputs = table3().with_raman_ratio(1.24).unwrap().with_xi_s(0.015);
        let mc = mc_resample_oracle(&inputs, 100_000, 5).unwrap();
        assert!(mc.divergence < 0.05, "{mc:?}");
        let again = mc_resample_oracle(&inputs, 100_000, 5).unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn monte_carlo_zero_deviation_is_zero() {
        let mut z = table3();
        z.rel_eta_ti = 0.0;
        z.rel_eta_ts = 0.0;
        z.rel_p_ave = 0.0;
        z.rel_n_t = 0.0;
        z.rel_r_ri = 0.0;
        z.rel_c_c = 0.0;
        let mc = mc_resample_oracle(&z, MIN_DRAWS, 1).unwrap();
        assert!(mc.relative_deviation < 1e-12);
        assert!(mc_resample_oracle(&z, 100, 1).is_err());
    }

    #[test]
    fn large_deviation_divergence_is_reported() {
        let inputs = table3().with_raman_ratio(0.5).unwrap().with_c_c(0.3).with_xi_s(0.3);
        let mc = mc_resample_oracle(&inputs, 100_000, 9).unwrap();
        assert!(mc.divergence > 0.05, "{mc:?}");
    }

    #[test]
    fn budget_single_row_reduces_to_propagate_qe() {
        let inputs = table3().with_raman_ratio(1.24).unwrap().with_xi_s(0.015);
        let report = budget_report(&[("only".to_string(), inputs)]).unwrap();
        let direct = propagate_all(&inputs).unwrap();
        assert!((report.rows[0].rel_eta - direct).abs() < 1e-15);
        assert!((report.mean_combined - direct).abs() < 1e-15);
        assert_eq!(report.systematic_bounds.len(), 3);
        assert!(budget_report(&[]).is_err());
    }
}
