//! Flat reports and figure-ready series derived from calibration results.

use crate::error::Result;
use crate::io::Report;
use crate::jsa::{xi_curve, ScanRecord};
use crate::pipeline::CalibrationResult;
use crate::quadrature::linspace;
use crate::spectral::{detuning_from_wavelength, width_angular_to_nm, FilterSpec};

/// A named `(x, value)` table.
pub type Series = (String, Vec<(f64, f64)>);

/// Every intermediate of a calibration as `key = value` lines.
pub fn calibration_report(r: &CalibrationResult) -> Report {
    let mut rep = Report::new();
    let op = &r.operating;
    rep.push("eta_ut", r.eta_ut)
        .push("eta_ut_std", r.eta_std)
        .push("eta_ut_rel_std", r.budget.rows[0].rel_eta)
        .push("eta_ut_stat_std", r.eta_stat_std)
        .push("xi_s", r.xi.xi_s)
        .push("xi_s_rel_std", r.uncertainty_inputs.rel_xi_s)
        .push("xi_s_estimate_rel_std", r.xi.rel_std)
        .push("xi_source", r.xi.source);
    if let Some(s) = &r.xi.scan {
        rep.push("scan_sigma0_prime_rad_s", s.sigma0_prime)
            .push("scan_sigma0_rad_s", s.sigma0)
            .push("scan_center_nm", s.center_nm)
            .push("scan_negative_points", s.negative_points);
    }
    if let Some(s0) = r.xi.sigma0 {
        rep.push("sigma0_rad_s", s0);
    }
    rep.push("operating_point_index", op.index)
        .push("p_ave_mw", op.p_ave_mw)
        .push("c_c_per_pulse", op.coincidence.rate)
        .push("c_c_std", op.coincidence.std_error())
        .push("accidentals_per_pulse", op.coincidence.accidental)
        .push("accidental_mode", format!("{:?}", r.accidental_mode).to_lowercase())
        .push("n_t_per_pulse", op.sfwm.n_t)
        .push("raman_per_pulse", op.sfwm.raman)
        .push("r_if_per_pulse", op.sfwm.r_if)
        .push("r_if_rel_std", r.budget.rows[0].rel_r_if)
        .push("pair_rate", op.pair_rate)
        .push("eta_ts", r.eta_ts)
        .push("eta_ti", r.eta_ti)
        .push("s1_prime", r.s1_prime)
        .push("s1_prime_std", r.s1_prime_std)
        .push("s1_prime_source", if r.raman.is_some() { "raman_fit" } else { "power_sweep" })
        .push("s2", r.sweep.s2)
        .push("s2_std", r.sweep.s2_std)
        .push("sweep_reduced_chi_square", r.sweep.fit.reduced_chi_square());
    if let Some(z) = &r.zeta {
        rep.push("zeta", z.zeta).push("zeta_std", z.zeta_std);
    }
    if let Some(e) = r.eta_from_zeta {
        rep.push("eta_ut_from_zeta", e);
    }
    rep.push("multipair_bound", r.multipair_bound);
    for (name, bound) in &r.budget.systematic_bounds {
        rep.push(format!("systematic_bound_{name}"), bound);
    }
    rep.push("flag_pair_rate_exceeds_cap", r.flags.pair_rate_exceeds_cap)
        .push("flag_operating_point_fallback", r.flags.operating_point_fallback)
        .push("flag_negative_rates", r.flags.negative_rates)
        .push("flag_unphysical", r.flags.unphysical);
    rep
}

/// Named `(x, value)` series for the collection-efficiency curves, the
/// power sweep, the scan and the per-configuration results.
///
/// `signal_filter` places the configuration on the `σ_s/σ₀` axis when the
/// heralded width is known; `scan` adds the raw scan points.
pub fn calibration_plot_data(
    r: &CalibrationResult,
    signal_filter: Option<&FilterSpec>,
    scan: Option<&[ScanRecord]>,
) -> Result<Vec<Series>> {
    let mut out = Vec::new();
    let ratios = linspace(0.1, 10.0, 100);
    out.push(("xi_curve_gaussian".to_string(), xi_curve(1, &ratios)?));
    out.push(("xi_curve_supergaussian6".to_string(), xi_curve(3, &ratios)?));

    out.push((
        "idler_singles".into(),
        r.points.iter().map(|p| (p.p_ave_mw, p.sfwm.n_t)).collect(),
    ));
    let pmax = r.points.iter().map(|p| p.p_ave_mw).fold(0.0, f64::max);
    out.push((
        "idler_singles_fit".into(),
        linspace(0.0, pmax, 50)
            .into_iter()
            .map(|p| (p, r.sweep.total(r.eta_ti, p)))
            .collect(),
    ));
    let coincidence: Vec<(f64, f64)> = r
        .points
        .iter()
        .map(|p| (r.eta_ts * p.sfwm.r_if, p.coincidence.rate))
        .collect();
    out.push(("coincidence_vs_heralding".into(), coincidence.clone()));

    if let Some(records) = scan {
        out.push((
            "scan".into(),
            records
                .iter()
                .map(|s| (s.lambda_s0_prime_nm, s.true_coincidence_normalized))
                .collect(),
        ));
    }
    if let Some(d) = &r.xi.scan {
        let half = 3.0 * width_angular_to_nm(d.sigma0_prime, d.center_nm)?;
        let fit = linspace(d.center_nm - half, d.center_nm + half, 81)
            .into_iter()
            .map(|l| {
                let omega = detuning_from_wavelength(l, d.center_nm)?;
                Ok((l, d.peak.amplitude * (-(omega / d.sigma0_prime).powi(2)).exp()))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(("scan_fit".into(), fit));
    }

    out.push(("coincidence_slope".into(), coincidence));
    if let (Some(f), Some(s0)) = (signal_filter, r.xi.sigma0) {
        let x = f.width() / s0;
        let theory = xi_curve(f.order(), &ratios)?
            .into_iter()
            .map(|(x, xi)| (x, r.eta_ut * xi))
            .collect();
        out.push(("zeta_vs_ratio_theory".into(), theory));
        out.push(("zeta_vs_ratio".into(), vec![(x, r.eta_ut * r.xi.xi_s)]));
        out.push(("eta_vs_ratio".into(), vec![(x, r.eta_ut)]));
    }
    Ok(out)
}
