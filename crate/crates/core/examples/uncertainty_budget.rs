//! Uncertainty budget for a single measurement and for five configurations
//! with different Raman backgrounds, checked against Monte Carlo resampling.

use heralded_qe::uncertainty::{
    budget_report, mc_resample_oracle, propagate_all, propagate_rif, raman_ratio_for_rif_deviation,
    UncertaintyInputs,
};

fn main() -> heralded_qe::Result<()> {
    let first = UncertaintyInputs::typical(0.1, 83.5, 0.18, 8.0e-4).with_xi_s(0.04);
    println!(
        "single run: dR_iF/R_iF = {:.2}%, deta/eta = {:.2}%",
        100.0 * propagate_rif(&first)?.relative,
        100.0 * propagate_all(&first)?
    );
    let mc = mc_resample_oracle(&first, 200_000, 1)?;
    println!("  resampled {:.2}% (formula {:.2}%)", 100.0 * mc.relative_deviation, 100.0 * mc.formula);

    let base = UncertaintyInputs::typical(0.1, 83.5, 0.3, 1e-3).with_xi_s(0.015);
    let mut configs = Vec::new();
    for target in [0.0785, 0.0737, 0.0894, 0.0975, 0.0827] {
        let ratio = raman_ratio_for_rif_deviation(&base, target)?;
        configs.push((format!("raman/sfwm {ratio:.3}"), base.with_raman_ratio(ratio)?));
    }
    let report = budget_report(&configs)?;
    for row in &report.rows {
        println!("{:<18} dR/R {:>5.2}%  deta/eta {:>5.2}%", row.label, 100.0 * row.rel_r_if, 100.0 * row.rel_eta);
    }
    println!("mean of five: {:.2}%", 100.0 * report.mean_combined);
    for (name, bound) in &report.systematic_bounds {
        println!("unpropagated {name}: < {:.1}%", 100.0 * bound);
    }
    Ok(())
}
