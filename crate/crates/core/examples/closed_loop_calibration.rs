//! Simulate a detector of known efficiency, run the full calibration on the
//! counts and compare the recovered efficiency with the truth.

use heralded_qe::config::demo_config;
use heralded_qe::pipeline::{calibrate, XiSource};
use heralded_qe::simulator::simulate_power_sweep;

fn main() -> heralded_qe::Result<()> {
    let mut cfg = demo_config();
    cfg.signal_detector.quantum_efficiency = 0.12;
    cfg.run.pair_rate_cap = 0.02;
    let exp = cfg.experiment()?;
    let gates = 1_000_000_000;
    let counts = simulate_power_sweep(&exp, &cfg.run.powers_mw, gates, 7)?;
    let raman = simulate_power_sweep(&exp.raman_only(), cfg.raman_powers(), gates, 8)?;

    let setup = cfg.calibration_setup()?;
    let xi = XiSource::Fixed {
        xi_s: exp.xi_s,
        rel_std: 0.04,
    };
    let r = calibrate(&setup, &counts, Some(&raman), &xi)?;
    println!("true eta       {:.4}", cfg.signal_detector.quantum_efficiency);
    println!("recovered eta  {:.4} +- {:.4} (counting)", r.eta_ut, r.eta_stat_std);
    println!("               +- {:.4} (full budget)", r.eta_std);
    println!("from zeta fit  {:.4}", r.eta_from_zeta.unwrap_or(f64::NAN));
    println!("operating point {:.2} mW, {:.4} pairs/pulse", r.operating.p_ave_mw, r.operating.pair_rate);
    println!("s1' = {:.2} +- {:.2}", r.s1_prime, r.s1_prime_std);
    Ok(())
}
