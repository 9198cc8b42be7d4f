//! Simulate the demo power sweep and compare every count with the
//! stationary rates of the counting chain and with the dead-time-free
//! closed form.

use std::time::Instant;

use heralded_qe::config::demo_config;
use heralded_qe::simulator::{expected_rates, simulate_power_sweep, stationary_rates};

fn main() -> heralded_qe::Result<()> {
    let cfg = demo_config();
    let exp = cfg.experiment()?;
    let gates = 500_000_000;
    let start = Instant::now();
    let records = simulate_power_sweep(&exp, &cfg.run.powers_mw, gates, cfg.run.seed)?;
    println!("{} points x {gates} gates in {:.2} s", records.len(), start.elapsed().as_secs_f64());

    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>10} {:>10}",
        "P mW", "idler", "chain", "no dead", "coinc", "chain"
    );
    for r in &records {
        let chain = stationary_rates(&exp, r.p_ave_mw)?;
        let free = expected_rates(&exp, r.p_ave_mw)?;
        let g = r.gates as f64;
        println!(
            "{:>6.2} {:>12} {:>12.0} {:>12.0} {:>10} {:>10.0}",
            r.p_ave_mw,
            r.singles_idler,
            chain.singles_idler * g,
            free.singles_idler * g,
            r.coincidences_raw,
            chain.coincidence_raw * g
        );
    }
    Ok(())
}
