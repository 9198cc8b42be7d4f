//! Regenerates the packaged replica dataset in `data/replica/`: the demo
//! configuration, its power sweep, the Raman-only run, a scan of the signal
//! filter and a narrow-filter Raman run.

use std::path::PathBuf;

use heralded_qe::config::demo_config;
use heralded_qe::io::{atomic_write, write_counts, write_scan};
use heralded_qe::jsa::synthetic_scan;
use heralded_qe::quadrature::linspace;
use heralded_qe::simulator::simulate_power_sweep;
use heralded_qe::spectral::width_nm_to_angular;

fn main() -> heralded_qe::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/replica");
    std::fs::create_dir_all(&dir)?;
    let cfg = demo_config();
    atomic_write(&dir.join("config.toml"), cfg.to_toml()?.as_bytes())?;

    let exp = cfg.experiment()?;
    let gates = cfg.run.gates_per_point;
    let counts = simulate_power_sweep(&exp, &cfg.run.powers_mw, gates, cfg.run.seed)?;
    write_counts(&dir.join("counts.csv"), &counts)?;
    let raman = simulate_power_sweep(&exp.raman_only(), cfg.raman_powers(), gates, cfg.run.seed + 1)?;
    write_counts(&dir.join("raman.csv"), &raman)?;

    let center = cfg.signal_filter.center_nm;
    let scan = synthetic_scan(
        center,
        width_nm_to_angular(0.73, center)?,
        2.0e-4,
        &linspace(center - 2.0, center + 2.0, 21),
        cfg.signal_channel.transmission,
    )?;
    write_scan(&dir.join("scan.csv"), &scan)?;

    // 0.15 nm idler filter with s1' = 11.93
    let mut narrow = cfg.clone();
    narrow.idler_filter.fwhm_nm = Some(0.15);
    narrow.source.s1_per_mw = 11.93 / narrow.idler_detector.quantum_efficiency;
    let narrow_exp = narrow.experiment()?.raman_only();
    let narrow_counts = simulate_power_sweep(&narrow_exp, narrow.raman_powers(), gates, cfg.run.seed + 2)?;
    write_counts(&dir.join("raman_narrow.csv"), &narrow_counts)?;

    println!("wrote replica dataset to {}", dir.display());
    Ok(())
}
