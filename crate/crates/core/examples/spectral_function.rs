//! Two-photon spectral function of a dispersion-shifted fiber and the
//! heralded signal spectrum it implies, compared with the phase-matched
//! closed form.

use heralded_qe::config::demo_config;
use heralded_qe::jsa::{
    analytic_conditional_width, conditional_spectrum, spectral_intensity, symmetric_grid, SpectralFunctionParams,
    SpectralModel,
};
use heralded_qe::spectral::{width_angular_to_nm, FilterSpec};

fn main() -> heralded_qe::Result<()> {
    let cfg = demo_config();
    let pump = cfg.pump_spec()?;
    let fiber = cfg.fiber_spec()?.expect("demo config has a fiber");
    let params = SpectralFunctionParams::new(fiber, pump, cfg.signal_filter.center_nm)?;

    let sigma_p = pump.sigma;
    println!("pump 1/e half-width {:.3e} rad/s", sigma_p);
    println!("|F|^2 along the anti-diagonal (signal = -idler):");
    for k in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let w = k * sigma_p;
        println!("  {k:+.1} sigma_p  {:.4e}", spectral_intensity(&params, w, -w)?);
    }

    println!("\nheralded width for Gaussian idler filters:");
    println!("{:>10} {:>14} {:>14}", "idler nm", "analytic nm", "full nm");
    for width_nm in [0.09, 0.27, 0.46, 0.66] {
        let idler = FilterSpec::gaussian_nm(cfg.idler_filter.center_nm, width_nm)?;
        let analytic = analytic_conditional_width(sigma_p, idler.width())?;
        let grid = symmetric_grid(6.0 * analytic, 201);
        let full = conditional_spectrum(&SpectralModel::Full(params), &idler, &grid)?.width();
        let center = cfg.signal_filter.center_nm;
        println!(
            "{width_nm:>10.2} {:>14.4} {:>14.4}",
            width_angular_to_nm(analytic, center)?,
            width_angular_to_nm(full, center)?
        );
    }
    Ok(())
}
