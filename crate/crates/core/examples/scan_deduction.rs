//! Recover the heralded spectral width from a scan of the signal filter
//! center, with and without counting noise.

use heralded_qe::jsa::{deduce_sigma0_from_scan, synthetic_scan, ScanRecord};
use heralded_qe::quadrature::linspace;
use heralded_qe::spectral::{width_angular_to_nm, width_nm_to_angular, width_param_from_fwhm, FilterSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn main() -> heralded_qe::Result<()> {
    let center = 1550.7;
    let filter = FilterSpec::gaussian_nm(center, width_param_from_fwhm(0.60, 1)?)?;
    let sigma0_prime = width_nm_to_angular(0.73, center)?;
    let wavelengths = linspace(center - 2.0, center + 2.0, 21);
    let clean = synthetic_scan(center, sigma0_prime, 2.0e-4, &wavelengths, 0.1)?;

    let d = deduce_sigma0_from_scan(&clean, &filter)?;
    println!(
        "noiseless: sigma0' = {:.4} nm, sigma0 = {:.4} nm, xi_s = {:.4}",
        width_angular_to_nm(d.sigma0_prime, center)?,
        width_angular_to_nm(d.sigma0, center)?,
        d.xi_s
    );

    // 10^8 gates per point, Poisson counts rescaled back to a rate
    let gates = 1.0e8;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noisy: Vec<ScanRecord> = clean
        .iter()
        .map(|r| {
            let mean = r.true_coincidence_normalized * r.eta_ts_at_point * gates;
            let n = Poisson::new(mean).map(|p| p.sample(&mut rng)).unwrap_or(0.0);
            ScanRecord {
                true_coincidence_normalized: n / (r.eta_ts_at_point * gates),
                ..*r
            }
        })
        .collect();
    let d = deduce_sigma0_from_scan(&noisy, &filter)?;
    println!(
        "noisy:     sigma0 = {:.4} nm, xi_s = {:.4} +- {:.4}",
        width_angular_to_nm(d.sigma0, center)?,
        d.xi_s,
        d.xi_s_std
    );
    Ok(())
}
