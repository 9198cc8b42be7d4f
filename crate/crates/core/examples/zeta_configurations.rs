//! Five signal/idler filter pairs: collection efficiency from the analytic
//! spectral model, the coincidence slope it predicts and the efficiency
//! recovered from a measured slope.

use heralded_qe::pipeline::{qe_from_zeta, XiSource};
use heralded_qe::jsa::SpectralModel;
use heralded_qe::spectral::{width_nm_to_angular, FilterSpec};

fn main() -> heralded_qe::Result<()> {
    let eta = 0.1226;
    let model = SpectralModel::Analytic {
        sigma_p: width_nm_to_angular(0.18, 1544.0)?,
    };
    // (signal half-width nm, idler half-width nm, measured slope)
    let configs = [(0.60, 0.09, 0.123), (0.60, 0.27, 0.115), (0.60, 0.46, 0.106), (0.60, 0.66, 0.086), (0.36, 0.66, 0.058)];
    println!("{:>8} {:>8} {:>8} {:>10} {:>10} {:>8}", "sig nm", "idl nm", "xi_s", "zeta pred", "zeta meas", "eta");
    let mut sum = 0.0;
    for (s, i, measured) in configs {
        let xi = XiSource::Model {
            model,
            signal_filter: FilterSpec::super_gaussian6_nm(1550.7, s)?,
            idler_filter: FilterSpec::gaussian_nm(1537.4, i)?,
            rel_std: 0.015,
        }
        .evaluate()?;
        let e = qe_from_zeta(measured, xi.xi_s)?;
        sum += e;
        println!("{s:>8.2} {i:>8.2} {:>8.4} {:>10.4} {measured:>10.3} {e:>8.4}", xi.xi_s, xi.xi_s * eta);
    }
    println!("mean eta {:.4}", sum / configs.len() as f64);
    Ok(())
}
