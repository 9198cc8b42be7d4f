//! Bias from multi-pair emission and the continuous-wave reference
//! measurement of the same detector.

use heralded_qe::pipeline::{cw_click_probability, cw_reference_qe, multipair_ratio, MultiPairParams};

fn main() -> heralded_qe::Result<()> {
    println!("{:>8} {:>10} {:>10}", "pairs", "ratio", "1 + n");
    for n in [0.001, 0.005, 0.01, 0.02, 0.03, 0.05] {
        let r = multipair_ratio(&MultiPairParams::new(n, 0.01, 0.01)?);
        println!("{n:>8.3} {r:>10.5} {:>10.5}", 1.0 + n);
    }

    // 0.1 photons per 2.5 ns gate, 0.62 ns effective gate width
    let p = cw_click_probability(0.117, 0.1, 2.5, 0.62)?;
    println!("\ncw click probability at eta = 0.117: {p:.4e}");
    println!("inverted: eta = {:.4}", cw_reference_qe(0.1, 2.5, 0.62, p)?);
    Ok(())
}
