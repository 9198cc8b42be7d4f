//! Exact long-run click rates including dead time and afterpulsing.
//!
//! Each detector is a small chain over `(dead gates left, afterpulse armed)`;
//! the pair of detectors shares the per-gate photon events. The stationary
//! distribution of the joint chain gives the per-gate click probabilities the
//! simulator converges to.

use nalgebra::{DMatrix, DVector};

use super::{GateProbabilities, PairExperiment};
use crate::error::{domain, Error, Result};

/// Joint chains up to this size are solved directly.
const DENSE_LIMIT: usize = 1600;
const MAX_SWEEPS: usize = 500_000;

/// Calls the sink once per successor of a state with its probability.
type Step<'a> = &'a dyn Fn(usize, &mut dyn FnMut(usize, f64));

/// Long-run per-gate probabilities of the counting chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryRates {
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub coincidence_raw: f64,
    /// Signal click in one gate and idler click in the next.
    pub adjacent: f64,
}

#[derive(Clone, Copy)]
struct Local {
    dead: usize,
    afterpulse: f64,
}

impl Local {
    fn size(&self) -> usize {
        2 * (self.dead + 1)
    }

    fn live(&self, k: usize) -> bool {
        k / 2 == 0
    }

    fn armed(&self, k: usize) -> bool {
        k % 2 == 1
    }

    /// Successor states and weights, given whether this detector clicks.
    fn next(&self, k: usize, click: bool) -> [(usize, f64); 2] {
        if click {
            [(2 * self.dead + 1, self.afterpulse), (2 * self.dead, 1.0 - self.afterpulse)]
        } else if k / 2 > 0 {
            [(k - 2, 1.0), (0, 0.0)]
        } else {
            [(0, 1.0), (0, 0.0)]
        }
    }
}

/// Enumerates `(target, weight, signal click, idler click)` out of `state`.
fn transitions(
    state: usize,
    s: Local,
    i: Local,
    g: &GateProbabilities,
    mut f: impl FnMut(usize, f64, bool, bool),
) {
    let mi = i.size();
    let (ks, ki) = (state / mi, state % mi);
    let b = g.both;
    let photons = [
        ((true, true), b + (1.0 - b) * g.signal_only * g.idler_only),
        ((true, false), (1.0 - b) * g.signal_only * (1.0 - g.idler_only)),
        ((false, true), (1.0 - b) * (1.0 - g.signal_only) * g.idler_only),
        ((false, false), (1.0 - b) * (1.0 - g.signal_only) * (1.0 - g.idler_only)),
    ];
    for ((ps, pi), w) in photons {
        if w == 0.0 {
            continue;
        }
        let cs = s.live(ks) && (ps || s.armed(ks));
        let ci = i.live(ki) && (pi || i.armed(ki));
        for (ts, ws) in s.next(ks, cs) {
            for (ti, wi) in i.next(ki, ci) {
                let weight = w * ws * wi;
                if weight > 0.0 {
                    f(ts * mi + ti, weight, cs, ci);
                }
            }
        }
    }
}

fn solve_dense(n: usize, step: Step) -> Result<Vec<f64>> {
    let mut a = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        a[(x, x)] -= 1.0;
        step(x, &mut |y, w| a[(y, x)] += w);
    }
    for x in 0..n {
        a[(n - 1, x)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = a.lu().solve(&rhs).ok_or_else(|| Error::Numerical {
        message: "singular counting chain".into(),
        last_change: f64::NAN,
        steps: 0,
    })?;
    Ok(pi.iter().map(|v| v.max(0.0)).collect())
}

fn solve_iterative(n: usize, step: Step) -> Result<Vec<f64>> {
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        next.iter_mut().zip(&pi).for_each(|(nx, p)| *nx = 0.5 * p);
        for (x, &p) in pi.iter().enumerate() {
            if p > 0.0 {
                step(x, &mut |y, w| next[y] += 0.5 * p * w);
            }
        }
        change = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if change < 1e-14 {
            return Ok(pi);
        }
    }
    Err(Error::Numerical {
        message: "counting chain did not reach its stationary state".into(),
        last_change: change,
        steps: MAX_SWEEPS,
    })
}

/// Per-gate click probabilities the simulator converges to at `p_ave_mw`.
pub fn stationary_rates(experiment: &PairExperiment, p_ave_mw: f64) -> Result<StationaryRates> {
    experiment.validate()?;
    if !(p_ave_mw >= 0.0) {
        return domain("pump power must be non-negative");
    }
    let g = experiment.gate_probabilities(p_ave_mw);
    let local = |d: &super::DetectorSpec| Local {
        dead: d.dead_gates() as usize,
        afterpulse: d.afterpulse_prob,
    };
    let (s, i) = (local(&experiment.signal.detector), local(&experiment.idler.detector));
    let n = s.size() * i.size();
    let step = |x: usize, f: &mut dyn FnMut(usize, f64)| transitions(x, s, i, &g, |y, w, _, _| f(y, w));
    let pi = if n <= DENSE_LIMIT {
        solve_dense(n, &step)?
    } else {
        solve_iterative(n, &step)?
    };

    // probability that the idler clicks in the gate following state y
    let idler_click: Vec<f64> = (0..n)
        .map(|y| {
            let mut p = 0.0;
            transitions(y, s, i, &g, |_, w, _, ci| {
                if ci {
                    p += w
                }
            });
            p
        })
        .collect();

    let mut rates = StationaryRates {
        singles_signal: 0.0,
        singles_idler: 0.0,
        coincidence_raw: 0.0,
        adjacent: 0.0,
    };
    for (x, &p) in pi.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        transitions(x, s, i, &g, |y, w, cs, ci| {
            let m = p * w;
            if cs {
                rates.singles_signal += m;
                rates.adjacent += m * idler_click[y];
            }
            if ci {
                rates.singles_idler += m;
            }
            if cs && ci {
                rates.coincidence_raw += m;
            }
        });
    }
    Ok(rates)
}
