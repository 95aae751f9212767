use rayon::prelude::*;

use crate::error::Result;
use crate::mmp::{characterize_arrival, Mmp};

use super::sampler::{stream_rng, MmpSampler};

const CHUNK: u64 = 10_000;

/// Sample mean of `M(theta, u - tau, v)` for one `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauMean {
    pub tau: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Monte-Carlo estimate of `E[e^{theta A(u - tau, u) - theta rho tau} nu_{X(u - tau)}]`
/// for `tau = 0..=tau_max`, with `X(u)` drawn from the stationary law and the
/// chain walked backwards.
pub fn martingale_empirical_check(
    mmp: &Mmp,
    theta: f64,
    tau_max: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<TauMean>> {
    let c = characterize_arrival(mmp, theta)?;
    let chunks = trials.div_ceil(CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut s = MmpSampler::reversed(mmp, stream_rng(seed, chunk, 0));
            let mut acc = vec![(0.0f64, 0.0f64); tau_max + 1];
            let todo = CHUNK.min(trials - chunk * CHUNK);
            for trial in 0..todo {
                if trial > 0 {
                    s.redraw_state();
                }
                let mut log_m = 0.0;
                for (tau, slot) in acc.iter_mut().enumerate() {
                    if tau > 0 {
                        let a = s.step_raw();
                        log_m += theta * a - c.log_lambda;
                    }
                    let m = log_m.exp() * c.nu[s.state()];
                    slot.0 += m;
                    slot.1 += m * m;
                }
            }
            acc
        })
        .reduce(
            || vec![(0.0, 0.0); tau_max + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 += y.0;
                    x.1 += y.1;
                }
                a
            },
        );
    let n = trials as f64;
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(tau, (s, s2))| {
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0);
            TauMean {
                tau,
                mean,
                stderr: (var / n).sqrt(),
            }
        })
        .collect())
}
