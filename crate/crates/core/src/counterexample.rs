//! Monte-Carlo check of the claimed tail bound `e * e^{-theta x}` on the double
//! supremum `sup_{a <= b <= H} rho (b - a) - S(a, b)` for i.i.d. Poisson service.
//!
//! The double supremum is the running maximum of the reflected walk
//! `N(t+1) = max(N(t) + rho - s_t, 0)`; `N(H)` alone is the single-window
//! statistic that does satisfy `P(N(H) >= x) <= e^{-theta x}`.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sim::stream_rng;

const CHUNK: u64 = 5_000;
pub const MIN_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleConfig {
    pub service_mean: f64,
    pub theta_star: f64,
    pub horizons: Vec<u64>,
    pub x_grid: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            service_mean: 1.0,
            theta_star: 0.5,
            horizons: vec![50, 100, 200],
            x_grid: (0..=40).map(|k| k as f64 * 0.25).collect(),
            trials: 100_000,
            seed: 1,
        }
    }
}

impl CounterexampleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.service_mean > 0.0 && self.service_mean.is_finite()) {
            return Err(Error::Config("service mean must be positive".into()));
        }
        if !(self.theta_star > 0.0 && self.theta_star.is_finite()) {
            return Err(Error::InvalidTheta(self.theta_star));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be positive".into()));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::Config(format!(
                "at least {MIN_TRIALS} trials required, got {}",
                self.trials
            )));
        }
        Ok(())
    }

    /// `rho_S(theta*) = -ln E[e^{-theta* s}] / theta* = mean (1 - e^{-theta*}) / theta*`.
    pub fn rho(&self) -> f64 {
        -self.service_mean * (-self.theta_star).exp_m1() / self.theta_star
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleRow {
    pub x: f64,
    pub horizon: u64,
    /// Frequency of the double supremum reaching `x`.
    pub empirical: f64,
    pub stderr: f64,
    pub claimed_bound: f64,
    pub sound_bound: f64,
    /// Frequency of `N(H) >= x`, the statistic the sound bound covers.
    pub sound_empirical: f64,
    pub sound_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleResult {
    pub rho: f64,
    pub rows: Vec<CounterexampleRow>,
}

/// Running maximum of the reflected walk after each slot; index `t` holds the
/// supremum over windows ending at or before `t`.
pub fn online_sup(service: &[u64], rho: f64) -> Vec<f64> {
    let mut n = 0.0f64;
    let mut best = 0.0f64;
    let mut out = Vec::with_capacity(service.len() + 1);
    out.push(0.0);
    for &s in service {
        n = (n + rho - s as f64).max(0.0);
        best = best.max(n);
        out.push(best);
    }
    out
}

/// `max_{0 <= a <= b <= H} rho (b - a) - S(a, b)` by enumeration.
pub fn brute_force_sup(service: &[u64], rho: f64) -> f64 {
    let h = service.len();
    let mut best = 0.0f64;
    for a in 0..=h {
        let mut s = 0u64;
        for b in a..=h {
            if b > a {
                s += service[b - 1];
            }
            best = best.max(rho * (b - a) as f64 - s as f64);
        }
    }
    best
}

pub fn run_counterexample(cfg: &CounterexampleConfig) -> Result<CounterexampleResult> {
    cfg.validate()?;
    let rho = cfg.rho();
    let mut horizons = cfg.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    let h_max = *horizons.last().expect("nonempty");
    let nx = cfg.x_grid.len();
    let nh = horizons.len();
    let poisson = Poisson::new(cfg.service_mean).map_err(|e| Error::Config(e.to_string()))?;

    let chunks = cfg.trials.div_ceil(CHUNK);
    // [horizon][x] counts for the double supremum and for N(H)
    let (sup_counts, end_counts) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(cfg.seed, chunk, 0);
            let mut sup = vec![0u64; nh * nx];
            let mut end = vec![0u64; nh * nx];
            let todo = CHUNK.min(cfg.trials - chunk * CHUNK);
            for _ in 0..todo {
                let mut n = 0.0f64;
                let mut best = 0.0f64;
                let mut next = 0;
                for t in 1..=h_max {
                    let s: f64 = poisson.sample(&mut rng);
                    n = (n + rho - s).max(0.0);
                    best = best.max(n);
                    if t == horizons[next] {
                        for (k, &x) in cfg.x_grid.iter().enumerate() {
                            if best >= x {
                                sup[next * nx + k] += 1;
                            }
                            if n >= x {
                                end[next * nx + k] += 1;
                            }
                        }
                        next += 1;
                    }
                }
            }
            (sup, end)
        })
        .reduce(
            || (vec![0u64; nh * nx], vec![0u64; nh * nx]),
            |(mut a, mut b), (c, d)| {
                a.iter_mut().zip(c).for_each(|(x, y)| *x += y);
                b.iter_mut().zip(d).for_each(|(x, y)| *x += y);
                (a, b)
            },
        );

    let trials = cfg.trials as f64;
    let freq = |c: u64| {
        let p = c as f64 / trials;
        (p, (p * (1.0 - p) / trials).sqrt())
    };
    let mut rows = Vec::with_capacity(nh * nx);
    for (hi, &horizon) in horizons.iter().enumerate() {
        for (k, &x) in cfg.x_grid.iter().enumerate() {
            let (empirical, stderr) = freq(sup_counts[hi * nx + k]);
            let (sound_empirical, sound_stderr) = freq(end_counts[hi * nx + k]);
            let sound_bound = (-cfg.theta_star * x).exp();
            rows.push(CounterexampleRow {
                x,
                horizon,
                empirical,
                stderr,
                claimed_bound: std::f64::consts::E * sound_bound,
                sound_bound,
                sound_empirical,
                sound_stderr,
            });
        }
    }
    Ok(CounterexampleResult { rho, rows })
}
