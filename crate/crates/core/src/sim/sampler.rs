use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::mmp::{EmissionDist, Mmp};

/// Independent, reproducible stream for one process of one replication.
pub fn stream_rng(seed: u64, replication: u64, process: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replication << 32) | process);
    rng
}

#[derive(Debug, Clone)]
enum Draw {
    Constant(f64),
    Bernoulli { value: f64, prob: f64 },
    Poisson(Poisson<f64>),
}

impl Draw {
    fn new(e: &EmissionDist) -> Self {
        match *e {
            EmissionDist::Constant { value } => Draw::Constant(value),
            EmissionDist::ScaledBernoulli { value, prob } => Draw::Bernoulli { value, prob },
            EmissionDist::Poisson { mean } => {
                Draw::Poisson(Poisson::new(mean).expect("validated Poisson mean"))
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Draw::Constant(v) => *v,
            Draw::Bernoulli { value, prob } => {
                if rng.random::<f64>() < *prob {
                    *value
                } else {
                    0.0
                }
            }
            Draw::Poisson(p) => p.sample(rng),
        }
    }
}

/// Slot-by-slot sampler of an MMP: each call moves the chain one step, then
/// draws the emission of the new state.
///
/// Non-integer emissions go through a credit accumulator so that integer
/// amounts are released and no data is lost.
#[derive(Debug, Clone)]
pub struct MmpSampler {
    pi_cum: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
    draws: Vec<Draw>,
    state: usize,
    credit: f64,
    rng: ChaCha8Rng,
}

fn cumulative_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| {
            let mut acc = 0.0;
            r.into_iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect()
        })
        .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.iter()
        .position(|&c| u < c)
        .unwrap_or_else(|| cum.iter().rposition(|&c| c > 0.0).unwrap_or(0))
}

impl MmpSampler {
    /// Starts from a state drawn from the stationary distribution.
    pub fn new(mmp: &Mmp, rng: ChaCha8Rng) -> Self {
        Self::build(mmp, mmp.transition().rows(), rng)
    }

    /// Same, but walking the time-reversed chain.
    pub fn reversed(mmp: &Mmp, rng: ChaCha8Rng) -> Self {
        Self::build(mmp, mmp.reversed().rows(), rng)
    }

    fn build(mmp: &Mmp, rows: Vec<Vec<f64>>, mut rng: ChaCha8Rng) -> Self {
        let pi_cum = cumulative_rows(vec![mmp.stationary().to_vec()]).remove(0);
        let state = pick(&pi_cum, rng.random::<f64>());
        MmpSampler {
            pi_cum,
            cumulative: cumulative_rows(rows),
            draws: mmp.emissions().iter().map(Draw::new).collect(),
            state,
            credit: 0.0,
            rng,
        }
    }

    /// Draws a fresh state from the stationary distribution and clears the credit.
    pub fn redraw_state(&mut self) {
        self.state = pick(&self.pi_cum, self.rng.random::<f64>());
        self.credit = 0.0;
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Advances the chain and returns the raw emission of the new state.
    pub fn step_raw(&mut self) -> f64 {
        if self.cumulative.len() > 1 {
            let u = self.rng.random::<f64>();
            self.state = pick(&self.cumulative[self.state], u);
        }
        self.draws[self.state].sample(&mut self.rng)
    }

    /// Advances the chain and returns an integer amount of data.
    pub fn step(&mut self) -> u64 {
        let x = self.step_raw();
        if x.fract() == 0.0 && self.credit == 0.0 {
            return x as u64;
        }
        self.credit += x;
        let out = self.credit.floor();
        self.credit -= out;
        out as u64
    }
}
