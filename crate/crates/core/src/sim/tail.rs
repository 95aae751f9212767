use crate::bounds::Metric;
use crate::error::{Error, Result};

use super::{SimResult, Tails};

/// Empirical violation frequencies with binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTail {
    pub samples: u64,
    pub probability: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Spread of the per-replication frequencies.
    pub rep_min: Vec<f64>,
    pub rep_max: Vec<f64>,
}

impl EmpiricalTail {
    pub fn from_counts(counts: &[u64], samples: u64) -> Result<Self> {
        Self::with_replications(counts, samples, &[])
    }

    fn with_replications(counts: &[u64], samples: u64, reps: &[(&[u64], u64)]) -> Result<Self> {
        if samples == 0 {
            return Err(Error::ZeroSamples);
        }
        let n = samples as f64;
        let probability: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let stderr = probability
            .iter()
            .map(|&p| (p * (1.0 - p) / n).sqrt())
            .collect();
        let mut rep_min = probability.clone();
        let mut rep_max = probability.clone();
        if !reps.is_empty() {
            for k in 0..counts.len() {
                let freqs = reps.iter().map(|(c, s)| {
                    let x = c.get(k).copied().unwrap_or(0);
                    if *s == 0 {
                        0.0
                    } else {
                        x as f64 / *s as f64
                    }
                });
                let (lo, hi) = freqs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                    (a.min(x), b.max(x))
                });
                rep_min[k] = lo;
                rep_max[k] = hi;
            }
        }
        Ok(EmpiricalTail {
            samples,
            probability,
            stderr,
            rep_min,
            rep_max,
        })
    }

    /// `(probability, stderr)` at `value`; zero beyond the largest observation.
    pub fn at(&self, value: u64) -> (f64, f64) {
        let k = value as usize;
        match (self.probability.get(k), self.stderr.get(k)) {
            (Some(&p), Some(&s)) => (p, s),
            _ => (0.0, 0.0),
        }
    }

    /// One-sided 95% upper bound on a frequency that was never observed.
    pub fn rule_of_three(&self) -> f64 {
        3.0 / self.samples as f64
    }

    /// Least value whose frequency is at most `epsilon`.
    pub fn quantile(&self, epsilon: f64) -> u64 {
        self.probability
            .iter()
            .position(|&p| p <= epsilon)
            .unwrap_or(self.probability.len()) as u64
    }
}

fn pick(t: &Tails, metric: Metric) -> &[u64] {
    match metric {
        Metric::Delay => &t.delay_tail,
        Metric::Backlog => &t.backlog_tail,
    }
}

pub fn empirical_tail(result: &SimResult, metric: Metric) -> Result<EmpiricalTail> {
    let reps: Vec<(&[u64], u64)> = result
        .replications
        .iter()
        .map(|r| (pick(r, metric), r.samples))
        .collect();
    EmpiricalTail::with_replications(pick(&result.total, metric), result.total.samples, &reps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_to_frequencies() {
        let t = EmpiricalTail::from_counts(&[100, 10, 1], 100).unwrap();
        assert_eq!(t.probability, vec![1.0, 0.1, 0.01]);
        assert_eq!(t.stderr[0], 0.0);
        assert!((t.stderr[1] - (0.1f64 * 0.9 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(t.at(7), (0.0, 0.0));
        assert_eq!(t.rule_of_three(), 0.03);
        assert_eq!(t.quantile(0.05), 2);
        assert_eq!(t.quantile(1e-6), 3);
    }

    #[test]
    fn zero_samples() {
        assert!(matches!(
            EmpiricalTail::from_counts(&[], 0),
            Err(Error::ZeroSamples)
        ));
    }

    #[test]
    fn replication_spread() {
        let a = Tails {
            delay_tail: vec![10, 5],
            backlog_tail: vec![10],
            samples: 10,
        };
        let b = Tails {
            delay_tail: vec![10, 1, 1],
            backlog_tail: vec![10],
            samples: 10,
        };
        let total = Tails {
            delay_tail: vec![20, 6, 1],
            backlog_tail: vec![20],
            samples: 20,
        };
        let r = SimResult {
            total,
            replications: vec![a, b],
        };
        let t = empirical_tail(&r, Metric::Delay).unwrap();
        assert_eq!(t.rep_min, vec![1.0, 0.1, 0.0]);
        assert_eq!(t.rep_max, vec![1.0, 0.5, 0.1]);
    }
}
