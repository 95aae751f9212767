//! Slotted Monte-Carlo simulation of a tandem network, measuring the virtual
//! delay and the backlog of flow 1.
//!
//! Per slot: every arrival process emits, then servers run from 1 to n; data
//! leaving server `j` is offered to server `j + 1` within the same slot.

mod lemma;
mod sampler;
mod tail;

use std::collections::VecDeque;

use rayon::prelude::*;

pub use lemma::{martingale_empirical_check, TauMean};
pub use sampler::{stream_rng, MmpSampler};
pub use tail::{empirical_tail, EmpiricalTail};

use crate::error::{Error, Result};
use crate::mmp::{EmissionDist, Mmp};
use crate::network::{ServiceModel, TandemNetwork};

/// Extra slots allowed after the horizon for in-flight samples to leave.
const DRAIN_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// Cross traffic is served before flow 1 at every server.
    #[default]
    CrossPriority,
    /// One FIFO queue per server over all flows.
    FifoAggregate,
}

impl Policy {
    pub fn label(&self) -> &'static str {
        match self {
            Policy::CrossPriority => "cross_priority",
            Policy::FifoAggregate => "fifo_aggregate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Total slots per replication, warmup included.
    pub steps: u64,
    pub seed: u64,
    pub policy: Policy,
    pub replications: usize,
    /// Leading slots that are simulated but not measured.
    pub warmup: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            steps: 1_000_000,
            seed: 1,
            policy: Policy::CrossPriority,
            replications: 1,
            warmup: 10_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.steps < self.warmup {
            return Err(Error::Config(format!(
                "steps ({}) must be positive and at least warmup ({})",
                self.steps, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tail counts: `delay_tail[T]` = number of sampled slots with delay >= T.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tails {
    pub delay_tail: Vec<u64>,
    pub backlog_tail: Vec<u64>,
    pub samples: u64,
}

impl Tails {
    fn from_histograms(delay: &[u64], backlog: &[u64], samples: u64) -> Self {
        Tails {
            delay_tail: suffix_sums(delay),
            backlog_tail: suffix_sums(backlog),
            samples,
        }
    }

    fn merge(&mut self, other: &Tails) -> Result<()> {
        add_into(&mut self.delay_tail, &other.delay_tail)?;
        add_into(&mut self.backlog_tail, &other.backlog_tail)?;
        self.samples = self
            .samples
            .checked_add(other.samples)
            .ok_or(Error::CounterOverflow)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    pub total: Tails,
    pub replications: Vec<Tails>,
}

impl SimResult {
    pub fn samples(&self) -> u64 {
        self.total.samples
    }
}

fn suffix_sums(hist: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; hist.len()];
    let mut acc = 0u64;
    for k in (0..hist.len()).rev() {
        acc += hist[k];
        out[k] = acc;
    }
    out
}

fn add_into(acc: &mut Vec<u64>, x: &[u64]) -> Result<()> {
    if acc.len() < x.len() {
        acc.resize(x.len(), 0);
    }
    for (a, b) in acc.iter_mut().zip(x) {
        *a = a.checked_add(*b).ok_or(Error::CounterOverflow)?;
    }
    Ok(())
}

fn bump(hist: &mut Vec<u64>, k: u64) {
    let k = k as usize;
    if hist.len() <= k {
        hist.resize(k + 1, 0);
    }
    hist[k] += 1;
}

/// Runs all replications (in parallel) and merges them in replication order.
pub fn simulate(net: &TandemNetwork, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let reps = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(net, cfg, r as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut total = Tails::default();
    for r in &reps {
        total.merge(r)?;
    }
    Ok(SimResult {
        total,
        replications: reps,
    })
}

struct Engine {
    n: usize,
    /// (first, last) per flow, flow 1 at position 0
    paths: Vec<(usize, usize)>,
    arrivals: Vec<MmpSampler>,
    services: Vec<MmpSampler>,
    policy: Policy,
    /// per-server, per-flow queued amounts (cross-priority)
    counts: Vec<Vec<u64>>,
    /// per-server FIFO of (flow, amount)
    fifos: Vec<VecDeque<(usize, u64)>>,
    a1: u64,
    d1: u64,
    scratch: Vec<u64>,
    forward: Vec<u64>,
    served: Vec<u64>,
}

impl Engine {
    fn new(net: &TandemNetwork, cfg: &SimConfig, rep: u64) -> Self {
        let m = net.flows().len();
        let n = net.n_servers();
        let arrivals = net
            .flows()
            .iter()
            .enumerate()
            .map(|(k, f)| MmpSampler::new(&f.arrival, stream_rng(cfg.seed, rep, k as u64)))
            .collect();
        let services = net
            .servers()
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let mmp = match s {
                    ServiceModel::ConstantRate { rate } => {
                        Mmp::iid(EmissionDist::Constant { value: *rate }).expect("valid rate")
                    }
                    ServiceModel::Markov { mmp } => mmp.clone(),
                };
                MmpSampler::new(&mmp, stream_rng(cfg.seed, rep, (m + j) as u64))
            })
            .collect();
        Engine {
            n,
            paths: net.flows().iter().map(|f| (f.first, f.last)).collect(),
            arrivals,
            services,
            policy: cfg.policy,
            counts: vec![vec![0; m]; n],
            fifos: vec![VecDeque::new(); n],
            a1: 0,
            d1: 0,
            scratch: vec![0; m],
            forward: vec![0; m],
            served: vec![0; m],
        }
    }

    fn slot(&mut self) -> Result<()> {
        let m = self.paths.len();
        let mut fresh = std::mem::take(&mut self.scratch);
        for (k, a) in self.arrivals.iter_mut().enumerate() {
            fresh[k] = a.step();
        }
        self.a1 = self
            .a1
            .checked_add(fresh[0])
            .ok_or(Error::CounterOverflow)?;
        self.forward.iter_mut().for_each(|x| *x = 0);

        for j in 1..=self.n {
            let q = j - 1;
            // forwarded data is queued ahead of data entering the network here
            for k in 0..m {
                let fwd = self.forward[k];
                let new = if self.paths[k].0 == j { fresh[k] } else { 0 };
                match self.policy {
                    Policy::CrossPriority => self.counts[q][k] += fwd + new,
                    Policy::FifoAggregate if fwd > 0 => self.fifos[q].push_back((k, fwd)),
                    Policy::FifoAggregate => {}
                }
            }
            if self.policy == Policy::FifoAggregate {
                for k in 0..m {
                    if self.paths[k].0 == j && fresh[k] > 0 {
                        self.fifos[q].push_back((k, fresh[k]));
                    }
                }
            }
            self.forward.iter_mut().for_each(|x| *x = 0);

            let mut budget = self.services[q].step();
            let served = &mut self.served;
            served.iter_mut().for_each(|x| *x = 0);
            match self.policy {
                Policy::CrossPriority => {
                    for k in (1..m).chain(std::iter::once(0)) {
                        let take = self.counts[q][k].min(budget);
                        self.counts[q][k] -= take;
                        served[k] += take;
                        budget -= take;
                    }
                }
                Policy::FifoAggregate => {
                    while budget > 0 {
                        let Some(front) = self.fifos[q].front_mut() else {
                            break;
                        };
                        let take = front.1.min(budget);
                        front.1 -= take;
                        served[front.0] += take;
                        budget -= take;
                        if front.1 == 0 {
                            self.fifos[q].pop_front();
                        }
                    }
                }
            }
            for k in 0..m {
                let out = self.served[k];
                if out == 0 {
                    continue;
                }
                if self.paths[k].1 != j {
                    self.forward[k] = out;
                } else if k == 0 {
                    self.d1 = self.d1.checked_add(out).ok_or(Error::CounterOverflow)?;
                }
            }
        }
        self.scratch = fresh;
        Ok(())
    }
}

fn run_replication(net: &TandemNetwork, cfg: &SimConfig, rep: u64) -> Result<Tails> {
    let mut e = Engine::new(net, cfg, rep);
    let mut delay_hist = Vec::new();
    let mut backlog_hist = Vec::new();
    let mut pending: VecDeque<(u64, u64)> = VecDeque::new();
    let mut samples = 0u64;

    let mut t = 0u64;
    loop {
        let measuring = t >= cfg.warmup && t < cfg.steps;
        if t >= cfg.steps && pending.is_empty() {
            break;
        }
        if t >= cfg.steps + DRAIN_CAP {
            // censored: count what is known, delay >= t - t0
            for (t0, _) in pending.drain(..) {
                bump(&mut delay_hist, t - t0);
            }
            break;
        }
        // virtual delay: d(t) = inf{T : A(0,t) <= D(0,t+T)}
        if measuring {
            pending.push_back((t, e.a1));
            samples += 1;
        }
        while let Some(&(t0, a)) = pending.front() {
            if a > e.d1 {
                break;
            }
            bump(&mut delay_hist, t - t0);
            pending.pop_front();
        }
        e.slot()?;
        if measuring {
            bump(&mut backlog_hist, e.a1 - e.d1);
        }
        t += 1;
    }
    Ok(Tails::from_histograms(&delay_hist, &backlog_hist, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::network::FlowSpec;

    fn single(arrival: EmissionDist, rate: f64) -> TandemNetwork {
        TandemNetwork::new(
            vec![ServiceModel::ConstantRate { rate }],
            vec![FlowSpec {
                id: 1,
                first: 1,
                last: 1,
                arrival: Mmp::iid(arrival).unwrap(),
            }],
        )
        .unwrap()
    }

    fn cfg(steps: u64, policy: Policy) -> SimConfig {
        SimConfig {
            steps,
            seed: 11,
            policy,
            replications: 2,
            warmup: 100,
        }
    }

    #[test]
    fn underloaded_deterministic() {
        let net = single(EmissionDist::Constant { value: 1.0 }, 2.0);
        let r = simulate(&net, &cfg(5_000, Policy::CrossPriority)).unwrap();
        assert_eq!(r.total.delay_tail[0], r.samples());
        assert!(r.total.delay_tail.len() <= 2);
        assert_eq!(r.total.backlog_tail.len(), 1);
    }

    /// Minimal single-queue oracle: q <- max(q + a - c, 0) with the same streams.
    #[test]
    fn lindley_oracle_backlog() {
        let arrival = EmissionDist::ScaledBernoulli {
            value: 2.0,
            prob: 0.5,
        };
        let net = single(arrival, 1.0);
        let c = SimConfig {
            steps: 50_000,
            seed: 5,
            policy: Policy::CrossPriority,
            replications: 1,
            warmup: 0,
        };
        let r = simulate(&net, &c).unwrap();

        let mut s = MmpSampler::new(&Mmp::iid(arrival).unwrap(), stream_rng(5, 0, 0));
        let mut q = 0i64;
        let mut hist = vec![0u64; 1];
        for _ in 0..c.steps {
            q = (q + s.step() as i64 - 1).max(0);
            if hist.len() <= q as usize {
                hist.resize(q as usize + 1, 0);
            }
            hist[q as usize] += 1;
        }
        assert_eq!(r.total.backlog_tail, suffix_sums(&hist));
    }

    #[test]
    fn reproducible() {
        let net = corpus::fig1b();
        let c = cfg(20_000, Policy::FifoAggregate);
        assert_eq!(simulate(&net, &c).unwrap(), simulate(&net, &c).unwrap());
    }

    #[test]
    fn tails_nonincreasing() {
        for net in [corpus::fig1a(), corpus::sinktree_down()] {
            for p in [Policy::CrossPriority, Policy::FifoAggregate] {
                let r = simulate(&net, &cfg(30_000, p)).unwrap();
                for t in [&r.total.delay_tail, &r.total.backlog_tail] {
                    assert_eq!(t[0], r.samples());
                    assert!(t.windows(2).all(|w| w[0] >= w[1]));
                }
            }
        }
    }

    #[test]
    fn priority_delays_dominate_fifo() {
        let net = corpus::fig1b();
        let a = simulate(&net, &cfg(200_000, Policy::CrossPriority)).unwrap();
        let b = simulate(&net, &cfg(200_000, Policy::FifoAggregate)).unwrap();
        let pa = empirical_tail(&a, crate::bounds::Metric::Delay).unwrap();
        let pb = empirical_tail(&b, crate::bounds::Metric::Delay).unwrap();
        for t in 1..15 {
            let (x, sx) = pa.at(t);
            let (y, sy) = pb.at(t);
            assert!(x + 3.0 * (sx + sy) >= y, "T={t}: {x} vs {y}");
        }
    }

    #[test]
    fn invalid_config() {
        let net = corpus::fig1a();
        let mut c = cfg(10, Policy::CrossPriority);
        assert!(simulate(&net, &c).is_err());
        c.warmup = 0;
        c.replications = 0;
        assert!(simulate(&net, &c).is_err());
    }
}
