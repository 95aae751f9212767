//! Built-in example networks.
//!
//! Every flow uses the same on-off source: P(Off -> On) = 0.7, P(On -> Off) = 0.1,
//! Poisson(2) emissions while On (mean rate 1.75).

use crate::mmp::{EmissionDist, Mmp};
use crate::network::{FlowSpec, ServiceModel, TandemNetwork};

pub const NAMES: [&str; 4] = ["fig1a", "fig1b", "sinktree_up", "sinktree_down"];

pub fn mmoo_source() -> Mmp {
    Mmp::on_off(0.7, 0.1, EmissionDist::Poisson { mean: 2.0 }).expect("valid source")
}

fn flow(id: usize, first: usize, last: usize) -> FlowSpec {
    FlowSpec {
        id,
        first,
        last,
        arrival: mmoo_source(),
    }
}

fn bernoulli_server(value: f64, prob: f64) -> ServiceModel {
    ServiceModel::Markov {
        mmp: Mmp::iid(EmissionDist::ScaledBernoulli { value, prob }).expect("valid service"),
    }
}

fn constant_servers(rates: &[f64]) -> Vec<ServiceModel> {
    rates
        .iter()
        .map(|&rate| ServiceModel::ConstantRate { rate })
        .collect()
}

/// Two servers with random service, one flow.
pub fn two_server(p1: f64, p2: f64) -> TandemNetwork {
    TandemNetwork::new(
        vec![bernoulli_server(5.0, p1), bernoulli_server(6.0, p2)],
        vec![flow(1, 1, 2)],
    )
    .expect("valid corpus network")
}

pub fn fig1a() -> TandemNetwork {
    two_server(0.5, 0.5)
}

/// Interleaved tandem with constant rates `(5, c2, 6)`.
pub fn interleaved(c2: f64) -> TandemNetwork {
    TandemNetwork::new(
        constant_servers(&[5.0, c2, 6.0]),
        vec![flow(1, 1, 3), flow(2, 1, 2), flow(3, 2, 3)],
    )
    .expect("valid corpus network")
}

pub fn fig1b() -> TandemNetwork {
    interleaved(7.0)
}

/// Sink tree: flow `i` enters at server `i` and leaves after the last server.
pub fn sink_tree(rates: &[f64]) -> TandemNetwork {
    let n = rates.len();
    TandemNetwork::new(
        constant_servers(rates),
        (1..=n).map(|i| flow(i, i, n)).collect(),
    )
    .expect("valid corpus network")
}

/// Rates `3 + i`.
pub fn sinktree_up() -> TandemNetwork {
    sink_tree(&[4.0, 5.0, 6.0])
}

/// Rates `3i - 1`.
pub fn sinktree_down() -> TandemNetwork {
    sink_tree(&[2.0, 5.0, 8.0])
}

pub fn by_name(name: &str) -> Option<TandemNetwork> {
    match name {
        "fig1a" => Some(fig1a()),
        "fig1b" => Some(fig1b()),
        "sinktree_up" => Some(sinktree_up()),
        "sinktree_down" => Some(sinktree_down()),
        _ => None,
    }
}
