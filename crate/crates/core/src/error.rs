use thiserror::Error;

use crate::network::SiteReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid emission distribution: {0}")]
    InvalidEmission(String),

    #[error("invalid transition matrix: {0}")]
    InvalidTransition(String),

    #[error(
        "reducible Markov chain: states {unreachable:?} are not mutually reachable with state 0"
    )]
    Reducible { unreachable: Vec<usize> },

    #[error("stationary distribution check failed: residual {residual:e}")]
    Stationary { residual: f64 },

    #[error(
        "power iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    PerronNonConvergence { iterations: usize, residual: f64 },

    #[error("generating function diverges: pole {pole} (rate {rate}) at z = {z}")]
    Divergence { pole: usize, rate: f64, z: f64 },

    #[error("theta must be strictly positive and finite, got {0}")]
    InvalidTheta(f64),

    #[error("theta {theta} outside the admissible domain (upper endpoint {hi})")]
    ThetaDomain { theta: f64, hi: f64 },

    #[error(
        "server {server} is unstable: mean service {service_mean} <= mean arrivals {arrival_mean}"
    )]
    Instability {
        server: usize,
        service_mean: f64,
        arrival_mean: f64,
    },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("flow {flow}: path {first}..{last} is not a contiguous interval of 1..{n}")]
    NonContiguousPath {
        flow: usize,
        first: usize,
        last: usize,
        n: usize,
    },

    #[error("flow of interest (id 1) missing or not spanning servers 1..{n}")]
    MissingFlowOfInterest { n: usize },

    #[error("server index {index} out of range 1..{n}")]
    ServerIndex { index: usize, n: usize },

    #[error("martingale analysis not admissible at server {}: {}", .0.server, .0)]
    Assumption(SiteReport),

    #[error("joint state space of {states} states exceeds the cap of {cap}; fall back to exp(theta (sigma_S + sum sigma_A))")]
    StateSpaceCap { states: usize, cap: usize },

    #[error("objective is infinite over the whole theta domain")]
    InfeasibleObjective,

    #[error("epsilon {epsilon:e} not reached below T = {cap}")]
    EpsilonUnreachable { epsilon: f64, cap: u64 },

    #[error("64-bit counter overflow in simulation")]
    CounterOverflow,

    #[error("no samples recorded")]
    ZeroSamples,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
