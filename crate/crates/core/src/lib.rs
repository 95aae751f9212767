//! Delay and backlog bounds for flow 1 of a tandem network fed by
//! Markov-modulated processes, plus a slotted simulator to check them.
//!
//! Two bound families are provided: the union-bound analysis on the end-to-end
//! service bgf ([`bounds::Method::Pmoo`]) and the analysis that applies a maximal
//! inequality at one server ([`bounds::Method::Martingale`]).

pub mod bounds;
pub mod corpus;
pub mod counterexample;
pub mod error;
pub mod experiments;
pub mod genfunc;
pub mod matrix;
pub mod mmp;
pub mod network;
pub mod sim;

pub use error::{Error, Result};
