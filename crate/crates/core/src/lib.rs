//! MOBelCov: a multi-objective epidemic-control environment built on an
//! age-structured compartmental model, a continuous-action Pareto
//! Conditioned Networks trainer, a fixed-policy baseline and the 2-D
//! multi-objective metrics used to compare coverage sets.

pub mod action;
pub mod baseline;
pub mod env;
pub mod epi;
pub mod error;
pub mod exec;
pub mod io;
pub mod nn;
pub mod pareto;
pub mod pcn;
pub mod rng;

pub use action::Action;
pub use error::{Error, Result};
pub use exec::Execution;
