//! Mixed quantum-classical dynamics for one-dimensional two-state models:
//! a coupled-trajectory scheme derived from the exact factorization, an
//! exact split-operator wave-packet reference, and the Ehrenfest, surface
//! hopping and independent-trajectory MQC baselines.

pub mod baselines;
pub mod compare;
pub mod config;
pub mod ctmqc;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod models;
pub mod observables;
pub mod output;
pub mod runner;
pub mod sampling;
pub mod trajectory;

pub use config::{parse_config, Method, RunConfig};
pub use error::{Error, Result};
pub use models::{DiabaticModel, ModelKind};
