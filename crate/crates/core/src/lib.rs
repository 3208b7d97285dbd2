//! Round-off based and variational dynamical indicators for discrete-time maps.
//!
//! The crate iterates maps in deterministic rounded arithmetic of any
//! significand width ([`precision`]), measures how round-off makes
//! numerical orbits irreversible or divergent ([`indicators`]), compares
//! ensembles under round-off and random noise ([`ensemble`]) and charts
//! indicators over grids of initial conditions ([`scan`]).

pub mod ensemble;
mod error;
pub mod fit;
pub mod indicators;
pub mod maps;
pub mod output;
pub mod precision;
pub mod rng;
pub mod scan;

pub use error::{Error, Result};
pub use maps::{JacobianMatrix, MapFamily, MapInstance, Period, State};
pub use precision::{
    machine_epsilon, round_nearest, rounded_eval, Dyadic, Op, Precision, PrecisionError, PrecisionSpec, RoundedValue,
};
