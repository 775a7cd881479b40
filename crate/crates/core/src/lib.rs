//! Planning under periodic check-ins.

pub mod cli;
pub mod envs;
pub mod error;
pub mod io;
pub mod model;
pub mod schedule;
pub mod search;
pub mod sim;
pub mod pareto;
pub mod plot;
pub mod solver;

pub use error::{Error, Result};
