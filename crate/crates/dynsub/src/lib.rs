//! Standard-library companion to `dynsub-core`: JSON model and solver
//! files, CSV signals and trajectories, excitation generators, a thread-pool
//! free-phase executor and the experiment driver behind the `dynsub`
//! command-line tool.

pub mod artifact;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod format;
pub mod parallel;
pub mod signals;

pub use error::{Error, Result};
