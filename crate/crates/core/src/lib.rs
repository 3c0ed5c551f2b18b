//! Dynamic substructuring for structures with localised nonlinearities.
//!
//! The crate reduces linear substructures with the Craig-Bampton method and
//! couples them to full-order (possibly nonlinear) substructures with a
//! partitioned trapezoidal integrator. Each substructure is advanced as a
//! free problem, then interface compatibility is restored at the end of the
//! step through Lagrange multipliers computed from the Steklov-Poincaré
//! interface operator.
//!
//! Everything here is pure computation on `alloc` containers; file formats,
//! signal generation, threading and the command line live in the `dynsub`
//! companion crate.
//!
//! Layout of a first-order state is always `Y = [u; v]` with the state mass
//! operator `A = blockdiag(I, M)` and restoring vector
//! `R(Y) = [-v; C v + K u + f_nl(u, v)]`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod input;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod models;
pub mod partitioned;
pub mod reduction;
pub mod reference;

pub use error::{Error, Result};
pub use input::{InputSignals, SampledSignals, ZeroInput};
pub use model::{
    DofPartition, Load, NonlinearSubstructure, LinearSubstructure, RestoringLaw, StateVector,
    Substructure, SuspensionElement, Tangent,
};
pub use partitioned::{
    CouplingTopology, CoupledSystem, InterfaceConstraint, InterfaceDof, PartitionedSolver, Role,
    SolverConfig, Trajectory,
};
pub use reduction::CraigBamptonReduction;
