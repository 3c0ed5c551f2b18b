use alloc::vec::Vec;

use crate::model::StateVector;

/// Interface residual norms `‖Σ_s G_s Y_s‖₂` before and after coupling.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompatibilityRecord {
    pub free: f64,
    pub coupled: f64,
}

/// States of a sub-cycled substructure at the inner sampling `ΔT/ss`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FineTrace {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

/// Time history of a coupled simulation. Every sequence is indexed by the
/// coupled step and includes the initial state at `t = 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `states[s][k]`: substructure `s` at step `k`.
    pub states: Vec<Vec<StateVector>>,
    /// `multipliers[k]`: interface forces (N) at step `k`; empty for monolithic runs.
    pub multipliers: Vec<Vec<f64>>,
    /// Inner-step history of each physical substructure.
    pub fine: Vec<Option<FineTrace>>,
    pub compatibility: Vec<CompatibilityRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn substructures(&self) -> usize {
        self.states.len()
    }

    pub fn displacement(&self, sub: usize, dof: usize) -> Vec<f64> {
        self.states[sub].iter().map(|y| y.displacements()[dof]).collect()
    }

    pub fn velocity(&self, sub: usize, dof: usize) -> Vec<f64> {
        self.states[sub].iter().map(|y| y.velocities()[dof]).collect()
    }

    pub fn multiplier(&self, constraint: usize) -> Vec<f64> {
        self.multipliers.iter().map(|l| l[constraint]).collect()
    }

    pub fn fine_displacement(&self, sub: usize, dof: usize) -> Option<Vec<f64>> {
        self.fine
            .get(sub)?
            .as_ref()
            .map(|f| f.states.iter().map(|y| y.displacements()[dof]).collect())
    }
}
