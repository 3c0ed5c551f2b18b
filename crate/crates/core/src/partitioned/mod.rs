//! Partitioned trapezoidal integration with Lagrange-multiplier coupling.
//!
//! Each coupled step advances every substructure as a free problem, then
//! computes the interface forces `Λ` that restore velocity compatibility
//! across all constraints at once and adds the resulting link correction:
//!
//! ```text
//! H   = Σ_s G_s D_s⁻¹ L_s
//! Λ   = −(γΔT H)⁻¹ Σ_s G_s Y_s^F
//! Ẏ_s = Ẏ_s^F + D_s⁻¹ L_s Λ,   Y_s = Y_s^F + γΔT D_s⁻¹ L_s Λ
//! ```
//!
//! `D_s` is built once from the tangent at zero state, so `H` is factorized
//! once before stepping. Physical substructures may be sub-cycled: they take
//! `ss` inner steps of `ΔT/ss` per coupled step, loaded with the previous
//! multipliers ramped down by `1 − j/ss`.

mod step;
mod topology;
mod trajectory;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

pub use step::{external_force, free_step, EffectiveMatrix};
pub use topology::{CoupledSystem, CouplingTopology, InterfaceConstraint, InterfaceDof, Role};
pub use trajectory::{CompatibilityRecord, FineTrace, Trajectory};

use crate::error::{Error, Result};
use crate::input::InputSignals;
use crate::linalg::Factorization;
use crate::model::{FirstOrderModel, StateVector};
pub(crate) use step::initial_rate;
use step::{free_step_into, gemv_add};

pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Coupled step ΔT (s).
    pub dt: f64,
    pub gamma: f64,
    /// Inner steps per coupled step for physical substructures.
    pub subcycles: usize,
    /// Simulated time (s).
    pub duration: f64,
    /// Largest state magnitude tolerated before the run is aborted.
    pub divergence_bound: f64,
}

impl SolverConfig {
    /// Trapezoidal rule (`γ = 0.5`), no sub-cycling.
    pub fn new(dt: f64, duration: f64) -> Self {
        Self {
            dt,
            gamma: 0.5,
            subcycles: 1,
            duration,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_subcycles(mut self, ss: usize) -> Self {
        self.subcycles = ss;
        self
    }

    pub fn with_divergence_bound(mut self, bound: f64) -> Self {
        self.divergence_bound = bound;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.subcycles == 0 {
            return Err(Error::InvalidConfig("subcycles must be at least 1".into()));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "duration must be non-negative, got {}",
                self.duration
            )));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::InvalidConfig("divergence bound must be positive".into()));
        }
        Ok(())
    }

    /// Number of coupled steps covering `duration`.
    pub fn steps(&self) -> usize {
        libm::round(self.duration / self.dt) as usize
    }
}

/// The interface operator `H = Σ_s G_s D_s⁻¹ L_s` together with the link
/// rates `D_s⁻¹ L_s` it is built from.
#[derive(Debug, Clone)]
pub struct SteklovPoincare {
    operator: DMatrix<f64>,
    scaled: Factorization,
    scale: f64,
    entries: Vec<Vec<(usize, usize, f64)>>,
    link_rates: Vec<DMatrix<f64>>,
}

impl SteklovPoincare {
    /// `scale` is the link-state factor `γΔT`.
    pub fn assemble(
        topology: &CouplingTopology,
        effective: &[&EffectiveMatrix],
        scale: f64,
    ) -> Result<Self> {
        let nc = topology.len();
        if nc == 0 {
            return Err(Error::InvalidTopology(
                "no interface constraints: nothing to couple".into(),
            ));
        }
        let mut operator = DMatrix::zeros(nc, nc);
        let mut entries = Vec::with_capacity(effective.len());
        let mut link_rates = Vec::with_capacity(effective.len());
        for (s, d) in effective.iter().enumerate() {
            let n = d.dim() / 2;
            let rate = d.solve_matrix(&topology.locator(s, n));
            let e = topology.entries(s);
            for &(k, dof, sign) in &e {
                for j in 0..nc {
                    operator[(k, j)] += sign * rate[(n + dof, j)];
                }
            }
            entries.push(e);
            link_rates.push(rate);
        }
        let scaled = Factorization::new(&operator * scale, "interface operator H").map_err(|e| match e {
            Error::Singular(msg) => Error::Singular(format!(
                "{msg}; some interface constraints are redundant"
            )),
            other => other,
        })?;
        Ok(Self {
            operator,
            scaled,
            scale,
            entries,
            link_rates,
        })
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// `D_s⁻¹ L_s` of substructure `s`.
    pub fn link_rate(&self, s: usize) -> &DMatrix<f64> {
        &self.link_rates[s]
    }

    /// `Σ_s G_s Y_s`.
    pub fn residual(&self, states: &[&[f64]]) -> Vec<f64> {
        let mut r = vec![0.0; self.operator.nrows()];
        for (s, y) in states.iter().enumerate() {
            let n = y.len() / 2;
            for &(k, dof, sign) in &self.entries[s] {
                r[k] += sign * y[n + dof];
            }
        }
        r
    }

    /// Multipliers restoring compatibility of the given free states.
    pub fn multipliers(&self, free: &[&[f64]]) -> Vec<f64> {
        let mut lambda = DVector::from_vec(self.residual(free));
        self.scaled.solve_mut(&mut lambda);
        lambda.neg_mut();
        lambda.as_slice().to_vec()
    }

    /// Adds the link rate and link state of `Λ` to substructure `s`.
    pub fn apply_link(&self, s: usize, lambda: &[f64], y: &mut [f64], rate: &mut [f64]) {
        gemv_add(rate, 1.0, &self.link_rates[s], lambda);
        gemv_add(y, self.scale, &self.link_rates[s], lambda);
    }
}

/// Interface forces for the current free states and the per-substructure
/// link states `Y^L_s = γΔT D_s⁻¹ L_s Λ`.
pub fn coupling_step(sp: &SteklovPoincare, free: &[&[f64]]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let lambda = sp.multipliers(free);
    let links = free
        .iter()
        .enumerate()
        .map(|(s, y)| {
            let mut link = vec![0.0; y.len()];
            let mut rate = vec![0.0; y.len()];
            sp.apply_link(s, &lambda, &mut link, &mut rate);
            link
        })
        .collect();
    (lambda, links)
}

/// Free solution of one substructure over one coupled step.
#[derive(Debug, Clone, Default)]
pub struct FreeSolution {
    pub state: Vec<f64>,
    pub rate: Vec<f64>,
    /// Inner states `j = 1..ss-1` of a sub-cycled substructure.
    pub inner: Vec<Vec<f64>>,
}

/// Executor of the free phase. Tasks are independent; implementations may
/// run them in any order or concurrently but must return them in index order.
pub trait FreePhase: Sync {
    fn map(&self, count: usize, task: &(dyn Fn(usize) -> FreeSolution + Sync)) -> Vec<FreeSolution>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl FreePhase for Sequential {
    fn map(&self, count: usize, task: &(dyn Fn(usize) -> FreeSolution + Sync)) -> Vec<FreeSolution> {
        (0..count).map(task).collect()
    }
}

#[derive(Debug, Clone)]
struct Stage {
    effective: EffectiveMatrix,
    mass: Factorization,
    h: f64,
    inner: usize,
    /// `(constraint, dof, sign)` of every interface entry on this substructure.
    entries: Vec<(usize, usize, f64)>,
}

/// Offline part of a partitioned simulation: effective matrices and the
/// interface operator, reused by every call to [`PartitionedSolver::run`].
#[derive(Debug, Clone)]
pub struct PartitionedSolver<'a> {
    system: &'a CoupledSystem,
    config: SolverConfig,
    stages: Vec<Stage>,
    interface: Option<SteklovPoincare>,
}

impl<'a> PartitionedSolver<'a> {
    pub fn new(system: &'a CoupledSystem, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        system.topology.validate(&system.substructures)?;
        let mut stages = Vec::with_capacity(system.len());
        for (s, (sub, role)) in system.substructures.iter().zip(&system.roles).enumerate() {
            let inner = if *role == Role::Physical { config.subcycles } else { 1 };
            let h = config.dt / inner as f64;
            stages.push(Stage {
                effective: EffectiveMatrix::new(sub, h, config.gamma)?,
                mass: Factorization::new(sub.mass_matrix().clone(), "mass matrix")?,
                h,
                inner,
                entries: system.topology.entries(s),
            });
        }
        let interface = if system.topology.is_empty() {
            None
        } else {
            let ds: Vec<&EffectiveMatrix> = stages.iter().map(|s| &s.effective).collect();
            Some(SteklovPoincare::assemble(
                &system.topology,
                &ds,
                config.gamma * config.dt,
            )?)
        };
        Ok(Self {
            system,
            config,
            stages,
            interface,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn effective_matrix(&self, s: usize) -> &EffectiveMatrix {
        &self.stages[s].effective
    }

    pub fn steklov_poincare(&self) -> Option<&SteklovPoincare> {
        self.interface.as_ref()
    }

    /// Runs from rest on the calling thread.
    pub fn run(&self, inputs: &dyn InputSignals) -> Result<Trajectory> {
        self.run_with(inputs, None, &Sequential)
    }

    /// Runs from the given initial states (rest if `None`) with the free
    /// phase dispatched through `exec`. Multipliers start at zero.
    pub fn run_with(
        &self,
        inputs: &dyn InputSignals,
        initial: Option<&[StateVector]>,
        exec: &dyn FreePhase,
    ) -> Result<Trajectory> {
        let subs = &self.system.substructures;
        let count = subs.len();
        let cfg = &self.config;
        let steps = cfg.steps();

        let mut states: Vec<Vec<f64>> = match initial {
            Some(init) => {
                if init.len() != count {
                    return Err(Error::DimensionMismatch {
                        what: "initial states",
                        expected: count,
                        found: init.len(),
                    });
                }
                let mut v = Vec::with_capacity(count);
                for (y, sub) in init.iter().zip(subs) {
                    if y.dofs() != sub.dofs() {
                        return Err(Error::DimensionMismatch {
                            what: "initial state",
                            expected: 2 * sub.dofs(),
                            found: y.as_slice().len(),
                        });
                    }
                    v.push(y.as_slice().to_vec());
                }
                v
            }
            None => subs.iter().map(|s| vec![0.0; 2 * s.dofs()]).collect(),
        };
        let mut rates: Vec<Vec<f64>> = Vec::with_capacity(count);
        for (s, sub) in subs.iter().enumerate() {
            let mut f = vec![0.0; 2 * sub.dofs()];
            external_force(sub, inputs, 0.0, &mut f);
            rates.push(initial_rate(sub, &self.stages[s].mass, &states[s], &f));
        }

        let nc = self.system.topology.len();
        let mut lambda = vec![0.0; nc];
        let mut traj = Trajectory {
            times: Vec::with_capacity(steps + 1),
            states: (0..count).map(|_| Vec::with_capacity(steps + 1)).collect(),
            multipliers: Vec::with_capacity(steps + 1),
            fine: self
                .system
                .roles
                .iter()
                .map(|r| (*r == Role::Physical).then(FineTrace::default))
                .collect(),
            compatibility: Vec::with_capacity(steps + 1),
        };
        let initial_residual = self
            .interface
            .as_ref()
            .map(|sp| {
                let refs: Vec<&[f64]> = states.iter().map(Vec::as_slice).collect();
                norm2(&sp.residual(&refs))
            })
            .unwrap_or(0.0);
        traj.times.push(0.0);
        for (s, y) in states.iter().enumerate() {
            traj.states[s].push(StateVector::from_values(y.clone())?);
            if let Some(f) = &mut traj.fine[s] {
                f.times.push(0.0);
                f.states.push(StateVector::from_values(y.clone())?);
            }
        }
        traj.multipliers.push(lambda.clone());
        traj.compatibility.push(CompatibilityRecord {
            free: initial_residual,
            coupled: initial_residual,
        });

        for step in 1..=steps {
            let t_prev = (step - 1) as f64 * cfg.dt;
            let t = step as f64 * cfg.dt;
            let task = |s: usize| self.free_solution(s, &states[s], &rates[s], &lambda, t_prev, t, inputs);
            let mut free = exec.map(count, &task);

            let mut record = CompatibilityRecord::default();
            if let Some(sp) = &self.interface {
                let refs: Vec<&[f64]> = free.iter().map(|f| f.state.as_slice()).collect();
                record.free = norm2(&sp.residual(&refs));
                lambda = sp.multipliers(&refs);
                for (s, f) in free.iter_mut().enumerate() {
                    sp.apply_link(s, &lambda, &mut f.state, &mut f.rate);
                }
                let refs: Vec<&[f64]> = free.iter().map(|f| f.state.as_slice()).collect();
                record.coupled = norm2(&sp.residual(&refs));
            }

            traj.times.push(t);
            for (s, f) in free.into_iter().enumerate() {
                let norm = f.state.iter().fold(0.0f64, |m, x| {
                    if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(libm::fabs(*x)) }
                });
                if norm.is_nan() || norm > cfg.divergence_bound {
                    return Err(Error::Diverged { step, time: t, norm });
                }
                if let Some(trace) = &mut traj.fine[s] {
                    let h = self.stages[s].h;
                    for (j, y) in f.inner.into_iter().enumerate() {
                        trace.times.push(t_prev + (j + 1) as f64 * h);
                        trace.states.push(StateVector::from_values(y)?);
                    }
                    trace.times.push(t);
                    trace.states.push(StateVector::from_values(f.state.clone())?);
                }
                traj.states[s].push(StateVector::from_values(f.state.clone())?);
                states[s] = f.state;
                rates[s] = f.rate;
            }
            traj.multipliers.push(lambda.clone());
            traj.compatibility.push(record);
        }
        Ok(traj)
    }

    #[allow(clippy::too_many_arguments)]
    fn free_solution(
        &self,
        s: usize,
        y: &[f64],
        rate: &[f64],
        lambda: &[f64],
        t_prev: f64,
        t: f64,
        inputs: &dyn InputSignals,
    ) -> FreeSolution {
        let sub = &self.system.substructures[s];
        let stage = &self.stages[s];
        let dim = y.len();
        let n = dim / 2;
        let gamma = self.config.gamma;
        let mut force = vec![0.0; dim];
        let mut out = FreeSolution {
            state: vec![0.0; dim],
            rate: vec![0.0; dim],
            inner: Vec::new(),
        };
        // With one inner step the ramp weight is zero and this is a plain
        // free step over the whole window.
        let ss = stage.inner;
        let mut y_cur = y.to_vec();
        let mut rate_cur = rate.to_vec();
        for j in 1..=ss {
            let tj = if j == ss { t } else { t_prev + j as f64 * stage.h };
            external_force(sub, inputs, tj, &mut force);
            let ramp = 1.0 - j as f64 / ss as f64;
            for &(k, dof, sign) in &stage.entries {
                force[n + dof] += sign * lambda[k] * ramp;
            }
            free_step_into(sub, &stage.effective, &y_cur, &rate_cur, &force, stage.h, gamma, &mut out.state, &mut out.rate);
            if j < ss {
                out.inner.push(out.state.clone());
            }
            y_cur.copy_from_slice(&out.state);
            rate_cur.copy_from_slice(&out.rate);
        }
        out
    }
}

fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// One-shot partitioned run from rest.
pub fn simulate(
    system: &CoupledSystem,
    config: &SolverConfig,
    inputs: &dyn InputSignals,
) -> Result<Trajectory> {
    PartitionedSolver::new(system, *config)?.run(inputs)
}

/// Partitioned run with physical substructures advanced in `ss` inner steps.
pub fn simulate_subcycled(
    system: &CoupledSystem,
    config: &SolverConfig,
    ss: usize,
    inputs: &dyn InputSignals,
) -> Result<Trajectory> {
    PartitionedSolver::new(system, config.with_subcycles(ss))?.run(inputs)
}
