//! Reference solutions: the primal-assembled monolithic system integrated
//! with the same trapezoidal scheme, a Newmark average-acceleration variant,
//! and closed-form single-DOF free vibration.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};

use crate::error::{Error, Result};
use crate::input::InputSignals;
use crate::linalg::Factorization;
use crate::model::{FirstOrderModel, Load, StateVector, Substructure, Tangent};
use crate::partitioned::{
    external_force, free_step, CompatibilityRecord, CoupledSystem, EffectiveMatrix, SolverConfig,
    Trajectory,
};

/// A substructure whose internal force is evaluated on gathered global DOFs.
#[derive(Debug, Clone)]
struct Hook {
    sub: Substructure,
    map: Vec<usize>,
}

/// Primal assembly: DOFs joined by an interface constraint become one global DOF.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    mass: DMatrix<f64>,
    damping: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    hooks: Vec<Hook>,
    /// `maps[s][local] = global`.
    maps: Vec<Vec<usize>>,
    loads: Vec<Load>,
    tangent: Tangent,
    damped: bool,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

pub fn assemble_global(system: &CoupledSystem) -> Result<AssembledSystem> {
    let subs = &system.substructures;
    system.topology.validate(subs)?;
    let offsets: Vec<usize> = subs
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.dofs();
            Some(o)
        })
        .collect();
    let total: usize = subs.iter().map(|s| s.dofs()).sum();
    let owner: Vec<usize> = subs
        .iter()
        .enumerate()
        .flat_map(|(s, sub)| core::iter::repeat(s).take(sub.dofs()))
        .collect();

    // Union-find over (substructure, dof); a class may hold at most one DOF
    // of each substructure.
    let mut parent: Vec<usize> = (0..total).collect();
    let mut members: Vec<Vec<usize>> = (0..total).map(|i| vec![i]).collect();
    for (k, c) in system.topology.constraints().iter().enumerate() {
        let a = find(&mut parent, offsets[c.a.substructure] + c.a.dof);
        let b = find(&mut parent, offsets[c.b.substructure] + c.b.dof);
        if a == b {
            return Err(Error::InvalidTopology(format!(
                "constraint {k} is redundant with earlier constraints"
            )));
        }
        let clash = members[a]
            .iter()
            .any(|&i| members[b].iter().any(|&j| owner[i] == owner[j]));
        if clash {
            return Err(Error::InvalidTopology(format!(
                "constraint {k} would merge two DOFs of the same substructure"
            )));
        }
        let moved = core::mem::take(&mut members[b]);
        members[a].extend(moved);
        parent[b] = a;
    }
    let mut global_of_root = vec![usize::MAX; total];
    let mut next = 0;
    let mut maps: Vec<Vec<usize>> = Vec::with_capacity(subs.len());
    for (s, sub) in subs.iter().enumerate() {
        let mut map = Vec::with_capacity(sub.dofs());
        for d in 0..sub.dofs() {
            let root = find(&mut parent, offsets[s] + d);
            if global_of_root[root] == usize::MAX {
                global_of_root[root] = next;
                next += 1;
            }
            map.push(global_of_root[root]);
        }
        maps.push(map);
    }
    let n = next;

    let mut mass = DMatrix::zeros(n, n);
    let mut damping = DMatrix::zeros(n, n);
    let mut stiffness = DMatrix::zeros(n, n);
    let mut tk = DMatrix::zeros(n, n);
    let mut tc = DMatrix::zeros(n, n);
    let mut hooks = Vec::new();
    let mut loads = Vec::new();
    for (sub, map) in subs.iter().zip(&maps) {
        scatter(&mut mass, sub.mass_matrix(), map);
        let t = sub.tangent_at_zero();
        scatter(&mut tk, &t.stiffness, map);
        scatter(&mut tc, &t.damping, map);
        match sub {
            Substructure::Linear(lin) => {
                scatter(&mut stiffness, lin.stiffness(), map);
                scatter(&mut damping, lin.damping(), map);
            }
            other => hooks.push(Hook {
                sub: other.clone(),
                map: map.clone(),
            }),
        }
        for load in sub.loads() {
            loads.push(Load {
                channel: load.channel,
                weights: load.weights.iter().map(|&(d, w)| (map[d], w)).collect(),
            });
        }
    }
    let damped = damping.iter().any(|&c| c != 0.0);
    Ok(AssembledSystem {
        mass,
        damping,
        stiffness,
        hooks,
        maps,
        loads,
        tangent: Tangent {
            stiffness: tk,
            damping: tc,
        },
        damped,
    })
}

fn scatter(global: &mut DMatrix<f64>, local: &DMatrix<f64>, map: &[usize]) {
    for (i, &gi) in map.iter().enumerate() {
        for (j, &gj) in map.iter().enumerate() {
            global[(gi, gj)] += local[(i, j)];
        }
    }
}

impl AssembledSystem {
    pub fn damping(&self) -> &DMatrix<f64> {
        &self.damping
    }

    /// Stiffness of the linear substructures only.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// Global DOF of local DOF `dof` of substructure `sub`.
    pub fn global_dof(&self, sub: usize, dof: usize) -> usize {
        self.maps[sub][dof]
    }

    pub fn maps(&self) -> &[Vec<usize>] {
        &self.maps
    }

    /// Splits a global state into per-substructure states.
    pub fn gather(&self, y: &[f64]) -> Vec<StateVector> {
        let n = self.dofs();
        self.maps
            .iter()
            .map(|map| {
                let u: Vec<f64> = map.iter().map(|&g| y[g]).collect();
                let v: Vec<f64> = map.iter().map(|&g| y[n + g]).collect();
                StateVector::from_parts(&u, &v).expect("equal lengths")
            })
            .collect()
    }
}

impl FirstOrderModel for AssembledSystem {
    fn dofs(&self) -> usize {
        self.mass.nrows()
    }

    fn mass_matrix(&self) -> &DMatrix<f64> {
        &self.mass
    }

    fn internal_force(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.dofs();
        let mut o = DVectorViewMut::from_slice(out, n);
        o.gemv(1.0, &self.stiffness, &DVectorView::from_slice(u, n), 0.0);
        if self.damped {
            o.gemv(1.0, &self.damping, &DVectorView::from_slice(v, n), 1.0);
        }
        for hook in &self.hooks {
            let lu: Vec<f64> = hook.map.iter().map(|&g| u[g]).collect();
            let lv: Vec<f64> = hook.map.iter().map(|&g| v[g]).collect();
            let mut f = vec![0.0; lu.len()];
            hook.sub.internal_force(&lu, &lv, &mut f);
            for (&g, fi) in hook.map.iter().zip(&f) {
                out[g] += fi;
            }
        }
    }

    fn tangent_at_zero(&self) -> Tangent {
        self.tangent.clone()
    }

    fn loads(&self) -> &[Load] {
        &self.loads
    }
}

fn check_divergence(y: &[f64], bound: f64, step: usize, time: f64) -> Result<()> {
    let norm = y.iter().fold(0.0f64, |m, x| {
        if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(libm::fabs(*x)) }
    });
    if norm.is_nan() || norm > bound {
        return Err(Error::Diverged { step, time, norm });
    }
    Ok(())
}

fn monolithic_trajectory(assembled: &AssembledSystem, states: Vec<Vec<f64>>, dt: f64) -> Trajectory {
    let count = assembled.maps.len();
    let steps = states.len();
    let mut traj = Trajectory {
        times: (0..steps).map(|k| k as f64 * dt).collect(),
        states: (0..count).map(|_| Vec::with_capacity(steps)).collect(),
        multipliers: vec![Vec::new(); steps],
        fine: vec![None; count],
        compatibility: vec![CompatibilityRecord::default(); steps],
    };
    for y in &states {
        for (s, sv) in assembled.gather(y).into_iter().enumerate() {
            traj.states[s].push(sv);
        }
    }
    traj
}

/// Trapezoidal solve of the assembled system from rest, same stage structure
/// as the partitioned free step. Sub-cycling settings are ignored.
pub fn solve_monolithic(
    system: &CoupledSystem,
    config: &SolverConfig,
    inputs: &dyn InputSignals,
) -> Result<Trajectory> {
    config.validate()?;
    let assembled = assemble_global(system)?;
    let d = EffectiveMatrix::new(&assembled, config.dt, config.gamma)?;
    let states = integrate_first_order(&assembled, &d, config, inputs)?;
    Ok(monolithic_trajectory(&assembled, states, config.dt))
}

/// Offline part of a monolithic solve, so that it can be timed separately.
#[derive(Debug, Clone)]
pub struct MonolithicSolver {
    assembled: AssembledSystem,
    effective: EffectiveMatrix,
    config: SolverConfig,
}

impl MonolithicSolver {
    pub fn new(system: &CoupledSystem, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let assembled = assemble_global(system)?;
        let effective = EffectiveMatrix::new(&assembled, config.dt, config.gamma)?;
        Ok(Self {
            assembled,
            effective,
            config,
        })
    }

    pub fn assembled(&self) -> &AssembledSystem {
        &self.assembled
    }

    pub fn run(&self, inputs: &dyn InputSignals) -> Result<Trajectory> {
        let states = integrate_first_order(&self.assembled, &self.effective, &self.config, inputs)?;
        Ok(monolithic_trajectory(&self.assembled, states, self.config.dt))
    }
}

/// Repeated free steps of a single first-order model from rest.
pub fn integrate_first_order<M: FirstOrderModel + ?Sized>(
    model: &M,
    d: &EffectiveMatrix,
    config: &SolverConfig,
    inputs: &dyn InputSignals,
) -> Result<Vec<Vec<f64>>> {
    let n = model.dofs();
    let steps = config.steps();
    let mass = Factorization::new(model.mass_matrix().clone(), "mass matrix")?;
    let mut force = vec![0.0; 2 * n];
    external_force(model, inputs, 0.0, &mut force);
    let mut y = vec![0.0; 2 * n];
    let mut rate = crate::partitioned::initial_rate(model, &mass, &y, &force);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y.clone());
    for step in 1..=steps {
        let t = step as f64 * config.dt;
        external_force(model, inputs, t, &mut force);
        let (y_new, rate_new) = free_step(model, d, &y, &rate, &force, config.dt, config.gamma)?;
        check_divergence(&y_new, config.divergence_bound, step, t)?;
        y = y_new;
        rate = rate_new;
        out.push(y.clone());
    }
    Ok(out)
}

/// Newmark average-acceleration (`β = 1/4`, `γ = 1/2`) in second-order form
/// with the constant tangent at zero:
///
/// ```text
/// (M + γh C_t + βh² K_t) a_{n+1} = f_{n+1} − f_int(ũ, ṽ)
/// ũ = u + h v + (1/2 − β) h² a,   ṽ = v + (1 − γ) h a
/// ```
pub fn solve_newmark(
    system: &CoupledSystem,
    config: &SolverConfig,
    inputs: &dyn InputSignals,
) -> Result<Trajectory> {
    config.validate()?;
    let (beta, gamma) = (0.25, 0.5);
    let h = config.dt;
    let assembled = assemble_global(system)?;
    let n = assembled.dofs();
    let t0 = assembled.tangent_at_zero();
    let lhs = assembled.mass_matrix() + &t0.damping * (gamma * h) + &t0.stiffness * (beta * h * h);
    let lu = Factorization::new(lhs, "Newmark effective matrix")?;
    let mass = Factorization::new(assembled.mass_matrix().clone(), "mass matrix")?;

    let mut force = vec![0.0; 2 * n];
    let mut fint = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    external_force(&assembled, inputs, 0.0, &mut force);
    assembled.internal_force(&u, &v, &mut fint);
    let mut a = DVector::from_iterator(n, (0..n).map(|i| force[n + i] - fint[i]));
    mass.solve_mut(&mut a);

    let steps = config.steps();
    let mut states = Vec::with_capacity(steps + 1);
    states.push([u.as_slice(), v.as_slice()].concat());
    for step in 1..=steps {
        let t = step as f64 * h;
        let ut: Vec<f64> = (0..n).map(|i| u[i] + h * v[i] + (0.5 - beta) * h * h * a[i]).collect();
        let vt: Vec<f64> = (0..n).map(|i| v[i] + (1.0 - gamma) * h * a[i]).collect();
        external_force(&assembled, inputs, t, &mut force);
        assembled.internal_force(&ut, &vt, &mut fint);
        let mut a_new = DVector::from_iterator(n, (0..n).map(|i| force[n + i] - fint[i]));
        lu.solve_mut(&mut a_new);
        for i in 0..n {
            u[i] = ut[i] + beta * h * h * a_new[i];
            v[i] = vt[i] + gamma * h * a_new[i];
        }
        a = a_new;
        let y = [u.as_slice(), v.as_slice()].concat();
        check_divergence(&y, config.divergence_bound, step, t)?;
        states.push(y);
    }
    Ok(monolithic_trajectory(&assembled, states, h))
}

/// Closed-form free vibration of `m ü + c u̇ + k u = 0`, returning `(u, v)` at `t`.
/// Under-, critically and over-damped cases are handled separately; damping
/// within a relative `1e-12` of critical uses the repeated-root formula.
pub fn analytic_sdof(m: f64, c: f64, k: f64, u0: f64, v0: f64, t: f64) -> Result<(f64, f64)> {
    if !(m > 0.0 && k > 0.0 && c >= 0.0) {
        return Err(Error::InvalidModel(format!(
            "analytic solution needs m > 0, k > 0, c ≥ 0 (got m={m}, k={k}, c={c})"
        )));
    }
    let wn = libm::sqrt(k / m);
    let zeta = c / (2.0 * libm::sqrt(k * m));
    if libm::fabs(zeta - 1.0) < 1e-12 {
        let b = v0 + wn * u0;
        let e = libm::exp(-wn * t);
        return Ok(((u0 + b * t) * e, (b - wn * (u0 + b * t)) * e));
    }
    if zeta < 1.0 {
        let wd = wn * libm::sqrt(1.0 - zeta * zeta);
        let sigma = zeta * wn;
        let b = (v0 + sigma * u0) / wd;
        let e = libm::exp(-sigma * t);
        let (s, co) = (libm::sin(wd * t), libm::cos(wd * t));
        let u = e * (u0 * co + b * s);
        let v = e * (-sigma * (u0 * co + b * s) + wd * (-u0 * s + b * co));
        return Ok((u, v));
    }
    let root = wn * libm::sqrt(zeta * zeta - 1.0);
    let (r1, r2) = (-zeta * wn + root, -zeta * wn - root);
    let a = (v0 - r2 * u0) / (r1 - r2);
    let b = u0 - a;
    let (e1, e2) = (libm::exp(r1 * t), libm::exp(r2 * t));
    Ok((a * e1 + b * e2, a * r1 * e1 + b * r2 * e2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DofPartition, LinearSubstructure};
    use crate::models::{chain, ChainSpec};
    use crate::partitioned::{CouplingTopology, InterfaceConstraint};
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    fn point_mass(m: f64) -> Substructure {
        LinearSubstructure::new(
            DMatrix::from_element(1, 1, m),
            None,
            DMatrix::from_element(1, 1, 1.0),
            DofPartition::from_boundary(1, vec![0]).unwrap(),
        )
        .unwrap()
        .into()
    }

    #[test]
    fn merged_masses_add() {
        let topo = CouplingTopology::new(vec![InterfaceConstraint::between(0, 0, 1, 0)]).unwrap();
        let sys = CoupledSystem::numerical(vec![point_mass(2.0), point_mass(2.0)], topo).unwrap();
        let a = assemble_global(&sys).unwrap();
        assert_eq!(a.dofs(), 1);
        assert_eq!(a.mass_matrix()[(0, 0)], 4.0);
    }

    #[test]
    fn empty_topology_is_block_diagonal() {
        let c1 = chain(&ChainSpec::new(2, 1.0, 3.0, 0.0), vec![]).unwrap();
        let c2 = chain(&ChainSpec::new(3, 2.0, 5.0, 0.0), vec![]).unwrap();
        let sys = CoupledSystem::numerical(vec![c1.clone().into(), c2.clone().into()], CouplingTopology::empty()).unwrap();
        let a = assemble_global(&sys).unwrap();
        assert_eq!(a.dofs(), 5);
        assert_eq!(a.stiffness().view((0, 0), (2, 2)).into_owned(), c1.stiffness().clone());
        assert_eq!(a.stiffness().view((2, 2), (3, 3)).into_owned(), c2.stiffness().clone());
        assert!(a.stiffness().view((0, 2), (2, 3)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn frame_analog_global_count() {
        use crate::model::SuspensionElement;
        use crate::models::{frame_analog_system, FrameAnalogSpec};
        let spec = FrameAnalogSpec::default().with_nodes_per_rail(20);
        let (sys, _) = frame_analog_system(&spec, SuspensionElement::reference(0), true).unwrap();
        // 40 frame DOFs + 4 × 2 suspension DOFs − 4 merged attachments.
        assert_eq!(assemble_global(&sys).unwrap().dofs(), 44);
    }

    #[test]
    fn inconsistent_constraint_graph() {
        // Two constraints chaining DOFs 0 and 1 of substructure 0 through one DOF of substructure 1.
        let a = chain(&ChainSpec::new(2, 1.0, 1.0, 0.0), vec![0, 1]).unwrap();
        let topo = CouplingTopology::new(vec![
            InterfaceConstraint::between(0, 0, 1, 0),
            InterfaceConstraint::between(0, 1, 1, 0),
        ])
        .unwrap();
        let sys = CoupledSystem::numerical(vec![a.into(), point_mass(1.0)], topo).unwrap();
        assert!(matches!(assemble_global(&sys), Err(Error::InvalidTopology(_))));
    }

    #[test]
    fn analytic_half_period() {
        let (u, v) = analytic_sdof(1.0, 0.0, 1.0, 1.0, 0.0, PI).unwrap();
        assert_relative_eq!(u, -1.0, epsilon = 1e-15);
        assert!(v.abs() < 1e-15);
        assert_eq!(analytic_sdof(2.0, 0.3, 5.0, 0.7, -0.2, 0.0).unwrap(), (0.7, -0.2));
    }

    #[test]
    fn analytic_continuous_across_critical_damping() {
        let (m, k) = (1.3, 7.0);
        let cc = 2.0 * libm::sqrt(k * m);
        for t in [0.1, 0.5, 2.0] {
            let crit = analytic_sdof(m, cc, k, 0.4, 1.1, t).unwrap();
            for c in [cc * (1.0 - 1e-9), cc * (1.0 + 1e-9)] {
                let near = analytic_sdof(m, c, k, 0.4, 1.1, t).unwrap();
                assert!((near.0 - crit.0).abs() < 1e-8 && (near.1 - crit.1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn analytic_satisfies_ode() {
        let (m, k) = (0.8, 12.0);
        for c in [0.0, 1.0, 2.0 * libm::sqrt(k * m), 15.0] {
            let h = 1e-5;
            let t = 0.37;
            let (u, v) = analytic_sdof(m, c, k, 0.2, -0.5, t).unwrap();
            let (_, vp) = analytic_sdof(m, c, k, 0.2, -0.5, t + h).unwrap();
            let (_, vm) = analytic_sdof(m, c, k, 0.2, -0.5, t - h).unwrap();
            let acc = (vp - vm) / (2.0 * h);
            assert!((m * acc + c * v + k * u).abs() < 1e-5, "c = {c}");
        }
    }
}
