use std::f64::consts::PI;

use dynsub_core::model::{DofPartition, FirstOrderModel, LinearSubstructure, Load, StateVector, Substructure};
use dynsub_core::models::{chain, frame_analog_system, ChainSpec, FrameAnalogSpec};
use dynsub_core::partitioned::{
    coupling_step, external_force, free_step, simulate, simulate_subcycled, EffectiveMatrix,
    FreePhase, FreeSolution, PartitionedSolver, Sequential, SteklovPoincare,
};
use dynsub_core::reduction::reduce_in_system;
use dynsub_core::reference::{analytic_sdof, solve_monolithic, solve_newmark};
use dynsub_core::{
    CoupledSystem, CouplingTopology, Error, InterfaceConstraint, Role, SolverConfig,
    SuspensionElement, ZeroInput,
};

fn sdof(m: f64, k: f64, boundary: bool) -> Substructure {
    LinearSubstructure::new(
        nalgebra::DMatrix::from_element(1, 1, m),
        None,
        nalgebra::DMatrix::from_element(1, 1, k),
        DofPartition::from_boundary(1, if boundary { vec![0] } else { vec![] }).unwrap(),
    )
    .unwrap()
    .into()
}

/// Grounded 6-mass chain loaded at DOF 1, joined tip-to-tip with a 4-mass chain.
fn two_chains(flip: bool) -> CoupledSystem {
    let a = chain(&ChainSpec::new(6, 1.0, 400.0, 0.2), vec![5])
        .unwrap()
        .with_loads(vec![Load::point(0, 1, 1.0)])
        .unwrap();
    let b = chain(&ChainSpec::new(4, 0.5, 900.0, 0.1), vec![3])
        .unwrap()
        .with_loads(vec![Load::point(1, 0, 1.0)])
        .unwrap();
    let mut c = InterfaceConstraint::between(0, 5, 1, 3);
    if flip {
        c = c.flipped();
    }
    CoupledSystem::numerical(vec![a.into(), b.into()], CouplingTopology::new(vec![c]).unwrap()).unwrap()
}

fn two_tone(ch: usize, t: f64) -> f64 {
    (2.0 * PI * (3.0 + 2.0 * ch as f64) * t).sin() * t.min(0.1) * 10.0
}

#[test]
fn zero_input_gives_zero_trajectory() {
    let sys = two_chains(false);
    let tr = simulate(&sys, &SolverConfig::new(1e-3, 0.2), &ZeroInput).unwrap();
    assert_eq!(tr.len(), 201);
    assert!(tr.states.iter().flatten().all(|y| y.as_slice().iter().all(|&x| x == 0.0)));
    assert!(tr.multipliers.iter().flatten().all(|&l| l == 0.0));
}

#[test]
fn velocity_compatibility_every_step() {
    let sys = two_chains(false);
    let tr = simulate(&sys, &SolverConfig::new(1e-3, 1.0), &two_tone).unwrap();
    for rec in &tr.compatibility[1..] {
        assert!(rec.coupled <= 1e-10 * rec.free.max(f64::MIN_POSITIVE), "{rec:?}");
    }
    let va = tr.velocity(0, 5);
    let vb = tr.velocity(1, 3);
    let scale = va.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (a, b) in va.iter().zip(&vb) {
        assert!((a - b).abs() <= 1e-10 * scale);
    }
}

#[test]
fn sign_convention_does_not_change_the_motion() {
    let cfg = SolverConfig::new(1e-3, 0.5);
    let a = simulate(&two_chains(false), &cfg, &two_tone).unwrap();
    let b = simulate(&two_chains(true), &cfg, &two_tone).unwrap();
    for (ya, yb) in a.states.iter().flatten().zip(b.states.iter().flatten()) {
        for (x, y) in ya.as_slice().iter().zip(yb.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
    for (la, lb) in a.multipliers.iter().zip(&b.multipliers) {
        assert!((la[0] + lb[0]).abs() <= 1e-9 * (1.0 + la[0].abs()));
    }
    let (plain, flipped) = (two_chains(false), two_chains(true));
    let sa = PartitionedSolver::new(&plain, cfg).unwrap();
    let sb = PartitionedSolver::new(&flipped, cfg).unwrap();
    let ha = sa.steklov_poincare().unwrap().operator()[(0, 0)];
    let hb = sb.steklov_poincare().unwrap().operator()[(0, 0)];
    // H is quadratic in the signs of a single constraint.
    assert!((ha - hb).abs() <= 1e-14 * ha.abs());
}

#[test]
fn identical_pair_operator_and_symmetric_free_states() {
    let topo = CouplingTopology::new(vec![InterfaceConstraint::between(0, 0, 1, 0)]).unwrap();
    let sys = CoupledSystem::numerical(vec![sdof(1.0, 4.0, true), sdof(1.0, 4.0, true)], topo.clone()).unwrap();
    let cfg = SolverConfig::new(0.01, 0.1);
    let solver = PartitionedSolver::new(&sys, cfg).unwrap();
    let d = solver.effective_matrix(0).dense();
    let dinv = d.try_inverse().unwrap();
    let h = solver.steklov_poincare().unwrap().operator()[(0, 0)];
    assert!((h - 2.0 * dinv[(1, 1)]).abs() < 1e-14);

    // Mirrored (already compatible) free states: no interface force.
    let sp = solver.steklov_poincare().unwrap();
    let y = [0.3, -0.7];
    let (lambda, links) = coupling_step(sp, &[&y, &y]);
    assert_eq!(lambda, vec![0.0]);
    assert!(links.iter().flatten().all(|&x| x == 0.0));
}

#[test]
fn post_coupling_residual_is_annihilated() {
    let sys = two_chains(false);
    let solver = PartitionedSolver::new(&sys, SolverConfig::new(1e-3, 1.0)).unwrap();
    let sp = solver.steklov_poincare().unwrap();
    let ya: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
    let yb: Vec<f64> = (0..8).map(|i| (i as f64 * 1.1).cos()).collect();
    let before = sp.residual(&[&ya, &yb])[0];
    let (lambda, links) = coupling_step(sp, &[&ya, &yb]);
    assert!(lambda[0] != 0.0);
    let ca: Vec<f64> = ya.iter().zip(&links[0]).map(|(a, b)| a + b).collect();
    let cb: Vec<f64> = yb.iter().zip(&links[1]).map(|(a, b)| a + b).collect();
    let after = sp.residual(&[&ca, &cb])[0];
    assert!(after.abs() <= 1e-10 * before.abs());
}

#[test]
fn action_reaction_through_locators() {
    let sys = two_chains(false);
    let topo = &sys.topology;
    let la = topo.locator(0, 6);
    let lb = topo.locator(1, 4);
    let lambda = 2.5;
    let fa: f64 = la.column(0).iter().sum::<f64>() * lambda;
    let fb: f64 = lb.column(0).iter().sum::<f64>() * lambda;
    assert_eq!(fa, -fb);
    assert_eq!(fa.abs(), lambda);
}

#[test]
fn empty_interface_operator_is_an_error() {
    let sub = sdof(1.0, 1.0, false);
    let d = EffectiveMatrix::new(&sub, 0.01, 0.5).unwrap();
    assert!(matches!(
        SteklovPoincare::assemble(&CouplingTopology::empty(), &[&d], 0.005),
        Err(Error::InvalidTopology(_))
    ));
}

#[test]
fn redundant_constraints_make_h_singular() {
    let topo = CouplingTopology::new(vec![
        InterfaceConstraint::between(0, 0, 1, 0),
        InterfaceConstraint::between(0, 0, 1, 0),
    ])
    .unwrap();
    let sys = CoupledSystem::numerical(vec![sdof(1.0, 1.0, true), sdof(1.0, 1.0, true)], topo).unwrap();
    assert!(matches!(
        PartitionedSolver::new(&sys, SolverConfig::new(0.01, 0.1)),
        Err(Error::Singular(_))
    ));
}

#[test]
fn single_substructure_is_repeated_free_steps() {
    let sub: Substructure = chain(&ChainSpec::new(3, 1.0, 50.0, 0.3), vec![])
        .unwrap()
        .with_loads(vec![Load::point(0, 2, 1.0)])
        .unwrap()
        .into();
    let sys = CoupledSystem::numerical(vec![sub.clone()], CouplingTopology::empty()).unwrap();
    let cfg = SolverConfig::new(0.01, 0.5);
    let tr = simulate(&sys, &cfg, &two_tone).unwrap();

    let d = EffectiveMatrix::new(&sub, cfg.dt, cfg.gamma).unwrap();
    let mut y = vec![0.0; 6];
    let mut f = vec![0.0; 6];
    external_force(&sub, &two_tone, 0.0, &mut f);
    let mut rate = vec![0.0; 6];
    for i in 0..3 {
        rate[3 + i] = f[3 + i] / sub.mass_matrix()[(i, i)];
    }
    for k in 1..tr.len() {
        external_force(&sub, &two_tone, k as f64 * cfg.dt, &mut f);
        let (yn, rn) = free_step(&sub, &d, &y, &rate, &f, cfg.dt, cfg.gamma).unwrap();
        y = yn;
        rate = rn;
        assert_eq!(tr.states[0][k].as_slice(), y.as_slice());
    }
}

#[test]
fn trapezoidal_global_error_is_second_order() {
    let sys = CoupledSystem::numerical(vec![sdof(1.0, 1.0, false)], CouplingTopology::empty()).unwrap();
    let y0 = [StateVector::from_parts(&[1.0], &[0.0]).unwrap()];
    let err = |dt: f64| {
        let solver = PartitionedSolver::new(&sys, SolverConfig::new(dt, 1.0)).unwrap();
        let tr = solver.run_with(&ZeroInput, Some(&y0), &Sequential).unwrap();
        let u = tr.states[0].last().unwrap().displacements()[0];
        (u - analytic_sdof(1.0, 0.0, 1.0, 1.0, 0.0, 1.0).unwrap().0).abs()
    };
    let (e1, e2, e3) = (err(1e-2), err(5e-3), err(2.5e-3));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn undamped_energy_is_conserved() {
    let sub: Substructure = chain(&ChainSpec::new(5, 1.0, 100.0, 0.0), vec![]).unwrap().into();
    let k = match &sub {
        Substructure::Linear(l) => l.stiffness().clone(),
        _ => unreachable!(),
    };
    let m = sub.mass_matrix().clone();
    let sys = CoupledSystem::numerical(vec![sub], CouplingTopology::empty()).unwrap();
    let y0 = StateVector::from_parts(&[0.1, -0.2, 0.05, 0.3, 0.0], &[0.0, 1.0, 0.0, -0.5, 0.2]).unwrap();
    let solver = PartitionedSolver::new(&sys, SolverConfig::new(1e-2, 100.0)).unwrap();
    let tr = solver.run_with(&ZeroInput, Some(&[y0]), &Sequential).unwrap();
    assert_eq!(tr.len(), 10_001);
    let energy = |y: &StateVector| {
        let u = nalgebra::DVector::from_column_slice(y.displacements());
        let v = nalgebra::DVector::from_column_slice(y.velocities());
        0.5 * (u.dot(&(&k * &u)) + v.dot(&(&m * &v)))
    };
    let e0 = energy(&tr.states[0][0]);
    for y in &tr.states[0] {
        assert!((energy(y) - e0).abs() <= 1e-10 * e0);
    }
}

#[test]
fn partitioned_matches_monolithic_and_newmark() {
    let sys = two_chains(false);
    let cfg = SolverConfig::new(1e-3, 1.0);
    let part = simulate(&sys, &cfg, &two_tone).unwrap();
    let mono = solve_monolithic(&sys, &cfg, &two_tone).unwrap();
    let newm = solve_newmark(&sys, &cfg, &two_tone).unwrap();
    for (s, dof) in [(0, 5), (1, 3), (0, 2)] {
        let a = part.displacement(s, dof);
        let b = mono.displacement(s, dof);
        let c = newm.displacement(s, dof);
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for k in 0..a.len() {
            assert!((a[k] - b[k]).abs() <= 1e-9 * scale, "step {k}");
            assert!((c[k] - b[k]).abs() <= 1e-9 * scale, "step {k}");
        }
    }
}

#[test]
fn subcycling_with_one_inner_step_is_the_plain_run() {
    let mut sys = two_chains(false);
    sys.roles[1] = Role::Physical;
    let cfg = SolverConfig::new(1e-3, 0.3);
    let a = simulate(&sys, &cfg, &two_tone).unwrap();
    let b = simulate_subcycled(&sys, &cfg, 1, &two_tone).unwrap();
    assert_eq!(a, b);
}

#[test]
fn subcycled_trace_has_inner_samples() {
    let spec = FrameAnalogSpec::default().with_nodes_per_rail(30);
    let (sys, _) = frame_analog_system(&spec, SuspensionElement::reference(0), true).unwrap();
    let (sys, _) = reduce_in_system(&sys, 0, 10).unwrap();
    let cfg = SolverConfig::new(1e-3, 0.05);
    let tr = simulate_subcycled(&sys, &cfg, 10, &two_tone).unwrap();
    assert!(tr.fine[0].is_none());
    let fine = tr.fine[1].as_ref().unwrap();
    assert_eq!(fine.states.len(), 10 * 50 + 1);
    for w in fine.times.windows(2) {
        assert!((w[1] - w[0] - 1e-4).abs() < 1e-12);
    }
    // The last inner sample of each window is the coupled state.
    for k in 0..tr.len() {
        assert_eq!(fine.states[10 * k], tr.states[1][k]);
    }
}

#[test]
fn divergence_detector_reports_the_step() {
    let sub: Substructure = LinearSubstructure::new(
        nalgebra::DMatrix::from_element(1, 1, 1.0),
        Some(nalgebra::DMatrix::from_element(1, 1, -20.0)),
        nalgebra::DMatrix::from_element(1, 1, 1.0),
        DofPartition::from_boundary(1, vec![]).unwrap(),
    )
    .unwrap()
    .into();
    let sys = CoupledSystem::numerical(vec![sub], CouplingTopology::empty()).unwrap();
    let y0 = [StateVector::from_parts(&[1.0], &[0.0]).unwrap()];
    let solver = PartitionedSolver::new(&sys, SolverConfig::new(1e-2, 10.0).with_divergence_bound(1e3)).unwrap();
    match solver.run_with(&ZeroInput, Some(&y0), &Sequential) {
        Err(Error::Diverged { step, time, norm }) => {
            assert!(step > 0 && step < 1000);
            assert!((time - step as f64 * 1e-2).abs() < 1e-12);
            assert!(norm > 1e3);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

struct Reversed;

impl FreePhase for Reversed {
    fn map(&self, count: usize, task: &(dyn Fn(usize) -> FreeSolution + Sync)) -> Vec<FreeSolution> {
        let mut out: Vec<FreeSolution> = (0..count).rev().map(task).collect();
        out.reverse();
        out
    }
}

#[test]
fn execution_order_does_not_matter() {
    let sys = two_chains(false);
    let solver = PartitionedSolver::new(&sys, SolverConfig::new(1e-3, 0.2)).unwrap();
    let a = solver.run(&two_tone).unwrap();
    let b = solver.run_with(&two_tone, None, &Reversed).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_configurations() {
    let sys = two_chains(false);
    for cfg in [
        SolverConfig::new(0.0, 1.0),
        SolverConfig::new(1e-3, 1.0).with_gamma(0.0),
        SolverConfig::new(1e-3, 1.0).with_gamma(1.5),
        SolverConfig::new(1e-3, 1.0).with_subcycles(0),
        SolverConfig::new(1e-3, -1.0),
    ] {
        assert!(matches!(PartitionedSolver::new(&sys, cfg), Err(Error::InvalidConfig(_))));
    }
}
