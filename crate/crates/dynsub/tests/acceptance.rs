//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use dynsub::signals::{
    band_power_fraction, default_frequencies, generate_signal, sample_variance, NoiseSpec, SignalKind,
    SignalSpec,
};
use dynsub_core::linalg::generalized_symmetric_eigen;
use dynsub_core::metrics::{frequency_error_table, mac, smoothness, trajectory_mse};
use dynsub_core::model::{finite_difference_tangent, FirstOrderModel, StateVector, Substructure, FD_STEP};
use dynsub_core::models::{frame_analog, frame_analog_system, linear_frame_system, FrameAnalogSpec};
use dynsub_core::partitioned::{simulate, simulate_subcycled, Sequential};
use dynsub_core::reduction::{reduce, reduce_in_system};
use dynsub_core::reference::{analytic_sdof, solve_monolithic, MonolithicSolver};
use dynsub_core::{
    CoupledSystem, CouplingTopology, DofPartition, LinearSubstructure, NonlinearSubstructure,
    PartitionedSolver, Role, SampledSignals, SolverConfig, SuspensionElement, Trajectory,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Multi-sine excitation with band-limited noise on four channels.
fn excitation(sample_rate: f64, duration: f64) -> SampledSignals {
    let spec = SignalSpec {
        kind: SignalKind::Multisine {
            frequencies: default_frequencies(),
            amplitudes: vec![0.5],
            phases: vec![0.0, 0.4, 1.1, 2.0, 2.9],
            noise: Some(NoiseSpec {
                band: Some([0.0, 200.0]),
                variance: 0.05,
                seed: 2024,
            }),
        },
        sample_rate,
        channels: 4,
    };
    let n = (duration * sample_rate).round() as usize + 1;
    generate_signal(&spec, n).unwrap().sampled().unwrap()
}

/// Frame analog with four nonlinear suspensions; the frame replaced by its
/// 30-mode Craig-Bampton model.
fn reduced_hybrid(nodes_per_rail: usize) -> (CoupledSystem, CoupledSystem) {
    let spec = FrameAnalogSpec::default().with_nodes_per_rail(nodes_per_rail);
    let (full, _) = frame_analog_system(&spec, SuspensionElement::reference(0), true).unwrap();
    let (reduced, _) = reduce_in_system(&full, 0, 30).unwrap();
    (full, reduced)
}

fn interface_discrepancy(system: &CoupledSystem, tr: &Trajectory) -> f64 {
    let mut worst = 0.0f64;
    for c in system.topology.constraints() {
        let a = tr.displacement(c.a.substructure, c.a.dof);
        let b = tr.displacement(c.b.substructure, c.b.dof);
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let frame = frame_analog(&FrameAnalogSpec::default()).unwrap().frame;
    let red = reduce(&frame, 30).unwrap();
    let full = generalized_symmetric_eigen(frame.stiffness(), frame.mass()).unwrap();
    let reduced = generalized_symmetric_eigen(&red.reduced_stiffness, &red.reduced_mass).unwrap();
    let rigid = dynsub::artifact::rigid_mode_count(&full.values);
    let table = frequency_error_table(
        &full.frequencies()[rigid..],
        &reduced.frequencies()[rigid..],
        20,
    )
    .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let err = table.max_abs_relative();
    check(
        err <= 1e-3 && elapsed < 10.0 && frame.dofs() >= 200 && frame.partition().boundary().len() == 4,
        format!(
            "{} DOFs, 4 boundary, r=30: max relative error {err:.3e} over 20 elastic modes \
             ({rigid} rigid skipped), NMSE {:.2e}, {elapsed:.2} s",
            frame.dofs(),
            table.nmse
        ),
    )
}

fn criterion_2() -> Outcome {
    let frame = frame_analog(&FrameAnalogSpec::default()).unwrap().frame;
    let red = reduce(&frame, 30).unwrap();
    let full = generalized_symmetric_eigen(frame.stiffness(), frame.mass()).unwrap();
    let reduced = generalized_symmetric_eigen(&red.reduced_stiffness, &red.reduced_mass).unwrap();
    let rigid = dynsub::artifact::rigid_mode_count(&full.values);
    let phi = full.vectors.columns(rigid, 10).into_owned();
    let psi = red
        .expand_modes(&reduced.vectors.columns(rigid, 10).into_owned())
        .unwrap();
    let m = mac(&phi, &psi).unwrap();
    let (diag, off) = (m.min_diagonal(), m.max_off_diagonal());
    check(
        diag >= 0.999 && off <= 0.01,
        format!("first 10 elastic modes: diagonal min {diag:.7}, off-diagonal max {off:.4}"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (system, _) = linear_frame_system(&FrameAnalogSpec::default(), SuspensionElement::reference(0)).unwrap();
    let config = SolverConfig::new(1e-3, 1.0);
    let inputs = excitation(1000.0, 1.0);
    let part = simulate(&system, &config, &inputs).unwrap();
    let mono = solve_monolithic(&system, &config, &inputs).unwrap();
    let mut worst = 0.0f64;
    for c in system.topology.constraints() {
        for side in [c.a, c.b] {
            let m = trajectory_mse(
                &part.displacement(side.substructure, side.dof),
                &mono.displacement(side.substructure, side.dof),
            )
            .unwrap();
            worst = worst.max(m.relative);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-6 && elapsed < 30.0,
        format!(
            "2 substructures, {} boundary traces, dt=1e-3 over 1 s: worst relative MSE {worst:.2e}, {elapsed:.2} s",
            2 * system.topology.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let (_, system) = reduced_hybrid(120);
    let inputs = excitation(10_000.0, 1.0);
    let mut worst_residual = 0.0f64;
    for ss in [1, 10] {
        let tr = simulate_subcycled(&system, &SolverConfig::new(1e-3, 1.0), ss, &inputs).unwrap();
        for rec in &tr.compatibility[1..] {
            let rel = if rec.free > 0.0 { rec.coupled / rec.free } else { rec.coupled };
            worst_residual = worst_residual.max(rel);
        }
    }
    let disc = |dt: f64, ss: usize| {
        let tr = simulate_subcycled(&system, &SolverConfig::new(dt, 1.0), ss, &inputs).unwrap();
        interface_discrepancy(&system, &tr)
    };
    let (coarse, fine) = (disc(1e-3, 10), disc(5e-4, 10));
    let order = (coarse / fine).log2();
    let plain = disc(1e-3, 1);
    check(
        worst_residual <= 1e-10 && order >= 1.0,
        format!(
            "velocity residual after coupling <= {worst_residual:.1e} of the free residual; \
             sub-cycled (ss=10) displacement gap {coarse:.3e} -> {fine:.3e} at dt/2, order {order:.2}; \
             without sub-cycling the gap is {plain:.1e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let (m, k, u0) = (0.5, 30.0, 0.01);
    let sub: Substructure = LinearSubstructure::new(
        nalgebra::DMatrix::from_element(1, 1, m),
        None,
        nalgebra::DMatrix::from_element(1, 1, k),
        DofPartition::from_boundary(1, vec![]).unwrap(),
    )
    .unwrap()
    .into();
    let system = CoupledSystem::numerical(vec![sub], CouplingTopology::empty()).unwrap();
    let exact = analytic_sdof(m, 0.0, k, u0, 0.0, 1.0).unwrap().0;
    let error = |dt: f64| {
        let solver = PartitionedSolver::new(&system, SolverConfig::new(dt, 1.0)).unwrap();
        let y0 = [StateVector::from_parts(&[u0], &[0.0]).unwrap()];
        let tr = solver
            .run_with(&dynsub_core::ZeroInput, Some(&y0), &Sequential)
            .unwrap();
        (tr.states[0].last().unwrap().displacements()[0] - exact).abs()
    };
    let (e1, e2) = (error(1e-3), error(5e-4));
    let ratio = e1 / e2;
    check(
        (3.5..=4.5).contains(&ratio),
        format!("error at t=1 s: {e1:.3e} (dt=1e-3), {e2:.3e} (dt=5e-4), ratio {ratio:.3}"),
    )
}

fn criterion_6() -> Outcome {
    let (_, physical) = reduced_hybrid(120);
    let mut numerical = physical.clone();
    numerical.roles = vec![Role::Numerical; numerical.len()];
    let inputs = excitation(1000.0, 1.0);
    let config = SolverConfig::new(1e-3, 1.0);
    let base = simulate(&numerical, &config, &inputs).unwrap();
    let sub1 = simulate_subcycled(&physical, &config, 1, &inputs).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in base.states.iter().flatten().zip(sub1.states.iter().flatten()) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            worst = worst.max((x - y).abs());
        }
    }
    for (a, b) in base.multipliers.iter().flatten().zip(sub1.multipliers.iter().flatten()) {
        worst = worst.max((a - b).abs());
    }
    check(
        worst <= 1e-12,
        format!("{} samples, largest per-sample difference {worst:.1e}", base.len()),
    )
}

fn criterion_7() -> Outcome {
    let (_, system) = reduced_hybrid(120);
    let inputs = excitation(10_000.0, 1.0);
    let short = SolverConfig::new(1e-3, 0.2);
    let coarse = simulate(&system, &short, &inputs).unwrap();
    let fine = simulate_subcycled(&system, &short, 10, &inputs);
    let fine = match fine {
        Ok(t) => t,
        Err(e) => return Err(format!("ss=10 run aborted in the first 0.2 s: {e}")),
    };
    let (mut coarse_max, mut fine_max) = (0.0f64, 0.0f64);
    for s in 1..=4 {
        let wheel = coarse.displacement(s, 0);
        coarse_max = coarse_max.max(smoothness(&wheel, 1e-3).unwrap().max_difference);
        let trace = fine.fine_displacement(s, 0).unwrap();
        fine_max = fine_max.max(smoothness(&trace, 1e-4).unwrap().max_difference);
    }
    let long = simulate_subcycled(&system, &SolverConfig::new(1e-3, 1.0), 10, &inputs);
    let note = match long {
        Ok(_) => "also stable over 1 s".to_string(),
        Err(e) => format!("over 1 s: {e}"),
    };
    check(
        fine_max < coarse_max,
        format!(
            "wheel max first difference {fine_max:.3e} (ss=10, fine sampling) vs {coarse_max:.3e} (ss=1); \
             no divergence in 0.2 s, {note}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let spec = FrameAnalogSpec::default().with_nodes_per_rail(500);
    let (full, _) = frame_analog_system(&spec, SuspensionElement::reference(0), true).unwrap();
    let full_dofs: usize = full.substructures.iter().map(|s| s.dofs()).sum();
    let config = SolverConfig::new(1e-3, 1.0);
    let inputs = excitation(1000.0, 1.0);

    let t = Instant::now();
    let (reduced, _) = reduce_in_system(&full, 0, 30).unwrap();
    let solver = PartitionedSolver::new(&reduced, config).unwrap();
    let offline = t.elapsed().as_secs_f64();
    let t = Instant::now();
    solver.run(&inputs).unwrap();
    let online = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mono = MonolithicSolver::new(&full, config).unwrap();
    let mono_offline = t.elapsed().as_secs_f64();
    let t = Instant::now();
    mono.run(&inputs).unwrap();
    let mono_online = t.elapsed().as_secs_f64();

    let speedup = mono_online / online;
    check(
        full_dofs >= 1000 && speedup >= 10.0,
        format!(
            "{full_dofs} DOFs, 1000 steps: partitioned online {:.1} ms vs monolithic online {:.1} ms \
             ({speedup:.0}x); offline {:.2} s (reduction + set-up) vs {:.2} s",
            online * 1e3,
            mono_online * 1e3,
            offline,
            mono_offline
        ),
    )
}

fn criterion_9() -> Outcome {
    let e = SuspensionElement::reference(0);
    let sub: Substructure = NonlinearSubstructure::new(vec![e], true).unwrap().into();
    let analytic = sub.tangent_at_zero();
    let fd = finite_difference_tangent(&sub, &StateVector::zeros(sub.dofs()), FD_STEP);
    let expected = e.c1 + e.c2 / e.c3;
    let damping = analytic.damping[(0, 0)];
    let scale = analytic.damping.amax().max(analytic.stiffness.amax());
    let rel = (&fd.damping - &analytic.damping)
        .amax()
        .max((&fd.stiffness - &analytic.stiffness).amax())
        / scale;
    check(
        (damping - expected).abs() <= 1e-12 * expected && rel <= 1e-6,
        format!("damping entry {damping:.6} (c1 + c2/c3 = {expected:.6}); finite differences agree to {rel:.1e}"),
    )
}

fn criterion_10() -> Outcome {
    let spec = SignalSpec {
        kind: SignalKind::BandlimitedWhiteNoise(NoiseSpec {
            band: Some([0.0, 200.0]),
            variance: 1.0,
            seed: 42,
        }),
        sample_rate: 1000.0,
        channels: 1,
    };
    let x = &generate_signal(&spec, 100_000).unwrap().channels[0];
    let var = sample_variance(x);
    let inband = band_power_fraction(x, 1000.0, 0.0, 200.0);
    check(
        (var - 1.0).abs() <= 0.05 && inband > 0.99,
        format!("1e5 samples at 1 kHz: variance {var:.4}, {:.4}% of power in 0-200 Hz", 100.0 * inband),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Craig-Bampton frequency fidelity", criterion_1),
        ("MAC fidelity", criterion_2),
        ("partitioned vs monolithic equivalence", criterion_3),
        ("soft-coupling compatibility", criterion_4),
        ("integrator order", criterion_5),
        ("sub-cycling degeneracy", criterion_6),
        ("sub-cycling smoothness", criterion_7),
        ("speedup", criterion_8),
        ("tangent correctness", criterion_9),
        ("signal generator", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
