//! End-to-end experiment: optional reduction, partitioned run, monolithic
//! full-order reference, fidelity metrics and timings.
//!
//! Offline time covers the reduction and the solver set-up (tangents,
//! effective-matrix and interface-operator factorizations). Online time is
//! the time-stepping loop alone.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dynsub_core::metrics::trajectory_mse;
use dynsub_core::model::{FirstOrderModel, Substructure};
use dynsub_core::partitioned::FreePhase;
use dynsub_core::reduction::reduce_in_system;
use dynsub_core::reference::MonolithicSolver;
use dynsub_core::{CoupledSystem, PartitionedSolver, SolverConfig, Trajectory};
use serde::{Deserialize, Serialize};

use crate::artifact::{compare_modes, write_frequency_csv, write_mac_csv, ReductionArtifact};
use crate::csvio::{write_fine_trace, write_trajectory};
use crate::error::{Error, Result};
use crate::format::{read_json, write_json, ModelFile, SolverFile};
use crate::signals::{generate_signal, SignalKind, SignalSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(ModelFile),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    pub substructure: usize,
    pub modes: usize,
    /// Elastic modes in the frequency comparison.
    #[serde(default = "twenty")]
    pub compare_modes: usize,
    /// Elastic modes in the MAC matrix.
    #[serde(default = "ten")]
    pub mac_modes: usize,
}

fn twenty() -> usize {
    20
}

fn ten() -> usize {
    10
}

fn yes() -> bool {
    true
}

/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    #[serde(default)]
    pub reduction: Option<ReductionParams>,
    pub solver: SolverFile,
    pub signals: SignalSpec,
    /// Also run the full-order monolithic reference.
    #[serde(default = "yes")]
    pub monolithic: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub substructure: usize,
    pub modes: usize,
    pub full_dofs: usize,
    pub reduced_dofs: usize,
    /// Seconds spent in the reduction alone (part of `offline_time`).
    pub reduction_time: f64,
    pub first_discarded_frequency_hz: Option<f64>,
    pub skipped_rigid_modes: usize,
    pub compared_modes: usize,
    pub max_relative_frequency_error: f64,
    pub frequency_nmse: f64,
    pub mac_modes: usize,
    pub mac_min_diagonal: f64,
    pub mac_max_off_diagonal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonolithicReport {
    pub dofs: usize,
    pub offline_time: f64,
    pub online_time: f64,
}

/// Interface displacement of one side of one constraint, partitioned versus
/// monolithic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseEntry {
    pub constraint: usize,
    pub substructure: usize,
    /// DOF in the full-order numbering.
    pub dof: usize,
    pub mse: f64,
    pub relative_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Seconds.
    pub offline_time: f64,
    /// Seconds.
    pub online_time: f64,
    pub steps: usize,
    pub dt: f64,
    pub subcycles: usize,
    pub partitioned_dofs: usize,
    pub max_coupled_residual: f64,
    pub reduction: Option<ReductionReport>,
    pub monolithic: Option<MonolithicReport>,
    /// Monolithic online time over partitioned online time.
    pub speedup: Option<f64>,
    pub mse: Vec<MseEntry>,
}

/// Trajectories produced by [`run_experiment`] alongside the report.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub partitioned: Trajectory,
    pub monolithic: Option<Trajectory>,
    pub constraints: usize,
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> Result<(Self, PathBuf)> {
        let config: Self = read_json(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    fn model(&self, base: &Path) -> Result<ModelFile> {
        match &self.model {
            ModelSource::Path(p) => ModelFile::read(&base.join(p)),
            ModelSource::Inline(m) => Ok(m.clone()),
        }
    }
}

fn dofs(system: &CoupledSystem) -> usize {
    system.substructures.iter().map(|s| s.dofs()).sum()
}

fn check_channels(system: &CoupledSystem, available: usize) -> Result<()> {
    for (s, sub) in system.substructures.iter().enumerate() {
        if let Some(load) = sub.loads().iter().find(|l| l.channel >= available) {
            return Err(Error::Format(format!(
                "substructure {s} reads input channel {} but the signals have {available} channels",
                load.channel
            )));
        }
    }
    Ok(())
}

pub fn run_experiment(config: &ExperimentConfig, base: &Path, exec: &dyn FreePhase) -> Result<Outcome> {
    let full = config.model(base)?.build()?;
    let solver_config: SolverConfig = config.solver.into();
    solver_config.validate()?;

    let mut signal_spec = config.signals.clone();
    if let SignalKind::File { path } = &mut signal_spec.kind {
        *path = base.join(&*path);
    }
    let n_samples = (solver_config.duration * signal_spec.sample_rate).ceil() as usize + 1;
    let signals = generate_signal(&signal_spec, n_samples)?;
    check_channels(&full, signals.channels.len())?;
    let inputs = signals.sampled()?;

    let offline_start = Instant::now();
    let (system, reduction) = match config.reduction {
        Some(p) => {
            let (sys, red) = reduce_in_system(&full, p.substructure, p.modes)?;
            (sys, Some((p, red, offline_start.elapsed().as_secs_f64())))
        }
        None => (full.clone(), None),
    };
    let solver = PartitionedSolver::new(&system, solver_config)?;
    let offline_time = offline_start.elapsed().as_secs_f64();

    let online_start = Instant::now();
    let partitioned = solver.run_with(&inputs, None, exec)?;
    let online_time = online_start.elapsed().as_secs_f64();

    let monolithic = if config.monolithic {
        let start = Instant::now();
        let mono = MonolithicSolver::new(&full, solver_config)?;
        let mono_offline = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let traj = mono.run(&inputs)?;
        let mono_online = start.elapsed().as_secs_f64();
        Some((
            traj,
            MonolithicReport {
                dofs: dofs(&full),
                offline_time: mono_offline,
                online_time: mono_online,
            },
        ))
    } else {
        None
    };

    let reduction_report = match &reduction {
        Some((p, red, reduction_time)) => {
            let Substructure::Linear(sub) = &full.substructures[p.substructure] else {
                unreachable!("reduction succeeded on a linear substructure")
            };
            let artifact = ReductionArtifact::new(p.substructure, sub, red);
            let available = red.reduced_dofs();
            let rigid = crate::artifact::rigid_mode_count(
                &dynsub_core::linalg::generalized_symmetric_eigen(sub.stiffness(), sub.mass())?.values,
            );
            let n_freq = p.compare_modes.min(available - rigid);
            let n_mac = p.mac_modes.min(available - rigid);
            let cmp = compare_modes(sub, &artifact, n_freq, n_mac, Some(rigid))?;
            if let Some(dir) = &config.output_dir {
                let dir = base.join(dir);
                fs::create_dir_all(&dir).map_err(|source| Error::Io {
                    path: dir.clone(),
                    source,
                })?;
                artifact.write(&dir.join("reduction.json"))?;
                write_frequency_csv(&dir.join("frequencies.csv"), &cmp.frequencies, rigid)?;
                write_mac_csv(&dir.join("mac.csv"), &cmp.mac, rigid)?;
            }
            Some(ReductionReport {
                substructure: p.substructure,
                modes: p.modes,
                full_dofs: red.full_dofs(),
                reduced_dofs: red.reduced_dofs(),
                reduction_time: *reduction_time,
                first_discarded_frequency_hz: artifact.first_discarded_frequency_hz,
                skipped_rigid_modes: rigid,
                compared_modes: n_freq,
                max_relative_frequency_error: cmp.frequencies.max_abs_relative(),
                frequency_nmse: cmp.frequencies.nmse,
                mac_modes: n_mac,
                mac_min_diagonal: cmp.mac.min_diagonal(),
                mac_max_off_diagonal: cmp.mac.max_off_diagonal(),
            })
        }
        None => None,
    };

    let mut mse = Vec::new();
    if let Some((mono, _)) = &monolithic {
        let reduced_sides = system.topology.constraints();
        for (k, c) in full.topology.constraints().iter().enumerate() {
            let r = &reduced_sides[k];
            for (full_side, red_side) in [(c.a, r.a), (c.b, r.b)] {
                let m = trajectory_mse(
                    &partitioned.displacement(red_side.substructure, red_side.dof),
                    &mono.displacement(full_side.substructure, full_side.dof),
                )?;
                mse.push(MseEntry {
                    constraint: k,
                    substructure: full_side.substructure,
                    dof: full_side.dof,
                    mse: m.mse,
                    relative_mse: m.relative,
                });
            }
        }
    }

    let report = Report {
        offline_time,
        online_time,
        steps: solver_config.steps(),
        dt: solver_config.dt,
        subcycles: solver_config.subcycles,
        partitioned_dofs: dofs(&system),
        max_coupled_residual: partitioned
            .compatibility
            .iter()
            .fold(0.0, |m, r| m.max(r.coupled)),
        reduction: reduction_report,
        speedup: monolithic
            .as_ref()
            .map(|(_, r)| r.online_time / online_time.max(f64::MIN_POSITIVE)),
        monolithic: monolithic.as_ref().map(|(_, r)| *r),
        mse,
    };

    let constraints = system.topology.len();
    if let Some(dir) = &config.output_dir {
        let dir = base.join(dir);
        fs::create_dir_all(&dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        write_trajectory(&dir.join("partitioned.csv"), &partitioned, constraints)?;
        if let Some((mono, _)) = &monolithic {
            write_trajectory(&dir.join("monolithic.csv"), mono, constraints)?;
        }
        for (s, fine) in partitioned.fine.iter().enumerate() {
            if let Some(trace) = fine {
                write_fine_trace(&dir.join(format!("fine_s{s}.csv")), s, trace)?;
            }
        }
        write_json(&dir.join("report.json"), &report)?;
    }

    Ok(Outcome {
        report,
        partitioned,
        monolithic: monolithic.map(|(t, _)| t),
        constraints,
    })
}
