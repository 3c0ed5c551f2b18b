use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dynsub::artifact::{compare_modes, write_frequency_csv, write_mac_csv, ReductionArtifact};
use dynsub::csvio::{read_signals, read_table, write_fine_trace, write_signals, write_table, write_trajectory, Table};
use dynsub::experiment::{run_experiment, ExperimentConfig};
use dynsub::format::{
    frame_model, Body, ChainGenerator, ChainParams, ElementEntry, FrameParams, LoadEntry,
    ModelFile, RoleName, SolverFile, SubstructureEntry,
};
use dynsub::parallel::executor_from_env;
use dynsub::signals::{default_frequencies, generate_signal, NoiseSpec, SignalKind, SignalSpec};
use dynsub_core::metrics::trajectory_mse;
use dynsub_core::model::Substructure;
use dynsub_core::reduction::reduce_in_system;
use dynsub_core::reference::MonolithicSolver;
use dynsub_core::{LinearSubstructure, PartitionedSolver, SolverConfig};

/// Dynamic substructuring: Craig-Bampton reduction and partitioned
/// simulation of coupled linear and nonlinear substructures.
///
/// The free-phase thread count is read from DYNSUB_THREADS (unset or 1:
/// sequential, 0: one thread per core).
#[derive(Parser)]
#[command(name = "dynsub", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a model file for a generated structure.
    GenerateModel(GenerateModel),
    /// Write excitation signals as CSV.
    GenerateSignal(GenerateSignal),
    /// Craig-Bampton reduction of one linear substructure.
    Reduce(Reduce),
    /// Time integration of a coupled model.
    Simulate(Simulate),
    /// Compare two trajectories, or a full model with its reduction.
    Compare(Compare),
    /// MAC matrix between full and reduced mode shapes.
    Mac(Mac),
    /// Reduction, partitioned and monolithic runs with a timing report.
    RunExperiment(RunExperiment),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Chain,
    FrameAnalog,
}

#[derive(Args)]
struct GenerateModel {
    #[arg(value_enum)]
    kind: ModelKind,
    #[arg(long)]
    out: PathBuf,
    /// Chain: number of masses.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Chain: mass per DOF.
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// Chain: spring stiffness.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// Chain: dashpot coefficient.
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    /// Chain: leave DOF 0 unattached to ground.
    #[arg(long)]
    free_free: bool,
    /// Chain: boundary DOFs.
    #[arg(long, value_delimiter = ',')]
    boundary: Vec<usize>,
    /// Chain: apply input channel 0 at this DOF.
    #[arg(long)]
    load_dof: Option<usize>,
    /// Frame: nodes per rail (model has twice as many DOFs).
    #[arg(long, default_value_t = 120)]
    nodes_per_rail: usize,
    /// Frame: suspensions act on absolute instead of relative wheel motion.
    #[arg(long)]
    absolute_motion: bool,
    /// Frame: Rayleigh damping coefficients `alpha,beta`.
    #[arg(long, value_delimiter = ',')]
    rayleigh: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalChoice {
    Multisine,
    Noise,
}

#[derive(Args)]
struct GenerateSignal {
    #[arg(long)]
    out: PathBuf,
    /// JSON signal specification; overrides the flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "multisine")]
    kind: SignalChoice,
    /// Hz
    #[arg(long, default_value_t = 1000.0)]
    sample_rate: f64,
    #[arg(long, default_value_t = 1)]
    channels: usize,
    /// Seconds; the file holds `duration * sample_rate + 1` samples.
    #[arg(long, conflicts_with = "samples")]
    duration: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Multi-sine frequencies, Hz.
    #[arg(long, value_delimiter = ',')]
    frequencies: Option<Vec<f64>>,
    /// Multi-sine amplitude (all components).
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// Noise variance (added to a multi-sine, or the whole signal for `noise`).
    #[arg(long)]
    variance: Option<f64>,
    /// Noise band `low,high` in Hz.
    #[arg(long, value_delimiter = ',')]
    band: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Reduce {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    substructure: usize,
    #[arg(long)]
    modes: usize,
    /// Reduction artifact (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Model file with the substructure replaced by its reduced model.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Frequency comparison CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Elastic modes in the frequency comparison.
    #[arg(long, default_value_t = 20)]
    report_modes: usize,
}

#[derive(Args)]
struct Simulate {
    #[arg(long)]
    model: PathBuf,
    /// Solver JSON: dt, duration and optional gamma, subcycles, divergence_bound.
    #[arg(long)]
    config: PathBuf,
    /// Input CSV; no file means zero excitation.
    #[arg(long)]
    inputs: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Inner steps per coupled step for physical substructures.
    #[arg(long)]
    subcycles: Option<usize>,
    /// Solve the assembled system in one piece instead.
    #[arg(long, conflicts_with = "subcycles")]
    monolithic: bool,
    /// Prefix for fine-sampled traces of sub-cycled substructures.
    #[arg(long)]
    fine_out: Option<PathBuf>,
}

#[derive(Args)]
struct Compare {
    /// Reference trajectory CSV.
    #[arg(long, requires = "test", conflicts_with_all = ["full", "reduced"])]
    reference: Option<PathBuf>,
    /// Trajectory CSV compared with the reference.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Full model file.
    #[arg(long, requires = "reduced")]
    full: Option<PathBuf>,
    /// Reduction artifact.
    #[arg(long)]
    reduced: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    modes: usize,
    #[arg(long, default_value_t = 10)]
    mac_modes: usize,
    /// Rigid-body modes to skip; detected when absent.
    #[arg(long)]
    skip: Option<usize>,
    /// MSE summary or frequency table CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// MAC matrix CSV (model comparison).
    #[arg(long)]
    mac_out: Option<PathBuf>,
}

#[derive(Args)]
struct Mac {
    #[arg(long)]
    full: PathBuf,
    #[arg(long)]
    reduced: PathBuf,
    #[arg(long, default_value_t = 10)]
    modes: usize,
    #[arg(long)]
    skip: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunExperiment {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` of the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateModel(a) => generate_model(a),
        Command::GenerateSignal(a) => generate_signal_cmd(a),
        Command::Reduce(a) => reduce(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Mac(a) => mac(a),
        Command::RunExperiment(a) => run_experiment_cmd(a),
    }
}

fn generate_model(a: GenerateModel) -> Result<()> {
    let model = match a.kind {
        ModelKind::Chain => ModelFile {
            substructures: vec![SubstructureEntry {
                role: RoleName::Numerical,
                body: Body::Chain {
                    spec: ChainGenerator::Params(ChainParams {
                        n: a.n,
                        m: a.m,
                        k: a.k,
                        c: a.c,
                        grounded: !a.free_free,
                    }),
                    boundary: a.boundary,
                    loads: a
                        .load_dof
                        .map(|dof| LoadEntry {
                            channel: 0,
                            weights: vec![(dof, 1.0)],
                        })
                        .into_iter()
                        .collect(),
                },
            }],
            constraints: Vec::new(),
        },
        ModelKind::FrameAnalog => {
            let mut params = FrameParams {
                nodes_per_rail: a.nodes_per_rail,
                ..FrameParams::default()
            };
            if let Some(r) = a.rayleigh {
                if r.len() != 2 {
                    bail!("--rayleigh takes two values, alpha,beta");
                }
                params.rayleigh_alpha = r[0];
                params.rayleigh_beta = r[1];
            }
            frame_model(params, ElementEntry::default(), !a.absolute_motion)?
        }
    };
    // Validate before writing.
    let system = model.build()?;
    model.write(&a.out)?;
    let dofs: usize = system.substructures.iter().map(|s| s.partition().len()).sum();
    eprintln!(
        "wrote {} substructures, {} constraints, {dofs} DOFs to {}",
        system.len(),
        system.topology.len(),
        a.out.display()
    );
    Ok(())
}

fn generate_signal_cmd(a: GenerateSignal) -> Result<()> {
    let spec = match &a.spec {
        Some(path) => dynsub::format::read_json::<SignalSpec>(path)?,
        None => {
            let band = match a.band.as_deref() {
                None => None,
                Some(&[lo, hi]) => Some([lo, hi]),
                Some(_) => bail!("--band takes two values, low,high"),
            };
            let kind = match a.kind {
                SignalChoice::Multisine => SignalKind::Multisine {
                    frequencies: a.frequencies.clone().unwrap_or_else(default_frequencies),
                    amplitudes: vec![a.amplitude],
                    phases: Vec::new(),
                    noise: a.variance.map(|variance| NoiseSpec {
                        band,
                        variance,
                        seed: a.seed,
                    }),
                },
                SignalChoice::Noise => SignalKind::BandlimitedWhiteNoise(NoiseSpec {
                    band,
                    variance: a.variance.unwrap_or(1.0),
                    seed: a.seed,
                }),
            };
            SignalSpec {
                kind,
                sample_rate: a.sample_rate,
                channels: a.channels,
            }
        }
    };
    let samples = match (a.samples, a.duration) {
        (Some(n), _) => n,
        (None, Some(t)) => (t * spec.sample_rate).round() as usize + 1,
        (None, None) => spec.sample_rate.round() as usize + 1,
    };
    let signals = generate_signal(&spec, samples)?;
    write_signals(&a.out, &signals)?;
    Ok(())
}

fn linear_substructure(model: &ModelFile, s: usize) -> Result<LinearSubstructure> {
    let system = model.build()?;
    match system.substructures.into_iter().nth(s) {
        Some(Substructure::Linear(l)) => Ok(l),
        Some(_) => bail!("substructure {s} is not linear"),
        None => bail!("model has no substructure {s}"),
    }
}

fn reduce(a: Reduce) -> Result<()> {
    let model = ModelFile::read(&a.model)?;
    let system = model.build()?;
    let start = Instant::now();
    let (reduced, red) = reduce_in_system(&system, a.substructure, a.modes)?;
    let elapsed = start.elapsed().as_secs_f64();
    let Substructure::Linear(sub) = &system.substructures[a.substructure] else {
        unreachable!("reduction succeeded")
    };
    let artifact = ReductionArtifact::new(a.substructure, sub, &red);
    artifact.write(&a.out)?;
    if let Some(path) = &a.model_out {
        ModelFile::from_system(&reduced)?.write(path)?;
    }
    if let Some(path) = &a.report {
        let available = red.reduced_dofs();
        let probe = compare_modes(sub, &artifact, 0, 0, None)?;
        let n = a.report_modes.min(available - probe.skipped);
        let cmp = compare_modes(sub, &artifact, n, 0, Some(probe.skipped))?;
        write_frequency_csv(path, &cmp.frequencies, probe.skipped)?;
        eprintln!(
            "max relative frequency error over {n} modes: {:.3e}",
            cmp.frequencies.max_abs_relative()
        );
    }
    eprintln!(
        "reduced {} DOFs to {} in {elapsed:.3} s; first discarded mode {}",
        red.full_dofs(),
        red.reduced_dofs(),
        artifact
            .first_discarded_frequency_hz
            .map_or("none".to_string(), |f| format!("{f:.2} Hz"))
    );
    Ok(())
}

fn simulate(a: Simulate) -> Result<()> {
    let system = ModelFile::read(&a.model)?.build()?;
    let file: SolverFile = dynsub::format::read_json(&a.config)?;
    let mut config: SolverConfig = file.into();
    if let Some(ss) = a.subcycles {
        config = config.with_subcycles(ss);
    }
    let inputs: Box<dyn dynsub_core::InputSignals> = match &a.inputs {
        Some(path) => Box::new(read_signals(path)?.sampled()?),
        None => Box::new(dynsub_core::ZeroInput),
    };
    let constraints = system.topology.len();
    let start = Instant::now();
    let traj = if a.monolithic {
        MonolithicSolver::new(&system, config)?.run(inputs.as_ref())?
    } else {
        let exec = executor_from_env()?;
        let solver = PartitionedSolver::new(&system, config)?;
        solver
            .run_with(inputs.as_ref(), None, exec.as_ref())
            .context("partitioned simulation aborted")?
    };
    eprintln!(
        "{} steps in {:.3} s",
        traj.len().saturating_sub(1),
        start.elapsed().as_secs_f64()
    );
    write_trajectory(&a.out, &traj, constraints)?;
    if let Some(prefix) = &a.fine_out {
        for (s, fine) in traj.fine.iter().enumerate() {
            if let Some(trace) = fine {
                write_fine_trace(&suffixed(prefix, s), s, trace)?;
            }
        }
    }
    Ok(())
}

/// `prefix_s{s}.csv`
fn suffixed(prefix: &Path, s: usize) -> PathBuf {
    let stem = prefix.file_stem().unwrap_or_default().to_string_lossy();
    prefix.with_file_name(format!("{stem}_s{s}.csv"))
}

fn emit(table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_table(path, table)?,
        None => {
            println!("{}", table.headers.join(","));
            for r in 0..table.rows() {
                let row: Vec<String> = table.columns.iter().map(|c| format!("{}", c[r])).collect();
                println!("{}", row.join(","));
            }
        }
    }
    Ok(())
}

fn compare(a: Compare) -> Result<()> {
    if let (Some(reference), Some(test)) = (&a.reference, &a.test) {
        let r = read_table(reference)?;
        let t = read_table(test)?;
        if r.rows() != t.rows() {
            bail!("trajectories have {} and {} rows", r.rows(), t.rows());
        }
        let mut names = Vec::new();
        let (mut mse, mut rel, mut max) = (Vec::new(), Vec::new(), Vec::new());
        for (h, col) in r.headers.iter().zip(&r.columns) {
            let Some(other) = t.column(h) else { continue };
            if h == "time" || col.iter().chain(other).any(|x| x.is_nan()) {
                continue;
            }
            let m = trajectory_mse(other, col)?;
            names.push(h.clone());
            mse.push(m.mse);
            rel.push(m.relative);
            max.push(col.iter().zip(other).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs())));
        }
        // Column names are not numeric, so this table is written by hand.
        let mut text = String::from("column,mse,relative_mse,max_abs_error\n");
        for i in 0..names.len() {
            text.push_str(&format!("{},{},{},{}\n", names[i], mse[i], rel[i], max[i]));
        }
        match &a.out {
            Some(path) => std::fs::write(path, text).with_context(|| path.display().to_string())?,
            None => print!("{text}"),
        }
        return Ok(());
    }
    let (Some(full), Some(reduced)) = (&a.full, &a.reduced) else {
        bail!("give either --reference and --test, or --full and --reduced");
    };
    let artifact = ReductionArtifact::read(reduced)?;
    let sub = linear_substructure(&ModelFile::read(full)?, artifact.substructure)?;
    let cmp = compare_modes(&sub, &artifact, a.modes, a.mac_modes, a.skip)?;
    emit(&dynsub::artifact::frequency_table(&cmp.frequencies, cmp.skipped), a.out.as_deref())?;
    if let Some(path) = &a.mac_out {
        write_mac_csv(path, &cmp.mac, cmp.skipped)?;
    }
    eprintln!(
        "skipped {} rigid modes; max relative frequency error {:.3e}, NMSE {:.3e}; MAC diagonal min {:.6}, off-diagonal max {:.4}",
        cmp.skipped,
        cmp.frequencies.max_abs_relative(),
        cmp.frequencies.nmse,
        cmp.mac.min_diagonal(),
        cmp.mac.max_off_diagonal()
    );
    Ok(())
}

fn mac(a: Mac) -> Result<()> {
    let artifact = ReductionArtifact::read(&a.reduced)?;
    let sub = linear_substructure(&ModelFile::read(&a.full)?, artifact.substructure)?;
    let cmp = compare_modes(&sub, &artifact, 0, a.modes, a.skip)?;
    emit(&dynsub::artifact::mac_table(&cmp.mac, cmp.skipped), a.out.as_deref())?;
    eprintln!(
        "MAC diagonal min {:.6}, off-diagonal max {:.4}",
        cmp.mac.min_diagonal(),
        cmp.mac.max_off_diagonal()
    );
    Ok(())
}

fn run_experiment_cmd(a: RunExperiment) -> Result<()> {
    let (mut config, base) = ExperimentConfig::read(&a.config)?;
    if let Some(dir) = a.out_dir {
        config.output_dir = Some(std::env::current_dir()?.join(dir));
    }
    let exec = executor_from_env()?;
    let outcome = run_experiment(&config, &base, exec.as_ref())?;
    let report = &outcome.report;
    if config.output_dir.is_none() {
        println!("{}", serde_json::to_string_pretty(report)?);
    }
    eprintln!(
        "offline {:.3} s, online {:.3} s{}",
        report.offline_time,
        report.online_time,
        report
            .speedup
            .map_or(String::new(), |s| format!(", {s:.1}x faster than monolithic"))
    );
    Ok(())
}
