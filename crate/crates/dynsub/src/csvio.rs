//! CSV layouts.
//!
//! * Inputs: header `time,ch0,ch1,...`, one row per sample, uniform spacing.
//! * Trajectories: header `time`, then `s{s}_u{d}` and `s{s}_v{d}` for every
//!   DOF of every substructure, then `lambda{k}` per constraint. Monolithic
//!   runs leave the `lambda` fields empty.
//! * Fine traces: `time` plus the `u`/`v` columns of one substructure.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use dynsub_core::partitioned::FineTrace;
use dynsub_core::Trajectory;

use crate::error::{Error, Result};
use crate::signals::Signals;

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.into(),
        source,
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// A numeric CSV table: header plus columns. Empty fields read as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        for (i, field) in record.iter().enumerate() {
            let field = field.trim();
            let value = if field.is_empty() {
                f64::NAN
            } else {
                field.parse().map_err(|_| {
                    Error::Format(format!(
                        "{}: row {}: '{field}' is not a number",
                        path.display(),
                        line + 2
                    ))
                })?
            };
            columns[i].push(value);
        }
    }
    Ok(Table { headers, columns })
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(&table.headers).map_err(csv_err(path))?;
    for row in 0..table.rows() {
        w.write_record(table.columns.iter().map(|c| fmt(c[row])))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

/// Reads an input file; the sample rate comes from the time column.
pub fn read_signals(path: &Path) -> Result<Signals> {
    let table = read_table(path)?;
    if table.headers.first().map(String::as_str) != Some("time") {
        return Err(Error::Format(format!(
            "{}: first column must be 'time'",
            path.display()
        )));
    }
    let time = &table.columns[0];
    if time.len() < 2 {
        return Err(Error::Format(format!(
            "{}: need at least two samples",
            path.display()
        )));
    }
    let dt = time[1] - time[0];
    let uniform = time
        .iter()
        .enumerate()
        .all(|(k, &t)| (t - (time[0] + k as f64 * dt)).abs() <= 1e-6 * dt);
    if !(dt > 0.0) || !uniform || time[0].abs() > 1e-9 {
        return Err(Error::Format(format!(
            "{}: time column must start at 0 with uniform spacing",
            path.display()
        )));
    }
    if table.columns.iter().flatten().any(|x| x.is_nan()) {
        return Err(Error::Format(format!("{}: missing values", path.display())));
    }
    Ok(Signals {
        sample_rate: 1.0 / dt,
        channels: table.columns[1..].to_vec(),
    })
}

pub fn write_signals(path: &Path, signals: &Signals) -> Result<()> {
    let dt = signals.dt();
    let mut headers = vec!["time".to_string()];
    headers.extend((0..signals.channels.len()).map(|c| format!("ch{c}")));
    let mut columns = vec![(0..signals.samples()).map(|k| k as f64 * dt).collect()];
    columns.extend(signals.channels.iter().cloned());
    write_table(path, &Table { headers, columns })
}

pub fn trajectory_headers(traj: &Trajectory, constraints: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    for (s, states) in traj.states.iter().enumerate() {
        let n = states.first().map_or(0, |y| y.dofs());
        h.extend((0..n).map(|d| format!("s{s}_u{d}")));
        h.extend((0..n).map(|d| format!("s{s}_v{d}")));
    }
    h.extend((0..constraints).map(|k| format!("lambda{k}")));
    h
}

/// `constraints` fixes the number of `lambda` columns so monolithic and
/// partitioned runs share one schema.
pub fn write_trajectory(path: &Path, traj: &Trajectory, constraints: usize) -> Result<()> {
    let io = |source| Error::Io {
        path: path.into(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", trajectory_headers(traj, constraints).join(",")).map_err(io)?;
    let mut line = String::new();
    for k in 0..traj.len() {
        line.clear();
        line.push_str(&fmt(traj.times[k]));
        for states in &traj.states {
            for x in states[k].as_slice() {
                line.push(',');
                line.push_str(&fmt(*x));
            }
        }
        let lambda = traj.multipliers.get(k);
        for c in 0..constraints {
            line.push(',');
            if let Some(l) = lambda.and_then(|l| l.get(c)) {
                line.push_str(&fmt(*l));
            }
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_fine_trace(path: &Path, sub: usize, trace: &FineTrace) -> Result<()> {
    let n = trace.states.first().map_or(0, |y| y.dofs());
    let mut headers = vec!["time".to_string()];
    headers.extend((0..n).map(|d| format!("s{sub}_u{d}")));
    headers.extend((0..n).map(|d| format!("s{sub}_v{d}")));
    let mut columns = vec![trace.times.clone()];
    for i in 0..2 * n {
        columns.push(trace.states.iter().map(|y| y.as_slice()[i]).collect());
    }
    write_table(path, &Table { headers, columns })
}
