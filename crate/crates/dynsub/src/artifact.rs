//! Reduction artifacts and full-versus-reduced modal comparison.

use std::f64::consts::PI;
use std::path::Path;

use dynsub_core::linalg::{generalized_symmetric_eigen, GeneralizedEigen};
use dynsub_core::metrics::{frequency_error_table, mac, FrequencyErrorTable, MacMatrix};
use dynsub_core::{CraigBamptonReduction, LinearSubstructure};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::csvio::{write_table, Table};
use crate::error::{Error, Result};
use crate::format::{read_json, write_json, MatrixData};

/// Craig-Bampton model of one substructure. Reduced coordinates are the
/// retained modal amplitudes followed by the boundary DOFs; `transform` rows
/// follow `internal` then `boundary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionArtifact {
    pub substructure: usize,
    pub full_dofs: usize,
    pub internal: Vec<usize>,
    pub boundary: Vec<usize>,
    pub retained_modes: usize,
    pub transform: MatrixData,
    pub reduced_mass: MatrixData,
    pub reduced_stiffness: MatrixData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_damping: Option<MatrixData>,
    /// Fixed-interface modes kept in the basis, Hz.
    pub retained_frequencies_hz: Vec<f64>,
    #[serde(default)]
    pub first_discarded_frequency_hz: Option<f64>,
}

fn hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

impl ReductionArtifact {
    pub fn new(substructure: usize, sub: &LinearSubstructure, red: &CraigBamptonReduction) -> Self {
        Self {
            substructure,
            full_dofs: red.full_dofs(),
            internal: sub.partition().internal().to_vec(),
            boundary: sub.partition().boundary().to_vec(),
            retained_modes: red.retained(),
            transform: MatrixData::from_matrix(&red.transform),
            reduced_mass: MatrixData::from_matrix(&red.reduced_mass),
            reduced_stiffness: MatrixData::from_matrix(&red.reduced_stiffness),
            reduced_damping: sub
                .is_damped()
                .then(|| MatrixData::from_matrix(&red.reduced_damping)),
            retained_frequencies_hz: red.retained_frequencies.iter().map(|&w| hz(w)).collect(),
            first_discarded_frequency_hz: red.first_discarded_frequency().map(hz),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn reduced_eigen(&self) -> Result<GeneralizedEigen> {
        Ok(generalized_symmetric_eigen(
            &self.reduced_stiffness.to_matrix()?,
            &self.reduced_mass.to_matrix()?,
        )?)
    }

    /// Physical mode shapes in the original DOF numbering.
    pub fn expand_modes(&self, modes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let t = self.transform.to_matrix()?;
        if t.ncols() != modes.nrows() {
            return Err(Error::Format(format!(
                "reduced modes have {} rows, transform has {} columns",
                modes.nrows(),
                t.ncols()
            )));
        }
        let stacked = t * modes;
        let mut out = DMatrix::zeros(self.full_dofs, modes.ncols());
        for (row, &dof) in self.internal.iter().chain(&self.boundary).enumerate() {
            out.set_row(dof, &stacked.row(row));
        }
        Ok(out)
    }
}

/// Number of leading eigenvalues below `1e-10` of the largest one.
pub fn rigid_mode_count(values: &[f64]) -> usize {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values.iter().take_while(|&&v| v < 1e-10 * max).count()
}

#[derive(Debug, Clone)]
pub struct ModalComparison {
    /// Rigid-body modes skipped at the start of both spectra.
    pub skipped: usize,
    /// Hz
    pub frequencies: FrequencyErrorTable,
    pub mac: MacMatrix,
}

/// Compares the first `modes` elastic modes of `full` with the reduced
/// model. `skip = None` detects rigid-body modes automatically.
pub fn compare_modes(
    full: &LinearSubstructure,
    artifact: &ReductionArtifact,
    modes: usize,
    mac_modes: usize,
    skip: Option<usize>,
) -> Result<ModalComparison> {
    let full_eig = generalized_symmetric_eigen(full.stiffness(), full.mass())?;
    let red_eig = artifact.reduced_eigen()?;
    let skipped = skip.unwrap_or_else(|| rigid_mode_count(&full_eig.values));
    let available = red_eig.values.len().saturating_sub(skipped);
    if modes > available || mac_modes > available {
        return Err(Error::Format(format!(
            "asked for {} modes after skipping {skipped}, reduced model has {available}",
            modes.max(mac_modes)
        )));
    }
    let to_hz = |e: &GeneralizedEigen| -> Vec<f64> {
        e.frequencies()[skipped..].iter().map(|&w| hz(w)).collect()
    };
    let frequencies = frequency_error_table(&to_hz(&full_eig), &to_hz(&red_eig), modes)?;
    let phi_full = full_eig.vectors.columns(skipped, mac_modes).into_owned();
    let phi_red = artifact.expand_modes(&red_eig.vectors.columns(skipped, mac_modes).into_owned())?;
    let mac = mac(&phi_full, &phi_red)?;
    Ok(ModalComparison {
        skipped,
        frequencies,
        mac,
    })
}

/// Columns `mode,full_hz,reduced_hz,relative_error`.
pub fn frequency_table(t: &FrequencyErrorTable, first_mode: usize) -> Table {
    Table {
        headers: ["mode", "full_hz", "reduced_hz", "relative_error"]
            .map(String::from)
            .to_vec(),
        columns: vec![
            (0..t.full.len()).map(|i| (first_mode + i) as f64).collect(),
            t.full.clone(),
            t.reduced.clone(),
            t.relative.clone(),
        ],
    }
}

/// Square table with a leading `mode` column; column `j` is reduced mode `j`.
pub fn mac_table(m: &MacMatrix, first_mode: usize) -> Table {
    let n = m.values.ncols();
    let mut headers = vec!["mode".to_string()];
    headers.extend((0..n).map(|j| format!("reduced{}", first_mode + j)));
    let mut columns = vec![(0..m.values.nrows()).map(|i| (first_mode + i) as f64).collect()];
    columns.extend(m.values.column_iter().map(|c| c.iter().copied().collect()));
    Table { headers, columns }
}

pub fn write_frequency_csv(path: &Path, t: &FrequencyErrorTable, first_mode: usize) -> Result<()> {
    write_table(path, &frequency_table(t, first_mode))
}

pub fn write_mac_csv(path: &Path, m: &MacMatrix, first_mode: usize) -> Result<()> {
    write_table(path, &mac_table(m, first_mode))
}
