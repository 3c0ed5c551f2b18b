//! Fidelity metrics: modal assurance criterion, natural-frequency errors,
//! signal mean-square errors and a first-difference smoothness measure.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Cross MAC between two mode sets; entry `(i, j)` compares column `i` of
/// the first set with column `j` of the second.
#[derive(Debug, Clone, PartialEq)]
pub struct MacMatrix {
    pub values: DMatrix<f64>,
}

impl MacMatrix {
    pub fn diagonal(&self) -> Vec<f64> {
        self.values.diagonal().iter().copied().collect()
    }

    pub fn min_diagonal(&self) -> f64 {
        self.diagonal().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let mut max = 0.0f64;
        for ((i, j), v) in self.values.iter().enumerate().map(|(k, v)| {
            ((k % self.values.nrows(), k / self.values.nrows()), v)
        }) {
            if i != j {
                max = max.max(*v);
            }
        }
        max
    }
}

/// `MAC(φ, ψ) = |φᵀψ|² / ((φᵀφ)(ψᵀψ))` with plain Euclidean products.
pub fn mac(modes_a: &DMatrix<f64>, modes_b: &DMatrix<f64>) -> Result<MacMatrix> {
    if modes_a.nrows() != modes_b.nrows() {
        return Err(Error::DimensionMismatch {
            what: "mode shape length",
            expected: modes_a.nrows(),
            found: modes_b.nrows(),
        });
    }
    let norms = |m: &DMatrix<f64>, offset: usize| -> Result<Vec<f64>> {
        m.column_iter()
            .enumerate()
            .map(|(i, c)| {
                let n = c.norm_squared();
                if n == 0.0 {
                    Err(Error::ZeroNormMode { index: offset + i })
                } else {
                    Ok(n)
                }
            })
            .collect()
    };
    let na = norms(modes_a, 0)?;
    let nb = norms(modes_b, modes_a.ncols())?;
    let cross = modes_a.transpose() * modes_b;
    let values = DMatrix::from_fn(na.len(), nb.len(), |i, j| {
        let c = cross[(i, j)];
        ((c * c) / (na[i] * nb[j])).min(1.0)
    });
    Ok(MacMatrix { values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyErrorTable {
    pub full: Vec<f64>,
    pub reduced: Vec<f64>,
    /// `(f_r − f_f) / f_f` per mode.
    pub relative: Vec<f64>,
    /// `mean((f_r − f_f)²) / mean(f_f²)`.
    pub nmse: f64,
}

impl FrequencyErrorTable {
    pub fn max_abs_relative(&self) -> f64 {
        self.relative.iter().fold(0.0, |m, r| m.max(libm::fabs(*r)))
    }
}

/// Compares the first `n` entries of two frequency lists.
pub fn frequency_error_table(full: &[f64], reduced: &[f64], n: usize) -> Result<FrequencyErrorTable> {
    if n > full.len() || n > reduced.len() {
        return Err(Error::LengthMismatch {
            left: full.len().min(reduced.len()),
            right: n,
        });
    }
    let (full, reduced) = (&full[..n], &reduced[..n]);
    let relative = full
        .iter()
        .zip(reduced)
        .map(|(&f, &r)| {
            if f != 0.0 {
                (r - f) / f
            } else if r == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let num: f64 = full.iter().zip(reduced).map(|(f, r)| (r - f) * (r - f)).sum();
    let den: f64 = full.iter().map(|f| f * f).sum();
    let nmse = if num == 0.0 { 0.0 } else { num / den };
    Ok(FrequencyErrorTable {
        full: full.to_vec(),
        reduced: reduced.to_vec(),
        relative,
        nmse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mse {
    pub mse: f64,
    /// `mse / mean(b²)` with `b` the reference signal.
    pub relative: f64,
}

/// Mean-square error of `a` against the reference `b`.
pub fn trajectory_mse(a: &[f64], b: &[f64]) -> Result<Mse> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(Mse {
            mse: 0.0,
            relative: 0.0,
        });
    }
    let len = a.len() as f64;
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / len;
    let power = b.iter().map(|y| y * y).sum::<f64>() / len;
    let relative = if mse == 0.0 {
        0.0
    } else if power == 0.0 {
        f64::INFINITY
    } else {
        mse / power
    };
    Ok(Mse { mse, relative })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness {
    /// `max |x_{k+1} − x_k|`
    pub max_difference: f64,
    pub rms_difference: f64,
    /// `max_difference / dt`
    pub max_rate: f64,
}

pub fn smoothness(x: &[f64], dt: f64) -> Result<Smoothness> {
    if x.len() < 2 {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: 2,
        });
    }
    let diffs = x.windows(2).map(|w| libm::fabs(w[1] - w[0]));
    let (max, sq) = diffs.fold((0.0f64, 0.0), |(m, s), d| (m.max(d), s + d * d));
    Ok(Smoothness {
        max_difference: max,
        rms_difference: libm::sqrt(sq / (x.len() - 1) as f64),
        max_rate: max / dt,
    })
}
