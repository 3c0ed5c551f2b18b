//! Dense linear-algebra helpers shared by the reduction and the integrators.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

/// Pivot ratio below which an LU factorization is reported as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Symmetry check relative to the largest entry magnitude.
pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax();
    if scale == 0.0 {
        return true;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if libm::fabs(m[(i, j)] - m[(j, i)]) > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// LU factorization with an explicit singularity check on the pivots.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: LU<f64, Dyn, Dyn>,
    dim: usize,
}

impl Factorization {
    /// Factorizes `m`; `what` names the matrix in the error message.
    pub fn new(m: DMatrix<f64>, what: &str) -> Result<Self> {
        Self::with_scale(m, 0.0, what)
    }

    /// As [`Factorization::new`], with pivots also judged against `scale`,
    /// the magnitude of the terms `m` was summed from.
    pub fn with_scale(m: DMatrix<f64>, scale: f64, what: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidModel(format!(
                "{what} must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let dim = m.nrows();
        if dim == 0 {
            return Ok(Self { lu: m.lu(), dim });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular(format!("{what} has non-finite entries")));
        }
        let lu = m.lu();
        let u = lu.u();
        let diag = u.diagonal();
        let max = diag.amax().max(scale);
        let min = diag.iter().fold(f64::INFINITY, |acc, x| acc.min(libm::fabs(*x)));
        if max == 0.0 || min <= SINGULAR_PIVOT_RATIO * max {
            return Err(Error::Singular(format!(
                "{what} ({dim}x{dim}) is singular: pivot ratio {:e}",
                if max == 0.0 { 0.0 } else { min / max }
            )));
        }
        Ok(Self { lu, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves in place; the factorization was checked at construction so this
    /// cannot fail on finite input.
    pub fn solve_mut(&self, b: &mut DVector<f64>) {
        if self.dim > 0 {
            let ok = self.lu.solve_mut(b);
            debug_assert!(ok);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut v = DVector::from_column_slice(b);
        self.solve_mut(&mut v);
        v.as_slice().to_vec()
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            let mut v = DVector::from_column_slice(col.as_slice());
            self.solve_mut(&mut v);
            col.copy_from(&v);
        }
        out
    }
}

/// Solution of the symmetric-definite pencil `K φ = λ M φ`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Mass-normalized eigenvectors, one per column, same order as `values`.
    pub vectors: DMatrix<f64>,
}

impl GeneralizedEigen {
    /// Circular frequencies `sqrt(max(λ, 0))` in rad/s.
    pub fn frequencies(&self) -> Vec<f64> {
        self.values.iter().map(|&l| libm::sqrt(l.max(0.0))).collect()
    }
}

/// Dense generalized eigensolver: Cholesky `M = L Lᵀ`, then the standard
/// symmetric problem for `L⁻¹ K L⁻ᵀ`.
pub fn generalized_symmetric_eigen(
    stiffness: &DMatrix<f64>,
    mass: &DMatrix<f64>,
) -> Result<GeneralizedEigen> {
    let n = mass.nrows();
    if !mass.is_square() || stiffness.shape() != mass.shape() {
        return Err(Error::InvalidModel(format!(
            "eigenproblem shapes differ: K {:?}, M {:?}",
            stiffness.shape(),
            mass.shape()
        )));
    }
    if n == 0 {
        return Ok(GeneralizedEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("mass matrix ({n}x{n}) is not positive definite")))?;
    let l = chol.l();
    let half = l
        .solve_lower_triangular(stiffness)
        .ok_or_else(|| Error::Singular("Cholesky factor of the mass matrix".into()))?;
    let full = l
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::Singular("Cholesky factor of the mass matrix".into()))?;
    let sym = (&full + full.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut z = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        z.set_column(dst, &eig.eigenvectors.column(src));
    }
    let mut vectors = l
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| Error::Singular("Cholesky factor of the mass matrix".into()))?;
    // Deterministic sign: largest-magnitude component positive.
    for mut col in vectors.column_iter_mut() {
        let (imax, _) = col.iter().enumerate().fold((0, 0.0), |(bi, bv), (i, &x)| {
            if libm::fabs(x) > bv {
                (i, libm::fabs(x))
            } else {
                (bi, bv)
            }
        });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(GeneralizedEigen { values, vectors })
}

/// Extracts the `rows × cols` sub-block of `m`.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}
