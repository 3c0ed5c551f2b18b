use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};

use crate::error::{Error, Result};
use crate::input::InputSignals;
use crate::linalg::Factorization;
use crate::model::{restoring_into, FirstOrderModel, Tangent};

/// Factorized effective matrix `D = A + γh R0` for a first-order model with
/// `A = blockdiag(I, M)` and `R0 = [[0, -I], [K_t, C_t]]`.
///
/// Solves go through the Schur complement `S = M + γh C_t + (γh)² K_t`:
/// for `D [a; b] = [f; g]`, `b = S⁻¹(g − γh K_t f)` and `a = f + γh b`.
#[derive(Debug, Clone)]
pub struct EffectiveMatrix {
    n: usize,
    gh: f64,
    mass: DMatrix<f64>,
    tangent: Tangent,
    schur: Factorization,
}

impl EffectiveMatrix {
    pub fn new<M: FirstOrderModel + ?Sized>(model: &M, dt: f64, gamma: f64) -> Result<Self> {
        Self::with_tangent(model.mass_matrix().clone(), model.tangent_at_zero(), dt, gamma)
    }

    pub fn with_tangent(mass: DMatrix<f64>, tangent: Tangent, dt: f64, gamma: f64) -> Result<Self> {
        let n = mass.nrows();
        let gh = gamma * dt;
        let s = &mass + &tangent.damping * gh + &tangent.stiffness * (gh * gh);
        let scale = mass
            .amax()
            .max(gh * tangent.damping.amax())
            .max(gh * gh * tangent.stiffness.amax());
        let schur = Factorization::with_scale(s, scale, "effective matrix").map_err(|e| match e {
            Error::Singular(msg) => {
                Error::Singular(format!("{msg} (dt = {dt}, gamma = {gamma})"))
            }
            other => other,
        })?;
        Ok(Self {
            n,
            gh,
            mass,
            tangent,
            schur,
        })
    }

    /// First-order dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Solves `D x = rhs` in place.
    pub fn solve_mut(&self, rhs: &mut [f64]) {
        let n = self.n;
        let (f, g) = rhs.split_at_mut(n);
        let mut b = DVector::from_column_slice(g);
        if self.gh != 0.0 {
            b.gemv(-self.gh, &self.tangent.stiffness, &DVectorView::from_slice(f, n), 1.0);
        }
        self.schur.solve_mut(&mut b);
        g.copy_from_slice(b.as_slice());
        for (a, bi) in f.iter_mut().zip(b.iter()) {
            *a += self.gh * bi;
        }
    }

    /// `D⁻¹ B` column by column.
    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = rhs.clone();
        let mut col = vec![0.0; self.dim()];
        for j in 0..out.ncols() {
            col.copy_from_slice(out.column(j).as_slice());
            self.solve_mut(&mut col);
            out.set_column(j, &DVector::from_column_slice(&col));
        }
        out
    }

    /// The assembled matrix `D`, for inspection.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut d = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            d[(i, i)] = 1.0;
            d[(i, n + i)] = -self.gh;
        }
        d.view_mut((n, 0), (n, n)).copy_from(&(&self.tangent.stiffness * self.gh));
        d.view_mut((n, n), (n, n))
            .copy_from(&(&self.mass + &self.tangent.damping * self.gh));
        d
    }
}

/// External forces of `model` at time `t` written into the momentum rows of
/// the first-order vector `out` (length `2n`); displacement rows are zeroed.
pub fn external_force<M: FirstOrderModel + ?Sized>(
    model: &M,
    inputs: &dyn InputSignals,
    t: f64,
    out: &mut [f64],
) {
    let n = model.dofs();
    out.fill(0.0);
    for load in model.loads() {
        let value = inputs.value(load.channel, t);
        if value != 0.0 {
            for &(dof, w) in &load.weights {
                out[n + dof] += value * w;
            }
        }
    }
}

/// Predictor/corrector free step of the trapezoidal family:
///
/// ```text
/// Ỹ = Y_n + (1−γ)h Ẏ_n
/// Ẏ = D⁻¹ (F − R(Ỹ))
/// Y = Ỹ + γh Ẏ
/// ```
///
/// `force` is the first-order load vector at `t_{n+1}`. Returns `(Y, Ẏ)`.
pub fn free_step<M: FirstOrderModel + ?Sized>(
    model: &M,
    d: &EffectiveMatrix,
    y: &[f64],
    ydot: &[f64],
    force: &[f64],
    dt: f64,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = 2 * model.dofs();
    for (what, v) in [("state", y), ("state rate", ydot), ("force", force)] {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                what,
                expected: dim,
                found: v.len(),
            });
        }
    }
    if d.dim() != dim {
        return Err(Error::DimensionMismatch {
            what: "effective matrix",
            expected: dim,
            found: d.dim(),
        });
    }
    let mut y_new = vec![0.0; dim];
    let mut rate = vec![0.0; dim];
    free_step_into(model, d, y, ydot, force, dt, gamma, &mut y_new, &mut rate);
    Ok((y_new, rate))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn free_step_into<M: FirstOrderModel + ?Sized>(
    model: &M,
    d: &EffectiveMatrix,
    y: &[f64],
    ydot: &[f64],
    force: &[f64],
    dt: f64,
    gamma: f64,
    y_out: &mut [f64],
    rate_out: &mut [f64],
) {
    let pred = (1.0 - gamma) * dt;
    for ((p, yi), ri) in y_out.iter_mut().zip(y).zip(ydot) {
        *p = yi + pred * ri;
    }
    restoring_into(model, y_out, rate_out);
    for (r, f) in rate_out.iter_mut().zip(force) {
        *r = f - *r;
    }
    d.solve_mut(rate_out);
    let corr = gamma * dt;
    for (p, r) in y_out.iter_mut().zip(rate_out.iter()) {
        *p += corr * r;
    }
}

/// `Ẏ₀ = A⁻¹ (F(0) − R(Y₀))`.
pub(crate) fn initial_rate<M: FirstOrderModel + ?Sized>(
    model: &M,
    mass: &Factorization,
    y: &[f64],
    force: &[f64],
) -> Vec<f64> {
    let n = model.dofs();
    let mut r = vec![0.0; 2 * n];
    restoring_into(model, y, &mut r);
    for (ri, f) in r.iter_mut().zip(force) {
        *ri = f - *ri;
    }
    let mut acc = DVector::from_column_slice(&r[n..]);
    mass.solve_mut(&mut acc);
    r[n..].copy_from_slice(acc.as_slice());
    r
}

/// `y += alpha * m x` on plain slices.
pub(crate) fn gemv_add(y: &mut [f64], alpha: f64, m: &DMatrix<f64>, x: &[f64]) {
    let rows = y.len();
    let mut out = DVectorViewMut::from_slice(y, rows);
    out.gemv(alpha, m, &DVectorView::from_slice(x, x.len()), 1.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DofPartition, LinearSubstructure, Substructure};
    use crate::models::{chain, ChainSpec};
    use approx::assert_relative_eq;

    fn sdof(m: f64, k: f64, c: f64) -> Substructure {
        LinearSubstructure::new(
            DMatrix::from_element(1, 1, m),
            Some(DMatrix::from_element(1, 1, c)),
            DMatrix::from_element(1, 1, k),
            DofPartition::from_boundary(1, vec![]).unwrap(),
        )
        .unwrap()
        .into()
    }

    #[test]
    fn unit_oscillator_effective_matrix() {
        let d = EffectiveMatrix::new(&sdof(1.0, 1.0, 0.0), 0.1, 0.5).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, -0.05, 0.05, 1.0]);
        assert!((d.dense() - want).amax() < 1e-15);
    }

    #[test]
    fn explicit_limit_is_state_mass() {
        let sub: Substructure = chain(&ChainSpec::new(3, 2.0, 5.0, 0.1), vec![]).unwrap().into();
        let d = EffectiveMatrix::new(&sub, 0.01, 0.0).unwrap();
        let mut a = DMatrix::identity(6, 6);
        a.view_mut((3, 3), (3, 3)).copy_from(sub.mass_matrix());
        assert_eq!(d.dense(), a);
    }

    #[test]
    fn schur_solve_matches_dense_solve() {
        let sub: Substructure = chain(&ChainSpec::new(4, 1.3, 70.0, 0.4), vec![]).unwrap().into();
        let d = EffectiveMatrix::new(&sub, 1e-2, 0.5).unwrap();
        let rhs: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut x = rhs.clone();
        d.solve_mut(&mut x);
        let back = d.dense() * DVector::from_column_slice(&x);
        for (a, b) in back.iter().zip(&rhs) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_effective_matrix_reports_step() {
        // Negative stiffness chosen so that S = m + (γh)² k vanishes.
        let sub = sdof(1.0, -400.0, 0.0);
        let err = EffectiveMatrix::new(&sub, 0.1, 0.5).unwrap_err();
        assert!(matches!(err, Error::Singular(ref m) if m.contains("dt = 0.1")));
    }

    #[test]
    fn zero_state_stays_zero() {
        let sub: Substructure = chain(&ChainSpec::new(3, 1.0, 1.0, 0.2), vec![]).unwrap().into();
        let d = EffectiveMatrix::new(&sub, 0.01, 0.5).unwrap();
        let z = vec![0.0; 6];
        let (y, r) = free_step(&sub, &d, &z, &z, &z, 0.01, 0.5).unwrap();
        assert!(y.iter().chain(&r).all(|&x| x == 0.0));
    }

    #[test]
    fn one_step_of_unit_oscillator() {
        let sub = sdof(1.0, 1.0, 0.0);
        let h = 0.01;
        let d = EffectiveMatrix::new(&sub, h, 0.5).unwrap();
        let y0 = [1.0, 0.0];
        let rate0 = [0.0, -1.0];
        let (y, _) = free_step(&sub, &d, &y0, &rate0, &[0.0, 0.0], h, 0.5).unwrap();
        assert!((y[0] - libm::cos(h)).abs() < h * h * h);
        assert!((y[1] + libm::sin(h)).abs() < h * h * h);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let sub = sdof(1.0, 1.0, 0.0);
        let d = EffectiveMatrix::new(&sub, 0.01, 0.5).unwrap();
        assert!(free_step(&sub, &d, &[0.0; 3], &[0.0; 2], &[0.0; 2], 0.01, 0.5).is_err());
    }
}
