//! Craig-Bampton component mode synthesis.
//!
//! Internal DOFs are represented by `r` fixed-interface normal modes `Φ_r`
//! and the static constraint modes `Ψ = -K_ii⁻¹ K_ib`; boundary DOFs stay
//! physical:
//!
//! ```text
//! [x_i]   [Φ_r  Ψ] [q  ]
//! [x_b] = [ 0   I] [x_b]
//! ```

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{generalized_symmetric_eigen, select, Factorization};
use crate::model::{DofPartition, LinearSubstructure, Load, Substructure};
use crate::partitioned::{CoupledSystem, CouplingTopology, InterfaceConstraint};

/// Lowest `r` fixed-interface modes (mass-normalized) and their circular
/// frequencies in ascending order.
pub fn fixed_interface_modes(sub: &LinearSubstructure, r: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (modes, freqs, _) = fixed_interface_modes_with_next(sub, r)?;
    Ok((modes, freqs))
}

fn fixed_interface_modes_with_next(
    sub: &LinearSubstructure,
    r: usize,
) -> Result<(DMatrix<f64>, Vec<f64>, Option<f64>)> {
    let internal = sub.partition().internal();
    let ni = internal.len();
    if r > ni {
        return Err(Error::ModeCount {
            requested: r,
            available: ni,
        });
    }
    let k_ii = select(sub.stiffness(), internal, internal);
    let m_ii = select(sub.mass(), internal, internal);
    let eig = generalized_symmetric_eigen(&k_ii, &m_ii)?;
    let freqs = eig.frequencies();
    let next = freqs.get(r).copied();
    let modes = eig.vectors.columns(0, r).into_owned();
    Ok((modes, freqs[..r].to_vec(), next))
}

/// Static response of the internal DOFs to unit boundary displacements,
/// one column per boundary DOF.
pub fn constraint_modes(sub: &LinearSubstructure) -> Result<DMatrix<f64>> {
    let p = sub.partition();
    let k_ii = select(sub.stiffness(), p.internal(), p.internal());
    let k_ib = select(sub.stiffness(), p.internal(), p.boundary());
    if p.internal().is_empty() {
        return Ok(DMatrix::zeros(0, p.boundary().len()));
    }
    let lu = Factorization::new(k_ii, "internal stiffness block K_ii").map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(alloc::format!(
            "{msg}; the boundary DOFs do not restrain every rigid-body motion of the internal set"
        )),
        other => other,
    })?;
    Ok(-lu.solve_matrix(&k_ib))
}

/// Result of a Craig-Bampton reduction. Reduced coordinates are ordered
/// `[q_1..q_r, x_b1..x_bnb]`.
#[derive(Debug, Clone)]
pub struct CraigBamptonReduction {
    pub retained_modes: DMatrix<f64>,
    pub constraint_modes: DMatrix<f64>,
    /// `(n_i + n_b) × (r + n_b)`, rows in `[internal; boundary]` order.
    pub transform: DMatrix<f64>,
    pub reduced_mass: DMatrix<f64>,
    pub reduced_stiffness: DMatrix<f64>,
    pub reduced_damping: DMatrix<f64>,
    /// rad/s
    pub retained_frequencies: Vec<f64>,
    first_discarded: Option<f64>,
    partition: DofPartition,
    loads: Vec<Load>,
    damped: bool,
}

fn congruence(t: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let p = t.transpose() * (m * t);
    (&p + p.transpose()) * 0.5
}

pub fn reduce(sub: &LinearSubstructure, r: usize) -> Result<CraigBamptonReduction> {
    let p = sub.partition();
    let (ni, nb) = (p.internal().len(), p.boundary().len());
    let (phi, freqs, next) = fixed_interface_modes_with_next(sub, r)?;
    let psi = constraint_modes(sub)?;

    let mut cb = DMatrix::zeros(ni + nb, r + nb);
    cb.view_mut((0, 0), (ni, r)).copy_from(&phi);
    cb.view_mut((0, r), (ni, nb)).copy_from(&psi);
    for j in 0..nb {
        cb[(ni + j, r + j)] = 1.0;
    }

    let order: Vec<usize> = p.internal().iter().chain(p.boundary()).copied().collect();
    let m = select(sub.mass(), &order, &order);
    let k = select(sub.stiffness(), &order, &order);
    let reduced_mass = congruence(&cb, &m);
    let reduced_stiffness = congruence(&cb, &k);
    let reduced_damping = if sub.is_damped() {
        congruence(&cb, &select(sub.damping(), &order, &order))
    } else {
        DMatrix::zeros(r + nb, r + nb)
    };

    Ok(CraigBamptonReduction {
        retained_modes: phi,
        constraint_modes: psi,
        transform: cb,
        reduced_mass,
        reduced_stiffness,
        reduced_damping,
        retained_frequencies: freqs,
        first_discarded: next,
        partition: p.clone(),
        loads: sub.loads().to_vec(),
        damped: sub.is_damped(),
    })
}

impl CraigBamptonReduction {
    pub fn retained(&self) -> usize {
        self.retained_modes.ncols()
    }

    pub fn boundary_count(&self) -> usize {
        self.partition.boundary().len()
    }

    /// Number of reduced coordinates `r + n_b`.
    pub fn reduced_dofs(&self) -> usize {
        self.transform.ncols()
    }

    /// Number of physical DOFs of the original substructure.
    pub fn full_dofs(&self) -> usize {
        self.transform.nrows()
    }

    pub fn partition(&self) -> &DofPartition {
        &self.partition
    }

    /// Circular frequency of the lowest fixed-interface mode left out, if any.
    pub fn first_discarded_frequency(&self) -> Option<f64> {
        self.first_discarded
    }

    /// Reduced coordinate carrying the original boundary DOF `dof`.
    pub fn reduced_index_of(&self, dof: usize) -> Option<usize> {
        self.partition
            .boundary()
            .iter()
            .position(|&b| b == dof)
            .map(|j| self.retained() + j)
    }

    /// Physical displacements in the original DOF numbering.
    pub fn expand(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.reduced_dofs() {
            return Err(Error::DimensionMismatch {
                what: "reduced state",
                expected: self.reduced_dofs(),
                found: reduced.len(),
            });
        }
        let stacked = &self.transform * DVector::from_column_slice(reduced);
        Ok(self.unstack(stacked.as_slice()))
    }

    /// Expands each column of `modes` (reduced coordinates) to physical DOFs.
    pub fn expand_modes(&self, modes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if modes.nrows() != self.reduced_dofs() {
            return Err(Error::DimensionMismatch {
                what: "reduced mode shapes",
                expected: self.reduced_dofs(),
                found: modes.nrows(),
            });
        }
        let stacked = &self.transform * modes;
        let mut out = DMatrix::zeros(self.full_dofs(), modes.ncols());
        for (row, dof) in self.order().enumerate() {
            out.set_row(dof, &stacked.row(row));
        }
        Ok(out)
    }

    /// Reduced coordinates of physical displacements `x`:
    /// `q = Φ_rᵀ M_ii (x_i − Ψ x_b)`, `x_b` copied. Exact for `x` in the span of `CB`.
    pub fn project(&self, x: &[f64], mass: &DMatrix<f64>) -> Result<Vec<f64>> {
        let n = self.full_dofs();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                what: "physical displacements",
                expected: n,
                found: x.len(),
            });
        }
        let internal = self.partition.internal();
        let boundary = self.partition.boundary();
        let xi = DVector::from_iterator(internal.len(), internal.iter().map(|&d| x[d]));
        let xb = DVector::from_iterator(boundary.len(), boundary.iter().map(|&d| x[d]));
        let m_ii = select(mass, internal, internal);
        let q = self.retained_modes.transpose() * (m_ii * (xi - &self.constraint_modes * &xb));
        let mut out = q.as_slice().to_vec();
        out.extend_from_slice(xb.as_slice());
        Ok(out)
    }

    /// The reduced model as a substructure: modal coordinates internal,
    /// boundary DOFs last. Loads are mapped through `CBᵀ`.
    pub fn reduced_substructure(&self) -> Result<LinearSubstructure> {
        let (r, nb) = (self.retained(), self.boundary_count());
        let partition = DofPartition::new(r + nb, (0..r).collect(), (r..r + nb).collect())?;
        let damping = self.damped.then(|| self.reduced_damping.clone());
        let sub = LinearSubstructure::new(
            self.reduced_mass.clone(),
            damping,
            self.reduced_stiffness.clone(),
            partition,
        )?;
        let position: Vec<usize> = {
            let mut pos = alloc::vec![0; self.full_dofs()];
            for (row, dof) in self.order().enumerate() {
                pos[dof] = row;
            }
            pos
        };
        let loads = self
            .loads
            .iter()
            .map(|load| {
                let mut f = DVector::zeros(self.full_dofs());
                for &(dof, w) in &load.weights {
                    f[position[dof]] += w;
                }
                let g = self.transform.tr_mul(&f);
                Load {
                    channel: load.channel,
                    weights: g
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w != 0.0)
                        .map(|(j, w)| (j, *w))
                        .collect(),
                }
            })
            .collect();
        sub.with_loads(loads)
    }

    fn order(&self) -> impl Iterator<Item = usize> + '_ {
        self.partition
            .internal()
            .iter()
            .chain(self.partition.boundary())
            .copied()
    }

    fn unstack(&self, stacked: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.full_dofs()];
        for (row, dof) in self.order().enumerate() {
            out[dof] = stacked[row];
        }
        out
    }
}

/// Replaces linear substructure `s` of `system` by its Craig-Bampton model
/// with `r` retained modes and renumbers the constraints that touch it.
pub fn reduce_in_system(
    system: &CoupledSystem,
    s: usize,
    r: usize,
) -> Result<(CoupledSystem, CraigBamptonReduction)> {
    let sub = match system.substructures.get(s) {
        Some(Substructure::Linear(sub)) => sub,
        Some(_) => {
            return Err(Error::InvalidModel(alloc::format!(
                "substructure {s} is not linear and cannot be reduced"
            )))
        }
        None => {
            return Err(Error::InvalidModel(alloc::format!(
                "no substructure {s} in a system of {}",
                system.len()
            )))
        }
    };
    let red = reduce(sub, r)?;
    let mut subs = system.substructures.clone();
    subs[s] = red.reduced_substructure()?.into();
    let mut constraints: Vec<InterfaceConstraint> = system.topology.constraints().to_vec();
    for c in &mut constraints {
        for side in [&mut c.a, &mut c.b] {
            if side.substructure == s {
                side.dof = red.reduced_index_of(side.dof).ok_or_else(|| {
                    Error::InvalidTopology(alloc::format!(
                        "DOF {} of substructure {s} is coupled but not a boundary DOF",
                        side.dof
                    ))
                })?;
            }
        }
    }
    let reduced = CoupledSystem::new(subs, system.roles.clone(), CouplingTopology::new(constraints)?)?;
    Ok((reduced, red))
}
