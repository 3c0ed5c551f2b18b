use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{FirstOrderModel, Substructure};

/// One side of an interface constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceDof {
    pub substructure: usize,
    pub dof: usize,
    /// `+1.0` or `-1.0`.
    pub sign: f64,
}

/// Velocity compatibility `s_a v_a + s_b v_b = 0` between two DOFs of
/// different substructures, with `s_a = -s_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceConstraint {
    pub a: InterfaceDof,
    pub b: InterfaceDof,
}

impl InterfaceConstraint {
    /// `+1` on `(sub_a, dof_a)`, `-1` on `(sub_b, dof_b)`.
    pub fn between(sub_a: usize, dof_a: usize, sub_b: usize, dof_b: usize) -> Self {
        Self {
            a: InterfaceDof {
                substructure: sub_a,
                dof: dof_a,
                sign: 1.0,
            },
            b: InterfaceDof {
                substructure: sub_b,
                dof: dof_b,
                sign: -1.0,
            },
        }
    }

    /// The same constraint with both signs flipped.
    pub fn flipped(self) -> Self {
        let mut c = self;
        c.a.sign = -c.a.sign;
        c.b.sign = -c.b.sign;
        c
    }

    fn sides(&self) -> [InterfaceDof; 2] {
        [self.a, self.b]
    }
}

/// Signed collocation of interface DOFs. Constraint `c` owns column `c` of
/// every locator matrix `L_s` and row `c` of every compatibility matrix `G_s`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CouplingTopology {
    constraints: Vec<InterfaceConstraint>,
}

impl CouplingTopology {
    pub fn new(constraints: Vec<InterfaceConstraint>) -> Result<Self> {
        for (k, c) in constraints.iter().enumerate() {
            if c.a.substructure == c.b.substructure {
                return Err(Error::InvalidTopology(format!(
                    "constraint {k} joins substructure {} to itself",
                    c.a.substructure
                )));
            }
            for side in c.sides() {
                if side.sign != 1.0 && side.sign != -1.0 {
                    return Err(Error::InvalidTopology(format!(
                        "constraint {k} has sign {}, expected ±1",
                        side.sign
                    )));
                }
            }
            if c.a.sign != -c.b.sign {
                return Err(Error::InvalidTopology(format!(
                    "constraint {k} sides must carry opposite signs"
                )));
            }
        }
        Ok(Self { constraints })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn constraints(&self) -> &[InterfaceConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// `(constraint, dof, sign)` for every side touching substructure `s`.
    pub fn entries(&self, s: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (k, c) in self.constraints.iter().enumerate() {
            for side in c.sides() {
                if side.substructure == s {
                    out.push((k, side.dof, side.sign));
                }
            }
        }
        out
    }

    /// Checks indices against the substructures and requires every coupled
    /// DOF to be a boundary DOF of its substructure.
    pub fn validate(&self, subs: &[Substructure]) -> Result<()> {
        for (k, c) in self.constraints.iter().enumerate() {
            for side in c.sides() {
                let sub = subs.get(side.substructure).ok_or_else(|| {
                    Error::InvalidTopology(format!(
                        "constraint {k} refers to substructure {} of {}",
                        side.substructure,
                        subs.len()
                    ))
                })?;
                if side.dof >= sub.dofs() {
                    return Err(Error::InvalidTopology(format!(
                        "constraint {k}: DOF {} out of range for substructure {} ({} DOFs)",
                        side.dof,
                        side.substructure,
                        sub.dofs()
                    )));
                }
                if !sub.partition().is_boundary(side.dof) {
                    return Err(Error::InvalidTopology(format!(
                        "constraint {k}: DOF {} of substructure {} is not a boundary DOF",
                        side.dof, side.substructure
                    )));
                }
            }
        }
        Ok(())
    }

    /// `L_s` (2n × constraints): injects multipliers into momentum rows.
    pub fn locator(&self, s: usize, dofs: usize) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(2 * dofs, self.len());
        for (k, dof, sign) in self.entries(s) {
            l[(dofs + dof, k)] += sign;
        }
        l
    }

    /// `G_s` (constraints × 2n): signed selection of boundary velocity rows.
    pub fn compatibility(&self, s: usize, dofs: usize) -> DMatrix<f64> {
        self.locator(s, dofs).transpose()
    }
}

/// Role of a substructure in a hybrid test; physical substructures are the
/// ones advanced with sub-cycling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Numerical,
    Physical,
}

/// Substructures plus the constraints joining them.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub substructures: Vec<Substructure>,
    pub roles: Vec<Role>,
    pub topology: CouplingTopology,
}

impl CoupledSystem {
    pub fn new(
        substructures: Vec<Substructure>,
        roles: Vec<Role>,
        topology: CouplingTopology,
    ) -> Result<Self> {
        if roles.len() != substructures.len() {
            return Err(Error::DimensionMismatch {
                what: "substructure roles",
                expected: substructures.len(),
                found: roles.len(),
            });
        }
        if substructures.is_empty() {
            return Err(Error::InvalidModel("system has no substructures".into()));
        }
        topology.validate(&substructures)?;
        Ok(Self {
            substructures,
            roles,
            topology,
        })
    }

    /// All substructures numerical.
    pub fn numerical(substructures: Vec<Substructure>, topology: CouplingTopology) -> Result<Self> {
        let roles = alloc::vec![Role::Numerical; substructures.len()];
        Self::new(substructures, roles, topology)
    }

    pub fn len(&self) -> usize {
        self.substructures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.substructures.is_empty()
    }
}
