//! JSON model and solver-configuration files.
//!
//! A model file lists substructures and the constraints joining them:
//!
//! ```json
//! {
//!   "substructures": [
//!     { "kind": "chain", "spec": "chain{n=6, m=1, k=400, c=0.2}", "boundary": [5],
//!       "loads": [{ "channel": 0, "weights": [[1, 1.0]] }] },
//!     { "kind": "suspension", "role": "physical",
//!       "elements": [{ "mass": 0.16, "k1": 35, "c1": 0.65, "c2": 10, "c3": 0.55 }] }
//!   ],
//!   "constraints": [{ "a": [0, 5], "b": [1, 1] }]
//! }
//! ```
//!
//! Substructure kinds are `linear` (dense matrices), `chain`, `frame_analog`
//! and `suspension`. Dense matrices are `{ "rows", "cols", "data" }` with
//! row-major data, or an array of rows.

use std::fs;
use std::path::Path;

use dynsub_core::model::{DofPartition, Load, Substructure};
use dynsub_core::models::{chain, frame_analog, ChainSpec, FrameAnalogSpec};
use dynsub_core::{
    CoupledSystem, CouplingTopology, InterfaceConstraint, LinearSubstructure, NonlinearSubstructure,
    Role, SolverConfig, SuspensionElement,
};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
    Rows(Vec<Vec<f64>>),
}

impl MatrixData {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixData::Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            MatrixData::Dense { rows, cols, data } => {
                if data.len() != rows * cols {
                    return Err(Error::Format(format!(
                        "matrix declared {rows}x{cols} but holds {} values",
                        data.len()
                    )));
                }
                Ok(DMatrix::from_row_slice(*rows, *cols, data))
            }
            MatrixData::Rows(rows) => {
                let cols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::Format("matrix rows have different lengths".into()));
                }
                Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleName {
    #[default]
    Numerical,
    Physical,
}

impl From<RoleName> for Role {
    fn from(r: RoleName) -> Self {
        match r {
            RoleName::Numerical => Role::Numerical,
            RoleName::Physical => Role::Physical,
        }
    }
}

impl From<Role> for RoleName {
    fn from(r: Role) -> Self {
        match r {
            Role::Numerical => RoleName::Numerical,
            Role::Physical => RoleName::Physical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadEntry {
    pub channel: usize,
    /// `[dof, weight]` pairs.
    pub weights: Vec<(usize, f64)>,
}

impl From<&Load> for LoadEntry {
    fn from(l: &Load) -> Self {
        Self {
            channel: l.channel,
            weights: l.weights.clone(),
        }
    }
}

fn to_loads(entries: &[LoadEntry]) -> Vec<Load> {
    entries
        .iter()
        .map(|e| Load {
            channel: e.channel,
            weights: e.weights.clone(),
        })
        .collect()
}

/// Chain generator parameters; written either as an object or as the
/// compact string `chain{n=3, m=1, k=1, c=0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainGenerator {
    Text(String),
    Params(ChainParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n: usize,
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default)]
    pub c: f64,
    /// Spring from DOF 0 to ground; the last DOF is always free.
    #[serde(default = "yes")]
    pub grounded: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl ChainGenerator {
    pub fn params(&self) -> Result<ChainParams> {
        match self {
            ChainGenerator::Params(p) => Ok(*p),
            ChainGenerator::Text(s) => parse_chain(s),
        }
    }
}

fn parse_chain(text: &str) -> Result<ChainParams> {
    let bad = || Error::Format(format!("cannot parse chain generator '{text}'"));
    let body = text
        .trim()
        .strip_prefix("chain")
        .map(str::trim)
        .and_then(|s| s.strip_prefix('{'))
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(bad)?;
    let mut p = ChainParams {
        n: 0,
        m: 1.0,
        k: 1.0,
        c: 0.0,
        grounded: true,
    };
    let mut has_n = false;
    for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item.split_once('=').ok_or_else(bad)?;
        let value = value.trim();
        match key.trim() {
            "n" => {
                p.n = value.parse().map_err(|_| bad())?;
                has_n = true;
            }
            "m" => p.m = value.parse().map_err(|_| bad())?,
            "k" => p.k = value.parse().map_err(|_| bad())?,
            "c" => p.c = value.parse().map_err(|_| bad())?,
            "grounded" => p.grounded = value.parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
    }
    if !has_n {
        return Err(Error::Format(format!("chain generator '{text}' has no n")));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameParams {
    pub nodes_per_rail: usize,
    pub length: f64,
    pub flexural_rigidity: f64,
    pub mass_per_length: f64,
    pub tie_stiffness: f64,
    pub attachment_inset: usize,
    pub rayleigh_alpha: f64,
    pub rayleigh_beta: f64,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameAnalogSpec::default().into()
    }
}

impl From<FrameAnalogSpec> for FrameParams {
    fn from(s: FrameAnalogSpec) -> Self {
        Self {
            nodes_per_rail: s.nodes_per_rail,
            length: s.length,
            flexural_rigidity: s.flexural_rigidity,
            mass_per_length: s.mass_per_length,
            tie_stiffness: s.tie_stiffness,
            attachment_inset: s.attachment_inset,
            rayleigh_alpha: s.rayleigh_alpha,
            rayleigh_beta: s.rayleigh_beta,
        }
    }
}

impl From<FrameParams> for FrameAnalogSpec {
    fn from(p: FrameParams) -> Self {
        Self {
            nodes_per_rail: p.nodes_per_rail,
            length: p.length,
            flexural_rigidity: p.flexural_rigidity,
            mass_per_length: p.mass_per_length,
            tie_stiffness: p.tie_stiffness,
            attachment_inset: p.attachment_inset,
            rayleigh_alpha: p.rayleigh_alpha,
            rayleigh_beta: p.rayleigh_beta,
        }
    }
}

/// Suspension record; omitted coefficients take the reference values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElementEntry {
    pub mass: f64,
    pub k1: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub attachment_mass: f64,
    pub base_excitation_channel: usize,
}

impl Default for ElementEntry {
    fn default() -> Self {
        SuspensionElement::reference(0).into()
    }
}

impl From<SuspensionElement> for ElementEntry {
    fn from(e: SuspensionElement) -> Self {
        Self {
            mass: e.mass,
            k1: e.k1,
            c1: e.c1,
            c2: e.c2,
            c3: e.c3,
            attachment_mass: e.attachment_mass,
            base_excitation_channel: e.base_excitation_channel,
        }
    }
}

impl From<ElementEntry> for SuspensionElement {
    fn from(e: ElementEntry) -> Self {
        Self {
            mass: e.mass,
            k1: e.k1,
            c1: e.c1,
            c2: e.c2,
            c3: e.c3,
            attachment_mass: e.attachment_mass,
            base_excitation_channel: e.base_excitation_channel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    Linear {
        mass: MatrixData,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        damping: Option<MatrixData>,
        stiffness: MatrixData,
        #[serde(default)]
        boundary: Vec<usize>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        loads: Vec<LoadEntry>,
    },
    Chain {
        spec: ChainGenerator,
        #[serde(default)]
        boundary: Vec<usize>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        loads: Vec<LoadEntry>,
    },
    /// Boundary DOFs are the four attachment points.
    FrameAnalog {
        #[serde(default)]
        params: FrameParams,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        loads: Vec<LoadEntry>,
    },
    /// Wheel `k` is DOF `k`, attachment `k` is DOF `N + k` (boundary).
    Suspension {
        elements: Vec<ElementEntry>,
        #[serde(default = "yes")]
        relative_motion: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstructureEntry {
    #[serde(default)]
    pub role: RoleName,
    #[serde(flatten)]
    pub body: Body,
}

/// `a` and `b` are `[substructure, dof]`; `a` enters with sign +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintEntry {
    pub a: (usize, usize),
    pub b: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub substructures: Vec<SubstructureEntry>,
    #[serde(default)]
    pub constraints: Vec<ConstraintEntry>,
}

impl Body {
    pub fn build(&self) -> Result<Substructure> {
        let sub: Substructure = match self {
            Body::Linear {
                mass,
                damping,
                stiffness,
                boundary,
                loads,
            } => {
                let m = mass.to_matrix()?;
                let c = damping.as_ref().map(MatrixData::to_matrix).transpose()?;
                let k = stiffness.to_matrix()?;
                let partition = DofPartition::from_boundary(m.nrows(), boundary.clone())?;
                LinearSubstructure::new(m, c, k, partition)?
                    .with_loads(to_loads(loads))?
                    .into()
            }
            Body::Chain {
                spec,
                boundary,
                loads,
            } => {
                let p = spec.params()?;
                let mut cs = ChainSpec::new(p.n, p.m, p.k, p.c);
                if !p.grounded {
                    cs = cs.free_free();
                }
                chain(&cs, boundary.clone())?.with_loads(to_loads(loads))?.into()
            }
            Body::FrameAnalog { params, loads } => frame_analog(&(*params).into())?
                .frame
                .with_loads(to_loads(loads))?
                .into(),
            Body::Suspension {
                elements,
                relative_motion,
            } => NonlinearSubstructure::new(
                elements.iter().map(|&e| e.into()).collect(),
                *relative_motion,
            )?
            .into(),
        };
        Ok(sub)
    }
}

impl ModelFile {
    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn build(&self) -> Result<CoupledSystem> {
        let subs = self
            .substructures
            .iter()
            .map(|e| e.body.build())
            .collect::<Result<Vec<_>>>()?;
        let roles = self.substructures.iter().map(|e| e.role.into()).collect();
        let constraints = self
            .constraints
            .iter()
            .map(|c| InterfaceConstraint::between(c.a.0, c.a.1, c.b.0, c.b.1))
            .collect();
        Ok(CoupledSystem::new(subs, roles, CouplingTopology::new(constraints)?)?)
    }

    /// Dense description of an assembled system.
    pub fn from_system(system: &CoupledSystem) -> Result<Self> {
        let mut substructures = Vec::with_capacity(system.len());
        for (sub, role) in system.substructures.iter().zip(&system.roles) {
            let body = match sub {
                Substructure::Linear(l) => Body::Linear {
                    mass: MatrixData::from_matrix(l.mass()),
                    damping: l.is_damped().then(|| MatrixData::from_matrix(l.damping())),
                    stiffness: MatrixData::from_matrix(l.stiffness()),
                    boundary: l.partition().boundary().to_vec(),
                    loads: l.loads().iter().map(LoadEntry::from).collect(),
                },
                Substructure::Nonlinear(n) => Body::Suspension {
                    elements: n.elements().iter().map(|&e| e.into()).collect(),
                    relative_motion: n.relative_motion(),
                },
                Substructure::Custom(_) => {
                    return Err(Error::Format(
                        "custom substructures have no file representation".into(),
                    ))
                }
            };
            substructures.push(SubstructureEntry {
                role: (*role).into(),
                body,
            });
        }
        let constraints = system
            .topology
            .constraints()
            .iter()
            .map(|c| {
                let (a, b) = if c.a.sign > 0.0 { (c.a, c.b) } else { (c.b, c.a) };
                ConstraintEntry {
                    a: (a.substructure, a.dof),
                    b: (b.substructure, b.dof),
                }
            })
            .collect();
        Ok(Self {
            substructures,
            constraints,
        })
    }
}

/// Solver settings; `gamma`, `subcycles` and `divergence_bound` are optional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverFile {
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "half")]
    pub gamma: f64,
    #[serde(default = "single")]
    pub subcycles: usize,
    #[serde(default = "bound")]
    pub divergence_bound: f64,
}

fn half() -> f64 {
    0.5
}

fn single() -> usize {
    1
}

fn bound() -> f64 {
    SolverConfig::new(1.0, 1.0).divergence_bound
}

impl From<SolverFile> for SolverConfig {
    fn from(f: SolverFile) -> Self {
        SolverConfig::new(f.dt, f.duration)
            .with_gamma(f.gamma)
            .with_subcycles(f.subcycles)
            .with_divergence_bound(f.divergence_bound)
    }
}

impl From<SolverConfig> for SolverFile {
    fn from(c: SolverConfig) -> Self {
        Self {
            dt: c.dt,
            duration: c.duration,
            gamma: c.gamma,
            subcycles: c.subcycles,
            divergence_bound: c.divergence_bound,
        }
    }
}

/// The frame analog with four suspensions as a model file: frame first,
/// then one physical single-element suspension per attachment point.
pub fn frame_model(params: FrameParams, element: ElementEntry, relative_motion: bool) -> Result<ModelFile> {
    let spec: FrameAnalogSpec = params.into();
    let attachments = frame_analog(&spec)?.attachments;
    let mut substructures = vec![SubstructureEntry {
        role: RoleName::Numerical,
        body: Body::FrameAnalog {
            params,
            loads: Vec::new(),
        },
    }];
    let mut constraints = Vec::new();
    for (k, &dof) in attachments.iter().enumerate() {
        substructures.push(SubstructureEntry {
            role: RoleName::Physical,
            body: Body::Suspension {
                elements: vec![ElementEntry {
                    base_excitation_channel: k,
                    ..element
                }],
                relative_motion,
            },
        });
        constraints.push(ConstraintEntry {
            a: (0, dof),
            b: (k + 1, 1),
        });
    }
    Ok(ModelFile {
        substructures,
        constraints,
    })
}
