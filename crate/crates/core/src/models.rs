//! Generated desk-scale models: spring chains and a twin-rail frame analog
//! carried by four suspension elements.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{
    DofPartition, LinearSubstructure, NonlinearSubstructure, Substructure, SuspensionElement,
};
use crate::partitioned::{CoupledSystem, CouplingTopology, InterfaceConstraint, Role};

/// `n` equal masses joined by equal springs (and parallel dashpots).
/// A grounded chain has an extra spring from ground to DOF 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub n: usize,
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub grounded: bool,
}

impl ChainSpec {
    pub fn new(n: usize, mass: f64, stiffness: f64, damping: f64) -> Self {
        Self {
            n,
            mass,
            stiffness,
            damping,
            grounded: true,
        }
    }

    pub fn free_free(mut self) -> Self {
        self.grounded = false;
        self
    }
}

fn add_spring(k: &mut DMatrix<f64>, a: usize, b: usize, value: f64) {
    k[(a, a)] += value;
    k[(b, b)] += value;
    k[(a, b)] -= value;
    k[(b, a)] -= value;
}

/// Three-node angular spring penalizing `(w_a - 2 w_b + w_c)²`.
fn add_bending(k: &mut DMatrix<f64>, nodes: [usize; 3], value: f64) {
    let w = [1.0, -2.0, 1.0];
    for (i, &a) in nodes.iter().enumerate() {
        for (j, &b) in nodes.iter().enumerate() {
            k[(a, b)] += value * w[i] * w[j];
        }
    }
}

pub fn chain_matrices(spec: &ChainSpec) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = spec.n;
    let mut pattern = DMatrix::zeros(n, n);
    if n > 0 && spec.grounded {
        pattern[(0, 0)] += 1.0;
    }
    for i in 0..n.saturating_sub(1) {
        add_spring(&mut pattern, i, i + 1, 1.0);
    }
    (
        DMatrix::identity(n, n) * spec.mass,
        &pattern * spec.damping,
        &pattern * spec.stiffness,
    )
}

pub fn chain(spec: &ChainSpec, boundary: Vec<usize>) -> Result<LinearSubstructure> {
    if spec.n == 0 {
        return Err(Error::InvalidModel("chain needs at least one mass".into()));
    }
    let (m, c, k) = chain_matrices(spec);
    let partition = DofPartition::from_boundary(spec.n, boundary)?;
    LinearSubstructure::new(m, Some(c), k, partition)
}

/// Twin-rail ladder lattice: each rail is a row of lumped masses with
/// vertical DOFs joined by angular (bending) springs, the rails are tied by
/// one vertical spring per station, and four attachment DOFs sit near the
/// rail ends. Mass and stiffness are graded along the rails so that no two
/// modes are degenerate.
///
/// Discretization follows the rail length: node mass `μ Δx`, bending spring
/// `EI / Δx³`, tie spring `k_tie Δx`, so refining `nodes_per_rail` converges
/// toward one continuous structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameAnalogSpec {
    pub nodes_per_rail: usize,
    /// m
    pub length: f64,
    /// N·m²
    pub flexural_rigidity: f64,
    /// kg/m per rail
    pub mass_per_length: f64,
    /// N/m per metre of rail
    pub tie_stiffness: f64,
    /// Attachment distance from each rail end, in nodes.
    pub attachment_inset: usize,
    pub rayleigh_alpha: f64,
    pub rayleigh_beta: f64,
}

impl Default for FrameAnalogSpec {
    fn default() -> Self {
        Self {
            nodes_per_rail: 120,
            length: 2.0,
            flexural_rigidity: 1.0,
            mass_per_length: 1.2,
            tie_stiffness: 1.25e7,
            attachment_inset: 2,
            rayleigh_alpha: 0.0,
            rayleigh_beta: 0.0,
        }
    }
}

impl FrameAnalogSpec {
    pub fn with_nodes_per_rail(mut self, nodes: usize) -> Self {
        self.nodes_per_rail = nodes;
        self
    }

    pub fn dofs(&self) -> usize {
        2 * self.nodes_per_rail
    }
}

#[derive(Debug, Clone)]
pub struct FrameAnalog {
    pub frame: LinearSubstructure,
    /// Frame DOFs of the four attachment points, front/rear on rail 0 then rail 1.
    pub attachments: [usize; 4],
}

pub fn frame_analog(spec: &FrameAnalogSpec) -> Result<FrameAnalog> {
    let nl = spec.nodes_per_rail;
    if nl < 2 * spec.attachment_inset + 3 {
        return Err(Error::InvalidModel(format!(
            "{nl} nodes per rail is too few for attachment inset {}",
            spec.attachment_inset
        )));
    }
    if !(spec.length > 0.0 && spec.mass_per_length > 0.0 && spec.flexural_rigidity > 0.0) {
        return Err(Error::InvalidModel(
            "frame length, mass and rigidity must be positive".into(),
        ));
    }
    let n = 2 * nl;
    let dx = spec.length / (nl - 1) as f64;
    let node_mass = spec.mass_per_length * dx;
    let bending = spec.flexural_rigidity / (dx * dx * dx);
    let tie = spec.tie_stiffness * dx;

    let mut mass = DMatrix::zeros(n, n);
    let mut stiffness = DMatrix::zeros(n, n);
    for rail in 0..2 {
        let r = rail as f64;
        for i in 0..nl {
            let x = i as f64 / (nl - 1) as f64;
            let d = rail * nl + i;
            mass[(d, d)] = node_mass * (1.0 + 0.3 * x + 0.1 * r);
        }
        for i in 1..nl - 1 {
            let x = i as f64 / (nl - 1) as f64;
            let d = rail * nl + i;
            add_bending(
                &mut stiffness,
                [d - 1, d, d + 1],
                bending * (1.0 + 0.2 * x + 0.05 * r),
            );
        }
    }
    for i in 0..nl {
        let x = i as f64 / (nl - 1) as f64;
        add_spring(&mut stiffness, i, nl + i, tie * (1.0 + 0.3 * x));
    }
    let a = spec.attachment_inset;
    let attachments = [a, nl - 1 - a, nl + a, 2 * nl - 1 - a];
    let partition = DofPartition::from_boundary(n, attachments.to_vec())?;
    let frame = LinearSubstructure::with_rayleigh(
        mass,
        stiffness,
        spec.rayleigh_alpha,
        spec.rayleigh_beta,
        partition,
    )?;
    Ok(FrameAnalog { frame, attachments })
}

/// Frame analog plus four single-element suspension substructures. Element
/// `k` is driven by input channel `k` and attached to `attachments[k]`.
/// The frame is substructure 0 (numerical), suspensions are 1..=4 (physical).
pub fn frame_analog_system(
    spec: &FrameAnalogSpec,
    suspension: SuspensionElement,
    relative_motion: bool,
) -> Result<(CoupledSystem, [usize; 4])> {
    let FrameAnalog { frame, attachments } = frame_analog(spec)?;
    let mut subs: Vec<Substructure> = vec![frame.into()];
    let mut roles = vec![Role::Numerical];
    let mut constraints = Vec::new();
    for (k, &dof) in attachments.iter().enumerate() {
        let element = SuspensionElement {
            base_excitation_channel: k,
            ..suspension
        };
        let s = NonlinearSubstructure::new(vec![element], relative_motion)?;
        let attach = s.attachment_dof(0);
        subs.push(s.into());
        roles.push(Role::Physical);
        constraints.push(InterfaceConstraint::between(0, dof, k + 1, attach));
    }
    let system = CoupledSystem::new(subs, roles, CouplingTopology::new(constraints)?)?;
    Ok((system, attachments))
}

/// All-linear two-substructure variant: the frame analog and one linear
/// substructure holding the four suspension elements linearized at rest.
/// Element `k` has its wheel at DOF `k` and attachment at DOF `4 + k`.
pub fn linear_frame_system(
    spec: &FrameAnalogSpec,
    suspension: SuspensionElement,
) -> Result<(CoupledSystem, [usize; 4])> {
    let FrameAnalog { frame, attachments } = frame_analog(spec)?;
    let elements = (0..4)
        .map(|k| SuspensionElement {
            base_excitation_channel: k,
            ..suspension
        })
        .collect();
    let set = NonlinearSubstructure::new(elements, true)?.linearized()?;
    let constraints = (0..4)
        .map(|k| InterfaceConstraint::between(0, attachments[k], 1, 4 + k))
        .collect();
    let system = CoupledSystem::numerical(
        vec![frame.into(), set.into()],
        CouplingTopology::new(constraints)?,
    )?;
    Ok((system, attachments))
}
