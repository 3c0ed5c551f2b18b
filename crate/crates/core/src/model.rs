//! Substructure models, their first-order form, restoring forces and tangents.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVectorView, DVectorViewMut};

use crate::error::{Error, Result};
use crate::linalg::is_symmetric;

/// Relative tolerance for the symmetry checks on model matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative step of the central finite-difference tangent,
/// scaled by `max(1, ‖Y‖)`.
pub const FD_STEP: f64 = 1e-8;

/// Default lumped mass of a suspension attachment DOF (kg).
pub const DEFAULT_ATTACHMENT_MASS: f64 = 0.01;

/// Ordered split of a substructure's DOFs into internal and boundary sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofPartition {
    internal: Vec<usize>,
    boundary: Vec<usize>,
}

impl DofPartition {
    /// Both lists together must cover `0..n` exactly once.
    pub fn new(n: usize, internal: Vec<usize>, boundary: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &d in internal.iter().chain(boundary.iter()) {
            if d >= n {
                return Err(Error::InvalidModel(format!(
                    "partition DOF {d} out of range for {n} DOFs"
                )));
            }
            if seen[d] {
                return Err(Error::InvalidModel(format!("partition lists DOF {d} twice")));
            }
            seen[d] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidModel(format!(
                "partition does not cover DOF {missing}"
            )));
        }
        Ok(Self { internal, boundary })
    }

    /// Boundary DOFs as given, internal DOFs are the ascending complement.
    pub fn from_boundary(n: usize, boundary: Vec<usize>) -> Result<Self> {
        let internal = (0..n).filter(|d| !boundary.contains(d)).collect();
        Self::new(n, internal, boundary)
    }

    pub fn internal(&self) -> &[usize] {
        &self.internal
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn len(&self) -> usize {
        self.internal.len() + self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.boundary.contains(&dof)
    }
}

/// A time-varying external load: `channel(t) * weight` applied at each listed DOF.
#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub channel: usize,
    pub weights: Vec<(usize, f64)>,
}

impl Load {
    pub fn point(channel: usize, dof: usize, scale: f64) -> Self {
        Self {
            channel,
            weights: vec![(dof, scale)],
        }
    }
}

fn check_loads(loads: &[Load], n: usize) -> Result<()> {
    for load in loads {
        for &(dof, _) in &load.weights {
            if dof >= n {
                return Err(Error::InvalidModel(format!(
                    "load on channel {} targets DOF {dof}, substructure has {n}",
                    load.channel
                )));
            }
        }
    }
    Ok(())
}

/// Linear substructure `M ẍ + C ẋ + K x = f`.
#[derive(Debug, Clone)]
pub struct LinearSubstructure {
    mass: DMatrix<f64>,
    damping: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    partition: DofPartition,
    loads: Vec<Load>,
    damped: bool,
}

impl LinearSubstructure {
    pub fn new(
        mass: DMatrix<f64>,
        damping: Option<DMatrix<f64>>,
        stiffness: DMatrix<f64>,
        partition: DofPartition,
    ) -> Result<Self> {
        let n = mass.nrows();
        if !mass.is_square() {
            return Err(Error::InvalidModel(format!(
                "mass matrix is {}x{}, must be square",
                mass.nrows(),
                mass.ncols()
            )));
        }
        if stiffness.shape() != (n, n) {
            return Err(Error::InvalidModel(format!(
                "stiffness matrix is {:?}, mass is {n}x{n}",
                stiffness.shape()
            )));
        }
        let damping = damping.unwrap_or_else(|| DMatrix::zeros(n, n));
        if damping.shape() != (n, n) {
            return Err(Error::InvalidModel(format!(
                "damping matrix is {:?}, mass is {n}x{n}",
                damping.shape()
            )));
        }
        if partition.len() != n {
            return Err(Error::DimensionMismatch {
                what: "DOF partition",
                expected: n,
                found: partition.len(),
            });
        }
        if !is_symmetric(&mass, SYMMETRY_TOL) {
            return Err(Error::InvalidModel("mass matrix is not symmetric".into()));
        }
        if let Some(i) = (0..n).find(|&i| mass[(i, i)] <= 0.0) {
            return Err(Error::InvalidModel(format!(
                "mass matrix diagonal entry {i} is not positive"
            )));
        }
        if !is_symmetric(&stiffness, SYMMETRY_TOL) {
            return Err(Error::InvalidModel("stiffness matrix is not symmetric".into()));
        }
        if !is_symmetric(&damping, SYMMETRY_TOL) {
            return Err(Error::InvalidModel("damping matrix is not symmetric".into()));
        }
        let damped = damping.iter().any(|&c| c != 0.0);
        Ok(Self {
            mass,
            damping,
            stiffness,
            partition,
            loads: Vec::new(),
            damped,
        })
    }

    /// Rayleigh damping `C = αM + βK`.
    pub fn with_rayleigh(
        mass: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        alpha: f64,
        beta: f64,
        partition: DofPartition,
    ) -> Result<Self> {
        let damping = if alpha == 0.0 && beta == 0.0 {
            None
        } else {
            Some(&mass * alpha + &stiffness * beta)
        };
        Self::new(mass, damping, stiffness, partition)
    }

    pub fn with_loads(mut self, loads: Vec<Load>) -> Result<Self> {
        check_loads(&loads, self.dofs())?;
        self.loads = loads;
        Ok(self)
    }

    pub fn dofs(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn damping(&self) -> &DMatrix<f64> {
        &self.damping
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn partition(&self) -> &DofPartition {
        &self.partition
    }

    pub fn loads(&self) -> &[Load] {
        &self.loads
    }

    pub fn is_damped(&self) -> bool {
        self.damped
    }

    fn internal_force(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.dofs();
        let mut o = DVectorViewMut::from_slice(out, n);
        o.gemv(1.0, &self.stiffness, &DVectorView::from_slice(u, n), 0.0);
        if self.damped {
            o.gemv(1.0, &self.damping, &DVectorView::from_slice(v, n), 1.0);
        }
    }
}

/// Wheel mass hung from a frame attachment point through a linear spring and
/// a dry-friction type damper:
///
/// ```text
/// f_r(x)  = k1 x
/// f_d(ẋ)  = c1 ẋ + c2 ẋ / (c3 + |ẋ|)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionElement {
    pub mass: f64,
    pub k1: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Lumped mass carried by the attachment (boundary) DOF.
    pub attachment_mass: f64,
    /// Input channel whose signal is applied as a force on the wheel mass.
    pub base_excitation_channel: usize,
}

impl SuspensionElement {
    /// Identified isolator coefficients of the reference vehicle-frame rig.
    pub fn reference(base_excitation_channel: usize) -> Self {
        Self {
            mass: 0.160,
            k1: 35.0,
            c1: 0.65,
            c2: 10.0,
            c3: 0.55,
            attachment_mass: DEFAULT_ATTACHMENT_MASS,
            base_excitation_channel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c3 > 0.0) {
            return Err(Error::InvalidModel(format!(
                "suspension c3 must be positive, got {}",
                self.c3
            )));
        }
        if !(self.mass > 0.0) {
            return Err(Error::InvalidModel(format!(
                "suspension mass must be positive, got {}",
                self.mass
            )));
        }
        if !(self.attachment_mass > 0.0) {
            return Err(Error::InvalidModel(format!(
                "attachment mass must be positive, got {}",
                self.attachment_mass
            )));
        }
        Ok(())
    }

    pub fn spring_force(&self, x: f64) -> f64 {
        self.k1 * x
    }

    pub fn damper_force(&self, xdot: f64) -> f64 {
        self.c1 * xdot + self.c2 * xdot / (self.c3 + libm::fabs(xdot))
    }

    /// `d f_d / d ẋ` at `ẋ = 0`.
    pub fn tangent_damping(&self) -> f64 {
        self.c1 + self.c2 / self.c3
    }
}

/// A set of suspension elements. DOF layout: wheel `k` at `k`, attachment `k`
/// at `N + k`; wheels are internal, attachments are boundary DOFs.
#[derive(Debug, Clone)]
pub struct NonlinearSubstructure {
    elements: Vec<SuspensionElement>,
    partition: DofPartition,
    relative_motion: bool,
    mass: DMatrix<f64>,
    loads: Vec<Load>,
}

impl NonlinearSubstructure {
    /// `relative_motion = true` makes the spring/damper act on wheel-minus-
    /// attachment motion; `false` uses the absolute wheel motion while still
    /// transmitting the reaction to the attachment.
    pub fn new(elements: Vec<SuspensionElement>, relative_motion: bool) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidModel("suspension substructure has no elements".into()));
        }
        for e in &elements {
            e.validate()?;
        }
        let count = elements.len();
        let partition =
            DofPartition::new(2 * count, (0..count).collect(), (count..2 * count).collect())?;
        let mut mass = DMatrix::zeros(2 * count, 2 * count);
        for (k, e) in elements.iter().enumerate() {
            mass[(k, k)] = e.mass;
            mass[(count + k, count + k)] = e.attachment_mass;
        }
        let loads = elements
            .iter()
            .enumerate()
            .map(|(k, e)| Load::point(e.base_excitation_channel, k, 1.0))
            .collect();
        Ok(Self {
            elements,
            partition,
            relative_motion,
            mass,
            loads,
        })
    }

    pub fn elements(&self) -> &[SuspensionElement] {
        &self.elements
    }

    pub fn relative_motion(&self) -> bool {
        self.relative_motion
    }

    pub fn dofs(&self) -> usize {
        2 * self.elements.len()
    }

    pub fn wheel_dof(&self, element: usize) -> usize {
        element
    }

    pub fn attachment_dof(&self, element: usize) -> usize {
        self.elements.len() + element
    }

    /// Linear substructure with the tangent stiffness and damping at zero
    /// state; same DOF layout, partition and loads.
    pub fn linearized(&self) -> Result<LinearSubstructure> {
        let t = self.tangent();
        LinearSubstructure::new(self.mass.clone(), Some(t.damping), t.stiffness, self.partition.clone())?
            .with_loads(self.loads.clone())
    }

    fn internal_force(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let count = self.elements.len();
        for (k, e) in self.elements.iter().enumerate() {
            let (w, a) = (k, count + k);
            let (x, xdot) = if self.relative_motion {
                (u[w] - u[a], v[w] - v[a])
            } else {
                (u[w], v[w])
            };
            let f = e.spring_force(x) + e.damper_force(xdot);
            out[w] += f;
            out[a] -= f;
        }
    }

    fn tangent(&self) -> Tangent {
        let n = self.dofs();
        let count = self.elements.len();
        let mut stiffness = DMatrix::zeros(n, n);
        let mut damping = DMatrix::zeros(n, n);
        for (k, e) in self.elements.iter().enumerate() {
            let (w, a) = (k, count + k);
            let c = e.tangent_damping();
            if self.relative_motion {
                for (i, j, s) in [(w, w, 1.0), (w, a, -1.0), (a, w, -1.0), (a, a, 1.0)] {
                    stiffness[(i, j)] += s * e.k1;
                    damping[(i, j)] += s * c;
                }
            } else {
                stiffness[(w, w)] += e.k1;
                stiffness[(a, w)] -= e.k1;
                damping[(w, w)] += c;
                damping[(a, w)] -= c;
            }
        }
        Tangent { stiffness, damping }
    }
}

/// User-supplied restoring-force law: writes `C v + K u + f_nl(u, v)` into `out`.
pub trait RestoringLaw: Send + Sync + fmt::Debug {
    fn internal_force(&self, u: &[f64], v: &[f64], out: &mut [f64]);
}

/// Substructure with an arbitrary force law; its tangent comes from finite differences.
#[derive(Debug, Clone)]
pub struct CustomSubstructure {
    mass: DMatrix<f64>,
    partition: DofPartition,
    law: Arc<dyn RestoringLaw>,
    loads: Vec<Load>,
}

impl CustomSubstructure {
    pub fn new(
        mass: DMatrix<f64>,
        partition: DofPartition,
        law: Arc<dyn RestoringLaw>,
        loads: Vec<Load>,
    ) -> Result<Self> {
        let n = mass.nrows();
        if !mass.is_square() || partition.len() != n {
            return Err(Error::InvalidModel(format!(
                "custom substructure mass {:?} does not match partition of {} DOFs",
                mass.shape(),
                partition.len()
            )));
        }
        check_loads(&loads, n)?;
        Ok(Self {
            mass,
            partition,
            law,
            loads,
        })
    }
}

/// Tangent blocks `∂f/∂u` and `∂f/∂v` of the internal force.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
}

impl Tangent {
    /// First-order Jacobian `R0 = [[0, -I], [K_t, C_t]]`.
    pub fn first_order(&self) -> DMatrix<f64> {
        let n = self.stiffness.nrows();
        let mut r0 = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            r0[(i, n + i)] = -1.0;
        }
        r0.view_mut((n, 0), (n, n)).copy_from(&self.stiffness);
        r0.view_mut((n, n), (n, n)).copy_from(&self.damping);
        r0
    }
}

/// Any second-order model that can be written in the first-order layout.
pub trait FirstOrderModel: Sync {
    fn dofs(&self) -> usize;
    fn mass_matrix(&self) -> &DMatrix<f64>;
    /// `C v + K u + f_nl(u, v)`; `out` has length `dofs()`.
    fn internal_force(&self, u: &[f64], v: &[f64], out: &mut [f64]);
    fn tangent_at_zero(&self) -> Tangent;
    fn loads(&self) -> &[Load];
}

/// Substructure variants accepted by the solvers.
#[derive(Debug, Clone)]
pub enum Substructure {
    Linear(LinearSubstructure),
    Nonlinear(NonlinearSubstructure),
    Custom(CustomSubstructure),
}

impl From<LinearSubstructure> for Substructure {
    fn from(s: LinearSubstructure) -> Self {
        Substructure::Linear(s)
    }
}

impl From<NonlinearSubstructure> for Substructure {
    fn from(s: NonlinearSubstructure) -> Self {
        Substructure::Nonlinear(s)
    }
}

impl From<CustomSubstructure> for Substructure {
    fn from(s: CustomSubstructure) -> Self {
        Substructure::Custom(s)
    }
}

impl Substructure {
    pub fn partition(&self) -> &DofPartition {
        match self {
            Substructure::Linear(s) => &s.partition,
            Substructure::Nonlinear(s) => &s.partition,
            Substructure::Custom(s) => &s.partition,
        }
    }

    /// Analytic tangent at zero state, when the element type provides one.
    pub fn analytic_tangent(&self) -> Option<Tangent> {
        match self {
            Substructure::Linear(s) => Some(Tangent {
                stiffness: s.stiffness.clone(),
                damping: s.damping.clone(),
            }),
            Substructure::Nonlinear(s) => Some(s.tangent()),
            Substructure::Custom(_) => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Substructure::Linear(_))
    }
}

impl FirstOrderModel for Substructure {
    fn dofs(&self) -> usize {
        self.mass_matrix().nrows()
    }

    fn mass_matrix(&self) -> &DMatrix<f64> {
        match self {
            Substructure::Linear(s) => &s.mass,
            Substructure::Nonlinear(s) => &s.mass,
            Substructure::Custom(s) => &s.mass,
        }
    }

    fn internal_force(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            Substructure::Linear(s) => s.internal_force(u, v, out),
            Substructure::Nonlinear(s) => s.internal_force(u, v, out),
            Substructure::Custom(s) => s.law.internal_force(u, v, out),
        }
    }

    fn tangent_at_zero(&self) -> Tangent {
        self.analytic_tangent().unwrap_or_else(|| {
            finite_difference_tangent(self, &StateVector::zeros(self.dofs()), FD_STEP)
        })
    }

    fn loads(&self) -> &[Load] {
        match self {
            Substructure::Linear(s) => &s.loads,
            Substructure::Nonlinear(s) => &s.loads,
            Substructure::Custom(s) => &s.loads,
        }
    }
}

/// First-order state `Y = [u; v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    values: Vec<f64>,
}

impl StateVector {
    pub fn zeros(dofs: usize) -> Self {
        Self {
            values: vec![0.0; 2 * dofs],
        }
    }

    pub fn from_parts(displacements: &[f64], velocities: &[f64]) -> Result<Self> {
        if displacements.len() != velocities.len() {
            return Err(Error::DimensionMismatch {
                what: "state velocities",
                expected: displacements.len(),
                found: velocities.len(),
            });
        }
        let mut values = Vec::with_capacity(2 * displacements.len());
        values.extend_from_slice(displacements);
        values.extend_from_slice(velocities);
        Ok(Self { values })
    }

    /// Stacked `[u; v]`; length must be even.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() % 2 != 0 {
            return Err(Error::InvalidModel(format!(
                "first-order state length {} is odd",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn dofs(&self) -> usize {
        self.values.len() / 2
    }

    pub fn displacements(&self) -> &[f64] {
        &self.values[..self.dofs()]
    }

    pub fn velocities(&self) -> &[f64] {
        &self.values[self.dofs()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|x| x * x).sum())
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| {
            if x.is_nan() {
                f64::NAN
            } else {
                m.max(libm::fabs(*x))
            }
        })
    }
}

/// First-order form `A Ẏ + R(Y) = F` of a model.
pub struct FirstOrderForm<'a, M: FirstOrderModel + ?Sized> {
    model: &'a M,
    state_mass: DMatrix<f64>,
}

impl<'a, M: FirstOrderModel + ?Sized> fmt::Debug for FirstOrderForm<'a, M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstOrderForm")
            .field("dim", &self.state_mass.nrows())
            .finish()
    }
}

/// Builds `A = blockdiag(I, M)` and binds the restoring evaluator.
pub fn assemble_first_order<M: FirstOrderModel + ?Sized>(model: &M) -> FirstOrderForm<'_, M> {
    let n = model.dofs();
    let mut a = DMatrix::identity(2 * n, 2 * n);
    a.view_mut((n, n), (n, n)).copy_from(model.mass_matrix());
    FirstOrderForm {
        model,
        state_mass: a,
    }
}

impl<'a, M: FirstOrderModel + ?Sized> FirstOrderForm<'a, M> {
    pub fn dim(&self) -> usize {
        self.state_mass.nrows()
    }

    pub fn state_mass(&self) -> &DMatrix<f64> {
        &self.state_mass
    }

    pub fn restoring(&self, y: &StateVector) -> Result<Vec<f64>> {
        restoring_force(self.model, y)
    }

    /// Places physical forces into the velocity (momentum) rows.
    pub fn inject(&self, forces: &[f64]) -> Result<Vec<f64>> {
        let n = self.model.dofs();
        if forces.len() != n {
            return Err(Error::DimensionMismatch {
                what: "external force",
                expected: n,
                found: forces.len(),
            });
        }
        let mut out = vec![0.0; 2 * n];
        out[n..].copy_from_slice(forces);
        Ok(out)
    }
}

/// `R(Y) = [-v; C v + K u + f_nl(u, v)]`.
pub fn restoring_force<M: FirstOrderModel + ?Sized>(model: &M, y: &StateVector) -> Result<Vec<f64>> {
    let n = model.dofs();
    if y.dofs() != n || y.as_slice().len() != 2 * n {
        return Err(Error::DimensionMismatch {
            what: "state vector",
            expected: 2 * n,
            found: y.as_slice().len(),
        });
    }
    let mut out = vec![0.0; 2 * n];
    restoring_into(model, y.as_slice(), &mut out);
    Ok(out)
}

/// Unchecked variant writing into a preallocated buffer of length `2n`.
pub(crate) fn restoring_into<M: FirstOrderModel + ?Sized>(model: &M, y: &[f64], out: &mut [f64]) {
    let n = model.dofs();
    let (u, v) = y.split_at(n);
    let (top, bottom) = out.split_at_mut(n);
    for (t, vi) in top.iter_mut().zip(v) {
        *t = -vi;
    }
    model.internal_force(u, v, bottom);
}

/// Jacobian `∂R/∂Y` at zero state.
pub fn tangent_at_zero<M: FirstOrderModel + ?Sized>(model: &M) -> DMatrix<f64> {
    model.tangent_at_zero().first_order()
}

/// Central finite-difference tangent of the internal force at state `y`,
/// step `h = step · max(1, ‖y‖)`.
pub fn finite_difference_tangent<M: FirstOrderModel + ?Sized>(
    model: &M,
    y: &StateVector,
    step: f64,
) -> Tangent {
    let n = model.dofs();
    let h = step * y.norm().max(1.0);
    let mut stiffness = DMatrix::zeros(n, n);
    let mut damping = DMatrix::zeros(n, n);
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let base = y.as_slice().to_vec();
    for col in 0..2 * n {
        let mut yp = base.clone();
        let mut ym = base.clone();
        yp[col] += h;
        ym[col] -= h;
        model.internal_force(&yp[..n], &yp[n..], &mut plus);
        model.internal_force(&ym[..n], &ym[n..], &mut minus);
        let target = if col < n { &mut stiffness } else { &mut damping };
        let j = col % n;
        for i in 0..n {
            target[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Tangent { stiffness, damping }
}
