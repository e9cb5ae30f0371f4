//! Residual checks of the dynamical identities on simulated trajectories.
//!
//! Every check evaluates both sides of an identity from the same discrete
//! states. Time derivatives are central differences of expectation values
//! (or of the density) over the snapshots one step either side of a stride
//! point, so a trajectory must be recorded with `keep_neighbours` or with
//! stride 1. Tolerances follow `(C₁ dxᵖ + C₂ dt²)·magnitude + floor`.

mod commutators;
mod continuity;
mod ehrenfest;
mod lorentz;
mod report;
mod virial;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use commutators::{check_commutators, CommutatorOptions};
pub use continuity::check_continuity;
pub use ehrenfest::{check_ehrenfest_momentum, check_ehrenfest_position, check_expectation_dynamics};
pub use lorentz::{check_lorentz, cyclotron_frequency, CyclotronFit};
pub use report::{summary_table, Alternate, ResidualReport, Sample};
pub use virial::{check_virial, VirialVariant};

use crate::error::{Error, Result};
use crate::hypercomplex::Quaternion;
use crate::operators::{Compiled, Operator, OperatorDescriptor, Physics};
use crate::real_hilbert::expectation_of;
use crate::{Operator64, QField64, Trajectory64};

/// `tol = ((C₁ dxᵖ + C₂ dt²)·magnitude + floor)·scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceModel {
    pub c1: f64,
    pub c2: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    1e-12
}

impl ToleranceModel {
    pub const fn new(c1: f64, c2: f64) -> Self {
        ToleranceModel { c1, c2, floor: 1e-12 }
    }

    /// `dx` is the largest grid spacing, `order` the stencil order and
    /// `magnitude` the size of the largest term in the identity.
    pub fn tolerance(&self, dx: f64, order: u8, dt: f64, magnitude: f64, scale: f64) -> f64 {
        ((self.c1 * dx.powi(order as i32) + self.c2 * dt * dt) * magnitude + self.floor) * scale
    }
}

/// Per-identity tolerance constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub continuity: ToleranceModel,
    pub ehrenfest_position: ToleranceModel,
    pub ehrenfest_momentum: ToleranceModel,
    pub expectation_dynamics: ToleranceModel,
    pub lorentz: ToleranceModel,
    pub virial: ToleranceModel,
    pub commutators: ToleranceModel,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            continuity: ToleranceModel::new(4.0, 0.5),
            ehrenfest_position: ToleranceModel::new(4.0, 0.5),
            ehrenfest_momentum: ToleranceModel::new(2.0, 0.5),
            expectation_dynamics: ToleranceModel::new(1.0, 0.5),
            lorentz: ToleranceModel::new(1.0, 0.5),
            virial: ToleranceModel::new(1.0, 0.5),
            commutators: ToleranceModel::new(1.0, 0.0),
        }
    }
}

/// Tolerances plus the global multiplier applied to all of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub tolerances: Tolerances,
    pub scale: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { tolerances: Tolerances::default(), scale: 1.0 }
    }
}

impl CheckConfig {
    fn tolerance(&self, model: &ToleranceModel, phys: &Physics<f64>, dt: f64, magnitude: f64) -> f64 {
        model.tolerance(phys.grid().max_spacing(), phys.order().as_u8(), dt, magnitude, self.scale)
    }
}

/// Stride points whose neighbours are stored.
fn window(traj: &Trajectory64, identity: &str) -> Result<Vec<usize>> {
    let centres = traj.triple_centres();
    if centres.is_empty() {
        return Err(Error::MissingData(format!(
            "{identity} needs states one step either side of a stride point (stride 1 or keep_neighbours); \
             fewer than 3 consecutive samples are stored"
        )));
    }
    Ok(centres)
}

fn state(traj: &Trajectory64, k: usize) -> &QField64 {
    traj.snapshot(k).expect("window steps are stored")
}

fn expect(psi: &QField64, op: &Operator64) -> Result<f64> {
    expectation_of(psi, op)
}

/// Central difference of `⟨op⟩` at step `k`.
fn rate(traj: &Trajectory64, k: usize, op: &Operator64) -> Result<f64> {
    let after = expect(state(traj, k + 1), op)?;
    let before = expect(state(traj, k - 1), op)?;
    Ok((after - before) / (2.0 * traj.dt()))
}

fn scalar_op(d: &OperatorDescriptor, phys: &Arc<Physics<f64>>) -> Result<Operator64> {
    match d.compile(phys)? {
        Compiled::Scalar(op) => Ok(op),
        Compiled::Vector(_) => Err(Error::Config("expected a scalar-valued operator".into())),
    }
}

fn vector_op(d: &OperatorDescriptor, phys: &Arc<Physics<f64>>) -> Result<[Operator64; 3]> {
    match d.compile(phys)? {
        Compiled::Vector(ops) => Ok(*ops),
        Compiled::Scalar(_) => Err(Error::Config("expected a vector-valued operator".into())),
    }
}

fn lmul(field: QField64) -> Operator64 {
    Operator::LeftMul(Arc::new(field))
}

fn lconst(q: Quaternion<f64>) -> Operator64 {
    Operator::LeftConst(q)
}

fn sum(terms: Vec<(f64, Operator64)>) -> Operator64 {
    Operator::Sum(terms)
}

/// `A ∘ B`.
fn after(a: Operator64, b: Operator64) -> Operator64 {
    a.then(b)
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests;
