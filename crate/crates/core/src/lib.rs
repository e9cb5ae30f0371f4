//! Real-Hilbert-space quantum dynamics for complex and quaternionic wave
//! functions.
//!
//! The crate propagates wave functions under the complex, left-quaternionic
//! and right-quaternionic wave equations on periodic grids, evaluates real
//! expectation values through the symmetrized bracket, and checks the
//! dynamical identities of the formalism (continuity, Ehrenfest relations,
//! Lorentz force, Virial theorem, generalized commutators) as residuals on
//! simulated trajectories.
//!
//! Numerical code is generic over the scalar type through [`Real`]; the
//! `*64` aliases below fix it to `f64`, which is what the verifiers and the
//! scenario runner use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub mod dynamics;
pub mod error;
pub mod field_grid;
pub mod hypercomplex;
pub mod operators;
pub mod real_hilbert;
pub mod scenario;
pub mod verifiers;

pub use error::{Error, Result};
pub use hypercomplex::Quaternion;

/// Floating-point scalar accepted by the grid, operator and dynamics code.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

pub type Quat = Quaternion<f64>;
pub type Quat32 = Quaternion<f32>;
pub type Grid64 = field_grid::Grid<f64>;
pub type QField64 = field_grid::QField<f64>;
pub type QVecField64 = field_grid::QVecField<f64>;
pub type RealField64 = field_grid::RealField<f64>;
pub type RealVecField64 = field_grid::RealVecField<f64>;
pub type Physics64 = operators::Physics<f64>;
pub type Operator64 = operators::Operator<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
