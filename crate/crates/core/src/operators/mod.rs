//! Operators acting on quaternion-valued wave functions.
//!
//! [`Operator`] is a small expression tree evaluated pointwise on a grid.
//! Multiplication by a coefficient is always side-annotated because
//! quaternionic coefficients do not commute with the wave function. The
//! serializable form used in scenario files is [`OperatorDescriptor`].

mod descriptor;
mod physics;
mod profiles;

use std::sync::Arc;

pub use descriptor::{Coefficient, Compiled, OperatorDescriptor, PotentialPart, Shape, Term, VirialKind, virial_descriptor};
pub(crate) use descriptor::LEVI_CIVITA;
pub use physics::{Formulation, Physics, PhysicsSpec, PotentialSpec, Side, VectorPotentialSpec};
pub use profiles::{ScalarProfile, VectorProfile};

use crate::error::{Error, Result};
use crate::field_grid::{QField, QVecField, StencilOrder};
use crate::hypercomplex::Quaternion;
use crate::Real;

/// Which position operator: `r`, `z = r + s i` or `q = z + w j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionKind {
    R,
    Z,
    Q,
}

/// Linear operator on quaternion fields.
#[derive(Debug, Clone)]
pub enum Operator<T> {
    Identity,
    Zero,
    /// `ψ ↦ c(x) ψ(x)`.
    LeftMul(Arc<QField<T>>),
    /// `ψ ↦ ψ(x) c(x)`.
    RightMul(Arc<QField<T>>),
    LeftConst(Quaternion<T>),
    RightConst(Quaternion<T>),
    /// Central difference `∂_a`.
    Partial(usize, StencilOrder),
    /// Full Hamiltonian of the physics' own formulation.
    Hamiltonian(Arc<Physics<T>>),
    /// `[A, B, C]` applies `C` first: `A ∘ B ∘ C`.
    Compose(Vec<Operator<T>>),
    /// `Σ cᵢ Oᵢ` with real coefficients.
    Sum(Vec<(T, Operator<T>)>),
}

impl<T: Real> Operator<T> {
    pub fn compose(ops: impl IntoIterator<Item = Operator<T>>) -> Self {
        Operator::Compose(ops.into_iter().collect())
    }

    pub fn then(self, first: Operator<T>) -> Self {
        Operator::Compose(vec![self, first])
    }

    pub fn minus(self, other: Operator<T>) -> Self {
        Operator::Sum(vec![(T::one(), self), (-T::one(), other)])
    }

    pub fn scaled(self, c: T) -> Self {
        Operator::Sum(vec![(c, self)])
    }

    pub fn apply(&self, psi: &QField<T>) -> Result<QField<T>> {
        match self {
            Operator::Identity => Ok(psi.clone()),
            Operator::Zero => Ok(QField::zeros(psi.grid())),
            Operator::LeftMul(c) => psi.left_mul(c),
            Operator::RightMul(c) => psi.right_mul(c),
            Operator::LeftConst(c) => Ok(psi.left_mul_const(*c)),
            Operator::RightConst(c) => Ok(psi.right_mul_const(*c)),
            Operator::Partial(a, order) => {
                if *a >= psi.grid().dim() {
                    Ok(QField::zeros(psi.grid()))
                } else {
                    Ok(psi.partial(*a, *order))
                }
            }
            Operator::Hamiltonian(phys) => hamiltonian_apply(psi, phys),
            Operator::Compose(ops) => {
                let mut out = psi.clone();
                for op in ops.iter().rev() {
                    out = op.apply(&out)?;
                }
                Ok(out)
            }
            Operator::Sum(terms) => {
                let mut out = QField::zeros(psi.grid());
                for (c, op) in terms {
                    out.axpy(*c, &op.apply(psi)?)?;
                }
                Ok(out)
            }
        }
    }

    /// `[self, other] ψ = self(other ψ) − other(self ψ)`.
    pub fn commutator(&self, other: &Operator<T>, psi: &QField<T>) -> Result<QField<T>> {
        commutator_apply(self, other, psi)
    }
}

fn i_unit<T: Real>() -> Quaternion<T> {
    Quaternion::i()
}

fn momentum_component<T: Real>(psi: &QField<T>, axis: usize, side: Side, phys: &Physics<T>) -> QField<T> {
    if axis >= psi.grid().dim() {
        return QField::zeros(psi.grid());
    }
    let d = psi.partial(axis, phys.order());
    let c = i_unit::<T>().scale(-phys.hbar);
    match side {
        Side::Left => d.left_mul_const(c),
        Side::Right => d.right_mul_const(c),
    }
}

fn generalized_component<T: Real>(
    psi: &QField<T>,
    axis: usize,
    side: Side,
    phys: &Physics<T>,
    part: PotentialPart,
) -> Result<QField<T>> {
    let mut out = momentum_component(psi, axis, side, phys);
    if phys.has_vector_potential() {
        let a = phys.vector_potential.comps[axis].map(|v| part.pick(v));
        out.axpy(-phys.q_over_c, &psi.left_mul(&a)?)?;
    }
    Ok(out)
}

/// `p ψ` per axis: `−iħ∇ψ` (left) or `−ħ(∇ψ) i` (right).
pub fn momentum_apply<T: Real>(psi: &QField<T>, side: Side, phys: &Physics<T>) -> Result<QVecField<T>> {
    phys.check_state(psi)?;
    QVecField::new([0, 1, 2].map(|a| momentum_component(psi, a, side, phys)))
}

/// `(p − (q/c)𝐀) ψ` with `𝐀` multiplying from the left.
pub fn generalized_momentum_apply<T: Real>(psi: &QField<T>, side: Side, phys: &Physics<T>) -> Result<QVecField<T>> {
    phys.check_state(psi)?;
    let c = |a| generalized_component(psi, a, side, phys, PotentialPart::Full);
    QVecField::new([c(0)?, c(1)?, c(2)?])
}

/// `Hψ = (1/2m) Σ_a 𝒫_a(𝒫_a ψ) + 𝒰ψ` for the physics' formulation.
pub fn hamiltonian_apply<T: Real>(psi: &QField<T>, phys: &Physics<T>) -> Result<QField<T>> {
    phys.check_state(psi)?;
    let side = phys.formulation().side();
    let axes = if phys.has_vector_potential() { 3 } else { psi.grid().dim() };
    let inv2m = T::one() / (T::lit(2.0) * phys.mass);
    let mut out = psi.left_mul(&phys.potential)?;
    for a in 0..axes {
        let once = generalized_component(psi, a, side, phys, PotentialPart::Full)?;
        let twice = generalized_component(&once, a, side, phys, PotentialPart::Full)?;
        out.axpy(inv2m, &twice)?;
    }
    Ok(out)
}

fn position_coefficient<T: Real>(phys: &Physics<T>, axis: usize, kind: PositionKind) -> QField<T> {
    let grid = phys.grid();
    let s = phys.s.comps[axis].values();
    let w = phys.w.comps[axis].values();
    let values = grid
        .positions()
        .enumerate()
        .map(|(idx, p)| match kind {
            PositionKind::R => Quaternion::from_real(p[axis]),
            PositionKind::Z => Quaternion::new(p[axis], s[idx], T::zero(), T::zero()),
            PositionKind::Q => Quaternion::new(p[axis], s[idx], w[idx], T::zero()),
        })
        .collect();
    QField::from_values(grid, values).expect("grid-sized coefficient")
}

/// `(x_a + s_a i + w_a j) ψ` per axis, truncated according to `kind`.
pub fn position_apply<T: Real>(psi: &QField<T>, kind: PositionKind, phys: &Physics<T>) -> Result<QVecField<T>> {
    phys.check_state(psi)?;
    if kind == PositionKind::Q && phys.formulation() == Formulation::Complex {
        return Err(Error::Config("the quaternionic position operator needs a quaternionic formulation".into()));
    }
    let c = |a| psi.left_mul(&position_coefficient(phys, a, kind));
    QVecField::new([c(0)?, c(1)?, c(2)?])
}

/// `A(Bψ) − B(Aψ)`.
pub fn commutator_apply<T: Real>(a: &Operator<T>, b: &Operator<T>, psi: &QField<T>) -> Result<QField<T>> {
    let ab = a.apply(&b.apply(psi)?)?;
    let ba = b.apply(&a.apply(psi)?)?;
    ab.sub(&ba)
}
