use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Formulation, Operator, Physics, PhysicsSpec, PositionKind, Side};
use crate::error::{Error, Result};
use crate::field_grid::{QField, QVecField};
use crate::hypercomplex::Quaternion;
use crate::Real;

/// Which piece of a quaternionic potential `V₁ + V₂ j` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialPart {
    /// `V₁ + V₂ j`.
    #[default]
    Full,
    /// `V₁`.
    Complex,
    /// `V₂ j`.
    Quaternionic,
    /// `V₂` as a complex number.
    JCoefficient,
}

impl PotentialPart {
    pub(crate) fn pick<T: Real>(self, v: Quaternion<T>) -> Quaternion<T> {
        let z = T::zero();
        match self {
            PotentialPart::Full => v,
            PotentialPart::Complex => Quaternion::new(v.w, v.x, z, z),
            PotentialPart::Quaternionic => Quaternion::new(z, z, v.y, v.z),
            PotentialPart::JCoefficient => Quaternion::new(v.y, v.z, z, z),
        }
    }
}

/// Pointwise coefficient for [`OperatorDescriptor::ScalarMultiply`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    /// `w + x i + y j + z k`.
    Constant { value: [f64; 4] },
    Potential {
        #[serde(default)]
        part: PotentialPart,
        #[serde(default)]
        conjugate: bool,
    },
    /// Analytic `∂_a` of the potential.
    PotentialGradient {
        axis: usize,
        #[serde(default)]
        part: PotentialPart,
    },
    Coordinate { axis: usize },
    VectorPotential {
        axis: usize,
        #[serde(default)]
        part: PotentialPart,
        #[serde(default)]
        conjugate: bool,
    },
    S { axis: usize },
    W { axis: usize },
    /// `∂_axis s_component`.
    SGradient { component: usize, axis: usize },
    WGradient { component: usize, axis: usize },
    /// `∇² s_component`.
    SLaplacian { component: usize },
    WLaplacian { component: usize },
}

impl Coefficient {
    pub fn constant(q: Quaternion<f64>) -> Self {
        Coefficient::Constant { value: [q.w, q.x, q.y, q.z] }
    }

    pub fn real(v: f64) -> Self {
        Coefficient::Constant { value: [v, 0.0, 0.0, 0.0] }
    }

    fn axes(&self) -> Vec<usize> {
        match self {
            Coefficient::Constant { .. } | Coefficient::Potential { .. } => vec![],
            Coefficient::PotentialGradient { axis, .. }
            | Coefficient::Coordinate { axis }
            | Coefficient::VectorPotential { axis, .. }
            | Coefficient::S { axis }
            | Coefficient::W { axis } => vec![*axis],
            Coefficient::SGradient { component, axis } | Coefficient::WGradient { component, axis } => {
                vec![*component, *axis]
            }
            Coefficient::SLaplacian { component } | Coefficient::WLaplacian { component } => vec![*component],
        }
    }

    /// Samples the coefficient on the physics' grid.
    pub fn sample<T: Real>(&self, phys: &Physics<T>) -> Result<QField<T>> {
        if let Some(a) = self.axes().into_iter().find(|&a| a > 2) {
            return Err(Error::Config(format!("coefficient axis {a} out of range 0..3")));
        }
        let grid = phys.grid();
        let real = |f: &crate::field_grid::RealField<T>| f.to_qfield();
        let out = match self {
            Coefficient::Constant { value } => {
                QField::constant(grid, Quaternion::new(T::lit(value[0]), T::lit(value[1]), T::lit(value[2]), T::lit(value[3])))
            }
            Coefficient::Potential { part, conjugate } => {
                let c = *conjugate;
                phys.potential.map(|v| {
                    let p = part.pick(v);
                    if c { p.conj() } else { p }
                })
            }
            Coefficient::PotentialGradient { axis, part } => {
                let pot = &phys.spec.potential;
                let axis = *axis;
                QField::sample(grid, |x| {
                    let x = x.map(|c| c.to_f64_lossy());
                    let g = |s: &super::ScalarProfile| T::lit(s.gradient(x)[axis]);
                    part.pick(Quaternion::new(g(&pot.u1_re), g(&pot.u1_im), g(&pot.u2_re), g(&pot.u2_im)))
                })?
            }
            Coefficient::Coordinate { axis } => phys.coordinate(*axis),
            Coefficient::VectorPotential { axis, part, conjugate } => {
                let c = *conjugate;
                phys.vector_potential.comps[*axis].map(|v| {
                    let p = part.pick(v);
                    if c { p.conj() } else { p }
                })
            }
            Coefficient::S { axis } => real(&phys.s.comps[*axis]),
            Coefficient::W { axis } => real(&phys.w.comps[*axis]),
            Coefficient::SGradient { component, axis } => real(&phys.ds[*component][*axis]),
            Coefficient::WGradient { component, axis } => real(&phys.dw[*component][*axis]),
            Coefficient::SLaplacian { component } => real(&phys.lap_s.comps[*component]),
            Coefficient::WLaplacian { component } => real(&phys.lap_w.comps[*component]),
        };
        Ok(out)
    }
}

/// Auxiliary operators of the generalized Virial relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VirialKind {
    /// `σ_k = (iħ/2m)(∇²s_k + 2 ∂_l s_k ∂_l)`, vector valued.
    Sigma,
    /// `σ_k` without the leading `i`.
    SigmaReal,
    /// The correction operator `𝒮` of the complex generalized Virial relation.
    S,
    /// `𝒬₁ = U₁ − (q/c)² 𝒜₂·𝒜₂†`.
    Q1,
    /// `𝒬₂ = (q/c)² 𝒜₂·(𝒜₁ + 𝒜₁†) − (q/c) p_L·𝒜₂ + U₂`.
    Q2,
    /// `ℛ = (q/c) w·𝒜₂† − (q/c) z·𝒜₂ j + w j·Π_R`.
    R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coefficient: f64,
    pub operator: OperatorDescriptor,
}

/// Serializable operator expression.
///
/// Vector-valued kinds take `axis: None` to denote the whole vector and
/// `axis: Some(a)` for one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorDescriptor {
    Identity {},
    Partial { axis: usize },
    PositionR {
        #[serde(default)]
        axis: Option<usize>,
    },
    PositionZ {
        #[serde(default)]
        axis: Option<usize>,
    },
    PositionQ {
        #[serde(default)]
        axis: Option<usize>,
    },
    MomentumP {
        #[serde(default)]
        axis: Option<usize>,
        #[serde(default)]
        side: Side,
    },
    /// `p − (q/c)𝐀`, restricted to a part of `𝐀`.
    MomentumPi {
        #[serde(default)]
        axis: Option<usize>,
        #[serde(default)]
        side: Side,
        #[serde(default)]
        part: PotentialPart,
    },
    Hamiltonian {
        #[serde(default)]
        formulation: Option<Formulation>,
    },
    ScalarMultiply {
        coefficient: Coefficient,
        #[serde(default)]
        side: Side,
    },
    /// Applied right to left: the last factor acts first.
    Composition { factors: Vec<OperatorDescriptor> },
    LinearCombination { terms: Vec<Term> },
    /// Vector built from three scalar components.
    Components { components: Vec<OperatorDescriptor> },
    Dot {
        left: Box<OperatorDescriptor>,
        right: Box<OperatorDescriptor>,
    },
    Cross {
        left: Box<OperatorDescriptor>,
        right: Box<OperatorDescriptor>,
        #[serde(default)]
        axis: Option<usize>,
    },
    VirialAux {
        which: VirialKind,
        #[serde(default)]
        axis: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector,
}

/// A descriptor bound to sampled physics.
#[derive(Debug, Clone)]
pub enum Compiled<T> {
    Scalar(Operator<T>),
    Vector(Box<[Operator<T>; 3]>),
}

fn vector_or_component(axis: Option<usize>) -> Shape {
    if axis.is_some() { Shape::Scalar } else { Shape::Vector }
}

fn check_axis(axis: Option<usize>) -> Result<()> {
    match axis {
        Some(a) if a > 2 => Err(Error::Config(format!("operator axis {a} out of range 0..3"))),
        _ => Ok(()),
    }
}

pub(crate) const LEVI_CIVITA: [(usize, usize, usize, f64); 6] =
    [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0), (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0)];

impl OperatorDescriptor {
    /// Type-checks the expression and returns its value shape.
    pub fn shape(&self) -> Result<Shape> {
        use OperatorDescriptor as D;
        match self {
            D::Identity {} | D::Partial { .. } | D::Hamiltonian { .. } | D::ScalarMultiply { .. } => Ok(Shape::Scalar),
            D::PositionR { axis } | D::PositionZ { axis } | D::PositionQ { axis } => {
                check_axis(*axis)?;
                Ok(vector_or_component(*axis))
            }
            D::MomentumP { axis, .. } | D::MomentumPi { axis, .. } => {
                check_axis(*axis)?;
                Ok(vector_or_component(*axis))
            }
            D::VirialAux { which, axis } => {
                check_axis(*axis)?;
                match which {
                    VirialKind::Sigma | VirialKind::SigmaReal => Ok(vector_or_component(*axis)),
                    _ if axis.is_some() => Err(Error::Config(format!("{which:?} is scalar valued and takes no axis"))),
                    _ => Ok(Shape::Scalar),
                }
            }
            D::Composition { factors } => {
                if factors.is_empty() {
                    return Err(Error::Config("empty composition".into()));
                }
                for (i, f) in factors.iter().enumerate() {
                    if f.shape()? != Shape::Scalar {
                        return Err(Error::Config(format!(
                            "composition factor {i} is vector valued; use dot, cross or an axis"
                        )));
                    }
                }
                Ok(Shape::Scalar)
            }
            D::LinearCombination { terms } => {
                let first = terms.first().ok_or_else(|| Error::Config("empty linear combination".into()))?;
                let shape = first.operator.shape()?;
                for (i, t) in terms.iter().enumerate().skip(1) {
                    if t.operator.shape()? != shape {
                        return Err(Error::Config(format!("linear combination term {i} has a different shape")));
                    }
                }
                Ok(shape)
            }
            D::Components { components } => {
                if components.len() != 3 {
                    return Err(Error::Config(format!("components needs 3 entries, got {}", components.len())));
                }
                for c in components {
                    if c.shape()? != Shape::Scalar {
                        return Err(Error::Config("vector components must be scalar valued".into()));
                    }
                }
                Ok(Shape::Vector)
            }
            D::Dot { left, right } => {
                if left.shape()? != Shape::Vector || right.shape()? != Shape::Vector {
                    return Err(Error::Config("dot needs two vector-valued operands".into()));
                }
                Ok(Shape::Scalar)
            }
            D::Cross { left, right, axis } => {
                check_axis(*axis)?;
                if left.shape()? != Shape::Vector || right.shape()? != Shape::Vector {
                    return Err(Error::Config("cross needs two vector-valued operands".into()));
                }
                Ok(vector_or_component(*axis))
            }
        }
    }

    pub fn compile<T: Real>(&self, phys: &Arc<Physics<T>>) -> Result<Compiled<T>> {
        self.shape()?;
        self.compile_unchecked(phys)
    }

    fn compile_unchecked<T: Real>(&self, phys: &Arc<Physics<T>>) -> Result<Compiled<T>> {
        use OperatorDescriptor as D;
        let per_axis = |axis: Option<usize>, f: &dyn Fn(usize) -> Result<Operator<T>>| -> Result<Compiled<T>> {
            match axis {
                Some(a) => Ok(Compiled::Scalar(f(a)?)),
                None => Ok(Compiled::Vector(Box::new([f(0)?, f(1)?, f(2)?]))),
            }
        };
        let order = phys.order();
        let ihbar = Quaternion::i().scale(-phys.hbar);
        let momentum = |side: Side, a: usize| -> Operator<T> {
            let c = match side {
                Side::Left => Operator::LeftConst(ihbar),
                Side::Right => Operator::RightConst(ihbar),
            };
            c.then(Operator::Partial(a, order))
        };
        match self {
            D::Identity {} => Ok(Compiled::Scalar(Operator::Identity)),
            D::Partial { axis } => Ok(Compiled::Scalar(Operator::Partial(*axis, order))),
            D::PositionR { axis } => per_axis(*axis, &|a| position(phys, a, PositionKind::R)),
            D::PositionZ { axis } => per_axis(*axis, &|a| position(phys, a, PositionKind::Z)),
            D::PositionQ { axis } => {
                if phys.formulation() == Formulation::Complex {
                    return Err(Error::Config("position_q needs a quaternionic formulation".into()));
                }
                per_axis(*axis, &|a| position(phys, a, PositionKind::Q))
            }
            D::MomentumP { axis, side } => per_axis(*axis, &|a| Ok(momentum(*side, a))),
            D::MomentumPi { axis, side, part } => per_axis(*axis, &|a| {
                let field = Coefficient::VectorPotential { axis: a, part: *part, conjugate: false }.sample(phys)?;
                Ok(Operator::Sum(vec![
                    (T::one(), momentum(*side, a)),
                    (-phys.q_over_c, Operator::LeftMul(Arc::new(field))),
                ]))
            }),
            D::Hamiltonian { formulation } => {
                let p = match formulation {
                    Some(f) if *f != phys.formulation() => Arc::new(phys.with_formulation(*f)?),
                    _ => Arc::clone(phys),
                };
                Ok(Compiled::Scalar(Operator::Hamiltonian(p)))
            }
            D::ScalarMultiply { coefficient, side } => {
                let field = Arc::new(coefficient.sample(phys)?);
                Ok(Compiled::Scalar(match side {
                    Side::Left => Operator::LeftMul(field),
                    Side::Right => Operator::RightMul(field),
                }))
            }
            D::Composition { factors } => {
                let ops = factors.iter().map(|f| f.compile_unchecked(phys).map(scalar)).collect::<Result<Vec<_>>>()?;
                Ok(Compiled::Scalar(Operator::Compose(ops)))
            }
            D::LinearCombination { terms } => {
                let compiled = terms
                    .iter()
                    .map(|t| Ok((T::lit(t.coefficient), t.operator.compile_unchecked(phys)?)))
                    .collect::<Result<Vec<_>>>()?;
                match compiled[0].1 {
                    Compiled::Scalar(_) => {
                        Ok(Compiled::Scalar(Operator::Sum(compiled.into_iter().map(|(c, o)| (c, scalar(o))).collect())))
                    }
                    Compiled::Vector(_) => {
                        let vecs: Vec<(T, [Operator<T>; 3])> =
                            compiled.into_iter().map(|(c, o)| (c, vector(o))).collect();
                        Ok(Compiled::Vector(Box::new([0, 1, 2].map(|a| {
                            Operator::Sum(vecs.iter().map(|(c, v)| (*c, v[a].clone())).collect())
                        }))))
                    }
                }
            }
            D::Components { components } => {
                let ops = components.iter().map(|c| c.compile_unchecked(phys).map(scalar)).collect::<Result<Vec<_>>>()?;
                let [a, b, c]: [Operator<T>; 3] = ops.try_into().map_err(|_| Error::Config("components needs 3 entries".into()))?;
                Ok(Compiled::Vector(Box::new([a, b, c])))
            }
            D::Dot { left, right } => {
                let (l, r) = (vector(left.compile_unchecked(phys)?), vector(right.compile_unchecked(phys)?));
                let terms = (0..3).map(|a| (T::one(), l[a].clone().then(r[a].clone()))).collect();
                Ok(Compiled::Scalar(Operator::Sum(terms)))
            }
            D::Cross { left, right, axis } => {
                let (l, r) = (vector(left.compile_unchecked(phys)?), vector(right.compile_unchecked(phys)?));
                per_axis(*axis, &|a| {
                    let terms = LEVI_CIVITA
                        .iter()
                        .filter(|(i, _, _, _)| *i == a)
                        .map(|&(_, b, c, sign)| (T::lit(sign), l[b].clone().then(r[c].clone())))
                        .collect();
                    Ok(Operator::Sum(terms))
                })
            }
            D::VirialAux { which, axis } => {
                let expanded = virial_descriptor(*which, &phys.spec);
                match (expanded.compile_unchecked(phys)?, axis) {
                    (Compiled::Vector(v), Some(a)) => {
                        let [x, y, z] = *v;
                        Ok(Compiled::Scalar([x, y, z].into_iter().nth(*a).expect("axis checked")))
                    }
                    (c, _) => Ok(c),
                }
            }
        }
    }

    /// Applies a scalar-valued descriptor.
    pub fn apply<T: Real>(&self, phys: &Arc<Physics<T>>, psi: &QField<T>) -> Result<QField<T>> {
        match self.compile(phys)? {
            Compiled::Scalar(op) => op.apply(psi),
            Compiled::Vector(_) => Err(Error::Config("operator is vector valued; use apply_vector".into())),
        }
    }

    /// Applies a vector-valued descriptor component-wise.
    pub fn apply_vector<T: Real>(&self, phys: &Arc<Physics<T>>, psi: &QField<T>) -> Result<QVecField<T>> {
        match self.compile(phys)? {
            Compiled::Vector(ops) => {
                let [a, b, c] = *ops;
                QVecField::new([a.apply(psi)?, b.apply(psi)?, c.apply(psi)?])
            }
            Compiled::Scalar(_) => Err(Error::Config("operator is scalar valued; use apply".into())),
        }
    }

    /// `[self, other] ψ` for scalar-valued descriptors.
    pub fn commutator<T: Real>(&self, other: &Self, phys: &Arc<Physics<T>>, psi: &QField<T>) -> Result<QField<T>> {
        match (self.compile(phys)?, other.compile(phys)?) {
            (Compiled::Scalar(a), Compiled::Scalar(b)) => super::commutator_apply(&a, &b, psi),
            _ => Err(Error::Config("commutators need scalar-valued operators; select an axis".into())),
        }
    }
}

fn scalar<T>(c: Compiled<T>) -> Operator<T> {
    match c {
        Compiled::Scalar(op) => op,
        Compiled::Vector(_) => unreachable!("shape checked"),
    }
}

fn vector<T>(c: Compiled<T>) -> [Operator<T>; 3] {
    match c {
        Compiled::Vector(v) => *v,
        Compiled::Scalar(_) => unreachable!("shape checked"),
    }
}

fn position<T: Real>(phys: &Physics<T>, axis: usize, kind: PositionKind) -> Result<Operator<T>> {
    Ok(Operator::LeftMul(Arc::new(super::position_coefficient(phys, axis, kind))))
}

fn mul(c: Coefficient) -> OperatorDescriptor {
    OperatorDescriptor::ScalarMultiply { coefficient: c, side: Side::Left }
}

fn compose(factors: Vec<OperatorDescriptor>) -> OperatorDescriptor {
    OperatorDescriptor::Composition { factors }
}

fn combine(terms: Vec<(f64, OperatorDescriptor)>) -> OperatorDescriptor {
    OperatorDescriptor::LinearCombination {
        terms: terms.into_iter().map(|(coefficient, operator)| Term { coefficient, operator }).collect(),
    }
}

fn dpart(axis: usize) -> OperatorDescriptor {
    OperatorDescriptor::Partial { axis }
}

fn a1(axis: usize) -> Coefficient {
    Coefficient::VectorPotential { axis, part: PotentialPart::Complex, conjugate: false }
}

fn a2(axis: usize, conjugate: bool) -> Coefficient {
    Coefficient::VectorPotential { axis, part: PotentialPart::JCoefficient, conjugate }
}

fn p_left(axis: usize) -> OperatorDescriptor {
    OperatorDescriptor::MomentumP { axis: Some(axis), side: Side::Left }
}

/// Expands a Virial auxiliary operator into primitive descriptors.
///
/// Derivatives act on everything to their right, coefficients in
/// parentheses are closed (for example `∇²s_k`).
pub fn virial_descriptor(kind: VirialKind, spec: &PhysicsSpec) -> OperatorDescriptor {
    let hbar = spec.hbar;
    let qc = spec.charge_over_c();
    let i = Quaternion::<f64>::i();
    match kind {
        VirialKind::Sigma | VirialKind::SigmaReal => {
            let prefactor = if kind == VirialKind::Sigma { i.scale(hbar / (2.0 * spec.mass)) } else {
                Quaternion::from_real(hbar / (2.0 * spec.mass))
            };
            let comp = |k: usize| {
                let mut terms = vec![(1.0, mul(Coefficient::SLaplacian { component: k }))];
                for l in 0..3 {
                    terms.push((2.0, compose(vec![mul(Coefficient::SGradient { component: k, axis: l }), dpart(l)])));
                }
                compose(vec![mul(Coefficient::constant(prefactor)), combine(terms)])
            };
            OperatorDescriptor::Components { components: (0..3).map(comp).collect() }
        }
        VirialKind::S => {
            // 𝒜 enters as (q/c)𝒜₁.
            let pi = |l: usize| OperatorDescriptor::MomentumPi { axis: Some(l), side: Side::Left, part: PotentialPart::Complex };
            let ds = |l: usize, k: usize| mul(Coefficient::SGradient { component: l, axis: k });
            let mut first = Vec::new();
            for l in 0..3 {
                first.push((hbar, compose(vec![mul(Coefficient::SLaplacian { component: l }), pi(l)])));
            }
            let mut bracket = Vec::new();
            for k in 0..3 {
                for l in 0..3 {
                    bracket.push((hbar * hbar, compose(vec![ds(l, k), dpart(k), dpart(l)])));
                    bracket.push((qc, compose(vec![mul(a1(k)), ds(l, k), p_left(l)])));
                    bracket.push((qc, compose(vec![mul(a1(k)), ds(k, l), p_left(l)])));
                    bracket.push((qc, compose(vec![ds(l, k), p_left(k), mul(a1(l))])));
                    bracket.push((qc * qc, compose(vec![mul(a1(k)), mul(a1(l)), ds(l, k)])));
                }
            }
            first.push((1.0, compose(vec![mul(Coefficient::constant(i.scale(-2.0))), combine(bracket)])));
            combine(first)
        }
        VirialKind::Q1 => {
            let mut terms = vec![(1.0, mul(Coefficient::Potential { part: PotentialPart::Complex, conjugate: false }))];
            for k in 0..3 {
                terms.push((-qc * qc, compose(vec![mul(a2(k, false)), mul(a2(k, true))])));
            }
            combine(terms)
        }
        VirialKind::Q2 => {
            let mut terms = Vec::new();
            for k in 0..3 {
                let a1_sum = combine(vec![
                    (1.0, mul(a1(k))),
                    (1.0, mul(Coefficient::VectorPotential { axis: k, part: PotentialPart::Complex, conjugate: true })),
                ]);
                terms.push((qc * qc, compose(vec![mul(a2(k, false)), a1_sum])));
                terms.push((-qc, compose(vec![p_left(k), mul(a2(k, false))])));
            }
            terms.push((1.0, mul(Coefficient::Potential { part: PotentialPart::JCoefficient, conjugate: false })));
            combine(terms)
        }
        VirialKind::R => {
            let j = mul(Coefficient::constant(Quaternion::j()));
            let mut terms = Vec::new();
            for k in 0..3 {
                terms.push((qc, compose(vec![mul(Coefficient::W { axis: k }), mul(a2(k, true))])));
                terms.push((
                    -qc,
                    compose(vec![OperatorDescriptor::PositionZ { axis: Some(k) }, mul(a2(k, false)), j.clone()]),
                ));
                terms.push((
                    1.0,
                    compose(vec![
                        mul(Coefficient::W { axis: k }),
                        j.clone(),
                        OperatorDescriptor::MomentumPi { axis: Some(k), side: Side::Right, part: PotentialPart::Complex },
                    ]),
                ));
            }
            combine(terms)
        }
    }
}
