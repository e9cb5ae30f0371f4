use serde::{Deserialize, Serialize};

use super::profiles::{ScalarProfile, VectorProfile};
use crate::error::{Error, Result};
use crate::field_grid::{Grid, QField, QVecField, RealField, RealVecField, StencilOrder};
use crate::hypercomplex::Quaternion;
use crate::Real;

/// Which wave equation drives the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// `iħ ∂ψ/∂t = Hψ` with complex ψ.
    #[default]
    Complex,
    /// `iħ ∂Ψ/∂t = H_L Ψ`, `i` acting from the left.
    Left,
    /// `ħ (∂Ψ/∂t) i = H_R Ψ`, `i` acting from the right.
    Right,
}

impl Formulation {
    pub fn side(self) -> Side {
        match self {
            Formulation::Complex | Formulation::Left => Side::Left,
            Formulation::Right => Side::Right,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Formulation::Complex => "complex",
            Formulation::Left => "left",
            Formulation::Right => "right",
        }
    }
}

/// Side from which the imaginary unit of a momentum operator multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Left,
    Right,
}

/// Scalar potential `𝒰 = U₁ + U₂ j` with complex `U₁, U₂`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSpec {
    pub u1_re: ScalarProfile,
    pub u1_im: ScalarProfile,
    pub u2_re: ScalarProfile,
    pub u2_im: ScalarProfile,
}

/// Vector potential `𝐀 = 𝒜₁ + 𝒜₂ j` with complex 3-vectors `𝒜₁, 𝒜₂`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorPotentialSpec {
    pub a1_re: VectorProfile,
    pub a1_im: VectorProfile,
    pub a2_re: VectorProfile,
    pub a2_im: VectorProfile,
}

impl VectorPotentialSpec {
    pub fn is_zero(&self) -> bool {
        self.a1_re.is_zero() && self.a1_im.is_zero() && self.a2_re.is_zero() && self.a2_im.is_zero()
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSpec {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub charge: f64,
    #[serde(default = "one")]
    pub light_speed: f64,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub vector_potential: VectorPotentialSpec,
    /// Imaginary deformation `s(r)` of the position operator.
    #[serde(default)]
    pub s_field: VectorProfile,
    /// `j` deformation `w(r)` of the quaternionic position operator.
    #[serde(default)]
    pub w_field: VectorProfile,
    #[serde(default)]
    pub formulation: Formulation,
    #[serde(default)]
    pub stencil_order: StencilOrder,
}

impl Default for PhysicsSpec {
    fn default() -> Self {
        PhysicsSpec {
            hbar: 1.0,
            mass: 1.0,
            charge: 1.0,
            light_speed: 1.0,
            potential: PotentialSpec::default(),
            vector_potential: VectorPotentialSpec::default(),
            s_field: VectorProfile::Zero,
            w_field: VectorProfile::Zero,
            formulation: Formulation::Complex,
            stencil_order: StencilOrder::Second,
        }
    }
}

impl PhysicsSpec {
    /// Collects every invariant violation, with field paths.
    pub fn validation_errors(&self, dim: usize) -> Vec<String> {
        let mut errors = Vec::new();
        for (name, v) in [("hbar", self.hbar), ("mass", self.mass), ("light_speed", self.light_speed)] {
            if !(v.is_finite() && v > 0.0) {
                errors.push(format!("physics.{name}: must be positive, got {v}"));
            }
        }
        if !self.charge.is_finite() {
            errors.push(format!("physics.charge: must be finite, got {}", self.charge));
        }
        let p = &self.potential;
        for (name, s) in [("u1_re", &p.u1_re), ("u1_im", &p.u1_im), ("u2_re", &p.u2_re), ("u2_im", &p.u2_im)] {
            s.validate(&format!("physics.potential.{name}"), dim, &mut errors);
        }
        let a = &self.vector_potential;
        for (name, v) in [("a1_re", &a.a1_re), ("a1_im", &a.a1_im), ("a2_re", &a.a2_re), ("a2_im", &a.a2_im)] {
            v.validate(&format!("physics.vector_potential.{name}"), dim, &mut errors);
        }
        self.s_field.validate("physics.s_field", dim, &mut errors);
        self.w_field.validate("physics.w_field", dim, &mut errors);
        if self.formulation == Formulation::Complex {
            if !(p.u2_re.is_zero() && p.u2_im.is_zero()) {
                errors.push("physics.potential.u2_*: the complex formulation requires U₂ = 0".into());
            }
            if !(a.a2_re.is_zero() && a.a2_im.is_zero()) {
                errors.push("physics.vector_potential.a2_*: the complex formulation requires 𝒜₂ = 0".into());
            }
            if !self.w_field.is_zero() {
                errors.push("physics.w_field: the complex formulation requires w = 0".into());
            }
        }
        errors
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let errors = self.validation_errors(dim);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn charge_over_c(&self) -> f64 {
        self.charge / self.light_speed
    }
}

/// A [`PhysicsSpec`] sampled on a grid.
///
/// Quaternion coefficient fields follow `ψ₁ + ψ₂ j`: the potential is stored
/// as `(Re U₁, Im U₁, Re U₂, Im U₂)` per point, the vector potential likewise
/// per component.
#[derive(Debug, Clone)]
pub struct Physics<T> {
    pub spec: PhysicsSpec,
    grid: Grid<T>,
    pub hbar: T,
    pub mass: T,
    pub q_over_c: T,
    /// `𝒰`.
    pub potential: QField<T>,
    /// `𝐀`.
    pub vector_potential: QVecField<T>,
    pub s: RealVecField<T>,
    pub w: RealVecField<T>,
    /// Analytic `∂_b s_a`, indexed `[a][b]`.
    pub ds: [[RealField<T>; 3]; 3],
    /// Analytic `∂_b w_a`, indexed `[a][b]`.
    pub dw: [[RealField<T>; 3]; 3],
    /// Analytic `∇² s_a` over the grid axes.
    pub lap_s: RealVecField<T>,
    pub lap_w: RealVecField<T>,
    has_vector_potential: bool,
}

fn complex_pair<T: Real>(re: f64, im: f64, re2: f64, im2: f64) -> Quaternion<T> {
    Quaternion::new(T::lit(re), T::lit(im), T::lit(re2), T::lit(im2))
}

fn to_f64<T: Real>(p: [T; 3]) -> [f64; 3] {
    p.map(|c| c.to_f64_lossy())
}

impl<T: Real> Physics<T> {
    pub fn new(spec: &PhysicsSpec, grid: &Grid<T>) -> Result<Self> {
        spec.validate(grid.dim())?;
        let pot = &spec.potential;
        let potential = QField::sample(grid, |p| {
            let p = to_f64(p);
            complex_pair(pot.u1_re.value(p), pot.u1_im.value(p), pot.u2_re.value(p), pot.u2_im.value(p))
        })?;
        let vp = &spec.vector_potential;
        let comp = |a: usize| {
            QField::sample(grid, |p| {
                let p = to_f64(p);
                complex_pair(vp.a1_re.value(p)[a], vp.a1_im.value(p)[a], vp.a2_re.value(p)[a], vp.a2_im.value(p)[a])
            })
        };
        let vector_potential = QVecField::new([comp(0)?, comp(1)?, comp(2)?])?;
        let real_vec = |v: &VectorProfile| RealVecField {
            comps: [0, 1, 2].map(|a| RealField::from_fn(grid, |p| T::lit(v.value(to_f64(p))[a]))),
        };
        let jac = |v: &VectorProfile| {
            [0, 1, 2].map(|a| [0, 1, 2].map(|b| RealField::from_fn(grid, |p| T::lit(v.jacobian(to_f64(p))[a][b]))))
        };
        let lap = |v: &VectorProfile| RealVecField {
            comps: [0, 1, 2].map(|a| RealField::from_fn(grid, |p| T::lit(v.laplacian(to_f64(p), grid.dim())[a]))),
        };
        Ok(Physics {
            spec: spec.clone(),
            grid: *grid,
            hbar: T::lit(spec.hbar),
            mass: T::lit(spec.mass),
            q_over_c: T::lit(spec.charge_over_c()),
            potential,
            vector_potential,
            s: real_vec(&spec.s_field),
            w: real_vec(&spec.w_field),
            ds: jac(&spec.s_field),
            dw: jac(&spec.w_field),
            lap_s: lap(&spec.s_field),
            lap_w: lap(&spec.w_field),
            has_vector_potential: !spec.vector_potential.is_zero(),
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn formulation(&self) -> Formulation {
        self.spec.formulation
    }

    pub fn order(&self) -> StencilOrder {
        self.spec.stencil_order
    }

    pub fn has_vector_potential(&self) -> bool {
        self.has_vector_potential
    }

    /// Same physics with a different formulation; sampled fields are reused.
    pub fn with_formulation(&self, formulation: Formulation) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.formulation = formulation;
        spec.validate(self.grid.dim())?;
        let mut out = self.clone();
        out.spec = spec;
        Ok(out)
    }

    /// `U₁ = Re U₁ + Im U₁ i` as a quaternion field.
    pub fn potential_complex_part(&self) -> QField<T> {
        self.potential.map(Quaternion::complex_part)
    }

    /// Coordinate field `x_a`.
    pub fn coordinate(&self, axis: usize) -> QField<T> {
        QField::from_fn(&self.grid, |p| Quaternion::from_real(p[axis]))
    }

    /// `𝒜₁` component `a`.
    pub fn a1(&self, axis: usize) -> QField<T> {
        self.vector_potential.comps[axis].map(Quaternion::complex_part)
    }

    /// `𝒜₂` component `a` as a complex value (the coefficient of `j`).
    pub fn a2(&self, axis: usize) -> QField<T> {
        self.vector_potential.comps[axis].map(|v| Quaternion::new(v.y, v.z, T::zero(), T::zero()))
    }

    /// Checks that a wave function is admissible for the formulation.
    pub fn check_state(&self, psi: &QField<T>) -> Result<()> {
        if psi.grid() != &self.grid {
            return Err(Error::GridMismatch("wave function and physics live on different grids".into()));
        }
        if self.formulation() == Formulation::Complex && !psi.is_complex() {
            return Err(Error::Config(
                "the complex formulation requires a wave function with vanishing j, k components".into(),
            ));
        }
        Ok(())
    }
}
