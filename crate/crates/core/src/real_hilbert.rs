//! Real bracket, real expectation values, densities, currents and the
//! non-conservative source terms of the continuity equations.
//!
//! The bracket `{ψ, φ} = ½[φψ† + ψφ†]` is the real part of `φψ†`. For complex
//! values it coincides with `½[ψ†φ + ψφ†]`; for quaternions only the real
//! parts of the two orderings agree, so the ordering used here is the one
//! whose imaginary part cancels identically.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_grid::{QField, RealField, RealVecField};
use crate::hypercomplex::Quaternion;
use crate::operators::{
    generalized_momentum_apply, Compiled, Formulation, Operator, OperatorDescriptor, Physics,
};
use crate::Real;

/// Relative threshold for the bracket's imaginary residue.
pub const RESIDUE_THRESHOLD: f64 = 1e-13;

fn residue_check<T: Real>(sum: Quaternion<T>, scale: T, index: usize) -> Result<()> {
    let residue = sum.imag_abs_max().to_f64_lossy();
    let bound = RESIDUE_THRESHOLD * scale.to_f64_lossy().max(f64::MIN_POSITIVE);
    if residue > bound {
        return Err(Error::ImaginaryResidue { residue, threshold: bound, index });
    }
    Ok(())
}

/// Pointwise `½[φψ† + ψφ†]`, with the imaginary parts checked to cancel.
pub fn bracket<T: Real>(psi: &QField<T>, o_psi: &QField<T>) -> Result<RealField<T>> {
    if psi.grid() != o_psi.grid() {
        return Err(Error::GridMismatch("bracket operands live on different grids".into()));
    }
    let half = T::lit(0.5);
    let mut values = Vec::with_capacity(psi.values().len());
    for (idx, (&a, &b)) in psi.values().iter().zip(o_psi.values()).enumerate() {
        let x = b * a.conj();
        let y = a * b.conj();
        let sum = x + y;
        residue_check(sum, x.norm() + y.norm(), idx)?;
        values.push(sum.w * half);
    }
    RealField::from_values(psi.grid(), values)
}

/// Largest imaginary part of `½[ψ†φ + ψφ†]` relative to its magnitude.
///
/// Vanishes for complex values and is generally nonzero for quaternions;
/// kept as a diagnostic of the ordering choice in [`bracket`].
pub fn literal_ordering_residue<T: Real>(psi: &QField<T>, o_psi: &QField<T>) -> Result<f64> {
    let mut worst = 0.0f64;
    let diff = psi.zip_with(o_psi, |a, b| (a.conj() * b + a * b.conj()).scale(T::lit(0.5)))?;
    for (v, (a, b)) in diff.values().iter().zip(psi.values().iter().zip(o_psi.values())) {
        let scale = (a.norm() * b.norm()).to_f64_lossy();
        if scale > 0.0 {
            worst = worst.max(v.imag_abs_max().to_f64_lossy() / scale);
        }
    }
    Ok(worst)
}

/// Whether [`expectation`] insists on a normalized state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    Raw,
    /// Fail if `|∫ρ − 1|` exceeds the bound.
    Required(f64),
}

/// `∫ρ`.
pub fn norm<T: Real>(psi: &QField<T>) -> T {
    psi.abs_sqr().integrate()
}

fn check_norm<T: Real>(psi: &QField<T>, mode: Normalization) -> Result<()> {
    if let Normalization::Required(bound) = mode {
        let n = norm(psi).to_f64_lossy();
        if (n - 1.0).abs() > bound {
            return Err(Error::Normalization { norm: n, bound });
        }
    }
    Ok(())
}

/// `∫{ψ, Oψ}` for a compiled scalar operator.
pub fn expectation_of<T: Real>(psi: &QField<T>, op: &Operator<T>) -> Result<T> {
    Ok(bracket(psi, &op.apply(psi)?)?.integrate())
}

/// `∫{ψ, Oψ}` for a descriptor; vector-valued descriptors give three values.
pub fn expectation<T: Real>(
    psi: &QField<T>,
    op: &OperatorDescriptor,
    phys: &Arc<Physics<T>>,
    mode: Normalization,
) -> Result<Vec<T>> {
    check_norm(psi, mode)?;
    match op.compile(phys)? {
        Compiled::Scalar(o) => Ok(vec![expectation_of(psi, &o)?]),
        Compiled::Vector(ops) => ops.iter().map(|o| expectation_of(psi, o)).collect(),
    }
}

/// `ρ = ψψ†` and the probability current of the physics' formulation.
///
/// `J = (1/2m)[(𝒫ψ)ψ† + ψ(𝒫ψ)†]` with `𝒫` the formulation's generalized
/// momentum; for complex ψ this equals `(1/2m)[ψ†(Πψ) + ψ(Πψ)†]`.
pub fn density_current<T: Real>(psi: &QField<T>, phys: &Physics<T>) -> Result<(RealField<T>, RealVecField<T>)> {
    let rho = psi.abs_sqr();
    let pi = generalized_momentum_apply(psi, phys.formulation().side(), phys)?;
    let inv_m = T::one() / phys.mass;
    let comp = |a: usize| bracket(psi, &pi.comps[a]).map(|b| b.map(|v| v * inv_m));
    Ok((rho, RealVecField { comps: [comp(0)?, comp(1)?, comp(2)?] }))
}

/// Shape of the vector-potential source: a vector multiplying `J` (complex,
/// left) or a scalar added to the right-hand side (right).
#[derive(Debug, Clone, PartialEq)]
pub enum GammaField<T> {
    Vector(RealVecField<T>),
    Scalar(RealField<T>),
}

/// Non-conservative terms as printed for each formulation.
///
/// Continuity reads `∂ρ/∂t + ∇·J + κ γ·J = g` (complex, left) or
/// `∂ρ/∂t + ∇·J = g + κ γ` (right), where `κ = gamma_scale`. The printed
/// formulas omit the `q/c` of the coupling and, in the right case, a factor
/// 2; `gamma_scale` restores both and equals 1 in natural units on the left.
#[derive(Debug, Clone, PartialEq)]
pub struct Sources<T> {
    pub formulation: Formulation,
    pub gamma: GammaField<T>,
    pub g: RealField<T>,
    pub gamma_scale: T,
}

pub fn nonconservative_sources<T: Real>(psi: &QField<T>, phys: &Physics<T>) -> Result<Sources<T>> {
    let hbar = phys.hbar;
    let two = T::lit(2.0);
    let rho = psi.abs_sqr();
    let i = Quaternion::<T>::i();
    let a = &phys.vector_potential;
    match phys.formulation() {
        Formulation::Complex | Formulation::Left => {
            // i(𝒜† − 𝒜)/ħ and (i𝖠† − 𝖠i)/ħ both reduce to 2 (i-part)/ħ.
            let gamma = RealVecField {
                comps: [0, 1, 2].map(|k| {
                    RealField::from_values(
                        psi.grid(),
                        a.comps[k].values().iter().map(|v| (i * v.conj() - *v * i).w / hbar).collect(),
                    )
                    .expect("grid-sized")
                }),
            };
            // i(U† − U)ρ/ħ and (𝒰†i − i𝒰)ϱ/ħ.
            let g = phys.potential.values().iter().zip(rho.values()).map(|(u, &r)| {
                let v = if phys.formulation() == Formulation::Complex { i * (u.conj() - *u) } else { u.conj() * i - i * *u };
                v.w * r / hbar
            });
            Ok(Sources {
                formulation: phys.formulation(),
                gamma: GammaField::Vector(gamma),
                g: RealField::from_values(psi.grid(), g.collect())?,
                gamma_scale: phys.q_over_c,
            })
        }
        Formulation::Right => {
            let pi = generalized_momentum_apply(psi, phys.formulation().side(), phys)?;
            let mut gamma = vec![T::zero(); psi.values().len()];
            for k in 0..3 {
                for (idx, g) in gamma.iter_mut().enumerate() {
                    let (p, f) = (psi.values()[idx], pi.comps[k].values()[idx]);
                    let inner = f * i * p.conj() + p * i * f.conj();
                    *g = *g + (a.comps[k].values()[idx] * inner).w;
                }
            }
            let scale = T::one() / (two * phys.mass * hbar);
            let gamma = RealField::from_values(psi.grid(), gamma.into_iter().map(|v| v * scale).collect())?;
            let mut g = Vec::with_capacity(psi.values().len());
            for (idx, (&p, &u)) in psi.values().iter().zip(phys.potential.values()).enumerate() {
                let x = p * i * p.conj();
                let v = (x * u.conj() - u * x).scale(T::one() / hbar);
                residue_check(v, (x.norm() * u.norm() * two / hbar).max(T::min_positive_value()), idx)?;
                g.push(v.w);
            }
            Ok(Sources {
                formulation: Formulation::Right,
                gamma: GammaField::Scalar(gamma),
                g: RealField::from_values(psi.grid(), g)?,
                gamma_scale: two * phys.q_over_c,
            })
        }
    }
}

/// Time series of a real scalar or 3-vector observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationSeries {
    pub id: String,
    pub width: usize,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ExpectationSeries {
    pub fn new(id: impl Into<String>, width: usize) -> Self {
        ExpectationSeries { id: id.into(), width, times: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, t: f64, value: Vec<f64>) -> Result<()> {
        if value.len() != self.width {
            return Err(Error::GridMismatch(format!("{}: expected {} values, got {}", self.id, self.width, value.len())));
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::Config(format!("{}: time {t} does not follow {last}", self.id)));
            }
        }
        if !t.is_finite() || value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: format!("observable {}", self.id), index: self.times.len(), position: [0.0; 3] });
        }
        self.times.push(t);
        self.values.push(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Component `c` of every sample.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        match self.width {
            1 => vec![self.id.clone()],
            3 => ["x", "y", "z"].iter().map(|a| format!("{}_{a}", self.id)).collect(),
            w => (0..w).map(|c| format!("{}_{c}", self.id)).collect(),
        }
    }

    /// CSV with columns `t, value...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.column_names());
        w.write_record(&header)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            let mut row = vec![format!("{t:e}")];
            row.extend(v.iter().map(|x| format!("{x:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
