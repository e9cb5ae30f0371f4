use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_grid::QField;
use crate::operators::PhysicsSpec;
use crate::real_hilbert::norm;
use crate::{Grid64, QField64, Quat};

/// Largest admissible `|ψ|` on the outermost grid layer relative to `max |ψ|`.
pub const EDGE_DECAY_BOUND: f64 = 1e-4;

fn unit() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

/// Initial wave function. Every kind is normalized to `∫|ψ|² = 1` after
/// sampling. `amplitude` holds the four real components of `α + βj`
/// (`α, β` complex), applied from the right of the spatial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `exp(−|x − c|²/4σ² + i k·x)`.
    Gaussian {
        #[serde(default)]
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        momentum: Vec<f64>,
        #[serde(default = "unit")]
        amplitude: [f64; 4],
    },
    /// `exp(i k·x)`; `k` should be a lattice wave number for a periodic state.
    PlaneWave {
        momentum: Vec<f64>,
        #[serde(default = "unit")]
        amplitude: [f64; 4],
    },
    /// Product of 1D harmonic-oscillator eigenfunctions `φ_{n_a}` with
    /// frequencies `ω_a`, using the physics' mass and ħ.
    OscillatorEigenstate {
        #[serde(default)]
        levels: Vec<usize>,
        omega: Vec<f64>,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        momentum: Vec<f64>,
        #[serde(default = "unit")]
        amplitude: [f64; 4],
    },
    /// Sum of individually normalized components.
    Superposition { components: Vec<StateSpec> },
}

fn comp(v: &[f64], a: usize) -> f64 {
    v.get(a).copied().unwrap_or(0.0)
}

fn check_len(path: &str, name: &str, len: usize, dim: usize, optional: bool, errors: &mut Vec<String>) {
    if !(len == dim || (optional && len == 0)) {
        errors.push(format!("{path}.{name}: expected {dim} entries, got {len}"));
    }
}

/// Physicists' Hermite polynomial `H_n(ξ)`.
fn hermite(n: usize, xi: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * xi);
    if n == 0 {
        return prev;
    }
    for m in 1..n {
        let next = 2.0 * xi * cur - 2.0 * m as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

impl StateSpec {
    pub fn validation_errors(&self, path: &str, dim: usize) -> Vec<String> {
        let mut errors = Vec::new();
        let amp = |amplitude: &[f64; 4], errors: &mut Vec<String>| {
            if amplitude.iter().all(|&a| a == 0.0) || amplitude.iter().any(|a| !a.is_finite()) {
                errors.push(format!("{path}.amplitude: must be finite and not all zero"));
            }
        };
        match self {
            StateSpec::Gaussian { center, width, momentum, amplitude } => {
                check_len(path, "center", center.len(), dim, true, &mut errors);
                check_len(path, "momentum", momentum.len(), dim, true, &mut errors);
                if !(width.is_finite() && *width > 0.0) {
                    errors.push(format!("{path}.width: must be positive, got {width}"));
                }
                amp(amplitude, &mut errors);
            }
            StateSpec::PlaneWave { momentum, amplitude } => {
                check_len(path, "momentum", momentum.len(), dim, false, &mut errors);
                amp(amplitude, &mut errors);
            }
            StateSpec::OscillatorEigenstate { levels, omega, center, momentum, amplitude } => {
                check_len(path, "levels", levels.len(), dim, true, &mut errors);
                check_len(path, "omega", omega.len(), dim, false, &mut errors);
                check_len(path, "center", center.len(), dim, true, &mut errors);
                check_len(path, "momentum", momentum.len(), dim, true, &mut errors);
                if omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    errors.push(format!("{path}.omega: frequencies must be positive"));
                }
                amp(amplitude, &mut errors);
            }
            StateSpec::Superposition { components } => {
                if components.is_empty() {
                    errors.push(format!("{path}.components: at least one component is required"));
                }
                for (n, c) in components.iter().enumerate() {
                    errors.extend(c.validation_errors(&format!("{path}.components[{n}]"), dim));
                }
            }
        }
        errors
    }

    /// True when every amplitude has vanishing `j, k` components.
    pub fn is_complex(&self) -> bool {
        match self {
            StateSpec::Gaussian { amplitude, .. }
            | StateSpec::PlaneWave { amplitude, .. }
            | StateSpec::OscillatorEigenstate { amplitude, .. } => amplitude[2] == 0.0 && amplitude[3] == 0.0,
            StateSpec::Superposition { components } => components.iter().all(StateSpec::is_complex),
        }
    }

    /// False if any component extends over the whole box.
    pub fn is_localized(&self) -> bool {
        match self {
            StateSpec::PlaneWave { .. } => false,
            StateSpec::Superposition { components } => components.iter().all(StateSpec::is_localized),
            _ => true,
        }
    }

    /// Samples and normalizes the state.
    pub fn build(&self, grid: &Grid64, physics: &PhysicsSpec) -> Result<QField64> {
        let dim = grid.dim();
        let phase = |k: &[f64], p: [f64; 3]| (0..dim).map(|a| comp(k, a) * p[a]).sum::<f64>();
        let tail = |a: &[f64; 4]| Quat::new(a[0], a[1], a[2], a[3]);
        let field = match self {
            StateSpec::Gaussian { center, width, momentum, amplitude } => {
                let q = tail(amplitude);
                QField::from_fn(grid, |p| {
                    let r2: f64 = (0..dim).map(|a| (p[a] - comp(center, a)).powi(2)).sum();
                    let env = (-r2 / (4.0 * width * width)).exp();
                    let th = phase(momentum, p);
                    Quat::new(env * th.cos(), env * th.sin(), 0.0, 0.0) * q
                })
            }
            StateSpec::PlaneWave { momentum, amplitude } => {
                let q = tail(amplitude);
                QField::from_fn(grid, |p| {
                    let th = phase(momentum, p);
                    Quat::new(th.cos(), th.sin(), 0.0, 0.0) * q
                })
            }
            StateSpec::OscillatorEigenstate { levels, omega, center, momentum, amplitude } => {
                let q = tail(amplitude);
                let scale: Vec<f64> = omega.iter().map(|w| (physics.mass * w / physics.hbar).sqrt()).collect();
                QField::from_fn(grid, |p| {
                    let mut env = 1.0;
                    for a in 0..dim {
                        let xi = scale[a] * (p[a] - comp(center, a));
                        let n = levels.get(a).copied().unwrap_or(0);
                        env *= hermite(n, xi) * (-0.5 * xi * xi).exp();
                    }
                    let th = phase(momentum, p);
                    Quat::new(env * th.cos(), env * th.sin(), 0.0, 0.0) * q
                })
            }
            StateSpec::Superposition { components } => {
                let mut sum = QField::zeros(grid);
                for c in components {
                    sum.axpy(1.0, &c.build(grid, physics)?)?;
                }
                sum
            }
        };
        let n = norm(&field);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Config(format!("initial state has norm {n}; it cannot be normalized on this grid")));
        }
        Ok(field.scale(1.0 / n.sqrt()))
    }
}

/// `max |ψ|` over the outermost grid layer divided by `max |ψ|`.
pub fn edge_ratio(psi: &QField64) -> f64 {
    let grid = psi.grid();
    let peak = psi.max_abs();
    let edge = psi
        .values()
        .iter()
        .enumerate()
        .filter(|(n, _)| grid.is_edge_point(*n, 1))
        .fold(0.0f64, |m, (_, v)| m.max(v.norm()));
    if peak > 0.0 { edge / peak } else { 0.0 }
}
