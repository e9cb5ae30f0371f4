//! Closed-form coefficient families for potentials and position deformations.
//!
//! Each family knows its value and first derivatives, so tests have an
//! analytic oracle for every sampled coefficient.

use serde::{Deserialize, Serialize};

/// Real scalar function of position.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarProfile {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `½ Σ_a k_a (x_a - c_a)²`.
    Harmonic {
        stiffness: Vec<f64>,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `g · x + offset`.
    Linear {
        gradient: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `A exp(-|x - c|² / 2σ²)`.
    Gaussian {
        amplitude: f64,
        #[serde(default)]
        center: Vec<f64>,
        width: f64,
    },
}

fn comp(v: &[f64], a: usize) -> f64 {
    v.get(a).copied().unwrap_or(0.0)
}

fn dist2(p: [f64; 3], c: &[f64]) -> f64 {
    (0..3).map(|a| (p[a] - comp(c, a)).powi(2)).sum()
}

impl ScalarProfile {
    pub fn is_zero(&self) -> bool {
        match self {
            ScalarProfile::Zero => true,
            ScalarProfile::Constant { value } => *value == 0.0,
            ScalarProfile::Harmonic { stiffness, .. } => stiffness.iter().all(|&k| k == 0.0),
            ScalarProfile::Linear { gradient, offset } => *offset == 0.0 && gradient.iter().all(|&g| g == 0.0),
            ScalarProfile::Gaussian { amplitude, .. } => *amplitude == 0.0,
        }
    }

    pub fn value(&self, p: [f64; 3]) -> f64 {
        match self {
            ScalarProfile::Zero => 0.0,
            ScalarProfile::Constant { value } => *value,
            ScalarProfile::Harmonic { stiffness, center } => {
                (0..3).map(|a| 0.5 * comp(stiffness, a) * (p[a] - comp(center, a)).powi(2)).sum()
            }
            ScalarProfile::Linear { gradient, offset } => offset + (0..3).map(|a| comp(gradient, a) * p[a]).sum::<f64>(),
            ScalarProfile::Gaussian { amplitude, center, width } => {
                amplitude * (-dist2(p, center) / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn gradient(&self, p: [f64; 3]) -> [f64; 3] {
        match self {
            ScalarProfile::Zero | ScalarProfile::Constant { .. } => [0.0; 3],
            ScalarProfile::Harmonic { stiffness, center } => {
                [0, 1, 2].map(|a| comp(stiffness, a) * (p[a] - comp(center, a)))
            }
            ScalarProfile::Linear { gradient, .. } => [0, 1, 2].map(|a| comp(gradient, a)),
            ScalarProfile::Gaussian { width, center, .. } => {
                let v = self.value(p);
                [0, 1, 2].map(|a| -(p[a] - comp(center, a)) / (width * width) * v)
            }
        }
    }

    /// Checks shape parameters, reporting problems under `path`.
    pub fn validate(&self, path: &str, dim: usize, errors: &mut Vec<String>) {
        let check_len = |name: &str, v: &Vec<f64>, errors: &mut Vec<String>| {
            if !v.is_empty() && v.len() != dim {
                errors.push(format!("{path}.{name}: expected {dim} entries, got {}", v.len()));
            }
        };
        match self {
            ScalarProfile::Harmonic { stiffness, center } => {
                check_len("stiffness", stiffness, errors);
                check_len("center", center, errors);
            }
            ScalarProfile::Linear { gradient, .. } => check_len("gradient", gradient, errors),
            ScalarProfile::Gaussian { center, width, .. } => {
                check_len("center", center, errors);
                if *width <= 0.0 {
                    errors.push(format!("{path}.width: must be positive, got {width}"));
                }
            }
            _ => {}
        }
    }
}

/// Real 3-vector function of position.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorProfile {
    #[default]
    Zero,
    Constant { value: [f64; 3] },
    /// `v_a = Σ_b M_ab x_b`.
    Linear { matrix: [[f64; 3]; 3] },
    /// `v = α r`.
    Radial { alpha: f64 },
    /// `v = ½ B × r`, the symmetric gauge of a uniform field `B`.
    SymmetricGauge { field: [f64; 3] },
    /// `v_a = A_a exp(-|x - c|² / 2σ²)`.
    GaussianBump {
        amplitude: [f64; 3],
        #[serde(default)]
        center: Vec<f64>,
        width: f64,
    },
    /// Windowed rotation `A (-y, x, 0) exp(-|x|² / 2σ²)`.
    Solenoidal { amplitude: f64, width: f64 },
}

impl VectorProfile {
    pub fn is_zero(&self) -> bool {
        match self {
            VectorProfile::Zero => true,
            VectorProfile::Constant { value } => value.iter().all(|&v| v == 0.0),
            VectorProfile::Linear { matrix } => matrix.iter().flatten().all(|&v| v == 0.0),
            VectorProfile::Radial { alpha } => *alpha == 0.0,
            VectorProfile::SymmetricGauge { field } => field.iter().all(|&v| v == 0.0),
            VectorProfile::GaussianBump { amplitude, .. } => amplitude.iter().all(|&v| v == 0.0),
            VectorProfile::Solenoidal { amplitude, .. } => *amplitude == 0.0,
        }
    }

    /// True when the field does not vary in space.
    pub fn is_uniform(&self) -> bool {
        matches!(self, VectorProfile::Zero | VectorProfile::Constant { .. }) || self.is_zero()
    }

    pub fn value(&self, p: [f64; 3]) -> [f64; 3] {
        match self {
            VectorProfile::Zero => [0.0; 3],
            VectorProfile::Constant { value } => *value,
            VectorProfile::Linear { matrix } => [0, 1, 2].map(|a| (0..3).map(|b| matrix[a][b] * p[b]).sum()),
            VectorProfile::Radial { alpha } => p.map(|x| alpha * x),
            VectorProfile::SymmetricGauge { field: b } => [
                0.5 * (b[1] * p[2] - b[2] * p[1]),
                0.5 * (b[2] * p[0] - b[0] * p[2]),
                0.5 * (b[0] * p[1] - b[1] * p[0]),
            ],
            VectorProfile::GaussianBump { amplitude, center, width } => {
                let g = (-dist2(p, center) / (2.0 * width * width)).exp();
                amplitude.map(|a| a * g)
            }
            VectorProfile::Solenoidal { amplitude, width } => {
                let g = amplitude * (-dist2(p, &[]) / (2.0 * width * width)).exp();
                [-p[1] * g, p[0] * g, 0.0]
            }
        }
    }

    /// `J[a][b] = ∂_b v_a`.
    pub fn jacobian(&self, p: [f64; 3]) -> [[f64; 3]; 3] {
        match self {
            VectorProfile::Zero | VectorProfile::Constant { .. } => [[0.0; 3]; 3],
            VectorProfile::Linear { matrix } => *matrix,
            VectorProfile::Radial { alpha } => {
                let mut j = [[0.0; 3]; 3];
                for (a, row) in j.iter_mut().enumerate() {
                    row[a] = *alpha;
                }
                j
            }
            VectorProfile::SymmetricGauge { field: b } => [
                [0.0, -0.5 * b[2], 0.5 * b[1]],
                [0.5 * b[2], 0.0, -0.5 * b[0]],
                [-0.5 * b[1], 0.5 * b[0], 0.0],
            ],
            VectorProfile::GaussianBump { amplitude, center, width } => {
                let g = (-dist2(p, center) / (2.0 * width * width)).exp();
                let d = [0, 1, 2].map(|b| -(p[b] - comp(center, b)) / (width * width) * g);
                [0, 1, 2].map(|a| d.map(|db| amplitude[a] * db))
            }
            VectorProfile::Solenoidal { amplitude, width } => {
                let w2 = width * width;
                let g = amplitude * (-dist2(p, &[]) / (2.0 * w2)).exp();
                let dg = [0, 1, 2].map(|b| -p[b] / w2 * g);
                // v = (-y g, x g, 0)
                [
                    [-p[1] * dg[0], -g - p[1] * dg[1], -p[1] * dg[2]],
                    [g + p[0] * dg[0], p[0] * dg[1], p[0] * dg[2]],
                    [0.0; 3],
                ]
            }
        }
    }

    /// `Σ_{b < dim} ∂_b² v_a`, the Laplacian over the first `dim` axes.
    pub fn laplacian(&self, p: [f64; 3], dim: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for b in 0..dim.min(3) {
            let d2 = self.second_partial(p, b);
            for a in 0..3 {
                out[a] += d2[a];
            }
        }
        out
    }

    /// `∂_b² v_a`.
    pub fn second_partial(&self, p: [f64; 3], b: usize) -> [f64; 3] {
        match self {
            VectorProfile::GaussianBump { amplitude, center, width } => {
                let w2 = width * width;
                let g = (-dist2(p, center) / (2.0 * w2)).exp();
                let h = g * ((p[b] - comp(center, b)).powi(2) / (w2 * w2) - 1.0 / w2);
                amplitude.map(|a| a * h)
            }
            VectorProfile::Solenoidal { amplitude, width } => {
                let w2 = width * width;
                let g = amplitude * (-dist2(p, &[]) / (2.0 * w2)).exp();
                let h = g * (p[b] * p[b] / (w2 * w2) - 1.0 / w2);
                let dg = -p[b] / w2 * g;
                let delta = |a: usize| if a == b { 1.0 } else { 0.0 };
                [-(p[1] * h + 2.0 * delta(1) * dg), p[0] * h + 2.0 * delta(0) * dg, 0.0]
            }
            _ => [0.0; 3],
        }
    }

    pub fn validate(&self, path: &str, dim: usize, errors: &mut Vec<String>) {
        match self {
            VectorProfile::GaussianBump { center, width, .. } => {
                if !center.is_empty() && center.len() != dim {
                    errors.push(format!("{path}.center: expected {dim} entries, got {}", center.len()));
                }
                if *width <= 0.0 {
                    errors.push(format!("{path}.width: must be positive, got {width}"));
                }
            }
            VectorProfile::Solenoidal { width, .. } if *width <= 0.0 => {
                errors.push(format!("{path}.width: must be positive, got {width}"));
            }
            _ => {}
        }
    }
}
