//! Declarative scenarios: a TOML file describing grid, physics, initial
//! state, time stepping and the checks to run, plus the runner and report
//! emission.
//!
//! A minimal file:
//!
//! ```toml
//! name = "free-packet"
//!
//! [grid]
//! extent = [20.0]
//! points = [256]
//!
//! [state]
//! kind = "gaussian"
//! width = 1.0
//! momentum = [1.0]
//!
//! [time]
//! dt = 1e-3
//! t_final = 0.5
//! stride = 50
//!
//! [[checks]]
//! kind = "continuity"
//! ```
//!
//! Sections: `grid` ([`GridSpec`]), `physics` ([`PhysicsSpec`]), `state`
//! ([`StateSpec`]), `time` ([`TimeSpec`]), `[[observers]]`, `[[checks]]`
//! ([`CheckSpec`]), `tolerances` ([`Tolerances`], partial tables allowed) and
//! `output` ([`OutputSpec`]). A top-level `formulations = ["left", "right"]`
//! runs the scenario once per listed formulation.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Observer, NORM_SERIES, STABILITY_CONSTANT};
use crate::error::{Error, Result};
use crate::field_grid::{Grid, GridSpec, StencilOrder};
use crate::operators::{Formulation, OperatorDescriptor, Physics, PhysicsSpec, ScalarProfile};
use crate::verifiers::{Tolerances, VirialVariant};
use crate::Grid64;

mod builtin;
mod emit;
mod run;
mod state;

pub use builtin::{builtin, builtin_names, builtin_source, BUILTINS};
pub use emit::{emit_report, summary_text};
pub use run::{run_scenario, CheckSummary, Manifest, ReductionChain, ReportBundle, RunOptions, RunRecord};
pub use state::{edge_ratio, StateSpec, EDGE_DECAY_BOUND};

/// Default bound for the position-gauge comparison.
pub const POSITION_GAUGE_BOUND: f64 = 1e-10;
/// Default pointwise bound for the reduction-chain comparison.
pub const REDUCTION_BOUND: f64 = 1e-12;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub t_final: f64,
    /// Snapshot every `stride` steps; rate-based checks are evaluated there.
    #[serde(default = "one")]
    pub stride: usize,
}

impl TimeSpec {
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    #[default]
    Json,
    Table,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Table => "table",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "table" => Ok(Format::Table),
            _ => Err(Error::Config(format!("unknown report format {s:?}; expected csv, json or table"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Format,
    pub directory: Option<String>,
}

fn two_percent() -> f64 {
    0.02
}

fn gauge_bound() -> f64 {
    POSITION_GAUGE_BOUND
}

fn reduction_bound() -> f64 {
    REDUCTION_BOUND
}

/// A check to evaluate on each run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Continuity {},
    EhrenfestPosition {},
    EhrenfestMomentum {},
    ExpectationDynamics {
        operator: OperatorDescriptor,
    },
    Lorentz {},
    /// Rotation rate of `⟨Π⟩` in the xy plane over the first quarter
    /// period against `−qB_z/mc` for a uniform field.
    Cyclotron {
        #[serde(default = "two_percent")]
        relative_tolerance: f64,
    },
    /// `variant` defaults to every variant that applies to the run.
    Virial {
        #[serde(default)]
        variant: Option<VirialVariant>,
    },
    /// Evaluated on the initial state; `refine` repeats the check with
    /// twice the points per axis and records the residual ratio.
    Commutators {
        #[serde(default)]
        drop_w_term: bool,
        #[serde(default)]
        refine: bool,
    },
    /// `max |∫ρ(t) − ∫ρ(0)|`.
    NormDrift {
        bound: f64,
    },
    /// `max |⟨H⟩(t) − ⟨H⟩(0)|`.
    EnergyDrift {
        bound: f64,
    },
    /// `|⟨z⟩ − ⟨r⟩|` and `|⟨q⟩ − ⟨r⟩|` on every snapshot.
    PositionGauge {
        #[serde(default = "gauge_bound")]
        bound: f64,
    },
    /// `∫ρ(t)` against `exp(2 Im U t/ħ)` for a constant imaginary potential.
    NormDecay {
        relative_tolerance: f64,
    },
    /// Pointwise distance to the same scenario run in the complex formulation.
    ReductionChain {
        #[serde(default = "reduction_bound")]
        bound: f64,
    },
}

impl CheckSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckSpec::Continuity {} => "continuity",
            CheckSpec::EhrenfestPosition {} => "ehrenfest_position",
            CheckSpec::EhrenfestMomentum {} => "ehrenfest_momentum",
            CheckSpec::ExpectationDynamics { .. } => "expectation_dynamics",
            CheckSpec::Lorentz {} => "lorentz",
            CheckSpec::Cyclotron { .. } => "cyclotron",
            CheckSpec::Virial { .. } => "virial",
            CheckSpec::Commutators { .. } => "commutators",
            CheckSpec::NormDrift { .. } => "norm_drift",
            CheckSpec::EnergyDrift { .. } => "energy_drift",
            CheckSpec::PositionGauge { .. } => "position_gauge",
            CheckSpec::NormDecay { .. } => "norm_decay",
            CheckSpec::ReductionChain { .. } => "reduction_chain",
        }
    }

    /// Whether the check differences stored snapshots in time.
    pub fn needs_rates(&self) -> bool {
        matches!(
            self,
            CheckSpec::Continuity {}
                | CheckSpec::EhrenfestPosition {}
                | CheckSpec::EhrenfestMomentum {}
                | CheckSpec::ExpectationDynamics { .. }
                | CheckSpec::Lorentz {}
                | CheckSpec::Virial { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub grid: GridSpec,
    #[serde(default)]
    pub physics: PhysicsSpec,
    /// Overrides `physics.formulation` with one run per entry.
    #[serde(default)]
    pub formulations: Vec<Formulation>,
    pub state: StateSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub observers: Vec<Observer>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Byte offset to 1-based line and column.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a scenario file.
///
/// Malformed TOML yields [`Error::Syntax`] with a line and column. Type and
/// field errors, and every failed invariant, yield [`Error::Validation`] with
/// field paths.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = toml::Deserializer::parse(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        Error::Syntax { line, column, message: e.message().trim().to_string() }
    })?;
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = inner.span().map(|s| line_column(text, s.start));
        let location = at.map_or(String::new(), |(l, c)| format!(" (line {l}, column {c})"));
        Error::Validation(vec![format!("{path}: {}{location}", inner.message().trim())])
    })?;
    scenario.validate()?;
    Ok(scenario)
}

fn virial_conflict(v: VirialVariant, f: Formulation, has_a: bool, dim: usize) -> Option<&'static str> {
    use VirialVariant::*;
    match v {
        ComplexRp | ComplexZp | ComplexZPi if f == Formulation::Right => Some("needs complex or left dynamics"),
        ComplexRp | ComplexZp if has_a => Some("needs a vanishing vector potential"),
        ComplexZPi | Left if has_a && dim != 3 => Some("with a vector potential needs a 3D grid"),
        Left if f != Formulation::Left => Some("needs the left formulation"),
        Right if f != Formulation::Right => Some("needs the right formulation"),
        Right if has_a => Some("needs a vanishing vector potential"),
        _ => None,
    }
}

/// Virial variants checked when none is named: every variant that applies.
pub fn default_virial_variants(f: Formulation, has_a: bool, dim: usize) -> Vec<VirialVariant> {
    use VirialVariant::*;
    [ComplexRp, ComplexZp, ComplexZPi, Left, Right]
        .into_iter()
        .filter(|&v| virial_conflict(v, f, has_a, dim).is_none())
        .collect()
}

/// `B_z` of a uniform field `∇×𝒜₁` with vanishing in-plane components.
pub(crate) fn uniform_bz(phys: &PhysicsSpec) -> std::result::Result<f64, &'static str> {
    let a = &phys.vector_potential;
    if !(a.a1_im.is_zero() && a.a2_re.is_zero() && a.a2_im.is_zero()) {
        return Err("needs a real vector potential 𝒜₁");
    }
    let curl = |p: [f64; 3]| {
        let j = a.a1_re.jacobian(p);
        [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
    };
    let c0 = curl([0.0; 3]);
    if c0[0] != 0.0 || c0[1] != 0.0 || c0[2] == 0.0 || curl([1.0, -0.5, 0.7]) != c0 {
        return Err("needs a uniform magnetic field along z");
    }
    Ok(c0[2])
}

impl Scenario {
    /// Formulations to run, in order.
    pub fn run_formulations(&self) -> Vec<Formulation> {
        if self.formulations.is_empty() {
            vec![self.physics.formulation]
        } else {
            self.formulations.clone()
        }
    }

    pub fn physics_for(&self, f: Formulation) -> PhysicsSpec {
        PhysicsSpec { formulation: f, ..self.physics.clone() }
    }

    pub fn build_grid(&self) -> Result<Grid64> {
        Grid::build(&self.grid)
    }

    /// Largest stable time step: `C·dx²·m/ħ` with `C = 0.2`, scaled by ¾
    /// for the fourth-order stencil.
    pub fn stability_bound(&self, grid: &Grid64) -> (f64, f64) {
        let c = match self.physics.stencil_order {
            StencilOrder::Second => STABILITY_CONSTANT,
            StencilOrder::Fourth => 0.75 * STABILITY_CONSTANT,
        };
        let dx = grid.min_spacing();
        (c * dx * dx * self.physics.mass / self.physics.hbar, c)
    }

    /// Every violated invariant, with field paths.
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.name.trim().is_empty() {
            errors.push("name: must not be empty".into());
        }
        let t = &self.time;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            errors.push(format!("time.dt: must be positive, got {}", t.dt));
        }
        if !(t.t_final.is_finite() && t.t_final >= 0.0) {
            errors.push(format!("time.t_final: must be non-negative, got {}", t.t_final));
        }
        if t.stride == 0 {
            errors.push("time.stride: must be at least 1".into());
        }
        for (name, m) in [
            ("continuity", &self.tolerances.continuity),
            ("ehrenfest_position", &self.tolerances.ehrenfest_position),
            ("ehrenfest_momentum", &self.tolerances.ehrenfest_momentum),
            ("expectation_dynamics", &self.tolerances.expectation_dynamics),
            ("lorentz", &self.tolerances.lorentz),
            ("virial", &self.tolerances.virial),
            ("commutators", &self.tolerances.commutators),
        ] {
            if [m.c1, m.c2].iter().any(|c| !(c.is_finite() && *c >= 0.0)) || !(m.floor.is_finite() && m.floor > 0.0) {
                errors.push(format!("tolerances.{name}: c1, c2 must be non-negative and floor positive"));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for (n, o) in self.observers.iter().enumerate() {
            if o.id == NORM_SERIES || !ids.insert(o.id.as_str()) {
                errors.push(format!("observers[{n}].id: {:?} is reserved or already used", o.id));
            }
        }

        let grid = match self.build_grid() {
            Ok(g) => g,
            Err(e) => {
                errors.push(format!("grid: {e}"));
                return errors;
            }
        };
        let dim = grid.dim();
        let state_errors = self.state.validation_errors("state", dim);
        let state_ok = state_errors.is_empty();
        errors.extend(state_errors);

        if t.dt > 0.0 {
            let (bound, c) = self.stability_bound(&grid);
            if t.dt > bound {
                errors.push(format!(
                    "time.dt: {} exceeds the stability bound C·dx²·m/ħ = {bound:.4e} (C = {c}, dx = {:.4e})",
                    t.dt,
                    grid.min_spacing()
                ));
            }
        }
        let steps = if t.dt > 0.0 { t.steps() } else { 0 };

        for (n, check) in self.checks.iter().enumerate() {
            let path = format!("checks[{n}] ({})", check.kind());
            if check.needs_rates() && steps <= t.stride {
                errors.push(format!("{path}: needs time.t_final/time.dt > time.stride so that a rate can be formed"));
            }
            let bad_bound = match check {
                CheckSpec::NormDrift { bound }
                | CheckSpec::EnergyDrift { bound }
                | CheckSpec::PositionGauge { bound }
                | CheckSpec::ReductionChain { bound } => Some(*bound),
                CheckSpec::Cyclotron { relative_tolerance } | CheckSpec::NormDecay { relative_tolerance } => {
                    Some(*relative_tolerance)
                }
                _ => None,
            };
            if let Some(b) = bad_bound.filter(|b| !(b.is_finite() && *b > 0.0)) {
                errors.push(format!("{path}: bound must be positive, got {b}"));
            }
        }

        let formulations = self.run_formulations();
        let multi = !self.formulations.is_empty();
        for f in formulations {
            let spec = self.physics_for(f);
            let prefix = if multi { format!("[{}] ", f.name()) } else { String::new() };
            let physics_errors = spec.validation_errors(dim);
            let physics_ok = physics_errors.is_empty();
            errors.extend(physics_errors.into_iter().map(|e| format!("{prefix}{e}")));
            if f == Formulation::Complex && !self.state.is_complex() {
                errors.push(format!(
                    "{prefix}state.amplitude: the complex formulation requires vanishing j, k amplitude components"
                ));
            }
            errors.extend(self.check_conflicts(&spec, dim).into_iter().map(|e| format!("{prefix}{e}")));
            if physics_ok {
                match Physics::new(&spec, &grid) {
                    Ok(phys) => {
                        let phys = Arc::new(phys);
                        for (n, o) in self.observers.iter().enumerate() {
                            if let Err(e) = o.operator.compile(&phys) {
                                errors.push(format!("{prefix}observers[{n}].operator: {e}"));
                            }
                        }
                        for (n, c) in self.checks.iter().enumerate() {
                            if let CheckSpec::ExpectationDynamics { operator } = c {
                                if let Err(e) = operator.compile(&phys) {
                                    errors.push(format!("{prefix}checks[{n}].operator: {e}"));
                                }
                            }
                        }
                    }
                    Err(e) => errors.push(format!("{prefix}physics: {e}")),
                }
            }
        }

        if state_ok && self.state.is_localized() {
            match self.state.build(&grid, &self.physics) {
                Ok(psi) => {
                    let r = edge_ratio(&psi);
                    if r > EDGE_DECAY_BOUND {
                        errors.push(format!(
                            "state: |ψ| on the box edge is {r:.3e} of its peak, above the edge-decay bound \
                             {EDGE_DECAY_BOUND:e}; enlarge grid.extent or move the state inward"
                        ));
                    }
                }
                Err(e) => errors.push(format!("state: {e}")),
            }
        }

        let mut seen = std::collections::BTreeSet::new();
        errors.retain(|e| seen.insert(e.clone()));
        errors
    }

    fn check_conflicts(&self, spec: &PhysicsSpec, dim: usize) -> Vec<String> {
        let f = spec.formulation;
        let has_a = !spec.vector_potential.is_zero();
        let p = &spec.potential;
        let mut errors = Vec::new();
        for (n, check) in self.checks.iter().enumerate() {
            let path = format!("checks[{n}] ({})", check.kind());
            let conflict: Option<String> = match check {
                CheckSpec::EhrenfestMomentum {} if has_a => Some("needs a vanishing vector potential".into()),
                CheckSpec::Lorentz {} if dim != 3 => Some(format!("needs a 3D grid, got dim {dim}")),
                CheckSpec::Cyclotron { .. } if dim != 3 => Some(format!("needs a 3D grid, got dim {dim}")),
                CheckSpec::Cyclotron { .. } => match uniform_bz(spec) {
                    Err(e) => Some(e.into()),
                    Ok(bz) => {
                        let quarter = std::f64::consts::FRAC_PI_2 * spec.mass * spec.light_speed / (spec.charge * bz).abs();
                        (quarter > self.time.t_final).then(|| {
                            format!("a quarter cyclotron period {quarter:.4} exceeds time.t_final = {}", self.time.t_final)
                        })
                    }
                },
                CheckSpec::Virial { variant: Some(v) } => {
                    virial_conflict(*v, f, has_a, dim).map(|c| format!("variant {} {c}", v.name()))
                }
                CheckSpec::Virial { variant: None } => default_virial_variants(f, has_a, dim)
                    .is_empty()
                    .then(|| "no Virial variant applies to this formulation and vector potential".to_string()),
                CheckSpec::NormDecay { .. } => {
                    let a = &spec.vector_potential;
                    let constant = matches!(p.u1_im, ScalarProfile::Constant { .. });
                    let others = p.u2_re.is_zero() && p.u2_im.is_zero() && a.a1_im.is_zero() && a.a2_re.is_zero() && a.a2_im.is_zero();
                    (!(constant && others)).then(|| {
                        "needs a constant physics.potential.u1_im with U₂, Im 𝒜₁ and 𝒜₂ zero".to_string()
                    })
                }
                CheckSpec::ReductionChain { .. } => {
                    let a = &spec.vector_potential;
                    if f == Formulation::Complex {
                        Some("compares a quaternionic formulation with the complex one; the run is already complex".into())
                    } else if !(p.u2_re.is_zero() && p.u2_im.is_zero() && a.a2_re.is_zero() && a.a2_im.is_zero()) {
                        Some("needs U₂ = 0 and 𝒜₂ = 0".into())
                    } else if !spec.w_field.is_zero() {
                        Some("needs w = 0".into())
                    } else if !self.state.is_complex() {
                        Some("needs an initial state without j, k components".into())
                    } else {
                        None
                    }
                }
                _ => None,
            };
            if let Some(c) = conflict {
                errors.push(format!("{path}: {c}"));
            }
        }
        errors
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.validation_errors();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }
}
