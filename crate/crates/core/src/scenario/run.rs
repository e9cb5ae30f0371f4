use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{default_virial_variants, uniform_bz, CheckSpec, Scenario, StateSpec};
use crate::dynamics::{evolve, EvolveOptions, Observer, NORM_SERIES};
use crate::error::{Error, Result};
use crate::field_grid::{Grid, GridSpec};
use crate::operators::{Formulation, OperatorDescriptor, Physics, PhysicsSpec, PotentialPart, ScalarProfile};
use crate::real_hilbert::ExpectationSeries;
use crate::verifiers::{
    check_commutators, check_continuity, check_ehrenfest_momentum, check_ehrenfest_position, check_expectation_dynamics,
    check_lorentz, check_virial, cyclotron_frequency, CheckConfig, CommutatorOptions, ResidualReport, Sample, Tolerances,
};
use crate::{Grid64, Trajectory64};

const ENERGY_SERIES: &str = "check.energy";
const PI_SERIES: &str = "check.momentum_pi";

/// Conventions applied by the checks, recorded in every manifest.
pub const INTERPRETATION_FLAGS: &[&str] = &[
    "expectations integrate the real bracket Re(φψ†) over the grid",
    "continuity: the γ source term is scaled by q/c (complex, left) and 2q/c (right)",
    "momentum relation, right formulation: no potential-difference term",
    "expectation dynamics, left formulation: the observed quantity is O − iOi",
    "Lorentz force: magnetic term prefactor q/(2mc)",
    "Lorentz force, left formulation: Π_L = p_L − (q/c)𝒜₁ and force ∇(𝒰 − (q/c)²𝒜₂·𝒜₂†)",
    "time derivatives: central differences over one step, endpoints excluded",
    "tolerance = ((C₁dxᵖ + C₂dt²)·magnitude + floor)·scale",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Global multiplier on every tolerance and bound.
    pub tolerance_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tolerance_scale: 1.0 }
    }
}

/// Identifies the complex problem a run reduces to. Runs with `U₂ = 0`,
/// `𝒜₂ = 0`, `w = 0` and a `j, k`-free state hash as their complex
/// counterpart, so equal hashes mark trajectories that must agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionChain {
    pub reducible: bool,
    pub hash: String,
}

#[derive(Serialize)]
struct Reduced<'a> {
    grid: &'a GridSpec,
    physics: PhysicsSpec,
    state: &'a StateSpec,
    dt: f64,
    steps: usize,
}

fn reduction_chain(s: &Scenario, spec: &PhysicsSpec) -> Result<ReductionChain> {
    let p = &spec.potential;
    let a = &spec.vector_potential;
    let reducible = p.u2_re.is_zero()
        && p.u2_im.is_zero()
        && a.a2_re.is_zero()
        && a.a2_im.is_zero()
        && spec.w_field.is_zero()
        && s.state.is_complex();
    let mut physics = spec.clone();
    if reducible {
        physics.formulation = Formulation::Complex;
    }
    let reduced = Reduced { grid: &s.grid, physics, state: &s.state, dt: s.time.dt, steps: s.time.steps() };
    let hash = hex::encode(Sha256::digest(serde_json::to_vec(&reduced)?));
    Ok(ReductionChain { reducible, hash })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub identity: String,
    /// File name of the emitted report, without extension.
    pub file: String,
    pub pass: bool,
    pub max_residual: f64,
    pub tolerance: f64,
}

/// One propagation and its checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub formulation: Formulation,
    pub steps: usize,
    pub wall_time_seconds: f64,
    pub reduction_chain: ReductionChain,
    pub checks: Vec<CheckSummary>,
    /// Set when propagation diverged; no checks were evaluated.
    pub failure: Option<String>,
    #[serde(skip)]
    pub series: Vec<ExpectationSeries>,
    #[serde(skip)]
    pub reports: Vec<ResidualReport>,
}

impl RunRecord {
    pub fn diverged(&self) -> bool {
        self.failure.is_some()
    }

    /// File-name prefix separating runs of a multi-formulation scenario.
    pub fn prefix(&self, multi: bool) -> String {
        if multi { format!("{}-", self.formulation.name()) } else { String::new() }
    }
}

/// Self-describing record of a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub description: String,
    pub versions: BTreeMap<String, String>,
    pub scenario: Scenario,
    pub tolerance_scale: f64,
    pub tolerances: Tolerances,
    pub interpretation_flags: Vec<String>,
    pub runs: Vec<RunRecord>,
    pub wall_time_seconds: f64,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub scenario: Scenario,
    pub options: RunOptions,
    pub runs: Vec<RunRecord>,
    pub wall_time_seconds: f64,
}

impl ReportBundle {
    pub fn reports(&self) -> impl Iterator<Item = &ResidualReport> {
        self.runs.iter().flat_map(|r| r.reports.iter())
    }

    pub fn diverged(&self) -> bool {
        self.runs.iter().any(RunRecord::diverged)
    }

    pub fn all_pass(&self) -> bool {
        !self.diverged() && self.reports().all(|r| r.pass)
    }

    /// 0 when every check passes, 1 when one fails, 3 on divergence.
    pub fn exit_code(&self) -> i32 {
        if self.diverged() {
            3
        } else if self.all_pass() {
            0
        } else {
            1
        }
    }

    pub fn multi(&self) -> bool {
        !self.scenario.formulations.is_empty()
    }

    /// The report of the first check named `identity` in the run of `f`.
    pub fn report(&self, f: Formulation, identity: &str) -> Option<&ResidualReport> {
        self.runs.iter().filter(|r| r.formulation == f).flat_map(|r| &r.reports).find(|r| r.identity == identity)
    }

    pub fn manifest(&self) -> Manifest {
        let s = &self.scenario;
        let mut versions = BTreeMap::new();
        versions.insert("rhq-core".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("report-format".to_string(), "1".to_string());
        Manifest {
            name: s.name.clone(),
            description: s.description.clone(),
            versions,
            scenario: s.clone(),
            tolerance_scale: self.options.tolerance_scale,
            tolerances: s.tolerances,
            interpretation_flags: INTERPRETATION_FLAGS.iter().map(|f| f.to_string()).collect(),
            runs: self.runs.clone(),
            wall_time_seconds: self.wall_time_seconds,
            all_pass: self.all_pass(),
        }
    }
}

/// Executes every formulation of a validated scenario.
///
/// Divergence of a run is recorded in its [`RunRecord`] rather than returned
/// as an error, so the bundle is still emitted.
pub fn run_scenario(s: &Scenario, options: &RunOptions) -> Result<ReportBundle> {
    if !(options.tolerance_scale.is_finite() && options.tolerance_scale > 0.0) {
        return Err(Error::Config(format!("tolerance scale must be positive, got {}", options.tolerance_scale)));
    }
    s.validate()?;
    let grid = s.build_grid()?;
    let cfg = CheckConfig { tolerances: s.tolerances, scale: options.tolerance_scale };
    let start = Instant::now();
    let mut runs = Vec::new();
    let multi = !s.formulations.is_empty();
    for f in s.run_formulations() {
        runs.push(run_one(s, f, &grid, &cfg, multi)?);
    }
    Ok(ReportBundle { scenario: s.clone(), options: *options, runs, wall_time_seconds: start.elapsed().as_secs_f64() })
}

fn evolve_options(s: &Scenario, observers: Vec<Observer>) -> EvolveOptions {
    let mut opts = EvolveOptions::new(s.time.t_final, s.time.dt);
    opts.snapshot_stride = s.time.stride;
    opts.keep_neighbours = s.checks.iter().any(CheckSpec::needs_rates);
    opts.observers = observers;
    opts
}

fn run_one(s: &Scenario, f: Formulation, grid: &Grid64, cfg: &CheckConfig, multi: bool) -> Result<RunRecord> {
    let spec = s.physics_for(f);
    let phys = Arc::new(Physics::new(&spec, grid)?);
    let psi0 = s.state.build(grid, &spec)?;
    let mut observers = s.observers.clone();
    if s.checks.iter().any(|c| matches!(c, CheckSpec::EnergyDrift { .. })) {
        observers.push(Observer::new(ENERGY_SERIES, OperatorDescriptor::Hamiltonian { formulation: None }));
    }
    if s.checks.iter().any(|c| matches!(c, CheckSpec::Cyclotron { .. })) {
        let part = if f == Formulation::Left { PotentialPart::Complex } else { PotentialPart::Full };
        observers.push(Observer::new(PI_SERIES, OperatorDescriptor::MomentumPi { axis: None, side: f.side(), part }));
    }
    let start = Instant::now();
    let mut record = RunRecord {
        formulation: f,
        steps: s.time.steps(),
        wall_time_seconds: 0.0,
        reduction_chain: reduction_chain(s, &spec)?,
        checks: Vec::new(),
        failure: None,
        series: Vec::new(),
        reports: Vec::new(),
    };
    let traj = match evolve(&psi0, &phys, &evolve_options(s, observers)) {
        Ok(t) => t,
        Err(e @ Error::Divergence { .. }) => {
            record.failure = Some(e.to_string());
            record.wall_time_seconds = start.elapsed().as_secs_f64();
            return Ok(record);
        }
        Err(e) => return Err(e),
    };

    let mut reports = Vec::new();
    for check in &s.checks {
        reports.extend(evaluate(s, check, &traj, grid, cfg)?);
    }
    record.wall_time_seconds = start.elapsed().as_secs_f64();

    let prefix = record.prefix(multi);
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    for r in &reports {
        let n = used.entry(r.identity.clone()).or_insert(0);
        *n += 1;
        let file = if *n == 1 { format!("{prefix}{}", r.identity) } else { format!("{prefix}{}-{n}", r.identity) };
        record.checks.push(CheckSummary {
            identity: r.identity.clone(),
            file,
            pass: r.pass,
            max_residual: r.max_residual,
            tolerance: r.tolerance,
        });
    }
    record.series = traj.all_series().cloned().collect();
    record.reports = reports;
    Ok(record)
}

fn on_stride(traj: &Trajectory64, series: &ExpectationSeries) -> Vec<(f64, f64)> {
    let stride = traj.stride();
    let last = series.len().saturating_sub(1);
    series
        .times
        .iter()
        .zip(&series.values)
        .enumerate()
        .filter(|(k, _)| k % stride == 0 || *k == last)
        .map(|(_, (t, v))| (*t, v[0]))
        .collect()
}

fn drift(traj: &Trajectory64, id: &str, identity: &str, bound: f64) -> Result<ResidualReport> {
    let series = traj.series(id).ok_or_else(|| Error::MissingData(format!("series {id} was not recorded")))?;
    let points = on_stride(traj, series);
    let v0 = points[0].1;
    let samples = points.iter().map(|&(t, v)| Sample::at(t, (v - v0).abs(), (v - v0).abs())).collect();
    Ok(ResidualReport::new(identity, traj.physics().formulation(), samples, bound)?
        .term("value", points.iter().map(|p| p.1).collect()))
}

fn evaluate(s: &Scenario, check: &CheckSpec, traj: &Trajectory64, grid: &Grid64, cfg: &CheckConfig) -> Result<Vec<ResidualReport>> {
    let phys = traj.physics();
    let f = phys.formulation();
    let scale = cfg.scale;
    Ok(match check {
        CheckSpec::Continuity {} => vec![check_continuity(traj, cfg)?],
        CheckSpec::EhrenfestPosition {} => vec![check_ehrenfest_position(traj, cfg)?],
        CheckSpec::EhrenfestMomentum {} => vec![check_ehrenfest_momentum(traj, cfg)?],
        CheckSpec::ExpectationDynamics { operator } => vec![check_expectation_dynamics(traj, cfg, operator)?],
        CheckSpec::Lorentz {} => vec![check_lorentz(traj, cfg)?],
        CheckSpec::Virial { variant } => {
            let variants = match variant {
                Some(v) => vec![*v],
                None => default_virial_variants(f, phys.has_vector_potential(), phys.grid().dim()),
            };
            variants.into_iter().map(|v| check_virial(traj, cfg, v)).collect::<Result<_>>()?
        }
        CheckSpec::Commutators { drop_w_term, refine } => {
            let opts = CommutatorOptions { drop_w_term: *drop_w_term };
            let mut report = check_commutators(traj.initial_state(), phys, cfg, opts)?;
            if *refine {
                let mut fine = s.grid.clone();
                for p in fine.points.iter_mut() {
                    *p *= 2;
                }
                let fine_grid = Grid::build(&fine)?;
                let fine_phys = Arc::new(Physics::new(&phys.spec, &fine_grid)?);
                let psi = s.state.build(&fine_grid, &phys.spec)?;
                let refined = check_commutators(&psi, &fine_phys, cfg, opts)?;
                let ratio = report.max_residual / refined.max_residual;
                report = report
                    .note("refinement: the same check with twice the points per axis")
                    .term("refined_max_residual", vec![refined.max_residual])
                    .term("refined_tolerance", vec![refined.tolerance])
                    .term("refinement_ratio", vec![ratio]);
            }
            vec![report]
        }
        CheckSpec::NormDrift { bound } => vec![drift(traj, NORM_SERIES, "norm_drift", bound * scale)?],
        CheckSpec::EnergyDrift { bound } => vec![drift(traj, ENERGY_SERIES, "energy_drift", bound * scale)?],
        CheckSpec::PositionGauge { bound } => {
            let dim = grid.dim();
            let r = traj.series_or_compute("position_r", &OperatorDescriptor::PositionR { axis: None })?;
            let z = traj.series_or_compute("position_z", &OperatorDescriptor::PositionZ { axis: None })?;
            let q = if f == Formulation::Complex {
                None
            } else {
                Some(traj.series_or_compute("position_q", &OperatorDescriptor::PositionQ { axis: None })?)
            };
            let mut samples = Vec::new();
            let (mut dz, mut dq) = (Vec::new(), Vec::new());
            for n in 0..r.len() {
                let diff = |other: &ExpectationSeries| (0..dim).fold(0.0f64, |m, a| m.max((other.values[n][a] - r.values[n][a]).abs()));
                let a = diff(&z);
                let b = q.as_ref().map_or(0.0, diff);
                dz.push(a);
                dq.push(b);
                samples.push(Sample::at(r.times[n], a.max(b), a.max(b)));
            }
            let mut report = ResidualReport::new("position_gauge", f, samples, bound * scale)?.term("z_minus_r", dz);
            if q.is_some() {
                report = report.term("q_minus_r", dq);
            } else {
                report = report.note("complex formulation: only ⟨z⟩ is compared");
            }
            vec![report]
        }
        CheckSpec::NormDecay { relative_tolerance } => {
            let ScalarProfile::Constant { value } = phys.spec.potential.u1_im else {
                return Err(Error::Config("norm_decay needs a constant imaginary potential".into()));
            };
            let hbar = phys.spec.hbar;
            let series = traj.series(NORM_SERIES).expect("norm is always recorded");
            let points = on_stride(traj, series);
            let expected: Vec<f64> = points.iter().map(|&(t, _)| (2.0 * value * t / hbar).exp()).collect();
            let samples = points
                .iter()
                .zip(&expected)
                .map(|(&(t, n), e)| {
                    let r = (n / e - 1.0).abs();
                    Sample::at(t, r, r)
                })
                .collect();
            vec![ResidualReport::new("norm_decay", f, samples, relative_tolerance * scale)?
                .note("relative deviation of ∫ρ from exp(2 Im U t/ħ)")
                .term("norm", points.iter().map(|p| p.1).collect())
                .term("expected", expected)]
        }
        CheckSpec::ReductionChain { bound } => {
            let complex = Arc::new(Physics::new(&s.physics_for(Formulation::Complex), grid)?);
            let reference = evolve(traj.initial_state(), &complex, &evolve_options(s, Vec::new()))?;
            let mut samples = Vec::new();
            for (k, psi) in traj.snapshots() {
                if k % traj.stride() != 0 && k != traj.steps() {
                    continue;
                }
                let other = reference.snapshot(k).expect("same stepping stores the same snapshots");
                let d = psi.max_abs_diff(other)?;
                samples.push(Sample::at(traj.time(k), d, d));
            }
            vec![ResidualReport::new("reduction_chain", f, samples, bound * scale)?
                .note("pointwise max |ψ − ψ_complex| against the complex run of the same scenario")]
        }
        CheckSpec::Cyclotron { relative_tolerance } => {
            let spec = &phys.spec;
            let bz = uniform_bz(spec).map_err(|e| Error::Config(format!("cyclotron: {e}")))?;
            let omega_c = spec.charge * bz / (spec.mass * spec.light_speed);
            let expected = -omega_c;
            let quarter = std::f64::consts::FRAC_PI_2 / omega_c.abs();
            let series = traj.series(PI_SERIES).expect("recorded for the cyclotron check");
            let keep: Vec<usize> = (0..series.len()).filter(|&n| series.times[n] <= quarter + 0.5 * traj.dt()).collect();
            let t: Vec<f64> = keep.iter().map(|&n| series.times[n]).collect();
            let x: Vec<f64> = keep.iter().map(|&n| series.values[n][0]).collect();
            let y: Vec<f64> = keep.iter().map(|&n| series.values[n][1]).collect();
            let fit = cyclotron_frequency(&t, &x, &y)?;
            let rel = ((fit.omega - expected) / expected).abs();
            vec![ResidualReport::new("cyclotron", f, vec![Sample::labelled("quarter period", rel, rel)], relative_tolerance * scale)?
                .note("relative deviation of the ⟨Π⟩ rotation rate from −qB_z/mc; clockwise for qB_z > 0")
                .term("omega_fit", vec![fit.omega])
                .term("omega_expected", vec![expected])
                .term("fit_rms", vec![fit.rms])]
        }
    })
}
