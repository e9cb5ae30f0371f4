//! Time propagation under the complex, left and right wave equations.
//!
//! The integrator is classical fixed-step RK4. States are never
//! renormalized: a non-hermitian Hamiltonian changes the norm and the
//! continuity checks depend on seeing that change.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_grid::QField;
use crate::hypercomplex::Quaternion;
use crate::operators::{hamiltonian_apply, Compiled, Formulation, OperatorDescriptor, Physics};
use crate::real_hilbert::{expectation_of, norm, ExpectationSeries};
use crate::Real;

/// Default stability constant `C` in `dt ≤ C dx² m/ħ`.
pub const STABILITY_CONSTANT: f64 = 0.2;

/// Largest stable step for the grid and physics at stability constant `c`.
pub fn stability_bound<T: Real>(phys: &Physics<T>, c: f64) -> f64 {
    let dx = phys.grid().min_spacing().to_f64_lossy();
    c * dx * dx * phys.spec.mass / phys.spec.hbar
}

/// `∂ψ/∂t` from the formulation's wave equation.
pub fn time_derivative<T: Real>(psi: &QField<T>, phys: &Physics<T>) -> Result<QField<T>> {
    let h = hamiltonian_apply(psi, phys)?;
    let c = Quaternion::i().scale(-T::one() / phys.hbar);
    Ok(match phys.formulation() {
        Formulation::Complex | Formulation::Left => h.left_mul_const(c),
        Formulation::Right => h.right_mul_const(c),
    })
}

/// One classical RK4 step of size `dt` starting at time `t`.
pub fn rk4_step<T: Real>(psi: &QField<T>, t: f64, dt: f64, phys: &Physics<T>) -> Result<QField<T>> {
    if dt == 0.0 {
        return Ok(psi.clone());
    }
    let h = T::lit(dt);
    let half = T::lit(0.5 * dt);
    let k1 = time_derivative(psi, phys)?;
    let mut s = psi.clone();
    s.axpy(half, &k1)?;
    let k2 = time_derivative(&s, phys)?;
    let mut s = psi.clone();
    s.axpy(half, &k2)?;
    let k3 = time_derivative(&s, phys)?;
    let mut s = psi.clone();
    s.axpy(h, &k3)?;
    let k4 = time_derivative(&s, phys)?;
    let mut out = psi.clone();
    let sixth = h / T::lit(6.0);
    out.axpy(sixth, &k1)?;
    out.axpy(sixth + sixth, &k2)?;
    out.axpy(sixth + sixth, &k3)?;
    out.axpy(sixth, &k4)?;
    if out.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t: t + dt, dt, last_good: t });
    }
    Ok(out)
}

/// An expectation value recorded at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observer {
    pub id: String,
    pub operator: OperatorDescriptor,
}

impl Observer {
    pub fn new(id: impl Into<String>, operator: OperatorDescriptor) -> Self {
        Observer { id: id.into(), operator }
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub t0: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Keep a full snapshot every `stride` steps (and at the last step).
    pub snapshot_stride: usize,
    /// Also keep the states one step before and after each stride point.
    pub keep_neighbours: bool,
    pub observers: Vec<Observer>,
}

impl EvolveOptions {
    pub fn new(t_final: f64, dt: f64) -> Self {
        EvolveOptions { t0: 0.0, t_final, dt, snapshot_stride: 1, keep_neighbours: false, observers: Vec::new() }
    }

    /// Number of steps; the run ends at `t0 + steps·dt`, the grid time
    /// closest to `t_final`.
    pub fn steps(&self) -> usize {
        ((self.t_final - self.t0) / self.dt).round().max(0.0) as usize
    }
}

/// Identifier of the always-recorded `∫ρ` series.
pub const NORM_SERIES: &str = "norm";

/// A propagated solution: snapshots at a stride plus per-step series.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    physics: Arc<Physics<T>>,
    t0: f64,
    dt: f64,
    steps: usize,
    stride: usize,
    snapshots: BTreeMap<usize, QField<T>>,
    series: BTreeMap<String, ExpectationSeries>,
}

impl<T: Real> Trajectory<T> {
    pub fn physics(&self) -> &Arc<Physics<T>> {
        &self.physics
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }

    /// Stored states, keyed by step.
    pub fn snapshots(&self) -> impl Iterator<Item = (usize, &QField<T>)> {
        self.snapshots.iter().map(|(&k, v)| (k, v))
    }

    pub fn snapshot(&self, step: usize) -> Option<&QField<T>> {
        self.snapshots.get(&step)
    }

    /// Stride points (excluding the ends) whose neighbours are stored.
    pub fn triple_centres(&self) -> Vec<usize> {
        self.snapshots
            .keys()
            .copied()
            .filter(|&k| k > 0 && k % self.stride == 0 && self.snapshots.contains_key(&(k - 1)) && self.snapshots.contains_key(&(k + 1)))
            .collect()
    }

    pub fn initial_state(&self) -> &QField<T> {
        &self.snapshots[&0]
    }

    pub fn final_state(&self) -> &QField<T> {
        &self.snapshots[&self.steps]
    }

    pub fn series(&self, id: &str) -> Option<&ExpectationSeries> {
        self.series.get(id)
    }

    pub fn all_series(&self) -> impl Iterator<Item = &ExpectationSeries> {
        self.series.values()
    }

    /// Recorded series for `id`, or the expectation of `op` evaluated on the
    /// stored stride snapshots.
    pub fn series_or_compute(&self, id: &str, op: &OperatorDescriptor) -> Result<ExpectationSeries> {
        if let Some(s) = self.series.get(id) {
            return Ok(s.clone());
        }
        let compiled = op.compile(&self.physics)?;
        let width = match &compiled {
            Compiled::Scalar(_) => 1,
            Compiled::Vector(_) => 3,
        };
        let mut out = ExpectationSeries::new(id, width);
        for (&k, psi) in &self.snapshots {
            if k % self.stride != 0 && k != self.steps {
                continue;
            }
            out.push(self.time(k), evaluate(&compiled, psi)?)?;
        }
        Ok(out)
    }
}

fn evaluate<T: Real>(op: &Compiled<T>, psi: &QField<T>) -> Result<Vec<f64>> {
    match op {
        Compiled::Scalar(o) => Ok(vec![expectation_of(psi, o)?.to_f64_lossy()]),
        Compiled::Vector(ops) => ops.iter().map(|o| expectation_of(psi, o).map(|v| v.to_f64_lossy())).collect(),
    }
}

/// Propagates `psi0` from `t0` to `t_final`, recording observers every step.
pub fn evolve<T: Real>(psi0: &QField<T>, phys: &Arc<Physics<T>>, opts: &EvolveOptions) -> Result<Trajectory<T>> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {}", opts.dt)));
    }
    if opts.t_final < opts.t0 {
        return Err(Error::Config(format!("final time {} precedes start {}", opts.t_final, opts.t0)));
    }
    if opts.snapshot_stride == 0 {
        return Err(Error::Config("snapshot stride must be at least 1".into()));
    }
    phys.check_state(psi0)?;
    psi0.ensure_finite("initial state")?;

    let compiled = opts
        .observers
        .iter()
        .map(|o| o.operator.compile(phys).map(|c| (o.id.clone(), c)))
        .collect::<Result<Vec<_>>>()?;
    let mut series: BTreeMap<String, ExpectationSeries> = BTreeMap::new();
    series.insert(NORM_SERIES.into(), ExpectationSeries::new(NORM_SERIES, 1));
    for (id, c) in &compiled {
        if series.contains_key(id) {
            return Err(Error::Config(format!("duplicate observer id {id:?}")));
        }
        let width = if matches!(c, Compiled::Scalar(_)) { 1 } else { 3 };
        series.insert(id.clone(), ExpectationSeries::new(id, width));
    }

    let steps = opts.steps();
    let stride = opts.snapshot_stride;
    let keep = |k: usize| {
        k == 0
            || k == steps
            || k % stride == 0
            || (opts.keep_neighbours && ((k + 1) % stride == 0 || (k >= 1 && (k - 1) % stride == 0 && k - 1 > 0)))
    };

    let mut traj = Trajectory {
        physics: Arc::clone(phys),
        t0: opts.t0,
        dt: opts.dt,
        steps,
        stride,
        snapshots: BTreeMap::new(),
        series,
    };
    let record = |traj: &mut Trajectory<T>, k: usize, psi: &QField<T>| -> Result<()> {
        let t = traj.time(k);
        let n = norm(psi).to_f64_lossy();
        if !n.is_finite() {
            return Err(Error::Divergence { t, dt: traj.dt, last_good: t - traj.dt });
        }
        traj.series.get_mut(NORM_SERIES).expect("norm series").push(t, vec![n])?;
        for (id, c) in &compiled {
            let v = evaluate(c, psi)?;
            traj.series.get_mut(id).expect("observer series").push(t, v)?;
        }
        Ok(())
    };

    let mut psi = psi0.clone();
    record(&mut traj, 0, &psi)?;
    traj.snapshots.insert(0, psi.clone());
    for k in 1..=steps {
        psi = rk4_step(&psi, traj.time(k - 1), opts.dt, phys)?;
        record(&mut traj, k, &psi)?;
        if keep(k) {
            traj.snapshots.insert(k, psi.clone());
        }
    }
    Ok(traj)
}
