use std::sync::Arc;

use super::continuity::{source_parts, SourceParts};
use super::{after, expect, lconst, lmul, max_abs, rate, scalar_op, state, window, CheckConfig, ResidualReport, Sample};
use crate::dynamics::time_derivative;
use crate::error::{Error, Result};
use crate::hypercomplex::Quaternion;
use crate::operators::{Coefficient, Compiled, Formulation, Operator, OperatorDescriptor, PotentialPart};
use crate::real_hilbert::bracket;
use crate::{Operator64, Trajectory64};

fn position_descriptor(f: Formulation, axis: usize) -> OperatorDescriptor {
    match f {
        Formulation::Complex => OperatorDescriptor::PositionZ { axis: Some(axis) },
        _ => OperatorDescriptor::PositionQ { axis: Some(axis) },
    }
}

/// `d⟨q⟩/dt = ⟨𝒫⟩/m + ∫ x (g − κ γ·J) dV` (complex, left) or
/// `⟨𝒫⟩/m + ∫ x (g + κ γ) dV` (right), per grid axis.
pub fn check_ehrenfest_position(traj: &Trajectory64, cfg: &CheckConfig) -> Result<ResidualReport> {
    let phys = traj.physics();
    let f = phys.formulation();
    let grid = phys.grid();
    let dv = grid.cell_volume();
    let dim = grid.dim();
    let centres = window(traj, "ehrenfest position")?;
    let positions =
        (0..dim).map(|a| scalar_op(&position_descriptor(f, a), phys)).collect::<Result<Vec<_>>>()?;
    let momenta = (0..dim)
        .map(|a| {
            let d = OperatorDescriptor::MomentumPi { axis: Some(a), side: f.side(), part: PotentialPart::Full };
            scalar_op(&d, phys)
        })
        .collect::<Result<Vec<_>>>()?;
    let mass = phys.mass;

    let mut samples = Vec::new();
    let (mut literal, mut flipped) = (Vec::new(), Vec::new());
    let (mut lhs_t, mut mom_t, mut src_t) = (Vec::new(), Vec::new(), Vec::new());
    let mut magnitude = 0.0f64;
    for &k in &centres {
        let psi = state(traj, k);
        let SourceParts { g, gamma_term, kappa, .. } = source_parts(psi, phys)?;
        let mut r = vec![0.0; dim];
        let mut r_literal = vec![0.0; dim];
        let mut r_flipped = vec![0.0; dim];
        let (mut lhs_n, mut mom_n, mut src_n) = (0.0f64, 0.0f64, 0.0f64);
        for a in 0..dim {
            let lhs = rate(traj, k, &positions[a])?;
            let mom = expect(psi, &momenta[a])? / mass;
            let (mut g_part, mut gamma_part) = (0.0, 0.0);
            for (idx, x) in grid.positions().enumerate() {
                g_part += x[a] * g[idx];
                gamma_part += x[a] * gamma_term[idx];
            }
            let (g_part, gamma_part) = (g_part * dv, gamma_part * dv);
            let src = g_part - kappa * gamma_part;
            r[a] = lhs - mom - src;
            r_literal[a] = lhs - mom - (g_part - gamma_part);
            r_flipped[a] = lhs - mom - (g_part + kappa * gamma_part);
            lhs_n = lhs_n.max(lhs.abs());
            mom_n = mom_n.max(mom.abs());
            src_n = src_n.max(src.abs());
        }
        samples.push(Sample::from_components(traj.time(k), &r));
        literal.push(max_abs(r_literal));
        flipped.push(max_abs(r_flipped));
        magnitude = magnitude.max(lhs_n).max(mom_n).max(src_n);
        lhs_t.push(lhs_n);
        mom_t.push(mom_n);
        src_t.push(src_n);
    }

    let tol = cfg.tolerance(&cfg.tolerances.ehrenfest_position, phys, traj.dt(), magnitude);
    let mut report = ResidualReport::new("ehrenfest_position", f, samples, tol)?
        .note("source term integrated as ∫ x (ρ̇ + ∇·J) dV with the continuity sources")
        .alternate("sources without the coupling factor", &literal);
    report = match f {
        Formulation::Right => report.alternate("vector-potential source with opposite sign", &flipped),
        _ => report,
    };
    Ok(report.term("d_position_dt", lhs_t).term("momentum_over_m", mom_t).term("source", src_t))
}

/// `∂_a Re 𝒰`, sampled analytically.
fn real_force(phys: &Arc<crate::operators::Physics<f64>>, axis: usize) -> Result<Operator64> {
    let grad = Coefficient::PotentialGradient { axis, part: PotentialPart::Full }.sample(phys)?;
    Ok(lmul(grad.map(|v| Quaternion::from_real(v.w))))
}

/// `d⟨p⟩/dt = −⟨∇ Re 𝒰⟩ + ⟨((𝒰 − 𝒰†)/iħ) p⟩` for complex and left states;
/// the right check omits the second term.
///
/// Restricted to `𝐀 = 0`; with a vector potential use [`super::check_lorentz`].
pub fn check_ehrenfest_momentum(traj: &Trajectory64, cfg: &CheckConfig) -> Result<ResidualReport> {
    let phys = traj.physics();
    if phys.has_vector_potential() {
        return Err(Error::Unsupported(
            "momentum Ehrenfest check needs a zero vector potential; use the Lorentz check instead".into(),
        ));
    }
    let f = phys.formulation();
    let dim = phys.grid().dim();
    let hbar = phys.hbar;
    let centres = window(traj, "ehrenfest momentum")?;
    let i = Quaternion::<f64>::i();
    let anti = phys.potential.map(|u| u.conj() - u);

    let mut momenta = Vec::new();
    let mut forces = Vec::new();
    let mut u_terms = Vec::new();
    for a in 0..dim {
        let p = scalar_op(&OperatorDescriptor::MomentumP { axis: Some(a), side: f.side() }, phys)?;
        forces.push(real_force(phys, a)?);
        // (𝒰 − 𝒰†)(iħ)⁻¹ = (𝒰̄ − 𝒰) i/ħ, multiplying p from the left.
        let lhs_coefficient = anti.map(|v| v * i.scale(1.0 / hbar));
        let term = match f {
            Formulation::Complex | Formulation::Left => after(lmul(lhs_coefficient), p.clone()),
            Formulation::Right => after(
                lmul(anti.scale(1.0 / hbar)),
                after(Operator::RightConst(i), p.clone()),
            ),
        };
        momenta.push(p);
        u_terms.push(term);
    }

    let mut samples = Vec::new();
    let mut other = Vec::new();
    let (mut lhs_t, mut force_t, mut u_t) = (Vec::new(), Vec::new(), Vec::new());
    let mut magnitude = 0.0f64;
    for &k in &centres {
        let psi = state(traj, k);
        let mut r = vec![0.0; dim];
        let mut r_other = vec![0.0; dim];
        let (mut lhs_n, mut force_n, mut u_n) = (0.0f64, 0.0f64, 0.0f64);
        for a in 0..dim {
            let lhs = rate(traj, k, &momenta[a])?;
            let force = expect(psi, &forces[a])?;
            let u = expect(psi, &u_terms[a])?;
            let (with_term, without) = (lhs + force - u, lhs + force);
            (r[a], r_other[a]) = match f {
                Formulation::Right => (without, with_term),
                _ => (with_term, without),
            };
            lhs_n = lhs_n.max(lhs.abs());
            force_n = force_n.max(force.abs());
            u_n = u_n.max(u.abs());
        }
        samples.push(Sample::from_components(traj.time(k), &r));
        other.push(max_abs(r_other));
        magnitude = magnitude.max(lhs_n).max(force_n).max(u_n);
        lhs_t.push(lhs_n);
        force_t.push(force_n);
        u_t.push(u_n);
    }

    let tol = cfg.tolerance(&cfg.tolerances.ehrenfest_momentum, phys, traj.dt(), magnitude);
    let report = ResidualReport::new("ehrenfest_momentum", f, samples, tol)?;
    let report = match f {
        Formulation::Right => report
            .note("potential-difference term omitted as in the right-hand identity")
            .alternate("with (𝒰̄ − 𝒰)∂ term", &other),
        _ => report
            .note("(𝒰 − 𝒰†)/iħ read as right division, multiplying p from the left")
            .alternate("potential-difference term omitted", &other),
    };
    Ok(report.term("d_momentum_dt", lhs_t).term("force", force_t).term("potential_difference", u_t))
}

fn compiled_components(op: &OperatorDescriptor, traj: &Trajectory64) -> Result<Vec<Operator64>> {
    Ok(match op.compile(traj.physics())? {
        Compiled::Scalar(o) => vec![o],
        Compiled::Vector(v) => v.to_vec(),
    })
}

fn commutator(a: Operator64, b: Operator64) -> Operator64 {
    after(a.clone(), b.clone()).minus(after(b, a))
}

/// Time derivative of an expectation value against the commutator with the
/// Hamiltonian, in the formulation's form:
///
/// - complex: `d⟨O⟩/dt = ⟨[O, H]/iħ⟩`
/// - left: `d⟨O − iOi⟩/dt = −⟨[iO + Oi, H]⟩/ħ`
/// - right: `d⟨O⟩/dt = −⟨([O, H]) i⟩/ħ`
///
/// `O` is time independent. Vector-valued descriptors are checked per
/// component.
pub fn check_expectation_dynamics(
    traj: &Trajectory64,
    cfg: &CheckConfig,
    op: &OperatorDescriptor,
) -> Result<ResidualReport> {
    let phys = traj.physics();
    let f = phys.formulation();
    let hbar = phys.hbar;
    let centres = window(traj, "expectation dynamics")?;
    let h = Operator::Hamiltonian(Arc::clone(phys));
    let i = Quaternion::<f64>::i();
    let li = || lconst(i);

    let mut pairs = Vec::new();
    for o in compiled_components(op, traj)? {
        let (observed, generator) = match f {
            Formulation::Complex => (o.clone(), after(lconst(i.scale(-1.0 / hbar)), commutator(o.clone(), h.clone()))),
            Formulation::Left => {
                let paired = o.clone().minus(Operator::compose([li(), o.clone(), li()]));
                let gen = Operator::Sum(vec![(1.0, after(li(), o.clone())), (1.0, after(o.clone(), li()))]);
                (paired, commutator(gen, h.clone()).scaled(-1.0 / hbar))
            }
            Formulation::Right => {
                (o.clone(), after(Operator::RightConst(i), commutator(o.clone(), h.clone())).scaled(-1.0 / hbar))
            }
        };
        pairs.push((observed, generator));
    }
    let hermitian = phys.potential.values().iter().all(|u| u.x == 0.0 && u.y == 0.0 && u.z == 0.0);

    let mut samples = Vec::new();
    let mut direct = Vec::new();
    let (mut lhs_t, mut rhs_t) = (Vec::new(), Vec::new());
    let mut magnitude = 0.0f64;
    for &k in &centres {
        let psi = state(traj, k);
        let psi_t = time_derivative(psi, phys)?;
        let energy = expect(psi, &h)?.abs();
        let mut r = Vec::new();
        let mut r_direct = Vec::new();
        let (mut lhs_n, mut rhs_n) = (0.0f64, 0.0f64);
        for (observed, generator) in &pairs {
            let lhs = rate(traj, k, observed)?;
            let rhs = expect(psi, generator)?;
            // d/dt {ψ, Oψ} evaluated with the wave equation's ψ̇.
            let exact = bracket(&psi_t, &observed.apply(psi)?)?.integrate() + bracket(psi, &observed.apply(&psi_t)?)?.integrate();
            r.push(lhs - rhs);
            r_direct.push(lhs - exact);
            lhs_n = lhs_n.max(lhs.abs());
            rhs_n = rhs_n.max(rhs.abs());
            magnitude = magnitude.max(expect(psi, observed)?.abs() * energy / hbar);
        }
        samples.push(Sample::from_components(traj.time(k), &r));
        direct.push(max_abs(r_direct));
        magnitude = magnitude.max(lhs_n).max(rhs_n);
        lhs_t.push(lhs_n);
        rhs_t.push(rhs_n);
    }

    let tol = cfg.tolerance(&cfg.tolerances.expectation_dynamics, phys, traj.dt(), magnitude);
    let mut report = ResidualReport::new("expectation_dynamics", f, samples, tol)?
        .alternate("direct ⟨ψ̇, Oψ⟩ + ⟨ψ, Oψ̇⟩", &direct);
    if !hermitian {
        report = report.note("the commutator form assumes a hermitian Hamiltonian; the potential is not real");
    }
    if f == Formulation::Left {
        report = report.note("observed quantity is O − iOi with i acting from the left");
    }
    Ok(report.term("d_expectation_dt", lhs_t).term("commutator", rhs_t))
}
