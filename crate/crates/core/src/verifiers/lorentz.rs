use super::{after, expect, lconst, lmul, max_abs, rate, scalar_op, state, window, CheckConfig, ResidualReport, Sample};
use crate::error::{Error, Result};
use crate::field_grid::QField;
use crate::hypercomplex::Quaternion;
use crate::operators::{
    Coefficient, Formulation, Operator, OperatorDescriptor, Physics, PotentialPart, VectorProfile, LEVI_CIVITA,
};
use crate::{Operator64, QField64, Trajectory64};

/// Analytic curl of `re + im i + (re₂ + im₂ i) j`, restricted to the given parts.
fn curl(phys: &Physics<f64>, parts: [Option<&VectorProfile>; 4]) -> Result<[QField64; 3]> {
    let grid = phys.grid();
    let comp = |k: usize| {
        QField::sample(grid, |x| {
            let mut c = [0.0; 4];
            for (slot, profile) in c.iter_mut().zip(parts) {
                if let Some(p) = profile {
                    let jac = p.jacobian(x);
                    *slot = LEVI_CIVITA.iter().filter(|e| e.0 == k).map(|&(_, a, b, s)| s * jac[b][a]).sum();
                }
            }
            Quaternion::new(c[0], c[1], c[2], c[3])
        })
    };
    Ok([comp(0)?, comp(1)?, comp(2)?])
}

/// `(Π×B − B×Π)_k` with `B` multiplying from the left.
fn symmetric_cross(pi: &[Operator64; 3], b: &[Operator64; 3], k: usize) -> Operator64 {
    let mut terms = Vec::new();
    for &(_, a, c, s) in LEVI_CIVITA.iter().filter(|e| e.0 == k) {
        terms.push((s, after(pi[a].clone(), b[c].clone())));
        terms.push((-s, after(b[a].clone(), pi[c].clone())));
    }
    Operator::Sum(terms)
}

fn gradient_real(phys: &Physics<f64>, axis: usize) -> Result<QField64> {
    let g = Coefficient::PotentialGradient { axis, part: PotentialPart::Full }.sample(phys)?;
    Ok(g.map(|v| Quaternion::from_real(v.w)))
}

/// `∂_axis (𝒜₂·𝒜₂†)` from the analytic profiles.
fn a2_square_gradient(phys: &Physics<f64>, axis: usize) -> Result<QField64> {
    let vp = &phys.spec.vector_potential;
    QField::sample(phys.grid(), |x| {
        let (re, im) = (vp.a2_re.value(x), vp.a2_im.value(x));
        let (jre, jim) = (vp.a2_re.jacobian(x), vp.a2_im.jacobian(x));
        let v = (0..3).map(|c| 2.0 * (re[c] * jre[c][axis] + im[c] * jim[c][axis])).sum();
        Quaternion::from_real(v)
    })
}

/// Quantum Lorentz force in the formulation's form, per axis:
///
/// - complex: `d⟨Π⟩/dt = (q/2mc)⟨Π×ℬ − ℬ×Π⟩ − ⟨∇U⟩`, `ℬ = ∇×𝒜`
/// - left: `d⟨Π_L⟩/dt = (q/2mc)⟨Π_L×ℬ − ℬ×Π_L⟩ − ⟨∇(𝒰 − (q/c)² 𝒜₂·𝒜₂†)⟩`,
///   `Π_L = p_L − (q/c)𝒜₁`, `ℬ = ∇×𝒜₁`
/// - right: `d⟨𝒫_R⟩/dt = (q/2mc)⟨𝒫_R×𝐁 − 𝐁×𝒫_R⟩ − ⟨∇𝒰⟩`,
///   `𝐁ψ = (∇×𝐀)ψ − (q/ħc)(𝐀×𝐀)ψ i`
pub fn check_lorentz(traj: &Trajectory64, cfg: &CheckConfig) -> Result<ResidualReport> {
    let phys = traj.physics();
    if phys.grid().dim() != 3 {
        return Err(Error::Unsupported(format!("the Lorentz check needs a 3D grid, got dim {}", phys.grid().dim())));
    }
    let f = phys.formulation();
    let vp = &phys.spec.vector_potential;
    let (hbar, mass, qc) = (phys.hbar, phys.mass, phys.q_over_c);
    let i = Quaternion::<f64>::i();
    let centres = window(traj, "lorentz")?;

    let part = if f == Formulation::Left { PotentialPart::Complex } else { PotentialPart::Full };
    let pi: [Operator64; 3] = [0, 1, 2].map(|a| {
        scalar_op(&OperatorDescriptor::MomentumPi { axis: Some(a), side: f.side(), part }, phys).expect("valid axis")
    });
    let b: [Operator64; 3] = match f {
        Formulation::Complex | Formulation::Left => {
            curl(phys, [Some(&vp.a1_re), Some(&vp.a1_im), None, None])?.map(lmul)
        }
        Formulation::Right => {
            let c = curl(phys, [Some(&vp.a1_re), Some(&vp.a1_im), Some(&vp.a2_re), Some(&vp.a2_im)])?;
            let a = &phys.vector_potential;
            let mut out = Vec::new();
            for (k, ck) in c.into_iter().enumerate() {
                let mut axa = QField::zeros(phys.grid());
                for &(_, x, y, s) in LEVI_CIVITA.iter().filter(|e| e.0 == k) {
                    axa.axpy(s, &a.comps[y].left_mul(&a.comps[x])?)?;
                }
                let sandwich = after(lmul(axa), Operator::RightConst(i));
                out.push(Operator::Sum(vec![(1.0, lmul(ck)), (-qc / hbar, sandwich)]));
            }
            out.try_into().expect("three components")
        }
    };
    let mut force = Vec::new();
    for a in 0..3 {
        let mut g = gradient_real(phys, a)?;
        if f == Formulation::Left {
            g.axpy(-qc * qc, &a2_square_gradient(phys, a)?)?;
        }
        force.push(lmul(g));
    }
    let crosses: Vec<Operator64> = (0..3).map(|k| symmetric_cross(&pi, &b, k)).collect();

    // Cross product with Π₀ = p − (q/c) Re 𝒜 in place of Π.
    let pi0: Option<Vec<Operator64>> = (f == Formulation::Complex).then(|| {
        let p0: [Operator64; 3] = [0, 1, 2].map(|a| {
            let p = scalar_op(&OperatorDescriptor::MomentumP { axis: Some(a), side: f.side() }, phys).expect("valid axis");
            let re = phys.vector_potential.comps[a].map(|v| Quaternion::from_real(v.w));
            Operator::Sum(vec![(1.0, p), (-qc, lmul(re))])
        });
        (0..3).map(|k| symmetric_cross(&p0, &b, k)).collect()
    });

    let prefactor = qc / (2.0 * mass);
    let mut samples = Vec::new();
    let (mut literal, mut with_pi0) = (Vec::new(), Vec::new());
    let (mut lhs_t, mut mag_t, mut force_t) = (Vec::new(), Vec::new(), Vec::new());
    let mut magnitude = 0.0f64;
    for &k in &centres {
        let psi = state(traj, k);
        let (mut r, mut r_lit, mut r_pi0) = ([0.0; 3], [0.0; 3], [0.0; 3]);
        let (mut lhs_n, mut mag_n, mut force_n) = (0.0f64, 0.0f64, 0.0f64);
        for a in 0..3 {
            let lhs = rate(traj, k, &pi[a])?;
            let cross = expect(psi, &crosses[a])?;
            let grad = expect(psi, &force[a])?;
            r[a] = lhs - prefactor * cross + grad;
            let lit = match f {
                Formulation::Complex | Formulation::Left => {
                    expect(psi, &after(lconst(i.scale(-1.0 / (2.0 * mass * hbar))), crosses[a].clone()))?
                }
                Formulation::Right => cross / (2.0 * mass * hbar),
            };
            r_lit[a] = lhs - lit + grad;
            if let Some(p0) = &pi0 {
                r_pi0[a] = lhs - prefactor * expect(psi, &p0[a])? + grad;
            }
            lhs_n = lhs_n.max(lhs.abs());
            mag_n = mag_n.max((prefactor * cross).abs());
            force_n = force_n.max(grad.abs());
        }
        samples.push(Sample::from_components(traj.time(k), &r));
        literal.push(max_abs(r_lit));
        with_pi0.push(max_abs(r_pi0));
        magnitude = magnitude.max(lhs_n).max(mag_n).max(force_n);
        lhs_t.push(lhs_n);
        mag_t.push(mag_n);
        force_t.push(force_n);
    }

    let tol = cfg.tolerance(&cfg.tolerances.lorentz, phys, traj.dt(), magnitude);
    let literal_label = match f {
        Formulation::Right => "prefactor 1/(2mħ)",
        _ => "prefactor 1/(2miħ)",
    };
    let mut report = ResidualReport::new("lorentz", f, samples, tol)?
        .note("magnetic term prefactor q/(2mc)")
        .alternate(literal_label, &literal);
    if pi0.is_some() {
        report = report
            .note("the potential-difference term is absent: holds for a real scalar potential")
            .alternate("Π₀ = p − (q/c) Re 𝒜 in the cross product", &with_pi0);
    }
    Ok(report.term("d_momentum_dt", lhs_t).term("magnetic", mag_t).term("force", force_t))
}

/// Least-squares rotation rate of a 2D vector series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclotronFit {
    /// Signed angular velocity, positive for counter-clockwise rotation.
    pub omega: f64,
    pub phase: f64,
    /// RMS deviation of the unwrapped angle from the fitted line.
    pub rms: f64,
}

/// Fits the unwrapped polar angle of `(x, y)` linearly in `t`.
pub fn cyclotron_frequency(t: &[f64], x: &[f64], y: &[f64]) -> Result<CyclotronFit> {
    if t.len() != x.len() || t.len() != y.len() {
        return Err(Error::Config("time and component series differ in length".into()));
    }
    if t.len() < 3 {
        return Err(Error::MissingData("a rotation fit needs at least 3 samples".into()));
    }
    if x.iter().zip(y).any(|(a, b)| a.hypot(*b) == 0.0) {
        return Err(Error::MissingData("the rotating vector vanishes; its angle is undefined".into()));
    }
    let mut angle = Vec::with_capacity(t.len());
    let mut prev = y[0].atan2(x[0]);
    let mut offset = 0.0;
    for (a, b) in x.iter().zip(y) {
        let raw = b.atan2(*a);
        let step = raw - prev;
        if step > std::f64::consts::PI {
            offset -= 2.0 * std::f64::consts::PI;
        } else if step < -std::f64::consts::PI {
            offset += 2.0 * std::f64::consts::PI;
        }
        prev = raw;
        angle.push(raw + offset);
    }
    let n = t.len() as f64;
    let (mt, ma) = (t.iter().sum::<f64>() / n, angle.iter().sum::<f64>() / n);
    let (mut stt, mut sta) = (0.0, 0.0);
    for (ti, ai) in t.iter().zip(&angle) {
        stt += (ti - mt) * (ti - mt);
        sta += (ti - mt) * (ai - ma);
    }
    if stt == 0.0 {
        return Err(Error::MissingData("all samples share one time".into()));
    }
    let omega = sta / stt;
    let phase = ma - omega * mt;
    let rms = (t.iter().zip(&angle).map(|(ti, ai)| (ai - phase - omega * ti).powi(2)).sum::<f64>() / n).sqrt();
    Ok(CyclotronFit { omega, phase, rms })
}
