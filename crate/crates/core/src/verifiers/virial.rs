use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{after, expect, lconst, lmul, rate, scalar_op, state, sum, vector_op, window, CheckConfig, ResidualReport, Sample};
use crate::error::{Error, Result};
use crate::field_grid::QField;
use crate::hypercomplex::Quaternion;
use crate::operators::{
    Coefficient, Formulation, Operator, OperatorDescriptor, Physics, PotentialPart, Side, VectorProfile, VirialKind,
    LEVI_CIVITA,
};
use crate::{Operator64, QField64, Trajectory64};

/// Which Virial relation to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VirialVariant {
    /// `d⟨r·p⟩/dt = ⟨p²⟩/m − ⟨r·∇U⟩`.
    ComplexRp,
    /// `d⟨z·p⟩/dt = d⟨r·p⟩/dt + ⟨s·∇ Im U⟩ + ⟨σ·p⟩`.
    ComplexZp,
    /// `d⟨z·Π⟩/dt = ⟨Π²⟩/m − ⟨z·∇U⟩ + (q/mc)⟨ℬ·ℒ⟩ + (q/2mc)⟨ℓ·ℬ⟩ + ⟨𝒮⟩`.
    #[serde(rename = "complex_zpi", alias = "complex_zPi")]
    ComplexZPi,
    /// The left relation with the `𝒬₁`, `𝒬₂` corrections.
    Left,
    /// `d⟨q·p_R⟩/dt` against `d⟨z·p_R⟩/dt` and its quaternionic corrections.
    Right,
}

impl VirialVariant {
    pub const ALL: [VirialVariant; 5] =
        [VirialVariant::ComplexRp, VirialVariant::ComplexZp, VirialVariant::ComplexZPi, VirialVariant::Left, VirialVariant::Right];

    pub fn name(self) -> &'static str {
        match self {
            VirialVariant::ComplexRp => "complex_rp",
            VirialVariant::ComplexZp => "complex_zp",
            VirialVariant::ComplexZPi => "complex_zpi",
            VirialVariant::Left => "left",
            VirialVariant::Right => "right",
        }
    }
}

enum Value {
    Expect(Operator64),
    Rate(Operator64),
}

struct Piece {
    name: &'static str,
    weight: f64,
    value: Value,
}

fn piece(name: &'static str, weight: f64, op: Operator64) -> Piece {
    Piece { name, weight, value: Value::Expect(op) }
}

fn dot(a: &[Operator64; 3], b: &[Operator64; 3]) -> Operator64 {
    sum((0..3).map(|k| (1.0, after(a[k].clone(), b[k].clone()))).collect())
}

fn cross(a: &[Operator64; 3], b: &[Operator64; 3]) -> [Operator64; 3] {
    [0, 1, 2].map(|k| {
        sum(LEVI_CIVITA.iter().filter(|e| e.0 == k).map(|&(_, x, y, s)| (s, after(a[x].clone(), b[y].clone()))).collect())
    })
}

fn coefficient(c: Coefficient, phys: &Physics<f64>) -> Result<QField64> {
    c.sample(phys)
}

/// `∇×` of the complex part of the vector potential, from the analytic profiles.
fn complex_curl(phys: &Physics<f64>) -> Result<[Operator64; 3]> {
    let vp = &phys.spec.vector_potential;
    let comp = |k: usize| {
        let c = |p: &VectorProfile, x: [f64; 3]| {
            let jac = p.jacobian(x);
            LEVI_CIVITA.iter().filter(|e| e.0 == k).map(|&(_, a, b, s)| s * jac[b][a]).sum::<f64>()
        };
        QField::sample(phys.grid(), |x| Quaternion::new(c(&vp.a1_re, x), c(&vp.a1_im, x), 0.0, 0.0)).map(lmul)
    };
    Ok([comp(0)?, comp(1)?, comp(2)?])
}

/// `Σ_a z_a ∂_a V` for a gradient given per axis.
fn z_dot_gradient(z: &[Operator64; 3], grad: impl Fn(usize) -> Result<QField64>) -> Result<Operator64> {
    let mut terms = Vec::new();
    for a in 0..3 {
        terms.push((1.0, after(z[a].clone(), lmul(grad(a)?))));
    }
    Ok(sum(terms))
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond { Ok(()) } else { Err(Error::Unsupported(what.into())) }
}

/// The angular-momentum and `𝒮` pieces shared by the complex and left relations.
fn magnetic_pieces(
    phys: &Arc<Physics<f64>>,
    z: &[Operator64; 3],
    p: &[Operator64; 3],
    pi: &[Operator64; 3],
) -> Result<Vec<Piece>> {
    let qc = phys.q_over_c;
    let mass = phys.mass;
    let b = complex_curl(phys)?;
    let big_l = cross(z, pi);
    let small_l = cross(z, p);
    let s = scalar_op(&OperatorDescriptor::VirialAux { which: VirialKind::S, axis: None }, phys)?;
    Ok(vec![
        piece("b_dot_big_l", qc / mass, dot(&b, &big_l)),
        piece("small_l_dot_b", qc / (2.0 * mass), dot(&small_l, &b)),
        piece("s_correction", 1.0, s),
    ])
}

struct Assembly {
    lhs: Operator64,
    rhs: Vec<Piece>,
    alternates: Vec<(&'static str, Vec<Piece>)>,
    notes: Vec<&'static str>,
}

fn assemble(variant: VirialVariant, phys: &Arc<Physics<f64>>) -> Result<Assembly> {
    let f = phys.formulation();
    let dim = phys.grid().dim();
    let hbar = phys.hbar;
    let mass = phys.mass;
    let qc = phys.q_over_c;
    let vp = phys.has_vector_potential();
    let i = Quaternion::<f64>::i();
    let side = f.side();
    let p = vector_op(&OperatorDescriptor::MomentumP { axis: None, side }, phys)?;
    let r = vector_op(&OperatorDescriptor::PositionR { axis: None }, phys)?;
    let z = vector_op(&OperatorDescriptor::PositionZ { axis: None }, phys)?;
    let grad = |part: PotentialPart| move |a: usize| coefficient(Coefficient::PotentialGradient { axis: a, part }, phys);
    let real_u = phys.potential.values().iter().all(|u| u.x == 0.0 && u.y == 0.0 && u.z == 0.0);

    let complex_side = matches!(f, Formulation::Complex | Formulation::Left);
    match variant {
        VirialVariant::ComplexRp => {
            require(complex_side, "complex_rp needs complex or left dynamics")?;
            require(!vp, "complex_rp needs a zero vector potential; use complex_zpi")?;
            let mut notes = vec![];
            if !real_u {
                notes.push("derived for a real potential");
            }
            Ok(Assembly {
                lhs: dot(&r, &p),
                rhs: vec![piece("p2_over_m", 1.0 / mass, dot(&p, &p)), piece("r_grad_u", -1.0, z_dot_gradient(&r, grad(PotentialPart::Full))?)],
                alternates: vec![],
                notes,
            })
        }
        VirialVariant::ComplexZp => {
            require(complex_side, "complex_zp needs complex or left dynamics")?;
            require(!vp, "complex_zp needs a zero vector potential; use complex_zpi")?;
            let s_grad_im = {
                let mut terms = Vec::new();
                for a in 0..3 {
                    let s = coefficient(Coefficient::S { axis: a }, phys)?;
                    let g = grad(PotentialPart::Full)(a)?.map(|v| Quaternion::from_real(v.x));
                    terms.push((1.0, lmul(g.left_mul(&s)?)));
                }
                sum(terms)
            };
            let sigma = |kind| vector_op(&OperatorDescriptor::VirialAux { which: kind, axis: None }, phys);
            let base = |sigma_op: [Operator64; 3]| {
                vec![
                    Piece { name: "d_rp_dt", weight: 1.0, value: Value::Rate(dot(&r, &p)) },
                    piece("s_grad_im_u", 1.0, s_grad_im.clone()),
                    piece("sigma_dot_p", 1.0, dot(&sigma_op, &p)),
                ]
            };
            let mut notes = vec!["d⟨r·p⟩/dt evaluated numerically"];
            if !real_u {
                notes.push("derived for a real potential; an imaginary part adds a term in s·∇ρ");
            }
            Ok(Assembly {
                lhs: dot(&z, &p),
                rhs: base(sigma(VirialKind::Sigma)?),
                alternates: vec![("σ without the leading i", base(sigma(VirialKind::SigmaReal)?))],
                notes,
            })
        }
        VirialVariant::ComplexZPi => {
            require(complex_side, "complex_zpi needs complex or left dynamics")?;
            require(!vp || dim == 3, "complex_zpi with a vector potential needs a 3D grid")?;
            let pi = vector_op(&OperatorDescriptor::MomentumPi { axis: None, side, part: PotentialPart::Full }, phys)?;
            let mut rhs = vec![
                piece("pi2_over_m", 1.0 / mass, dot(&pi, &pi)),
                piece("z_grad_u", -1.0, z_dot_gradient(&z, grad(PotentialPart::Full))?),
            ];
            rhs.extend(magnetic_pieces(phys, &z, &p, &pi)?);
            Ok(Assembly { lhs: dot(&z, &pi), rhs, alternates: vec![], notes: vec![] })
        }
        VirialVariant::Left => {
            require(f == Formulation::Left, "the left Virial relation needs left dynamics")?;
            require(!vp || dim == 3, "the left Virial relation with a vector potential needs a 3D grid")?;
            let pi = vector_op(
                &OperatorDescriptor::MomentumPi { axis: None, side: Side::Left, part: PotentialPart::Complex },
                phys,
            )?;
            let vpspec = &phys.spec.vector_potential;
            let grad_q1 = |a: usize| -> Result<QField64> {
                let mut g = grad(PotentialPart::Complex)(a)?;
                let shift = QField::sample(phys.grid(), |x| {
                    let (re, im) = (vpspec.a2_re.value(x), vpspec.a2_im.value(x));
                    let (jre, jim) = (vpspec.a2_re.jacobian(x), vpspec.a2_im.jacobian(x));
                    Quaternion::from_real((0..3).map(|c| 2.0 * (re[c] * jre[c][a] + im[c] * jim[c][a])).sum())
                })?;
                g.axpy(-qc * qc, &shift)?;
                Ok(g)
            };
            let q2 = scalar_op(&OperatorDescriptor::VirialAux { which: VirialKind::Q2, axis: None }, phys)?;
            // ij(z − z†)·p = k Σ 2 s_ℓ i p_ℓ.
            let s_i_p = {
                let mut terms = Vec::new();
                for l in 0..3 {
                    let s = coefficient(Coefficient::S { axis: l }, phys)?.map(|v| v * i.scale(2.0));
                    terms.push((1.0, after(lmul(s), p[l].clone())));
                }
                after(lconst(Quaternion::k()), sum(terms))
            };
            let w_a2 = {
                let mut field = QField::zeros(phys.grid());
                for a in 0..3 {
                    let w = coefficient(Coefficient::W { axis: a }, phys)?;
                    let a2 = coefficient(Coefficient::VectorPotential { axis: a, part: PotentialPart::JCoefficient, conjugate: false }, phys)?;
                    field = field.add(&a2.left_mul(&w)?)?;
                }
                lmul(field)
            };
            let kinetic = {
                let mut terms = vec![(1.0, dot(&p, &p))];
                for a in 0..3 {
                    let a1 = coefficient(Coefficient::VectorPotential { axis: a, part: PotentialPart::Complex, conjugate: false }, phys)?;
                    terms.push((-2.0, after(lmul(a1), p[a].clone())));
                }
                sum(terms)
            };
            let bracket = after(w_a2.clone(), kinetic.clone()).minus(after(kinetic, w_a2));
            let zq = vector_op(&OperatorDescriptor::PositionZ { axis: None }, phys)?;
            let mut rhs = vec![
                piece("pi2_over_m", 1.0 / mass, dot(&pi, &pi)),
                piece("z_grad_u", -1.0, z_dot_gradient(&zq, grad_q1)?),
            ];
            rhs.extend(magnetic_pieces(phys, &zq, &p, &pi)?);
            rhs.push(piece("q2_term", -1.0 / hbar, after(q2, s_i_p)));
            rhs.push(piece("w_a2_commutator", -1.0 / hbar, after(lconst(i), bracket)));
            Ok(Assembly {
                lhs: dot(&zq, &pi),
                rhs,
                alternates: vec![],
                notes: vec!["only the displayed right-hand side is checked"],
            })
        }
        VirialVariant::Right => {
            require(f == Formulation::Right, "the right Virial relation needs right dynamics")?;
            require(!vp, "the right Virial relation is checked with a zero vector potential")?;
            let q = vector_op(&OperatorDescriptor::PositionQ { axis: None }, phys)?;
            let order = phys.order();
            let u2j = phys.potential.map(|u| PotentialPart::Quaternionic.pick(u));
            let mut t1 = Vec::new();
            let mut t2_kinetic = Vec::new();
            let mut t2_potential = Vec::new();
            let j = lconst(Quaternion::j());
            for l in 0..dim {
                let s = coefficient(Coefficient::S { axis: l }, phys)?.map(|v| v * i.scale(2.0));
                t1.push((1.0, after(lmul(s.left_mul(&u2j)?), Operator::Partial(l, order))));
                let mut inner = vec![(1.0, lmul(coefficient(Coefficient::WLaplacian { component: l }, phys)?))];
                for k in 0..dim {
                    let dw = coefficient(Coefficient::WGradient { component: l, axis: k }, phys)?;
                    inner.push((2.0, after(lmul(dw), Operator::Partial(k, order))));
                }
                t2_kinetic.push((1.0, Operator::compose([sum(inner), j.clone(), Operator::Partial(l, order)])));
                let wj = coefficient(Coefficient::W { axis: l }, phys)?.map(|v| v * Quaternion::j());
                let comm = phys.potential.left_mul(&wj)?.sub(&wj.left_mul(&phys.potential)?)?;
                t2_potential.push((1.0, after(lmul(comm), Operator::Partial(l, order))));
            }
            let p_r = vector_op(&OperatorDescriptor::MomentumP { axis: None, side: Side::Right }, phys)?;
            Ok(Assembly {
                lhs: dot(&q, &p_r),
                rhs: vec![
                    Piece { name: "d_zp_dt", weight: 1.0, value: Value::Rate(dot(&z, &p_r)) },
                    piece("u2_term", -1.0, sum(t1)),
                    piece("w_kinetic_term", -hbar * hbar / (2.0 * mass), sum(t2_kinetic)),
                    piece("w_potential_term", -1.0, sum(t2_potential)),
                ],
                alternates: vec![],
                notes: vec!["d⟨z·p_R⟩/dt evaluated numerically"],
            })
        }
    }
}

/// Residual of a Virial relation on a trajectory. Time derivatives are
/// central differences; each right-hand term is recorded signed in `terms`.
pub fn check_virial(traj: &Trajectory64, cfg: &CheckConfig, variant: VirialVariant) -> Result<ResidualReport> {
    let phys = traj.physics();
    let centres = window(traj, "virial")?;
    let Assembly { lhs, rhs, alternates, notes } = assemble(variant, phys)?;

    let eval = |pieces: &[Piece], k: usize| -> Result<Vec<f64>> {
        let psi = state(traj, k);
        pieces
            .iter()
            .map(|p| {
                Ok(p.weight
                    * match &p.value {
                        Value::Expect(op) => expect(psi, op)?,
                        Value::Rate(op) => rate(traj, k, op)?,
                    })
            })
            .collect()
    };

    let mut samples = Vec::new();
    let mut lhs_series = Vec::new();
    let mut term_series = vec![Vec::new(); rhs.len()];
    let mut alt_residuals = vec![Vec::new(); alternates.len()];
    let mut magnitude = 0.0f64;
    for &k in &centres {
        let l = rate(traj, k, &lhs)?;
        let values = eval(&rhs, k)?;
        let res = l - values.iter().sum::<f64>();
        samples.push(Sample::at(traj.time(k), res.abs(), res.abs()));
        magnitude = values.iter().fold(magnitude.max(l.abs()), |m, v| m.max(v.abs()));
        for (series, v) in term_series.iter_mut().zip(&values) {
            series.push(*v);
        }
        lhs_series.push(l);
        for ((_, pieces), out) in alternates.iter().zip(alt_residuals.iter_mut()) {
            out.push(l - eval(pieces, k)?.iter().sum::<f64>());
        }
    }

    let tol = cfg.tolerance(&cfg.tolerances.virial, phys, traj.dt(), magnitude);
    let mut report = ResidualReport::new(format!("virial_{}", variant.name()), phys.formulation(), samples, tol)?;
    for n in notes {
        report = report.note(n);
    }
    for ((label, _), residuals) in alternates.iter().zip(&alt_residuals) {
        report = report.alternate(*label, residuals);
    }
    report = report.term("lhs", lhs_series);
    for (p, series) in rhs.iter().zip(term_series) {
        report = report.term(p.name, series);
    }
    Ok(report)
}
