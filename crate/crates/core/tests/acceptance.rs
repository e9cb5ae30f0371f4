//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion outside `KNOWN_FAILING` fails, or if a known
//! failure starts passing.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rhq_core::field_grid::{Grid, GridSpec, QField};
use rhq_core::operators::{
    Coefficient, Compiled, Formulation, OperatorDescriptor, Physics, PhysicsSpec, PotentialPart, ScalarProfile, Side, Term,
    VectorProfile,
};
use rhq_core::real_hilbert::{expectation, Normalization};
use rhq_core::scenario::{builtin, builtin_names, builtin_source, parse_scenario, run_scenario, ReportBundle, RunOptions};
use rhq_core::verifiers::ResidualReport;
use rhq_core::{Grid64, QField64, Quat};

/// Criteria a faithful implementation cannot meet; each must still fail.
const KNOWN_FAILING: &[usize] = &[6, 8];

struct Outcome {
    number: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn run(name: &str) -> (ReportBundle, f64) {
    let start = Instant::now();
    let bundle = run_scenario(&builtin(name).unwrap(), &RunOptions::default()).unwrap();
    (bundle, start.elapsed().as_secs_f64())
}

fn report<'a>(b: &'a ReportBundle, f: Formulation, id: &str) -> &'a ResidualReport {
    b.report(f, id).unwrap_or_else(|| panic!("{}: no {id} report for {f:?}", b.scenario.name))
}

fn term_max(r: &ResidualReport, name: &str) -> f64 {
    r.terms[name].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn brief(r: &ResidualReport) -> String {
    format!("{} {:.2e}/{:.2e}", r.identity, r.max_residual, r.tolerance)
}

fn hermitian_baseline() -> Outcome {
    let (b, secs) = run("hermitian-baseline");
    let f = Formulation::Complex;
    let s = &b.scenario;
    let setup = s.grid.points == [256] && s.grid.extent == [20.0] && s.time.dt == 1e-3 && s.time.t_final == 2.0;
    let norm = report(&b, f, "norm_drift").max_residual;
    let energy = report(&b, f, "energy_drift").max_residual;
    let continuity = report(&b, f, "continuity");
    Outcome {
        number: 1,
        title: "hermitian baseline",
        pass: setup && b.all_pass() && norm < 1e-8 && energy < 1e-8 && continuity.pass && secs < 30.0,
        detail: format!("norm drift {norm:.1e}, energy drift {energy:.1e}, {}, {secs:.1} s", brief(continuity)),
    }
}

fn gauge_invariance() -> Outcome {
    let (b, _) = run("gauge-invariance");
    let s = &b.scenario;
    let setup = s.physics.s_field == VectorProfile::Radial { alpha: 0.3 }
        && matches!(s.physics.w_field, VectorProfile::GaussianBump { .. })
        && !s.state.is_complex();
    let r = report(&b, Formulation::Left, "position_gauge");
    let snapshots = b.runs[0].steps / s.time.stride + 1;
    Outcome {
        number: 2,
        title: "position-gauge invariance",
        pass: setup && r.pass && r.max_residual < 1e-10 && r.samples.len() == snapshots,
        detail: format!("max |⟨z⟩−⟨r⟩|, |⟨q⟩−⟨r⟩| = {:.1e} over {} snapshots", r.max_residual, r.samples.len()),
    }
}

fn absorber() -> Outcome {
    let (b, _) = run("absorber");
    let f = Formulation::Complex;
    let gamma0 = 0.5;
    let hbar = b.scenario.physics.hbar;
    let decay = report(&b, f, "norm_decay");
    // Independent closed form e^{−Γ₀t/ħ}.
    let worst = decay
        .samples
        .iter()
        .zip(&decay.terms["norm"])
        .map(|(s, n)| (n / (-gamma0 * s.t.unwrap() / hbar).exp() - 1.0).abs())
        .fold(0.0f64, f64::max);
    let t_end = decay.samples.last().and_then(|s| s.t).unwrap_or(0.0);
    let position = report(&b, f, "ehrenfest_position");
    let source = term_max(position, "source");
    Outcome {
        number: 3,
        title: "absorbing potential",
        pass: worst < 1e-4 && t_end >= 2.0 - 1e-9 && position.pass && source > 10.0 * position.tolerance,
        detail: format!(
            "norm vs e^(−Γ₀t/ħ) rel. {worst:.1e} to t = {t_end}; {}; max |source| {source:.2e}",
            brief(position)
        ),
    }
}

fn commutators() -> Outcome {
    let mut pass = true;
    let mut ratios = Vec::new();
    for name in ["commutators", "commutators-quaternionic"] {
        let (b, _) = run(name);
        pass &= b.all_pass();
        for r in b.reports() {
            let ratio = r.terms["refinement_ratio"][0];
            pass &= (3.2..=4.8).contains(&ratio);
            ratios.push(format!("{} {ratio:.2}", r.formulation.name()));
        }
    }
    // Negative control: the left relation without its 2wⱼp term, on a grid
    // fine enough that discretization error sits well below the term.
    let fine = builtin_source("commutators-quaternionic")
        .unwrap()
        .replace("formulations = [\"left\", \"right\"]", "formulations = [\"left\"]")
        .replace("points = [24, 24, 24]", "points = [32, 32, 32]")
        .replace("[physics]", "[physics]\nstencil_order = 4");
    let control = |drop: bool| {
        let text = fine.replace("refine = true", &format!("drop_w_term = {drop}"));
        let b = run_scenario(&parse_scenario(&text).unwrap(), &RunOptions::default()).unwrap();
        report(&b, Formulation::Left, "commutators").clone()
    };
    let (full, dropped) = (control(false), control(true));
    let factor = dropped.max_residual / dropped.tolerance;
    pass &= full.pass && factor >= 10.0;
    Outcome {
        number: 4,
        title: "commutator suite",
        pass,
        detail: format!(
            "refinement ratios [{}]; control: full {:.1e}, dropped term {:.1e} = {factor:.0}× tolerance",
            ratios.join(", "),
            full.max_residual,
            dropped.max_residual
        ),
    }
}

fn reduction_chain() -> Outcome {
    let (b, _) = run("reduction-chain");
    let (l, r) = (&b.runs[0], &b.runs[1]);
    let hashes = l.reduction_chain.reducible && r.reduction_chain.reducible && l.reduction_chain.hash == r.reduction_chain.hash;
    let worst = b.reports().map(|r| r.max_residual).fold(0.0f64, f64::max);
    Outcome {
        number: 5,
        title: "reduction chain",
        pass: hashes && b.all_pass() && worst < 1e-12 && l.steps >= 1000 && r.steps >= 1000,
        detail: format!("left/right vs complex max pointwise {worst:.1e} over {} steps; hashes match: {hashes}", l.steps),
    }
}

fn left_right_asymmetry() -> Outcome {
    let (b, _) = run("left-vs-right");
    let mut pass = true;
    let mut parts = Vec::new();
    for f in [Formulation::Left, Formulation::Right] {
        let r = report(&b, f, "ehrenfest_momentum");
        let u = term_max(r, "potential_difference");
        pass &= r.pass && u >= 10.0 * r.tolerance;
        let alt = r.alternates.first().map(|a| format!(", alternate {:.1e}", a.max_residual)).unwrap_or_default();
        parts.push(format!("{} {}{alt}, potential term {:.0}× tol", f.name(), brief(r), u / r.tolerance));
    }
    Outcome { number: 6, title: "left/right asymmetry", pass, detail: parts.join("; ") }
}

fn lorentz() -> Outcome {
    let (b, secs) = run("lorentz-3d");
    let s = &b.scenario;
    let setup = s.grid.points == [32, 32, 32] && s.time.dt == 2e-4 && s.time.t_final == 1.0;
    let f = Formulation::Complex;
    let force = report(&b, f, "lorentz");
    let cyc = report(&b, f, "cyclotron");
    let (fit, expected) = (cyc.terms["omega_fit"][0], cyc.terms["omega_expected"][0]);
    let bz = 2.0;
    let oracle = -s.physics.charge * bz / (s.physics.mass * s.physics.light_speed);
    let rel = (fit - oracle).abs() / oracle.abs();
    Outcome {
        number: 7,
        title: "Lorentz force, 3D",
        pass: setup && force.pass && (expected - oracle).abs() < 1e-12 && rel < 0.02 && secs < 600.0,
        detail: format!("{}; ω fit {fit:.4} vs {oracle:.4} ({:.2}%), {secs:.0} s", brief(force), 100.0 * rel),
    }
}

/// Base-case term names and the names they carry in each generalized variant.
const BASE_TERMS: &[(&str, &[&str])] = &[
    ("lhs", &["d_rp_dt", "d_zp_dt"]),
    ("p2_over_m", &["pi2_over_m"]),
    ("r_grad_u", &["z_grad_u"]),
];

fn virial() -> Outcome {
    let (base, _) = run("virial-harmonic");
    let rp = report(&base, Formulation::Complex, "virial_complex_rp");
    let kinetic = rp.terms["p2_over_m"][0];
    let stationary = term_max(rp, "lhs") / kinetic;
    let balance = (kinetic + rp.terms["r_grad_u"][0]).abs() / kinetic;
    // ⟨T⟩ = ⟨V⟩ = ħω/4 for the ground state.
    let oracle = (kinetic - 0.5).abs();
    let mut pass = base.all_pass() && stationary < 1e-3 && balance < 1e-3 && oracle < 1e-3;

    // Termwise reduction: every term either matches its base-case
    // counterpart or vanishes.
    let mut worst = 0.0f64;
    for r in base.reports() {
        for (name, values) in &r.terms {
            let base_name = BASE_TERMS
                .iter()
                .find(|(b, names)| *b == name.as_str() || names.contains(&name.as_str()))
                .map(|(b, _)| *b);
            for (k, v) in values.iter().enumerate() {
                let reference = base_name.map_or(0.0, |b| rp.terms[b][k]);
                worst = worst.max((v - reference).abs() / kinetic);
            }
        }
    }
    pass &= worst < 1e-12;

    let (deformed, _) = run("virial-deformed");
    let failing: Vec<String> = deformed.reports().filter(|r| !r.pass).map(brief).collect();
    let alternates: Vec<String> = deformed
        .reports()
        .flat_map(|r| r.alternates.iter().map(move |a| format!("{} '{}' {:.1e}", r.identity, a.label, a.max_residual)))
        .collect();
    pass &= failing.is_empty();
    Outcome {
        number: 8,
        title: "Virial, harmonic ground state",
        pass,
        detail: format!(
            "|d⟨r·p⟩/dt|/(⟨p²⟩/m) {stationary:.1e}, |⟨p²⟩/m−⟨r·∇U⟩|/(⟨p²⟩/m) {balance:.1e}, termwise reduction {worst:.1e}; \
             deformed failures [{}]; alternates [{}]",
            failing.join(", "),
            alternates.join(", ")
        ),
    }
}

fn random_quat(rng: &mut StdRng) -> Quat {
    Quat::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_part(rng: &mut StdRng) -> PotentialPart {
    [PotentialPart::Full, PotentialPart::Complex, PotentialPart::Quaternionic, PotentialPart::JCoefficient][rng.gen_range(0..4)]
}

fn random_side(rng: &mut StdRng) -> Side {
    if rng.gen() {
        Side::Left
    } else {
        Side::Right
    }
}

fn leaf(rng: &mut StdRng) -> OperatorDescriptor {
    let axis = rng.gen_range(0..3);
    let side = random_side(rng);
    match rng.gen_range(0..9) {
        0 => OperatorDescriptor::Partial { axis },
        1 => OperatorDescriptor::PositionZ { axis: Some(axis) },
        2 => OperatorDescriptor::PositionQ { axis: Some(axis) },
        3 => OperatorDescriptor::MomentumP { axis: Some(axis), side },
        4 => OperatorDescriptor::MomentumPi { axis: Some(axis), side, part: random_part(rng) },
        5 => OperatorDescriptor::Hamiltonian { formulation: None },
        6 => {
            let q = random_quat(rng);
            OperatorDescriptor::ScalarMultiply { coefficient: Coefficient::Constant { value: [q.w, q.x, q.y, q.z] }, side }
        }
        7 => OperatorDescriptor::ScalarMultiply {
            coefficient: Coefficient::Potential { part: random_part(rng), conjugate: rng.gen() },
            side,
        },
        _ => OperatorDescriptor::ScalarMultiply { coefficient: Coefficient::S { axis }, side },
    }
}

fn random_descriptor(rng: &mut StdRng) -> OperatorDescriptor {
    match rng.gen_range(0..3) {
        0 => OperatorDescriptor::Composition { factors: (0..rng.gen_range(2..4)).map(|_| leaf(rng)).collect() },
        1 => OperatorDescriptor::LinearCombination {
            terms: (0..rng.gen_range(2..4))
                .map(|_| Term {
                    coefficient: rng.gen_range(-2.0..2.0),
                    operator: OperatorDescriptor::Composition { factors: vec![leaf(rng), leaf(rng)] },
                })
                .collect(),
        },
        _ => leaf(rng),
    }
}

fn random_physics(rng: &mut StdRng, grid: &Grid64) -> Arc<Physics<f64>> {
    let mut spec = PhysicsSpec {
        formulation: if rng.gen() { Formulation::Left } else { Formulation::Right },
        ..Default::default()
    };
    let bump = |rng: &mut StdRng| ScalarProfile::Gaussian {
        amplitude: rng.gen_range(-0.5..0.5),
        center: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        width: rng.gen_range(0.8..2.0),
    };
    let vector = |rng: &mut StdRng| VectorProfile::Constant { value: [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)] };
    spec.potential.u1_re = ScalarProfile::Harmonic { stiffness: vec![rng.gen_range(0.2..1.0); 3], center: vec![] };
    spec.potential.u1_im = bump(rng);
    spec.potential.u2_re = bump(rng);
    spec.potential.u2_im = bump(rng);
    spec.vector_potential.a1_re = vector(rng);
    spec.vector_potential.a1_im = vector(rng);
    spec.vector_potential.a2_re = vector(rng);
    spec.s_field = VectorProfile::Radial { alpha: rng.gen_range(-0.4..0.4) };
    spec.w_field = VectorProfile::GaussianBump {
        amplitude: [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)],
        center: vec![0.0; 3],
        width: rng.gen_range(1.0..2.0),
    };
    Arc::new(Physics::new(&spec, grid).unwrap())
}

fn random_state(rng: &mut StdRng, grid: &Grid64) -> QField64 {
    let packets: Vec<([f64; 3], [f64; 3], f64, Quat)> = (0..3)
        .map(|_| {
            let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let k = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            (c, k, rng.gen_range(0.7..1.2), random_quat(rng))
        })
        .collect();
    let psi = QField::from_fn(grid, |p| {
        packets.iter().fold(Quat::new(0.0, 0.0, 0.0, 0.0), |acc, (c, k, w, q)| {
            let r2: f64 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum();
            let th: f64 = (0..3).map(|a| k[a] * p[a]).sum();
            let env = (-r2 / (4.0 * w * w)).exp();
            acc + Quat::new(env * th.cos(), env * th.sin(), 0.0, 0.0) * *q
        })
    });
    let n: f64 = psi.values().iter().map(|v| v.norm() * v.norm()).sum::<f64>() * grid.cell_volume();
    psi.scale(1.0 / n.sqrt())
}

/// `∫ q` over the grid.
fn integrate(grid: &Grid64, values: impl Iterator<Item = Quat>) -> Quat {
    values.fold(Quat::new(0.0, 0.0, 0.0, 0.0), |a, b| a + b).scale(grid.cell_volume())
}

fn bracket_reality() -> Outcome {
    let grid: Grid64 = Grid::build(&GridSpec::cube(3, 10.0, 16)).unwrap();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let (mut worst, mut smallest_naive, mut count, mut mismatch) = (0.0f64, f64::INFINITY, 0, 0.0f64);
    while count < 50 {
        let phys = random_physics(&mut rng, &grid);
        let psi = random_state(&mut rng, &grid);
        let op = random_descriptor(&mut rng);
        let Compiled::Scalar(compiled) = op.compile(&phys).unwrap() else { unreachable!("scalar leaves only") };
        let o_psi = compiled.apply(&psi).unwrap();
        // The literal ∫ψ†Oψ: a non-real value shows O is not hermitian.
        let naive = integrate(&grid, psi.values().iter().zip(o_psi.values()).map(|(a, b)| a.conj() * *b));
        if naive.imag_abs_max() < 1e-6 {
            continue;
        }
        let sym = integrate(&grid, psi.values().iter().zip(o_psi.values()).map(|(a, b)| (*b * a.conj() + *a * b.conj()).scale(0.5)));
        let value = expectation(&psi, &op, &phys, Normalization::Required(1e-12)).unwrap()[0];
        worst = worst.max(sym.imag_abs_max());
        mismatch = mismatch.max((value - sym.w).abs());
        smallest_naive = smallest_naive.min(naive.imag_abs_max());
        count += 1;
    }
    Outcome {
        number: 9,
        title: "real-bracket reality",
        pass: worst < 1e-12 && mismatch < 1e-12,
        detail: format!(
            "{count} non-hermitian descriptors: max imaginary residue {worst:.1e} (literal ∫ψ†Oψ imaginary ≥ {smallest_naive:.1e})"
        ),
    }
}

fn main() -> ExitCode {
    let referenced: BTreeSet<&str> = [
        "hermitian-baseline",
        "gauge-invariance",
        "absorber",
        "commutators",
        "commutators-quaternionic",
        "reduction-chain",
        "left-vs-right",
        "lorentz-3d",
        "virial-harmonic",
        "virial-deformed",
    ]
    .into();
    let unreferenced: Vec<&str> = builtin_names().filter(|n| !referenced.contains(n)).collect();

    let criteria: [fn() -> Outcome; 9] = [
        hermitian_baseline,
        gauge_invariance,
        absorber,
        commutators,
        reduction_chain,
        left_right_asymmetry,
        lorentz,
        virial,
        bracket_reality,
    ];
    let mut unexpected = Vec::new();
    for criterion in criteria {
        let o = criterion();
        let known = KNOWN_FAILING.contains(&o.number);
        let status = if o.pass { "PASS" } else { "FAIL" };
        let mark = if known { " (known)" } else { "" };
        println!("criterion {}  {status}{mark}  {}: {}", o.number, o.title, o.detail);
        if o.pass == known {
            unexpected.push(o.number);
        }
    }
    if !unreferenced.is_empty() {
        println!("built-in scenarios without a criterion: {}", unreferenced.join(", "));
        return ExitCode::FAILURE;
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}; known failing: {KNOWN_FAILING:?}");
        ExitCode::FAILURE
    }
}
