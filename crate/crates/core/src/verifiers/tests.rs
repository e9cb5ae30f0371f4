use super::*;
use crate::dynamics::{evolve, EvolveOptions};
use crate::field_grid::{Grid, GridSpec, QField, StencilOrder};
use crate::operators::{Coefficient, Formulation, PhysicsSpec, ScalarProfile, Side, VectorProfile};
use crate::real_hilbert::norm;
use crate::{Grid64, Quat};

fn grid_1d(n: usize, l: f64) -> Grid64 {
    Grid::build(&GridSpec::new_1d(l, n)).unwrap()
}

fn grid_3d(n: usize, l: f64) -> Grid64 {
    Grid::build(&GridSpec::cube(3, l, n)).unwrap()
}

fn physics(spec: &PhysicsSpec, grid: &Grid64) -> Arc<Physics<f64>> {
    Arc::new(Physics::new(spec, grid).unwrap())
}

/// Normalized Gaussian `exp(−|x−x₀|²/4σ² + i k·x)`, times `tail` on the right.
fn packet(grid: &Grid64, x0: [f64; 3], width: f64, k: [f64; 3], tail: Quat) -> QField64 {
    let f = QField::from_fn(grid, |p| {
        let (mut r2, mut phase) = (0.0, 0.0);
        for a in 0..grid.dim() {
            r2 += (p[a] - x0[a]).powi(2);
            phase += k[a] * p[a];
        }
        let env = (-r2 / (4.0 * width * width)).exp();
        Quat::new(env * phase.cos(), env * phase.sin(), 0.0, 0.0) * tail
    });
    f.scale(1.0 / norm(&f).sqrt())
}

fn quaternionic_packet(grid: &Grid64) -> QField64 {
    let a = packet(grid, [-0.5, 0.0, 0.0], 0.8, [0.7, 0.0, 0.0], Quat::from_real(1.0));
    let b = packet(grid, [0.6, 0.0, 0.0], 0.9, [-0.4, 0.0, 0.0], Quat::new(0.0, 0.0, 0.8, 0.3));
    let f = a.add(&b).unwrap();
    f.scale(1.0 / norm(&f).sqrt())
}

fn run(psi: &QField64, phys: &Arc<Physics<f64>>, t: f64, dt: f64, stride: usize) -> Trajectory64 {
    let mut opts = EvolveOptions::new(t, dt);
    opts.snapshot_stride = stride;
    opts.keep_neighbours = true;
    evolve(psi, phys, &opts).unwrap()
}

fn fourth() -> PhysicsSpec {
    PhysicsSpec { stencil_order: StencilOrder::Fourth, ..Default::default() }
}

fn cfg() -> CheckConfig {
    CheckConfig::default()
}

fn harmonic(k: f64) -> ScalarProfile {
    ScalarProfile::Harmonic { stiffness: vec![k], center: vec![] }
}

fn harmonic_3d(k: f64) -> ScalarProfile {
    ScalarProfile::Harmonic { stiffness: vec![k; 3], center: vec![] }
}

fn term_max(r: &ResidualReport, name: &str) -> f64 {
    max_abs(r.terms[name].iter().copied())
}

#[test]
fn continuity_hermitian_converges_at_second_order() {
    let mut spec = PhysicsSpec::default();
    spec.potential.u1_re = harmonic(1.0);
    let residual = |n: usize| {
        let grid = grid_1d(n, 16.0);
        let phys = physics(&spec, &grid);
        let psi = packet(&grid, [1.0, 0.0, 0.0], 0.8, [0.5, 0.0, 0.0], Quat::from_real(1.0));
        let r = check_continuity(&run(&psi, &phys, 0.2, 4e-4, 100), &cfg()).unwrap();
        assert!(r.pass, "{}", r.to_table());
        r.max_residual
    };
    let (coarse, fine) = (residual(128), residual(256));
    let ratio = coarse / fine;
    assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
}

#[test]
fn continuity_with_absorber_has_active_source() {
    let grid = grid_1d(256, 20.0);
    let mut spec = PhysicsSpec::default();
    spec.potential.u1_im = ScalarProfile::Gaussian { amplitude: -0.4, center: vec![2.0], width: 1.5 };
    let phys = physics(&spec, &grid);
    let psi = packet(&grid, [0.0, 0.0, 0.0], 1.0, [1.0, 0.0, 0.0], Quat::from_real(1.0));
    let r = check_continuity(&run(&psi, &phys, 0.5, 1e-3, 100), &cfg()).unwrap();
    assert!(r.pass, "{}", r.to_table());
    assert!(term_max(&r, "g") > 100.0 * r.max_residual);
}

#[test]
fn continuity_left_quaternionic_potential() {
    let grid = grid_1d(256, 16.0);
    let mut spec = PhysicsSpec { formulation: Formulation::Left, ..Default::default() };
    spec.potential.u1_re = harmonic(0.5);
    spec.potential.u1_im = ScalarProfile::Constant { value: -0.1 };
    spec.potential.u2_re = ScalarProfile::Gaussian { amplitude: 0.6, center: vec![0.5], width: 1.0 };
    spec.potential.u2_im = ScalarProfile::Linear { gradient: vec![0.2], offset: 0.1 };
    let phys = physics(&spec, &grid);
    let r = check_continuity(&run(&quaternionic_packet(&grid), &phys, 0.4, 1e-3, 100), &cfg()).unwrap();
    assert!(r.pass, "{}", r.to_table());
    assert!(term_max(&r, "g") > 10.0 * r.tolerance);
}

#[test]
fn continuity_right_vector_potential_needs_coupling_factor() {
    let grid = grid_1d(256, 16.0);
    let mut spec = PhysicsSpec { formulation: Formulation::Right, charge: 0.7, ..Default::default() };
    spec.potential.u1_re = harmonic(0.5);
    spec.vector_potential.a1_re = VectorProfile::Constant { value: [0.3, 0.0, 0.0] };
    spec.vector_potential.a2_re = VectorProfile::GaussianBump { amplitude: [0.4, 0.0, 0.0], center: vec![0.3], width: 1.2 };
    spec.vector_potential.a2_im = VectorProfile::Constant { value: [0.2, 0.0, 0.0] };
    let phys = physics(&spec, &grid);
    let r = check_continuity(&run(&quaternionic_packet(&grid), &phys, 0.4, 1e-3, 100), &cfg()).unwrap();
    assert!(r.pass, "{}", r.to_table());
    assert!(term_max(&r, "gamma") > 10.0 * r.tolerance);
    assert!(!r.alternates[0].within_tolerance);
}

#[test]
fn missing_neighbours_is_reported() {
    let grid = grid_1d(64, 10.0);
    let phys = physics(&PhysicsSpec::default(), &grid);
    let psi = packet(&grid, [0.0; 3], 1.0, [0.0; 3], Quat::from_real(1.0));
    let mut opts = EvolveOptions::new(0.05, 1e-3);
    opts.snapshot_stride = 10;
    let traj = evolve(&psi, &phys, &opts).unwrap();
    assert!(matches!(check_continuity(&traj, &cfg()), Err(Error::MissingData(_))));
    assert!(matches!(check_ehrenfest_position(&traj, &cfg()), Err(Error::MissingData(_))));
}

#[test]
fn free_packet_position_and_s_independence() {
    let grid = grid_1d(1024, 24.0);
    let psi = packet(&grid, [-2.0, 0.0, 0.0], 1.2, [1.5, 0.0, 0.0], Quat::from_real(1.0));
    let plain = fourth();
    let deformed = PhysicsSpec { s_field: VectorProfile::Linear { matrix: [[0.3, 0.0, 0.0], [0.0; 3], [0.0; 3]] }, ..plain.clone() };
    let a = check_ehrenfest_position(&run(&psi, &physics(&plain, &grid), 0.2, 5e-5, 500), &cfg()).unwrap();
    let b = check_ehrenfest_position(&run(&psi, &physics(&deformed, &grid), 0.2, 5e-5, 500), &cfg()).unwrap();
    assert!(a.pass && a.max_residual < 1e-6, "{}", a.to_table());
    assert_eq!(a.residuals(), b.residuals());
    for v in &a.terms["momentum_over_m"] {
        assert!((v - 1.5).abs() < 1e-3);
    }
}

#[test]
fn absorber_position_source_balances() {
    let grid = grid_1d(512, 20.0);
    let mut spec = fourth();
    spec.potential.u1_im = ScalarProfile::Gaussian { amplitude: -0.5, center: vec![1.5], width: 1.0 };
    let phys = physics(&spec, &grid);
    let psi = packet(&grid, [0.0; 3], 1.0, [1.0, 0.0, 0.0], Quat::from_real(1.0));
    let r = check_ehrenfest_position(&run(&psi, &phys, 0.5, 1e-4, 1000), &cfg()).unwrap();
    assert!(r.pass, "{}", r.to_table());
    assert!(term_max(&r, "source") > 100.0 * r.max_residual, "{}", r.to_table());
}

#[test]
fn harmonic_coherent_momentum() {
    let grid = grid_1d(512, 16.0);
    let omega = 1.3;
    let mut spec = fourth();
    spec.potential.u1_re = harmonic(omega * omega);
    let phys = physics(&spec, &grid);
    let width = (1.0 / (2.0 * omega)).sqrt();
    let psi = packet(&grid, [1.0, 0.0, 0.0], width, [0.0; 3], Quat::from_real(1.0));
    let traj = run(&psi, &phys, 0.6, 1e-4, 1000);
    let r = check_ehrenfest_momentum(&traj, &cfg()).unwrap();
    assert!(r.pass && r.max_residual < 1e-5, "{}", r.to_table());
    let x = scalar_op(&OperatorDescriptor::PositionR { axis: Some(0) }, &phys).unwrap();
    for (n, &k) in traj.triple_centres().iter().enumerate() {
        let xk = expect(state(&traj, k), &x).unwrap();
        assert!((r.terms["force"][n] - omega * omega * xk.abs()).abs() < 1e-3);
    }
}

#[test]
fn free_momentum_is_constant() {
    let grid = grid_1d(128, 16.0);
    let phys = physics(&PhysicsSpec::default(), &grid);
    let psi = packet(&grid, [0.0; 3], 1.0, [0.8, 0.0, 0.0], Quat::from_real(1.0));
    let r = check_ehrenfest_momentum(&run(&psi, &phys, 0.2, 1e-3, 50), &cfg()).unwrap();
    assert!(r.pass && r.max_residual < 1e-10, "{}", r.to_table());
}

#[test]
fn potential_difference_term_left_and_right() {
    let grid = grid_1d(256, 16.0);
    let mut spec = PhysicsSpec::default();
    spec.potential.u1_re = harmonic(0.6);
    spec.potential.u1_im = ScalarProfile::Gaussian { amplitude: -0.5, center: vec![0.4], width: 1.0 };
    let psi = quaternionic_packet(&grid);
    let left = physics(&PhysicsSpec { formulation: Formulation::Left, ..spec.clone() }, &grid);
    let right = physics(&PhysicsSpec { formulation: Formulation::Right, ..spec }, &grid);
    let l = check_ehrenfest_momentum(&run(&psi, &left, 0.3, 1e-3, 100), &cfg()).unwrap();
    let r = check_ehrenfest_momentum(&run(&psi, &right, 0.3, 1e-3, 100), &cfg()).unwrap();
    assert!(l.pass, "{}", l.to_table());
    assert!(term_max(&l, "potential_difference") > 10.0 * l.tolerance);
    assert!(!l.alternates[0].within_tolerance);
    // Without the term the right relation does not close; the same term with
    // the right-hand ordering does.
    assert!(!r.pass, "{}", r.to_table());
    assert!(r.alternates[0].within_tolerance, "{}", r.to_table());
}

#[test]
fn momentum_check_rejects_vector_potential() {
    let grid = grid_1d(64, 10.0);
    let mut spec = PhysicsSpec::default();
    spec.vector_potential.a1_re = VectorProfile::Constant { value: [0.1, 0.0, 0.0] };
    let phys = physics(&spec, &grid);
    let psi = packet(&grid, [0.0; 3], 1.0, [0.0; 3], Quat::from_real(1.0));
    let traj = run(&psi, &phys, 0.01, 1e-3, 5);
    assert!(matches!(check_ehrenfest_momentum(&traj, &cfg()), Err(Error::Unsupported(_))));
}

#[test]
fn energy_is_stationary() {
    let grid = grid_1d(128, 16.0);
    let mut spec = PhysicsSpec::default();
    spec.potential.u1_re = harmonic(1.0);
    let phys = physics(&spec, &grid);
    let psi = packet(&grid, [1.0, 0.0, 0.0], 0.9, [0.4, 0.0, 0.0], Quat::from_real(1.0));
    let r = check_expectation_dynamics(&run(&psi, &phys, 0.2, 5e-4, 100), &cfg(), &OperatorDescriptor::Hamiltonian { formulation: None })
        .unwrap();
    assert!(r.pass && r.max_residual < 1e-8, "{}", r.to_table());
}

#[test]
fn position_dynamics_matches_ehrenfest() {
    let grid = grid_1d(256, 20.0);
    let mut spec = PhysicsSpec::default();
    spec.potential.u1_re = harmonic(0.8);
    let phys = physics(&spec, &grid);
    let psi = packet(&grid, [0.5, 0.0, 0.0], 1.0, [0.9, 0.0, 0.0], Quat::from_real(1.0));
    let traj = run(&psi, &phys, 0.3, 1e-3, 100);
    let d = check_expectation_dynamics(&traj, &cfg(), &OperatorDescriptor::PositionR { axis: Some(0) }).unwrap();
    let e = check_ehrenfest_position(&traj, &cfg()).unwrap();
    assert!(d.pass && e.pass);
    for (a, b) in d.terms["d_expectation_dt"].iter().zip(&e.terms["d_position_dt"]) {
        assert!((a - b).abs() < 1e-12);
    }
    // Both are discretisations of ⟨p⟩/m that differ at O(dx²).
    for (a, b) in d.terms["commutator"].iter().zip(&e.terms["momentum_over_m"]) {
        assert!((a - b).abs() < e.tolerance);
    }
}

#[test]
fn quaternionic_expectation_dynamics() {
    let grid = grid_1d(256, 16.0);
    let mut spec = PhysicsSpec::default();
    spec.potential.u1_re = harmonic(0.7);
    let j_op = OperatorDescriptor::ScalarMultiply {
        coefficient: Coefficient::constant(Quat::new(0.3, 0.0, 1.0, 0.0)),
        side: Side::Left,
    };
    let x_op = OperatorDescriptor::PositionR { axis: Some(0) };
    let psi = quaternionic_packet(&grid);
    for f in [Formulation::Left, Formulation::Right] {
        let phys = physics(&PhysicsSpec { formulation: f, ..spec.clone() }, &grid);
        let traj = run(&psi, &phys, 0.3, 1e-3, 100);
        for op in [&j_op, &x_op] {
            let r = check_expectation_dynamics(&traj, &cfg(), op).unwrap();
            assert!(r.pass, "{}", r.to_table());
            assert!(r.alternates[0].within_tolerance);
        }
    }
    // A constant 𝒰₂ j multiplying from the left is not self-adjoint, so on the
    // right the commutator form no longer closes while the direct rate does.
    spec.potential.u2_re = ScalarProfile::Constant { value: 0.2 };
    let phys = physics(&PhysicsSpec { formulation: Formulation::Right, ..spec }, &grid);
    let r = check_expectation_dynamics(&run(&psi, &phys, 0.3, 1e-3, 100), &cfg(), &j_op).unwrap();
    assert!(!r.pass, "{}", r.to_table());
    assert!(r.alternates[0].within_tolerance, "{}", r.to_table());
}

#[test]
fn cyclotron_fit_recovers_rotation() {
    let t: Vec<f64> = (0..50).map(|n| n as f64 * 0.05).collect();
    let omega = -3.1;
    let x: Vec<f64> = t.iter().map(|t| 2.0 * (omega * t + 0.4).cos()).collect();
    let y: Vec<f64> = t.iter().map(|t| 2.0 * (omega * t + 0.4).sin()).collect();
    let fit = cyclotron_frequency(&t, &x, &y).unwrap();
    assert!((fit.omega - omega).abs() < 1e-12);
    assert!(fit.rms < 1e-12);
    assert!(cyclotron_frequency(&t[..2], &x[..2], &y[..2]).is_err());
}

fn field_spec(f: Formulation, b0: f64) -> PhysicsSpec {
    let mut spec = PhysicsSpec { formulation: f, ..Default::default() };
    spec.potential.u1_re = harmonic_3d(0.3);
    spec.vector_potential.a1_re = VectorProfile::SymmetricGauge { field: [0.0, 0.0, b0] };
    spec
}

#[test]
fn lorentz_uniform_field_all_formulations() {
    let grid = grid_3d(32, 8.0);
    for f in [Formulation::Complex, Formulation::Left, Formulation::Right] {
        let phys = physics(&field_spec(f, 1.5), &grid);
        let psi = packet(&grid, [0.0; 3], 0.7, [0.8, 0.3, 0.0], Quat::from_real(1.0));
        let r = check_lorentz(&run(&psi, &phys, 0.004, 2e-4, 10), &cfg()).unwrap();
        assert!(r.pass, "{}", r.to_table());
        assert!(term_max(&r, "magnetic") > 10.0 * r.tolerance, "{}\n{:?}", r.to_table(), r.terms);
    }
}

#[test]
fn lorentz_rejects_low_dimension() {
    let grid = grid_1d(64, 10.0);
    let phys = physics(&PhysicsSpec::default(), &grid);
    let psi = packet(&grid, [0.0; 3], 1.0, [0.0; 3], Quat::from_real(1.0));
    assert!(matches!(check_lorentz(&run(&psi, &phys, 0.01, 1e-3, 5), &cfg()), Err(Error::Unsupported(_))));
}

#[test]
fn lorentz_without_field_matches_momentum_check() {
    let grid = grid_3d(16, 10.0);
    let phys = physics(&field_spec(Formulation::Complex, 0.0), &grid);
    let psi = packet(&grid, [0.5, 0.0, 0.0], 1.0, [0.5, 0.2, 0.0], Quat::from_real(1.0));
    let traj = run(&psi, &phys, 0.02, 1e-3, 10);
    let l = check_lorentz(&traj, &cfg()).unwrap();
    let m = check_ehrenfest_momentum(&traj, &cfg()).unwrap();
    assert!(l.pass && m.pass);
    for (a, b) in l.residuals().iter().zip(m.residuals()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn left_constant_a2_leaves_force_unchanged() {
    let grid = grid_3d(16, 10.0);
    let psi = packet(&grid, [0.5, 0.0, 0.0], 1.0, [0.5, 0.2, 0.0], Quat::new(1.0, 0.0, 0.3, 0.0));
    let base = field_spec(Formulation::Left, 1.0);
    let mut shifted = base.clone();
    shifted.vector_potential.a2_re = VectorProfile::Constant { value: [0.2, -0.1, 0.3] };
    let a = check_lorentz(&run(&psi, &physics(&base, &grid), 0.02, 1e-3, 10), &cfg()).unwrap();
    let b = check_lorentz(&run(&psi, &physics(&shifted, &grid), 0.02, 1e-3, 10), &cfg()).unwrap();
    assert!(a.pass && b.pass, "{}\n{}", a.to_table(), b.to_table());
    assert!((a.terms["force"][0] - b.terms["force"][0]).abs() < 1e-3 * a.terms["force"][0].abs());
}

fn ground_state_run(spec: &PhysicsSpec, grid: &Grid64) -> Trajectory64 {
    let phys = physics(spec, grid);
    let psi = packet(grid, [0.0; 3], (0.5f64).sqrt(), [0.0; 3], Quat::from_real(1.0));
    run(&psi, &phys, 0.05, 1e-4, 250)
}

#[test]
fn virial_harmonic_ground_state() {
    let grid = grid_1d(512, 16.0);
    let mut spec = fourth();
    spec.potential.u1_re = harmonic(1.0);
    let r = check_virial(&ground_state_run(&spec, &grid), &cfg(), VirialVariant::ComplexRp).unwrap();
    assert!(r.pass, "{}", r.to_table());
    let kinetic = r.terms["p2_over_m"][0];
    assert!(r.terms["lhs"][0].abs() < 1e-3 * kinetic);
    assert!((kinetic + r.terms["r_grad_u"][0]).abs() < 1e-3 * kinetic);
}

#[test]
fn virial_variants_reduce_without_deformations() {
    let grid = grid_1d(256, 16.0);
    let mut spec = PhysicsSpec::default();
    spec.potential.u1_re = harmonic(1.0);
    let psi = packet(&grid, [0.8, 0.0, 0.0], 0.8, [0.3, 0.0, 0.0], Quat::from_real(1.0));
    let complex = run(&psi, &physics(&spec, &grid), 0.1, 5e-4, 50);
    let left = run(&psi, &physics(&PhysicsSpec { formulation: Formulation::Left, ..spec.clone() }, &grid), 0.1, 5e-4, 50);
    let rp = check_virial(&complex, &cfg(), VirialVariant::ComplexRp).unwrap();
    let zp = check_virial(&complex, &cfg(), VirialVariant::ComplexZp).unwrap();
    let zpi = check_virial(&complex, &cfg(), VirialVariant::ComplexZPi).unwrap();
    let l = check_virial(&left, &cfg(), VirialVariant::Left).unwrap();
    for r in [&rp, &zp, &zpi, &l] {
        assert!(r.pass, "{}", r.to_table());
    }
    assert_eq!(rp.terms["lhs"], zp.terms["lhs"]);
    assert_eq!(rp.terms["lhs"], zpi.terms["lhs"]);
    assert_eq!(rp.terms["p2_over_m"], zpi.terms["pi2_over_m"]);
    assert_eq!(rp.terms["r_grad_u"], zpi.terms["z_grad_u"]);
    for name in ["b_dot_big_l", "small_l_dot_b", "s_correction"] {
        assert!(term_max(&zpi, name) == 0.0);
    }
    for name in ["s_grad_im_u", "sigma_dot_p"] {
        assert!(term_max(&zp, name) == 0.0);
    }
    for name in ["q2_term", "w_a2_commutator"] {
        assert!(term_max(&l, name) == 0.0);
    }
    for (a, b) in l.residuals().iter().zip(zpi.residuals()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn virial_right_reduces_to_complex() {
    let grid = grid_1d(256, 16.0);
    let mut spec = PhysicsSpec { formulation: Formulation::Right, ..Default::default() };
    spec.potential.u1_re = harmonic(1.0);
    let psi = packet(&grid, [0.8, 0.0, 0.0], 0.8, [0.3, 0.0, 0.0], Quat::from_real(1.0));
    let r = check_virial(&run(&psi, &physics(&spec, &grid), 0.1, 5e-4, 50), &cfg(), VirialVariant::Right).unwrap();
    assert!(r.pass, "{}", r.to_table());
    assert_eq!(r.terms["lhs"], r.terms["d_zp_dt"]);
}

#[test]
fn virial_right_with_quaternionic_potential_is_consistent() {
    let grid = grid_1d(256, 16.0);
    let mut spec = PhysicsSpec { formulation: Formulation::Right, ..Default::default() };
    spec.potential.u1_re = harmonic(1.0);
    spec.potential.u1_im = ScalarProfile::Gaussian { amplitude: -0.2, center: vec![0.5], width: 1.0 };
    spec.potential.u2_re = ScalarProfile::Gaussian { amplitude: 0.3, center: vec![0.2], width: 1.0 };
    spec.s_field = VectorProfile::Linear { matrix: [[0.2, 0.0, 0.0], [0.0; 3], [0.0; 3]] };
    spec.w_field = VectorProfile::GaussianBump { amplitude: [0.3, 0.0, 0.0], center: vec![-0.2], width: 1.3 };
    let r = check_virial(&run(&quaternionic_packet(&grid), &physics(&spec, &grid), 0.1, 5e-4, 50), &cfg(), VirialVariant::Right)
        .unwrap();
    for name in ["u2_term", "w_kinetic_term", "w_potential_term"] {
        assert!(term_max(&r, name) > 0.0, "{name}");
    }
    assert!(r.max_residual.is_finite());
}

#[test]
fn virial_unsupported_combinations() {
    let grid = grid_1d(64, 10.0);
    let psi = packet(&grid, [0.0; 3], 1.0, [0.0; 3], Quat::from_real(1.0));
    let traj = run(&psi, &physics(&PhysicsSpec::default(), &grid), 0.01, 1e-3, 5);
    assert!(matches!(check_virial(&traj, &cfg(), VirialVariant::Left), Err(Error::Unsupported(_))));
    assert!(matches!(check_virial(&traj, &cfg(), VirialVariant::Right), Err(Error::Unsupported(_))));
    let mut spec = PhysicsSpec::default();
    spec.vector_potential.a1_re = VectorProfile::Constant { value: [0.1, 0.0, 0.0] };
    let traj = run(&psi, &physics(&spec, &grid), 0.01, 1e-3, 5);
    assert!(matches!(check_virial(&traj, &cfg(), VirialVariant::ComplexRp), Err(Error::Unsupported(_))));
}

#[test]
fn sigma_real_alternate_is_reported() {
    let grid = grid_1d(256, 16.0);
    let mut spec = PhysicsSpec::default();
    spec.potential.u1_re = harmonic(1.0);
    spec.s_field = VectorProfile::GaussianBump { amplitude: [0.4, 0.0, 0.0], center: vec![0.3], width: 1.0 };
    let psi = packet(&grid, [0.8, 0.0, 0.0], 0.8, [0.3, 0.0, 0.0], Quat::from_real(1.0));
    let r = check_virial(&run(&psi, &physics(&spec, &grid), 0.1, 5e-4, 50), &cfg(), VirialVariant::ComplexZp).unwrap();
    assert_eq!(r.alternates.len(), 1);
    assert!(r.terms.contains_key("sigma_dot_p"));
}

fn smooth_state(grid: &Grid64, quaternionic: bool) -> QField64 {
    let tail = if quaternionic { Quat::new(0.8, 0.1, 0.5, -0.3) } else { Quat::from_real(1.0) };
    packet(grid, [0.3, -0.2, 0.1], 1.0, [0.6, -0.4, 0.3], tail)
}

fn deformed(f: Formulation) -> PhysicsSpec {
    PhysicsSpec {
        formulation: f,
        s_field: VectorProfile::Linear { matrix: [[0.3, 0.1, 0.0], [0.0, -0.2, 0.1], [0.2, 0.0, 0.1]] },
        w_field: if f == Formulation::Complex {
            VectorProfile::Zero
        } else {
            VectorProfile::GaussianBump { amplitude: [0.3, -0.2, 0.4], center: vec![0.1, 0.0, 0.0], width: 1.5 }
        },
        ..Default::default()
    }
}

#[test]
fn canonical_commutators() {
    let grid = grid_3d(24, 10.0);
    for f in [Formulation::Complex, Formulation::Left, Formulation::Right] {
        let phys = physics(&PhysicsSpec { formulation: f, ..Default::default() }, &grid);
        let r = check_commutators(&smooth_state(&grid, f != Formulation::Complex), &phys, &cfg(), CommutatorOptions::default())
            .unwrap();
        assert!(r.pass, "{}", r.to_table());
        assert_eq!(r.samples.len(), 9);
    }
}

#[test]
fn deformed_commutators_converge() {
    for f in [Formulation::Complex, Formulation::Left, Formulation::Right] {
        let residual = |n: usize| {
            let grid = grid_3d(n, 10.0);
            let phys = physics(&deformed(f), &grid);
            let r = check_commutators(&smooth_state(&grid, f != Formulation::Complex), &phys, &cfg(), CommutatorOptions::default())
                .unwrap();
            assert!(r.pass, "{}", r.to_table());
            r.max_residual
        };
        let ratio = residual(24) / residual(48);
        assert!((3.2..=4.8).contains(&ratio), "{f:?} ratio {ratio}");
    }
}

#[test]
fn dropping_w_term_breaks_the_commutator() {
    let grid = grid_3d(32, 8.0);
    for f in [Formulation::Left, Formulation::Right] {
        let phys = physics(&PhysicsSpec { stencil_order: StencilOrder::Fourth, ..deformed(f) }, &grid);
        let psi = smooth_state(&grid, true);
        let full = check_commutators(&psi, &phys, &cfg(), CommutatorOptions::default()).unwrap();
        let dropped = check_commutators(&psi, &phys, &cfg(), CommutatorOptions { drop_w_term: true }).unwrap();
        assert!(full.pass);
        assert!(!dropped.pass);
        assert!(dropped.max_residual > 10.0 * dropped.tolerance, "{}\n{}", full.to_table(), dropped.to_table());
    }
}

#[test]
fn tolerance_model_scales() {
    let m = ToleranceModel::new(2.0, 3.0);
    let t = m.tolerance(0.1, 2, 0.01, 5.0, 1.0);
    assert!((t - ((2.0 * 0.01 + 3.0 * 1e-4) * 5.0 + 1e-12)).abs() < 1e-15);
    assert!((m.tolerance(0.1, 2, 0.01, 5.0, 10.0) - 10.0 * t).abs() < 1e-14);
    let parsed: Tolerances = serde_json::from_str(r#"{"lorentz": {"c1": 1.0, "c2": 2.0}}"#).unwrap();
    assert_eq!(parsed.lorentz.floor, 1e-12);
    assert_eq!(parsed.virial, Tolerances::default().virial);
}

#[test]
fn report_validation_and_rendering() {
    let s = vec![Sample::at(0.1, 1e-3, 2e-3), Sample::labelled("(0,1)", 5e-4, 5e-4)];
    let r = ResidualReport::new("x", Formulation::Left, s.clone(), 1e-3).unwrap().alternate("alt", &[0.5]);
    assert!(r.pass);
    assert_eq!(r.max_residual, 1e-3);
    assert!(!r.alternates[0].within_tolerance);
    let back: ResidualReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    assert!(r.to_table().contains("(0,1)"));
    assert!(summary_table(&[r]).contains("PASS"));
    assert!(ResidualReport::new("x", Formulation::Left, s.clone(), 0.0).is_err());
    assert!(ResidualReport::new("x", Formulation::Left, vec![], 1.0).is_err());
    assert!(ResidualReport::new("x", Formulation::Left, vec![Sample::at(0.0, f64::NAN, 0.0)], 1.0).is_err());
}

/// Prints residual / (dxᵖ·magnitude) and residual / (dt²·magnitude) per
/// identity on the hermitian baseline.
#[test]
#[ignore]
fn calibration_ratios() {
    let only = |c1: f64, c2: f64| {
        let m = ToleranceModel { c1, c2, floor: 0.0 };
        CheckConfig {
            tolerances: Tolerances {
                continuity: m,
                ehrenfest_position: m,
                ehrenfest_momentum: m,
                expectation_dynamics: m,
                lorentz: m,
                virial: m,
                commutators: m,
            },
            scale: 1.0,
        }
    };
    for order in [StencilOrder::Second, StencilOrder::Fourth] {
        for (n, dt) in [(256, 1e-3), (256, 5e-4), (512, 1e-4)] {
            let grid = grid_1d(n, 20.0);
            let mut spec = PhysicsSpec { stencil_order: order, ..Default::default() };
            spec.potential.u1_re = harmonic(1.0);
            let phys = physics(&spec, &grid);
            let psi = packet(&grid, [1.0, 0.0, 0.0], (0.5f64).sqrt(), [0.5, 0.0, 0.0], Quat::from_real(1.0));
            let traj = run(&psi, &phys, 0.5, dt, (0.05 / dt) as usize);
            let checks = |c: &CheckConfig| {
                vec![
                    check_continuity(&traj, c).unwrap(),
                    check_ehrenfest_position(&traj, c).unwrap(),
                    check_ehrenfest_momentum(&traj, c).unwrap(),
                    check_expectation_dynamics(&traj, c, &OperatorDescriptor::Hamiltonian { formulation: None }).unwrap(),
                    check_expectation_dynamics(&traj, c, &OperatorDescriptor::PositionR { axis: Some(0) }).unwrap(),
                    check_virial(&traj, c, VirialVariant::ComplexRp).unwrap(),
                ]
            };
            for (a, b) in checks(&only(1.0, 0.0)).iter().zip(checks(&only(0.0, 1.0))) {
                println!(
                    "{order:?} n={n} dt={dt:e} {:<22} residual {:.3e} c1-ratio {:.3e} c2-ratio {:.3e}",
                    a.identity,
                    a.max_residual,
                    a.max_residual / a.tolerance,
                    b.max_residual / b.tolerance
                );
            }
        }
    }
}
