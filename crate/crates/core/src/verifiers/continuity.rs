use super::{max_abs, state, window, CheckConfig, ResidualReport, Sample};
use crate::error::Result;
use crate::operators::Formulation;
use crate::field_grid::RealVecField;
use crate::operators::Physics;
use crate::real_hilbert::{density_current, nonconservative_sources, GammaField};
use crate::{QField64, Trajectory64};

/// Pointwise residual of the formulation's continuity equation.
///
/// `∂ρ/∂t` is the central difference of the density between the neighbours
/// of each stride point; `J`, `∇·J` and the sources are evaluated on the
/// centre state.
pub fn check_continuity(traj: &Trajectory64, cfg: &CheckConfig) -> Result<ResidualReport> {
    let phys = traj.physics();
    let grid = phys.grid();
    let order = phys.order();
    let dv = grid.cell_volume();
    let dt = traj.dt();
    let centres = window(traj, "continuity")?;

    let mut samples = Vec::new();
    let mut literal = Vec::new();
    let (mut rate_norm, mut div_norm, mut g_norm, mut gamma_norm) = (vec![], vec![], vec![], vec![]);
    let mut magnitude = 0.0f64;
    for &k in &centres {
        let after = state(traj, k + 1).abs_sqr();
        let before = state(traj, k - 1).abs_sqr();
        let psi = state(traj, k);
        let SourceParts { j, g, gamma_term, kappa } = source_parts(psi, phys)?;
        let n = grid.len();

        let mut div = vec![0.0; n];
        for a in 0..grid.dim() {
            for (d, v) in div.iter_mut().zip(j.comps[a].partial(a, order).values()) {
                *d += v;
            }
        }

        let mut res = Vec::with_capacity(n);
        let mut res_literal = Vec::with_capacity(n);
        let mut rho_t = Vec::with_capacity(n);
        for i in 0..n {
            let r = (after.values()[i] - before.values()[i]) / (2.0 * dt);
            let base = r + div[i] - g[i];
            res.push(base + kappa * gamma_term[i]);
            res_literal.push(base + gamma_term[i]);
            rho_t.push(r);
        }
        let l2 = (res.iter().map(|v| v * v).sum::<f64>() * dv).sqrt();
        samples.push(Sample::at(traj.time(k), max_abs(res.iter().copied()), l2));
        literal.push(max_abs(res_literal));

        rate_norm.push(max_abs(rho_t));
        div_norm.push(max_abs(div));
        g_norm.push(max_abs(g.iter().copied()));
        gamma_norm.push(kappa.abs() * max_abs(gamma_term));
        magnitude = magnitude
            .max(*rate_norm.last().unwrap())
            .max(*div_norm.last().unwrap())
            .max(*g_norm.last().unwrap())
            .max(*gamma_norm.last().unwrap());
    }

    let tol = cfg.tolerance(&cfg.tolerances.continuity, phys, dt, magnitude);
    let note = match phys.formulation() {
        Formulation::Right => "vector-potential source enters with factor 2q/c; the source terms are exactly real",
        _ => "vector-potential source enters with factor q/c",
    };
    Ok(ResidualReport::new("continuity", phys.formulation(), samples, tol)?
        .note(note)
        .note("time derivative: central difference of the density between neighbouring steps")
        .alternate("sources without the coupling factor", &literal)
        .term("drho_dt", rate_norm)
        .term("div_j", div_norm)
        .term("g", g_norm)
        .term("gamma", gamma_norm))
}

/// Current and source densities of one state.
///
/// `ρ̇ = −∇·J + g − κ·gamma_term` in every formulation: `gamma_term` is
/// `γ·J` on the complex and left sides and `−γ` on the right.
pub(super) struct SourceParts {
    pub j: RealVecField<f64>,
    pub g: Vec<f64>,
    pub gamma_term: Vec<f64>,
    pub kappa: f64,
}

pub(super) fn source_parts(psi: &QField64, phys: &Physics<f64>) -> Result<SourceParts> {
    let (_, j) = density_current(psi, phys)?;
    let sources = nonconservative_sources(psi, phys)?;
    let n = psi.values().len();
    let gamma_term = match &sources.gamma {
        GammaField::Vector(gamma) => (0..n)
            .map(|i| (0..3).map(|a| gamma.comps[a].values()[i] * j.comps[a].values()[i]).sum())
            .collect(),
        GammaField::Scalar(gamma) => gamma.values().iter().map(|v| -v).collect(),
    };
    Ok(SourceParts { j, g: sources.g.values().to_vec(), gamma_term, kappa: sources.gamma_scale })
}
