use std::sync::Arc;

use super::{CheckConfig, ResidualReport, Sample};
use crate::error::Result;
use crate::hypercomplex::Quaternion;
use crate::operators::{commutator_apply, Formulation, OperatorDescriptor, Physics};
use crate::field_grid::StencilOrder;
use crate::QField64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommutatorOptions {
    /// Leave the `w` contribution out of the closed form (the `2 w_ℓ j p_Lk`
    /// term on the left, `∂_k w_ℓ j` on the right).
    pub drop_w_term: bool,
}

/// `[q_ℓ, p_k] ψ` against its closed form for every pair of grid axes:
///
/// - complex: `[z_ℓ, p_k] = ħ(i δ − ∂_k s_ℓ)`
/// - left: `[q_ℓ, p_Lk] = ħ(i δ − ∂_k s_ℓ + ∂_k w_ℓ k) + 2 w_ℓ j p_Lk`
/// - right: `[q_ℓ, p_Rk] ψ = ħ(δ + ∂_k s_ℓ i + ∂_k w_ℓ j) ψ i`
///
/// Residuals are taken over interior points, away from the stencil's
/// periodic wrap.
pub fn check_commutators(
    psi: &QField64,
    phys: &Arc<Physics<f64>>,
    cfg: &CheckConfig,
    opts: CommutatorOptions,
) -> Result<ResidualReport> {
    phys.check_state(psi)?;
    let f = phys.formulation();
    let grid = phys.grid();
    let dim = grid.dim();
    let hbar = phys.hbar;
    let (i, j, k_unit) = (Quaternion::<f64>::i(), Quaternion::<f64>::j(), Quaternion::<f64>::k());
    let layers = match phys.order() {
        StencilOrder::Second => 1,
        StencilOrder::Fourth => 2,
    };
    let dv = grid.cell_volume();

    let mut samples = Vec::new();
    let mut magnitude = 0.0f64;
    for l in 0..dim {
        let position = match f {
            Formulation::Complex => OperatorDescriptor::PositionZ { axis: Some(l) },
            _ => OperatorDescriptor::PositionQ { axis: Some(l) },
        };
        for k in 0..dim {
            let momentum = OperatorDescriptor::MomentumP { axis: Some(k), side: f.side() };
            let q_op = super::scalar_op(&position, phys)?;
            let p_op = super::scalar_op(&momentum, phys)?;
            let lhs = commutator_apply(&q_op, &p_op, psi)?;
            let delta = if k == l { 1.0 } else { 0.0 };
            let ds = phys.ds[l][k].values();
            let dw = phys.dw[l][k].values();
            let w = phys.w.comps[l].values();
            let expected: Vec<Quaternion<f64>> = match f {
                Formulation::Complex => psi
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(n, &v)| (i.scale(delta) - Quaternion::from_real(ds[n])).scale(hbar) * v)
                    .collect(),
                Formulation::Left => {
                    let pk = p_op.apply(psi)?;
                    psi.values()
                        .iter()
                        .enumerate()
                        .map(|(n, &v)| {
                            let c = i.scale(delta) - Quaternion::from_real(ds[n]) + k_unit.scale(dw[n]);
                            let mut out = c.scale(hbar) * v;
                            if !opts.drop_w_term {
                                out += j.scale(2.0 * w[n]) * pk.values()[n];
                            }
                            out
                        })
                        .collect()
                }
                Formulation::Right => psi
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(n, &v)| {
                        let mut c = Quaternion::from_real(delta) + i.scale(ds[n]);
                        if !opts.drop_w_term {
                            c += j.scale(dw[n]);
                        }
                        c.scale(hbar) * v * i
                    })
                    .collect(),
            };
            let (mut linf, mut l2) = (0.0f64, 0.0f64);
            for (n, (a, b)) in lhs.values().iter().zip(&expected).enumerate() {
                if grid.is_edge_point(n, layers) {
                    continue;
                }
                let d = (*a - *b).norm();
                linf = linf.max(d);
                l2 += d * d * dv;
                magnitude = magnitude.max(a.norm()).max(b.norm());
            }
            samples.push(Sample::labelled(format!("({k},{l})"), linf, l2.sqrt()));
        }
    }

    let tol = cfg.tolerance(&cfg.tolerances.commutators, phys, 0.0, magnitude);
    let mut report = ResidualReport::new("commutators", f, samples, tol)?
        .note("pairs labelled (k,l) for [q_l, p_k]; edge layers of the stencil excluded");
    if opts.drop_w_term {
        report = report.note("w contribution removed from the closed form");
    }
    Ok(report)
}
