//! Forces acting on the particles and the right-hand side of the balance of
//! forces `2 eps du/dt = -A(q) u + b(q) + 2 eps fbar`.
//!
//! Vectors over interior particles (length N-1) are indexed so that entry
//! `k` belongs to particle `k + 1`. Vectors over gaps (length N) are indexed so
//! that entry `k` belongs to gap `k + 1`, between particles `k` and `k + 1`.

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::profile::ForceSpec;
use crate::quadrature::simpson;
use crate::state::MicroState;
use crate::tridiag::SymTridiag;

/// Simpson panels per particle for the force average.
pub const FORCE_PANELS: usize = 8;

/// Everything needed for one evaluation of the balance of forces.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceAssembly {
    pub a: SymTridiag,
    /// Repulsion magnitudes, one per gap.
    pub g: Vec<f64>,
    /// `b_i = G_i - G_{i+1}` for interior particles.
    pub b: Vec<f64>,
    pub fbar: Vec<f64>,
}

/// Gaps with a contact error when one is not strictly positive.
pub fn gaps(state: &MicroState) -> Result<Vec<f64>> {
    let d = state.gaps();
    if let Some((k, &dk)) = d.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Contact {
            index: k + 1,
            gap: dk,
            time: state.time,
        });
    }
    Ok(d)
}

/// `G = ((dstar + 2 eps) / (d + 2 eps))^gamma`.
#[inline]
pub fn repulsion_of(d: f64, dstar: f64, eps: f64, gamma: f64) -> f64 {
    ((dstar + 2.0 * eps) / (d + 2.0 * eps)).powf(gamma)
}

/// Repulsion magnitude of every gap.
pub fn repulsion(state: &MicroState, gamma: f64) -> Vec<f64> {
    state
        .gaps()
        .iter()
        .zip(&state.dstar)
        .map(|(&d, &s)| repulsion_of(d, s, state.eps, gamma))
        .collect()
}

/// Repulsion honouring the `repulsion` switch of the config.
pub fn repulsion_for(state: &MicroState, cfg: &SimConfig) -> Vec<f64> {
    if cfg.repulsion {
        repulsion(state, cfg.gamma)
    } else {
        vec![0.0; state.n()]
    }
}

/// Tridiagonal lubrication matrix from gaps.
pub fn lubrication_from_gaps(d: &[f64], mu: f64) -> SymTridiag {
    let n = d.len();
    let diag = (1..n).map(|i| mu * (1.0 / d[i - 1] + 1.0 / d[i])).collect();
    let off = (1..n.saturating_sub(1)).map(|i| -mu / d[i]).collect();
    SymTridiag::new(diag, off)
}

/// Lubrication matrix of the interior particles.
pub fn lubrication_matrix(state: &MicroState, mu: f64) -> SymTridiag {
    lubrication_from_gaps(&state.gaps(), mu)
}

/// `(1 / 2 eps) int_{q_i - eps}^{q_i + eps} f(t, x) dx` for interior particles.
pub fn external_average(force: &ForceSpec, state: &MicroState, t: f64) -> Vec<f64> {
    let n = state.n();
    match force {
        ForceSpec::Zero => vec![0.0; n - 1],
        ForceSpec::Constant { value } => vec![*value; n - 1],
        _ => {
            let eps = state.eps;
            state.q[1..n]
                .iter()
                .map(|&q| simpson(|x| force.eval(t, x), q - eps, q + eps, FORCE_PANELS) / (2.0 * eps))
                .collect()
        }
    }
}

/// Interior differences `G_i - G_{i+1}`.
pub fn repulsion_balance(g: &[f64]) -> Vec<f64> {
    g.windows(2).map(|w| w[0] - w[1]).collect()
}

/// Assembles `A`, `G`, `b` and `fbar` at time `t`.
pub fn assemble(state: &MicroState, cfg: &SimConfig, t: f64) -> Result<ForceAssembly> {
    let d = gaps(state)?;
    let g = if cfg.repulsion {
        d.iter()
            .zip(&state.dstar)
            .map(|(&di, &s)| repulsion_of(di, s, state.eps, cfg.gamma))
            .collect()
    } else {
        vec![0.0; d.len()]
    };
    Ok(ForceAssembly {
        a: lubrication_from_gaps(&d, cfg.mu),
        b: repulsion_balance(&g),
        g,
        fbar: external_average(&cfg.force, state, t),
    })
}

/// Velocity gradients `w_i = (u_i - u_{i-1}) / d_i`, one per gap.
pub fn velocity_gradients(state: &MicroState) -> Vec<f64> {
    state
        .gaps()
        .iter()
        .zip(state.u.windows(2))
        .map(|(d, w)| (w[1] - w[0]) / d)
        .collect()
}

/// Accelerations of the interior particles, `(-A u + b) / (2 eps) + fbar`.
pub fn rhs(state: &MicroState, cfg: &SimConfig, t: f64) -> Result<Vec<f64>> {
    let fa = assemble(state, cfg, t)?;
    let n = state.n();
    let au = fa.a.mul_vec(&state.u[1..n]);
    let two_eps = 2.0 * state.eps;
    Ok(au
        .iter()
        .zip(&fa.b)
        .zip(&fa.fbar)
        .map(|((a, b), f)| (b - a) / two_eps + f)
        .collect())
}
