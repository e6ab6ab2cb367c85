//! Semi-implicit time stepping of the particle system with adaptive control.
//!
//! One step solves `(2 eps / dt I + A(q^n)) u^{n+1} = (2 eps / dt) u^n + b(q^n) + 2 eps fbar`
//! and then moves `q^{n+1} = q^n + dt u^{n+1}`. Lubrication is implicit,
//! repulsion and forcing explicit.

use crate::cluster::ClusterPartition;
use crate::config::SimConfig;
use crate::diagnostics::total_energy;
use crate::dynamics::{assemble, repulsion_for};
use crate::error::{Error, Result};
use crate::state::{lerp_state, MicroState, StepRecord, Trajectory};

/// Accepted steps before the controller tries a doubled step.
pub const GROWTH_INTERVAL: usize = 5;

/// A time-stepping scheme the adaptive driver can call.
pub trait Stepper {
    fn config(&self) -> &SimConfig;

    /// One step of size `dt`; a contact in the result is an error.
    fn step(&self, state: &MicroState, dt: f64) -> Result<MicroState>;

    /// Largest step allowed by the stability and gap-closing bounds,
    /// already scaled by the safety factor.
    fn dt_bound(&self, state: &MicroState) -> f64;

    /// Whether gap `k` (0-based) is free, i.e. not internal to a cluster.
    fn is_free_gap(&self, _k: usize) -> bool {
        true
    }

    /// Commit-time invariant check.
    fn check_commit(&self, state: &MicroState) -> Result<()> {
        state.check()
    }

    fn partition(&self) -> Option<ClusterPartition> {
        None
    }
}

/// The plain particle scheme.
#[derive(Debug, Clone, Copy)]
pub struct PlainStepper<'a> {
    pub cfg: &'a SimConfig,
}

impl Stepper for PlainStepper<'_> {
    fn config(&self) -> &SimConfig {
        self.cfg
    }

    fn step(&self, state: &MicroState, dt: f64) -> Result<MicroState> {
        step(state, self.cfg, dt)
    }

    fn dt_bound(&self, state: &MicroState) -> f64 {
        let d = state.gaps();
        let g = repulsion_for(state, self.cfg);
        gap_dt_bound(self.cfg, state.eps, &d, &g, &state.u, |_| true)
    }
}

/// `cfl_safety * min(stability bound, gap-closing bound)` over the free gaps.
///
/// The stability bound `2 mu (d + 2 eps) / (gamma G d)` compares the implicit
/// lubrication damping of a gap with the stiffness of its explicit repulsion.
pub(crate) fn gap_dt_bound(
    cfg: &SimConfig,
    eps: f64,
    d: &[f64],
    g: &[f64],
    u: &[f64],
    free: impl Fn(usize) -> bool,
) -> f64 {
    let mut bound = f64::INFINITY;
    for k in 0..d.len() {
        if !free(k) {
            continue;
        }
        if g[k] > 0.0 {
            bound = bound.min(2.0 * cfg.mu * (d[k] + 2.0 * eps) / (cfg.gamma * g[k] * d[k]));
        }
        let closing = (u[k + 1] - u[k]).abs();
        if closing > 0.0 {
            bound = bound.min(d[k] / closing);
        }
    }
    cfg.integrator.cfl_safety * bound
}

/// One semi-implicit step of the plain scheme.
pub fn step(state: &MicroState, cfg: &SimConfig, dt: f64) -> Result<MicroState> {
    let n = state.n();
    let fa = assemble(state, cfg, state.time)?;
    let two_eps = 2.0 * state.eps;
    let shift = two_eps / dt;
    let rhs: Vec<f64> = (0..n - 1)
        .map(|k| shift * state.u[k + 1] + fa.b[k] + two_eps * fa.fbar[k])
        .collect();
    let interior =
        fa.a.shifted(shift)
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("lubrication system not positive definite".into()))?;
    let mut u = vec![0.0; n + 1];
    u[1..n].copy_from_slice(&interior);
    let mut q = state.q.clone();
    for i in 1..n {
        q[i] += dt * u[i];
    }
    let next = MicroState {
        time: state.time + dt,
        eps: state.eps,
        q,
        u,
        dstar: state.dstar.clone(),
    };
    let (k, dk) = next.min_gap();
    if !(dk > 0.0) {
        return Err(Error::Contact {
            index: k + 1,
            gap: dk,
            time: next.time,
        });
    }
    Ok(next)
}

/// `dt (mu / 4) sum |u_i - u_{i-1}|^2 / d_i` with the gap averaged over the
/// step. Terms with no velocity jump are skipped, so clustered gaps add 0.
pub fn dissipation_increment(mu: f64, dt: f64, u: &[f64], d_old: &[f64], d_new: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..d_old.len() {
        let du = u[k + 1] - u[k];
        if du != 0.0 {
            acc += du * du / (0.5 * (d_old[k] + d_new[k]));
        }
    }
    0.25 * mu * dt * acc
}

/// `max_i |G_{i+1} - G_i| / (2 eps)` over interior particles.
pub fn max_repulsion_gradient(state: &MicroState, cfg: &SimConfig) -> f64 {
    let g = repulsion_for(state, cfg);
    g.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max) / (2.0 * state.eps)
}

/// Plain adaptive integration from `state` to the configured horizon.
pub fn advance(state: &MicroState, cfg: &SimConfig) -> Result<Trajectory> {
    advance_with(&PlainStepper { cfg }, state)
}

/// Adaptive driver shared by the plain and clustered schemes.
pub fn advance_with<S: Stepper>(stepper: &S, state: &MicroState) -> Result<Trajectory> {
    let cfg = stepper.config();
    let ic = &cfg.integrator;
    let horizon = cfg.horizon;
    stepper.check_commit(state)?;

    let targets = cfg.frame_times();
    let mut frames = vec![state.clone()];
    let mut next_target = 1;
    let mut step_log = Vec::new();

    let mut current = state.clone();
    let mut dt = ic.dt_init;
    let mut streak = 0;
    // rounding guard for landing on frame times and T
    let t_tol = 1e-12 * horizon.max(1.0);

    while horizon - current.time > t_tol {
        let remaining = horizon - current.time;
        let mut dt_try = dt.min(stepper.dt_bound(&current));
        if dt_try >= remaining - t_tol {
            dt_try = remaining;
        }
        if dt_try < ic.dt_min {
            return Err(underflow(&current, dt_try));
        }
        let d_old = current.gaps();
        let attempt = stepper.step(&current, dt_try);
        let accepted = match attempt {
            Ok(next) => {
                let d_new = next.gaps();
                let floor_ok = (0..d_old.len())
                    .all(|k| !stepper.is_free_gap(k) || d_new[k] >= ic.gap_floor_frac * d_old[k]);
                let du = next
                    .u
                    .iter()
                    .zip(&current.u)
                    .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
                if floor_ok && du <= ic.velocity_tol {
                    Some((next, d_new))
                } else {
                    None
                }
            }
            Err(Error::Contact { .. }) => None,
            Err(e) => return Err(e),
        };
        let Some((mut next, d_new)) = accepted else {
            dt = 0.5 * dt_try;
            streak = 0;
            if dt < ic.dt_min {
                return Err(underflow(&current, dt));
            }
            continue;
        };
        if dt_try == remaining {
            next.time = horizon;
        }
        stepper.check_commit(&next)?;

        let (_, min_gap) = next.min_gap_free(|k| stepper.is_free_gap(k));
        step_log.push(StepRecord {
            t: current.time,
            dt: dt_try,
            min_gap,
            max_abs_u: next.max_abs_velocity(),
            dissipation: dissipation_increment(cfg.mu, dt_try, &next.u, &d_old, &d_new),
            max_dxg: max_repulsion_gradient(&current, cfg),
            max_f: cfg.force.sup_norm(current.time),
            energy: total_energy(&next, cfg),
        });

        while next_target < targets.len() && targets[next_target] <= next.time + t_tol {
            let tf = targets[next_target];
            if (tf - next.time).abs() <= t_tol {
                let mut f = next.clone();
                f.time = tf;
                frames.push(f);
            } else {
                let s = (tf - current.time) / (next.time - current.time);
                frames.push(lerp_state(&current, &next, s, tf));
            }
            next_target += 1;
        }

        current = next;
        streak += 1;
        if streak >= GROWTH_INTERVAL {
            dt = (2.0 * dt).min(ic.dt_init);
            streak = 0;
        }
    }

    Ok(Trajectory {
        config: cfg.clone(),
        frames,
        step_log,
        clusters: stepper.partition(),
    })
}

fn underflow(state: &MicroState, dt: f64) -> Error {
    let (k, _) = state.min_gap();
    Error::StepUnderflow {
        time: state.time,
        dt,
        index: k + 1,
    }
}

/// Fixed-step integration to `horizon`, without step control.
pub fn integrate_fixed(state: &MicroState, cfg: &SimConfig, dt: f64, horizon: f64) -> Result<MicroState> {
    let steps = (horizon / dt).round() as usize;
    let h = horizon / steps as f64;
    let mut s = state.clone();
    for _ in 0..steps {
        s = step(&s, cfg, h)?;
    }
    Ok(s)
}
