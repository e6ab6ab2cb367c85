//! Well-prepared particle data from macroscopic profiles.
//!
//! Particle `i` occupies the cell `[q_{i-1}, q_i]` carrying mass `2 eps` of
//! the initial density, with `eps = M0 / (2N)`. Critical distances are then
//! chosen so that the discrete critical density of each cell equals the mean
//! of `rhostar0` over it, and velocities are point samples of `u0`.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::quadrature::adaptive_simpson;
use crate::state::MicroState;

/// Dense grid intervals per particle for the cumulative mass table.
pub const GRID_PER_PARTICLE: usize = 64;
/// Bisection stops once the bracket is narrower than this.
pub const POSITION_TOL: f64 = 1e-13;

/// Constants certified by the constructed initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub eps: f64,
    /// Total mass `M0 = int rho0`.
    pub mass: f64,
    /// `min_i d_{0,i} / eps`.
    pub c0: f64,
    /// `max(max_i d_{0,i}, max_i dstar_{0,i}) / eps`.
    #[serde(rename = "C0")]
    pub c0_upper: f64,
    pub max_inc_d: f64,
    pub max_inc_dstar: f64,
}

/// Cumulative integral of a profile on a dense uniform grid.
struct CumulativeMass<'a> {
    profile: &'a Profile,
    h: f64,
    table: Vec<f64>,
}

impl<'a> CumulativeMass<'a> {
    fn new(profile: &'a Profile, intervals: usize) -> Self {
        let h = 1.0 / intervals as f64;
        let f = |x: f64| profile.eval(x);
        let tol = 1e-15;
        let mut table = Vec::with_capacity(intervals + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 0..intervals {
            let a = k as f64 * h;
            let b = if k + 1 == intervals {
                1.0
            } else {
                (k + 1) as f64 * h
            };
            acc += adaptive_simpson(&f, a, b, tol);
            table.push(acc);
        }
        CumulativeMass { profile, h, table }
    }

    fn total(&self) -> f64 {
        *self.table.last().unwrap()
    }

    fn node(&self, k: usize) -> f64 {
        if k + 1 == self.table.len() {
            1.0
        } else {
            k as f64 * self.h
        }
    }

    /// C(x) for x inside interval k.
    fn eval_in(&self, k: usize, x: f64) -> f64 {
        let a = self.node(k);
        let f = |y: f64| self.profile.eval(y);
        self.table[k] + adaptive_simpson(&f, a, x, 1e-15)
    }

    /// Smallest x with C(x) = level, by bisection inside the bracketing interval.
    fn invert(&self, level: f64) -> Result<f64> {
        let total = self.total();
        if !(level > 0.0 && level < total) {
            return Err(Error::Init(format!(
                "mass level {level} not bracketed by (0, {total})"
            )));
        }
        let k = self.table.partition_point(|&c| c < level);
        if k == 0 || k >= self.table.len() {
            return Err(Error::Init(format!("mass level {level} not bracketed")));
        }
        let k = k - 1;
        let (mut lo, mut hi) = (self.node(k), self.node(k + 1));
        while hi - lo > POSITION_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval_in(k, mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Positions with equal mass `2 eps` per cell; returns `(eps, q)`.
pub fn partition_positions(rho0: &Profile, n: usize) -> Result<(f64, Vec<f64>)> {
    if n < 2 {
        return Err(Error::Init("need at least two cells".into()));
    }
    let cumulative = CumulativeMass::new(rho0, GRID_PER_PARTICLE * n);
    let mass = cumulative.total();
    let eps = mass / (2.0 * n as f64);
    let mut q = Vec::with_capacity(n + 1);
    q.push(0.0);
    for i in 1..n {
        q.push(cumulative.invert(2.0 * eps * i as f64)?);
    }
    q.push(1.0);
    for i in 1..=n {
        let d = q[i] - q[i - 1] - 2.0 * eps;
        if !(d > 0.0) {
            return Err(Error::Init(format!(
                "non-positive gap {d:e} in cell {i}: rho0 reaches 1"
            )));
        }
    }
    Ok((eps, q))
}

/// `dstar_i = 2 eps (1 / m_i - 1)` with `m_i` the mean of `rhostar0` on cell i.
pub fn assign_critical_distances(rhostar0: &Profile, q: &[f64], eps: f64) -> Result<Vec<f64>> {
    let f = |x: f64| rhostar0.eval(x);
    q.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let len = w[1] - w[0];
            let mean = adaptive_simpson(&f, w[0], w[1], 1e-15) / len;
            if !(mean > 0.0) || mean > 1.0 + 1e-12 {
                return Err(Error::Init(format!(
                    "critical density mean {mean} outside (0, 1] in cell {}",
                    i + 1
                )));
            }
            Ok((2.0 * eps * (1.0 / mean - 1.0)).max(0.0))
        })
        .collect()
}

/// `u_i = u0(q_i)` with the two boundary velocities pinned to zero.
pub fn sample_velocities(u0: &Profile, q: &[f64]) -> Vec<f64> {
    let n = q.len() - 1;
    let mut u: Vec<f64> = q.iter().map(|&x| u0.eval(x)).collect();
    u[0] = 0.0;
    u[n] = 0.0;
    u
}

fn max_increment(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// Composes the three constructions for a validated config.
pub fn build_initial_state(cfg: &SimConfig) -> Result<(MicroState, InitReport)> {
    let init = &cfg.init;
    let (eps, q) = partition_positions(&init.rho0, cfg.n_particles)?;
    let dstar = assign_critical_distances(&init.rhostar0, &q, eps)?;
    let u = sample_velocities(&init.u0, &q);
    let state = MicroState {
        time: 0.0,
        eps,
        q,
        u,
        dstar,
    };
    state.check()?;
    let d = state.gaps();
    let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    let smax = state.dstar.iter().cloned().fold(0.0, f64::max);
    let report = InitReport {
        eps,
        mass: 2.0 * eps * cfg.n_particles as f64,
        c0: dmin / eps,
        c0_upper: dmax.max(smax) / eps,
        max_inc_d: max_increment(&d),
        max_inc_dstar: max_increment(&state.dstar),
    };
    Ok((state, report))
}
