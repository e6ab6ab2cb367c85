//! Particle state, step records and trajectories.

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterPartition;
use crate::config::SimConfig;
use crate::error::{Error, Result};

/// Positions, velocities and critical distances of the N+1 particles at one
/// instant. Indices follow the particle numbering 0..=N; the two boundary
/// particles are pinned at 0 and 1 with zero velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroState {
    pub time: f64,
    pub eps: f64,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    /// `dstar[i - 1]` is the critical distance of the pair (i-1, i).
    pub dstar: Vec<f64>,
}

impl MicroState {
    /// Number of gaps N (there are N+1 particles).
    pub fn n(&self) -> usize {
        self.q.len() - 1
    }

    /// `d[i - 1] = q[i] - q[i-1] - 2 eps`, for i = 1..=N.
    pub fn gaps(&self) -> Vec<f64> {
        let two_eps = 2.0 * self.eps;
        self.q.windows(2).map(|w| w[1] - w[0] - two_eps).collect()
    }

    pub fn min_gap(&self) -> (usize, f64) {
        self.gaps().into_iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, d)| if d < acc.1 { (i, d) } else { acc },
        )
    }

    /// Smallest gap among those selected by `free`.
    pub fn min_gap_free(&self, free: impl Fn(usize) -> bool) -> (usize, f64) {
        self.gaps()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| free(*i))
            .fold(
                (0, f64::INFINITY),
                |acc, (i, d)| if d < acc.1 { (i, d) } else { acc },
            )
    }

    pub fn max_abs_velocity(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks every structural invariant, requiring strictly positive gaps.
    pub fn check(&self) -> Result<()> {
        self.check_structure()?;
        let (i, d) = self.min_gap();
        if !(d > 0.0) {
            return Err(Error::Contact {
                index: i + 1,
                gap: d,
                time: self.time,
            });
        }
        Ok(())
    }

    /// Invariants that also hold for clustered states (gaps may be zero).
    pub fn check_structure(&self) -> Result<()> {
        let n = self.n();
        if n < 2 || self.u.len() != n + 1 || self.dstar.len() != n {
            return Err(Error::config("state vectors have inconsistent lengths"));
        }
        if self.q[0] != 0.0 || self.q[n] != 1.0 {
            return Err(Error::config("boundary particles not pinned at 0 and 1"));
        }
        if self.u[0] != 0.0 || self.u[n] != 0.0 {
            return Err(Error::config("boundary velocities not zero"));
        }
        if self.dstar.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::config("negative critical distance"));
        }
        let total: f64 = self.gaps().iter().sum();
        if (total + 2.0 * self.eps * n as f64 - 1.0).abs() > 1e-12 {
            return Err(Error::config("gap sum inconsistent with pinned endpoints"));
        }
        Ok(())
    }
}

/// Bookkeeping for one accepted integrator step `[t, t + dt]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    /// Smallest gap at the end of the step.
    pub min_gap: f64,
    /// Largest |u_i| at the end of the step.
    pub max_abs_u: f64,
    /// `(mu/4) * dt * sum |u_i - u_{i-1}|^2 / d_i`, gaps at the step midpoint.
    pub dissipation: f64,
    /// `max_i |G_{i+1} - G_i| / (2 eps)` at the start of the step.
    pub max_dxg: f64,
    /// `||f(t, .)||_inf` at the start of the step.
    pub max_f: f64,
    /// Kinetic plus potential energy at the end of the step.
    pub energy: f64,
}

/// Time-indexed particle frames of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: SimConfig,
    pub frames: Vec<MicroState>,
    pub step_log: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClusterPartition>,
}

impl Trajectory {
    pub fn initial(&self) -> &MicroState {
        &self.frames[0]
    }

    pub fn last(&self) -> &MicroState {
        self.frames.last().expect("trajectory has frames")
    }

    pub fn max_dt(&self) -> f64 {
        self.step_log.iter().fold(0.0, |m, s| m.max(s.dt))
    }

    /// Frame at time `t`, interpolating linearly between recorded frames.
    pub fn frame_at(&self, t: f64) -> Result<MicroState> {
        let first = self.initial().time;
        let last = self.last().time;
        if !(t >= first - 1e-12 && t <= last + 1e-12) {
            return Err(Error::TimeOutOfRange(t));
        }
        let k = self
            .frames
            .partition_point(|f| f.time <= t)
            .clamp(1, self.frames.len().max(2) - 1);
        if self.frames.len() == 1 {
            return Ok(self.frames[0].clone());
        }
        let (a, b) = (&self.frames[k - 1], &self.frames[k]);
        if (t - a.time).abs() <= 1e-12 {
            return Ok(a.clone());
        }
        if (t - b.time).abs() <= 1e-12 {
            return Ok(b.clone());
        }
        let s = (t - a.time) / (b.time - a.time);
        Ok(lerp_state(a, b, s, t))
    }
}

/// Linear interpolation of positions and velocities; boundary entries are kept
/// exactly pinned.
pub(crate) fn lerp_state(a: &MicroState, b: &MicroState, s: f64, time: f64) -> MicroState {
    let n = a.n();
    let mix =
        |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(xa, yb)| xa + s * (yb - xa)).collect() };
    let mut q = mix(&a.q, &b.q);
    let mut u = mix(&a.u, &b.u);
    q[0] = 0.0;
    q[n] = 1.0;
    u[0] = 0.0;
    u[n] = 0.0;
    MicroState {
        time,
        eps: a.eps,
        q,
        u,
        dstar: a.dstar.clone(),
    }
}
