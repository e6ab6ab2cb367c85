//! Finite-difference solver for the limit system
//!
//! ```text
//! rho_t + (rho u)_x = 0
//! (rho u)_t + (rho u^2)_x - (mu / (1 - rho) u_x)_x + ((rho / rhostar)^gamma)_x = rho f
//! rhostar_t + u rhostar_x = 0
//! ```
//!
//! on a staggered grid (cell densities, face velocities) with no-slip walls.
//! Each step is split: upwind continuity, upwind non-conservative transport
//! of the critical density, explicit convection and pressure, and finally an
//! implicit solve of the singular viscous term.

use serde::{Deserialize, Serialize};

use crate::config::InitialProfiles;
use crate::error::{Error, Result};
use crate::profile::ForceSpec;
use crate::quadrature::adaptive_simpson;
use crate::tridiag::solve_sym;

/// Lower bound for `1 - rho` inside the viscosity coefficient.
pub const VISCOSITY_CLAMP: f64 = 1e-6;
/// Floor for face densities when recovering velocity from momentum.
pub const DENSITY_FLOOR: f64 = 1e-10;
/// Courant number used by [`cfl_dt`].
pub const CFL_SAFETY: f64 = 0.4;

/// Cell-averaged densities and face velocities at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeState {
    pub time: f64,
    pub rho: Vec<f64>,
    pub rhostar: Vec<f64>,
    /// Face velocities, `u[0] = u[M] = 0`.
    pub u: Vec<f64>,
}

impl PdeState {
    pub fn cells(&self) -> usize {
        self.rho.len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.dx()
    }

    pub fn max_rho(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Velocity averaged to cell centres.
    pub fn u_centres(&self) -> Vec<f64> {
        self.u.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Builds the initial state from profiles: cell averages of the densities
    /// and point values of the velocity at faces.
    pub fn from_profiles(init: &InitialProfiles, cells: usize) -> Self {
        let dx = 1.0 / cells as f64;
        let average = |p: &crate::profile::Profile, j: usize| {
            let a = j as f64 * dx;
            adaptive_simpson(&|x| p.eval(x), a, a + dx, 1e-13 * dx) / dx
        };
        let rho = (0..cells).map(|j| average(&init.rho0, j)).collect();
        let rhostar = (0..cells).map(|j| average(&init.rhostar0, j).min(1.0)).collect();
        let mut u: Vec<f64> = (0..=cells).map(|k| init.u0.eval(k as f64 * dx)).collect();
        u[0] = 0.0;
        u[cells] = 0.0;
        PdeState {
            time: 0.0,
            rho,
            rhostar,
            u,
        }
    }
}

/// Physical parameters and term switches of the limit system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroParams {
    pub mu: f64,
    pub gamma: f64,
    /// `false` drops the congestion pressure (pressureless system).
    pub pressure: bool,
    #[serde(default = "yes")]
    pub convection: bool,
    #[serde(default)]
    pub force: ForceSpec,
}

fn yes() -> bool {
    true
}

impl MacroParams {
    pub fn new(mu: f64, gamma: f64) -> Self {
        MacroParams {
            mu,
            gamma,
            pressure: true,
            convection: true,
            force: ForceSpec::Zero,
        }
    }
}

/// Per-step counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// Cells where `1 - rho < VISCOSITY_CLAMP` in the viscosity coefficient.
    pub clamped_cells: usize,
}

fn pressure_of(rho: f64, rhostar: f64, gamma: f64) -> f64 {
    (rho / rhostar).powf(gamma)
}

/// Largest pressure-wave speed `sqrt(dp/drho)` over cells, 0 without pressure.
pub fn sound_speed(state: &PdeState, params: &MacroParams) -> f64 {
    if !params.pressure {
        return 0.0;
    }
    let g = params.gamma;
    state
        .rho
        .iter()
        .zip(&state.rhostar)
        .map(|(&r, &s)| {
            let s = s.max(DENSITY_FLOOR);
            (g * (r.max(0.0) / s).powf(g - 1.0) / s).sqrt()
        })
        .fold(0.0, f64::max)
}

/// `CFL_SAFETY * dx / (max |u| + c_max)`.
pub fn cfl_dt(state: &PdeState, params: &MacroParams) -> f64 {
    let umax = state.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let speed = (umax + sound_speed(state, params)).max(1e-12);
    CFL_SAFETY * state.dx() / speed
}

/// Upwind non-conservative update of `rhostar_t + u rhostar_x = 0` with face
/// velocities `u`.
pub fn advect_critical_density(rhostar: &[f64], u: &[f64], dt: f64) -> Vec<f64> {
    let m = rhostar.len();
    let lambda = dt * m as f64;
    (0..m)
        .map(|j| {
            let mut s = rhostar[j];
            let inflow_left = u[j].max(0.0);
            if inflow_left > 0.0 && j > 0 {
                s -= lambda * inflow_left * (rhostar[j] - rhostar[j - 1]);
            }
            let inflow_right = u[j + 1].min(0.0);
            if inflow_right < 0.0 && j + 1 < m {
                s -= lambda * inflow_right * (rhostar[j + 1] - rhostar[j]);
            }
            s
        })
        .collect()
}

fn face_density(rho: &[f64], k: usize) -> f64 {
    0.5 * (rho[k - 1] + rho[k])
}

/// Implicit viscous solve on interior faces:
/// `rho_f u - dt d_x(nu d_x u) = momentum`, `nu = mu / max(1 - rho, clamp)`.
/// Returns the new face velocities and the number of clamped cells.
pub fn viscous_solve(rho: &[f64], momentum: &[f64], mu: f64, dt: f64) -> (Vec<f64>, usize) {
    let m = rho.len();
    let dx = 1.0 / m as f64;
    let mut clamped = 0;
    let nu: Vec<f64> = rho
        .iter()
        .map(|r| {
            let gap = 1.0 - r;
            if gap < VISCOSITY_CLAMP {
                clamped += 1;
            }
            mu / gap.max(VISCOSITY_CLAMP)
        })
        .collect();
    let c = dt / (dx * dx);
    // unknowns: faces 1..m-1
    let n = m - 1;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    let mut rhs = Vec::with_capacity(n);
    for k in 1..m {
        diag.push(face_density(rho, k).max(DENSITY_FLOOR) + c * (nu[k - 1] + nu[k]));
        if k + 1 < m {
            off.push(-c * nu[k]);
        }
        rhs.push(momentum[k]);
    }
    let inner = solve_sym(&diag, &off, &rhs).expect("viscous matrix is SPD");
    let mut u = vec![0.0; m + 1];
    u[1..m].copy_from_slice(&inner);
    (u, clamped)
}

/// One split step of size `dt`.
pub fn pde_step(state: &PdeState, params: &MacroParams, dt: f64) -> Result<(PdeState, StepStats)> {
    let limit = cfl_dt(state, params);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-9) {
        return Err(Error::Macro(format!(
            "CFL violation: dt = {dt:e} exceeds {limit:e}"
        )));
    }
    let m = state.cells();
    let dx = state.dx();
    let lambda = dt / dx;
    let u = &state.u;
    let rho = &state.rho;

    // momentum on faces before the update
    let mom_old: Vec<f64> = (0..=m)
        .map(|k| {
            if k == 0 || k == m {
                0.0
            } else {
                face_density(rho, k) * u[k]
            }
        })
        .collect();

    // continuity
    let flux: Vec<f64> = (0..=m)
        .map(|k| {
            if k == 0 || k == m {
                0.0
            } else if u[k] > 0.0 {
                u[k] * rho[k - 1]
            } else {
                u[k] * rho[k]
            }
        })
        .collect();
    let rho_new: Vec<f64> = (0..m)
        .map(|j| rho[j] - lambda * (flux[j + 1] - flux[j]))
        .collect();

    // critical density
    let rhostar_new = advect_critical_density(&state.rhostar, u, dt);

    // explicit convection, pressure and forcing
    let mut mom = mom_old.clone();
    if params.convection {
        let conv: Vec<f64> = (0..m)
            .map(|j| {
                let uc = 0.5 * (u[j] + u[j + 1]);
                let up = if uc > 0.0 { mom_old[j] } else { mom_old[j + 1] };
                uc * up
            })
            .collect();
        for k in 1..m {
            mom[k] -= lambda * (conv[k] - conv[k - 1]);
        }
    }
    if params.pressure {
        let p: Vec<f64> = rho_new
            .iter()
            .zip(&rhostar_new)
            .map(|(&r, &s)| pressure_of(r, s, params.gamma))
            .collect();
        for k in 1..m {
            mom[k] -= lambda * (p[k] - p[k - 1]);
        }
    }
    if !params.force.is_zero() {
        for (k, mk) in mom.iter_mut().enumerate().take(m).skip(1) {
            *mk += dt * face_density(rho, k) * params.force.eval(state.time, k as f64 * dx);
        }
    }

    let (u_new, clamped) = viscous_solve(&rho_new, &mom, params.mu, dt);
    if rho_new.iter().any(|r| !r.is_finite()) || u_new.iter().any(|v| !v.is_finite()) {
        return Err(Error::Macro(format!("non-finite state at t = {}", state.time)));
    }
    Ok((
        PdeState {
            time: state.time + dt,
            rho: rho_new,
            rhostar: rhostar_new,
            u: u_new,
        },
        StepStats {
            clamped_cells: clamped,
        },
    ))
}

/// Output of [`pde_solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroRun {
    pub params: MacroParams,
    pub cells: usize,
    pub frames: Vec<PdeState>,
    pub steps: usize,
    pub clamp_count: usize,
    /// Largest |mass(t) - mass(0)| over all steps.
    pub mass_drift: f64,
    /// Largest density seen at any step.
    pub max_rho: f64,
}

impl MacroRun {
    /// Frame at `t`, linearly interpolated between stored frames.
    pub fn frame_at(&self, t: f64) -> Result<PdeState> {
        let first = self.frames[0].time;
        let last = self.frames[self.frames.len() - 1].time;
        if !(t >= first - 1e-12 && t <= last + 1e-12) {
            return Err(Error::TimeOutOfRange(t));
        }
        if let Some(f) = self.frames.iter().find(|f| (f.time - t).abs() <= 1e-12) {
            return Ok(f.clone());
        }
        let k = self.frames.partition_point(|f| f.time <= t);
        let (a, b) = (&self.frames[k - 1], &self.frames[k]);
        let s = (t - a.time) / (b.time - a.time);
        let mix =
            |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + s * (q - p)).collect() };
        Ok(PdeState {
            time: t,
            rho: mix(&a.rho, &b.rho),
            rhostar: mix(&a.rhostar, &b.rhostar),
            u: mix(&a.u, &b.u),
        })
    }

    /// `max_x rho` at every stored frame.
    pub fn max_rho_series(&self) -> Vec<(f64, f64)> {
        self.frames.iter().map(|f| (f.time, f.max_rho())).collect()
    }
}

/// Advances the limit system from the given profiles to `horizon`, storing
/// frames at `output_times` (and at 0 and `horizon`).
pub fn pde_solve(
    init: &InitialProfiles,
    params: &MacroParams,
    cells: usize,
    horizon: f64,
    output_times: &[f64],
) -> Result<MacroRun> {
    if cells < 2 {
        return Err(Error::Macro("need at least two cells".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Macro("horizon <= 0".into()));
    }
    let mut targets: Vec<f64> = output_times
        .iter()
        .cloned()
        .filter(|t| *t > 0.0 && *t < horizon)
        .collect();
    targets.push(horizon);
    targets.dedup();

    let mut state = PdeState::from_profiles(init, cells);
    let mass0 = state.mass();
    let mut run = MacroRun {
        params: params.clone(),
        cells,
        frames: vec![state.clone()],
        steps: 0,
        clamp_count: 0,
        mass_drift: 0.0,
        max_rho: state.max_rho(),
    };
    for &target in &targets {
        while state.time < target {
            let remaining = target - state.time;
            let mut dt = cfl_dt(&state, params);
            let mut last = false;
            if dt >= remaining {
                dt = remaining;
                last = true;
            } else if dt > 0.5 * remaining {
                // split what is left into two even steps
                dt = 0.5 * remaining;
            }
            let (mut next, stats) = pde_step(&state, params, dt)?;
            if last {
                next.time = target;
            }
            run.steps += 1;
            run.clamp_count += stats.clamped_cells;
            run.mass_drift = run.mass_drift.max((next.mass() - mass0).abs());
            run.max_rho = run.max_rho.max(next.max_rho());
            state = next;
        }
        run.frames.push(state.clone());
    }
    Ok(run)
}

/// L1 distance between two cell-average fields on nested uniform grids
/// (the finer one is averaged onto the coarser one).
pub fn l1_between_grids(coarse: &[f64], fine: &[f64]) -> f64 {
    let ratio = fine.len() / coarse.len();
    assert_eq!(ratio * coarse.len(), fine.len(), "grids must be nested");
    let dx = 1.0 / coarse.len() as f64;
    coarse
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let avg: f64 = fine[j * ratio..(j + 1) * ratio].iter().sum::<f64>() / ratio as f64;
            (c - avg).abs() * dx
        })
        .sum()
}
