//! Scenario configuration and its validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{ForceSpec, Profile};

/// Macroscopic initial profiles together with the bounds `delta <= rho0 <= rhobar < 1`
/// and `delta <= rhostar0 <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialProfiles {
    pub rho0: Profile,
    pub rhostar0: Profile,
    pub u0: Profile,
    pub delta: f64,
    pub rhobar: f64,
}

/// Step-size controls for the adaptive particle integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorControls {
    pub dt_init: f64,
    pub dt_min: f64,
    /// Fraction of the stability / gap-closing step bounds actually used.
    pub cfl_safety: f64,
    /// A step is rejected when any gap would fall below this fraction of its
    /// pre-step value.
    pub gap_floor_frac: f64,
    /// A step is rejected when some velocity changes by more than this.
    pub velocity_tol: f64,
    /// Frame times in (0, T); t = 0 and t = T are always recorded.
    #[serde(default)]
    pub output_times: Vec<f64>,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        IntegratorControls {
            dt_init: 1e-3,
            dt_min: 1e-12,
            cfl_safety: 0.5,
            gap_floor_frac: 0.5,
            velocity_tol: 0.02,
            output_times: Vec::new(),
        }
    }
}

/// Full description of a particle simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_particles: usize,
    pub mu: f64,
    pub gamma: f64,
    pub horizon: f64,
    #[serde(default)]
    pub force: ForceSpec,
    pub init: InitialProfiles,
    #[serde(default)]
    pub integrator: IntegratorControls,
    /// Switches the roughness repulsion off (pressureless runs).
    #[serde(default = "default_true")]
    pub repulsion: bool,
}

fn default_true() -> bool {
    true
}

/// Tolerance for `u0(0) = u0(1) = 0`.
const BOUNDARY_TOL: f64 = 1e-12;

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Sorted frame times including 0 and T.
    pub fn frame_times(&self) -> Vec<f64> {
        let mut times = vec![0.0];
        for &t in &self.integrator.output_times {
            if t > 0.0 && t < self.horizon && t > *times.last().unwrap() {
                times.push(t);
            }
        }
        times.push(self.horizon);
        times
    }
}

/// Returns the config unchanged when every invariant holds, otherwise the
/// first violated invariant by name.
pub fn validate_config(cfg: SimConfig) -> Result<SimConfig> {
    let fail = |msg: &str| Err(Error::config(msg));
    if cfg.n_particles < 2 {
        return fail("n_particles < 2");
    }
    if !(cfg.mu > 0.0) || !cfg.mu.is_finite() {
        return fail("mu <= 0");
    }
    if !(cfg.gamma >= 1.0) || !cfg.gamma.is_finite() {
        return fail("gamma < 1");
    }
    if !(cfg.horizon > 0.0) || !cfg.horizon.is_finite() {
        return fail("horizon <= 0");
    }

    let ic = &cfg.integrator;
    for (name, v) in [
        ("dt_init", ic.dt_init),
        ("dt_min", ic.dt_min),
        ("cfl_safety", ic.cfl_safety),
        ("gap_floor_frac", ic.gap_floor_frac),
        ("velocity_tol", ic.velocity_tol),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::config(format!("{name} <= 0")));
        }
    }
    if ic.dt_min > ic.dt_init {
        return fail("dt_min > dt_init");
    }
    if ic.cfl_safety > 1.0 {
        return fail("cfl_safety > 1");
    }
    if ic.gap_floor_frac >= 1.0 {
        return fail("gap_floor_frac >= 1");
    }
    if ic.output_times.windows(2).any(|w| !(w[1] > w[0])) {
        return fail("output_times not increasing");
    }
    if ic.output_times.iter().any(|t| !(*t >= 0.0 && *t <= cfg.horizon)) {
        return fail("output_times outside [0,T]");
    }

    let init = &cfg.init;
    init.rho0.check("rho0")?;
    init.rhostar0.check("rhostar0")?;
    init.u0.check("u0")?;
    if !(init.delta > 0.0) {
        return fail("delta <= 0");
    }
    if !(init.delta < init.rhobar) {
        return fail("delta >= rhobar");
    }
    let (rlo, rhi) = init.rho0.range();
    if rhi > init.rhobar {
        return fail("rho0 exceeds rhobar");
    }
    if rlo < init.delta {
        return fail("rho0 below delta");
    }
    if !(init.rhobar < 1.0) {
        return fail("rhobar >= 1");
    }
    let (slo, shi) = init.rhostar0.range();
    if shi > 1.0 {
        return fail("rhostar0 exceeds 1");
    }
    if slo < init.delta {
        return fail("rhostar0 below delta");
    }
    if init.u0.eval(0.0).abs() > BOUNDARY_TOL || init.u0.eval(1.0).abs() > BOUNDARY_TOL {
        return fail("u0 not zero at boundary");
    }
    cfg.force.check(cfg.horizon)?;
    Ok(cfg)
}
