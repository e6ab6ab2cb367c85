//! Runtime certificates for a trajectory: the discrete energy inequality,
//! distance and increment bounds, the velocity maximum principle and the
//! exact invariants of the particle system.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::dynamics::repulsion_for;
use crate::fields::{density_field, total_variation};
use crate::state::{MicroState, Trajectory};

/// Relative part of the energy tolerance.
pub const ENERGY_REL_TOL: f64 = 1e-8;

/// `eps sum u_i^2`.
pub fn kinetic_energy(state: &MicroState) -> f64 {
    state.eps * state.u.iter().map(|v| v * v).sum::<f64>()
}

/// Repulsion potential: `sum (d_i + 2 eps) G_i / (gamma - 1)` for `gamma > 1`
/// and `sum (dstar_i + 2 eps) ln((dstar_i + 2 eps) / (d_i + 2 eps))` for
/// `gamma = 1`. Zero when repulsion is switched off.
pub fn potential_energy(state: &MicroState, cfg: &SimConfig) -> f64 {
    if !cfg.repulsion {
        return 0.0;
    }
    let two_eps = 2.0 * state.eps;
    let d = state.gaps();
    if cfg.gamma == 1.0 {
        d.iter()
            .zip(&state.dstar)
            .map(|(di, s)| (s + two_eps) * ((s + two_eps) / (di + two_eps)).ln())
            .sum()
    } else {
        let g = repulsion_for(state, cfg);
        d.iter().zip(&g).map(|(di, gi)| (di + two_eps) * gi).sum::<f64>() / (cfg.gamma - 1.0)
    }
}

pub fn total_energy(state: &MicroState, cfg: &SimConfig) -> f64 {
    kinetic_energy(state) + potential_energy(state, cfg)
}

/// `D_N = sum d_i`.
pub fn gap_sum(state: &MicroState) -> f64 {
    state.gaps().iter().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub t: f64,
    /// Kinetic plus potential energy.
    pub energy: f64,
    pub dissipation: f64,
    pub source_budget: f64,
    /// `energy + dissipation - (E0 + source_budget)`; must stay below the tolerance.
    pub excess: f64,
}

/// The energy inequality along a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub e0: f64,
    pub kinetic0: f64,
    pub potential0: f64,
    pub gap_sum0: f64,
    /// `1e-8 |E0| + |E0| max dt`.
    pub tolerance: f64,
    pub max_excess: f64,
    pub dissipation_total: f64,
    pub dissipation_monotone: bool,
    /// `true` when the logarithmic potential of the `gamma = 1` case is used.
    pub log_potential: bool,
    pub points: Vec<EnergyPoint>,
    pub pass: bool,
}

/// Checks `K + P + D(t) <= E0 + (1/mu) ||f||^2_{L2 L1} D_N(0) + tol` at every
/// accepted step.
pub fn energy_check(traj: &Trajectory) -> EnergyLedger {
    let cfg = &traj.config;
    let s0 = traj.initial();
    let kinetic0 = kinetic_energy(s0);
    let potential0 = potential_energy(s0, cfg);
    let e0 = kinetic0 + potential0;
    let gap_sum0 = gap_sum(s0);
    let tolerance = ENERGY_REL_TOL * e0.abs() + e0.abs() * traj.max_dt();

    let mut points = vec![EnergyPoint {
        t: s0.time,
        energy: e0,
        dissipation: 0.0,
        source_budget: 0.0,
        excess: 0.0,
    }];
    let mut dissipation = 0.0;
    let mut f2 = 0.0;
    let mut monotone = true;
    let mut max_excess: f64 = 0.0;
    for rec in &traj.step_log {
        if !(rec.dissipation >= 0.0) {
            monotone = false;
        }
        dissipation += rec.dissipation;
        if !cfg.force.is_zero() {
            let a = cfg.force.l1_norm(rec.t);
            let b = cfg.force.l1_norm(rec.t + rec.dt);
            f2 += 0.5 * rec.dt * (a * a + b * b);
        }
        let source_budget = f2 * gap_sum0 / cfg.mu;
        let excess = rec.energy + dissipation - (e0 + source_budget);
        max_excess = max_excess.max(excess);
        points.push(EnergyPoint {
            t: rec.t + rec.dt,
            energy: rec.energy,
            dissipation,
            source_budget,
            excess,
        });
    }
    EnergyLedger {
        e0,
        kinetic0,
        potential0,
        gap_sum0,
        tolerance,
        max_excess,
        dissipation_total: dissipation,
        dissipation_monotone: monotone,
        log_potential: cfg.repulsion && cfg.gamma == 1.0,
        points,
        pass: monotone && max_excess <= tolerance,
    }
}

/// Empirical constants of the distance, increment, velocity and BV estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub min_gap_over_eps: f64,
    pub max_gap_over_eps: f64,
    /// `max |d_{i+1} - d_i|` over frames, and the same divided by `eps^2`.
    pub max_increment: f64,
    pub max_increment_over_eps2: f64,
    pub max_abs_velocity: f64,
    pub max_abs_dxg: f64,
    pub tv_rho_max: f64,
    pub tv_rhostar_max: f64,
}

/// Scans every frame (and the step log for gap and velocity extremes).
pub fn distance_certificate(traj: &Trajectory) -> EstimateReport {
    let eps = traj.initial().eps;
    let internal = internal_gaps(traj);
    let mut min_gap = f64::INFINITY;
    let mut max_gap: f64 = 0.0;
    let mut max_inc: f64 = 0.0;
    let mut max_u: f64 = 0.0;
    let mut tv_rho: f64 = 0.0;
    let mut tv_rs: f64 = 0.0;
    let two_eps = 2.0 * eps;
    for f in &traj.frames {
        let d = f.gaps();
        for (k, &dk) in d.iter().enumerate() {
            if internal[k] {
                continue;
            }
            min_gap = min_gap.min(dk);
            max_gap = max_gap.max(dk);
            if k + 1 < d.len() && !internal[k + 1] {
                max_inc = max_inc.max((d[k + 1] - dk).abs());
            }
        }
        max_u = max_u.max(f.max_abs_velocity());
        let rho: Vec<f64> = d.iter().map(|di| two_eps / (di + two_eps)).collect();
        let rs: Vec<f64> = f.dstar.iter().map(|s| two_eps / (s + two_eps)).collect();
        tv_rho = tv_rho.max(total_variation(&rho));
        tv_rs = tv_rs.max(total_variation(&rs));
    }
    let mut max_dxg: f64 = 0.0;
    for rec in &traj.step_log {
        min_gap = min_gap.min(rec.min_gap);
        max_u = max_u.max(rec.max_abs_u);
        max_dxg = max_dxg.max(rec.max_dxg);
    }
    EstimateReport {
        min_gap_over_eps: min_gap / eps,
        max_gap_over_eps: max_gap / eps,
        max_increment: max_inc,
        max_increment_over_eps2: max_inc / (eps * eps),
        max_abs_velocity: max_u,
        max_abs_dxg: max_dxg,
        tv_rho_max: tv_rho,
        tv_rhostar_max: tv_rs,
    }
}

fn internal_gaps(traj: &Trajectory) -> Vec<bool> {
    let n = traj.initial().n();
    match &traj.clusters {
        Some(p) => (0..n).map(|k| p.is_internal_gap(k)).collect(),
        None => vec![false; n],
    }
}

/// Maximum principle for the velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityCertificate {
    /// Extremes of the initial velocities, boundary zeros included.
    pub u0_min: f64,
    pub u0_max: f64,
    /// `int ||dx G||_inf + int ||f||_inf` along the run.
    pub bound: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub pass: bool,
}

pub fn velocity_certificate(traj: &Trajectory) -> VelocityCertificate {
    let u0 = &traj.initial().u;
    let u0_min = u0.iter().cloned().fold(f64::INFINITY, f64::min);
    let u0_max = u0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bound: f64 = traj.step_log.iter().map(|r| r.dt * (r.max_dxg + r.max_f)).sum();
    let mut u_min = u0_min;
    let mut u_max = u0_max;
    for f in &traj.frames {
        for &v in &f.u {
            u_min = u_min.min(v);
            u_max = u_max.max(v);
        }
    }
    let step_peak = traj.step_log.iter().fold(0.0, |m: f64, r| m.max(r.max_abs_u));
    let slack = 1e-12 * (1.0 + u0_max.abs().max(u0_min.abs()));
    let pass = u_min >= u0_min - bound - slack
        && u_max <= u0_max + bound + slack
        && step_peak <= u0_max.abs().max(u0_min.abs()) + bound + slack;
    VelocityCertificate {
        u0_min,
        u0_max,
        bound,
        u_min,
        u_max,
        pass,
    }
}

/// Drift of the quantities that are exactly conserved by the particle system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// `max_t |int rho^eps - M0|`.
    pub mass_drift: f64,
    /// `max_t |D_N(t) - D_N(0)|`.
    pub gap_sum_drift: f64,
    /// `max_t` sup distance between the sorted critical densities and their initial values.
    pub rhostar_drift: f64,
    pub pass: bool,
}

/// Absolute drift allowed on the exact invariants.
pub const INVARIANT_TOL: f64 = 1e-10;

pub fn invariant_check(traj: &Trajectory) -> InvariantReport {
    let s0 = traj.initial();
    let mass0 = 2.0 * s0.eps * s0.n() as f64;
    let d0 = gap_sum(s0);
    let sorted = |s: &MicroState| {
        let mut v: Vec<f64> = s.dstar.iter().map(|d| 2.0 * s.eps / (d + 2.0 * s.eps)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let rs0 = sorted(s0);
    let mut mass_drift: f64 = 0.0;
    let mut gap_drift: f64 = 0.0;
    let mut rs_drift: f64 = 0.0;
    for f in &traj.frames {
        mass_drift = mass_drift.max((density_field(f).integral() - mass0).abs());
        gap_drift = gap_drift.max((gap_sum(f) - d0).abs());
        let rs = sorted(f);
        rs_drift = rs
            .iter()
            .zip(&rs0)
            .fold(rs_drift, |m, (a, b)| m.max((a - b).abs()));
    }
    InvariantReport {
        mass_drift,
        gap_sum_drift: gap_drift,
        rhostar_drift: rs_drift,
        pass: mass_drift <= INVARIANT_TOL && gap_drift <= INVARIANT_TOL && rs_drift <= INVARIANT_TOL,
    }
}

/// All certificates of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub energy: EnergyLedger,
    pub estimates: EstimateReport,
    pub velocity: VelocityCertificate,
    pub invariants: InvariantReport,
    pub contact_free: bool,
    pub pass: bool,
}

impl Diagnostics {
    pub fn of(traj: &Trajectory) -> Self {
        let energy = energy_check(traj);
        let estimates = distance_certificate(traj);
        let velocity = velocity_certificate(traj);
        let invariants = invariant_check(traj);
        let contact_free = estimates.min_gap_over_eps > 0.0;
        let pass = energy.pass && velocity.pass && invariants.pass && contact_free;
        Diagnostics {
            energy,
            estimates,
            velocity,
            invariants,
            contact_free,
            pass,
        }
    }

    /// One-line pass/fail summary.
    pub fn summary(&self) -> String {
        let flag = |b: bool| if b { "ok" } else { "FAIL" };
        format!(
            "energy {} (excess {:.3e} <= tol {:.3e}) | gaps {} (min d/eps {:.4}, max d/eps {:.4}) | velocity {} (max|u| {:.4}, bound {:.4}) | invariants {} (mass {:.1e}, D_N {:.1e}, rho* {:.1e})",
            flag(self.energy.pass),
            self.energy.max_excess,
            self.energy.tolerance,
            flag(self.contact_free),
            self.estimates.min_gap_over_eps,
            self.estimates.max_gap_over_eps,
            flag(self.velocity.pass),
            self.estimates.max_abs_velocity,
            self.velocity.bound,
            flag(self.invariants.pass),
            self.invariants.mass_drift,
            self.invariants.gap_sum_drift,
            self.invariants.rhostar_drift,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitialProfiles, IntegratorControls};
    use crate::dynamics::repulsion;
    use crate::initializer::build_initial_state;
    use crate::integrator::advance;
    use crate::profile::{ForceSpec, Profile};
    use crate::state::StepRecord;

    fn case1(n: usize, horizon: f64) -> SimConfig {
        SimConfig {
            n_particles: n,
            mu: 1.0,
            gamma: 1.0,
            horizon,
            force: ForceSpec::Zero,
            init: InitialProfiles {
                rho0: Profile::constant(0.7),
                rhostar0: Profile::constant(0.7),
                u0: Profile::sine(0.5),
                delta: 0.5,
                rhobar: 0.7,
            },
            integrator: IntegratorControls::default(),
            repulsion: true,
        }
    }

    #[test]
    fn log_potential_derivative_matches_force() {
        // d/dt P = -sum G_i d'_i, checked by central differences in one gap
        let cfg = case1(6, 1.0);
        let (mut s, _) = build_initial_state(&cfg).unwrap();
        s.q[3] += 0.01;
        let h = 1e-7;
        let mut plus = s.clone();
        plus.q[3] += h;
        let mut minus = s.clone();
        minus.q[3] -= h;
        let dp = (potential_energy(&plus, &cfg) - potential_energy(&minus, &cfg)) / (2.0 * h);
        let g = repulsion(&s, 1.0);
        // moving q_3 lengthens gap 3 and shortens gap 4
        let expect = -(g[2] - g[3]);
        assert!((dp - expect).abs() < 1e-6, "{dp} vs {expect}");
    }

    #[test]
    fn power_potential_derivative_matches_force() {
        let mut cfg = case1(6, 1.0);
        cfg.gamma = 3.0;
        let (mut s, _) = build_initial_state(&cfg).unwrap();
        s.q[2] -= 0.01;
        let h = 1e-7;
        let mut plus = s.clone();
        plus.q[2] += h;
        let mut minus = s.clone();
        minus.q[2] -= h;
        let dp = (potential_energy(&plus, &cfg) - potential_energy(&minus, &cfg)) / (2.0 * h);
        let g = repulsion(&s, 3.0);
        assert!((dp + (g[1] - g[2])).abs() < 1e-5);
    }

    #[test]
    fn equilibrium_ledger_is_flat() {
        let mut cfg = case1(10, 0.2);
        cfg.init.u0 = Profile::constant(0.0);
        let (s, _) = build_initial_state(&cfg).unwrap();
        let traj = advance(&s, &cfg).unwrap();
        let ledger = energy_check(&traj);
        assert!(ledger.pass);
        for p in &ledger.points {
            assert!((p.energy - ledger.e0).abs() < 1e-12);
            assert!(p.dissipation < 1e-20);
        }
    }

    #[test]
    fn case1_energy_inequality_holds() {
        let (s, _) = build_initial_state(&case1(50, 0.5)).unwrap();
        let traj = advance(&s, &case1(50, 0.5)).unwrap();
        let ledger = energy_check(&traj);
        assert!(
            ledger.pass,
            "excess {} tol {}",
            ledger.max_excess, ledger.tolerance
        );
        assert!(ledger.log_potential);
        assert!(ledger.dissipation_total > 0.0);
    }

    #[test]
    fn constant_force_source_budget() {
        let mut cfg = case1(20, 0.2);
        cfg.force = ForceSpec::Constant { value: 0.5 };
        let (s, _) = build_initial_state(&cfg).unwrap();
        let traj = advance(&s, &cfg).unwrap();
        let ledger = energy_check(&traj);
        let last = ledger.points.last().unwrap();
        let expect = 0.25 * 0.2 * ledger.gap_sum0 / cfg.mu;
        assert!((last.source_budget - expect).abs() < 1e-12);
        assert!(ledger.pass);
    }

    #[test]
    fn case1_initial_ratios() {
        let cfg = case1(40, 0.1);
        let (s, _) = build_initial_state(&cfg).unwrap();
        let traj = Trajectory {
            config: cfg,
            frames: vec![s],
            step_log: Vec::<StepRecord>::new(),
            clusters: None,
        };
        let r = distance_certificate(&traj);
        assert!((r.min_gap_over_eps - 6.0 / 7.0).abs() < 1e-9);
        assert!((r.max_gap_over_eps - 6.0 / 7.0).abs() < 1e-9);
        assert!(r.max_increment < 1e-12);
    }

    #[test]
    fn velocity_bound_holds_with_and_without_forcing() {
        for value in [0.0, 5.0] {
            let mut cfg = case1(30, 0.2);
            cfg.force = ForceSpec::Constant { value };
            let (s, _) = build_initial_state(&cfg).unwrap();
            let traj = advance(&s, &cfg).unwrap();
            let c = velocity_certificate(&traj);
            assert!(c.pass, "{c:?}");
            assert!(c.u0_max <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn resting_state_has_zero_velocity_bound() {
        let mut cfg = case1(10, 0.1);
        cfg.init.u0 = Profile::constant(0.0);
        let (s, _) = build_initial_state(&cfg).unwrap();
        let traj = advance(&s, &cfg).unwrap();
        let c = velocity_certificate(&traj);
        assert!(c.pass && c.bound < 1e-9 && c.u_max.abs() < 1e-12);
    }

    #[test]
    fn invariants_hold_on_a_run() {
        let (s, _) = build_initial_state(&case1(40, 0.2)).unwrap();
        let traj = advance(&s, &case1(40, 0.2)).unwrap();
        let inv = invariant_check(&traj);
        assert!(inv.pass, "{inv:?}");
        let d = Diagnostics::of(&traj);
        assert!(d.pass, "{}", d.summary());
    }
}
