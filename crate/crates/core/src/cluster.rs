//! Initial data with particles in contact. Touching particles form rigid
//! clusters that move with one velocity; the clusters obey the same balance of
//! forces as single particles with the lubrication and repulsion acting only
//! across the gaps between clusters.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::dynamics::repulsion_for;
use crate::error::{Error, Result};
use crate::integrator::{advance_with, gap_dt_bound, Stepper};
use crate::quadrature::simpson;
use crate::state::{MicroState, Trajectory};
use crate::tridiag::SymTridiag;

/// Default contact tolerance on gaps.
pub const CONTACT_TOL: f64 = 1e-12;

/// Consecutive runs of touching particles covering `0..=N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// First particle of each cluster, increasing.
    pub heads: Vec<usize>,
    /// Number of particles in each cluster.
    pub sizes: Vec<usize>,
}

impl ClusterPartition {
    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn tail(&self, k: usize) -> usize {
        self.heads[k] + self.sizes[k] - 1
    }

    /// Every particle belongs to one cluster spanning `[0, 1]`.
    pub fn is_fully_congested(&self) -> bool {
        self.heads.len() == 1
    }

    pub fn all_singletons(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1)
    }

    /// Cluster index of every particle.
    pub fn membership(&self) -> Vec<usize> {
        let mut m = Vec::new();
        for (k, &s) in self.sizes.iter().enumerate() {
            m.extend(std::iter::repeat_n(k, s));
        }
        m
    }

    /// `true` when gap `k` (0-based, between particles k and k+1) lies inside a cluster.
    pub fn is_internal_gap(&self, k: usize) -> bool {
        let c = self.heads.partition_point(|&h| h <= k) - 1;
        k < self.tail(c)
    }

    /// Free (unpinned) cluster indices: neither the first nor the last cluster.
    pub fn free_clusters(&self) -> std::ops::Range<usize> {
        1..self.len().saturating_sub(1).max(1)
    }
}

/// Merges consecutive particles whose gap is at most `tol`.
pub fn detect_clusters(state: &MicroState, tol: f64) -> ClusterPartition {
    let d = state.gaps();
    let mut heads = vec![0];
    let mut sizes = vec![1];
    for (k, &dk) in d.iter().enumerate() {
        if dk <= tol {
            *sizes.last_mut().unwrap() += 1;
        } else {
            heads.push(k + 1);
            sizes.push(1);
        }
    }
    ClusterPartition { heads, sizes }
}

/// Forces of the reduced chain of free clusters.
struct ReducedSystem {
    mass: Vec<f64>,
    a: SymTridiag,
    b: Vec<f64>,
    force: Vec<f64>,
}

fn reduce(state: &MicroState, part: &ClusterPartition, cfg: &SimConfig, t: f64) -> Result<ReducedSystem> {
    let d = state.gaps();
    let eps = state.eps;
    let free = part.free_clusters();
    // gap on the left of cluster k is gap heads[k] (1-based), entry heads[k] - 1
    let left_gap = |k: usize| part.heads[k] - 1;
    for k in 1..part.len() {
        let g = left_gap(k);
        if !(d[g] > 0.0) {
            return Err(Error::Contact {
                index: g + 1,
                gap: d[g],
                time: state.time,
            });
        }
    }
    let g = repulsion_for(state, cfg);
    let inter: Vec<f64> = (1..part.len()).map(|k| d[left_gap(k)]).collect();
    let inter_g: Vec<f64> = (1..part.len()).map(|k| g[left_gap(k)]).collect();
    let m = free.len();
    let diag = (0..m)
        .map(|j| cfg.mu * (1.0 / inter[j] + 1.0 / inter[j + 1]))
        .collect();
    let off = (1..m).map(|j| -cfg.mu / inter[j]).collect();
    let mass = free.clone().map(|k| 2.0 * eps * part.sizes[k] as f64).collect();
    let b = (0..m).map(|j| inter_g[j] - inter_g[j + 1]).collect();
    let force = free
        .map(|k| {
            if cfg.force.is_zero() {
                return 0.0;
            }
            let a = state.q[part.heads[k]] - eps;
            let z = state.q[part.tail(k)] + eps;
            simpson(|x| cfg.force.eval(t, x), a, z, 8 * part.sizes[k])
        })
        .collect();
    Ok(ReducedSystem {
        mass,
        a: SymTridiag::new(diag, off),
        b,
        force,
    })
}

/// Acceleration of each free cluster (clusters `1..M-1`).
pub fn cluster_rhs(state: &MicroState, part: &ClusterPartition, cfg: &SimConfig, t: f64) -> Result<Vec<f64>> {
    let sys = reduce(state, part, cfg, t)?;
    let velocities: Vec<f64> = part.free_clusters().map(|k| state.u[part.heads[k]]).collect();
    let au = sys.a.mul_vec(&velocities);
    Ok((0..velocities.len())
        .map(|j| (sys.b[j] + sys.force[j] - au[j]) / sys.mass[j])
        .collect())
}

/// The semi-implicit scheme applied to the reduced cluster chain.
#[derive(Debug, Clone)]
pub struct ClusterStepper<'a> {
    pub cfg: &'a SimConfig,
    pub partition: ClusterPartition,
    internal: Vec<bool>,
}

impl<'a> ClusterStepper<'a> {
    pub fn new(cfg: &'a SimConfig, partition: ClusterPartition) -> Self {
        let n: usize = partition.sizes.iter().sum::<usize>() - 1;
        let internal = (0..n).map(|k| partition.is_internal_gap(k)).collect();
        ClusterStepper {
            cfg,
            partition,
            internal,
        }
    }
}

impl Stepper for ClusterStepper<'_> {
    fn config(&self) -> &SimConfig {
        self.cfg
    }

    fn step(&self, state: &MicroState, dt: f64) -> Result<MicroState> {
        let part = &self.partition;
        let sys = reduce(state, part, self.cfg, state.time)?;
        let free: Vec<usize> = part.free_clusters().collect();
        let mut next = state.clone();
        next.time = state.time + dt;
        if !free.is_empty() {
            let shift: Vec<f64> = sys.mass.iter().map(|m| m / dt).collect();
            let diag: Vec<f64> = sys.a.diag.iter().zip(&shift).map(|(a, s)| a + s).collect();
            let rhs: Vec<f64> = free
                .iter()
                .enumerate()
                .map(|(j, &k)| shift[j] * state.u[part.heads[k]] + sys.b[j] + sys.force[j])
                .collect();
            let v = SymTridiag::new(diag, sys.a.off.clone())
                .solve(&rhs)
                .ok_or_else(|| Error::LinearSolve("cluster system not positive definite".into()))?;
            for (j, &k) in free.iter().enumerate() {
                for i in part.heads[k]..=part.tail(k) {
                    next.u[i] = v[j];
                    next.q[i] += dt * v[j];
                }
            }
        }
        let (k, dk) = next.min_gap_free(|k| !self.internal[k]);
        if !(dk > 0.0) {
            return Err(Error::Contact {
                index: k + 1,
                gap: dk,
                time: next.time,
            });
        }
        Ok(next)
    }

    fn dt_bound(&self, state: &MicroState) -> f64 {
        let d = state.gaps();
        let g = repulsion_for(state, self.cfg);
        gap_dt_bound(self.cfg, state.eps, &d, &g, &state.u, |k| !self.internal[k])
    }

    fn is_free_gap(&self, k: usize) -> bool {
        !self.internal[k]
    }

    fn check_commit(&self, state: &MicroState) -> Result<()> {
        state.check_structure()?;
        check_cluster_consistent(state, &self.partition)?;
        let (k, dk) = state.min_gap_free(|k| !self.internal[k]);
        if !(dk > 0.0) {
            return Err(Error::Contact {
                index: k + 1,
                gap: dk,
                time: state.time,
            });
        }
        Ok(())
    }

    fn partition(&self) -> Option<ClusterPartition> {
        Some(self.partition.clone())
    }
}

/// Members of every cluster share one velocity; internal gaps are at contact.
pub fn check_cluster_consistent(state: &MicroState, part: &ClusterPartition) -> Result<()> {
    let d = state.gaps();
    for k in 0..part.len() {
        let u0 = state.u[part.heads[k]];
        for i in part.heads[k] + 1..=part.tail(k) {
            if state.u[i] != u0 {
                return Err(Error::config(format!("velocity not uniform in cluster {k}")));
            }
            if d[i - 1].abs() > 1e-10 {
                return Err(Error::config(format!("cluster {k} not in contact at gap {i}")));
            }
        }
    }
    Ok(())
}

/// Moves particles `first..first+count` into contact around their mean
/// position and gives them their mean velocity. Clusters touching a wall are
/// stacked against it with zero velocity.
pub fn impose_contact(state: &MicroState, first: usize, count: usize) -> Result<MicroState> {
    let n = state.n();
    if count < 2 || first + count - 1 > n {
        return Err(Error::config("cluster out of range"));
    }
    let last = first + count - 1;
    let two_eps = 2.0 * state.eps;
    let mut s = state.clone();
    let (start, vel) = if first == 0 {
        (0.0, 0.0)
    } else if last == n {
        (1.0 - two_eps * (count - 1) as f64, 0.0)
    } else {
        let mean_q = state.q[first..=last].iter().sum::<f64>() / count as f64;
        let mean_u = state.u[first..=last].iter().sum::<f64>() / count as f64;
        (mean_q - 0.5 * two_eps * (count - 1) as f64, mean_u)
    };
    for (j, i) in (first..=last).enumerate() {
        if i != 0 && i != n {
            s.q[i] = start + two_eps * j as f64;
            s.u[i] = vel;
        }
    }
    if first > 0 && !(s.q[first] - s.q[first - 1] - two_eps > 0.0) {
        return Err(Error::config("cluster overlaps its left neighbour"));
    }
    if last < n && !(s.q[last + 1] - s.q[last] - two_eps > 0.0) {
        return Err(Error::config("cluster overlaps its right neighbour"));
    }
    Ok(s)
}

/// Detects clusters at `tol = CONTACT_TOL` and integrates the reduced system.
pub fn advance_clustered(state: &MicroState, cfg: &SimConfig) -> Result<Trajectory> {
    let part = detect_clusters(state, CONTACT_TOL);
    check_cluster_consistent(state, &part)?;
    advance_with(&ClusterStepper::new(cfg, part), state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitialProfiles, IntegratorControls};
    use crate::dynamics::rhs;
    use crate::initializer::build_initial_state;
    use crate::integrator::advance;
    use crate::profile::{ForceSpec, Profile};

    fn case1(n: usize, horizon: f64) -> SimConfig {
        SimConfig {
            n_particles: n,
            mu: 0.5,
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

    fn uniform(n: usize, eps: f64) -> MicroState {
        MicroState {
            time: 0.0,
            eps,
            q: (0..=n).map(|i| i as f64 / n as f64).collect(),
            u: vec![0.0; n + 1],
            dstar: vec![0.3 * eps; n],
        }
    }

    #[test]
    fn positive_gaps_give_singletons() {
        let p = detect_clusters(&uniform(8, 0.02), CONTACT_TOL);
        assert_eq!(p.heads, (0..=8).collect::<Vec<_>>());
        assert!(p.all_singletons());
    }

    #[test]
    fn contact_run_is_merged() {
        let s = impose_contact(&uniform(8, 0.02), 2, 3).unwrap();
        let p = detect_clusters(&s, CONTACT_TOL);
        assert_eq!(p.heads, vec![0, 1, 2, 5, 6, 7, 8]);
        assert_eq!(p.sizes, vec![1, 1, 3, 1, 1, 1, 1]);
        assert!(p.is_internal_gap(2) && p.is_internal_gap(3) && !p.is_internal_gap(4));
    }

    #[test]
    fn packed_chain_is_one_cluster() {
        let n = 4;
        let s = MicroState {
            time: 0.0,
            eps: 0.125,
            q: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            u: vec![0.0; n + 1],
            dstar: vec![0.0; n],
        };
        let p = detect_clusters(&s, CONTACT_TOL);
        assert!(p.is_fully_congested());
        assert_eq!(p.sizes, vec![5]);
    }

    #[test]
    fn singletons_reduce_to_plain_rhs() {
        let cfg = case1(12, 1.0);
        let (s, _) = build_initial_state(&cfg).unwrap();
        let p = detect_clusters(&s, CONTACT_TOL);
        let a = cluster_rhs(&s, &p, &cfg, 0.0).unwrap();
        let b = rhs(&s, &cfg, 0.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn symmetric_cluster_is_at_rest() {
        let cfg = case1(9, 1.0);
        let s = impose_contact(&uniform(9, 0.02), 3, 4).unwrap();
        let p = detect_clusters(&s, CONTACT_TOL);
        let a = cluster_rhs(&s, &p, &cfg, 0.0).unwrap();
        let k = p.heads.iter().position(|&h| h == 3).unwrap();
        assert!(a[k - 1].abs() < 1e-10, "{}", a[k - 1]);
    }

    #[test]
    fn two_clusters_hand_formula() {
        // particles 0..=5, clusters {0}, {1,2}, {3,4}, {5}
        let eps = 0.05;
        let s = MicroState {
            time: 0.0,
            eps,
            q: vec![0.0, 0.2, 0.3, 0.6, 0.7, 1.0],
            u: vec![0.0, 0.4, 0.4, -0.2, -0.2, 0.0],
            dstar: vec![0.02; 5],
        };
        let mut cfg = case1(5, 1.0);
        cfg.mu = 0.7;
        cfg.gamma = 2.0;
        let p = detect_clusters(&s, CONTACT_TOL);
        assert_eq!(p.sizes, vec![1, 2, 2, 1]);
        let a = cluster_rhs(&s, &p, &cfg, 0.0).unwrap();
        // free gaps: d1 = 0.1, d3 = 0.2, d5 = 0.2
        let g = |d: f64| ((0.02f64 + 0.1) / (d + 0.1)).powi(2);
        let (d1, d3, d5) = (0.1, 0.2, 0.2);
        let (u1, u2) = (0.4, -0.2);
        let f1 = 0.7 * ((u2 - u1) / d3 - u1 / d1) + g(d1) - g(d3);
        let f2 = 0.7 * ((0.0 - u2) / d5 - (u2 - u1) / d3) + g(d3) - g(d5);
        let m = 2.0 * 2.0 * eps;
        assert!((a[0] - f1 / m).abs() < 1e-12);
        assert!((a[1] - f2 / m).abs() < 1e-12);
    }

    #[test]
    fn cluster_step_matches_rk4_oracle() {
        // three free clusters of sizes 2, 1, 3
        let eps = 0.04;
        let mut s = uniform(9, eps);
        s.q = vec![0.0, 0.13, 0.21, 0.37, 0.55, 0.63, 0.71, 0.79, 0.9, 1.0];
        s.u = vec![0.0, 0.3, 0.3, -0.1, 0.2, 0.2, 0.2, 0.0, 0.0, 0.0];
        s.q[7] = s.q[6] + 2.0 * eps;
        s.q[5] = s.q[4] + 2.0 * eps;
        s.q[6] = s.q[5] + 2.0 * eps;
        s.q[2] = s.q[1] + 2.0 * eps;
        s.u[7] = 0.2;
        let p = detect_clusters(&s, CONTACT_TOL);
        assert_eq!(p.sizes, vec![1, 2, 1, 4, 1, 1]);
        let mut cfg = case1(9, 1.0);
        cfg.mu = 0.03;
        cfg.force = ForceSpec::Constant { value: 0.3 };
        let stepper = ClusterStepper::new(&cfg, p.clone());
        let semi = stepper.step(&s, 1e-6).unwrap();

        let free: Vec<usize> = p.free_clusters().collect();
        let apply = |st: &MicroState, v: &[f64], dq: &[f64], h: f64| {
            let mut t = st.clone();
            for (j, &k) in free.iter().enumerate() {
                for i in p.heads[k]..=p.tail(k) {
                    t.q[i] += h * dq[j];
                    t.u[i] = v[j];
                }
            }
            t
        };
        let mut x = s.clone();
        let h = 1e-9;
        for _ in 0..1000 {
            let v0: Vec<f64> = free.iter().map(|&k| x.u[p.heads[k]]).collect();
            let k1 = cluster_rhs(&x, &p, &cfg, 0.0).unwrap();
            let v1: Vec<f64> = v0.iter().zip(&k1).map(|(v, a)| v + 0.5 * h * a).collect();
            let x1 = apply(&x, &v1, &v0, 0.5 * h);
            let k2 = cluster_rhs(&x1, &p, &cfg, 0.0).unwrap();
            let v2: Vec<f64> = v0.iter().zip(&k2).map(|(v, a)| v + 0.5 * h * a).collect();
            let x2 = apply(&x, &v2, &v1, 0.5 * h);
            let k3 = cluster_rhs(&x2, &p, &cfg, 0.0).unwrap();
            let v3: Vec<f64> = v0.iter().zip(&k3).map(|(v, a)| v + h * a).collect();
            let x3 = apply(&x, &v3, &v2, h);
            let k4 = cluster_rhs(&x3, &p, &cfg, 0.0).unwrap();
            let dv: Vec<f64> = (0..free.len())
                .map(|j| (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0)
                .collect();
            let dq: Vec<f64> = (0..free.len())
                .map(|j| (v0[j] + 2.0 * v1[j] + 2.0 * v2[j] + v3[j]) / 6.0)
                .collect();
            let vn: Vec<f64> = v0.iter().zip(&dv).map(|(v, a)| v + h * a).collect();
            x = apply(&x, &vn, &dq, h);
        }
        for i in 0..=9 {
            assert!((semi.u[i] - x.u[i]).abs() < 1e-8, "particle {i}");
        }
    }

    #[test]
    fn cluster_persists_and_is_rigid() {
        let mut cfg = case1(30, 0.3);
        cfg.integrator.output_times = vec![0.1, 0.2];
        let (s0, _) = build_initial_state(&cfg).unwrap();
        let s = impose_contact(&s0, 10, 2).unwrap();
        let traj = advance_clustered(&s, &cfg).unwrap();
        let p = traj.clusters.clone().unwrap();
        for f in &traj.frames {
            assert_eq!(detect_clusters(f, CONTACT_TOL), p);
            assert_eq!(f.u[10], f.u[11]);
            assert!(f.gaps()[10].abs() < 1e-14);
        }
    }

    #[test]
    fn all_singletons_match_plain_integrator() {
        let mut cfg = case1(30, 0.2);
        cfg.integrator.output_times = vec![0.05, 0.1];
        let (s0, _) = build_initial_state(&cfg).unwrap();
        let plain = advance(&s0, &cfg).unwrap();
        let clustered = advance_clustered(&s0, &cfg).unwrap();
        assert_eq!(plain.frames.len(), clustered.frames.len());
        for (a, b) in plain.frames.iter().zip(&clustered.frames) {
            for i in 0..=30 {
                assert!((a.q[i] - b.q[i]).abs() < 1e-12);
                assert!((a.u[i] - b.u[i]).abs() < 1e-12);
            }
        }
    }
}
