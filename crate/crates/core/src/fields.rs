//! Macroscopic fields built from a particle state.
//!
//! Every field is held exactly as a piecewise description on `[0, 1]`:
//! densities and the volume fraction are piecewise constant, velocities and
//! the strain and interaction fields are continuous and piecewise linear.
//! Norms, integrals and total variation use the exact description; grid
//! sampling is only for export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::dynamics::repulsion_for;
use crate::error::Result;
use crate::macro_solver::PdeState;
use crate::profile::abs_linear_integral;
use crate::state::MicroState;

/// Piecewise field on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PiecewiseField {
    /// Value `values[k]` on `[breaks[k], breaks[k+1])`, the last cell closed.
    Constant { breaks: Vec<f64>, values: Vec<f64> },
    /// Linear interpolant of `(nodes[k], values[k])`. Repeated nodes are allowed.
    Linear { nodes: Vec<f64>, values: Vec<f64> },
}

impl PiecewiseField {
    /// Piecewise constant on `m` uniform cells.
    pub fn uniform_cells(values: &[f64]) -> Self {
        let m = values.len();
        PiecewiseField::Constant {
            breaks: uniform_grid(m),
            values: values.to_vec(),
        }
    }

    /// Piecewise linear through `m + 1` uniform nodes.
    pub fn uniform_nodes(values: &[f64]) -> Self {
        PiecewiseField::Linear {
            nodes: uniform_grid(values.len() - 1),
            values: values.to_vec(),
        }
    }

    fn points(&self) -> &[f64] {
        match self {
            PiecewiseField::Constant { breaks, .. } => breaks,
            PiecewiseField::Linear { nodes, .. } => nodes,
        }
    }

    /// Piece index containing `x`, right-continuous, last piece closed.
    fn piece(&self, x: f64) -> usize {
        let p = self.points();
        let last = p.len() - 2;
        let k = p.partition_point(|&b| b <= x);
        let mut k = k.saturating_sub(1).min(last);
        // skip zero-width pieces to the right
        while k < last && p[k + 1] <= x {
            k += 1;
        }
        k
    }

    /// Value of piece `k` extended linearly to `x`.
    fn piece_value(&self, k: usize, x: f64) -> f64 {
        match self {
            PiecewiseField::Constant { values, .. } => values[k],
            PiecewiseField::Linear { nodes, values } => {
                let (a, b) = (nodes[k], nodes[k + 1]);
                if b <= a {
                    return values[k + 1];
                }
                values[k] + (x - a) / (b - a) * (values[k + 1] - values[k])
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.piece_value(self.piece(x), x)
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.eval(x)).collect()
    }

    /// Values at both ends of the subinterval `[a, b]` inside one piece.
    fn ends_on(&self, a: f64, b: f64) -> (f64, f64) {
        let k = self.piece(0.5 * (a + b));
        (self.piece_value(k, a), self.piece_value(k, b))
    }

    pub fn integral(&self) -> f64 {
        match self {
            PiecewiseField::Constant { breaks, values } => breaks
                .windows(2)
                .zip(values)
                .map(|(w, v)| (w[1] - w[0]) * v)
                .sum(),
            PiecewiseField::Linear { nodes, values } => nodes
                .windows(2)
                .zip(values.windows(2))
                .map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] + v[1]))
                .sum(),
        }
    }

    /// Exact averages over `m` uniform cells.
    pub fn cell_averages(&self, m: usize) -> Vec<f64> {
        let grid = PiecewiseField::uniform_cells(&vec![0.0; m]);
        let mut sums = vec![0.0; m];
        for w in merged_points(self, &grid).windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let cell = ((0.5 * (a + b) * m as f64) as usize).min(m - 1);
            let (fa, fb) = self.ends_on(a, b);
            sums[cell] += 0.5 * (b - a) * (fa + fb);
        }
        sums.iter().map(|s| s * m as f64).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        let values = match self {
            PiecewiseField::Constant { values, .. } | PiecewiseField::Linear { values, .. } => values,
        };
        values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact total variation.
    pub fn total_variation(&self) -> f64 {
        match self {
            PiecewiseField::Constant { values, .. } | PiecewiseField::Linear { values, .. } => {
                total_variation(values)
            }
        }
    }
}

/// Sum of jumps between consecutive values.
pub fn total_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `m + 1` equispaced points on `[0, 1]` with exact endpoints.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
    g[m] = 1.0;
    g
}

/// Sorted union of the breakpoints of two fields, restricted to `[0, 1]`.
fn merged_points(f: &PiecewiseField, g: &PiecewiseField) -> Vec<f64> {
    let mut pts: Vec<f64> = f
        .points()
        .iter()
        .chain(g.points())
        .map(|x| x.clamp(0.0, 1.0))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Visits each subinterval on which both fields are linear.
fn for_each_common_piece(f: &PiecewiseField, g: &PiecewiseField, mut visit: impl FnMut(f64, f64, f64)) {
    for w in merged_points(f, g).windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (fa, fb) = f.ends_on(a, b);
        let (ga, gb) = g.ends_on(a, b);
        visit(b - a, fa - ga, fb - gb);
    }
}

/// Exact `||f - g||_{L1(0,1)}`.
pub fn l1_distance(f: &PiecewiseField, g: &PiecewiseField) -> f64 {
    let mut acc = 0.0;
    for_each_common_piece(f, g, |h, a, b| acc += abs_linear_integral(h, a, b));
    acc
}

/// Exact `||f - g||_{L2(0,1)}`.
pub fn l2_distance(f: &PiecewiseField, g: &PiecewiseField) -> f64 {
    let mut acc = 0.0;
    for_each_common_piece(f, g, |h, a, b| acc += h * (a * a + a * b + b * b) / 3.0);
    acc.sqrt()
}

/// Exact `||f - g||_{L_inf(0,1)}` (one-sided limits included).
pub fn linf_distance(f: &PiecewiseField, g: &PiecewiseField) -> f64 {
    let mut m: f64 = 0.0;
    for_each_common_piece(f, g, |_, a, b| m = m.max(a.abs()).max(b.abs()));
    m
}

/// `rho_i = 2 eps / (d_i + 2 eps)` on `[q_{i-1}, q_i)`.
pub fn density_field(state: &MicroState) -> PiecewiseField {
    let two_eps = 2.0 * state.eps;
    PiecewiseField::Constant {
        breaks: state.q.clone(),
        values: state.gaps().iter().map(|d| two_eps / (d + two_eps)).collect(),
    }
}

/// `rhostar_i = 2 eps / (dstar_i + 2 eps)` on `[q_{i-1}, q_i)`.
pub fn critical_density_field(state: &MicroState) -> PiecewiseField {
    let two_eps = 2.0 * state.eps;
    PiecewiseField::Constant {
        breaks: state.q.clone(),
        values: state.dstar.iter().map(|d| two_eps / (d + two_eps)).collect(),
    }
}

/// Linear interpolant of the particle velocities.
pub fn velocity_field_u(state: &MicroState) -> PiecewiseField {
    PiecewiseField::Linear {
        nodes: state.q.clone(),
        values: state.u.clone(),
    }
}

/// Node pattern `0, eps, q_1 - eps, q_1 + eps, ..., 1 - eps, 1` with values
/// `0, a_1, a_1, a_2, ..., a_N, a_N, 0` where `a` has one entry per gap; used
/// for the strain and interaction fields.
fn gap_valued_field(state: &MicroState, a: &[f64]) -> PiecewiseField {
    let n = state.n();
    let eps = state.eps;
    let mut nodes = Vec::with_capacity(2 * n + 2);
    let mut values = Vec::with_capacity(2 * n + 2);
    nodes.push(0.0);
    values.push(0.0);
    nodes.push(eps);
    values.push(a[0]);
    for i in 1..n {
        nodes.push(state.q[i] - eps);
        values.push(a[i - 1]);
        nodes.push(state.q[i] + eps);
        values.push(a[i]);
    }
    nodes.push(1.0 - eps);
    values.push(a[n - 1]);
    nodes.push(1.0);
    values.push(0.0);
    PiecewiseField::Linear { nodes, values }
}

/// Velocity constant on each particle footprint and linear in the gaps.
pub fn velocity_field_v(state: &MicroState) -> PiecewiseField {
    let n = state.n();
    let eps = state.eps;
    let mut nodes = vec![0.0, eps];
    let mut values = vec![0.0, 0.0];
    for i in 1..n {
        nodes.push(state.q[i] - eps);
        values.push(state.u[i]);
        nodes.push(state.q[i] + eps);
        values.push(state.u[i]);
    }
    nodes.push(1.0 - eps);
    values.push(0.0);
    nodes.push(1.0);
    values.push(0.0);
    PiecewiseField::Linear { nodes, values }
}

/// Strain field from `w_i = (u_i - u_{i-1}) / d_i`; `None` when a gap is
/// closed (inside a cluster the strain is not reconstructed).
pub fn strain_field_w(state: &MicroState) -> Option<PiecewiseField> {
    let d = state.gaps();
    if d.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let w: Vec<f64> = d
        .iter()
        .zip(state.u.windows(2))
        .map(|(di, u)| (u[1] - u[0]) / di)
        .collect();
    Some(gap_valued_field(state, &w))
}

/// Continuous representation of the repulsion magnitudes `G_i`.
pub fn interaction_field_g(state: &MicroState, cfg: &SimConfig) -> PiecewiseField {
    gap_valued_field(state, &repulsion_for(state, cfg))
}

/// Indicator of the particle footprints `[q_i - eps, q_i + eps]`, with half
/// footprints at the walls.
pub fn volume_fraction(state: &MicroState) -> PiecewiseField {
    let n = state.n();
    let eps = state.eps;
    let mut breaks = vec![0.0, eps];
    let mut values = vec![1.0];
    for i in 1..n {
        breaks.push(state.q[i] - eps);
        values.push(0.0);
        breaks.push(state.q[i] + eps);
        values.push(1.0);
    }
    breaks.push(1.0 - eps);
    values.push(0.0);
    breaks.push(1.0);
    values.push(1.0);
    PiecewiseField::Constant { breaks, values }
}

/// Density and velocity fields of a macroscopic solver state.
pub fn pde_fields(state: &PdeState) -> (PiecewiseField, PiecewiseField, PiecewiseField) {
    (
        PiecewiseField::uniform_cells(&state.rho),
        PiecewiseField::uniform_cells(&state.rhostar),
        PiecewiseField::uniform_nodes(&state.u),
    )
}

/// Exact descriptions of every field at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactFields {
    pub time: f64,
    pub rho: PiecewiseField,
    pub rhostar: PiecewiseField,
    pub u: PiecewiseField,
    pub v: PiecewiseField,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<PiecewiseField>,
    #[serde(rename = "G")]
    pub g: PiecewiseField,
    pub chi: PiecewiseField,
}

impl ExactFields {
    pub fn from_state(state: &MicroState, cfg: &SimConfig) -> Self {
        ExactFields {
            time: state.time,
            rho: density_field(state),
            rhostar: critical_density_field(state),
            u: velocity_field_u(state),
            v: velocity_field_v(state),
            w: strain_field_w(state),
            g: interaction_field_g(state, cfg),
            chi: volume_fraction(state),
        }
    }

    pub fn sample(&self, grid: &[f64]) -> MacroProfile {
        MacroProfile {
            time: self.time,
            grid: grid.to_vec(),
            rho: self.rho.sample(grid),
            rhostar: self.rhostar.sample(grid),
            u: self.u.sample(grid),
            v: self.v.sample(grid),
            w: self.w.as_ref().map(|w| w.sample(grid)),
            g: self.g.sample(grid),
            chi: self.chi.sample(grid),
        }
    }
}

/// Field samples on a grid at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroProfile {
    pub time: f64,
    pub grid: Vec<f64>,
    pub rho: Vec<f64>,
    pub rhostar: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    pub chi: Vec<f64>,
}

/// Samples every field of `state` on `grid`.
pub fn sample_profile(state: &MicroState, cfg: &SimConfig, grid: &[f64]) -> MacroProfile {
    ExactFields::from_state(state, cfg).sample(grid)
}

pub const PROFILE_CSV_HEADER: &str = "t,x,rho,rhostar,u,v,w,G,chi";

/// One CSV row per grid point and profile; `w` is left empty when absent.
pub fn write_profiles_csv<W: Write>(out: &mut W, profiles: &[MacroProfile]) -> Result<()> {
    writeln!(out, "{PROFILE_CSV_HEADER}")?;
    for p in profiles {
        for (k, x) in p.grid.iter().enumerate() {
            let w = p.w.as_ref().map(|w| w[k].to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                p.time, x, p.rho[k], p.rhostar[k], p.u[k], p.v[k], w, p.g[k], p.chi[k]
            )?;
        }
    }
    Ok(())
}
