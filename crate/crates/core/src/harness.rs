//! Scenario presets, parameter sweeps and micro-versus-macro comparisons.
//!
//! A scenario runs the particle system for every `(gamma, N)` pair and the
//! limit system once per `gamma`, then compares them on the macroscopic grid.
//! Everything written to disk is a pure function of the [`ScenarioSpec`].

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::advance_clustered;
use crate::config::{validate_config, InitialProfiles, IntegratorControls, SimConfig};
use crate::diagnostics::Diagnostics;
use crate::error::{Error, Result};
use crate::fields::{critical_density_field, density_field, l1_distance, l2_distance, pde_fields};
use crate::fields::{sample_profile, uniform_grid, velocity_field_u, write_profiles_csv, PiecewiseField};
use crate::initializer::{build_initial_state, InitReport};
use crate::integrator::advance;
use crate::macro_solver::{pde_solve, MacroParams, MacroRun, PdeState};
use crate::profile::{ForceSpec, Profile};
use crate::state::Trajectory;

pub const DEFAULT_MU: f64 = 0.03;
pub const COMPARISON_TIME: f64 = 0.2;
pub const PLOT_TIMES: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 1.0];
/// Spacing of recorded particle frames.
pub const MICRO_FRAME_STEP: f64 = 0.01;
/// Spacing of recorded limit-system frames (used for `max rho` time series).
pub const MACRO_FRAME_STEP: f64 = 0.0025;
/// Two times closer than this are the same frame.
const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Case1,
    Case2a,
    Case2b,
    Case3,
    GammaSweep,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Case1,
        Preset::Case2a,
        Preset::Case2b,
        Preset::Case3,
        Preset::GammaSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Case1 => "case1",
            Preset::Case2a => "case2a",
            Preset::Case2b => "case2b",
            Preset::Case3 => "case3",
            Preset::GammaSweep => "gamma-sweep",
        }
    }

    /// Initial densities and velocity.
    pub fn init(self) -> InitialProfiles {
        let u0 = Profile::sine(0.5);
        match self {
            Preset::Case1 | Preset::GammaSweep => InitialProfiles {
                rho0: Profile::constant(0.7),
                rhostar0: Profile::constant(0.7),
                u0,
                delta: 0.5,
                rhobar: 0.7,
            },
            // the critical density is inert without pressure
            Preset::Case2a | Preset::Case2b => InitialProfiles {
                rho0: Profile::constant(0.7),
                rhostar0: Profile::constant(1.0),
                u0,
                delta: 0.5,
                rhobar: 0.7,
            },
            Preset::Case3 => InitialProfiles {
                rho0: Profile::gaussian(0.6, 0.2, 0.5, 0.1),
                rhostar0: Profile::gaussian(0.6, -0.2, 0.5, 0.1),
                u0,
                delta: 0.35,
                rhobar: 0.8,
            },
        }
    }

    pub fn pressure(self) -> bool {
        self != Preset::Case2a
    }

    pub fn gammas(self) -> Vec<f64> {
        match self {
            Preset::GammaSweep => vec![2.0, 5.0, 10.0],
            _ => vec![1.0],
        }
    }

    pub fn horizon(self) -> f64 {
        match self {
            Preset::Case3 => 0.5,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown preset {s}")))
    }
}

/// Everything needed to reproduce a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub preset: Preset,
    pub n_list: Vec<usize>,
    pub cells: usize,
    pub horizon: f64,
    pub gammas: Vec<f64>,
    pub mu: f64,
    pub pressure: bool,
    pub clusters: bool,
    pub seed: u64,
    /// Time at which particle and limit fields are compared.
    pub comparison_time: f64,
    /// Also write sampled field profiles as CSV.
    #[serde(default)]
    pub profiles_csv: bool,
}

impl ScenarioSpec {
    pub fn preset(preset: Preset) -> Self {
        let horizon = preset.horizon();
        ScenarioSpec {
            preset,
            n_list: vec![25, 50, 100, 200],
            cells: 400,
            horizon,
            gammas: preset.gammas(),
            mu: DEFAULT_MU,
            pressure: preset.pressure(),
            clusters: false,
            seed: 0,
            comparison_time: COMPARISON_TIME.min(horizon),
            profiles_csv: false,
        }
    }

    /// Changes the horizon and pulls the comparison time inside it.
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self.comparison_time = COMPARISON_TIME.min(horizon);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("N list not strictly increasing"));
        }
        if self.n_list.first().is_some_and(|&n| n < 2) {
            return Err(Error::config("N < 2"));
        }
        if self.cells < 2 {
            return Err(Error::config("M < 2"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::config("horizon <= 0"));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g >= 1.0) || !g.is_finite()) {
            return Err(Error::config("gamma < 1"));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::config("mu <= 0"));
        }
        if !(self.comparison_time > 0.0 && self.comparison_time <= self.horizon) {
            return Err(Error::config("comparison time outside (0,T]"));
        }
        Ok(())
    }

    fn micro_times(&self) -> Vec<f64> {
        let mut extra = PLOT_TIMES.to_vec();
        extra.push(self.comparison_time);
        frame_grid(MICRO_FRAME_STEP, self.horizon, &extra)
    }

    fn macro_times(&self) -> Vec<f64> {
        let mut extra = PLOT_TIMES.to_vec();
        extra.push(self.comparison_time);
        frame_grid(MACRO_FRAME_STEP, self.horizon, &extra)
    }

    pub fn sim_config(&self, n: usize, gamma: f64) -> Result<SimConfig> {
        validate_config(SimConfig {
            n_particles: n,
            mu: self.mu,
            gamma,
            horizon: self.horizon,
            force: ForceSpec::Zero,
            init: self.preset.init(),
            integrator: IntegratorControls {
                output_times: self.micro_times(),
                ..IntegratorControls::default()
            },
            repulsion: self.pressure,
        })
    }

    pub fn macro_params(&self, gamma: f64) -> MacroParams {
        MacroParams {
            pressure: self.pressure,
            ..MacroParams::new(self.mu, gamma)
        }
    }
}

/// Multiples of `step` in `(0, horizon)` merged with `extra`, sorted, with
/// near-duplicates collapsed onto the `extra` value.
fn frame_grid(step: f64, horizon: f64, extra: &[f64]) -> Vec<f64> {
    let inside = |t: f64| t > TIME_TOL && t < horizon - TIME_TOL;
    let mut times: Vec<f64> = extra.iter().cloned().filter(|t| inside(*t)).collect();
    let count = (horizon / step).ceil() as usize;
    for k in 1..count {
        let t = k as f64 * step;
        if inside(t) && !times.iter().any(|s| (s - t).abs() <= 1e-9) {
            times.push(t);
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= TIME_TOL);
    times
}

/// One particle run with its certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroRun {
    pub n: usize,
    pub gamma: f64,
    pub init_report: InitReport,
    pub diagnostics: Diagnostics,
    pub trajectory: Trajectory,
}

pub fn run_micro(cfg: &SimConfig, clusters: bool) -> Result<MicroRun> {
    let (state, init_report) = build_initial_state(cfg)?;
    let trajectory = if clusters {
        advance_clustered(&state, cfg)?
    } else {
        advance(&state, cfg)?
    };
    Ok(MicroRun {
        n: cfg.n_particles,
        gamma: cfg.gamma,
        init_report,
        diagnostics: Diagnostics::of(&trajectory),
        trajectory,
    })
}

/// Peak of a `max rho` time series and how long it takes to fall back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub t_peak: f64,
    pub peak: f64,
    /// Time from the peak until `max rho <= peak - drop` (None if never).
    pub drop_time: Option<f64>,
}

pub fn peak_and_drop(series: &[(f64, f64)], drop: f64) -> PeakReport {
    let (k, &(t_peak, peak)) = series
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &(f64, f64))>, (k, p)| match best {
            Some((_, b)) if b.1 >= p.1 => best,
            _ => Some((k, p)),
        })
        .expect("non-empty series");
    let drop_time = series[k..]
        .iter()
        .find(|(_, r)| *r <= peak - drop)
        .map(|(t, _)| t - t_peak);
    PeakReport {
        t_peak,
        peak,
        drop_time,
    }
}

/// Persistence of a congested region once `max rho` has reached `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CongestionReport {
    pub threshold: f64,
    pub formed_at: Option<f64>,
    /// Largest drop of `max rho` below its running maximum after formation.
    pub max_decay: f64,
}

pub fn congestion_persistence(series: &[(f64, f64)], threshold: f64) -> CongestionReport {
    let start = series.iter().position(|(_, r)| *r >= threshold);
    let mut max_decay: f64 = 0.0;
    if let Some(k) = start {
        let mut running = series[k].1;
        for &(_, r) in &series[k..] {
            running = running.max(r);
            max_decay = max_decay.max(running - r);
        }
    }
    CongestionReport {
        threshold,
        formed_at: start.map(|k| series[k].0),
        max_decay,
    }
}

/// Number of consecutive pairs that fail to decrease strictly.
pub fn non_monotone_pairs(values: &[f64]) -> usize {
    values.windows(2).filter(|w| !(w[1] < w[0])).count()
}

pub fn strictly_decreasing(values: &[f64]) -> bool {
    non_monotone_pairs(values) == 0
}

/// Threshold for the persistence check of a congested region.
pub const CONGESTION_LEVEL: f64 = 0.9;
/// Drop of `max rho` below its peak that counts as relaxation.
pub const RELAXATION_DROP: f64 = 0.05;

/// One limit-system run with the time series used by the qualitative checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroSummary {
    pub gamma: f64,
    pub cells: usize,
    pub steps: usize,
    pub clamp_count: usize,
    pub mass_drift: f64,
    pub max_rho: f64,
    /// `||rho(T) - mass||_inf`.
    pub final_deviation: f64,
    pub peak: PeakReport,
    pub congestion: CongestionReport,
    pub max_rho_series: Vec<(f64, f64)>,
}

impl MacroSummary {
    pub fn of(gamma: f64, run: &MacroRun) -> Self {
        let series = run.max_rho_series();
        let first = &run.frames[0];
        let last = run.frames.last().expect("frames");
        let level = first.mass();
        MacroSummary {
            gamma,
            cells: run.cells,
            steps: run.steps,
            clamp_count: run.clamp_count,
            mass_drift: run.mass_drift,
            max_rho: run.max_rho,
            final_deviation: last.rho.iter().fold(0.0, |m, r| m.max((r - level).abs())),
            peak: peak_and_drop(&series, RELAXATION_DROP),
            congestion: congestion_persistence(&series, CONGESTION_LEVEL),
            max_rho_series: series,
        }
    }
}

/// The limit-system run a convergence table is measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRun {
    pub cells: usize,
    pub time: f64,
    pub params: MacroParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub eps: f64,
    pub err_rho_l1: f64,
    pub err_rhostar_l1: f64,
    pub err_u_l2: f64,
    pub min_gap_over_eps: f64,
    /// Energy tolerance minus the worst excess; non-negative when the
    /// energy inequality holds.
    pub energy_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub reference: ReferenceRun,
    pub rows: Vec<ConvergenceRow>,
    /// Consecutive pairs where `err_rho_l1` does not decrease.
    pub rho_non_monotone_pairs: usize,
    pub u_decreasing: bool,
    /// At most one non-monotone pair.
    pub pass: bool,
}

pub const CONVERGENCE_CSV_HEADER: &str =
    "N,eps,err_rho_L1,err_rhostar_L1,err_u_L2,min_gap_over_eps,energy_margin";

impl ConvergenceTable {
    pub fn from_rows(reference: ReferenceRun, rows: Vec<ConvergenceRow>) -> Self {
        let rho: Vec<f64> = rows.iter().map(|r| r.err_rho_l1).collect();
        let u: Vec<f64> = rows.iter().map(|r| r.err_u_l2).collect();
        let bad = non_monotone_pairs(&rho);
        ConvergenceTable {
            reference,
            rows,
            rho_non_monotone_pairs: bad,
            u_decreasing: strictly_decreasing(&u),
            pass: bad <= 1,
        }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{CONVERGENCE_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n, r.eps, r.err_rho_l1, r.err_rhostar_l1, r.err_u_l2, r.min_gap_over_eps, r.energy_margin
            )?;
        }
        Ok(())
    }
}

/// Compares one particle run with a limit-system frame. Densities are
/// averaged exactly over the limit-system cells; velocities are compared as
/// continuous fields.
pub fn compare_with_macro(run: &MicroRun, reference: &PdeState) -> Result<ConvergenceRow> {
    let m = reference.cells();
    let state = run.trajectory.frame_at(reference.time)?;
    let (rho, rhostar, u) = pde_fields(reference);
    let on_cells = |f: PiecewiseField| PiecewiseField::uniform_cells(&f.cell_averages(m));
    let d = &run.diagnostics;
    Ok(ConvergenceRow {
        n: run.n,
        eps: state.eps,
        err_rho_l1: l1_distance(&on_cells(density_field(&state)), &rho),
        err_rhostar_l1: l1_distance(&on_cells(critical_density_field(&state)), &rhostar),
        err_u_l2: l2_distance(&velocity_field_u(&state), &u),
        min_gap_over_eps: d.estimates.min_gap_over_eps,
        energy_margin: d.energy.tolerance - d.energy.max_excess,
    })
}

fn table_for(
    spec: &ScenarioSpec,
    gamma: f64,
    runs: &[&MicroRun],
    reference: &MacroRun,
) -> Result<ConvergenceTable> {
    if let Some(n) = runs.iter().map(|r| r.n).max() {
        if reference.cells < 2 * n {
            return Err(Error::config(format!(
                "M = {} < 2 max N = {}",
                reference.cells,
                2 * n
            )));
        }
    }
    let frame = reference.frame_at(spec.comparison_time)?;
    let rows = runs
        .iter()
        .map(|r| compare_with_macro(r, &frame))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::from_rows(
        ReferenceRun {
            cells: reference.cells,
            time: spec.comparison_time,
            params: spec.macro_params(gamma),
        },
        rows,
    ))
}

/// Particle runs for every `N` of the spec compared against a limit-system
/// run on `spec.cells` cells, all at `spec.comparison_time`.
pub fn convergence_study(spec: &ScenarioSpec, gamma: f64) -> Result<ConvergenceTable> {
    spec.validate()?;
    let mut spec = spec.clone();
    spec.horizon = spec.comparison_time;
    let runs = spec
        .n_list
        .par_iter()
        .map(|&n| run_micro(&spec.sim_config(n, gamma)?, spec.clusters))
        .collect::<Result<Vec<_>>>()?;
    let reference = pde_solve(
        &spec.preset.init(),
        &spec.macro_params(gamma),
        spec.cells,
        spec.horizon,
        &[],
    )?;
    table_for(&spec, gamma, &runs.iter().collect::<Vec<_>>(), &reference)
}

/// Overall verdict of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Every particle run carries a passing certificate.
    pub certificates: bool,
    /// No limit-system cell was clamped.
    pub clamp_free: bool,
    /// Every convergence table has at most one non-monotone pair.
    pub convergence: bool,
    /// `max rho` strictly decreasing in gamma (sweeps only).
    pub gamma_monotone: Option<bool>,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.certificates && self.clamp_free && self.convergence && self.gamma_monotone != Some(false)
    }
}

/// In-memory result of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub spec: ScenarioSpec,
    pub micro: Vec<MicroRun>,
    pub macros: Vec<(f64, MacroRun)>,
    pub summaries: Vec<MacroSummary>,
    pub tables: Vec<ConvergenceTable>,
    pub verdict: Verdict,
}

impl ScenarioRun {
    pub fn macro_for(&self, gamma: f64) -> Option<&MacroRun> {
        self.macros.iter().find(|(g, _)| *g == gamma).map(|(_, r)| r)
    }

    /// Particle runs at `gamma`, ascending in `N`.
    pub fn micro_for(&self, gamma: f64) -> Vec<&MicroRun> {
        self.micro.iter().filter(|r| r.gamma == gamma).collect()
    }
}

/// Runs every particle and limit-system computation of the scenario.
pub fn simulate(spec: &ScenarioSpec) -> Result<ScenarioRun> {
    spec.validate()?;
    let configs = spec
        .gammas
        .iter()
        .flat_map(|&g| spec.n_list.iter().map(move |&n| (g, n)))
        .map(|(g, n)| spec.sim_config(n, g))
        .collect::<Result<Vec<_>>>()?;
    let micro = configs
        .par_iter()
        .map(|cfg| run_micro(cfg, spec.clusters))
        .collect::<Result<Vec<_>>>()?;
    let times = spec.macro_times();
    let init = spec.preset.init();
    let macros = spec
        .gammas
        .par_iter()
        .map(|&g| {
            Ok((
                g,
                pde_solve(&init, &spec.macro_params(g), spec.cells, spec.horizon, &times)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries: Vec<MacroSummary> = macros.iter().map(|(g, r)| MacroSummary::of(*g, r)).collect();

    let mut tables = Vec::new();
    for (g, reference) in &macros {
        let runs: Vec<&MicroRun> = micro.iter().filter(|r| r.gamma == *g).collect();
        if !runs.is_empty() {
            tables.push(table_for(spec, *g, &runs, reference)?);
        }
    }
    let peaks: Vec<f64> = summaries.iter().map(|s| s.max_rho).collect();
    let verdict = Verdict {
        certificates: micro.iter().all(|r| r.diagnostics.pass),
        clamp_free: summaries.iter().all(|s| s.clamp_count == 0),
        convergence: tables.iter().all(|t| t.pass),
        gamma_monotone: (spec.gammas.len() > 1).then(|| strictly_decreasing(&peaks)),
    };
    Ok(ScenarioRun {
        spec: spec.clone(),
        micro,
        macros,
        summaries,
        tables,
        verdict,
    })
}

fn tag(gamma: f64) -> String {
    format!("g{gamma}")
}

#[derive(Serialize)]
struct MicroArtifact<'a> {
    seed: u64,
    #[serde(rename = "N")]
    n: usize,
    gamma: f64,
    init_report: &'a InitReport,
    diagnostics: &'a Diagnostics,
    trajectory: &'a Trajectory,
}

#[derive(Serialize)]
struct MacroArtifact<'a> {
    seed: u64,
    summary: &'a MacroSummary,
    params: &'a MacroParams,
    /// Frames at the plot and comparison times.
    frames: Vec<&'a PdeState>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec: &'a ScenarioSpec,
    verdict: &'a Verdict,
    pass: bool,
    certificates: Vec<String>,
    files: &'a [String],
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Writes every artifact of `run` into `dir` and returns the file names,
/// manifest last.
pub fn write_artifacts(run: &ScenarioRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let spec = &run.spec;
    let mut names = Vec::new();

    let jobs: Vec<Result<Vec<String>>> = run
        .micro
        .par_iter()
        .map(|r| {
            let stem = format!("micro_{}_N{}", tag(r.gamma), r.n);
            let mut out = vec![format!("{stem}.json")];
            write_json(
                &dir.join(&out[0]),
                &MicroArtifact {
                    seed: spec.seed,
                    n: r.n,
                    gamma: r.gamma,
                    init_report: &r.init_report,
                    diagnostics: &r.diagnostics,
                    trajectory: &r.trajectory,
                },
            )?;
            if spec.profiles_csv {
                let grid = uniform_grid(spec.cells);
                let profiles: Vec<_> = r
                    .trajectory
                    .frames
                    .iter()
                    .map(|s| sample_profile(s, &r.trajectory.config, &grid))
                    .collect();
                let mut buf = Vec::new();
                write_profiles_csv(&mut buf, &profiles)?;
                out.push(format!("{stem}_profiles.csv"));
                write_file(&dir.join(&out[1]), &buf)?;
            }
            Ok(out)
        })
        .collect();
    for j in jobs {
        names.extend(j?);
    }

    let mut keep = PLOT_TIMES.to_vec();
    keep.push(spec.comparison_time);
    for ((g, r), summary) in run.macros.iter().zip(&run.summaries) {
        let name = format!("macro_{}_M{}.json", tag(*g), r.cells);
        let frames = r
            .frames
            .iter()
            .filter(|f| keep.iter().any(|t| (f.time - t).abs() <= TIME_TOL) || f.time == spec.horizon)
            .collect();
        write_json(
            &dir.join(&name),
            &MacroArtifact {
                seed: spec.seed,
                summary,
                params: &r.params,
                frames,
            },
        )?;
        names.push(name);
    }

    for t in &run.tables {
        let stem = format!("convergence_{}", tag(t.reference.params.gamma));
        write_json(&dir.join(format!("{stem}.json")), t)?;
        let mut buf = Vec::new();
        t.write_csv(&mut buf)?;
        write_file(&dir.join(format!("{stem}.csv")), &buf)?;
        names.push(format!("{stem}.json"));
        names.push(format!("{stem}.csv"));
    }

    names.push("manifest.json".to_string());
    let certificates = run
        .micro
        .iter()
        .map(|r| format!("{} N={}: {}", tag(r.gamma), r.n, r.diagnostics.summary()))
        .collect();
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            spec,
            verdict: &run.verdict,
            pass: run.verdict.pass(),
            certificates,
            files: &names,
        },
    )?;
    Ok(names.into_iter().map(|n| dir.join(n)).collect())
}

/// Simulates the scenario and writes its artifacts.
pub fn run_scenario(spec: &ScenarioSpec, dir: &Path) -> Result<ScenarioRun> {
    let run = simulate(spec)?;
    write_artifacts(&run, dir)?;
    Ok(run)
}

/// Fails with [`Error::TimeOutOfRange`] on the first time outside `[0, horizon]`.
pub fn check_times(times: &[f64], horizon: f64) -> Result<()> {
    match times
        .iter()
        .find(|t| !(**t >= -TIME_TOL && **t <= horizon + TIME_TOL))
    {
        Some(&t) => Err(Error::TimeOutOfRange(t)),
        None => Ok(()),
    }
}

pub const PLOT_CSV_HEADER: &str = "x,rho_micro,rho_macro,rhostar,u";

/// One CSV per requested time and gamma with particle and limit-system
/// densities on the limit-system cells. The particle column uses the finest
/// run and is left empty when the scenario has no particle runs.
pub fn emit_plot_data(run: &ScenarioRun, times: &[f64], dir: &Path) -> Result<Vec<PathBuf>> {
    check_times(times, run.spec.horizon)?;
    if times.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (g, macro_run) in &run.macros {
        let finest = run.micro_for(*g).into_iter().max_by_key(|r| r.n);
        for &t in times {
            let frame = macro_run.frame_at(t)?;
            let m = frame.cells();
            let micro_rho = match finest {
                Some(r) => Some(density_field(&r.trajectory.frame_at(t)?).cell_averages(m)),
                None => None,
            };
            let u = frame.u_centres();
            let mut buf = Vec::new();
            writeln!(buf, "{PLOT_CSV_HEADER}")?;
            for j in 0..m {
                let x = (j as f64 + 0.5) / m as f64;
                let rm = micro_rho.as_ref().map(|v| v[j].to_string()).unwrap_or_default();
                writeln!(buf, "{},{},{},{},{}", x, rm, frame.rho[j], frame.rhostar[j], u[j])?;
            }
            let path = dir.join(format!("plot_{}_t{}.csv", tag(*g), t));
            write_file(&path, &buf)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert!(matches!("case4".parse::<Preset>(), Err(Error::Config(_))));
    }

    #[test]
    fn preset_configs_validate() {
        for p in Preset::ALL {
            let spec = ScenarioSpec::preset(p);
            spec.validate().unwrap();
            for &g in &spec.gammas {
                let cfg = spec.sim_config(50, g).unwrap();
                assert_eq!(cfg.repulsion, p != Preset::Case2a);
            }
        }
    }

    #[test]
    fn frame_grid_keeps_requested_times() {
        let t = frame_grid(0.0025, 1.0, &[0.0, 0.1, 0.2, 0.3, 1.0]);
        assert_eq!(t.len(), 399);
        for want in [0.1, 0.2, 0.3] {
            assert!(t.contains(&want));
        }
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(t.iter().all(|&s| s > 0.0 && s < 1.0));
    }

    #[test]
    fn peak_and_drop_hand_series() {
        let s = [
            (0.0, 0.7),
            (0.1, 0.8),
            (0.2, 0.9),
            (0.3, 0.86),
            (0.4, 0.84),
            (0.5, 0.8),
        ];
        let p = peak_and_drop(&s, 0.05);
        assert_eq!((p.t_peak, p.peak), (0.2, 0.9));
        assert!((p.drop_time.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(peak_and_drop(&s[..3], 0.05).drop_time, None);
    }

    #[test]
    fn congestion_hand_series() {
        let s = [(0.0, 0.7), (0.1, 0.91), (0.2, 0.95), (0.3, 0.945), (0.4, 0.96)];
        let c = congestion_persistence(&s, 0.9);
        assert_eq!(c.formed_at, Some(0.1));
        assert!((c.max_decay - 0.005).abs() < 1e-12);
        assert_eq!(congestion_persistence(&s, 0.99).formed_at, None);
    }

    #[test]
    fn monotone_pair_counting() {
        assert_eq!(non_monotone_pairs(&[4.0, 3.0, 2.0]), 0);
        assert_eq!(non_monotone_pairs(&[4.0, 4.0, 2.0, 3.0]), 2);
        assert!(strictly_decreasing(&[1.0]));
    }
}
