use std::fs;

use suspension_core::error::Error;
use suspension_core::harness::*;
use suspension_core::macro_solver::{pde_solve, PdeState};

fn small(preset: Preset) -> ScenarioSpec {
    let mut spec = ScenarioSpec::preset(preset);
    spec.n_list = vec![25, 50];
    spec.cells = 100;
    spec
}

#[test]
fn constant_critical_density_is_matched_exactly() {
    let mut spec = ScenarioSpec::preset(Preset::Case1).with_horizon(0.2);
    spec.cells = 400;
    let table = convergence_study(&spec, 1.0).unwrap();
    assert_eq!(table.rows.len(), 4);
    for r in &table.rows {
        assert!(r.err_rhostar_l1 <= 1e-10, "N={} {}", r.n, r.err_rhostar_l1);
        assert!(r.err_rho_l1.is_finite() && r.err_u_l2.is_finite());
        assert!(r.energy_margin >= 0.0);
    }
    assert!(table.rows.windows(2).all(|w| w[1].n > w[0].n));
    assert!(table.pass);
}

#[test]
fn equal_resolution_initial_error_is_bounded() {
    let spec = ScenarioSpec::preset(Preset::Case3);
    let init = spec.preset.init();
    for n in [50, 100] {
        let run = run_micro(&spec.sim_config(n, 1.0).unwrap(), false).unwrap();
        let reference = PdeState::from_profiles(&init, n);
        let row = compare_with_macro(&run, &reference).unwrap();
        let bound = init.rho0.lipschitz() * 2.0 * row.eps / init.delta;
        assert!(row.err_rho_l1 <= bound, "N={n}: {} > {bound}", row.err_rho_l1);
    }
}

#[test]
fn study_requires_fine_reference() {
    let mut spec = small(Preset::Case1).with_horizon(0.1);
    spec.cells = 60;
    assert!(matches!(convergence_study(&spec, 1.0), Err(Error::Config(_))));
}

#[test]
fn unsorted_particle_counts_are_rejected() {
    let mut spec = small(Preset::Case1);
    spec.n_list = vec![50, 25];
    assert!(matches!(simulate(&spec), Err(Error::Config(_))));
}

#[test]
fn pressureless_preset_drops_pressure_everywhere() {
    let run = simulate(&small(Preset::Case2a).with_horizon(0.2)).unwrap();
    assert!(!run.spec.pressure);
    assert!(run.micro.iter().all(|r| !r.trajectory.config.repulsion));
    assert!(run.macros.iter().all(|(_, m)| !m.params.pressure));
    assert!(run.verdict.pass());
}

#[test]
fn gamma_sweep_reports_monotone_peaks() {
    let mut spec = small(Preset::GammaSweep).with_horizon(0.3);
    spec.n_list = vec![];
    spec.cells = 200;
    let run = simulate(&spec).unwrap();
    assert_eq!(run.macros.len(), 3);
    assert!(run.tables.is_empty());
    assert_eq!(run.verdict.gamma_monotone, Some(true));
}

#[test]
fn plot_bundle_has_one_file_per_time() {
    let run = simulate(&small(Preset::Case1)).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let files = emit_plot_data(&run, &[0.0, 0.1, 0.2, 0.3, 1.0], tmp.path()).unwrap();
    assert_eq!(files.len(), 5);
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(PLOT_CSV_HEADER));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 100);
        assert!(rows
            .iter()
            .all(|r| r.split(',').count() == 5 && !r.contains(",,")));
    }
    // the t = 0 frame holds the constant initial density
    let first = fs::read_to_string(&files[0]).unwrap();
    for row in first.lines().skip(1) {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[1] - 0.7).abs() < 1e-10 && (cols[2] - 0.7).abs() < 1e-12);
    }
}

#[test]
fn plot_times_are_checked() {
    let run = simulate(&small(Preset::Case1).with_horizon(0.2)).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    assert!(emit_plot_data(&run, &[], tmp.path()).unwrap().is_empty());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
    let err = emit_plot_data(&run, &[0.1, 0.5], tmp.path()).unwrap_err();
    assert!(matches!(err, Error::TimeOutOfRange(t) if t == 0.5));
    assert_eq!(err.to_string(), "time out of range: 0.5");
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let mut spec = small(Preset::Case3).with_horizon(0.1);
    spec.seed = 7;
    spec.profiles_csv = true;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_scenario(&spec, a.path()).unwrap();
    let files = write_artifacts(&simulate(&spec).unwrap(), b.path()).unwrap();
    assert!(files.last().unwrap().ends_with("manifest.json"));
    for f in &files {
        let name = f.file_name().unwrap();
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(f).unwrap(),
            "{name:?}"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec"]["seed"], 7);
    assert_eq!(manifest["pass"], true);
}

#[test]
fn macro_summary_matches_series() {
    let init = Preset::Case1.init();
    let spec = small(Preset::Case1);
    let times: Vec<f64> = (1..40).map(|k| k as f64 * 0.01).collect();
    let run = pde_solve(&init, &spec.macro_params(1.0), 100, 0.4, &times).unwrap();
    let s = MacroSummary::of(1.0, &run);
    let series = run.max_rho_series();
    let peak = series.iter().cloned().fold(0.0, |m: f64, (_, r)| m.max(r));
    assert_eq!(s.peak.peak, peak);
    assert!(s.max_rho >= peak);
    assert!(s.mass_drift < 1e-12);
}
