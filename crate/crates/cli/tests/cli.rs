use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use suspension_core::harness::{Preset, ScenarioSpec};

fn suspension(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_suspension"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_trajectories_macro_run_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = suspension(
        &[
            "run",
            "case1",
            "--N",
            "50,100,200",
            "--M",
            "400",
            "--T",
            "0.5",
            "--out",
            "o",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().last() == Some("PASS"));
    let dir = tmp.path().join("o");
    for f in [
        "micro_g1_N50.json",
        "micro_g1_N100.json",
        "micro_g1_N200.json",
        "macro_g1_M400.json",
        "convergence_g1.csv",
        "convergence_g1.json",
        "manifest.json",
    ] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(dir.join("convergence_g1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let micro: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("micro_g1_N50.json")).unwrap()).unwrap();
    assert_eq!(micro["diagnostics"]["pass"], true);
    assert_eq!(micro["trajectory"]["config"]["horizon"], 0.5);
    assert!(micro["init_report"]["C0"].is_number());
}

#[test]
fn pressureless_run_and_gamma_list() {
    let tmp = tempfile::tempdir().unwrap();
    let out = suspension(
        &[
            "run",
            "case1",
            "--no-pressure",
            "--N",
            "25",
            "--M",
            "100",
            "--T",
            "0.1",
            "--out",
            "a",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["spec"]["pressure"], false);

    let out = suspension(
        &[
            "run",
            "gamma-sweep",
            "--gamma",
            "2,5",
            "--N",
            "25",
            "--M",
            "100",
            "--T",
            "0.2",
            "--out",
            "b",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max rho decreasing in gamma: yes"));
    assert!(tmp.path().join("b/macro_g5_M100.json").is_file());
}

#[test]
fn clusters_flag_runs_cluster_integrator() {
    let tmp = tempfile::tempdir().unwrap();
    let out = suspension(
        &[
            "run",
            "case3",
            "--clusters",
            "--N",
            "25",
            "--M",
            "100",
            "--T",
            "0.05",
            "--out",
            "c",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let micro: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("c/micro_g1_N25.json")).unwrap()).unwrap();
    assert!(micro["trajectory"]["clusters"].is_object());
}

#[test]
fn study_prints_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = suspension(
        &[
            "study", "case1", "--N", "25,50", "--M", "200", "--T", "0.1", "--out", "s",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("N,eps,err_rho_L1"));
    assert!(tmp.path().join("s/study_g1.csv").is_file());
}

#[test]
fn emit_plots_times() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["emit-plots", "case1", "--N", "50", "--M", "100", "--out", "p"];
    let out = suspension(
        &[&base[..], &["--times", "0,0.1,0.2,0.3,1.0"]].concat(),
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_dir(tmp.path().join("p")).unwrap().count(), 5);

    let out = suspension(&["emit-plots", "case1", "--out", "q", "--times"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(!tmp.path().join("q").exists());

    let out = suspension(
        &[
            "emit-plots",
            "case1",
            "--T",
            "0.5",
            "--out",
            "r",
            "--times",
            "0.2,0.7",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("time out of range"));
}

#[test]
fn validate_accepts_and_rejects_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ScenarioSpec::preset(Preset::Case3).sim_config(50, 1.0).unwrap();
    fs::write(tmp.path().join("good.json"), cfg.to_json().unwrap()).unwrap();
    let out = suspension(&["validate", "good.json"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let mut bad = cfg.clone();
    bad.mu = -1.0;
    fs::write(tmp.path().join("bad.json"), bad.to_json().unwrap()).unwrap();
    let out = suspension(&["validate", "bad.json"], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("mu <= 0"));

    fs::write(tmp.path().join("junk.json"), "{").unwrap();
    assert_eq!(code(&suspension(&["validate", "junk.json"], tmp.path())), 2);
    assert_eq!(code(&suspension(&["validate", "missing.json"], tmp.path())), 2);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["run", "case9"][..],
        &["run", "case1", "--N", "50,25"],
        &["run", "case1", "--mu", "0"],
        &["run", "case1", "--N", "300", "--M", "400"],
    ] {
        let out = suspension(args, tmp.path());
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let out = suspension(&["validate", path.to_str().unwrap()], &dir);
        assert_eq!(code(&out), 0, "{path:?}: {}", stderr(&out));
        seen += 1;
    }
    assert!(seen >= 4);
}
