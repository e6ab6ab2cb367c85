use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use suspension_core::config::{validate_config, SimConfig};
use suspension_core::error::Error;
use suspension_core::harness::{
    check_times, convergence_study, emit_plot_data, run_scenario, simulate, Preset, ScenarioRun,
    ScenarioSpec, PLOT_TIMES,
};

#[derive(Parser)]
#[command(name = "suspension", version, about = "Rough-particle suspension simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset: particle runs, limit-system runs and convergence tables.
    Run {
        preset: String,
        #[command(flatten)]
        opts: ScenarioOpts,
        /// Also write sampled particle field profiles as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Particle-versus-limit convergence table at the final time.
    Study {
        preset: String,
        #[command(flatten)]
        opts: ScenarioOpts,
    },
    /// Per-time CSV files with particle and limit-system densities.
    EmitPlots {
        preset: String,
        #[command(flatten)]
        opts: ScenarioOpts,
        /// Output times; pass the flag without values for none.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        times: Option<Vec<f64>>,
    },
    /// Check a particle simulation config file.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct ScenarioOpts {
    /// Particle counts.
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Limit-system cell count.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    #[arg(long)]
    mu: Option<f64>,
    /// Drop the congestion pressure and the particle repulsion.
    #[arg(long)]
    no_pressure: bool,
    /// Integrate particles in contact as rigid clusters.
    #[arg(long)]
    clusters: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScenarioOpts {
    fn spec(&self, preset: Preset) -> ScenarioSpec {
        let mut spec = ScenarioSpec::preset(preset);
        if let Some(t) = self.t {
            spec = spec.with_horizon(t);
        }
        if let Some(n) = &self.n {
            spec.n_list = n.clone();
        }
        if let Some(m) = self.m {
            spec.cells = m;
        }
        if let Some(g) = &self.gamma {
            spec.gammas = g.clone();
        }
        if let Some(mu) = self.mu {
            spec.mu = mu;
        }
        spec.pressure &= !self.no_pressure;
        spec.clusters = self.clusters;
        spec.seed = self.seed;
        spec
    }

    fn out(&self, preset: Preset) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(preset.name()))
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Init(_) | Error::TimeOutOfRange(_) | Error::Json(_) => 2,
        Error::Contact { .. } | Error::StepUnderflow { .. } | Error::LinearSolve(_) | Error::Macro(_) => 3,
        Error::Certificate(_) => 4,
        Error::Io(_) => 1,
    }
}

fn report(run: &ScenarioRun) {
    for r in &run.micro {
        println!("gamma={} N={}: {}", r.gamma, r.n, r.diagnostics.summary());
    }
    for s in &run.summaries {
        println!(
            "macro gamma={} M={}: max rho {:.4}, clamps {}, mass drift {:.1e}",
            s.gamma, s.cells, s.max_rho, s.clamp_count, s.mass_drift
        );
    }
    for t in &run.tables {
        println!("convergence gamma={}:", t.reference.params.gamma);
        for r in &t.rows {
            println!(
                "  N={:4} err_rho_L1={:.3e} err_rhostar_L1={:.3e} err_u_L2={:.3e}",
                r.n, r.err_rho_l1, r.err_rhostar_l1, r.err_u_l2
            );
        }
    }
    if let Some(ok) = run.verdict.gamma_monotone {
        println!("max rho decreasing in gamma: {}", if ok { "yes" } else { "NO" });
    }
}

fn certify(run: &ScenarioRun) -> Result<(), Error> {
    let v = &run.verdict;
    if v.pass() {
        println!("PASS");
        Ok(())
    } else {
        Err(Error::Certificate(format!("{v:?}")))
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { preset, opts, csv } => {
            let preset: Preset = preset.parse()?;
            let mut spec = opts.spec(preset);
            spec.profiles_csv = csv;
            let dir = opts.out(preset);
            let run = run_scenario(&spec, &dir)?;
            report(&run);
            println!("artifacts in {}", dir.display());
            certify(&run)
        }
        Command::Study { preset, opts } => {
            let preset: Preset = preset.parse()?;
            let mut spec = opts.spec(preset).with_horizon(opts.t.unwrap_or(0.2));
            spec.cells = opts.m.unwrap_or(800);
            let dir = opts.out(preset);
            fs::create_dir_all(&dir)?;
            let mut pass = true;
            for &g in &spec.gammas {
                let table = convergence_study(&spec, g)?;
                println!("{}", suspension_core::harness::CONVERGENCE_CSV_HEADER);
                for r in &table.rows {
                    println!(
                        "{},{:e},{:e},{:e},{:e},{},{:e}",
                        r.n,
                        r.eps,
                        r.err_rho_l1,
                        r.err_rhostar_l1,
                        r.err_u_l2,
                        r.min_gap_over_eps,
                        r.energy_margin
                    );
                }
                if table.rho_non_monotone_pairs == 1 {
                    println!("warning: one non-monotone pair in err_rho_L1");
                }
                let mut buf = Vec::new();
                table.write_csv(&mut buf)?;
                fs::write(dir.join(format!("study_g{g}.csv")), buf)?;
                fs::write(
                    dir.join(format!("study_g{g}.json")),
                    serde_json::to_string_pretty(&table)? + "\n",
                )?;
                pass &= table.pass;
            }
            if pass {
                println!("PASS");
                Ok(())
            } else {
                Err(Error::Certificate("err_rho_L1 not decreasing".into()))
            }
        }
        Command::EmitPlots { preset, opts, times } => {
            let preset: Preset = preset.parse()?;
            let spec = opts.spec(preset);
            let times = times.unwrap_or_else(|| {
                PLOT_TIMES
                    .iter()
                    .cloned()
                    .filter(|t| *t <= spec.horizon)
                    .collect()
            });
            check_times(&times, spec.horizon)?;
            if times.is_empty() {
                return Ok(());
            }
            let run = simulate(&spec)?;
            for path in emit_plot_data(&run, &times, &opts.out(preset))? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            let cfg = validate_config(SimConfig::from_json(&text)?)?;
            println!(
                "ok: N={} mu={} gamma={} T={}",
                cfg.n_particles, cfg.mu, cfg.gamma, cfg.horizon
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
