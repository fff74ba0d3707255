//! `fjsteer`: run, analyze and reproduce Friedkin–Johnsen steering scenarios.
//!
//! Exit codes: 0 success, 1 output could not be written, 2 configuration
//! error (including usage errors), 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fjsteer::config::{Scenario, ScenarioConfig};
use fjsteer::reward::Utility;
use fjsteer::scenarios;
use fjsteer::simulator::{initial_snapshot, monte_carlo, run, RunReport, TrajectoryLog};

#[derive(Parser)]
#[command(name = "fjsteer", version, about = "Friedkin-Johnsen opinion steering with stubborn leaders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "FJSTEER_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Trajectory file format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario in --config; writes the trajectory and report.json.
    Run,
    /// Print the analysis report of the matrices in force at k = 0.
    Analyze,
    /// Run a built-in scenario: dnn57, irreducible100 or random-tv.
    Demo {
        name: String,
        /// irreducible100 only: fixed uniform weights with all biases zero.
        #[arg(long)]
        zero_bias: bool,
        /// Also write the built-in's scenario JSON here.
        #[arg(long)]
        save_config: Option<PathBuf>,
    },
    /// Write plot-ready CSVs for a scenario (--config or --demo), optionally
    /// with a Monte Carlo summary over consecutive seeds.
    Report {
        #[arg(long, conflicts_with = "config")]
        demo: Option<String>,
        #[arg(long)]
        zero_bias: bool,
        /// Number of Monte Carlo seeds, starting at the scenario seed.
        #[arg(long, default_value_t = 0)]
        monte_carlo: u64,
    },
}

enum Failure {
    Output(anyhow::Error),
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Output(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Output(e) | Failure::Config(e) | Failure::Numerical(e) => e,
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn numeric_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Numerical(e.into())
}

fn output_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Output(e.into())
}

fn builtin(name: &str, zero_bias: bool) -> Outcome<ScenarioConfig> {
    scenarios::builtin(name, zero_bias).ok_or_else(|| {
        config_err(anyhow!("unknown demo {name:?}; expected one of {}", scenarios::NAMES.join(", ")))
    })
}

fn from_file(path: &Path) -> Outcome<(ScenarioConfig, Option<PathBuf>)> {
    ScenarioConfig::load(path).with_context(|| format!("config {}", path.display())).map_err(config_err)
}

fn resolve(cfg: &ScenarioConfig, base: Option<&Path>, seed: Option<u64>) -> Outcome<Scenario> {
    let mut sc = cfg.resolve(base).context("config").map_err(config_err)?;
    if let Some(s) = seed {
        sc.run.seed = s;
    }
    Ok(sc)
}

fn required_config(common: &Common) -> Outcome<Scenario> {
    let path = common.config.as_ref().ok_or_else(|| config_err(anyhow!("--config PATH is required")))?;
    let (cfg, base) = from_file(path)?;
    resolve(&cfg, base.as_deref(), common.seed)
}

fn write(path: &Path, contents: &str) -> Outcome<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(output_err)
}

fn prepare_out(dir: &Path) -> Outcome<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(output_err)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize") + "\n"
}

fn simulate(sc: &Scenario) -> Outcome<(TrajectoryLog, RunReport)> {
    run(sc).with_context(|| format!("simulator ({})", sc.name)).map_err(numeric_err)
}

fn emit_run(common: &Common, log: &TrajectoryLog, report: &RunReport) -> Outcome<()> {
    prepare_out(&common.out)?;
    let trajectory = match common.format {
        Format::Csv => {
            let p = common.out.join("trajectory.csv");
            write(&p, &log.to_csv_string())?;
            p
        }
        Format::Json => {
            let p = common.out.join("trajectory.json");
            write(&p, &json(log))?;
            p
        }
    };
    let rp = common.out.join("report.json");
    write(&rp, &json(report))?;
    let step = report.convergence_step.map_or("none".to_string(), |s| s.to_string());
    println!(
        "{}: wrote {} and {}; convergence_step={step} ({}), hurwitz={}, layering={}",
        report.scenario_name,
        trajectory.display(),
        rp.display(),
        report.criterion,
        report.analysis.hurwitz,
        report.analysis.layering.kind
    );
    Ok(())
}

fn cmd_analyze(common: &Common) -> Outcome<()> {
    let sc = required_config(common)?;
    let (built, u) = initial_snapshot(&sc).context("simulator").map_err(numeric_err)?;
    let report = fjsteer::analyze(&sc.community, &built.edges, &built.mats, &u, 0)
        .context("analysis")
        .map_err(numeric_err)?;
    print!("{}", json(&report));
    Ok(())
}

fn point_table(sc: &Scenario, opinions: &[Vec<f64>]) -> String {
    let n = sc.community.subjects();
    let mut s = String::from("agent_id,role");
    for j in 1..=n {
        s.push_str(&format!(",o{j}"));
    }
    s.push_str(",utility\n");
    for (a, row) in opinions.iter().enumerate() {
        let id = fjsteer::AgentId(a + 1);
        let role = if sc.community.is_stubborn(id) { "stubborn" } else { "regular" };
        s.push_str(&format!("{},{role}", a + 1));
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        let u = sc.utility.as_ref().and_then(|f| f.evaluate(row).ok());
        s.push_str(&format!(",{}\n", u.map(|v| v.to_string()).unwrap_or_default()));
    }
    s
}

fn utility_grid(sc: &Scenario) -> Option<String> {
    let f = sc.utility.as_ref().filter(|f| f.subjects() == 2)?;
    let mut s = String::from("o1,o2,value\n");
    let steps = 100;
    for a in 0..=steps {
        for b in 0..=steps {
            let p = [a as f64 / steps as f64, b as f64 / steps as f64];
            s.push_str(&format!("{},{},{}\n", p[0], p[1], f.evaluate(&p).ok()?));
        }
    }
    Some(s)
}

fn cmd_report(common: &Common, demo: Option<&str>, zero_bias: bool, seeds: u64) -> Outcome<()> {
    let sc = match demo {
        Some(name) => resolve(&builtin(name, zero_bias)?, None, common.seed)?,
        None => required_config(common)?,
    };
    let (log, report) = simulate(&sc)?;
    prepare_out(&common.out)?;
    let out = &common.out;
    write(&out.join("initial.csv"), &point_table(&sc, &log.steps[0].opinions))?;
    write(&out.join("final.csv"), &point_table(&sc, &log.steps.last().expect("log has k = 0").opinions))?;
    write(&out.join("trajectory.csv"), &log.to_csv_string())?;
    write(&out.join("report.json"), &json(&report))?;
    if let Some(grid) = utility_grid(&sc) {
        write(&out.join("utility_grid.csv"), &grid)?;
    }
    if seeds > 0 {
        let list: Vec<u64> = (0..seeds).map(|i| sc.run.seed + i).collect();
        let mc = monte_carlo(&sc, &list);
        write(&out.join("montecarlo.json"), &json(&mc))?;
        println!(
            "monte carlo: {} runs, {} failed, containment pass rate {}",
            mc.summary.runs, mc.summary.failures, mc.summary.containment_pass_rate
        );
    }
    println!("{}: figure data written to {}", sc.name, out.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Outcome<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Run => {
            let sc = required_config(common)?;
            let (log, report) = simulate(&sc)?;
            emit_run(common, &log, &report)
        }
        Command::Analyze => cmd_analyze(common),
        Command::Demo { name, zero_bias, save_config } => {
            let cfg = builtin(name, *zero_bias)?;
            if let Some(p) = save_config {
                cfg.save(p).context("saving config").map_err(output_err)?;
            }
            let sc = resolve(&cfg, None, common.seed)?;
            let (log, report) = simulate(&sc)?;
            emit_run(common, &log, &report)
        }
        Command::Report { demo, zero_bias, monte_carlo } => {
            cmd_report(common, demo.as_deref(), *zero_bias, *monte_carlo)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
