use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crowdsense::channel::compute_capacities;
use crowdsense::harness::{self, ExperimentConfig, SweepVar};
use crowdsense::ocf::{run_ocf_mode, verify_t_stable, write_trace, CoalitionState, OcfConfig};
use crowdsense::outcome::scenario_hash;
use crowdsense::{generate_scenario, Error, GlobalParams, MechanismOutcome, Mode, Result, Scenario};

/// Multi-task smartphone sensing market simulator.
#[derive(Debug, Parser)]
#[command(name = "crowdsense", version)]
struct Cli {
    /// TOML experiment config; keys mirror `ExperimentConfig` with a `[params]` table.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set params.rate_unit=25000`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    instances: Option<usize>,
    /// Shorthand for `--instances 1000`.
    #[arg(long, global = true, conflicts_with = "instances")]
    full: bool,
    #[arg(long, global = true)]
    seed_base: Option<u64>,
    #[arg(long, global = true)]
    tasks: Option<usize>,
    #[arg(long, global = true)]
    users: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Evaluate instances on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a scenario as JSON.
    Generate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one mechanism on one scenario and write the outcome JSON.
    Run {
        #[arg(long)]
        mode: String,
        #[arg(long)]
        seed: Option<u64>,
        /// α₁ for noncoop, α₂ for the coalition modes.
        #[arg(long)]
        alpha: Option<f64>,
        /// Use a scenario file instead of generating one.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Line-delimited JSON trace of coalition operations.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Monte Carlo sweep over α₁, α₂, users or tasks.
    Sweep {
        #[arg(long)]
        var: String,
    },
    /// Distribution of coalition-formation iterations per user count.
    CdfIterations,
    /// Check that a saved outcome admits no transfer, quit or join.
    StabilityCheck {
        outcome: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn parse_override(item: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) =
        item.split_once('=').ok_or_else(|| Error::Config(format!("override `{item}` is not KEY=VALUE")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for key in parents {
        cur = cur
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{key}` is not a table")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut table = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            toml::from_str::<toml::Table>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => toml::Table::new(),
    };
    let mut overrides = Vec::new();
    for item in &cli.set {
        overrides.push(parse_override(item)?);
    }
    let int = |v: u64| toml::Value::Integer(v as i64);
    let flags = [
        ("instances_per_point", cli.instances.or(cli.full.then_some(1000)).map(|v| int(v as u64))),
        ("seed_base", cli.seed_base.map(int)),
        ("n_tasks", cli.tasks.map(|v| int(v as u64))),
        ("n_users", cli.users.map(|v| int(v as u64))),
        ("output_dir", cli.out_dir.as_ref().map(|p| toml::Value::String(p.display().to_string()))),
        ("execution", cli.sequential.then(|| toml::Value::String("sequential".into()))),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            overrides.push((vec![key.to_string()], v));
        }
    }
    for (path, value) in overrides {
        set_path(&mut table, &path, value)?;
    }
    let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
    ExperimentConfig::from_toml(&text)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
            println!("{}", json!({ "written": [path] }));
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn scenario_for(cfg: &ExperimentConfig, seed: Option<u64>, file: Option<&Path>) -> Result<Scenario> {
    match (file, seed) {
        (Some(path), _) => Scenario::from_json(&fs::read_to_string(path)?),
        (None, seed) => {
            let params = GlobalParams { rng_seed: seed.unwrap_or(cfg.params.rng_seed), ..cfg.params.clone() };
            generate_scenario(&params, cfg.n_tasks, cfg.n_users)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Generate { seed, out } => {
            let scenario = scenario_for(&cfg, seed, None)?;
            write_or_print(out.as_deref(), &scenario.to_json()?)
        }
        Command::Run { mode, seed, alpha, scenario, out, trace } => {
            let mode: Mode = mode.parse()?;
            if seed.is_none() && scenario.is_none() {
                return Err(Error::Config("run needs --seed or --scenario".into()));
            }
            let scenario = scenario_for(&cfg, seed, scenario.as_deref())?;
            let outcome = match (&trace, mode.is_ocf()) {
                (Some(path), true) => {
                    let s = match alpha {
                        Some(a) => {
                            if !(a.is_finite() && a >= 0.0) {
                                return Err(Error::InvalidParam {
                                    name: "alpha",
                                    reason: format!("must be nonnegative, got {a}"),
                                });
                            }
                            scenario.with_alphas(scenario.params.incentive_alpha1, a)
                        }
                        None => scenario.clone(),
                    };
                    let ocf = OcfConfig { trace: true, ..cfg.ocf_config() };
                    let run = run_ocf_mode(&s, mode, &ocf)?;
                    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
                    write_trace(&mut file, &run.trace)?;
                    let mut outcome = run.outcome;
                    outcome.config_hash = Some(cfg.hash());
                    outcome
                }
                (Some(_), false) => return Err(Error::Config("--trace only applies to coalition modes".into())),
                (None, _) => harness::run_single(mode, &scenario, alpha, &cfg)?,
            };
            write_or_print(out.as_deref(), &outcome.to_json()?)
        }
        Command::Sweep { var } => {
            let var: SweepVar = var.parse()?;
            let result = match var {
                SweepVar::Alpha1 | SweepVar::Alpha2 => harness::sweep_alpha(&cfg, var)?,
                SweepVar::Users | SweepVar::Tasks => harness::sweep_population(&cfg, var)?,
            };
            let paths = harness::write_sweep(&cfg.output_dir, &result, &cfg)?;
            println!("{}", json!({ "written": paths, "best_alpha": result.best_alpha }));
            Ok(())
        }
        Command::CdfIterations => {
            let table = harness::iteration_cdf(&cfg)?;
            let paths = harness::write_cdf(&cfg.output_dir, &table, &cfg)?;
            let p99: Vec<_> = table.series.iter().map(|s| json!({ "users": s.n_users, "p99": s.p99 })).collect();
            println!("{}", json!({ "written": paths, "p99": p99 }));
            Ok(())
        }
        Command::StabilityCheck { outcome, scenario } => {
            let outcome = MechanismOutcome::from_json(&fs::read_to_string(&outcome)?)?;
            let s = match scenario {
                Some(path) => Scenario::from_json(&fs::read_to_string(path)?)?,
                None => generate_scenario(&outcome.params, outcome.n_tasks, outcome.n_users)?,
            };
            if scenario_hash(&s) != outcome.scenario_hash {
                return Err(Error::Precondition("scenario does not match the outcome's scenario_hash".into()));
            }
            let budgets = outcome.assignment.budgets(&compute_capacities(&s));
            let state = CoalitionState::new(&s, outcome.participation.clone(), budgets)?;
            match verify_t_stable(&state, &s)? {
                None => {
                    println!("{}", json!({ "stable": true, "mode": outcome.mode, "seed": outcome.seed }));
                    Ok(())
                }
                Some(ce) => {
                    println!("{}", json!({ "stable": false, "counterexample": ce }));
                    Err(Error::NotStable(format!("user {} has a feasible {:?}", ce.user, ce.op)))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim() }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
