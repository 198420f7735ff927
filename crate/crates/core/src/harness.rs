//! Seeded Monte Carlo sweeps over the three mechanisms.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocf::{run_ocf_mode, OcfConfig};
use crate::optimizers::{
    run_centralized_with, run_noncooperative, CentralizedConfig, FollowerRule, LeaderConfig, NoncoopConfig,
};
use crate::outcome::{sha256_hex, MechanismOutcome, Mode};
use crate::scenario::{generate_scenario, GlobalParams, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    Alpha1,
    Alpha2,
    Users,
    Tasks,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::Alpha1 => "alpha1",
            SweepVar::Alpha2 => "alpha2",
            SweepVar::Users => "users",
            SweepVar::Tasks => "tasks",
        }
    }
}

impl std::str::FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha1" => Ok(SweepVar::Alpha1),
            "alpha2" => Ok(SweepVar::Alpha2),
            "users" => Ok(SweepVar::Users),
            "tasks" => Ok(SweepVar::Tasks),
            other => Err(Error::Config(format!("unknown sweep variable `{other}`"))),
        }
    }
}

/// How instances within a grid point are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Rayon worker pool when the `parallel` feature is on, sequential otherwise.
    #[default]
    Parallel,
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub modes: Vec<Mode>,
    pub n_tasks: usize,
    pub n_users: usize,
    pub instances_per_point: usize,
    pub seed_base: u64,
    pub alpha_grid: Vec<f64>,
    pub users_grid: Vec<usize>,
    pub tasks_grid: Vec<usize>,
    pub cdf_users: Vec<usize>,
    pub cdf_tasks: usize,
    pub cdf_mode: Mode,
    pub leader_restarts: usize,
    pub follower_rule: FollowerRule,
    pub ocf_init_rule: FollowerRule,
    pub ocf_iteration_cap: u64,
    pub execution: Execution,
    pub output_dir: PathBuf,
    pub params: GlobalParams,
}

/// `[0, 2]` in steps of 0.1.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 10.0).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            modes: Mode::ALL.to_vec(),
            n_tasks: 30,
            n_users: 60,
            instances_per_point: 100,
            seed_base: 0,
            alpha_grid: default_alpha_grid(),
            users_grid: vec![20, 40, 60, 80, 100],
            tasks_grid: vec![10, 15, 20, 25, 30, 35, 40],
            cdf_users: vec![20, 30, 40, 50],
            cdf_tasks: 20,
            cdf_mode: Mode::OcfPriority,
            leader_restarts: 4,
            follower_rule: FollowerRule::Prefix,
            ocf_init_rule: FollowerRule::LiteralPrefix,
            ocf_iteration_cap: crate::ocf::DEFAULT_ITERATION_CAP,
            execution: Execution::Parallel,
            output_dir: PathBuf::from("out"),
            params: GlobalParams::default(),
        }
    }
}

fn strictly_increasing<T: PartialOrd>(name: &str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.modes.is_empty() {
            return Err(Error::Config("modes must not be empty".into()));
        }
        if self.instances_per_point == 0 {
            return Err(Error::Config("instances_per_point must be at least 1".into()));
        }
        if self.n_tasks == 0 || self.n_users == 0 || self.cdf_tasks == 0 {
            return Err(Error::Config("task and user counts must be at least 1".into()));
        }
        strictly_increasing("alpha_grid", &self.alpha_grid)?;
        if self.alpha_grid.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Config("alpha_grid entries must be finite and nonnegative".into()));
        }
        strictly_increasing("users_grid", &self.users_grid)?;
        strictly_increasing("tasks_grid", &self.tasks_grid)?;
        strictly_increasing("cdf_users", &self.cdf_users)?;
        if self.users_grid[0] == 0 || self.tasks_grid[0] == 0 || self.cdf_users[0] == 0 {
            return Err(Error::Config("grid counts must be at least 1".into()));
        }
        if !self.cdf_mode.is_ocf() {
            return Err(Error::Config("cdf_mode must be a coalition-formation mode".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output location.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        sha256_hex(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
    }

    pub fn noncoop_config(&self) -> NoncoopConfig {
        NoncoopConfig {
            leader: LeaderConfig { restarts: self.leader_restarts, ..LeaderConfig::default() },
            followers: self.follower_rule,
        }
    }

    pub fn ocf_config(&self) -> OcfConfig {
        OcfConfig { init_rule: self.ocf_init_rule, iteration_cap: self.ocf_iteration_cap, ..OcfConfig::default() }
    }
}

/// Mixes the seed base with a grid point and an instance index.
pub fn derive_seed(base: u64, point: u64, instance: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(base ^ splitmix(point.wrapping_mul(0x1_0000_0001) ^ splitmix(instance)))
}

/// Runs one mechanism. `alpha` overrides α₁ (non-cooperative) or α₂ (cooperative).
pub fn run_single(
    mode: Mode,
    scenario: &Scenario,
    alpha: Option<f64>,
    config: &ExperimentConfig,
) -> Result<MechanismOutcome> {
    let scenario = match (mode, alpha) {
        (Mode::Noncoop, Some(a)) => scenario.with_alphas(a, scenario.params.incentive_alpha2),
        (m, Some(a)) if m.is_ocf() => scenario.with_alphas(scenario.params.incentive_alpha1, a),
        _ => scenario.clone(),
    };
    if let Some(a) = alpha {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidParam { name: "alpha", reason: format!("must be nonnegative, got {a}") });
        }
    }
    let mut outcome = match mode {
        Mode::Centralized => run_centralized_with(&scenario, &CentralizedConfig::default(), &[])?,
        Mode::Noncoop => run_noncooperative(&scenario, &config.noncoop_config())?,
        Mode::OcfRandom | Mode::OcfPriority => run_ocf_mode(&scenario, mode, &config.ocf_config())?.outcome,
    };
    outcome.config_hash = Some(config.hash());
    Ok(outcome)
}

/// Sample mean and standard error of the mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Stat::default();
        }
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Stat { mean, se: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Stat { mean, se: (var / n).sqrt() }
    }
}

/// Figures recorded for one (instance, mechanism) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub point: usize,
    pub value: f64,
    pub mode: Mode,
    pub alpha: Option<f64>,
    pub instance: usize,
    pub seed: u64,
    pub platform_utility: f64,
    pub pfm: f64,
    pub user_utility: f64,
    pub iterations: u64,
}

fn record(point: usize, value: f64, instance: usize, outcome: &MechanismOutcome) -> InstanceRecord {
    let iterations = match (&outcome.diagnostics.ocf, &outcome.diagnostics.solver) {
        (Some(o), _) => o.iterations_to_converge,
        (None, Some(s)) => s.iterations,
        (None, None) => 0,
    };
    InstanceRecord {
        point,
        value,
        mode: outcome.mode,
        alpha: outcome.alpha,
        instance,
        seed: outcome.seed,
        platform_utility: outcome.utilities.platform_utility,
        pfm: outcome.utilities.pfm,
        user_utility: outcome.utilities.total_user_utility(),
        iterations,
    }
}

/// Aggregate over the instances of one grid point and mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub var: SweepVar,
    pub point: usize,
    pub value: f64,
    pub mode: Mode,
    pub alpha: Option<f64>,
    pub instances: usize,
    pub seed_base: u64,
    pub platform_utility: Stat,
    pub pfm: Stat,
    pub user_utility: Stat,
    pub iterations: Stat,
}

impl SweepRow {
    fn from_records(var: SweepVar, seed_base: u64, recs: &[&InstanceRecord]) -> SweepRow {
        let first = recs[0];
        let col = |f: fn(&InstanceRecord) -> f64| Stat::of(&recs.iter().map(|r| f(r)).collect::<Vec<_>>());
        SweepRow {
            var,
            point: first.point,
            value: first.value,
            mode: first.mode,
            alpha: first.alpha,
            instances: recs.len(),
            seed_base,
            platform_utility: col(|r| r.platform_utility),
            pfm: col(|r| r.pfm),
            user_utility: col(|r| r.user_utility),
            iterations: col(|r| r.iterations as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub var: SweepVar,
    /// One row per (grid point, mechanism); population sweeps keep only the best α.
    pub rows: Vec<SweepRow>,
    /// Every (grid point, mechanism, α) aggregate that was evaluated.
    pub all_rows: Vec<SweepRow>,
    /// Grid α with the highest mean platform utility, per mechanism (α sweeps only).
    pub best_alpha: BTreeMap<Mode, f64>,
    pub records: Vec<InstanceRecord>,
}

impl SweepResult {
    pub fn rows_for(&self, mode: Mode) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.mode == mode)
    }
}

/// Maps `f` over `0..n` in index order, on the rayon pool when enabled.
fn map_instances<T, F>(execution: Execution, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = execution;
    (0..n).map(f).collect()
}

/// Index of the largest value; ties go to the earliest.
fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

fn alpha_modes(config: &ExperimentConfig, var: SweepVar) -> Vec<Mode> {
    config
        .modes
        .iter()
        .copied()
        .filter(|m| match var {
            SweepVar::Alpha1 => *m == Mode::Noncoop,
            _ => m.is_ocf(),
        })
        .collect()
}

/// Platform utility against α₁ (non-cooperative) or α₂ (cooperative modes).
/// Every grid point draws fresh instances.
pub fn sweep_alpha(config: &ExperimentConfig, var: SweepVar) -> Result<SweepResult> {
    config.validate()?;
    if !matches!(var, SweepVar::Alpha1 | SweepVar::Alpha2) {
        return Err(Error::Config(format!("sweep_alpha needs alpha1 or alpha2, got {}", var.as_str())));
    }
    let modes = alpha_modes(config, var);
    if modes.is_empty() {
        return Err(Error::Config(format!("no configured mode responds to {}", var.as_str())));
    }
    let mut records = Vec::new();
    for (point, &alpha) in config.alpha_grid.iter().enumerate() {
        let per_instance = map_instances(config.execution, config.instances_per_point, |inst| {
            let params = GlobalParams {
                rng_seed: derive_seed(config.seed_base, point as u64, inst as u64),
                ..config.params.clone()
            };
            let scenario = generate_scenario(&params, config.n_tasks, config.n_users)?;
            modes
                .iter()
                .map(|&mode| run_single(mode, &scenario, Some(alpha), config).map(|o| record(point, alpha, inst, &o)))
                .collect::<Result<Vec<_>>>()
        })?;
        records.extend(per_instance.into_iter().flatten());
    }
    let rows = aggregate(var, config.seed_base, &records);
    let mut best_alpha = BTreeMap::new();
    for &mode in &modes {
        let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.mode == mode).collect();
        if let Some(i) = argmax(mine.iter().map(|r| r.platform_utility.mean)) {
            best_alpha.insert(mode, mine[i].value);
        }
    }
    Ok(SweepResult { var, all_rows: rows.clone(), rows, best_alpha, records })
}

/// Groups records by (point, mode, α) in first-seen order.
fn aggregate(var: SweepVar, seed_base: u64, records: &[InstanceRecord]) -> Vec<SweepRow> {
    let mut keys: Vec<(usize, Mode, Option<u64>)> = Vec::new();
    let mut groups: BTreeMap<(usize, Mode, Option<u64>), Vec<&InstanceRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.point, r.mode, r.alpha.map(f64::to_bits));
        if !groups.contains_key(&key) {
            keys.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    keys.iter().map(|k| SweepRow::from_records(var, seed_base, &groups[k])).collect()
}

/// Platform utility against the number of users or tasks. At each point every
/// incentive-driven mechanism is run over the whole α grid on the same
/// instances and the α with the best mean is kept.
pub fn sweep_population(config: &ExperimentConfig, var: SweepVar) -> Result<SweepResult> {
    config.validate()?;
    let grid: Vec<usize> = match var {
        SweepVar::Users => config.users_grid.clone(),
        SweepVar::Tasks => config.tasks_grid.clone(),
        other => return Err(Error::Config(format!("sweep_population needs users or tasks, got {}", other.as_str()))),
    };
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut all_rows = Vec::new();
    for (point, &size) in grid.iter().enumerate() {
        let (n_tasks, n_users) = match var {
            SweepVar::Users => (config.n_tasks, size),
            _ => (size, config.n_users),
        };
        let per_instance = map_instances(config.execution, config.instances_per_point, |inst| {
            let params = GlobalParams {
                rng_seed: derive_seed(config.seed_base, point as u64, inst as u64),
                ..config.params.clone()
            };
            let scenario = generate_scenario(&params, n_tasks, n_users)?;
            let mut out = Vec::new();
            for &mode in &config.modes {
                if mode == Mode::Centralized {
                    out.push(record(point, size as f64, inst, &run_single(mode, &scenario, None, config)?));
                } else {
                    for &alpha in &config.alpha_grid {
                        let o = run_single(mode, &scenario, Some(alpha), config)?;
                        out.push(record(point, size as f64, inst, &o));
                    }
                }
            }
            Ok(out)
        })?;
        let point_records: Vec<InstanceRecord> = per_instance.into_iter().flatten().collect();
        let point_rows = aggregate(var, config.seed_base, &point_records);
        for &mode in &config.modes {
            let mine: Vec<&SweepRow> = point_rows.iter().filter(|r| r.mode == mode).collect();
            if let Some(i) = argmax(mine.iter().map(|r| r.platform_utility.mean)) {
                rows.push(mine[i].clone());
            }
        }
        all_rows.extend(point_rows);
        records.extend(point_records);
    }
    Ok(SweepResult { var, rows, all_rows, best_alpha: BTreeMap::new(), records })
}

/// Convergence statistics for one user count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfSeries {
    pub n_users: usize,
    pub n_tasks: usize,
    /// Iterations to converge, one per instance, in instance order.
    pub samples: Vec<u64>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub p99: u64,
    pub max: u64,
}

impl CdfSeries {
    /// Empirical `P(Y ≤ y)`.
    pub fn cdf_at(&self, y: u64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|&&s| s <= y).count() as f64 / self.samples.len() as f64
    }
}

/// Nearest-rank percentile.
pub fn percentile(samples: &[u64], pct: f64) -> u64 {
    if samples.is_empty() {
        return 0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfTable {
    pub mode: Mode,
    pub series: Vec<CdfSeries>,
}

impl CdfTable {
    /// Sorted union of all observed iteration counts.
    pub fn support(&self) -> Vec<u64> {
        let mut ys: Vec<u64> = self.series.iter().flat_map(|s| s.samples.iter().copied()).collect();
        ys.sort_unstable();
        ys.dedup();
        ys
    }
}

/// Distribution of iterations to converge for each user count in `cdf_users`.
pub fn iteration_cdf(config: &ExperimentConfig) -> Result<CdfTable> {
    config.validate()?;
    let mut series = Vec::new();
    for (point, &m) in config.cdf_users.iter().enumerate() {
        let runs = map_instances(config.execution, config.instances_per_point, |inst| {
            let seed = derive_seed(config.seed_base, point as u64, inst as u64);
            let params = GlobalParams { rng_seed: seed, ..config.params.clone() };
            let scenario = generate_scenario(&params, config.cdf_tasks, m)?;
            let run = run_ocf_mode(&scenario, config.cdf_mode, &config.ocf_config())?;
            Ok((seed, run.diagnostics.iterations_to_converge))
        })?;
        let samples: Vec<u64> = runs.iter().map(|r| r.1).collect();
        series.push(CdfSeries {
            n_users: m,
            n_tasks: config.cdf_tasks,
            seeds: runs.iter().map(|r| r.0).collect(),
            mean: samples.iter().sum::<u64>() as f64 / samples.len() as f64,
            p99: percentile(&samples, 99.0),
            max: samples.iter().copied().max().unwrap_or(0),
            samples,
        });
    }
    Ok(CdfTable { mode: config.cdf_mode, series })
}

/// Sidecar metadata written next to every CSV.
#[derive(Clone, Debug, Serialize)]
struct Metadata<'a> {
    artifact: &'a str,
    crate_version: &'static str,
    git_describe: String,
    config_hash: String,
    seed_base: u64,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    best_alpha: BTreeMap<Mode, f64>,
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn write_metadata(
    dir: &Path,
    name: &str,
    config: &ExperimentConfig,
    best_alpha: BTreeMap<Mode, f64>,
) -> Result<PathBuf> {
    let meta = Metadata {
        artifact: name,
        crate_version: env!("CARGO_PKG_VERSION"),
        git_describe: git_describe(),
        config_hash: config.hash(),
        seed_base: config.seed_base,
        config,
        best_alpha,
    };
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(path)
}

/// Shortest round-trip form; negative zero prints as `0`.
fn num(x: f64) -> String {
    (x + 0.0).to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes `sweep_<var>.csv` (aggregates), `sweep_<var>_all.csv`,
/// `sweep_<var>_instances.csv` and the metadata sidecar. Returns the paths.
pub fn write_sweep(dir: &Path, result: &SweepResult, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let name = format!("sweep_{}", result.var.as_str());
    let mut paths = Vec::new();
    for (suffix, rows) in [("", &result.rows), ("_all", &result.all_rows)] {
        let path = dir.join(format!("{name}{suffix}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "var",
            "point",
            "value",
            "mode",
            "alpha",
            "instances",
            "seed_base",
            "platform_utility_mean",
            "platform_utility_se",
            "pfm_mean",
            "pfm_se",
            "user_utility_mean",
            "user_utility_se",
            "iterations_mean",
            "iterations_se",
        ])?;
        for r in rows.iter() {
            w.write_record([
                r.var.as_str().to_string(),
                r.point.to_string(),
                num(r.value),
                r.mode.to_string(),
                opt(r.alpha),
                r.instances.to_string(),
                r.seed_base.to_string(),
                num(r.platform_utility.mean),
                num(r.platform_utility.se),
                num(r.pfm.mean),
                num(r.pfm.se),
                num(r.user_utility.mean),
                num(r.user_utility.se),
                num(r.iterations.mean),
                num(r.iterations.se),
            ])?;
        }
        w.flush()?;
        paths.push(path);
    }
    let path = dir.join(format!("{name}_instances.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "point",
        "value",
        "mode",
        "alpha",
        "instance",
        "seed",
        "platform_utility",
        "pfm",
        "user_utility",
        "iterations",
    ])?;
    for r in &result.records {
        w.write_record([
            r.point.to_string(),
            num(r.value),
            r.mode.to_string(),
            opt(r.alpha),
            r.instance.to_string(),
            r.seed.to_string(),
            num(r.platform_utility),
            num(r.pfm),
            num(r.user_utility),
            r.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    paths.push(path);
    paths.push(write_metadata(dir, &name, config, result.best_alpha.clone())?);
    Ok(paths)
}

/// Writes `cdf_iterations.csv` (long format: users, iterations, cdf),
/// `cdf_iterations_summary.csv`, `cdf_iterations_instances.csv` and the sidecar.
pub fn write_cdf(dir: &Path, table: &CdfTable, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let support = table.support();
    let path = dir.join("cdf_iterations.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["users", "tasks", "iterations", "cdf"])?;
    for s in &table.series {
        for &y in &support {
            w.write_record([s.n_users.to_string(), s.n_tasks.to_string(), y.to_string(), num(s.cdf_at(y))])?;
        }
    }
    w.flush()?;
    let summary = dir.join("cdf_iterations_summary.csv");
    let mut w = csv::Writer::from_path(&summary)?;
    w.write_record(["users", "tasks", "instances", "seed_base", "mean", "p99", "max"])?;
    for s in &table.series {
        w.write_record([
            s.n_users.to_string(),
            s.n_tasks.to_string(),
            s.samples.len().to_string(),
            config.seed_base.to_string(),
            num(s.mean),
            s.p99.to_string(),
            s.max.to_string(),
        ])?;
    }
    w.flush()?;
    let raw = dir.join("cdf_iterations_instances.csv");
    let mut w = csv::Writer::from_path(&raw)?;
    w.write_record(["users", "tasks", "instance", "seed", "iterations"])?;
    for s in &table.series {
        for (k, (seed, it)) in s.seeds.iter().zip(&s.samples).enumerate() {
            w.write_record([
                s.n_users.to_string(),
                s.n_tasks.to_string(),
                k.to_string(),
                seed.to_string(),
                it.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let meta = write_metadata(dir, "cdf_iterations", config, BTreeMap::new())?;
    Ok(vec![path, summary, raw, meta])
}
