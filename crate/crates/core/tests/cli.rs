use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdsense")).current_dir(dir).args(args).output().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr is one JSON object")
}

#[test]
fn failures_emit_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(error_json(&cli(d, &["run", "--mode", "greedy", "--seed", "1"]))["error"], "unknown_mode");
    assert_eq!(error_json(&cli(d, &["sweep", "--var", "beta"]))["error"], "config");
    assert_eq!(error_json(&cli(d, &["frobnicate"]))["error"], "usage");
    assert_eq!(error_json(&cli(d, &["stability-check", "missing.json"]))["error"], "io");
    assert_eq!(error_json(&cli(d, &["generate", "--set", "params.bandwidth=-1"]))["error"], "invalid_param");
    assert_eq!(error_json(&cli(d, &["generate", "--set", "params.nope=1"]))["error"], "config");
    assert_eq!(
        error_json(&cli(d, &["run", "--mode", "noncoop", "--seed", "1", "--alpha=-2"]))["error"],
        "invalid_param"
    );
    let out = cli(d, &["run", "--mode", "ocf-priority", "--seed", "1", "--set", "ocf_iteration_cap=0"]);
    assert_eq!(error_json(&out)["error"], "iteration_cap");
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("exp.toml"), "n_tasks = 4\nn_users = 5\n[params]\nn_subcarriers = 7\nrate_unit = 20000.0\n")
        .unwrap();
    let out =
        cli(d, &["--config", "exp.toml", "--users", "6", "--set", "params.bandwidth=30000", "generate", "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = crowdsense::Scenario::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!((s.tasks.len(), s.users.len(), s.params.n_subcarriers), (4, 6, 7));
    assert_eq!(s.params.rate_unit, 20000.0);
    assert_eq!(s.params.bandwidth, 30000.0);
    assert_eq!(s.params.rng_seed, 9);
}

#[test]
fn run_from_scenario_file_matches_generated_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = ["--tasks", "5", "--users", "7"];
    let gen: Vec<&str> = base.iter().copied().chain(["generate", "--seed", "4", "--out", "s.json"]).collect();
    assert!(cli(d, &gen).status.success());
    let a: Vec<&str> = base.iter().copied().chain(["run", "--mode", "noncoop", "--seed", "4"]).collect();
    let b: Vec<&str> = base.iter().copied().chain(["run", "--mode", "noncoop", "--scenario", "s.json"]).collect();
    assert_eq!(cli(d, &a).stdout, cli(d, &b).stdout);
}

#[test]
fn stability_check_flags_non_equilibrium_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(cli(d, &["run", "--mode", "ocf-random", "--seed", "2", "--out", "o.json"]).status.success());
    let ok = cli(d, &["stability-check", "o.json"]);
    assert!(ok.status.success());
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["stable"], true);

    // Drop every membership: with positive payoffs someone can now join.
    let mut outcome: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("o.json")).unwrap()).unwrap();
    let rows = outcome["participation"].as_array_mut().unwrap();
    for row in rows.iter_mut() {
        for cell in row.as_array_mut().unwrap() {
            *cell = serde_json::json!(0);
        }
    }
    fs::write(d.join("empty.json"), serde_json::to_string(&outcome).unwrap()).unwrap();
    let bad = cli(d, &["stability-check", "empty.json"]);
    assert_eq!(error_json(&bad)["error"], "not_stable");
    let report: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(report["counterexample"]["op"], "join");

    // Tampered parameters no longer regenerate the recorded scenario.
    outcome["params"]["rng_seed"] = serde_json::json!(3);
    fs::write(d.join("moved.json"), serde_json::to_string(&outcome).unwrap()).unwrap();
    assert_eq!(error_json(&cli(d, &["stability-check", "moved.json"]))["error"], "precondition");
}

#[test]
fn sweep_rows_carry_seeds_that_regenerate_them() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cli(
        d,
        &[
            "--instances",
            "2",
            "--tasks",
            "5",
            "--users",
            "6",
            "--set",
            "alpha_grid=[0.5]",
            "--set",
            "modes=[\"noncoop\"]",
            "sweep",
            "--var",
            "alpha1",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(d.join("out/sweep_alpha1_instances.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let seed = &rec[5];
        let run =
            cli(d, &["--tasks", "5", "--users", "6", "run", "--mode", "noncoop", "--seed", seed, "--alpha", "0.5"]);
        let v: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
        let want: f64 = rec[6].parse().unwrap();
        assert_eq!(v["utilities"]["platform_utility"].as_f64().unwrap(), want);
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/sweep_alpha1.json")).unwrap()).unwrap();
    assert_eq!(meta["seed_base"], 0);
    assert_eq!(meta["best_alpha"]["noncoop"], 0.5);
}
