//! End-to-end tests of the binary: config validation, flag overrides, and
//! byte-identical reruns for every subcommand.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tasep-lpp")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("tasep-lpp-cli-tests")
        .join(format!("{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_config(dir: &PathBuf, toml: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, toml).unwrap();
    Command::new(bin())
        .arg("--config")
        .arg(&cfg)
        .args(extra)
        .env_remove("TASEP_LPP_OUT")
        .output()
        .unwrap()
}

#[test]
fn minimal_mix_exact_config_runs() {
    let dir = scratch("mix-minimal");
    let out = run_config(
        &dir,
        &format!(
            "subcommand = \"mix-exact\"\nN = 3\nk = 1\nepsilon = 0.25\nseed = 1\nout = {:?}\n",
            dir.join("out")
        ),
        &[],
    );
    assert!(out.status.success(), "{out:?}");
    let csv = fs::read_to_string(dir.join("out/mix-exact.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# schema: mix-exact-v1");
    assert_eq!(lines[1], "epsilon,t_mix");
    assert_eq!(lines.len(), 3, "one data row expected: {csv}");
    assert!(lines[2].starts_with("0.25,"));
}

#[test]
fn k_not_below_n_is_rejected_naming_the_constraint() {
    let dir = scratch("bad-k");
    let out = run_config(
        &dir,
        "subcommand = \"mix-exact\"\nN = 4\nk = 4\nseed = 1\n",
        &["--out", dir.join("out").to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1 <= k < N"), "stderr: {err}");
}

#[test]
fn unknown_config_key_is_a_hard_error() {
    let dir = scratch("unknown-key");
    let out = run_config(
        &dir,
        "subcommand = \"mix-exact\"\nN = 4\nk = 2\nwibble = 3\n",
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("wibble"), "error names the key: {err}");
}

#[test]
fn seed_flag_overrides_file_seed() {
    let dir = scratch("seed-override");
    let out = run_config(
        &dir,
        &format!(
            "subcommand = \"simulate\"\nN = 6\nk = 3\nseed = 1\nhorizon = 2.0\nout = {:?}\n",
            dir.join("out")
        ),
        &["--seed", "7"],
    );
    assert!(out.status.success(), "{out:?}");
    let manifest = fs::read_to_string(dir.join("out/manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["config"]["seed"], 7);
}

#[test]
fn env_var_overrides_output_root() {
    let dir = scratch("env-out");
    let cfg = dir.join("run.toml");
    fs::write(
        &cfg,
        format!(
            "subcommand = \"mix-exact\"\nN = 3\nk = 1\nseed = 1\nout = {:?}\n",
            dir.join("ignored")
        ),
    )
    .unwrap();
    let out = Command::new(bin())
        .arg("--config")
        .arg(&cfg)
        .env("TASEP_LPP_OUT", dir.join("envdir"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(dir.join("envdir/mix-exact.csv").exists());
    assert!(!dir.join("ignored").exists());
}

#[test]
fn gamma_tv_grid_with_zero_delta_has_zero_tv_row() {
    let dir = scratch("gamma-zero");
    let out = run_config(
        &dir,
        &format!(
            "subcommand = \"gamma-tv\"\nseed = 1\nM_list = [5]\ndelta_list = [0.0, 0.2]\nout = {:?}\n",
            dir.join("out")
        ),
        &[],
    );
    assert!(out.status.success(), "{out:?}");
    let csv = fs::read_to_string(dir.join("out/gamma-tv.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "5,0,0"), "csv: {csv}");
}

#[test]
fn failed_runs_are_marked_invalid_in_the_manifest() {
    let dir = scratch("failed-marked");
    // sizes missing -> config error after the manifest is first written
    let out = run_config(
        &dir,
        &format!("subcommand = \"coalesce\"\nseed = 1\nout = {:?}\n", dir.join("out")),
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let manifest = fs::read_to_string(dir.join("out/manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(v["status"], "failed");
}

/// Quick configs exercising every subcommand.
fn small_configs() -> Vec<(&'static str, String)> {
    vec![
        (
            "simulate",
            "subcommand = \"simulate\"\nN = 6\nk = 3\nseed = 9\nhorizon = 2.0\nreplicas = 2\n".into(),
        ),
        (
            "mix-exact",
            "subcommand = \"mix-exact\"\nN = 4\nk = 2\nseed = 9\nepsilon_list = [0.5, 0.25]\n".into(),
        ),
        (
            "coalesce",
            "subcommand = \"coalesce\"\nseed = 9\nsizes = [[8, 2], [12, 2]]\nreplicas = 8\n".into(),
        ),
        (
            "lpp-stats",
            "subcommand = \"lpp-stats\"\nseed = 9\nn_list = [20, 40]\nreplicas = 40\nn = 20\nx_grid = [0.1, 0.5]\n"
                .into(),
        ),
        (
            "tf-scaling",
            "subcommand = \"tf-scaling\"\nseed = 9\nn_list = [20, 40]\nreplicas = 10\n".into(),
        ),
        (
            "agreement",
            "subcommand = \"agreement\"\nseed = 9\nn = 40\nN = 20\nk = 6\nreplicas = 10\n".into(),
        ),
        (
            "gamma-tv",
            "subcommand = \"gamma-tv\"\nseed = 9\nM_list = [1, 10]\ndelta_list = [0.0, 0.1]\n".into(),
        ),
        (
            "geodesic-coalesce",
            "subcommand = \"geodesic-coalesce\"\nN = 12\nk = 3\nseed = 9\nreplicas = 5\ntheta_list = [1.0]\n"
                .into(),
        ),
        (
            "bridge-check",
            "subcommand = \"bridge-check\"\nseed = 9\nreplicas = 3\nhorizon = 10.0\n".into(),
        ),
    ]
}

#[test]
fn every_subcommand_is_deterministic_given_config_and_seed() {
    for (name, toml) in small_configs() {
        let dir = scratch(&format!("det-{name}"));
        let mut digests = Vec::new();
        for pass in 0..2 {
            let out_dir = dir.join(format!("pass{pass}"));
            let out = run_config(
                &dir,
                &toml,
                &["--out", out_dir.to_str().unwrap()],
            );
            assert!(out.status.success(), "{name} pass {pass}: {out:?}");
            let mut csvs: Vec<PathBuf> = fs::read_dir(&out_dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            csvs.sort();
            assert!(!csvs.is_empty(), "{name} wrote no CSV");
            digests.push(
                csvs.iter()
                    .map(|p| fs::read(p).unwrap())
                    .collect::<Vec<_>>(),
            );
        }
        assert_eq!(digests[0], digests[1], "{name} reruns differ");
    }
}

#[test]
fn bridge_check_passes_its_self_test() {
    let dir = scratch("bridge-pass");
    let out = run_config(
        &dir,
        &format!(
            "subcommand = \"bridge-check\"\nseed = 4\nreplicas = 5\nout = {:?}\n",
            dir.join("out")
        ),
        &[],
    );
    assert!(out.status.success(), "{out:?}");
    let csv = fs::read_to_string(dir.join("out/bridge-check.csv")).unwrap();
    for line in csv.lines().skip(2) {
        let failures = line.rsplit(',').next().unwrap();
        assert_eq!(failures, "0", "csv: {csv}");
    }
}
