//! Experiment driver. Every run reads one flat TOML config (flags override
//! the shared knobs), derives all randomness from the single seed via
//! sub_seed(seed, tag64(subcommand), replica), and writes CSV artifacts plus
//! a manifest with content digests into the output directory.
//!
//! Exit codes: 0 ok, 2 config error, 3 runtime failure, 4 bridge-check
//! self-test failure.

mod config;
mod output;

use std::path::{Path, PathBuf};

use clap::Parser;

use tasep_lpp::estimators::{self, PairFamily};
use tasep_lpp::exact_mixing;
use tasep_lpp::growth_bridge::{
    competition_interfaces, competition_labels, expand_disagreement, lpp_driven_tasep,
    paired_growth_run, weight_driven_ring_oracle, GrowthInterface, InterfacePath,
};
use tasep_lpp::periodic_lpp::{Cell, Environment};
use tasep_lpp::ring_tasep::{disagreement, simulate, ClockSource, RingConfig};
use tasep_lpp::rng;

use config::{ConfigError, RunConfig};
use output::{emit, emit_plot, field, Csv, RunManifest};

const SUBCOMMANDS: &[&str] = &[
    "simulate",
    "mix-exact",
    "coalesce",
    "lpp-stats",
    "tf-scaling",
    "agreement",
    "gamma-tv",
    "geodesic-coalesce",
    "bridge-check",
];

#[derive(Parser, Debug)]
#[command(name = "tasep-lpp", version)]
/// Driver for ring-TASEP / periodic-LPP experiments.
struct Cli {
    /// TOML config file; flags below override its shared keys
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// output directory (env TASEP_LPP_OUT overrides)
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    replicas: Option<usize>,

    /// parallelism hint, recorded in the manifest only
    #[arg(long)]
    threads: Option<usize>,

    #[arg(long)]
    tolerance: Option<f64>,

    /// also write SVG plots of the primary series
    #[arg(long)]
    plot: bool,

    /// subcommand, overriding the config file's `subcommand` key
    subcommand: Option<String>,
}

enum Fail {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Fail {
    fn from(e: ConfigError) -> Self {
        Fail::Config(e.0)
    }
}

impl From<tasep_lpp::Error> for Fail {
    fn from(e: tasep_lpp::Error) -> Self {
        match e {
            tasep_lpp::Error::InvalidParameter(_) | tasep_lpp::Error::InvalidConfig(_) => {
                Fail::Config(e.to_string())
            }
            other => Fail::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Runtime(format!("io error: {e}"))
    }
}

fn error_record(msg: &str, code: i32) {
    eprintln!(
        "{}",
        serde_json::json!({ "error": msg, "exit_code": code })
    );
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        Some(path) => match config::load(path) {
            Ok(c) => c,
            Err(e) => {
                error_record(&e.0, 2);
                return 2;
            }
        },
        None => RunConfig::default(),
    };
    // flag overrides
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.display().to_string());
    }
    if cli.replicas.is_some() {
        cfg.replicas = cli.replicas;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cli.tolerance.is_some() {
        cfg.tolerance = cli.tolerance;
    }
    if cli.plot {
        cfg.plot = Some(true);
    }
    if let Some(sub) = &cli.subcommand {
        cfg.subcommand = Some(sub.clone());
    }

    let Some(sub) = cfg.subcommand.clone() else {
        error_record("missing required key: subcommand", 2);
        return 2;
    };
    if !SUBCOMMANDS.contains(&sub.as_str()) {
        error_record(
            &format!("unknown subcommand {sub:?}; expected one of {SUBCOMMANDS:?}"),
            2,
        );
        return 2;
    }

    // output root precedence: env var, then --out / config, then cwd
    let dir = std::env::var_os("TASEP_LPP_OUT")
        .map(PathBuf::from)
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        error_record(&format!("cannot create output directory: {e}"), 3);
        return 3;
    }

    let snapshot = serde_json::to_value(&cfg).expect("config serializes");
    let mut manifest = RunManifest::start(&sub, cfg.seed(), snapshot);
    if let Err(e) = manifest.write(&dir) {
        error_record(&format!("cannot write manifest: {e}"), 3);
        return 3;
    }

    let result = dispatch(&sub, &cfg, &dir, &mut manifest);
    let code = match &result {
        Ok(true) => 0,
        Ok(false) => 4,
        Err(Fail::Config(msg)) => {
            error_record(msg, 2);
            2
        }
        Err(Fail::Runtime(msg)) => {
            error_record(msg, 3);
            3
        }
    };
    manifest.finish(code == 0);
    if manifest.write(&dir).is_err() && code == 0 {
        return 3;
    }
    code
}

/// All subcommand randomness roots here.
fn run_seed(cfg: &RunConfig, sub: &str) -> u64 {
    rng::sub_seed(cfg.seed(), rng::tag64(sub), 0)
}

fn dispatch(sub: &str, cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<bool, Fail> {
    match sub {
        "simulate" => cmd_simulate(cfg, dir, m).map(|_| true),
        "mix-exact" => cmd_mix_exact(cfg, dir, m).map(|_| true),
        "coalesce" => cmd_coalesce(cfg, dir, m).map(|_| true),
        "lpp-stats" => cmd_lpp_stats(cfg, dir, m).map(|_| true),
        "tf-scaling" => cmd_tf_scaling(cfg, dir, m).map(|_| true),
        "agreement" => cmd_agreement(cfg, dir, m).map(|_| true),
        "gamma-tv" => cmd_gamma_tv(cfg, dir, m).map(|_| true),
        "geodesic-coalesce" => cmd_geodesic_coalesce(cfg, dir, m).map(|_| true),
        "bridge-check" => cmd_bridge_check(cfg, dir, m),
        _ => unreachable!("validated above"),
    }
}

fn fit_comments(csv: &mut Csv, fit: &estimators::FitResult) {
    csv.comment(&format!(
        "fit: slope={} intercept={} stderr={} r2={}",
        fit.slope, fit.intercept, fit.stderr, fit.r2
    ));
}

fn want_plot(cfg: &RunConfig) -> bool {
    cfg.plot.unwrap_or(false)
}

fn cmd_simulate(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<(), Fail> {
    let (n, k) = cfg.require_nk()?;
    let horizon = cfg.horizon.unwrap_or(10.0);
    if !(horizon > 0.0) {
        return Err(Fail::Config("horizon must be positive".into()));
    }
    let times: Vec<f64> = match &cfg.sample_times {
        Some(ts) => ts.clone(),
        None => (0..=10).map(|i| horizon * i as f64 / 10.0).collect(),
    };
    let replicas = cfg.replicas(1);
    let tag = rng::tag64("simulate");

    let mut csv = Csv::new("simulate", "simulate-v1", &["replica", "time", "config"]);
    let mut current = Vec::new();
    for rep in 0..replicas {
        let rs = rng::sub_seed(cfg.seed(), tag, rep as u64);
        let initial = RingConfig::random(n, k, rng::sub_seed(rs, rng::tag64("init"), 0))?;
        let clocks = ClockSource::new(rng::sub_seed(rs, rng::tag64("clocks"), 0));
        let traj = simulate(&initial, &clocks, horizon);
        for &t in &times {
            let c = traj.config_at(t);
            let bits: String = c.occupancy().iter().map(|&b| if b { '1' } else { '0' }).collect();
            csv.row(&[field(rep), field(t), bits]);
        }
        if rep == 0 {
            // primary series: cumulative particle current up to each sample time
            for &t in &times {
                let cur = traj.events.iter().filter(|e| e.applied && e.time <= t).count();
                current.push((t, cur as f64));
            }
        }
    }
    emit(dir, m, &csv)?;
    if want_plot(cfg) {
        emit_plot(dir, m, "simulate", &current, "cumulative current, replica 0")?;
    }
    Ok(())
}

fn cmd_mix_exact(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<(), Fail> {
    let (n, k) = cfg.require_nk()?;
    let tol = cfg.tolerance(1e-6);
    let eps_list: Vec<f64> = match &cfg.epsilon_list {
        Some(l) => l.clone(),
        None => vec![cfg.epsilon.unwrap_or(0.25)],
    };
    for &e in &eps_list {
        if !(0.0 < e && e < 1.0) {
            return Err(Fail::Config(format!("epsilon must lie in (0,1), got {e}")));
        }
    }
    let (ss, gm) = exact_mixing::build(n, k)?;
    let mut csv = Csv::new("mix-exact", "mix-exact-v1", &["epsilon", "t_mix"]);
    let mut series = Vec::new();
    for &e in &eps_list {
        let t = exact_mixing::mixing_time_with(&ss, &gm, e, tol)?;
        csv.row(&[field(e), field(t)]);
        series.push((e, t));
    }
    emit(dir, m, &csv)?;
    if want_plot(cfg) {
        emit_plot(dir, m, "mix-exact", &series, "t_mix against epsilon")?;
    }
    Ok(())
}

fn cmd_coalesce(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<(), Fail> {
    let sizes = cfg
        .sizes
        .clone()
        .ok_or(Fail::Config("missing required key: sizes".into()))?;
    let replicas = cfg.replicas(200);
    let cap_mult = cfg.cap_mult.unwrap_or(50.0);
    if !(cap_mult > 0.0) {
        return Err(Fail::Config("cap_mult must be positive".into()));
    }
    let families = [PairFamily::Adjacent, PairFamily::Antipodal, PairFamily::Random];
    let cap = |n: usize, k: usize| cap_mult * (n as f64).powi(2) / (k as f64).sqrt();
    let (rows, fit) =
        estimators::coalescence_scaling(&sizes, &families, replicas, cap, run_seed(cfg, "coalesce"))?;
    let mut csv = Csv::new(
        "coalesce",
        "coalesce-v1",
        &["N", "k", "median_tau", "censored", "replicas"],
    );
    fit_comments(&mut csv, &fit);
    for r in &rows {
        csv.row(&[
            field(r.n),
            field(r.k),
            field(r.median_tau),
            field(r.censored),
            field(r.replicas),
        ]);
    }
    emit(dir, m, &csv)?;
    if want_plot(cfg) {
        emit_plot(dir, m, "coalesce", &fit.points, "log median tau against log N")?;
    }
    Ok(())
}

fn cmd_lpp_stats(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<(), Fail> {
    let slope = cfg.slope()?;
    let n_list = cfg.n_list.clone().unwrap_or_else(|| vec![100, 200, 400, 800]);
    let replicas = cfg.replicas(500);
    let seed = run_seed(cfg, "lpp-stats");

    let (rows, fit) = estimators::lpp_moments(&n_list, slope, replicas, seed)?;
    let mut csv = Csv::new("lpp-stats", "lpp-stats-v1", &["n", "mean", "variance"]);
    fit_comments(&mut csv, &fit);
    for r in &rows {
        csv.row(&[field(r.n), field(r.mean), field(r.variance)]);
    }
    emit(dir, m, &csv)?;
    if want_plot(cfg) {
        emit_plot(dir, m, "lpp-stats", &fit.points, "log variance against log n")?;
    }

    // optional tail profile at a single n when an x grid is configured
    if let (Some(n), Some(grid)) = (cfg.n, cfg.x_grid.clone()) {
        let tp = estimators::tail_profile(n, slope, replicas, &grid, seed)?;
        let mut csv = Csv::new("lpp-tails", "lpp-tails-v1", &["x", "upper", "lower"]);
        fit_comments(&mut csv, &tp.upper_fit);
        fit_comments(&mut csv, &tp.lower_fit);
        for r in &tp.rows {
            csv.row(&[field(r.x), field(r.upper), field(r.lower)]);
        }
        emit(dir, m, &csv)?;
    }
    Ok(())
}

fn cmd_tf_scaling(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<(), Fail> {
    let slope = cfg.slope()?;
    let n_list = cfg
        .n_list
        .clone()
        .unwrap_or_else(|| vec![100, 200, 400, 800, 1600]);
    let replicas = cfg.replicas(300);
    let (rows, fit) =
        estimators::tf_scaling(&n_list, slope, replicas, run_seed(cfg, "tf-scaling"))?;
    let mut csv = Csv::new("tf-scaling", "tf-scaling-v1", &["n", "median_tf"]);
    fit_comments(&mut csv, &fit);
    for &(n, tf) in &rows {
        csv.row(&[field(n), field(tf)]);
    }
    emit(dir, m, &csv)?;
    if want_plot(cfg) {
        emit_plot(dir, m, "tf-scaling", &fit.points, "log median TF against log n")?;
    }
    Ok(())
}

fn cmd_agreement(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<(), Fail> {
    let slope = cfg.slope()?;
    let n = cfg.n.unwrap_or(400);
    let (big_n, k) = cfg.require_nk()?;
    let replicas = cfg.replicas(200);
    let freq = estimators::periodic_vs_iid_agreement(
        n,
        slope,
        big_n,
        k,
        replicas,
        run_seed(cfg, "agreement"),
    )?;
    let mut csv = Csv::new(
        "agreement",
        "agreement-v1",
        &["n", "m", "N", "k", "replicas", "frequency"],
    );
    csv.row(&[
        field(n),
        field(slope.value()),
        field(big_n),
        field(k),
        field(replicas),
        field(freq),
    ]);
    emit(dir, m, &csv)?;
    Ok(())
}

fn cmd_gamma_tv(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<(), Fail> {
    let m_list = cfg.m_list.clone().unwrap_or_else(|| vec![1, 100, 1000, 10000]);
    let delta_list = cfg
        .delta_list
        .clone()
        .unwrap_or_else(|| vec![0.0, 1e-3, 1e-2, 0.1, 0.5]);
    let mut csv = Csv::new("gamma-tv", "gamma-tv-v1", &["M", "delta", "tv"]);
    let mut series = Vec::new();
    for &mm in &m_list {
        series.clear();
        for &d in &delta_list {
            let tv = estimators::gamma_tv(mm, d)?;
            csv.row(&[field(mm), field(d), field(tv)]);
            series.push((d, tv));
        }
    }
    emit(dir, m, &csv)?;
    if want_plot(cfg) {
        emit_plot(dir, m, "gamma-tv", &series, "TV against delta, largest M")?;
    }
    Ok(())
}

fn cmd_geodesic_coalesce(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<(), Fail> {
    let (n, k) = cfg.require_nk()?;
    let theta_list = cfg.theta_list.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let replicas = cfg.replicas(100);
    let rows = estimators::coalescence_event_frequency(
        n,
        k,
        &theta_list,
        replicas,
        run_seed(cfg, "geodesic-coalesce"),
    )?;
    let mut csv = Csv::new(
        "geodesic-coalesce",
        "geodesic-coalesce-v1",
        &["theta", "v1", "holding", "violations", "replicas", "frequency"],
    );
    let mut series = Vec::new();
    for r in &rows {
        csv.row(&[
            field(r.theta),
            field(r.v1),
            field(r.holding),
            field(r.violations),
            field(r.replicas),
            field(r.frequency()),
        ]);
        series.push((r.theta, r.frequency()));
    }
    emit(dir, m, &csv)?;
    if want_plot(cfg) {
        emit_plot(dir, m, "geodesic-coalesce", &series, "criterion frequency against theta")?;
    }
    Ok(())
}

/// Self-test: the growth interface and the ring chain are the same process.
/// Suite `occupancy`: corner-growth occupancies against the weight-driven
/// ring oracle, bit exact at every sample time. Suite `displacement`: pair
/// displacements against competition-interface displacements at every jump
/// time until annihilation. Returns false (exit 4) on any failure.
fn cmd_bridge_check(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<bool, Fail> {
    let seed = run_seed(cfg, "bridge-check");
    let mut csv = Csv::new("bridge-check", "bridge-check-v1", &["check", "trials", "failures"]);

    // occupancy equivalence
    let n = cfg.n_sites.unwrap_or(6);
    let k = cfg.k.unwrap_or(3);
    if k == 0 || k >= n {
        return Err(Fail::Config(format!(
            "constraint violated: need 1 <= k < N, got N={n}, k={k}"
        )));
    }
    let horizon = cfg.horizon.unwrap_or(20.0);
    let n_times = 100usize;
    let times: Vec<f64> = (1..=n_times).map(|i| horizon * i as f64 / n_times as f64).collect();
    let env = Environment::periodic(n, k, rng::sub_seed(seed, rng::tag64("env"), 0))?;
    let eta0 = RingConfig::random(n, k, rng::sub_seed(seed, rng::tag64("init"), 0))?;
    let grown = lpp_driven_tasep(&env, &eta0, &times)?;
    let events = weight_driven_ring_oracle(&env, &eta0, horizon)?;
    let mut occ: Vec<bool> = eta0.occupancy().to_vec();
    let mut next = 0usize;
    let mut occ_failures = 0usize;
    for (i, &t) in times.iter().enumerate() {
        while next < events.len() && events[next].0 <= t {
            let s = events[next].1 as usize;
            occ.swap(s, (s + 1) % n);
            next += 1;
        }
        if grown[i].occupancy() != &occ[..] {
            occ_failures += 1;
        }
    }
    csv.row(&["occupancy".into(), field(times.len()), field(occ_failures)]);

    // displacement identity on coupled disagreement runs
    let replicas = cfg.replicas(20);
    let (pn, pk) = (10usize, 4usize);
    let mut trials = 0usize;
    let mut disp_failures = 0usize;
    let mut rep = 0u64;
    // draw until `replicas` informative runs (pair interior, tau reached)
    let mut attempts = 0u64;
    while trials < replicas && attempts < 50 * replicas as u64 {
        attempts += 1;
        let rs = rng::sub_seed(seed, rng::tag64("pairs"), rep);
        rep += 1;
        let Ok((a, b)) = estimators::sample_pair(pn, pk, PairFamily::Random, rs) else {
            continue;
        };
        let Ok(xi) = disagreement(&a, &b) else { continue };
        let twos = xi.second_class_sites();
        if twos.contains(&0) || twos.contains(&(pn - 1)) {
            continue;
        }
        let env = Environment::periodic(pn + 2, pk + 1, rng::sub_seed(rs, rng::tag64("env"), 0))?;
        let Ok((run, _)) = paired_growth_run(&env, &xi, 2000.0) else { continue };
        if run.tau.is_none() {
            continue;
        }
        let expanded = expand_disagreement(&xi)?.0;
        let g0 = GrowthInterface::from_config(&expanded, Cell::new(0, 0));
        let state = competition_labels(&env, &g0, run.j, run.j_tilde, 3000.0)?;
        let steps = run.moves_a.len().max(run.moves_b.len()) + 2;
        let Ok((phi, phi_tilde)) = competition_interfaces(&state, steps) else { continue };
        let check = |moves: &[(f64, i64)], path: &InterfacePath| -> usize {
            let mut bad = 0;
            for &(t, x) in moves {
                if Some(t) >= run.tau {
                    break;
                }
                let mut disp = 0i64;
                for w in path.windows(2) {
                    if w[1].1 > t {
                        break;
                    }
                    let d = w[1].0.minus(w[0].0);
                    disp += d.v1 - d.v2;
                }
                if x != disp {
                    bad += 1;
                }
            }
            bad
        };
        disp_failures += check(&run.moves_a, &phi) + check(&run.moves_b, &phi_tilde);
        trials += 1;
    }
    csv.row(&["displacement".into(), field(trials), field(disp_failures)]);
    emit(dir, m, &csv)?;

    Ok(occ_failures == 0 && disp_failures == 0 && trials > 0)
}
