//! Batch experiment runner for the torus-shuffle toolkit.
//!
//! Every subcommand resolves an `ExperimentConfig` (defaults, then config
//! file, then flags), writes a manifest describing the run, executes, and
//! emits a plot-ready table as CSV or JSON. Outputs are a pure function of
//! the manifest: worker count and wall time never affect the bytes.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use toruslab::coupling::{
    buffer_constant_ok, interference_bound_check, martingale_drift_check,
};
use toruslab::entropy::{entropy_decompose, PermLaw};
use toruslab::grid::{commutator_gamma, gamma_middle, Axis, Move};
use toruslab::mc::{
    estimate_match_probs, estimate_triple_prob, ExperimentConfig,
};
use toruslab::oracle::{
    barrier_min_constant, displacement_dp, enumerate_reachable, single_tile_mixing,
    two_step_equivalence, LawVector,
};
use toruslab::shuffle::run_chain;
use toruslab::stream::ShuffleStream;

#[derive(Parser)]
#[command(name = "toruslab", version, about = "Torus shuffle mixing-time experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Grid side length.
    #[arg(long)]
    n: Option<usize>,
    /// Box side length l.
    #[arg(long)]
    l: Option<usize>,
    /// Step count; defaults to the config horizon where applicable.
    #[arg(long)]
    steps: Option<u64>,
    /// Monte-Carlo trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Base seed (falls back to the config file, then TORUSLAB_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; affects speed only, never results.
    #[arg(long)]
    threads: Option<usize>,
    /// Flat JSON config file with strict keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the result table and manifest.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the lazy shuffle; one row per trial with end-state summaries.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Exact law trajectory for n <= 3: columns t, tv, ent.
    Exact {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Exact two-step vs 3-collision kernel comparison (n <= 3).
    EquivCheck {
        #[command(flatten)]
        common: CommonOpts,
        /// Collision probability numerator.
        #[arg(long, default_value_t = 1)]
        num: u64,
        /// Collision probability denominator.
        #[arg(long, default_value_t = 2)]
        den: u64,
    },
    /// Verify the commutator is a 3-cycle on an L for every row/column pair.
    GammaCheck {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Matching probabilities P(M2(x) = z, M1(x) < x) per candidate z.
    MatchStats {
        #[command(flatten)]
        common: CommonOpts,
        /// Focus label x.
        #[arg(long, default_value_t = 4)]
        x: usize,
        /// Candidate back-match labels (defaults to all z < x).
        #[arg(long, value_delimiter = ',')]
        z: Option<Vec<usize>>,
    },
    /// Probability that three tiles travel to three target cells.
    TripleProb {
        #[command(flatten)]
        common: CommonOpts,
        /// Source labels, e.g. 1,2,3.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        src: Vec<usize>,
        /// Target labels, e.g. 2,3,4.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        dst: Vec<usize>,
    },
    /// Coupled-process interference and martingale diagnostics.
    Couple {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Barrier / displacement random-walk dynamic programs.
    WalkDp {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, value_enum, default_value_t = DpMode::Barrier)]
        mode: DpMode,
        /// Barrier radius range, low end.
        #[arg(long, default_value_t = 2)]
        r_lo: i64,
        /// Barrier radius range, high end.
        #[arg(long, default_value_t = 8)]
        r_hi: i64,
        /// Displacement threshold m.
        #[arg(long, default_value_t = 4)]
        m: i64,
    },
    /// Single-tile mixing times across sizes with a log-log slope fit.
    MixScaling {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        sizes: Vec<usize>,
    },
    /// Chain-rule entropy decomposition of the exact n=2 law.
    EntropyDecompose {
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DpMode {
    Barrier,
    Displacement,
}

/// Errors that map onto the exit-code contract.
enum RunError {
    /// Bad input or environment: exit 2.
    Usage(String),
    /// An invariant check failed on valid input: exit 1.
    Assertion(String),
}

impl From<toruslab::Error> for RunError {
    fn from(e: toruslab::Error) -> Self {
        RunError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Assertion(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(RunError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config: ExperimentConfig,
    params: BTreeMap<String, serde_json::Value>,
    outputs: Vec<String>,
    tool_version: String,
    timestamp_unix_secs: u64,
}

/// Resolved inputs shared by every subcommand.
struct Resolved {
    cfg: ExperimentConfig,
    steps: Option<u64>,
    out_dir: PathBuf,
    format: Format,
}

fn resolve(common: &CommonOpts) -> Result<Resolved, RunError> {
    let (mut cfg, seed_from_file) = match &common.config {
        Some(path) => load_config(path)?,
        None => (ExperimentConfig::default(), false),
    };
    if let Some(n) = common.n {
        cfg.n = n;
    }
    if let Some(l) = common.l {
        cfg.l = l;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    cfg.seed = match common.seed {
        Some(s) => s,
        None if seed_from_file => cfg.seed,
        None => match std::env::var("TORUSLAB_SEED") {
            Ok(v) => v
                .parse()
                .map_err(|_| RunError::Usage(format!("TORUSLAB_SEED is not an integer: {v:?}")))?,
            Err(_) => cfg.seed,
        },
    };
    cfg.validate()?;
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(RunError::Usage("--threads must be positive".into()));
        }
        // ignore the error if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    std::fs::create_dir_all(&common.out_dir)
        .map_err(|e| RunError::Usage(format!("cannot create {}: {e}", common.out_dir.display())))?;
    let steps = common.steps.or(cfg.t);
    Ok(Resolved {
        cfg,
        steps,
        out_dir: common.out_dir.clone(),
        format: common.format,
    })
}

/// Strict flat-JSON config; returns whether the file set the seed itself.
fn load_config(path: &Path) -> Result<(ExperimentConfig, bool), RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| RunError::Usage(format!("config parse failure: {e}")))?;
    let has_seed = value
        .as_object()
        .is_some_and(|obj| obj.contains_key("seed"));
    let cfg: ExperimentConfig = serde_json::from_value(value)
        .map_err(|e| RunError::Usage(format!("config rejected: {e}")))?;
    Ok((cfg, has_seed))
}

/// A result table: a header plus stringified rows, written as CSV or JSON.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<String, RunError> {
        let (path, bytes) = match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns)
                    .and_then(|_| self.rows.iter().try_for_each(|r| w.write_record(r)))
                    .map_err(|e| RunError::Usage(format!("csv failure: {e}")))?;
                let bytes = w
                    .into_inner()
                    .map_err(|e| RunError::Usage(format!("csv failure: {e}")))?;
                (dir.join(format!("{stem}.csv")), bytes)
            }
            Format::Json => {
                let objects: Vec<BTreeMap<&str, &str>> = self
                    .rows
                    .iter()
                    .map(|r| {
                        self.columns
                            .iter()
                            .zip(r)
                            .map(|(&c, v)| (c, v.as_str()))
                            .collect()
                    })
                    .collect();
                let mut bytes = serde_json::to_vec_pretty(&objects)
                    .map_err(|e| RunError::Usage(format!("json failure: {e}")))?;
                bytes.push(b'\n');
                (dir.join(format!("{stem}.json")), bytes)
            }
        };
        std::fs::write(&path, bytes)
            .map_err(|e| RunError::Usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path.display().to_string())
    }
}

fn write_manifest(
    dir: &Path,
    subcommand: &str,
    cfg: &ExperimentConfig,
    params: BTreeMap<String, serde_json::Value>,
    outputs: Vec<String>,
) -> Result<(), RunError> {
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        config: cfg.clone(),
        params,
        outputs,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix_secs: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| RunError::Usage(format!("manifest failure: {e}")))?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes)
        .map_err(|e| RunError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn json_u64(v: u64) -> serde_json::Value {
    serde_json::Value::from(v)
}

fn run(cmd: Cmd) -> Result<(), RunError> {
    match cmd {
        Cmd::Simulate { common } => simulate(&common),
        Cmd::Exact { common } => exact(&common),
        Cmd::EquivCheck { common, num, den } => equiv_check(&common, num, den),
        Cmd::GammaCheck { common } => gamma_check(&common),
        Cmd::MatchStats { common, x, z } => match_stats(&common, x, z),
        Cmd::TripleProb { common, src, dst } => triple_prob(&common, &src, &dst),
        Cmd::Couple { common } => couple(&common),
        Cmd::WalkDp {
            common,
            mode,
            r_lo,
            r_hi,
            m,
        } => walk_dp(&common, mode, r_lo, r_hi, m),
        Cmd::MixScaling { common, sizes } => mix_scaling(&common, &sizes),
        Cmd::EntropyDecompose { common } => entropy_cmd(&common),
    }
}

fn simulate(common: &CommonOpts) -> Result<(), RunError> {
    let r = resolve(common)?;
    let cfg = &r.cfg;
    let steps = r
        .steps
        .unwrap_or(2 * (cfg.l * cfg.l * cfg.n) as u64);
    let stem = "simulate";
    let params = BTreeMap::from([("steps".to_string(), json_u64(steps))]);
    write_manifest(&r.out_dir, stem, cfg, params.clone(), vec![])?;
    let start = toruslab::grid::GridPerm::identity(cfg.n);
    let mut table = Table::new(vec!["trial", "sign", "moved_tiles"]);
    let ends: Vec<(i8, usize)> = toruslab::mc::map_trials(cfg.trials, |trial| {
        let end = run_chain(&start, steps, ShuffleStream::new(cfg.seed, trial));
        (end.sign(), end.support().len())
    });
    for (trial, (sign, moved)) in ends.iter().enumerate() {
        table.push(vec![trial.to_string(), sign.to_string(), moved.to_string()]);
    }
    let out = table.write(&r.out_dir, stem, r.format)?;
    write_manifest(&r.out_dir, stem, cfg, params, vec![out.clone()])?;
    println!("wrote {out} ({} trials of {steps} steps)", cfg.trials);
    Ok(())
}

fn exact(common: &CommonOpts) -> Result<(), RunError> {
    let r = resolve(common)?;
    let cfg = &r.cfg;
    if cfg.n > 3 {
        return Err(RunError::Usage(format!(
            "exact trajectories need n <= 3, got {}",
            cfg.n
        )));
    }
    let stem = "exact";
    write_manifest(&r.out_dir, stem, cfg, BTreeMap::new(), vec![])?;
    let class = enumerate_reachable(cfg.n)?;
    let mut law = LawVector::point_mass_at_identity(&class);
    let mut table = Table::new(vec!["t", "tv", "ent"]);
    let mut t = 0u64;
    let mut t_star: Option<u64> = None;
    loop {
        let tv = law.tv_uniform();
        table.push(vec![t.to_string(), format!("{tv}"), format!("{}", law.ent())]);
        if t_star.is_none() && tv <= 0.25 {
            t_star = Some(t);
        }
        let done = match r.steps {
            Some(s) => t >= s,
            None => t_star.is_some(),
        };
        if done {
            break;
        }
        law.step(&class);
        t += 1;
    }
    let params = BTreeMap::from([(
        "t_star".to_string(),
        serde_json::Value::from(t_star),
    )]);
    let out = table.write(&r.out_dir, stem, r.format)?;
    write_manifest(&r.out_dir, stem, cfg, params, vec![out.clone()])?;
    match t_star {
        Some(ts) => println!("wrote {out}; mixing time t* = {ts}"),
        None => println!("wrote {out}; tv still above 1/4 at t = {t}"),
    }
    Ok(())
}

fn equiv_check(common: &CommonOpts, num: u64, den: u64) -> Result<(), RunError> {
    let r = resolve(common)?;
    let cfg = &r.cfg;
    let stem = "equiv-check";
    let params = BTreeMap::from([
        ("gamma_num".to_string(), json_u64(num)),
        ("gamma_den".to_string(), json_u64(den)),
    ]);
    write_manifest(&r.out_dir, stem, cfg, params.clone(), vec![])?;
    let d = two_step_equivalence(cfg.n, num, den)?;
    let mut table = Table::new(vec!["n", "gamma_num", "gamma_den", "disc_num", "disc_den"]);
    table.push(vec![
        cfg.n.to_string(),
        num.to_string(),
        den.to_string(),
        d.num.to_string(),
        d.den.to_string(),
    ]);
    let out = table.write(&r.out_dir, stem, r.format)?;
    write_manifest(&r.out_dir, stem, cfg, params, vec![out])?;
    println!("discrepancy {}/{}", d.num, d.den);
    if !d.is_zero() {
        return Err(RunError::Assertion(format!(
            "two-step law differs from the collision law by {}/{}",
            d.num, d.den
        )));
    }
    Ok(())
}

fn gamma_check(common: &CommonOpts) -> Result<(), RunError> {
    let r = resolve(common)?;
    let cfg = &r.cfg;
    let n = cfg.n;
    let stem = "gamma-check";
    write_manifest(&r.out_dir, stem, cfg, BTreeMap::new(), vec![])?;
    let mut cases = 0u64;
    let mut failures = 0u64;
    for ry in 0..n {
        for cx in 0..n {
            for rdir in [1i8, -1] {
                for cdir in [1i8, -1] {
                    cases += 1;
                    let rm = Move::rotate(Axis::Row, ry, rdir);
                    let cm = Move::rotate(Axis::Col, cx, cdir);
                    let g = commutator_gamma(rm, cm, n)?;
                    let middle = gamma_middle(rm, cm, n)?;
                    let support = g.support();
                    // a 3-cycle moving the intersection cell, with the other
                    // two cells on its row and column (an L shape)
                    let ok = support.len() == 3
                        && support.contains(&middle)
                        && support.iter().all(|&p| {
                            p == middle || p / n == middle / n || p % n == middle % n
                        })
                        && support.iter().filter(|&&p| p / n == middle / n).count() == 2
                        && support.iter().filter(|&&p| p % n == middle % n).count() == 2;
                    if !ok {
                        failures += 1;
                    }
                }
            }
        }
    }
    let mut table = Table::new(vec!["n", "cases", "failures"]);
    table.push(vec![n.to_string(), cases.to_string(), failures.to_string()]);
    let out = table.write(&r.out_dir, stem, r.format)?;
    write_manifest(&r.out_dir, stem, cfg, BTreeMap::new(), vec![out])?;
    println!("checked {cases} commutator cases, {failures} failures");
    if failures > 0 {
        return Err(RunError::Assertion(format!(
            "{failures} commutators were not L-shaped 3-cycles"
        )));
    }
    Ok(())
}

fn match_stats(common: &CommonOpts, x: usize, z: Option<Vec<usize>>) -> Result<(), RunError> {
    let r = resolve(common)?;
    let cfg = &r.cfg;
    let z = z.unwrap_or_else(|| (1..x).collect());
    let stem = "match-stats";
    let (t_start, t) = cfg.matching_window();
    let params = BTreeMap::from([
        ("x".to_string(), json_u64(x as u64)),
        (
            "z".to_string(),
            serde_json::Value::from(z.clone()),
        ),
        ("window_start".to_string(), json_u64(t_start)),
        ("t".to_string(), json_u64(t)),
    ]);
    write_manifest(&r.out_dir, stem, cfg, params.clone(), vec![])?;
    let table_data = estimate_match_probs(cfg, x, &z)?;
    let mut table = Table::new(vec![
        "z", "estimate", "ci_low", "ci_high", "successes", "trials",
    ]);
    for row in &table_data.rows {
        let rep = &row.report;
        table.push(vec![
            row.z_label.to_string(),
            format!("{}", rep.estimate),
            format!("{}", rep.ci_low),
            format!("{}", rep.ci_high),
            rep.successes.to_string(),
            rep.trials.to_string(),
        ]);
    }
    let out = table.write(&r.out_dir, stem, r.format)?;
    write_manifest(&r.out_dir, stem, cfg, params, vec![out.clone()])?;
    println!("wrote {out}; A_hat({x}) = {}", table_data.a_hat);
    Ok(())
}

fn triple_prob(common: &CommonOpts, src: &[usize], dst: &[usize]) -> Result<(), RunError> {
    let r = resolve(common)?;
    let cfg = &r.cfg;
    let [s0, s1, s2] = src else {
        return Err(RunError::Usage("--src needs exactly three labels".into()));
    };
    let [d0, d1, d2] = dst else {
        return Err(RunError::Usage("--dst needs exactly three labels".into()));
    };
    let stem = "triple-prob";
    let params = BTreeMap::from([
        ("src".to_string(), serde_json::Value::from(src.to_vec())),
        ("dst".to_string(), serde_json::Value::from(dst.to_vec())),
        ("t_prime".to_string(), json_u64(cfg.resolved_t_prime())),
    ]);
    write_manifest(&r.out_dir, stem, cfg, params.clone(), vec![])?;
    let rep = estimate_triple_prob(cfg, (*s0, *s1, *s2), (*d0, *d1, *d2))?;
    let mut table = Table::new(vec!["estimate", "ci_low", "ci_high", "successes", "trials"]);
    table.push(vec![
        format!("{}", rep.estimate),
        format!("{}", rep.ci_low),
        format!("{}", rep.ci_high),
        rep.successes.to_string(),
        rep.trials.to_string(),
    ]);
    let out = table.write(&r.out_dir, stem, r.format)?;
    write_manifest(&r.out_dir, stem, cfg, params, vec![out.clone()])?;
    println!(
        "wrote {out}; estimate {} [{}, {}]",
        rep.estimate, rep.ci_low, rep.ci_high
    );
    Ok(())
}

fn couple(common: &CommonOpts) -> Result<(), RunError> {
    let r = resolve(common)?;
    let cfg = &r.cfg;
    let stem = "couple";
    let t = 2 * (cfg.l * cfg.l) as u64 * cfg.n as u64;
    let params = BTreeMap::from([("t".to_string(), json_u64(t))]);
    write_manifest(&r.out_dir, stem, cfg, params.clone(), vec![])?;
    let rep = interference_bound_check(cfg.n, cfg.l, cfg.trials, cfg.seed)?;
    let mart = martingale_drift_check(cfg.n, t, cfg.trials, cfg.seed)?;
    let mut table = Table::new(vec!["metric", "mean", "se", "bound", "ok"]);
    let fmt = |v: f64| format!("{v}");
    table.push(vec![
        "a_k_over_2n".into(),
        fmt(rep.a_k_scaled.0),
        fmt(rep.a_k_scaled.1),
        fmt(rep.a_k_bound),
        rep.a_bound_ok.to_string(),
    ]);
    table.push(vec![
        "wrap_count".into(),
        fmt(rep.wrap_mean.0),
        fmt(rep.wrap_mean.1),
        "32".into(),
        rep.wrap_bound_ok.to_string(),
    ]);
    table.push(vec![
        "n_k".into(),
        fmt(rep.n_k_mean.0),
        fmt(rep.n_k_mean.1),
        fmt(rep.n_k_predicted),
        (rep.n_k_mean.0 - rep.n_k_predicted).abs().le(&(4.0 * rep.n_k_mean.1 + 0.05)).to_string(),
    ]);
    table.push(vec![
        "m_drift".into(),
        fmt(mart.m_delta.0),
        fmt(mart.m_delta.1),
        "0".into(),
        mart.m_ok.to_string(),
    ]);
    table.push(vec![
        "v1_drift".into(),
        fmt(mart.v1_delta.0),
        fmt(mart.v1_delta.1),
        "0".into(),
        mart.v1_ok.to_string(),
    ]);
    table.push(vec![
        "z_super".into(),
        fmt(mart.z_super.0),
        fmt(mart.z_super.1),
        "0".into(),
        mart.z_ok.to_string(),
    ]);
    let out = table.write(&r.out_dir, stem, r.format)?;
    write_manifest(&r.out_dir, stem, cfg, params, vec![out.clone()])?;
    println!("wrote {out}");
    let all_ok = rep.a_bound_ok && rep.wrap_bound_ok && mart.m_ok && mart.v1_ok && mart.z_ok;
    if !all_ok {
        return Err(RunError::Assertion(
            "an interference or martingale bound failed; see the table".into(),
        ));
    }
    Ok(())
}

fn walk_dp(
    common: &CommonOpts,
    mode: DpMode,
    r_lo: i64,
    r_hi: i64,
    m: i64,
) -> Result<(), RunError> {
    let r = resolve(common)?;
    let cfg = &r.cfg;
    let stem = "walk-dp";
    match mode {
        DpMode::Barrier => {
            let k = cfg.k.round() as i64;
            let params = BTreeMap::from([
                ("mode".to_string(), serde_json::Value::from("barrier")),
                ("K".to_string(), json_u64(k as u64)),
                ("r_lo".to_string(), json_u64(r_lo as u64)),
                ("r_hi".to_string(), json_u64(r_hi as u64)),
            ]);
            write_manifest(&r.out_dir, stem, cfg, params.clone(), vec![])?;
            if r_lo < 1 || r_hi < r_lo {
                return Err(RunError::Usage("need 1 <= r_lo <= r_hi".into()));
            }
            let mut table = Table::new(vec!["r", "c_min"]);
            let mut c_hat = f64::INFINITY;
            for radius in r_lo..=r_hi {
                let c = barrier_min_constant(k, radius, radius)?;
                c_hat = c_hat.min(c);
                table.push(vec![radius.to_string(), format!("{c}")]);
            }
            let buffer_ok = buffer_constant_ok(cfg.k);
            let out = table.write(&r.out_dir, stem, r.format)?;
            write_manifest(&r.out_dir, stem, cfg, params, vec![out.clone()])?;
            println!("wrote {out}; C_hat = {c_hat}; buffer constant ok: {buffer_ok}");
            if !(c_hat > 0.0) || !buffer_ok {
                return Err(RunError::Assertion(
                    "barrier constant not positive or buffer condition failed".into(),
                ));
            }
        }
        DpMode::Displacement => {
            let s = r
                .steps
                .unwrap_or((cfg.n as u64 * (m * m) as u64) / 6);
            let params = BTreeMap::from([
                ("mode".to_string(), serde_json::Value::from("displacement")),
                ("m".to_string(), json_u64(m as u64)),
                ("s".to_string(), json_u64(s)),
            ]);
            write_manifest(&r.out_dir, stem, cfg, params.clone(), vec![])?;
            let v = displacement_dp(cfg.n, s, m)?;
            let ok = v <= 1.0 / 12.0;
            let mut table = Table::new(vec!["n", "m", "s", "value", "bound", "ok"]);
            table.push(vec![
                cfg.n.to_string(),
                m.to_string(),
                s.to_string(),
                format!("{v}"),
                format!("{}", 1.0 / 12.0),
                ok.to_string(),
            ]);
            let out = table.write(&r.out_dir, stem, r.format)?;
            write_manifest(&r.out_dir, stem, cfg, params, vec![out.clone()])?;
            println!("wrote {out}; tail bound {v}");
            if !ok {
                return Err(RunError::Assertion(format!(
                    "displacement tail {v} exceeds 1/12"
                )));
            }
        }
    }
    Ok(())
}

fn mix_scaling(common: &CommonOpts, sizes: &[usize]) -> Result<(), RunError> {
    let r = resolve(common)?;
    let cfg = &r.cfg;
    let stem = "mix-scaling";
    let params = BTreeMap::from([(
        "sizes".to_string(),
        serde_json::Value::from(sizes.to_vec()),
    )]);
    write_manifest(&r.out_dir, stem, cfg, params.clone(), vec![])?;
    if sizes.iter().any(|&n| n < 2) {
        return Err(RunError::Usage("sizes must be at least 2".into()));
    }
    let mut table = Table::new(vec!["n", "t_star"]);
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let t_star = single_tile_mixing(n);
        points.push((n as f64, t_star as f64));
        table.push(vec![n.to_string(), t_star.to_string()]);
    }
    let (slope, se) = toruslab::mc::fit_mixing_exponent(&points)?;
    let mut params = params;
    params.insert("slope".to_string(), serde_json::Value::from(slope));
    params.insert("slope_stderr".to_string(), serde_json::Value::from(se));
    let out = table.write(&r.out_dir, stem, r.format)?;
    write_manifest(&r.out_dir, stem, cfg, params, vec![out.clone()])?;
    println!("wrote {out}; slope {slope} +- {se}");
    Ok(())
}

fn entropy_cmd(common: &CommonOpts) -> Result<(), RunError> {
    let r = resolve(common)?;
    let mut cfg = r.cfg.clone();
    if common.n.is_none() {
        cfg.n = 2;
    }
    if cfg.n != 2 {
        return Err(RunError::Usage(
            "the full-deck decomposition needs n = 2 (larger decks exceed the explicit-law cap)"
                .into(),
        ));
    }
    let steps = r.steps.unwrap_or(4);
    let stem = "entropy-decompose";
    let params = BTreeMap::from([("steps".to_string(), json_u64(steps))]);
    write_manifest(&r.out_dir, stem, &cfg, params.clone(), vec![])?;
    let class = enumerate_reachable(2)?;
    let law = toruslab::oracle::exact_evolve(&class, steps);
    let support = (0..class.len())
        .filter(|&s| law.probs[s] > 0.0)
        .map(|s| {
            let perm: Vec<u8> = class
                .member(s)
                .tile_at_view()
                .iter()
                .map(|&t| t as u8)
                .collect();
            (perm, law.probs[s])
        })
        .collect();
    let perm_law = PermLaw::new(4, support)?;
    let decomp = entropy_decompose(&perm_law)?;
    let mut table = Table::new(vec!["term", "value"]);
    table.push(vec!["sign".into(), format!("{}", decomp.sign_term)]);
    for (i, e) in decomp.tilde_e.iter().enumerate() {
        table.push(vec![format!("tilde_e_{}", i + 3), format!("{e}")]);
    }
    table.push(vec!["residual".into(), format!("{}", decomp.residual)]);
    table.push(vec!["total".into(), format!("{}", decomp.total())]);
    table.push(vec!["ent".into(), format!("{}", perm_law.ent())]);
    let out = table.write(&r.out_dir, stem, r.format)?;
    write_manifest(&r.out_dir, stem, &cfg, params, vec![out.clone()])?;
    println!("wrote {out}");
    if (decomp.total() - perm_law.ent()).abs() > 1e-9 {
        return Err(RunError::Assertion(format!(
            "decomposition total {} differs from ENT {}",
            decomp.total(),
            perm_law.ent()
        )));
    }
    Ok(())
}
