use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dualgap::data::three_way_split;
use dualgap::experiment::{
    evaluate_trajectory, evaluate_trajectory_snapshot_approx, run_sweep, train_run, Evaluation, DEFAULT_SPLIT_SIZES,
    TUNING_BUDGETS, TUNING_CONFIGS,
};
use dualgap::game::GanGame;
use dualgap::io::{
    apply_train_entries, parse_config, read_csv, read_snapshot_dir, train_entries, write_csv_file, write_snapshot_dir,
    DgReportRow, RunManifest, TrainLogRow, DG_REPORT_HEADER, TRAIN_LOG_HEADER,
};
use dualgap::metric::{DgConfig, SnapshotPolicy, DEFAULT_ADVERSARY_STEPS};
use dualgap::oracle::{bump_discriminator, ConvergenceBudget, DiscreteGanGame, Scalar1dGanSetup};
use dualgap::rng::stream;
use dualgap::train::{Preset, TrainConfig};
use dualgap::{Error, FormatError};

const EXIT_INVARIANT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_FORMAT: u8 = 4;
const SEED_ENV: &str = "DUALGAP_SEED";
const SPLIT_KEYS: [&str; 3] = ["n_train", "n_adv", "n_test"];

#[derive(Parser)]
#[command(name = "dualgap", version, about = "Train toy GANs and measure their duality gap")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a GAN and store its loss log and snapshots.
    Train(TrainArgs),
    /// Estimate the duality gap of every snapshot of a run.
    Eval(EvalArgs),
    /// Rank several learning-rate configurations by DG at several budgets.
    Sweep(SweepArgs),
    /// Check the exact-game invariants.
    OracleCheck(OracleArgs),
    /// Merge a run's loss log and DG report into one table.
    Report(ReportArgs),
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::parse(s).ok_or_else(|| {
        let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
        format!("unknown preset {s:?}; valid presets: {}", names.join(", "))
    })
}

fn parse_policy(s: &str) -> Result<SnapshotPolicy, String> {
    SnapshotPolicy::parse(s).ok_or_else(|| format!("unknown policy {s:?}; expected past-only or past-and-future"))
}

#[derive(Args)]
struct TrainSettings {
    #[arg(long, value_parser = parse_preset, default_value = "ring-stable")]
    preset: Preset,
    /// Flat `key = value` file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Falls back to the DUALGAP_SEED environment variable, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long)]
    lr_g: Option<f64>,
    #[arg(long)]
    lr_d: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Split sizes as `train,adversary,test`.
    #[arg(long, value_parser = parse_sizes)]
    split: Option<(usize, usize, usize)>,
}

fn parse_sizes(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("bad size {p:?}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok((a, b, c)),
        _ => Err("expected three positive sizes `train,adversary,test`".into()),
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    settings: TrainSettings,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    /// Adversary steps per search.
    #[arg(long, default_value_t = DEFAULT_ADVERSARY_STEPS)]
    k: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict adversaries to stored snapshots instead of optimizing them.
    #[arg(long, value_parser = parse_policy)]
    snapshot_approx: Option<SnapshotPolicy>,
    /// Defaults to `dg_report.csv` (or `dg_report_<policy>.csv`) inside the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    settings: TrainSettings,
    /// Comma-separated `lr_d:lr_g` pairs; defaults to the five tuning configurations.
    #[arg(long)]
    configs: Option<String>,
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleCase {
    /// Random discrete games: DG bounds JSD, plug-in and approximate-DG checks.
    Sweep,
    /// Data and generator coincide under a constant discriminator.
    EqualDistributions,
    /// Descent and grid search agree on the 1D location family.
    GridVsDescent,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "sweep")]
    case: OracleCase,
    #[arg(long, default_value_t = 50)]
    games: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    /// Which DG report to merge; defaults to `dg_report.csv`.
    #[arg(long)]
    dg_report: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>, Error> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Preset, then config file, then environment seed, then flags.
fn build_config(s: &TrainSettings) -> Result<(TrainConfig, (usize, usize, usize)), Error> {
    let mut cfg = TrainConfig::preset(s.preset);
    let mut sizes = DEFAULT_SPLIT_SIZES;
    let env_seed = resolve_seed(None)?;
    if let Some(seed) = env_seed {
        cfg.seed = seed;
    }
    if let Some(path) = &s.config {
        let entries = parse_config(&fs::read_to_string(path)?)?;
        apply_train_entries(&mut cfg, &entries, &SPLIT_KEYS)?;
        for (key, slot) in SPLIT_KEYS.iter().zip([&mut sizes.0, &mut sizes.1, &mut sizes.2]) {
            if let Some(v) = dualgap::io::config_value(&entries, key)? {
                *slot = v;
            }
        }
    }
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    if let Some(v) = s.steps {
        cfg.total_steps = v;
    }
    if let Some(v) = s.snapshot_every {
        cfg.snapshot_every = v;
    }
    if let Some(v) = s.lr_g {
        cfg.lr_g = v;
    }
    if let Some(v) = s.lr_d {
        cfg.lr_d = v;
    }
    if let Some(v) = s.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = s.split {
        sizes = v;
    }
    if sizes.0 == 0 || sizes.1 == 0 || sizes.2 == 0 {
        return Err(Error::Config("split sizes must be at least 1".into()));
    }
    cfg.validate()?;
    Ok((cfg, sizes))
}

fn manifest_config(cfg: &TrainConfig, sizes: (usize, usize, usize)) -> BTreeMap<String, String> {
    let mut m = train_entries(cfg);
    for (k, v) in SPLIT_KEYS.iter().zip([sizes.0, sizes.1, sizes.2]) {
        m.insert(k.to_string(), v.to_string());
    }
    m
}

fn prepare_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

fn cmd_train(args: TrainArgs) -> Result<u8, Error> {
    let (cfg, sizes) = build_config(&args.settings)?;
    prepare_dir(&args.out)?;
    let mut manifest = RunManifest::new("train", cfg.seed, manifest_config(&cfg, sizes));
    manifest.artifacts.insert("train_log".into(), "train_log.csv".into());
    manifest.artifacts.insert("snapshots".into(), "snapshots".into());
    manifest.write_into(&args.out)?;

    let run = match train_run(&cfg, sizes) {
        Err(Error::NumericAbort { step, last_finite }) => {
            if let Some(snap) = last_finite {
                write_snapshot_dir(&[*snap], &args.out.join("snapshots"))?;
            }
            eprintln!("training diverged at step {step}; last finite snapshot kept");
            return Ok(EXIT_NUMERIC);
        }
        other => other?,
    };
    let rows: Vec<TrainLogRow> = run.log.rows.iter().map(TrainLogRow::from).collect();
    write_csv_file(&rows, &TRAIN_LOG_HEADER, &args.out.join("train_log.csv"))?;
    let paths = write_snapshot_dir(&run.log.snapshots, &args.out.join("snapshots"))?;
    println!(
        "trained {} for {} steps: {} loss rows, {} snapshots in {}",
        cfg.mixture.name(),
        cfg.total_steps,
        rows.len(),
        paths.len(),
        args.out.display()
    );
    Ok(0)
}

/// Training config and split sizes recorded by `train`.
fn load_run(dir: &Path) -> Result<(TrainConfig, (usize, usize, usize)), Error> {
    let manifest = RunManifest::read(&dir.join("manifest.json"))?;
    let mut cfg = TrainConfig::preset(Preset::RingStable);
    apply_train_entries(&mut cfg, &manifest.config, &SPLIT_KEYS)?;
    let get = |k: &str| -> Result<usize, Error> {
        dualgap::io::config_value(&manifest.config, k)?.ok_or_else(|| Error::Config(format!("manifest lacks {k}")))
    };
    Ok((cfg, (get("n_train")?, get("n_adv")?, get("n_test")?)))
}

fn cmd_eval(args: EvalArgs) -> Result<u8, Error> {
    let (cfg, sizes) = load_run(&args.run)?;
    let snapshots = read_snapshot_dir(&args.run.join("snapshots"))?;
    if snapshots.is_empty() {
        return Err(Error::Config(format!(
            "no snapshots in {}",
            args.run.join("snapshots").display()
        )));
    }
    let game = GanGame::new(
        snapshots[0].gen.spec().to_vec(),
        snapshots[0].disc.spec().to_vec(),
        cfg.game.latent_prior,
        cfg.game.epsilon_clip,
    )?;
    let seed = resolve_seed(args.seed)?.unwrap_or(cfg.seed);
    let mixture = cfg.mixture.build();
    let split = three_way_split(&mixture, sizes, cfg.seed)?;
    let dg = DgConfig::with_steps(args.k, seed);
    let file = match args.snapshot_approx {
        Some(p) => format!("dg_report_{}.csv", p.name()),
        None => "dg_report.csv".into(),
    };
    let out = args.out.unwrap_or_else(|| args.run.join(&file));
    let mut config = manifest_config(&cfg, sizes);
    config.insert("k".into(), args.k.to_string());
    config.insert("eval_seed".into(), seed.to_string());
    config.insert("select_every".into(), dg.select_every.to_string());
    config.insert("adversary_lr".into(), dg.adversary_optimizer.lr.to_string());
    config.insert(
        "snapshot_approx".into(),
        args.snapshot_approx.map_or("none", |p| p.name()).to_string(),
    );
    let mut manifest = RunManifest::new("eval", seed, config);
    manifest.artifacts.insert("dg_report".into(), out.display().to_string());
    let eval_dir = args.run.join(match args.snapshot_approx {
        Some(p) => format!("eval_{}", p.name()),
        None => "eval".into(),
    });
    prepare_dir(&eval_dir)?;
    manifest.write_into(&eval_dir)?;

    let evals: Vec<Evaluation> = match args.snapshot_approx {
        Some(policy) => evaluate_trajectory_snapshot_approx(&game, &snapshots, &split, &mixture, policy, seed)?,
        None => evaluate_trajectory(&game, &snapshots, &split, &mixture, &dg)?,
    };
    let rows: Vec<DgReportRow> = evals.iter().map(Evaluation::row).collect();
    write_csv_file(&rows, &DG_REPORT_HEADER, &out)?;
    if let Some(last) = rows.last() {
        println!(
            "evaluated {} snapshots; step {}: dg {:.4}, minimax {:.4}, modes {}, within 3 std {}/{}",
            rows.len(),
            last.step,
            last.dg,
            last.minimax,
            last.modes,
            last.std3,
            last.total
        );
    }
    Ok(0)
}

fn parse_lr_pairs(s: &str) -> Result<Vec<(f64, f64)>, Error> {
    s.split(',')
        .map(|pair| {
            let (d, g) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("expected lr_d:lr_g, got {pair:?}")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad learning rate {v:?}")))
            };
            Ok((parse(d)?, parse(g)?))
        })
        .collect()
}

#[derive(Serialize)]
struct SweepRow {
    config: usize,
    lr_d: f64,
    lr_g: f64,
    k: usize,
    dg: f64,
    minimax: f64,
    maximin: f64,
    modes: usize,
    std3: usize,
}

#[derive(Serialize)]
struct RankingRow {
    k: usize,
    rank: usize,
    config: usize,
    lr_d: f64,
    lr_g: f64,
    dg: f64,
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, Error> {
    let (cfg, sizes) = build_config(&args.settings)?;
    let lrs = match &args.configs {
        Some(s) => parse_lr_pairs(s)?,
        None => TUNING_CONFIGS.to_vec(),
    };
    let budgets = args.budgets.clone().unwrap_or_else(|| TUNING_BUDGETS.to_vec());
    prepare_dir(&args.out)?;
    let mut config = manifest_config(&cfg, sizes);
    config.insert(
        "configs".into(),
        lrs.iter()
            .map(|(d, g)| format!("{d}:{g}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    config.insert(
        "budgets".into(),
        budgets.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    let mut manifest = RunManifest::new("sweep", cfg.seed, config);
    manifest.artifacts.insert("sweep".into(), "sweep.csv".into());
    manifest.artifacts.insert("ranking".into(), "ranking.csv".into());
    manifest.write_into(&args.out)?;

    let dg = DgConfig::with_steps(budgets.iter().copied().max().unwrap_or(0), cfg.seed);
    let result = run_sweep(&cfg, &lrs, &budgets, sizes, &dg)?;
    let mut rows = Vec::new();
    for (i, e) in result.entries.iter().enumerate() {
        for ev in &e.evaluations {
            rows.push(SweepRow {
                config: i,
                lr_d: e.lr_d,
                lr_g: e.lr_g,
                k: ev.report.k,
                dg: ev.report.dg,
                minimax: ev.report.minimax,
                maximin: ev.report.maximin,
                modes: ev.quality.modes_covered,
                std3: ev.quality.within_3std,
            });
        }
    }
    let mut ranking = Vec::new();
    for (b, order) in result.rankings().iter().enumerate() {
        for (rank, &i) in order.iter().enumerate() {
            ranking.push(RankingRow {
                k: result.budgets[b],
                rank: rank + 1,
                config: i,
                lr_d: result.entries[i].lr_d,
                lr_g: result.entries[i].lr_g,
                dg: result.dg(i, b),
            });
        }
    }
    write_csv_file(&rows, &[], &args.out.join("sweep.csv"))?;
    write_csv_file(&ranking, &[], &args.out.join("ranking.csv"))?;
    println!(
        "ranking identical across k = {:?}: {}",
        result.budgets,
        if result.ranking_is_stable() { "yes" } else { "no" }
    );
    Ok(0)
}

struct CheckLine {
    name: String,
    passed: bool,
    detail: String,
}

fn print_table(lines: &[CheckLine]) -> u8 {
    for l in lines {
        println!(
            "{:<4} {:<40} {}",
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    if lines.iter().all(|l| l.passed) {
        0
    } else {
        EXIT_INVARIANT
    }
}

fn replay(game: &DiscreteGanGame) -> String {
    serde_json::to_string(game).unwrap_or_default()
}

fn oracle_sweep(games: usize, seed: u64) -> Vec<CheckLine> {
    let mut rng = stream(seed, 0);
    let mut lines = Vec::new();
    for i in 0..games {
        let m = 2 + i % 63;
        let g = DiscreteGanGame::random(m, &mut rng);
        let slack = g.exact_dg() - g.jsd();
        let plug = (g.minimax_by_plug_in() - g.exact_minimax()).abs();
        let approx = g
            .descent_adversaries(50, 0.05)
            .and_then(|(d, q)| g.approximate_dg(&d, &q));
        let (eps_ok, eps_detail) = match approx {
            Ok(a) => (a.dg >= g.jsd() - 2.0 * a.eps() - 1e-12, format!("eps {:.2e}", a.eps())),
            Err(e) => (false, e.to_string()),
        };
        let passed = slack >= -1e-12 && plug < 1e-12 && g.exact_maximin() <= -std::f64::consts::LN_2 + 1e-15 && eps_ok;
        let mut detail = format!("m={m} dg-jsd {slack:.3e} plug-in {plug:.1e} {eps_detail}");
        if !passed {
            detail.push_str(&format!(" replay {}", replay(&g)));
        }
        lines.push(CheckLine {
            name: format!("game {i}: exact_dg >= jsd"),
            passed,
            detail,
        });
    }
    lines
}

fn oracle_equal(seed: u64) -> Vec<CheckLine> {
    let mut rng = stream(seed, 0);
    let base = DiscreteGanGame::random(8, &mut rng);
    let p = base.p().to_vec();
    let g = DiscreteGanGame::new(p.clone(), p, vec![0.5; 8]).expect("valid game");
    let ln2 = std::f64::consts::LN_2;
    let (minimax, maximin, dg) = (g.exact_minimax(), g.exact_maximin(), g.exact_dg());
    let passed = (minimax + ln2).abs() < 1e-12 && (maximin + ln2).abs() < 1e-12 && dg.abs() < 1e-12;
    let mut detail = format!("minimax {minimax:.15} maximin {maximin:.15} dg {dg:.3e}");
    if !passed {
        detail.push_str(&format!(" replay {}", replay(&g)));
    }
    vec![CheckLine {
        name: "p = q, D = 1/2: minimax = maximin = -log 2".into(),
        passed,
        detail,
    }]
}

fn oracle_grid_vs_descent() -> Result<Vec<CheckLine>, Error> {
    let setup = Scalar1dGanSetup::default();
    let budget = ConvergenceBudget::default();
    let mut lines = Vec::new();
    for (center, start) in [(2.0, -1.0), (-3.0, 0.5), (5.0, 6.5)] {
        let disc = bump_discriminator(center, true);
        let (theta_grid, grid) = setup.grid_search_worst_generator(&disc)?;
        let (theta_descent, descent) = setup.descent_worst_generator(start, &disc, &budget)?;
        lines.push(CheckLine {
            name: format!("bump at {center}, descent from {start}"),
            passed: (descent - grid).abs() <= 1e-3,
            detail: format!("grid {grid:.6} at {theta_grid:.3}, descent {descent:.6} at {theta_descent:.3}"),
        });
    }
    Ok(lines)
}

fn cmd_oracle(args: OracleArgs) -> Result<u8, Error> {
    let seed = resolve_seed(args.seed)?.unwrap_or(0);
    let lines = match args.case {
        OracleCase::Sweep => oracle_sweep(args.games, seed),
        OracleCase::EqualDistributions => oracle_equal(seed),
        OracleCase::GridVsDescent => oracle_grid_vs_descent()?,
    };
    Ok(print_table(&lines))
}

#[derive(Serialize, Deserialize)]
struct MergedRow {
    step: usize,
    gen_loss: Option<f64>,
    disc_loss: Option<f64>,
    minimax: Option<f64>,
    maximin: Option<f64>,
    dg: Option<f64>,
    modes: Option<usize>,
    std3: Option<usize>,
}

fn cmd_report(args: ReportArgs) -> Result<u8, Error> {
    let train: Vec<TrainLogRow> = read_csv(fs::File::open(args.run.join("train_log.csv"))?)?;
    let dg_path = args.dg_report.unwrap_or_else(|| args.run.join("dg_report.csv"));
    let dg: Vec<DgReportRow> = read_csv(fs::File::open(&dg_path)?)?;
    let mut merged: BTreeMap<usize, MergedRow> = BTreeMap::new();
    let blank = |step| MergedRow {
        step,
        gen_loss: None,
        disc_loss: None,
        minimax: None,
        maximin: None,
        dg: None,
        modes: None,
        std3: None,
    };
    for r in &train {
        let row = merged.entry(r.step).or_insert_with(|| blank(r.step));
        row.gen_loss = Some(r.gen_loss);
        row.disc_loss = Some(r.disc_loss);
    }
    for r in &dg {
        let row = merged.entry(r.step).or_insert_with(|| blank(r.step));
        row.minimax = Some(r.minimax);
        row.maximin = Some(r.maximin);
        row.dg = Some(r.dg);
        row.modes = Some(r.modes);
        row.std3 = Some(r.std3);
    }
    let rows: Vec<MergedRow> = merged.into_values().collect();
    let out = args.out.unwrap_or_else(|| args.run.join("report.csv"));
    write_csv_file(
        &rows,
        &[
            "step",
            "gen_loss",
            "disc_loss",
            "minimax",
            "maximin",
            "dg",
            "modes",
            "std3",
        ],
        &out,
    )?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(0)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NumericAbort { .. } | Error::NonFiniteParameter { .. } => EXIT_NUMERIC,
        Error::Format(FormatError::Config { .. }) | Error::Config(_) => EXIT_USAGE,
        Error::Format(_) => EXIT_FORMAT,
        _ => EXIT_INVARIANT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::OracleCheck(a) => cmd_oracle(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
