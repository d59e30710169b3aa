//! Train-then-evaluate pipelines shared by the command line and the test suites.

use crate::data::{three_way_split, DatasetSplit, GaussianMixture};
use crate::error::{Error, Result};
use crate::game::{GanGame, ZeroSumGame};
use crate::io::DgReportRow;
use crate::metric::{checkpoint_seed, estimate_dg_budgets, estimate_dg_snapshot, DgConfig, DgReport, SnapshotPolicy};
use crate::net::NetParams;
use crate::quality::{assess, QualityReport, DEFAULT_COVERAGE_FRACTION, DEFAULT_EVAL_SAMPLES};
use crate::rng::{stream, streams};
use crate::train::{train_gan, Snapshot, TrainConfig, TrainLog};

/// `(n_train, n_adv, n_test)` used by the toy experiments.
pub const DEFAULT_SPLIT_SIZES: (usize, usize, usize) = (10_000, 3_000, 400);

/// Learning-rate pairs `(lr_d, lr_g)` of the hyperparameter-tuning study.
/// The second and fifth are the collapse configurations.
pub const TUNING_CONFIGS: [(f64, f64); 5] = [(2e-3, 1e-4), (1e-4, 1e-4), (1e-3, 1e-4), (5e-3, 1e-4), (1e-4, 1e-5)];
pub const TUNING_COLLAPSE: [usize; 2] = [1, 4];
pub const TUNING_BUDGETS: [usize; 4] = [500, 1000, 1500, 2000];

/// Mode coverage of `n` generator samples drawn from a seeded latent stream.
pub fn generator_quality(
    game: &GanGame,
    gen: &NetParams,
    mix: &GaussianMixture,
    n: usize,
    seed: u64,
) -> Result<QualityReport> {
    let latent = game.sample_latent(n, &mut stream(seed, streams::QUALITY));
    let samples = game.generate(gen, latent.view())?;
    assess(samples.view(), mix, DEFAULT_COVERAGE_FRACTION)
}

pub fn report_row(report: &DgReport, quality: &QualityReport) -> DgReportRow {
    DgReportRow {
        step: report.step,
        minimax: report.minimax,
        maximin: report.maximin,
        dg: report.dg,
        modes: quality.modes_covered,
        std3: quality.within_3std,
        total: quality.total_samples,
        k: report.k,
        n_adv: report.n_adv,
        n_test: report.n_test,
        seed: report.seed,
        wall_ms: report.wall_ms,
    }
}

/// A trained run together with the data it was trained on.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: TrainConfig,
    pub mixture: GaussianMixture,
    pub split: DatasetSplit,
    pub log: TrainLog,
}

/// Draws the split from the config's mixture and seed, then trains.
pub fn train_run(config: &TrainConfig, sizes: (usize, usize, usize)) -> Result<Run> {
    let mixture = config.mixture.build();
    let split = three_way_split(&mixture, sizes, config.seed)?;
    let log = train_gan(config, &split)?;
    Ok(Run {
        config: config.clone(),
        mixture,
        split,
        log,
    })
}

/// Full estimation plus quality for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: DgReport,
    pub quality: QualityReport,
}

impl Evaluation {
    pub fn row(&self) -> DgReportRow {
        report_row(&self.report, &self.quality)
    }
}

/// Evaluates one snapshot. Each step gets its own derived estimator seed.
pub fn evaluate_snapshot(
    game: &GanGame,
    snapshot: &Snapshot,
    split: &DatasetSplit,
    mix: &GaussianMixture,
    cfg: &DgConfig,
) -> Result<Evaluation> {
    Ok(evaluate_snapshot_budgets(game, snapshot, split, mix, cfg, &[cfg.adversary_steps])?.remove(0))
}

/// Like [`evaluate_snapshot`] for several budgets from one adversary search.
pub fn evaluate_snapshot_budgets(
    game: &GanGame,
    snapshot: &Snapshot,
    split: &DatasetSplit,
    mix: &GaussianMixture,
    cfg: &DgConfig,
    budgets: &[usize],
) -> Result<Vec<Evaluation>> {
    let step_cfg = DgConfig {
        seed: checkpoint_seed(cfg.seed, snapshot.step),
        ..cfg.clone()
    };
    let quality = generator_quality(game, &snapshot.gen, mix, DEFAULT_EVAL_SAMPLES, cfg.seed)?;
    Ok(estimate_dg_budgets(game, snapshot, split, &step_cfg, budgets)?
        .into_iter()
        .map(|o| Evaluation {
            report: o.report,
            quality,
        })
        .collect())
}

pub fn evaluate_trajectory(
    game: &GanGame,
    snapshots: &[Snapshot],
    split: &DatasetSplit,
    mix: &GaussianMixture,
    cfg: &DgConfig,
) -> Result<Vec<Evaluation>> {
    snapshots
        .iter()
        .map(|s| evaluate_snapshot(game, s, split, mix, cfg))
        .collect()
}

/// Snapshot-library estimation at every library step.
pub fn evaluate_trajectory_snapshot_approx(
    game: &GanGame,
    snapshots: &[Snapshot],
    split: &DatasetSplit,
    mix: &GaussianMixture,
    policy: SnapshotPolicy,
    seed: u64,
) -> Result<Vec<Evaluation>> {
    snapshots
        .iter()
        .map(|s| {
            let report = estimate_dg_snapshot(game, s.step, snapshots, split, policy, seed)?;
            let quality = generator_quality(game, &s.gen, mix, DEFAULT_EVAL_SAMPLES, seed)?;
            Ok(Evaluation { report, quality })
        })
        .collect()
}

/// One trained configuration of a sweep, evaluated at every budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub lr_d: f64,
    pub lr_g: f64,
    pub quality: QualityReport,
    /// Evaluations in the order of the sweep budgets.
    pub evaluations: Vec<Evaluation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub budgets: Vec<usize>,
    pub entries: Vec<SweepEntry>,
}

/// Indices ordered from lowest to highest value; equal values keep index order.
pub fn rank_ascending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

impl SweepResult {
    pub fn dg(&self, entry: usize, budget: usize) -> f64 {
        self.entries[entry].evaluations[budget].report.dg
    }

    /// Ranking (best first) of the configurations by test-split DG at each budget.
    pub fn rankings(&self) -> Vec<Vec<usize>> {
        (0..self.budgets.len())
            .map(|b| rank_ascending(&(0..self.entries.len()).map(|e| self.dg(e, b)).collect::<Vec<_>>()))
            .collect()
    }

    pub fn ranking_is_stable(&self) -> bool {
        let r = self.rankings();
        r.windows(2).all(|w| w[0] == w[1])
    }

    /// Whether the given entries occupy the last places of every ranking.
    pub fn ranked_last(&self, entries: &[usize]) -> bool {
        let n = self.entries.len();
        self.rankings()
            .iter()
            .all(|r| entries.iter().all(|e| r[n - entries.len()..].contains(e)))
    }
}

/// Trains one configuration per `(lr_d, lr_g)` pair from `base` (same seed,
/// so same data and initialization) and evaluates
/// each final snapshot at all `budgets` with a single adversary search.
pub fn run_sweep(
    base: &TrainConfig,
    lrs: &[(f64, f64)],
    budgets: &[usize],
    sizes: (usize, usize, usize),
    dg: &DgConfig,
) -> Result<SweepResult> {
    if lrs.is_empty() || budgets.is_empty() {
        return Err(Error::Config(
            "a sweep needs at least one configuration and one budget".into(),
        ));
    }
    let entries = lrs
        .iter()
        .map(|&(lr_d, lr_g)| {
            let config = TrainConfig {
                lr_d,
                lr_g,
                ..base.clone()
            };
            let run = train_run(&config, sizes)?;
            let last = run.log.final_snapshot();
            let evaluations = evaluate_snapshot_budgets(&config.game, &last, &run.split, &run.mixture, dg, budgets)?;
            Ok(SweepEntry {
                lr_d,
                lr_g,
                quality: evaluations[0].quality,
                evaluations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        budgets: budgets.to_vec(),
        entries,
    })
}
