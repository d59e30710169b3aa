//! Duality-gap and minimax-loss estimation for trained checkpoints.
//!
//! Worst-case adversaries are found by warm-started Adam on the adversary
//! split. Every `select_every` steps the iterate is scored on a fixed batch
//! (the whole adversary split against a fixed latent batch) and the best
//! scoring iterate is kept. The starting point is always a candidate, so on
//! that batch the minimax value never drops below `M(u_t, v_t)` and the
//! maximin value never exceeds it. Reported numbers come from the test split
//! with a fresh latent batch.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::game::{GanGame, GenLoss, Player, ZeroSumGame};
use crate::net::{InitScheme, NetParams};
use crate::optim::{AdamConfig, AdamState, Direction};
use crate::rng::{derive_seed, stream, streams, Rng};
use crate::train::Snapshot;

pub const DEFAULT_ADVERSARY_STEPS: usize = 500;
/// Adversary splits up to this size are used as one full batch per step.
pub const FULL_BATCH_LIMIT: usize = 2500;
pub const DEFAULT_MINI_BATCH: usize = 100;
pub const DEFAULT_SELECT_EVERY: usize = 10;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct DgConfig {
    /// Number of adversary optimization steps `k`.
    pub adversary_steps: usize,
    pub adversary_optimizer: AdamConfig,
    /// `None` selects the full adversary split when it has at most
    /// [`FULL_BATCH_LIMIT`] rows and mini-batches of [`DEFAULT_MINI_BATCH`] otherwise.
    pub adversary_batch_size: Option<usize>,
    /// Interval between retain-best evaluations. The final iterate is always scored.
    pub select_every: usize,
    pub seed: u64,
    /// Allowed negative slack on the test-split gap.
    pub tolerance: f64,
}

impl Default for DgConfig {
    fn default() -> Self {
        Self {
            adversary_steps: DEFAULT_ADVERSARY_STEPS,
            adversary_optimizer: AdamConfig::adversary_default(),
            adversary_batch_size: None,
            select_every: DEFAULT_SELECT_EVERY,
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl DgConfig {
    pub fn with_steps(adversary_steps: usize, seed: u64) -> Self {
        Self {
            adversary_steps,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adversary_optimizer.validate()?;
        if self.adversary_batch_size == Some(0) {
            return Err(Error::Config("adversary batch size must be at least 1".into()));
        }
        if self.select_every == 0 {
            return Err(Error::Config("select_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Batch size actually used for an adversary split of `n_adv` rows.
    pub fn batch_size_for(&self, n_adv: usize) -> usize {
        match self.adversary_batch_size {
            Some(b) => b,
            None if n_adv <= FULL_BATCH_LIMIT => n_adv,
            None => DEFAULT_MINI_BATCH,
        }
    }
}

/// Outcome of one worst-adversary search.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryResult {
    pub params: NetParams,
    /// Selection-batch objective at the starting point.
    pub initial_value: f64,
    /// Selection-batch objective of `params`.
    pub best_value: f64,
    /// Optimization step at which `params` was reached.
    pub best_step: usize,
    pub steps_run: usize,
    /// Set when a non-finite value or gradient stopped the search early.
    pub non_finite: bool,
}

/// Values on the adversary split, where retain-best makes `dg >= 0` hold exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionValues {
    pub minimax: f64,
    pub maximin: f64,
    /// `M(u_t, v_t)` on the same batch.
    pub baseline: f64,
    pub dg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgReport {
    pub step: usize,
    /// `M(u, v_worst)` on the test split.
    pub minimax: f64,
    /// `M(u_worst, v)` on the test split.
    pub maximin: f64,
    /// `minimax - maximin`.
    pub dg: f64,
    /// `M(u, v)` on the test split.
    pub baseline: f64,
    pub adversary: SelectionValues,
    pub k: usize,
    pub n_adv: usize,
    pub n_test: usize,
    pub seed: u64,
    pub wall_ms: u128,
    pub non_finite: bool,
}

impl DgReport {
    /// Whether the test-split gap respects the configured tolerance.
    pub fn within_tolerance(&self, tolerance: f64) -> bool {
        self.dg >= -tolerance
    }
}

/// A report together with the adversaries that produced it.
#[derive(Debug, Clone)]
pub struct DgOutcome {
    pub report: DgReport,
    pub worst_disc: AdversaryResult,
    pub worst_gen: AdversaryResult,
}

/// Fixed data shared by both searches of one estimate.
struct Selection<'a> {
    real: ArrayView2<'a, f64>,
    latent: Array2<f64>,
}

fn real_batch(real: &ArrayView2<f64>, n: usize, full: bool, rng: &mut Rng) -> Array2<f64> {
    if full {
        return real.to_owned();
    }
    let rows = real.nrows();
    let mut out = Array2::zeros((n, real.ncols()));
    for mut row in out.rows_mut() {
        row.assign(&real.row(rng.random_range(0..rows)));
    }
    out
}

#[derive(Clone, Copy)]
struct Scored {
    value: f64,
    step: usize,
}

/// Retain-best Adam search. Returns the best iterate for each budget in
/// `budgets` (ascending). A budget's candidates are the iterates at
/// multiples of `select_every` up to it plus its own final iterate, so a
/// multi-budget run gives exactly the results of separate runs.
#[allow(clippy::too_many_arguments)]
fn retain_best_search<S, E>(
    init: &NetParams,
    direction: Direction,
    cfg: &DgConfig,
    budgets: &[usize],
    rng: &mut Rng,
    mut step_grads: S,
    mut evaluate: E,
) -> Result<Vec<AdversaryResult>>
where
    S: FnMut(&NetParams, &mut Rng) -> Result<(f64, crate::net::Gradients)>,
    E: FnMut(&NetParams) -> Result<f64>,
{
    let better = |a: f64, b: f64| match direction {
        Direction::Maximize => a > b,
        Direction::Minimize => a < b,
    };
    let initial_value = evaluate(init)?;
    if !initial_value.is_finite() {
        return Err(Error::Domain(
            "adversary search started from a non-finite objective".into(),
        ));
    }
    let mut best = (
        Scored {
            value: initial_value,
            step: 0,
        },
        init.clone(),
    );
    let mut results = Vec::with_capacity(budgets.len());
    let mut params = init.clone();
    let mut opt = AdamState::for_params(cfg.adversary_optimizer, init)?;
    let mut non_finite = false;
    let mut steps_run = 0;
    let last = budgets.last().copied().unwrap_or(0);
    let mut next_budget = 0;

    let finish = |best: &(Scored, NetParams), extra: Option<(Scored, &NetParams)>, steps_run, non_finite| {
        let (scored, p) = match extra {
            Some((s, p)) if better(s.value, best.0.value) => (s, p.clone()),
            _ => (best.0, best.1.clone()),
        };
        AdversaryResult {
            params: p,
            initial_value,
            best_value: scored.value,
            best_step: scored.step,
            steps_run,
            non_finite,
        }
    };

    while next_budget < budgets.len() && budgets[next_budget] == 0 {
        results.push(finish(&best, None, 0, false));
        next_budget += 1;
    }
    for step in 1..=last {
        let (value, grads) = match step_grads(&params, rng) {
            Ok(vg) => vg,
            Err(Error::NonFiniteParameter { .. }) => {
                non_finite = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if !value.is_finite() || opt.step(&mut params, &grads, direction).is_err() || !params.is_finite() {
            non_finite = true;
            break;
        }
        steps_run = step;
        let on_grid = step % cfg.select_every == 0;
        let is_budget = budgets[next_budget] == step;
        if !on_grid && !is_budget {
            continue;
        }
        let value = evaluate(&params)?;
        let scored = Scored { value, step };
        let usable = value.is_finite();
        if on_grid && usable && better(value, best.0.value) {
            best = (scored, params.clone());
        }
        if is_budget {
            let extra = (!on_grid && usable).then_some((scored, &params));
            results.push(finish(&best, extra, steps_run, false));
            next_budget += 1;
        }
    }
    while results.len() < budgets.len() {
        results.push(finish(&best, None, steps_run, non_finite));
    }
    Ok(results)
}

fn sorted_budgets(budgets: &[usize]) -> Result<Vec<usize>> {
    if budgets.is_empty() {
        return Err(Error::Config("at least one adversary budget is required".into()));
    }
    let mut sorted = budgets.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(sorted)
}

fn pick<T: Clone>(sorted: &[usize], results: &[T], budget: usize) -> T {
    results[sorted.binary_search(&budget).expect("budget present")].clone()
}

fn worst_disc_search<G: ZeroSumGame>(
    game: &G,
    gen: &NetParams,
    disc_init: &NetParams,
    adv_real: ArrayView2<f64>,
    selection_latent: ArrayView2<f64>,
    cfg: &DgConfig,
    budgets: &[usize],
    rng: &mut Rng,
) -> Result<Vec<AdversaryResult>> {
    let batch = cfg.batch_size_for(adv_real.nrows());
    let full = batch == adv_real.nrows() && cfg.adversary_batch_size.is_none();
    let fake_sel = game.generate(gen, selection_latent)?;
    retain_best_search(
        disc_init,
        Direction::Maximize,
        cfg,
        budgets,
        rng,
        |disc, rng| {
            let real = real_batch(&adv_real, batch, full, rng);
            let latent = game.sample_latent(batch, rng);
            game.value_and_grads(
                gen,
                disc,
                real.view(),
                latent.view(),
                Player::Discriminator,
                GenLoss::Saturating,
            )
        },
        |disc| game.value_on_samples(disc, adv_real, fake_sel.view()),
    )
}

fn worst_gen_search<G: ZeroSumGame>(
    game: &G,
    gen_init: &NetParams,
    disc: &NetParams,
    adv_real: ArrayView2<f64>,
    selection_latent: ArrayView2<f64>,
    cfg: &DgConfig,
    budgets: &[usize],
    rng: &mut Rng,
) -> Result<Vec<AdversaryResult>> {
    let batch = cfg.batch_size_for(adv_real.nrows());
    let full = batch == adv_real.nrows() && cfg.adversary_batch_size.is_none();
    retain_best_search(
        gen_init,
        Direction::Minimize,
        cfg,
        budgets,
        rng,
        |gen, rng| {
            let real = real_batch(&adv_real, batch, full, rng);
            let latent = game.sample_latent(batch, rng);
            game.value_and_grads(
                gen,
                disc,
                real.view(),
                latent.view(),
                Player::Generator,
                GenLoss::Saturating,
            )
        },
        |gen| game.value(gen, disc, adv_real, selection_latent),
    )
}

/// Warm-started search for `argmax_v M(u, v)` using adversary-split data.
///
/// The selection batch is `adv_real` against `adv_real.nrows()` latents drawn from `rng`.
pub fn find_worst_discriminator<G: ZeroSumGame>(
    game: &G,
    gen: &NetParams,
    disc_init: &NetParams,
    adv_real: ArrayView2<f64>,
    cfg: &DgConfig,
    rng: &mut Rng,
) -> Result<AdversaryResult> {
    cfg.validate()?;
    let latent = game.sample_latent(adv_real.nrows(), rng);
    let mut out = worst_disc_search(
        game,
        gen,
        disc_init,
        adv_real,
        latent.view(),
        cfg,
        &[cfg.adversary_steps],
        rng,
    )?;
    Ok(out.remove(0))
}

/// Warm-started search for `argmin_u M(u, v)` on the saturating objective.
pub fn find_worst_generator<G: ZeroSumGame>(
    game: &G,
    gen_init: &NetParams,
    disc: &NetParams,
    adv_real: ArrayView2<f64>,
    cfg: &DgConfig,
    rng: &mut Rng,
) -> Result<AdversaryResult> {
    cfg.validate()?;
    let latent = game.sample_latent(adv_real.nrows(), rng);
    let mut out = worst_gen_search(
        game,
        gen_init,
        disc,
        adv_real,
        latent.view(),
        cfg,
        &[cfg.adversary_steps],
        rng,
    )?;
    Ok(out.remove(0))
}

fn check_split(split: &DatasetSplit, data_dim: usize) -> Result<()> {
    let (_, n_adv, n_test) = split.sizes();
    if n_adv == 0 || n_test == 0 {
        return Err(Error::EmptyBatch("adversary or test split"));
    }
    if split.adversary().ncols() != data_dim || split.test().ncols() != data_dim {
        return Err(Error::Shape("split dimension does not match the game".into()));
    }
    Ok(())
}

/// Seed used for the estimate of the snapshot at `step`.
pub fn checkpoint_seed(seed: u64, step: usize) -> u64 {
    derive_seed(seed, step as u64)
}

/// Estimates DG for several adversary budgets from one pair of searches.
/// Entry `i` equals `estimate_dg` with `adversary_steps = budgets[i]`.
pub fn estimate_dg_budgets<G: ZeroSumGame>(
    game: &G,
    snapshot: &Snapshot,
    split: &DatasetSplit,
    cfg: &DgConfig,
    budgets: &[usize],
) -> Result<Vec<DgOutcome>> {
    cfg.validate()?;
    check_split(split, game.data_dim())?;
    let start = Instant::now();
    let sorted = sorted_budgets(budgets)?;
    let seed = checkpoint_seed(cfg.seed, snapshot.step);
    let adv_real = split.adversary();
    let test_real = split.test();
    let selection = Selection {
        real: adv_real,
        latent: game.sample_latent(adv_real.nrows(), &mut stream(seed, streams::SELECTION_LATENT)),
    };
    let (gen, disc) = (&snapshot.gen, &snapshot.disc);
    let discs = worst_disc_search(
        game,
        gen,
        disc,
        selection.real,
        selection.latent.view(),
        cfg,
        &sorted,
        &mut stream(seed, streams::WORST_DISC),
    )?;
    let gens = worst_gen_search(
        game,
        gen,
        disc,
        selection.real,
        selection.latent.view(),
        cfg,
        &sorted,
        &mut stream(seed, streams::WORST_GEN),
    )?;
    let test_latent = game.sample_latent(test_real.nrows(), &mut stream(seed, streams::TEST_LATENT));
    let test_fake = game.generate(gen, test_latent.view())?;
    let baseline = game.value_on_samples(disc, test_real, test_fake.view())?;
    let adv_baseline = discs[0].initial_value;
    let wall_ms = start.elapsed().as_millis();

    budgets
        .iter()
        .map(|&k| {
            let worst_disc = pick(&sorted, &discs, k);
            let worst_gen = pick(&sorted, &gens, k);
            let minimax = game.value_on_samples(&worst_disc.params, test_real, test_fake.view())?;
            let maximin = game.value(&worst_gen.params, disc, test_real, test_latent.view())?;
            let report = DgReport {
                step: snapshot.step,
                minimax,
                maximin,
                dg: minimax - maximin,
                baseline,
                adversary: SelectionValues {
                    minimax: worst_disc.best_value,
                    maximin: worst_gen.best_value,
                    baseline: adv_baseline,
                    dg: worst_disc.best_value - worst_gen.best_value,
                },
                k,
                n_adv: adv_real.nrows(),
                n_test: test_real.nrows(),
                seed: cfg.seed,
                wall_ms,
                non_finite: worst_disc.non_finite || worst_gen.non_finite,
            };
            Ok(DgOutcome {
                report,
                worst_disc,
                worst_gen,
            })
        })
        .collect()
}

/// Full estimate, keeping the adversaries.
pub fn estimate_dg_detailed<G: ZeroSumGame>(
    game: &G,
    snapshot: &Snapshot,
    split: &DatasetSplit,
    cfg: &DgConfig,
) -> Result<DgOutcome> {
    Ok(estimate_dg_budgets(game, snapshot, split, cfg, &[cfg.adversary_steps])?.remove(0))
}

/// Duality gap of a checkpoint: adversaries are searched on the adversary
/// split and both values are evaluated on the test split.
pub fn estimate_dg<G: ZeroSumGame>(
    game: &G,
    snapshot: &Snapshot,
    split: &DatasetSplit,
    cfg: &DgConfig,
) -> Result<DgReport> {
    Ok(estimate_dg_detailed(game, snapshot, split, cfg)?.report)
}

/// Minimax loss of a black-box generator, given as a sampler of data-space batches.
///
/// A fresh discriminator (drawn with `init`) is trained against the sampler
/// on the adversary split; the best iterate is scored on the test split.
pub fn estimate_minimax<F>(
    game: &GanGame,
    mut sampler: F,
    split: &DatasetSplit,
    cfg: &DgConfig,
    init: InitScheme,
) -> Result<f64>
where
    F: FnMut(usize, &mut Rng) -> Array2<f64>,
{
    cfg.validate()?;
    let data_dim = game.data_dim();
    check_split(split, data_dim)?;
    let seed = cfg.seed;
    let mut draw = |n: usize, rng: &mut Rng| -> Result<Array2<f64>> {
        let batch = sampler(n, rng);
        if batch.nrows() != n || batch.ncols() != data_dim {
            return Err(Error::Shape(format!(
                "sampler returned {}x{}, expected {n}x{data_dim}",
                batch.nrows(),
                batch.ncols()
            )));
        }
        Ok(batch)
    };
    let adv_real = split.adversary();
    let test_real = split.test();
    let fake_sel = draw(adv_real.nrows(), &mut stream(seed, streams::SELECTION_LATENT))?;
    let disc_init = NetParams::init(&game.discriminator_spec, init, &mut stream(seed, streams::DISC_INIT))?;
    let batch = cfg.batch_size_for(adv_real.nrows());
    let full = batch == adv_real.nrows() && cfg.adversary_batch_size.is_none();
    let mut rng = stream(seed, streams::WORST_DISC);
    let mut failure = None;
    let result = retain_best_search(
        &disc_init,
        Direction::Maximize,
        cfg,
        &[cfg.adversary_steps],
        &mut rng,
        |disc, rng| {
            let real = real_batch(&adv_real, batch, full, rng);
            let fake = match draw(batch, rng) {
                Ok(f) => f,
                Err(e) => {
                    let message = e.to_string();
                    failure = Some(e);
                    return Err(Error::Shape(message));
                }
            };
            game.discriminator_value_and_grads(disc, real.view(), fake.view())
        },
        |disc| game.value_on_samples(disc, adv_real, fake_sel.view()),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let worst = result?.remove(0);
    let test_fake = draw(test_real.nrows(), &mut stream(seed, streams::TEST_LATENT))?;
    game.value_on_samples(&worst.params, test_real, test_fake.view())
}

/// Which snapshots may serve as adversaries for the snapshot at `at_step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotPolicy {
    PastOnly,
    PastAndFuture,
}

impl SnapshotPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SnapshotPolicy::PastOnly => "past-only",
            SnapshotPolicy::PastAndFuture => "past-and-future",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "past-only" => Some(SnapshotPolicy::PastOnly),
            "past-and-future" => Some(SnapshotPolicy::PastAndFuture),
            _ => None,
        }
    }
}

/// DG with adversaries restricted to a snapshot library.
///
/// Candidates are chosen on the adversary split (fixed latents) and the
/// chosen pair is evaluated on the test split. Ties go to the earlier step.
pub fn estimate_dg_snapshot<G: ZeroSumGame>(
    game: &G,
    at_step: usize,
    library: &[Snapshot],
    split: &DatasetSplit,
    policy: SnapshotPolicy,
    seed: u64,
) -> Result<DgReport> {
    check_split(split, game.data_dim())?;
    let start = Instant::now();
    let current = library
        .iter()
        .find(|s| s.step == at_step)
        .ok_or_else(|| Error::Config(format!("no snapshot at step {at_step} in the library")))?;
    let mut candidates: Vec<&Snapshot> = library
        .iter()
        .filter(|s| policy == SnapshotPolicy::PastAndFuture || s.step <= at_step)
        .collect();
    if candidates.is_empty() {
        return Err(Error::Config("no candidate snapshots under the policy".into()));
    }
    candidates.sort_by_key(|s| s.step);
    let point_seed = checkpoint_seed(seed, at_step);
    let adv_real = split.adversary();
    let test_real = split.test();
    let sel_latent = game.sample_latent(adv_real.nrows(), &mut stream(point_seed, streams::SELECTION_LATENT));
    let sel_fake = game.generate(&current.gen, sel_latent.view())?;

    let mut best_disc: Option<(f64, &Snapshot)> = None;
    let mut best_gen: Option<(f64, &Snapshot)> = None;
    let mut baseline = f64::NAN;
    for cand in &candidates {
        let v = game.value_on_samples(&cand.disc, adv_real, sel_fake.view())?;
        if cand.step == at_step {
            baseline = v;
        }
        if v.is_finite() && best_disc.is_none_or(|(b, _)| v > b) {
            best_disc = Some((v, cand));
        }
        let u = game.value(&cand.gen, &current.disc, adv_real, sel_latent.view())?;
        if u.is_finite() && best_gen.is_none_or(|(b, _)| u < b) {
            best_gen = Some((u, cand));
        }
    }
    let (adv_minimax, disc_snap) =
        best_disc.ok_or_else(|| Error::Domain("every candidate objective was non-finite".into()))?;
    let (adv_maximin, gen_snap) =
        best_gen.ok_or_else(|| Error::Domain("every candidate objective was non-finite".into()))?;

    let test_latent = game.sample_latent(test_real.nrows(), &mut stream(point_seed, streams::TEST_LATENT));
    let test_fake = game.generate(&current.gen, test_latent.view())?;
    let minimax = game.value_on_samples(&disc_snap.disc, test_real, test_fake.view())?;
    let maximin = game.value(&gen_snap.gen, &current.disc, test_real, test_latent.view())?;
    let test_baseline = game.value_on_samples(&current.disc, test_real, test_fake.view())?;
    Ok(DgReport {
        step: at_step,
        minimax,
        maximin,
        dg: minimax - maximin,
        baseline: test_baseline,
        adversary: SelectionValues {
            minimax: adv_minimax,
            maximin: adv_maximin,
            baseline,
            dg: adv_minimax - adv_maximin,
        },
        k: candidates.len(),
        n_adv: adv_real.nrows(),
        n_test: test_real.nrows(),
        seed,
        wall_ms: start.elapsed().as_millis(),
        non_finite: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_ring, three_way_split};
    use crate::game::LatentPrior;
    use crate::net::{mlp_spec, Activation, Gradients};
    use proptest::prelude::*;
    use std::cell::Cell;
    use std::f64::consts::LN_2;

    fn small_game() -> GanGame {
        let gen = mlp_spec(3, &[16], 2, Activation::Relu, Activation::Identity);
        let disc = mlp_spec(2, &[16], 1, Activation::Relu, Activation::Sigmoid);
        GanGame::new(gen, disc, LatentPrior::StdNormal, 1e-7).unwrap()
    }

    fn snapshot(game: &GanGame, seed: u64, step: usize) -> Snapshot {
        Snapshot {
            step,
            gen: NetParams::init(&game.generator_spec, InitScheme::XavierUniform, &mut stream(seed, 1)).unwrap(),
            disc: NetParams::init(
                &game.discriminator_spec,
                InitScheme::XavierUniform,
                &mut stream(seed, 2),
            )
            .unwrap(),
        }
    }

    fn split(seed: u64) -> DatasetSplit {
        three_way_split(&make_ring(), (10, 200, 100), seed).unwrap()
    }

    fn cfg(k: usize, seed: u64) -> DgConfig {
        DgConfig {
            adversary_steps: k,
            select_every: 3,
            seed,
            ..DgConfig::default()
        }
    }

    #[test]
    fn zero_budget_is_identity() {
        let game = small_game();
        let snap = snapshot(&game, 1, 40);
        let data = split(1);
        let out = estimate_dg_detailed(&game, &snap, &data, &cfg(0, 5)).unwrap();
        assert_eq!(out.worst_disc.params, snap.disc);
        assert_eq!(out.worst_gen.params, snap.gen);
        let r = out.report;
        assert_eq!(r.dg, 0.0);
        assert_eq!(r.minimax, r.baseline);
        assert_eq!(r.maximin, r.baseline);
        assert_eq!(r.adversary.dg, 0.0);
        assert_eq!((r.k, r.n_adv, r.n_test, r.step), (0, 200, 100, 40));
    }

    #[test]
    fn find_worst_with_zero_budget_returns_init() {
        let game = small_game();
        let snap = snapshot(&game, 2, 0);
        let data = split(2);
        let d = find_worst_discriminator(
            &game,
            &snap.gen,
            &snap.disc,
            data.adversary(),
            &cfg(0, 0),
            &mut stream(0, 0),
        )
        .unwrap();
        let g = find_worst_generator(
            &game,
            &snap.gen,
            &snap.disc,
            data.adversary(),
            &cfg(0, 0),
            &mut stream(0, 0),
        )
        .unwrap();
        assert_eq!(d.params, snap.disc);
        assert_eq!(g.params, snap.gen);
        assert_eq!(d.best_value, d.initial_value);
        assert_eq!((d.steps_run, d.best_step), (0, 0));
    }

    #[test]
    fn search_improves_and_never_regresses() {
        let game = small_game();
        let snap = snapshot(&game, 3, 0);
        let data = split(3);
        let d = find_worst_discriminator(
            &game,
            &snap.gen,
            &snap.disc,
            data.adversary(),
            &cfg(60, 0),
            &mut stream(1, 0),
        )
        .unwrap();
        let g = find_worst_generator(
            &game,
            &snap.gen,
            &snap.disc,
            data.adversary(),
            &cfg(60, 0),
            &mut stream(1, 0),
        )
        .unwrap();
        assert!(d.best_value > d.initial_value);
        assert!(g.best_value < g.initial_value);
        assert_eq!(d.steps_run, 60);
        assert!(!d.non_finite && !g.non_finite);
    }

    #[test]
    fn constant_half_discriminator_pins_maximin() {
        let game = small_game();
        let mut snap = snapshot(&game, 4, 0);
        snap.disc.weights_mut(1).fill(0.0);
        snap.disc.biases_mut(1).fill(0.0);
        let data = split(4);
        let g = find_worst_generator(
            &game,
            &snap.gen,
            &snap.disc,
            data.adversary(),
            &cfg(30, 0),
            &mut stream(0, 0),
        )
        .unwrap();
        assert!((g.best_value + LN_2).abs() < 1e-6);
        let r = estimate_dg(&game, &snap, &data, &cfg(30, 0)).unwrap();
        assert!((r.maximin + LN_2).abs() < 1e-6);
    }

    #[test]
    fn multi_budget_matches_separate_runs() {
        let game = small_game();
        let snap = snapshot(&game, 5, 7);
        let data = split(5);
        let c = cfg(0, 9);
        let multi = estimate_dg_budgets(&game, &snap, &data, &c, &[7, 0, 4, 12]).unwrap();
        for (outcome, k) in multi.iter().zip([7, 0, 4, 12]) {
            let single = estimate_dg(
                &game,
                &snap,
                &data,
                &DgConfig {
                    adversary_steps: k,
                    ..c.clone()
                },
            )
            .unwrap();
            let mut a = outcome.report.clone();
            a.wall_ms = single.wall_ms;
            assert_eq!(a, single, "k = {k}");
        }
    }

    #[test]
    fn budgets_are_monotone_on_the_adversary_split() {
        let game = small_game();
        let snap = snapshot(&game, 6, 0);
        let data = split(6);
        let outs = estimate_dg_budgets(&game, &snap, &data, &cfg(0, 1), &[0, 5, 10, 20, 40]).unwrap();
        for w in outs.windows(2) {
            assert!(w[1].report.adversary.minimax >= w[0].report.adversary.minimax);
            assert!(w[1].report.adversary.maximin <= w[0].report.adversary.maximin);
        }
    }

    #[test]
    fn estimate_is_deterministic() {
        let game = small_game();
        let snap = snapshot(&game, 7, 3);
        let data = split(7);
        let mut a = estimate_dg(&game, &snap, &data, &cfg(15, 2)).unwrap();
        let b = estimate_dg(&game, &snap, &data, &cfg(15, 2)).unwrap();
        a.wall_ms = b.wall_ms;
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_only_reads_adversary_and_test() {
        let game = small_game();
        let data = split(8);
        estimate_dg(&game, &snapshot(&game, 8, 0), &data, &cfg(5, 0)).unwrap();
        assert_eq!(data.read_counts().0, 0);
    }

    #[test]
    fn batch_size_rule() {
        let c = DgConfig::default();
        assert_eq!(c.batch_size_for(2500), 2500);
        assert_eq!(c.batch_size_for(2501), 100);
        let c = DgConfig {
            adversary_batch_size: Some(7),
            ..DgConfig::default()
        };
        assert_eq!(c.batch_size_for(2500), 7);
        assert!(DgConfig {
            adversary_batch_size: Some(0),
            ..DgConfig::default()
        }
        .validate()
        .is_err());
    }

    /// Wraps a game and poisons gradients after a number of calls.
    struct Poisoned {
        inner: GanGame,
        healthy_calls: usize,
        calls: Cell<usize>,
    }

    impl ZeroSumGame for Poisoned {
        fn latent_dim(&self) -> usize {
            self.inner.latent_dim()
        }
        fn data_dim(&self) -> usize {
            self.inner.data_dim()
        }
        fn sample_latent(&self, n: usize, rng: &mut crate::rng::Rng) -> Array2<f64> {
            self.inner.sample_latent(n, rng)
        }
        fn generate(&self, gen: &NetParams, latent: ArrayView2<f64>) -> Result<Array2<f64>> {
            self.inner.generate(gen, latent)
        }
        fn value_on_samples(&self, disc: &NetParams, real: ArrayView2<f64>, fake: ArrayView2<f64>) -> Result<f64> {
            self.inner.value_on_samples(disc, real, fake)
        }
        fn value_and_grads(
            &self,
            gen: &NetParams,
            disc: &NetParams,
            real: ArrayView2<f64>,
            latent: ArrayView2<f64>,
            target: Player,
            mode: GenLoss,
        ) -> Result<(f64, Gradients)> {
            let (v, mut g) = self.inner.value_and_grads(gen, disc, real, latent, target, mode)?;
            self.calls.set(self.calls.get() + 1);
            if self.calls.get() > self.healthy_calls {
                g.as_mut_slice()[0] = f64::NAN;
            }
            Ok((v, g))
        }
    }

    #[test]
    fn non_finite_gradient_returns_best_so_far() {
        let game = Poisoned {
            inner: small_game(),
            healthy_calls: 9,
            calls: Cell::new(0),
        };
        let snap = snapshot(&game.inner, 9, 0);
        let data = split(9);
        let d = find_worst_discriminator(
            &game,
            &snap.gen,
            &snap.disc,
            data.adversary(),
            &cfg(50, 0),
            &mut stream(0, 0),
        )
        .unwrap();
        assert!(d.non_finite);
        assert_eq!(d.steps_run, 9);
        assert!(d.best_step <= 9);
        assert!(d.best_value >= d.initial_value);
        assert!(d.params.is_finite());
    }

    #[test]
    fn minimax_of_black_box_samplers() {
        let game = small_game();
        let data = split(10);
        let zeros = DgConfig::with_steps(0, 0);
        let ring = make_ring();
        let v = estimate_minimax(&game, |n, rng| ring.sample(n, rng), &data, &zeros, InitScheme::Zeros).unwrap();
        assert!((v + LN_2).abs() < 1e-15);
        let bad = estimate_minimax(&game, |n, _| Array2::zeros((n, 3)), &data, &zeros, InitScheme::Zeros);
        assert!(matches!(bad, Err(Error::Shape(_))));
        let constant = estimate_minimax(
            &game,
            |n, _| Array2::from_elem((n, 2), 3.0),
            &data,
            &DgConfig::with_steps(300, 0),
            InitScheme::XavierUniform,
        )
        .unwrap();
        assert!(constant > -0.2, "constant sampler minimax {constant}");
    }

    fn library(game: &GanGame) -> Vec<Snapshot> {
        (0..5).map(|i| snapshot(game, 20 + i, i as usize * 10)).collect()
    }

    #[test]
    fn single_snapshot_library_has_zero_gap() {
        let game = small_game();
        let lib = vec![snapshot(&game, 11, 30)];
        let data = split(11);
        for policy in [SnapshotPolicy::PastOnly, SnapshotPolicy::PastAndFuture] {
            let r = estimate_dg_snapshot(&game, 30, &lib, &data, policy, 0).unwrap();
            assert_eq!(r.adversary.dg, 0.0);
            assert_eq!(r.dg, 0.0);
        }
        assert!(estimate_dg_snapshot(&game, 40, &lib, &data, SnapshotPolicy::PastOnly, 0).is_err());
    }

    #[test]
    fn wider_candidate_set_dominates() {
        let game = small_game();
        let lib = library(&game);
        let data = split(12);
        for snap in &lib {
            let past = estimate_dg_snapshot(&game, snap.step, &lib, &data, SnapshotPolicy::PastOnly, 3).unwrap();
            let all = estimate_dg_snapshot(&game, snap.step, &lib, &data, SnapshotPolicy::PastAndFuture, 3).unwrap();
            assert!(all.adversary.dg >= past.adversary.dg);
            assert!(past.adversary.dg >= 0.0);
            assert!(all.adversary.minimax >= all.adversary.baseline);
            assert!(all.adversary.maximin <= all.adversary.baseline);
        }
    }

    #[test]
    fn snapshot_ties_go_to_the_earlier_step() {
        let game = small_game();
        let base = snapshot(&game, 13, 0);
        let lib: Vec<Snapshot> = [20, 0, 10]
            .iter()
            .map(|&step| Snapshot { step, ..base.clone() })
            .collect();
        let data = split(13);
        let r = estimate_dg_snapshot(&game, 20, &lib, &data, SnapshotPolicy::PastOnly, 0).unwrap();
        assert_eq!(r.dg, 0.0);
        assert_eq!(r.k, 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn warm_start_gap_is_non_negative(seed in 0u64..10_000, k in 0usize..25) {
            let game = small_game();
            let snap = snapshot(&game, seed, 0);
            let data = three_way_split(&make_ring(), (1, 60, 40), seed).unwrap();
            let r = estimate_dg(&game, &snap, &data, &cfg(k, seed)).unwrap();
            prop_assert!(r.adversary.minimax >= r.adversary.baseline - 1e-9);
            prop_assert!(r.adversary.maximin <= r.adversary.baseline + 1e-9);
            prop_assert!(r.adversary.dg >= -2e-9);
            prop_assert_eq!(r.dg, r.minimax - r.maximin);
        }
    }
}
