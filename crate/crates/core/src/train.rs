//! Alternating GAN training with snapshot recording.

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;

use crate::data::{DatasetSplit, MixtureKind};
use crate::error::{Error, Result};
use crate::game::{GanGame, GenLoss, Player, ZeroSumGame};
use crate::net::{InitScheme, NetParams};
use crate::optim::{AdamConfig, AdamState, Direction};
use crate::rng::{stream, streams, Rng};

pub const DEFAULT_TOTAL_STEPS: usize = 10_000;
pub const DEFAULT_SNAPSHOT_EVERY: usize = 250;
pub const DEFAULT_LOG_EVERY: usize = 10;
pub const DEFAULT_BATCH_SIZE: usize = 100;
pub const DEFAULT_LATENT_DIM: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    RingStable,
    RingUnstable,
    SpiralStable,
    SpiralUnstable,
    GridStable,
    GridUnstable,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::RingStable,
        Preset::RingUnstable,
        Preset::SpiralStable,
        Preset::SpiralUnstable,
        Preset::GridStable,
        Preset::GridUnstable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::RingStable => "ring-stable",
            Preset::RingUnstable => "ring-unstable",
            Preset::SpiralStable => "spiral-stable",
            Preset::SpiralUnstable => "spiral-unstable",
            Preset::GridStable => "grid-stable",
            Preset::GridUnstable => "grid-unstable",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn mixture(self) -> MixtureKind {
        match self {
            Preset::RingStable | Preset::RingUnstable => MixtureKind::Ring,
            Preset::SpiralStable | Preset::SpiralUnstable => MixtureKind::Spiral,
            Preset::GridStable | Preset::GridUnstable => MixtureKind::Grid,
        }
    }

    /// `(lr_g, lr_d)`.
    pub fn learning_rates(self) -> (f64, f64) {
        match self {
            Preset::RingStable => (1e-3, 1e-4),
            Preset::RingUnstable => (1e-4, 2e-4),
            Preset::SpiralStable => (1e-3, 2e-3),
            Preset::SpiralUnstable => (1e-4, 2e-3),
            Preset::GridStable => (1e-3, 2e-3),
            Preset::GridUnstable => (1e-4, 2e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub game: GanGame,
    pub mixture: MixtureKind,
    pub lr_g: f64,
    pub lr_d: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub d_steps_per_g_step: usize,
    pub snapshot_every: usize,
    pub log_every: usize,
    pub seed: u64,
    pub gen_loss_mode: GenLoss,
    pub init: InitScheme,
}

impl TrainConfig {
    pub fn preset(preset: Preset) -> Self {
        let (lr_g, lr_d) = preset.learning_rates();
        Self {
            game: GanGame::toy(2, DEFAULT_LATENT_DIM),
            mixture: preset.mixture(),
            lr_g,
            lr_d,
            batch_size: DEFAULT_BATCH_SIZE,
            total_steps: DEFAULT_TOTAL_STEPS,
            d_steps_per_g_step: 1,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            log_every: DEFAULT_LOG_EVERY,
            seed: 0,
            gen_loss_mode: GenLoss::NonSaturating,
            init: InitScheme::XavierUniform,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.game.latent_dim
    }

    pub fn validate(&self) -> Result<()> {
        self.loop_settings().validate()
    }

    pub fn loop_settings(&self) -> LoopSettings {
        LoopSettings {
            lr_g: self.lr_g,
            lr_d: self.lr_d,
            batch_size: self.batch_size,
            total_steps: self.total_steps,
            d_steps_per_g_step: self.d_steps_per_g_step,
            snapshot_every: self.snapshot_every,
            log_every: self.log_every,
            seed: self.seed,
            gen_loss_mode: self.gen_loss_mode,
        }
    }

    /// Initial players drawn from the generator and discriminator init streams.
    pub fn init_players(&self) -> Result<(NetParams, NetParams)> {
        let gen = NetParams::init(
            &self.game.generator_spec,
            self.init,
            &mut stream(self.seed, streams::GEN_INIT),
        )?;
        let disc = NetParams::init(
            &self.game.discriminator_spec,
            self.init,
            &mut stream(self.seed, streams::DISC_INIT),
        )?;
        Ok((gen, disc))
    }
}

/// Both players at one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub gen: NetParams,
    pub disc: NetParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub step: usize,
    pub gen_loss: f64,
    pub disc_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub total_steps: usize,
    pub rows: Vec<LossRow>,
    pub snapshots: Vec<Snapshot>,
    pub gen: NetParams,
    pub disc: NetParams,
}

impl TrainLog {
    pub fn snapshot_at(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }

    pub fn final_snapshot(&self) -> Snapshot {
        Snapshot {
            step: self.total_steps,
            gen: self.gen.clone(),
            disc: self.disc.clone(),
        }
    }
}

fn real_batch(train: &ArrayView2<f64>, n: usize, rng: &mut Rng) -> Array2<f64> {
    let rows = train.nrows();
    let mut out = Array2::zeros((n, train.ncols()));
    for mut row in out.rows_mut() {
        row.assign(&train.row(rng.random_range(0..rows)));
    }
    out
}

/// Step-size and bookkeeping settings of the alternating loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSettings {
    pub lr_g: f64,
    pub lr_d: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub d_steps_per_g_step: usize,
    pub snapshot_every: usize,
    pub log_every: usize,
    pub seed: u64,
    pub gen_loss_mode: GenLoss,
}

impl LoopSettings {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.d_steps_per_g_step == 0 || self.snapshot_every == 0 || self.log_every == 0 {
            return Err(Error::Config(
                "batch size, step ratio, snapshot and log intervals must be at least 1".into(),
            ));
        }
        for (name, lr) in [("lr_g", self.lr_g), ("lr_d", self.lr_d)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {lr}")));
            }
        }
        Ok(())
    }
}

/// Trains from the config's seeded initialization on `data.train()` only.
pub fn train_gan(config: &TrainConfig, data: &DatasetSplit) -> Result<TrainLog> {
    config.validate()?;
    let (gen, disc) = config.init_players()?;
    train_players(&config.game, gen, disc, data.train(), &config.loop_settings())
}

/// Alternating training of any zero-sum game from given players.
///
/// Each step takes `d_steps_per_g_step` discriminator ascent steps on `M`,
/// then one generator step on `gen_loss_mode`. Every player update draws a
/// fresh latent batch and a fresh real batch (with replacement). Logged
/// losses are `-M` for the discriminator and the generator's own objective,
/// taken from the last update of the step. Snapshots are taken before the
/// update of the matching step, so step 0 holds the initialization.
pub fn train_players<G: ZeroSumGame>(
    game: &G,
    mut gen: NetParams,
    mut disc: NetParams,
    train: ArrayView2<f64>,
    settings: &LoopSettings,
) -> Result<TrainLog> {
    settings.validate()?;
    if train.nrows() == 0 {
        return Err(Error::EmptyBatch("train split"));
    }
    if train.ncols() != game.data_dim() {
        return Err(Error::Shape(format!(
            "train split has {} columns, game expects {}",
            train.ncols(),
            game.data_dim()
        )));
    }
    let mut opt_g = AdamState::for_params(AdamConfig::gan_training(settings.lr_g), &gen)?;
    let mut opt_d = AdamState::for_params(AdamConfig::gan_training(settings.lr_d), &disc)?;
    let mut rng = stream(settings.seed, streams::TRAINING);
    let mut rows = Vec::with_capacity(settings.total_steps / settings.log_every + 1);
    let mut snapshots = Vec::with_capacity(settings.total_steps / settings.snapshot_every + 1);
    let abort = |step: usize, snapshots: &Vec<Snapshot>| Error::NumericAbort {
        step,
        last_finite: snapshots.last().cloned().map(Box::new),
    };

    for step in 0..=settings.total_steps {
        if step % settings.snapshot_every == 0 {
            snapshots.push(Snapshot {
                step,
                gen: gen.clone(),
                disc: disc.clone(),
            });
        }
        if step == settings.total_steps {
            break;
        }
        let mut disc_value = 0.0;
        for _ in 0..settings.d_steps_per_g_step {
            let real = real_batch(&train, settings.batch_size, &mut rng);
            let latent = game.sample_latent(settings.batch_size, &mut rng);
            let (value, grads) = game.value_and_grads(
                &gen,
                &disc,
                real.view(),
                latent.view(),
                Player::Discriminator,
                GenLoss::Saturating,
            )?;
            if !value.is_finite() {
                return Err(abort(step, &snapshots));
            }
            opt_d
                .step(&mut disc, &grads, Direction::Maximize)
                .map_err(|_| abort(step, &snapshots))?;
            if !disc.is_finite() {
                return Err(abort(step, &snapshots));
            }
            disc_value = value;
        }
        let real = real_batch(&train, settings.batch_size, &mut rng);
        let latent = game.sample_latent(settings.batch_size, &mut rng);
        let (gen_value, grads) = game.value_and_grads(
            &gen,
            &disc,
            real.view(),
            latent.view(),
            Player::Generator,
            settings.gen_loss_mode,
        )?;
        if !gen_value.is_finite() {
            return Err(abort(step, &snapshots));
        }
        opt_g
            .step(&mut gen, &grads, Direction::Minimize)
            .map_err(|_| abort(step, &snapshots))?;
        if !gen.is_finite() {
            return Err(abort(step, &snapshots));
        }
        if step % settings.log_every == 0 {
            rows.push(LossRow {
                step,
                gen_loss: gen_value,
                disc_loss: -disc_value,
            });
        }
    }
    Ok(TrainLog {
        total_steps: settings.total_steps,
        rows,
        snapshots,
        gen,
        disc,
    })
}
