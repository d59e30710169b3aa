//! Zero-sum game objectives.
//!
//! Sign convention: the first player (generator / row / `u`) minimizes `M`,
//! the second player (discriminator / column / `v`) maximizes it.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::net::{validate_spec, Activation, Gradients, LayerSpec, NetParams};
use crate::rng::Rng;

/// Default probability clamp applied before taking logarithms.
pub const DEFAULT_EPSILON_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentPrior {
    StdNormal,
    /// Uniform on `[-1, 1]` per coordinate.
    Uniform,
}

/// Objective the generator follows during training.
///
/// Metric evaluations always use [`GenLoss::Saturating`], i.e. the zero-sum `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenLoss {
    /// Minimize `M` itself.
    Saturating,
    /// Minimize `-1/2 mean log D(G(z))`.
    NonSaturating,
}

/// A stochastic zero-sum game between two networks, evaluated on sample batches.
pub trait ZeroSumGame {
    fn latent_dim(&self) -> usize;
    fn data_dim(&self) -> usize;
    fn sample_latent(&self, n: usize, rng: &mut Rng) -> Array2<f64>;
    fn generate(&self, gen: &NetParams, latent: ArrayView2<f64>) -> Result<Array2<f64>>;

    /// `M` evaluated with an explicit fake batch.
    fn value_on_samples(&self, disc: &NetParams, real: ArrayView2<f64>, fake: ArrayView2<f64>) -> Result<f64>;

    /// Value of the objective `target` optimizes together with its gradient.
    /// For the discriminator and the saturating generator the value is `M`.
    fn value_and_grads(
        &self,
        gen: &NetParams,
        disc: &NetParams,
        real: ArrayView2<f64>,
        latent: ArrayView2<f64>,
        target: Player,
        mode: GenLoss,
    ) -> Result<(f64, Gradients)>;

    fn value(&self, gen: &NetParams, disc: &NetParams, real: ArrayView2<f64>, latent: ArrayView2<f64>) -> Result<f64> {
        let fake = self.generate(gen, latent)?;
        self.value_on_samples(disc, real, fake.view())
    }

    fn grads(
        &self,
        gen: &NetParams,
        disc: &NetParams,
        real: ArrayView2<f64>,
        latent: ArrayView2<f64>,
        target: Player,
        mode: GenLoss,
    ) -> Result<Gradients> {
        Ok(self.value_and_grads(gen, disc, real, latent, target, mode)?.1)
    }
}

/// `log(clamp(d))` and its derivative in `d` (zero where the clamp is active).
#[inline]
pub(crate) fn log_clamped(d: f64, eps: f64) -> (f64, f64) {
    if d <= eps {
        (eps.ln(), 0.0)
    } else if d >= 1.0 - eps {
        ((1.0 - eps).ln(), 0.0)
    } else {
        (d.ln(), 1.0 / d)
    }
}

/// `log(1 - clamp(d))` and its derivative in `d`.
#[inline]
pub(crate) fn log1m_clamped(d: f64, eps: f64) -> (f64, f64) {
    if d <= eps {
        ((1.0 - eps).ln(), 0.0)
    } else if d >= 1.0 - eps {
        (eps.ln(), 0.0)
    } else {
        ((1.0 - d).ln(), -1.0 / (1.0 - d))
    }
}

fn non_empty(batch: &ArrayView2<f64>, what: &'static str) -> Result<()> {
    if batch.nrows() == 0 {
        Err(Error::EmptyBatch(what))
    } else {
        Ok(())
    }
}

/// `1/2 mean log D(real) + 1/2 mean log(1 - D(fake))` from discriminator outputs.
pub fn objective_from_outputs(d_real: ArrayView1<f64>, d_fake: ArrayView1<f64>, eps: f64) -> f64 {
    let real = d_real.iter().map(|&d| log_clamped(d, eps).0).sum::<f64>() / d_real.len() as f64;
    let fake = d_fake.iter().map(|&d| log1m_clamped(d, eps).0).sum::<f64>() / d_fake.len() as f64;
    0.5 * real + 0.5 * fake
}

/// The GAN game `M(u, v) = 1/2 E log D_v(x) + 1/2 E log(1 - D_v(G_u(z)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GanGame {
    pub generator_spec: Vec<LayerSpec>,
    pub discriminator_spec: Vec<LayerSpec>,
    pub latent_dim: usize,
    pub latent_prior: LatentPrior,
    pub epsilon_clip: f64,
}

impl GanGame {
    pub fn new(
        generator_spec: Vec<LayerSpec>,
        discriminator_spec: Vec<LayerSpec>,
        latent_prior: LatentPrior,
        epsilon_clip: f64,
    ) -> Result<Self> {
        validate_spec(&generator_spec)?;
        validate_spec(&discriminator_spec)?;
        let latent_dim = generator_spec[0].in_dim;
        let data_dim = generator_spec.last().expect("validated").out_dim;
        let disc_last = discriminator_spec.last().expect("validated");
        if discriminator_spec[0].in_dim != data_dim {
            return Err(Error::Config(format!(
                "generator emits {data_dim}-d samples but discriminator expects {}",
                discriminator_spec[0].in_dim
            )));
        }
        if disc_last.out_dim != 1 || disc_last.activation != Activation::Sigmoid {
            return Err(Error::Config("discriminator must end in a single sigmoid unit".into()));
        }
        if !(epsilon_clip > 0.0 && epsilon_clip < 0.5) {
            return Err(Error::Config(format!(
                "epsilon_clip must lie in (0, 0.5), got {epsilon_clip}"
            )));
        }
        Ok(Self {
            generator_spec,
            discriminator_spec,
            latent_dim,
            latent_prior,
            epsilon_clip,
        })
    }

    /// Mixture-of-Gaussians architecture: two 128-unit ReLU layers on each side,
    /// linear generator output, sigmoid discriminator output.
    pub fn toy(data_dim: usize, latent_dim: usize) -> Self {
        let gen = crate::net::mlp_spec(
            latent_dim,
            &[128, 128],
            data_dim,
            Activation::Relu,
            Activation::Identity,
        );
        let disc = crate::net::mlp_spec(data_dim, &[128, 128], 1, Activation::Relu, Activation::Sigmoid);
        Self::new(gen, disc, LatentPrior::StdNormal, DEFAULT_EPSILON_CLIP).expect("toy architecture is valid")
    }

    fn check_players(&self, gen: &NetParams, disc: &NetParams) -> Result<()> {
        if gen.spec() != self.generator_spec.as_slice() {
            return Err(Error::Shape("generator parameters do not match the game".into()));
        }
        self.check_disc(disc)
    }

    fn check_disc(&self, disc: &NetParams) -> Result<()> {
        if disc.spec() != self.discriminator_spec.as_slice() {
            return Err(Error::Shape("discriminator parameters do not match the game".into()));
        }
        Ok(())
    }

    /// Discriminator-side value and gradient of `M` for explicit sample batches.
    /// This is all that is needed when the generator is a black box.
    pub fn discriminator_value_and_grads(
        &self,
        disc: &NetParams,
        real: ArrayView2<f64>,
        fake: ArrayView2<f64>,
    ) -> Result<(f64, Gradients)> {
        self.check_disc(disc)?;
        non_empty(&real, "real batch")?;
        non_empty(&fake, "fake batch")?;
        let eps = self.epsilon_clip;
        let real_trace = disc.forward_trace(real)?;
        let fake_trace = disc.forward_trace(fake)?;
        let n = real.nrows() as f64;
        let m = fake.nrows() as f64;
        let mut value = 0.0;
        let real_grad = real_trace.output().mapv(|d| {
            let (v, dv) = log_clamped(d, eps);
            value += 0.5 * v / n;
            0.5 * dv / n
        });
        let fake_grad = fake_trace.output().mapv(|d| {
            let (v, dv) = log1m_clamped(d, eps);
            value += 0.5 * v / m;
            0.5 * dv / m
        });
        let (g_real, _) = disc.backward_trace(&real_trace, real_grad.view(), true)?;
        let (g_fake, _) = disc.backward_trace(&fake_trace, fake_grad.view(), true)?;
        let mut grads = g_real.expect("requested");
        grads.add_assign(&g_fake.expect("requested"));
        Ok((value, grads))
    }

    fn generator_value_and_grads(
        &self,
        gen: &NetParams,
        disc: &NetParams,
        real: ArrayView2<f64>,
        latent: ArrayView2<f64>,
        mode: GenLoss,
    ) -> Result<(f64, Gradients)> {
        let eps = self.epsilon_clip;
        let gen_trace = gen.forward_trace(latent)?;
        let fake_trace = disc.forward_trace(gen_trace.output().view())?;
        let m = latent.nrows() as f64;
        let mut value = 0.0;
        let fake_grad = match mode {
            GenLoss::Saturating => fake_trace.output().mapv(|d| {
                let (v, dv) = log1m_clamped(d, eps);
                value += 0.5 * v / m;
                0.5 * dv / m
            }),
            GenLoss::NonSaturating => fake_trace.output().mapv(|d| {
                let (v, dv) = log_clamped(d, eps);
                value -= 0.5 * v / m;
                -0.5 * dv / m
            }),
        };
        if mode == GenLoss::Saturating {
            // The data term does not depend on the generator but is part of M.
            let d_real = disc.forward(real)?;
            value += 0.5 * d_real.iter().map(|&d| log_clamped(d, eps).0).sum::<f64>() / real.nrows() as f64;
        }
        let (_, fake_input_grad) = disc.backward_trace(&fake_trace, fake_grad.view(), false)?;
        let (grads, _) = gen.backward_trace(&gen_trace, fake_input_grad.view(), true)?;
        Ok((value, grads.expect("requested")))
    }
}

impl ZeroSumGame for GanGame {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn data_dim(&self) -> usize {
        self.discriminator_spec[0].in_dim
    }

    fn sample_latent(&self, n: usize, rng: &mut Rng) -> Array2<f64> {
        match self.latent_prior {
            LatentPrior::StdNormal => Array2::from_shape_simple_fn((n, self.latent_dim), || rng.sample(StandardNormal)),
            LatentPrior::Uniform => Array2::from_shape_simple_fn((n, self.latent_dim), || rng.random_range(-1.0..1.0)),
        }
    }

    fn generate(&self, gen: &NetParams, latent: ArrayView2<f64>) -> Result<Array2<f64>> {
        if gen.spec() != self.generator_spec.as_slice() {
            return Err(Error::Shape("generator parameters do not match the game".into()));
        }
        gen.forward(latent)
    }

    fn value_on_samples(&self, disc: &NetParams, real: ArrayView2<f64>, fake: ArrayView2<f64>) -> Result<f64> {
        self.check_disc(disc)?;
        non_empty(&real, "real batch")?;
        non_empty(&fake, "fake batch")?;
        let d_real = disc.forward(real)?;
        let d_fake = disc.forward(fake)?;
        Ok(objective_from_outputs(
            d_real.column(0),
            d_fake.column(0),
            self.epsilon_clip,
        ))
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
        self.check_players(gen, disc)?;
        non_empty(&real, "real batch")?;
        non_empty(&latent, "latent batch")?;
        match target {
            Player::Discriminator => {
                let fake = gen.forward(latent)?;
                self.discriminator_value_and_grads(disc, real, fake.view())
            }
            Player::Generator => self.generator_value_and_grads(gen, disc, real, latent, mode),
        }
    }
}

/// `M(u, v) = u . v` over the box `[-r, r]^dim` for both players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearGame {
    pub dim: usize,
    pub box_radius: f64,
}

impl BilinearGame {
    pub fn new(dim: usize, box_radius: f64) -> Result<Self> {
        if dim == 0 || !(box_radius > 0.0) {
            return Err(Error::Config("bilinear game needs dim >= 1 and radius > 0".into()));
        }
        Ok(Self { dim, box_radius })
    }

    pub fn value(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Closed-form duality gap `r |u|_1 + r |v|_1`.
    pub fn duality_gap(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let r = self.box_radius;
        for (name, x) in [("u", u), ("v", v)] {
            if x.len() != self.dim {
                return Err(Error::Shape(format!(
                    "{name} has length {}, game dim is {}",
                    x.len(),
                    self.dim
                )));
            }
            if x.iter().any(|c| !(c.abs() <= r)) {
                return Err(Error::Domain(format!(
                    "{name} lies outside the strategy box [-{r}, {r}]"
                )));
            }
        }
        let l1 = |x: &[f64]| x.iter().map(|c| c.abs()).sum::<f64>();
        Ok(r * l1(u) + r * l1(v))
    }
}

/// Finite zero-sum game; the row player minimizes `x^T A y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    payoff: Array2<f64>,
}

fn check_distribution(x: &[f64], len: usize, name: &str) -> Result<()> {
    if x.len() != len {
        return Err(Error::Shape(format!("{name} has {} entries, expected {len}", x.len())));
    }
    if x.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::Domain(format!("{name} has a negative or NaN entry")));
    }
    let total: f64 = x.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

impl MatrixGame {
    pub fn new(payoff: Array2<f64>) -> Result<Self> {
        if payoff.is_empty() {
            return Err(Error::Config("payoff matrix is empty".into()));
        }
        if payoff.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("payoff matrix has non-finite entries".into()));
        }
        Ok(Self { payoff })
    }

    pub fn payoff(&self) -> &Array2<f64> {
        &self.payoff
    }

    /// `max_j (x^T A)_j - min_i (A y)_i`.
    pub fn duality_gap(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let (m, n) = self.payoff.dim();
        check_distribution(x, m, "row strategy")?;
        check_distribution(y, n, "column strategy")?;
        let xa = ArrayView1::from(x).dot(&self.payoff);
        let ay = self.payoff.dot(&ArrayView1::from(y));
        let best_col = xa.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let best_row = ay.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(best_col - best_row)
    }

    /// Mixed equilibrium by support enumeration. Returns `(x, y, value)`.
    pub fn equilibrium(&self) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let (m, n) = self.payoff.dim();
        let tol = 1e-10;
        for k in 1..=m.min(n) {
            for rows in subsets(m, k) {
                for cols in subsets(n, k) {
                    let Some((x_s, w)) = indifferent(&self.payoff, &rows, &cols, true) else {
                        continue;
                    };
                    let Some((y_s, w2)) = indifferent(&self.payoff, &rows, &cols, false) else {
                        continue;
                    };
                    if x_s.iter().chain(&y_s).any(|&p| p < -tol) || (w - w2).abs() > 1e-8 {
                        continue;
                    }
                    let mut x = vec![0.0; m];
                    let mut y = vec![0.0; n];
                    rows.iter().zip(&x_s).for_each(|(&i, &p)| x[i] = p.max(0.0));
                    cols.iter().zip(&y_s).for_each(|(&j, &p)| y[j] = p.max(0.0));
                    let xa = Array1::from(x.clone()).dot(&self.payoff);
                    let ay = self.payoff.dot(&Array1::from(y.clone()));
                    // Column player cannot raise the payoff, row player cannot lower it.
                    if xa.iter().all(|&v| v <= w + 1e-8) && ay.iter().all(|&v| v >= w - 1e-8) {
                        return Ok((x, y, w));
                    }
                }
            }
        }
        Err(Error::Domain(
            "support enumeration found no equilibrium (degenerate game)".into(),
        ))
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

/// Solves for a distribution on one player's support that makes the opponent
/// indifferent across the opponent's support. Returns `(probabilities, value)`.
fn indifferent(a: &Array2<f64>, rows: &[usize], cols: &[usize], for_rows: bool) -> Option<(Vec<f64>, f64)> {
    let k = rows.len();
    let dim = k + 1;
    let mut sys = Array2::<f64>::zeros((dim, dim + 1));
    for e in 0..k {
        for u in 0..k {
            sys[[e, u]] = if for_rows {
                a[[rows[u], cols[e]]]
            } else {
                a[[rows[e], cols[u]]]
            };
        }
        sys[[e, k]] = -1.0;
    }
    sys.slice_mut(s![k, 0..k]).fill(1.0);
    sys[[k, dim]] = 1.0;
    let sol = gaussian_solve(sys)?;
    Some((sol[..k].to_vec(), sol[k]))
}

fn gaussian_solve(mut aug: Array2<f64>) -> Option<Vec<f64>> {
    let n = aug.nrows();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| aug[[i, col]].abs().total_cmp(&aug[[j, col]].abs()))?;
        if aug[[pivot, col]].abs() < 1e-12 {
            return None;
        }
        if pivot != col {
            for c in 0..=n {
                aug.swap([pivot, c], [col, c]);
            }
        }
        for r in 0..n {
            if r != col {
                let f = aug[[r, col]] / aug[[col, col]];
                if f != 0.0 {
                    for c in col..=n {
                        aug[[r, c]] -= f * aug[[col, c]];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| aug[[i, n]] / aug[[i, i]]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{grad_check, mlp_spec, InitScheme};
    use crate::rng::stream;
    use ndarray::array;
    use std::f64::consts::LN_2;

    fn small_game() -> GanGame {
        GanGame::new(
            mlp_spec(3, &[5], 2, Activation::Tanh, Activation::Identity),
            mlp_spec(2, &[6], 1, Activation::Tanh, Activation::Sigmoid),
            LatentPrior::StdNormal,
            DEFAULT_EPSILON_CLIP,
        )
        .unwrap()
    }

    fn players(game: &GanGame, seed: u64) -> (NetParams, NetParams) {
        (
            NetParams::init(&game.generator_spec, InitScheme::XavierUniform, &mut stream(seed, 1)).unwrap(),
            NetParams::init(
                &game.discriminator_spec,
                InitScheme::XavierUniform,
                &mut stream(seed, 2),
            )
            .unwrap(),
        )
    }

    #[test]
    fn constant_half_discriminator_gives_minus_log2() {
        let game = small_game();
        let (gen, _) = players(&game, 0);
        let disc = NetParams::zeros(&game.discriminator_spec).unwrap();
        let mut rng = stream(0, 9);
        let real = Array2::from_shape_fn((7, 2), |(i, j)| (i + j) as f64);
        let latent = game.sample_latent(5, &mut rng);
        let v = game.value(&gen, &disc, real.view(), latent.view()).unwrap();
        assert!((v + LN_2).abs() < 1e-15);
    }

    #[test]
    fn perfect_discriminator_hits_the_clamp() {
        let eps = DEFAULT_EPSILON_CLIP;
        let v = objective_from_outputs(array![1.0, 1.0].view(), array![0.0].view(), eps);
        let expected = (1.0 - eps).ln();
        assert!((v - expected).abs() < 1e-15);
        assert!(v < 0.0 && v > -1e-6);
    }

    #[test]
    fn value_matches_direct_formula() {
        let game = small_game();
        let (gen, disc) = players(&game, 4);
        let mut rng = stream(4, 9);
        let real = Array2::from_shape_fn((6, 2), |(i, j)| 0.3 * i as f64 - 0.7 * j as f64);
        let latent = game.sample_latent(4, &mut rng);
        let v = game.value(&gen, &disc, real.view(), latent.view()).unwrap();
        let fake = gen.forward(latent.view()).unwrap();
        let d = |x: ArrayView1<f64>| disc.forward(x.insert_axis(ndarray::Axis(0))).unwrap()[[0, 0]];
        let real_term: f64 = real.rows().into_iter().map(|r| d(r).ln()).sum::<f64>() / 6.0;
        let fake_term: f64 = fake.rows().into_iter().map(|r| (1.0 - d(r)).ln()).sum::<f64>() / 4.0;
        assert!((v - (0.5 * real_term + 0.5 * fake_term)).abs() < 1e-14);
        assert!(v <= 0.0);
    }

    #[test]
    fn empty_batches_are_errors() {
        let game = small_game();
        let (gen, disc) = players(&game, 0);
        let real = Array2::<f64>::zeros((0, 2));
        let latent = Array2::<f64>::zeros((3, 3));
        assert!(matches!(
            game.value(&gen, &disc, real.view(), latent.view()),
            Err(Error::EmptyBatch(_))
        ));
    }

    /// Finite-difference check of game gradients for one player.
    fn fd_error(
        game: &GanGame,
        gen: &NetParams,
        disc: &NetParams,
        real: &Array2<f64>,
        latent: &Array2<f64>,
        target: Player,
    ) -> f64 {
        let analytic = game
            .grads(gen, disc, real.view(), latent.view(), target, GenLoss::Saturating)
            .unwrap();
        let mut worst: f64 = 0.0;
        let h = 1e-5;
        let n = analytic.len();
        for i in 0..n {
            let eval = |delta: f64| {
                let (mut g, mut d) = (gen.clone(), disc.clone());
                match target {
                    Player::Generator => g.as_mut_slice()[i] += delta,
                    Player::Discriminator => d.as_mut_slice()[i] += delta,
                }
                game.value(&g, &d, real.view(), latent.view()).unwrap()
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let a = analytic.as_slice()[i];
            worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8));
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let game = small_game();
        let (gen, disc) = players(&game, 11);
        let mut rng = stream(11, 3);
        let real = Array2::from_shape_fn((8, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let latent = game.sample_latent(8, &mut rng);
        assert!(fd_error(&game, &gen, &disc, &real, &latent, Player::Discriminator) < 1e-5);
        assert!(fd_error(&game, &gen, &disc, &real, &latent, Player::Generator) < 1e-5);
    }

    #[test]
    fn saturating_and_non_saturating_agree_at_half() {
        let game = small_game();
        let (gen, _) = players(&game, 2);
        let hidden = NetParams::init(&game.discriminator_spec, InitScheme::XavierUniform, &mut stream(2, 5)).unwrap();
        let mut rng = stream(2, 6);
        let real = Array2::from_shape_fn((4, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let latent = game.sample_latent(4, &mut rng);
        let both = |disc: &NetParams| {
            let sat = game
                .grads(
                    &gen,
                    disc,
                    real.view(),
                    latent.view(),
                    Player::Generator,
                    GenLoss::Saturating,
                )
                .unwrap();
            let ns = game
                .grads(
                    &gen,
                    disc,
                    real.view(),
                    latent.view(),
                    Player::Generator,
                    GenLoss::NonSaturating,
                )
                .unwrap();
            (sat, ns)
        };

        // D identically 1/2: both generator gradients vanish.
        let zero = NetParams::zeros(&game.discriminator_spec).unwrap();
        let (sat, ns) = both(&zero);
        assert_eq!(sat, ns);
        assert!(sat.as_slice().iter().all(|&g| g == 0.0));

        // D within 1e-4 of 1/2: per-sample factors -1/(1-D) and -1/D nearly coincide.
        let mut near = hidden.clone();
        near.weights_mut(1).mapv_inplace(|w| w * 1e-4);
        let (sat, ns) = both(&near);
        let diff: f64 = sat
            .as_slice()
            .iter()
            .zip(ns.as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(sat.l2_norm() > 0.0);
        assert!(diff / sat.as_slice().iter().map(|g| g.abs()).sum::<f64>() < 1e-3);

        let (_, a) = log1m_clamped(0.5, DEFAULT_EPSILON_CLIP);
        let (_, b) = log_clamped(0.5, DEFAULT_EPSILON_CLIP);
        assert_eq!(a, -b);
    }

    #[test]
    fn value_is_invariant_to_row_permutation() {
        let game = small_game();
        let (gen, disc) = players(&game, 8);
        let mut rng = stream(8, 1);
        let real = Array2::from_shape_fn((5, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let latent = game.sample_latent(5, &mut rng);
        let a = game.value(&gen, &disc, real.view(), latent.view()).unwrap();
        let real_rev = real.slice(s![..;-1, ..]).to_owned();
        let latent_rev = latent.slice(s![..;-1, ..]).to_owned();
        let b = game.value(&gen, &disc, real_rev.view(), latent_rev.view()).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn disc_loss_grad_check_via_netcore() {
        let game = small_game();
        let (_, disc) = players(&game, 12);
        let mut rng = stream(12, 0);
        let batch = Array2::from_shape_fn((16, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let eps = DEFAULT_EPSILON_CLIP;
        let err = grad_check(&disc, batch.view(), 1e-5, |out| {
            let n = out.nrows() as f64;
            let mut v = 0.0;
            let g = out.mapv(|d| {
                let (l, dl) = log_clamped(d, eps);
                v += 0.5 * l / n;
                0.5 * dl / n
            });
            (v, g)
        })
        .unwrap();
        assert!(err < 1e-5, "err = {err}");
    }

    #[test]
    fn bilinear_gap_closed_form() {
        let g = BilinearGame::new(2, 1.0).unwrap();
        assert_eq!(g.duality_gap(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!((g.duality_gap(&[1.0, 0.0], &[0.5, -0.5]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(g.duality_gap(&[1.5, 0.0], &[0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn bilinear_gap_matches_grid_enumeration() {
        let g = BilinearGame::new(2, 1.0).unwrap();
        let (u, v) = ([1.0, 0.0], [0.5, -0.5]);
        let grid: Vec<f64> = (0..=2000).map(|i| -1.0 + i as f64 * 1e-3).collect();
        let mut best_v = f64::NEG_INFINITY;
        let mut best_u = f64::INFINITY;
        // Objective is separable, so the 2-d box search splits per coordinate.
        let mut max_per = [f64::NEG_INFINITY; 2];
        let mut min_per = [f64::INFINITY; 2];
        for &c in &grid {
            for k in 0..2 {
                max_per[k] = max_per[k].max(u[k] * c);
                min_per[k] = min_per[k].min(c * v[k]);
            }
        }
        best_v = best_v.max(max_per.iter().sum());
        best_u = best_u.min(min_per.iter().sum());
        assert!((g.duality_gap(&u, &v).unwrap() - (best_v - best_u)).abs() < 1e-12);
    }

    #[test]
    fn matrix_gap_examples() {
        let pennies = MatrixGame::new(array![[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        assert_eq!(pennies.duality_gap(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        // x = (1, 0): column best response earns 1; y uniform: row best response pays 0.
        assert!((pennies.duality_gap(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            pennies.duality_gap(&[0.6, 0.6], &[0.5, 0.5]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            pennies.duality_gap(&[1.2, -0.2], &[0.5, 0.5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn equilibrium_of_matching_pennies() {
        let pennies = MatrixGame::new(array![[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        let (x, y, value) = pennies.equilibrium().unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && (y[0] - 0.5).abs() < 1e-12);
        assert!(value.abs() < 1e-12);
    }
}
