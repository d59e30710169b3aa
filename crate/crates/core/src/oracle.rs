//! Exact references for the estimator: discrete games with closed-form
//! worst responses, divergences by summation or quadrature, and a 1D GAN
//! whose worst generator can be found by exhaustive search.

use std::f64::consts::LN_2;

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::Exp1;
use serde::Serialize;

use crate::data::{DatasetSplit, GaussianMixture};
use crate::error::{Error, Result};
use crate::game::{
    log1m_clamped, log_clamped, GanGame, GenLoss, LatentPrior, Player, ZeroSumGame, DEFAULT_EPSILON_CLIP,
};
use crate::metric::{estimate_dg, DgConfig};
use crate::net::{mlp_spec, Activation, Gradients, InitScheme, LayerSpec, NetParams};
use crate::optim::{AdamConfig, AdamState, Direction};
use crate::rng::{stream, streams, Rng};
use crate::train::{train_players, LoopSettings, Snapshot};

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn check_distribution(v: &[f64], name: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Domain(format!("{name} is empty")));
    }
    if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Domain(format!("{name} has a negative or non-finite entry")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Domain(format!("{name} sums to {total}")));
    }
    Ok(())
}

/// Jensen-Shannon divergence of two probability vectors, with `0 log 0 = 0`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("jsd: lengths {} and {}", p.len(), q.len())));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).ln();
        }
    }
    Ok(total.clamp(0.0, LN_2))
}

/// `1/2 sum p log d + 1/2 sum q log(1 - d)` without clamping.
pub fn discrete_objective(p: &[f64], q: &[f64], d: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .zip(d)
        .map(|((&a, &b), &di)| 0.5 * xlogy(a, di) + 0.5 * xlogy(b, 1.0 - di))
        .sum()
}

/// A GAN restricted to `m` atoms: data `p`, generator `q`, discriminator values `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteGanGame {
    p: Vec<f64>,
    q: Vec<f64>,
    d: Vec<f64>,
}

/// Duality gap from adversaries that are not exact best responses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxDg {
    pub minimax: f64,
    pub maximin: f64,
    pub dg: f64,
    /// Exact minimax minus the value reached by the discriminator adversary.
    pub eps_disc: f64,
    /// Value reached by the generator adversary minus the exact maximin.
    pub eps_gen: f64,
}

impl ApproxDg {
    pub fn eps(&self) -> f64 {
        self.eps_disc.max(self.eps_gen)
    }
}

impl DiscreteGanGame {
    pub fn new(p: Vec<f64>, q: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() || p.len() != d.len() {
            return Err(Error::Shape("p, q and d must have the same length".into()));
        }
        check_distribution(&p, "p")?;
        check_distribution(&q, "q")?;
        if d.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Domain(
                "discriminator values must lie strictly inside (0, 1)".into(),
            ));
        }
        Ok(Self { p, q, d })
    }

    /// Random game on `m` atoms. Each atom of `p` and `q` is zeroed with
    /// probability 1/4 (keeping at least one), the rest is Dirichlet(1).
    pub fn random(m: usize, rng: &mut Rng) -> Self {
        let draw = |rng: &mut Rng| -> Vec<f64> {
            let keep_all = m == 1;
            let mut v: Vec<f64> = (0..m)
                .map(|_| {
                    let e: f64 = rng.sample(Exp1);
                    if !keep_all && rng.random::<f64>() < 0.25 {
                        0.0
                    } else {
                        e
                    }
                })
                .collect();
            if v.iter().all(|&x| x == 0.0) {
                let i = rng.random_range(0..m);
                v[i] = 1.0;
            }
            let total: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= total);
            v
        };
        let p = draw(rng);
        let q = draw(rng);
        let d = (0..m).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect();
        Self::new(p, q, d).expect("normalized by construction")
    }

    pub fn support_size(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn disc(&self) -> &[f64] {
        &self.d
    }

    /// `M(q, d)`.
    pub fn objective(&self) -> f64 {
        discrete_objective(&self.p, &self.q, &self.d)
    }

    /// `p / (p + q)` per atom; atoms outside both supports get 0.5.
    pub fn worst_discriminator_closed_form(&self) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(&a, &b)| if a + b == 0.0 { 0.5 } else { a / (a + b) })
            .collect()
    }

    pub fn jsd(&self) -> f64 {
        jsd(&self.p, &self.q).expect("validated")
    }

    /// `max_d M(q, d) = -log 2 + JSD(p, q)`.
    pub fn exact_minimax(&self) -> f64 {
        let value = -LN_2 + self.jsd();
        debug_assert!((value - self.minimax_by_plug_in()).abs() < 1e-9);
        value
    }

    /// The objective evaluated at the closed-form worst discriminator.
    pub fn minimax_by_plug_in(&self) -> f64 {
        discrete_objective(&self.p, &self.q, &self.worst_discriminator_closed_form())
    }

    /// Atom on which the worst generator puts all its mass (first on ties).
    pub fn worst_generator_vertex(&self) -> usize {
        let mut best = 0;
        for (i, &di) in self.d.iter().enumerate() {
            if di > self.d[best] {
                best = i;
            }
        }
        best
    }

    /// `min_q M(q, d)`, attained by a point mass on the atom with the largest `d`.
    pub fn exact_maximin(&self) -> f64 {
        let data: f64 = self.p.iter().zip(&self.d).map(|(&a, &di)| 0.5 * xlogy(a, di)).sum();
        data + 0.5 * (1.0 - self.d[self.worst_generator_vertex()]).ln()
    }

    pub fn exact_dg(&self) -> f64 {
        self.exact_minimax() - self.exact_maximin()
    }

    /// Gap reached by the given (possibly suboptimal) adversaries.
    pub fn approximate_dg(&self, disc_adversary: &[f64], gen_adversary: &[f64]) -> Result<ApproxDg> {
        if disc_adversary.len() != self.p.len() {
            return Err(Error::Shape("discriminator adversary has the wrong length".into()));
        }
        if disc_adversary.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::Domain(
                "discriminator adversary values must lie in [0, 1]".into(),
            ));
        }
        if gen_adversary.len() != self.p.len() {
            return Err(Error::Shape("generator adversary has the wrong length".into()));
        }
        check_distribution(gen_adversary, "generator adversary")?;
        let minimax = discrete_objective(&self.p, &self.q, disc_adversary);
        let maximin = discrete_objective(&self.p, gen_adversary, &self.d);
        Ok(ApproxDg {
            minimax,
            maximin,
            dg: minimax - maximin,
            eps_disc: self.exact_minimax() - minimax,
            eps_gen: maximin - self.exact_maximin(),
        })
    }

    /// Adversaries from `steps` Adam steps, warm-started at `(q, d)`: the
    /// discriminator in logit space, the generator in softmax-logit space.
    pub fn descent_adversaries(&self, steps: usize, lr: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.p.len();
        let cfg = AdamConfig {
            lr,
            ..AdamConfig::adversary_default()
        };
        let mut logits: Vec<f64> = self.d.iter().map(|&x| (x / (1.0 - x)).ln()).collect();
        let mut opt = AdamState::new(cfg, m)?;
        let mut grad = vec![0.0; m];
        for _ in 0..steps {
            for i in 0..m {
                let di = crate::net::sigmoid(logits[i]);
                grad[i] = 0.5 * self.p[i] * (1.0 - di) - 0.5 * self.q[i] * di;
            }
            opt.step_slice(&mut logits, &grad, Direction::Maximize)?;
        }
        let disc = logits.iter().map(|&a| crate::net::sigmoid(a)).collect();

        let cost: Vec<f64> = self.d.iter().map(|&x| 0.5 * (1.0 - x).ln()).collect();
        let mut b: Vec<f64> = self.q.iter().map(|&x| (x + 1e-12).ln()).collect();
        let mut opt = AdamState::new(cfg, m)?;
        for _ in 0..steps {
            let q = softmax(&b);
            let mean: f64 = q.iter().zip(&cost).map(|(a, c)| a * c).sum();
            for i in 0..m {
                grad[i] = q[i] * (cost[i] - mean);
            }
            opt.step_slice(&mut b, &grad, Direction::Minimize)?;
        }
        Ok((disc, softmax(&b)))
    }
}

fn softmax(b: &[f64]) -> Vec<f64> {
    let max = b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = b.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Trapezoid grid for continuous divergences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    /// Odd, so that every other node forms the coarse grid.
    pub points_per_axis: usize,
    /// Grid extends this many (largest) sigmas beyond the extreme means.
    pub margin_sigmas: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            points_per_axis: 4001,
            margin_sigmas: 6.0,
        }
    }
}

/// Refinement deltas above this flag the grid as too coarse.
pub const REFINEMENT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsdEstimate {
    /// Value on the full grid (spacing `h`).
    pub value: f64,
    /// Value on every other node (spacing `2h`).
    pub coarse_value: f64,
    pub refinement_delta: f64,
    pub too_coarse: bool,
}

fn trapezoid_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i == n - 1 {
        0.5 * h
    } else {
        h
    }
}

/// JSD of two 1D or 2D mixtures by trapezoidal quadrature, with a
/// refinement check against the grid of doubled spacing.
pub fn jsd_continuous(p: &GaussianMixture, q: &GaussianMixture, quad: Quadrature) -> Result<JsdEstimate> {
    let dim = p.dim();
    if q.dim() != dim {
        return Err(Error::Shape("mixtures have different dimensions".into()));
    }
    if dim != 1 && dim != 2 {
        return Err(Error::Domain(format!(
            "quadrature supports 1D and 2D mixtures, got {dim}D"
        )));
    }
    let n = quad.points_per_axis;
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::Config("points_per_axis must be odd and at least 3".into()));
    }
    if !(quad.margin_sigmas >= 6.0) {
        return Err(Error::Config(
            "the grid must extend at least 6 sigma beyond the means".into(),
        ));
    }
    let margin = quad.margin_sigmas * p.sigma().max(q.sigma());
    let axes: Vec<(f64, f64)> = (0..dim)
        .map(|j| {
            let col = p
                .means()
                .column(j)
                .iter()
                .chain(q.means().column(j).iter())
                .cloned()
                .collect::<Vec<_>>();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min) - margin;
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + margin;
            (lo, (hi - lo) / (n - 1) as f64)
        })
        .collect();
    let nc = n.div_ceil(2);
    let integrand = |x: &[f64]| -> f64 {
        let lp = p.log_density_at(x);
        let lq = q.log_density_at(x);
        let big = lp.max(lq);
        if big == f64::NEG_INFINITY {
            return 0.0;
        }
        let lm = big + ((lp - big).exp() + (lq - big).exp()).ln() - LN_2;
        let term = |l: f64| {
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                0.5 * l.exp() * (l - lm)
            }
        };
        term(lp) + term(lq)
    };
    let (mut fine, mut coarse) = (0.0, 0.0);
    if dim == 1 {
        let (lo, h) = axes[0];
        for i in 0..n {
            let f = integrand(&[lo + h * i as f64]);
            fine += trapezoid_weight(i, n, h) * f;
            if i % 2 == 0 {
                coarse += trapezoid_weight(i / 2, nc, 2.0 * h) * f;
            }
        }
    } else {
        let ((lo0, h0), (lo1, h1)) = (axes[0], axes[1]);
        for i in 0..n {
            let x0 = lo0 + h0 * i as f64;
            let (wi, cwi) = (trapezoid_weight(i, n, h0), trapezoid_weight(i / 2, nc, 2.0 * h0));
            for j in 0..n {
                let f = integrand(&[x0, lo1 + h1 * j as f64]);
                fine += wi * trapezoid_weight(j, n, h1) * f;
                if i % 2 == 0 && j % 2 == 0 {
                    coarse += cwi * trapezoid_weight(j / 2, nc, 2.0 * h1) * f;
                }
            }
        }
    }
    let delta = (fine - coarse).abs();
    Ok(JsdEstimate {
        value: fine,
        coarse_value: coarse,
        refinement_delta: delta,
        too_coarse: delta > REFINEMENT_TOLERANCE,
    })
}

/// Budget for "optimize to convergence".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceBudget {
    pub max_steps: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    pub optimizer: AdamConfig,
}

impl Default for ConvergenceBudget {
    fn default() -> Self {
        Self {
            max_steps: 50_000,
            grad_tol: 1e-8,
            optimizer: AdamConfig::adversary_default(),
        }
    }
}

/// GAN on 1D Gaussian data whose generator is the location family
/// `x = theta + data_std * z`, `z ~ N(0, 1)`.
///
/// The generator is a `1 -> 1` identity layer with its weight held at
/// `data_std` and its bias as `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalar1dGanSetup {
    pub data_mean: f64,
    pub data_std: f64,
    pub disc_spec: Vec<LayerSpec>,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    /// Nodes per Gaussian expectation, spread over +-8 standard deviations.
    pub quadrature_points: usize,
    pub epsilon_clip: f64,
}

impl Default for Scalar1dGanSetup {
    fn default() -> Self {
        Self {
            data_mean: 2.0,
            data_std: 1.0,
            disc_spec: mlp_spec(1, &[8], 1, Activation::Tanh, Activation::Sigmoid),
            grid_lo: -10.0,
            grid_hi: 10.0,
            grid_points: 2001,
            quadrature_points: 201,
            epsilon_clip: DEFAULT_EPSILON_CLIP,
        }
    }
}

/// Worst responses and the resulting gap at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueDg {
    pub minimax: f64,
    pub maximin: f64,
    pub dg: f64,
    pub worst_theta: f64,
    pub disc_steps: usize,
}

/// One checkpoint of a 1D trajectory under every gap variant.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub theta: f64,
    pub dg_approx: f64,
    pub dg_true_grid: f64,
    pub grid_maximin: f64,
    pub descent_maximin: f64,
    pub dg_true_conv: Option<f64>,
}

/// Training schedule for the 1D setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalar1dTraining {
    pub theta0: f64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub snapshot_every: usize,
    pub seed: u64,
}

impl Default for Scalar1dTraining {
    fn default() -> Self {
        Self {
            theta0: -4.0,
            lr_g: 1e-2,
            lr_d: 1e-3,
            batch_size: 100,
            steps: 2000,
            snapshot_every: 100,
            seed: 0,
        }
    }
}

/// [`GanGame`] with a location-family generator whose scale never moves.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationGame {
    inner: GanGame,
}

impl LocationGame {
    pub fn inner(&self) -> &GanGame {
        &self.inner
    }
}

impl ZeroSumGame for LocationGame {
    fn latent_dim(&self) -> usize {
        1
    }

    fn data_dim(&self) -> usize {
        1
    }

    fn sample_latent(&self, n: usize, rng: &mut Rng) -> Array2<f64> {
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
        let (value, mut grads) = self.inner.value_and_grads(gen, disc, real, latent, target, mode)?;
        if target == Player::Generator {
            grads.weights_mut(0).fill(0.0);
        }
        Ok((value, grads))
    }
}

struct GaussNodes {
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl Scalar1dGanSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_lo < self.grid_hi) || self.grid_points < 2 {
            return Err(Error::Config("grid needs lo < hi and at least 2 points".into()));
        }
        if !(self.data_std > 0.0) || !self.data_mean.is_finite() {
            return Err(Error::Config("data needs a finite mean and positive std".into()));
        }
        if self.quadrature_points < 3 {
            return Err(Error::Config("quadrature needs at least 3 nodes".into()));
        }
        if self.disc_spec.first().map(|l| l.in_dim) != Some(1) {
            return Err(Error::Config("discriminator must take 1D input".into()));
        }
        Ok(())
    }

    pub fn game(&self) -> Result<LocationGame> {
        self.validate()?;
        let gen = vec![LayerSpec::new(1, 1, Activation::Identity)];
        let inner = GanGame::new(gen, self.disc_spec.clone(), LatentPrior::StdNormal, self.epsilon_clip)?;
        Ok(LocationGame { inner })
    }

    pub fn generator_at(&self, theta: f64) -> NetParams {
        let gen = [LayerSpec::new(1, 1, Activation::Identity)];
        NetParams::from_flat(&gen, vec![self.data_std, theta]).expect("fixed shape")
    }

    pub fn theta_of(gen: &NetParams) -> f64 {
        gen.biases(0)[0]
    }

    pub fn data_mixture(&self) -> GaussianMixture {
        GaussianMixture::uniform(Array2::from_elem((1, 1), self.data_mean), self.data_std).expect("validated")
    }

    pub fn sample_split(&self, sizes: (usize, usize, usize), seed: u64) -> Result<DatasetSplit> {
        crate::data::three_way_split(&self.data_mixture(), sizes, seed)
    }

    fn nodes(&self) -> GaussNodes {
        let n = self.quadrature_points;
        let h = 16.0 / (n - 1) as f64;
        let t: Vec<f64> = (0..n).map(|i| -8.0 + h * i as f64).collect();
        let raw: Vec<f64> = t
            .iter()
            .enumerate()
            .map(|(i, &ti)| trapezoid_weight(i, n, h) * (-0.5 * ti * ti).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        GaussNodes {
            offsets: t.iter().map(|ti| ti * self.data_std).collect(),
            weights: raw.iter().map(|w| w / total).collect(),
        }
    }

    fn column(xs: impl Iterator<Item = f64>) -> Array2<f64> {
        let v: Vec<f64> = xs.collect();
        let n = v.len();
        Array2::from_shape_vec((n, 1), v).expect("column")
    }

    /// `1/2 E_p log D` by quadrature.
    pub fn data_term(&self, disc: &NetParams) -> Result<f64> {
        let nodes = self.nodes();
        let x = Self::column(nodes.offsets.iter().map(|o| self.data_mean + o));
        let d = disc.forward(x.view())?;
        Ok(0.5
            * nodes
                .weights
                .iter()
                .zip(d.iter())
                .map(|(w, &di)| w * log_clamped(di, self.epsilon_clip).0)
                .sum::<f64>())
    }

    fn generator_term(&self, nodes: &GaussNodes, theta: f64, disc: &NetParams) -> Result<f64> {
        let x = Self::column(nodes.offsets.iter().map(|o| theta + o));
        let d = disc.forward(x.view())?;
        Ok(0.5
            * nodes
                .weights
                .iter()
                .zip(d.iter())
                .map(|(w, &di)| w * log1m_clamped(di, self.epsilon_clip).0)
                .sum::<f64>())
    }

    /// Population objective `M(theta, D)` by quadrature.
    pub fn expected_objective(&self, theta: f64, disc: &NetParams) -> Result<f64> {
        Ok(self.data_term(disc)? + self.generator_term(&self.nodes(), theta, disc)?)
    }

    /// Exhaustive search over the grid for the shift minimizing `M(., D)`.
    /// Returns `(theta, value)`; the first grid point wins ties.
    pub fn grid_search_worst_generator(&self, disc: &NetParams) -> Result<(f64, f64)> {
        self.validate()?;
        let nodes = self.nodes();
        let data = self.data_term(disc)?;
        let step = (self.grid_hi - self.grid_lo) / (self.grid_points - 1) as f64;
        let mut best = (self.grid_lo, f64::INFINITY);
        for i in 0..self.grid_points {
            let theta = self.grid_lo + step * i as f64;
            let value = data + self.generator_term(&nodes, theta, disc)?;
            if value < best.1 {
                best = (theta, value);
            }
        }
        Ok(best)
    }

    /// Projected Adam descent on `M(., D)` from `theta0`, kept inside the grid interval.
    pub fn descent_worst_generator(
        &self,
        theta0: f64,
        disc: &NetParams,
        budget: &ConvergenceBudget,
    ) -> Result<(f64, f64)> {
        let nodes = self.nodes();
        let data = self.data_term(disc)?;
        let mut theta = [theta0.clamp(self.grid_lo, self.grid_hi)];
        let mut opt = AdamState::new(budget.optimizer, 1)?;
        for _ in 0..budget.max_steps {
            let x = Self::column(nodes.offsets.iter().map(|o| theta[0] + o));
            let trace = disc.forward_trace(x.view())?;
            let loss_grad = Array2::from_shape_fn((nodes.weights.len(), 1), |(j, _)| {
                0.5 * nodes.weights[j] * log1m_clamped(trace.output()[[j, 0]], self.epsilon_clip).1
            });
            let (_, input_grad) = disc.backward_trace(&trace, loss_grad.view(), false)?;
            let g = input_grad.sum();
            if !g.is_finite() {
                return Err(Error::Domain("non-finite gradient in generator descent".into()));
            }
            if g.abs() < budget.grad_tol {
                break;
            }
            opt.step_slice(&mut theta, &[g], Direction::Minimize)?;
            theta[0] = theta[0].clamp(self.grid_lo, self.grid_hi);
        }
        Ok((theta[0], data + self.generator_term(&nodes, theta[0], disc)?))
    }

    /// Adam ascent on the quadrature objective `M(theta, .)` from `disc_init`.
    pub fn converge_worst_discriminator(
        &self,
        theta: f64,
        disc_init: &NetParams,
        budget: &ConvergenceBudget,
    ) -> Result<(NetParams, f64, usize)> {
        let nodes = self.nodes();
        let n = nodes.weights.len();
        let x = Self::column(
            nodes
                .offsets
                .iter()
                .map(|o| self.data_mean + o)
                .chain(nodes.offsets.iter().map(|o| theta + o)),
        );
        let eps = self.epsilon_clip;
        let mut disc = disc_init.clone();
        let mut opt = AdamState::for_params(budget.optimizer, &disc)?;
        let mut steps = 0;
        let objective = |out: &Array2<f64>| -> (f64, Array2<f64>) {
            let mut value = 0.0;
            let grad = Array2::from_shape_fn((2 * n, 1), |(j, _)| {
                let d = out[[j, 0]];
                if j < n {
                    let (v, dv) = log_clamped(d, eps);
                    value += 0.5 * nodes.weights[j] * v;
                    0.5 * nodes.weights[j] * dv
                } else {
                    let (v, dv) = log1m_clamped(d, eps);
                    value += 0.5 * nodes.weights[j - n] * v;
                    0.5 * nodes.weights[j - n] * dv
                }
            });
            (value, grad)
        };
        for _ in 0..budget.max_steps {
            let trace = disc.forward_trace(x.view())?;
            let (_, loss_grad) = objective(trace.output());
            let (grads, _) = disc.backward_trace(&trace, loss_grad.view(), true)?;
            let grads = grads.expect("requested");
            if grads.l2_norm() < budget.grad_tol {
                break;
            }
            opt.step(&mut disc, &grads, Direction::Maximize)?;
            steps += 1;
        }
        let value = objective(&disc.forward(x.view())?).0;
        Ok((disc, value, steps))
    }

    /// Gap with the discriminator optimized to convergence and the generator by grid search.
    pub fn dg_true_grid(&self, snapshot: &Snapshot, budget: &ConvergenceBudget) -> Result<TrueDg> {
        let theta = Self::theta_of(&snapshot.gen);
        let (_, minimax, disc_steps) = self.converge_worst_discriminator(theta, &snapshot.disc, budget)?;
        let (worst_theta, maximin) = self.grid_search_worst_generator(&snapshot.disc)?;
        Ok(TrueDg {
            minimax,
            maximin,
            dg: minimax - maximin,
            worst_theta,
            disc_steps,
        })
    }

    /// Gap with both adversaries optimized to convergence from the checkpoint.
    pub fn dg_true_conv(&self, snapshot: &Snapshot, budget: &ConvergenceBudget) -> Result<TrueDg> {
        let theta = Self::theta_of(&snapshot.gen);
        let (_, minimax, disc_steps) = self.converge_worst_discriminator(theta, &snapshot.disc, budget)?;
        let (worst_theta, maximin) = self.descent_worst_generator(theta, &snapshot.disc, budget)?;
        Ok(TrueDg {
            minimax,
            maximin,
            dg: minimax - maximin,
            worst_theta,
            disc_steps,
        })
    }

    /// Trains the 1D GAN and returns its snapshots.
    pub fn train(&self, schedule: &Scalar1dTraining, split: &DatasetSplit) -> Result<Vec<Snapshot>> {
        let game = self.game()?;
        let gen = self.generator_at(schedule.theta0);
        let disc = NetParams::init(
            &self.disc_spec,
            InitScheme::XavierUniform,
            &mut stream(schedule.seed, streams::DISC_INIT),
        )?;
        let settings = LoopSettings {
            lr_g: schedule.lr_g,
            lr_d: schedule.lr_d,
            batch_size: schedule.batch_size,
            total_steps: schedule.steps,
            d_steps_per_g_step: 1,
            snapshot_every: schedule.snapshot_every,
            log_every: schedule.snapshot_every,
            seed: schedule.seed,
            gen_loss_mode: GenLoss::NonSaturating,
        };
        Ok(train_players(&game, gen, disc, split.train(), &settings)?.snapshots)
    }

    /// Evaluates every snapshot with the sample-based estimator and the
    /// quadrature references. `conv` additionally computes the both-sides
    /// converged gap.
    pub fn compare_on_trajectory(
        &self,
        snapshots: &[Snapshot],
        split: &DatasetSplit,
        dg_cfg: &DgConfig,
        budget: &ConvergenceBudget,
        conv: bool,
    ) -> Result<Vec<TrajectoryPoint>> {
        let game = self.game()?;
        snapshots
            .iter()
            .map(|snap| {
                let theta = Self::theta_of(&snap.gen);
                let approx = estimate_dg(&game, snap, split, dg_cfg)?;
                let grid = self.dg_true_grid(snap, budget)?;
                let (_, descent_maximin) = self.descent_worst_generator(theta, &snap.disc, budget)?;
                let dg_true_conv = if conv {
                    Some(self.dg_true_conv(snap, budget)?.dg)
                } else {
                    None
                };
                Ok(TrajectoryPoint {
                    step: snap.step,
                    theta,
                    dg_approx: approx.dg,
                    dg_true_grid: grid.dg,
                    grid_maximin: grid.maximin,
                    descent_maximin,
                    dg_true_conv,
                })
            })
            .collect()
    }
}

/// `1 -> 2 -> 1` tanh/sigmoid discriminator with a plateau of width about 2
/// around `center`: close to 1 there and close to 0 elsewhere when `peak`,
/// the reverse otherwise.
pub fn bump_discriminator(center: f64, peak: bool) -> NetParams {
    let spec = mlp_spec(1, &[2], 1, Activation::Tanh, Activation::Sigmoid);
    let sign = if peak { 1.0 } else { -1.0 };
    NetParams::from_flat(
        &spec,
        vec![
            1.0,
            -1.0,
            1.0 - center,
            center + 1.0,
            5.0 * sign,
            5.0 * sign,
            -4.0 * sign,
        ],
    )
    .expect("fixed shape")
}

/// Monte-Carlo estimate of `JSD(p, q)` with its standard error, from `n` draws of each.
pub fn jsd_monte_carlo(p: &GaussianMixture, q: &GaussianMixture, n: usize, rng: &mut Rng) -> (f64, f64) {
    let half = |from: &GaussianMixture, other: &GaussianMixture, rng: &mut Rng| -> Vec<f64> {
        let xs = from.sample(n, rng);
        xs.rows()
            .into_iter()
            .map(|x| {
                let x = x.to_vec();
                let a = from.log_density_at(&x);
                let b = other.log_density_at(&x);
                let big = a.max(b);
                let lm = big + ((a - big).exp() + (b - big).exp()).ln() - LN_2;
                a - lm
            })
            .collect()
    };
    let from_p = half(p, q, rng);
    let from_q = half(q, p, rng);
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var / v.len() as f64)
    };
    let (mp, vp) = stats(&from_p);
    let (mq, vq) = stats(&from_q);
    (0.5 * mp + 0.5 * mq, 0.5 * (vp + vq).sqrt())
}
