//! Synthetic Gaussian-mixture data and the three-way dataset split.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream, streams, Rng};

/// Standard deviation of the ring mixture components.
pub const RING_SIGMA: f64 = 0.01;
/// Standard deviation of the spiral and grid mixture components.
pub const SPIRAL_GRID_SIGMA: f64 = 0.05;
/// Spiral layout: radius `SPIRAL_R0 + SPIRAL_R_SPAN * t/19`, angle `SPIRAL_TURN * t/19`.
pub const SPIRAL_R0: f64 = 0.25;
pub const SPIRAL_R_SPAN: f64 = 1.75;
pub const SPIRAL_TURN: f64 = 3.0 * PI;
/// Grid layout: 5 x 5 lattice over `[-GRID_EXTENT, GRID_EXTENT]^2`.
pub const GRID_EXTENT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixtureKind {
    Ring,
    Spiral,
    Grid,
}

impl MixtureKind {
    pub fn build(self) -> GaussianMixture {
        match self {
            MixtureKind::Ring => make_ring(),
            MixtureKind::Spiral => make_spiral(),
            MixtureKind::Grid => make_grid(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MixtureKind::Ring => "ring",
            MixtureKind::Spiral => "spiral",
            MixtureKind::Grid => "grid",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "ring" => Some(MixtureKind::Ring),
            "spiral" => Some(MixtureKind::Spiral),
            "grid" => Some(MixtureKind::Grid),
            _ => None,
        }
    }
}

/// Isotropic Gaussian mixture with a shared standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    means: Array2<f64>,
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(means: Array2<f64>, sigma: f64, weights: Vec<f64>) -> Result<Self> {
        if means.nrows() == 0 || means.ncols() == 0 {
            return Err(Error::Config(
                "mixture needs at least one mean of positive dimension".into(),
            ));
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("mixture means must be finite".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("mixture sigma must be positive, got {sigma}")));
        }
        if weights.len() != means.nrows() || weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Config(
                "mixture weights must be one non-negative value per mean".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("mixture weights sum to {total}")));
        }
        Ok(Self { means, sigma, weights })
    }

    pub fn uniform(means: Array2<f64>, sigma: f64) -> Result<Self> {
        let k = means.nrows();
        Self::new(means, sigma, vec![1.0 / k as f64; k])
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn num_components(&self) -> usize {
        self.means.nrows()
    }

    /// Component-weighted mean of the mixture.
    pub fn mean(&self) -> Vec<f64> {
        let w = ArrayView1::from(&self.weights);
        w.dot(&self.means).to_vec()
    }

    /// Draws `n` samples: a component from the weights, then `mean + sigma * N(0, I)`.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Array2<f64> {
        let index = WeightedIndex::new(&self.weights).expect("weights validated");
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        for mut row in out.rows_mut() {
            let k = index.sample(rng);
            for (j, x) in row.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *x = self.means[[k, j]] + self.sigma * z;
            }
        }
        out
    }

    /// Log-density at `x`, via log-sum-exp over components.
    pub fn log_density(&self, x: ArrayView1<f64>) -> f64 {
        match x.as_slice() {
            Some(xs) => self.log_density_at(xs),
            None => self.log_density_at(&x.to_vec()),
        }
    }

    /// Same as [`GaussianMixture::log_density`] on a plain slice.
    pub fn log_density_at(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        let s2 = self.sigma * self.sigma;
        let log_norm = -0.5 * d * (2.0 * PI * s2).ln();
        let term = |k: usize| -> f64 {
            let w = self.weights[k];
            if w <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let mu = self.means.row(k);
            let sq: f64 = mu.iter().zip(x).map(|(m, v)| (v - m) * (v - m)).sum();
            w.ln() + log_norm - 0.5 * sq / s2
        };
        let k = self.num_components();
        let max = (0..k).map(term).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + (0..k).map(|i| (term(i) - max).exp()).sum::<f64>().ln()
    }

    pub fn density(&self, x: ArrayView1<f64>) -> f64 {
        self.log_density(x).exp()
    }
}

/// 8 components equally spaced on the unit circle.
pub fn make_ring() -> GaussianMixture {
    let means = Array2::from_shape_fn((8, 2), |(k, j)| {
        let theta = 2.0 * PI * k as f64 / 8.0;
        if j == 0 {
            theta.cos()
        } else {
            theta.sin()
        }
    });
    GaussianMixture::uniform(means, RING_SIGMA).expect("valid ring")
}

/// 20 components along a 1.5-turn Archimedean spiral.
pub fn make_spiral() -> GaussianMixture {
    let means = Array2::from_shape_fn((20, 2), |(t, j)| {
        let frac = t as f64 / 19.0;
        let r = SPIRAL_R0 + SPIRAL_R_SPAN * frac;
        let theta = SPIRAL_TURN * frac;
        if j == 0 {
            r * theta.cos()
        } else {
            r * theta.sin()
        }
    });
    GaussianMixture::uniform(means, SPIRAL_GRID_SIGMA).expect("valid spiral")
}

/// 25 components on a 5 x 5 lattice.
pub fn make_grid() -> GaussianMixture {
    let step = 2.0 * GRID_EXTENT / 4.0;
    let means = Array2::from_shape_fn((25, 2), |(k, j)| {
        let idx = if j == 0 { k / 5 } else { k % 5 };
        -GRID_EXTENT + step * idx as f64
    });
    GaussianMixture::uniform(means, SPIRAL_GRID_SIGMA).expect("valid grid")
}

/// Train / adversary-finding / test samples, drawn independently.
///
/// Accessors count reads so callers can check which parts a stage touched.
#[derive(Debug)]
pub struct DatasetSplit {
    train: Array2<f64>,
    adversary: Array2<f64>,
    test: Array2<f64>,
    reads: [AtomicUsize; 3],
}

impl Clone for DatasetSplit {
    fn clone(&self) -> Self {
        Self::from_parts(self.train.clone(), self.adversary.clone(), self.test.clone())
    }
}

impl DatasetSplit {
    pub fn from_parts(train: Array2<f64>, adversary: Array2<f64>, test: Array2<f64>) -> Self {
        Self {
            train,
            adversary,
            test,
            reads: Default::default(),
        }
    }

    pub fn train(&self) -> ArrayView2<'_, f64> {
        self.reads[0].fetch_add(1, Ordering::Relaxed);
        self.train.view()
    }

    pub fn adversary(&self) -> ArrayView2<'_, f64> {
        self.reads[1].fetch_add(1, Ordering::Relaxed);
        self.adversary.view()
    }

    pub fn test(&self) -> ArrayView2<'_, f64> {
        self.reads[2].fetch_add(1, Ordering::Relaxed);
        self.test.view()
    }

    /// Number of reads of (train, adversary, test) so far.
    pub fn read_counts(&self) -> (usize, usize, usize) {
        (
            self.reads[0].load(Ordering::Relaxed),
            self.reads[1].load(Ordering::Relaxed),
            self.reads[2].load(Ordering::Relaxed),
        )
    }

    /// Sizes of (train, adversary, test).
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.nrows(), self.adversary.nrows(), self.test.nrows())
    }
}

/// Draws the three parts from distinct substreams of `seed`.
pub fn three_way_split(mix: &GaussianMixture, sizes: (usize, usize, usize), seed: u64) -> Result<DatasetSplit> {
    let (n_train, n_adv, n_test) = sizes;
    if n_train == 0 || n_adv == 0 || n_test == 0 {
        return Err(Error::Config("every split part needs at least one sample".into()));
    }
    Ok(DatasetSplit::from_parts(
        mix.sample(n_train, &mut stream(seed, streams::SPLIT_TRAIN)),
        mix.sample(n_adv, &mut stream(seed, streams::SPLIT_ADVERSARY)),
        mix.sample(n_test, &mut stream(seed, streams::SPLIT_TEST)),
    ))
}

/// Writes samples as headerless CSV, one row per sample.
pub fn write_samples_csv<W: Write>(samples: ArrayView2<f64>, mut out: W) -> Result<()> {
    for row in samples.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn min_pairwise(means: &Array2<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..means.nrows() {
            for j in (i + 1)..means.nrows() {
                let d = (&means.row(i) - &means.row(j)).mapv(|v| v * v).sum().sqrt();
                best = best.min(d);
            }
        }
        best
    }

    #[test]
    fn ring_geometry() {
        let ring = make_ring();
        assert_eq!(ring.num_components(), 8);
        assert_eq!(ring.sigma(), 0.01);
        assert!((min_pairwise(ring.means()) - 2.0 * (PI / 8.0).sin()).abs() < 1e-12);
        assert!((min_pairwise(ring.means()) - 0.7654).abs() < 1e-4);
    }

    #[test]
    fn grid_geometry() {
        let grid = make_grid();
        assert_eq!(grid.num_components(), 25);
        assert!((min_pairwise(grid.means()) - 1.0).abs() < 1e-12);
        assert_eq!(grid.sigma(), 0.05);
    }

    #[test]
    fn spiral_radii_increase() {
        let spiral = make_spiral();
        assert_eq!(spiral.num_components(), 20);
        let radii: Vec<f64> = spiral.means().rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        assert!(radii.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn invalid_mixtures() {
        let means = array![[0.0, 0.0], [1.0, 1.0]];
        assert!(GaussianMixture::new(means.clone(), 0.0, vec![0.5, 0.5]).is_err());
        assert!(GaussianMixture::new(means.clone(), 1.0, vec![0.6, 0.5]).is_err());
        assert!(GaussianMixture::new(array![[f64::NAN, 0.0]], 1.0, vec![1.0]).is_err());
    }

    #[test]
    fn degenerate_sigma_samples_sit_on_means() {
        let ring = make_ring();
        let tight = GaussianMixture::uniform(ring.means().clone(), 1e-12).unwrap();
        let samples = tight.sample(500, &mut stream(0, 0));
        for s in samples.rows() {
            let nearest = tight
                .means()
                .rows()
                .into_iter()
                .map(|m| (&m - &s).mapv(|v| v * v).sum().sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-9);
        }
    }

    #[test]
    fn ring_component_frequencies() {
        let ring = make_ring();
        let n = 100_000;
        let samples = ring.sample(n, &mut stream(5, 0));
        let mut counts = [0usize; 8];
        for s in samples.rows() {
            let angle = s[1].atan2(s[0]).rem_euclid(2.0 * PI);
            counts[((angle / (PI / 4.0)).round() as usize) % 8] += 1;
        }
        let p = 1.0 / 8.0;
        let bound = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() < bound, "count {c}");
        }
        let mean = samples.mean_axis(ndarray::Axis(0)).unwrap();
        let target = ring.mean();
        assert!((mean[0] - target[0]).abs() < 0.02 && (mean[1] - target[1]).abs() < 0.02);
    }

    #[test]
    fn density_peak_of_single_component() {
        let sigma: f64 = 0.3;
        let mix = GaussianMixture::uniform(array![[1.0, -2.0]], sigma).unwrap();
        let expected = (2.0 * PI * sigma * sigma).powf(-1.0);
        assert!((mix.density(array![1.0, -2.0].view()) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn ring_density_integrates_to_one_and_is_symmetric() {
        let ring = GaussianMixture::uniform(make_ring().means().clone(), 0.05).unwrap();
        let h = 0.01;
        let mut total = 0.0;
        let steps = (3.0 / h) as i64;
        for i in -steps..=steps {
            for j in -steps..=steps {
                let p = ring.density(array![i as f64 * h, j as f64 * h].view());
                assert!(p >= 0.0);
                total += p * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "total = {total}");
        for x in [
            array![0.3, 0.9],
            array![-1.1, 0.2],
            array![FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        ] {
            let neg = x.mapv(|v| -v);
            let a = ring.density(x.view());
            let b = ring.density(neg.view());
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ring = make_ring();
        let a = three_way_split(&ring, (100, 100, 100), 3).unwrap();
        let b = three_way_split(&ring, (100, 100, 100), 3).unwrap();
        assert_eq!(a.sizes(), (100, 100, 100));
        assert_eq!(a.train(), b.train());
        assert_eq!(a.test(), b.test());
        assert_ne!(a.train(), a.adversary());
        assert_ne!(a.adversary(), a.test());
        assert_eq!(a.read_counts(), (2, 2, 2));
        assert!(three_way_split(&ring, (0, 1, 1), 0).is_err());
    }

    #[test]
    fn split_substreams_are_uncorrelated() {
        let mix = GaussianMixture::uniform(array![[0.0, 0.0]], 1.0).unwrap();
        let split = three_way_split(&mix, (10_000, 1, 10_000), 42).unwrap();
        let train = split.train();
        let test = split.test();
        for j in 0..2 {
            let r = crate::quality::pearson(&train.column(j).to_vec(), &test.column(j).to_vec()).unwrap();
            assert!(r.abs() < 0.05, "corr = {r}");
        }
    }

    #[test]
    fn log_likelihood_matches_monte_carlo_expectation() {
        let ring = make_ring();
        let a = ring.sample(10_000, &mut stream(1, 0));
        let b = ring.sample(10_000, &mut stream(2, 0));
        let ll = |s: &Array2<f64>| -> Vec<f64> { s.rows().into_iter().map(|r| ring.log_density(r)).collect() };
        let la = ll(&a);
        let lb = ll(&b);
        assert!(la.iter().all(|v| v.is_finite()));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
        };
        let se = ((var(&la) + var(&lb)) / 10_000.0).sqrt();
        assert!((mean(&la) - mean(&lb)).abs() < 3.0 * se);
    }
}
