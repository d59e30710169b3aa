//! Sample-quality measures for mixtures and correlation statistics.

use ndarray::ArrayView2;

use crate::data::GaussianMixture;
use crate::error::{Error, Result};

/// A mode counts as covered when at least this fraction of samples lands within 3 sigma of it.
pub const DEFAULT_COVERAGE_FRACTION: f64 = 0.01;
/// Number of generated samples used for quality evaluation.
pub const DEFAULT_EVAL_SAMPLES: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualityReport {
    pub modes_covered: usize,
    pub within_3std: usize,
    pub total_samples: usize,
}

/// Assigns each sample to its nearest mean and counts 3-sigma hits per mode.
pub fn assess(samples: ArrayView2<f64>, mix: &GaussianMixture, coverage_fraction: f64) -> Result<QualityReport> {
    if samples.nrows() == 0 {
        return Err(Error::EmptyBatch("quality samples"));
    }
    if samples.ncols() != mix.dim() {
        return Err(Error::Shape(format!(
            "samples are {}-d, mixture is {}-d",
            samples.ncols(),
            mix.dim()
        )));
    }
    if !(coverage_fraction > 0.0 && coverage_fraction < 1.0) {
        return Err(Error::Config(format!(
            "coverage fraction must lie in (0, 1), got {coverage_fraction}"
        )));
    }
    let radius_sq = (3.0 * mix.sigma()).powi(2);
    let mut hits = vec![0usize; mix.num_components()];
    for x in samples.rows() {
        let (best, dist_sq) = mix
            .means()
            .rows()
            .into_iter()
            .map(|mu| mu.iter().zip(x.iter()).map(|(m, v)| (v - m) * (v - m)).sum::<f64>())
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, d)| if d < acc.1 { (k, d) } else { acc });
        if dist_sq <= radius_sq {
            hits[best] += 1;
        }
    }
    let total = samples.nrows();
    let threshold = coverage_fraction * total as f64;
    Ok(QualityReport {
        modes_covered: hits.iter().filter(|&&h| h > 0 && h as f64 >= threshold).count(),
        within_3std: hits.iter().sum(),
        total_samples: total,
    })
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("pearson: lengths {} and {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_ring;
    use crate::rng::stream;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn ring_samples_cover_everything() {
        let ring = make_ring();
        let samples = ring.sample(2500, &mut stream(11, 0));
        let r = assess(samples.view(), &ring, DEFAULT_COVERAGE_FRACTION).unwrap();
        assert_eq!(r.modes_covered, 8);
        assert!(r.within_3std >= 2400, "{}", r.within_3std);
        assert_eq!(r.total_samples, 2500);
    }

    #[test]
    fn degenerate_and_disjoint_samples() {
        let ring = make_ring();
        let at_mean = Array2::from_shape_fn((100, 2), |(_, j)| ring.means()[[3, j]]);
        let r = assess(at_mean.view(), &ring, 0.01).unwrap();
        assert_eq!((r.modes_covered, r.within_3std), (1, 100));
        let mut rng = stream(0, 0);
        let far = Array2::from_shape_simple_fn((100, 2), || 10.0 + rng.random::<f64>());
        let r = assess(far.view(), &ring, 0.01).unwrap();
        assert_eq!((r.modes_covered, r.within_3std), (0, 0));
    }

    #[test]
    fn assess_rejects_bad_input() {
        let ring = make_ring();
        assert!(assess(Array2::<f64>::zeros((0, 2)).view(), &ring, 0.01).is_err());
        assert!(assess(Array2::<f64>::zeros((3, 3)).view(), &ring, 0.01).is_err());
        assert!(assess(Array2::<f64>::zeros((3, 2)).view(), &ring, 1.0).is_err());
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&xs, &xs.map(|x| 2.0 * x)).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &xs.map(|x| -x)).unwrap() + 1.0).abs() < 1e-15);
        // Centered xs = (-1.5, -0.5, 0.5, 1.5), ys = (-1.75, 0.25, -0.75, 2.25):
        // sxy = 5.5, sxx = 5, syy = 8.75.
        let expected = 5.5 / (5.0f64 * 8.75).sqrt();
        assert!((pearson(&xs, &[1.0, 3.0, 2.0, 5.0]).unwrap() - expected).abs() < 1e-15);
        assert!(matches!(pearson(&xs, &[1.0; 4]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0], &[2.0]).is_err());
        assert!(pearson(&xs, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn pearson_affine_invariant(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            a in 0.1f64..10.0, b in -50.0f64..50.0, c in 0.1f64..10.0, d in -50.0f64..50.0,
        ) {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson(&xs, &ys) {
                let xt: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
                let yt: Vec<f64> = ys.iter().map(|y| c * y + d).collect();
                let rt = pearson(&xt, &yt).unwrap();
                prop_assert!((r - rt).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }

        #[test]
        fn assess_permutation_invariant(seed in 0u64..1000, shift in 0usize..50) {
            let ring = make_ring();
            let mut rng = stream(seed, 0);
            let samples = Array2::from_shape_simple_fn((50, 2), || rng.random_range(-1.2..1.2));
            let mut rotated = samples.clone();
            for i in 0..50 {
                rotated.row_mut(i).assign(&samples.row((i + shift) % 50));
            }
            let a = assess(samples.view(), &ring, 0.01).unwrap();
            let b = assess(rotated.view(), &ring, 0.01).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a.modes_covered <= 8 && a.within_3std <= a.total_samples);
        }
    }
}
