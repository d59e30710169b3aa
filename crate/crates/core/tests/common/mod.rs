#![allow(dead_code)]

use dualgap::data::{GaussianMixture, RING_SIGMA};
use dualgap::net::{LayerSpec, NetParams};

/// Standard normal octiles: splitting `z_1` at these gives eight equal-mass intervals.
pub const NORMAL_OCTILES: [f64; 7] = [
    -1.1503493803760079,
    -0.6744897501960817,
    -0.3186393639643752,
    0.0,
    0.3186393639643752,
    0.6744897501960817,
    1.1503493803760079,
];

const RAMP_SLOPE: f64 = 1e4;

/// Hand-built weights for the toy generator architecture (latent -> 128 -> 128 -> 2, ReLU).
///
/// Interval `j` of `z_1` (cut at `thresholds`) is mapped to `centers[j]`, and
/// `z_3`, `z_4` add isotropic noise of scale `sigma`. Each cut is a pair of
/// steep ReLU ramps whose difference is a unit step.
pub fn staircase_generator(spec: &[LayerSpec], centers: &[[f64; 2]], thresholds: &[f64], sigma: f64) -> NetParams {
    assert_eq!(centers.len(), thresholds.len() + 1);
    let mut g = NetParams::zeros(spec).unwrap();
    let steps = thresholds.len();
    let noise = 2 * steps;
    {
        let mut w = g.weights_mut(0);
        for j in 0..steps {
            w[[2 * j, 0]] = RAMP_SLOPE;
            w[[2 * j + 1, 0]] = RAMP_SLOPE;
        }
        w[[noise, 2]] = sigma;
        w[[noise + 1, 2]] = -sigma;
        w[[noise + 2, 3]] = sigma;
        w[[noise + 3, 3]] = -sigma;
    }
    {
        let mut b = g.biases_mut(0);
        for (j, &t) in thresholds.iter().enumerate() {
            b[2 * j] = -RAMP_SLOPE * t;
            b[2 * j + 1] = -RAMP_SLOPE * t - 1.0;
        }
    }
    {
        let mut w = g.weights_mut(1);
        for i in 0..noise + 4 {
            w[[i, i]] = 1.0;
        }
    }
    {
        let mut w = g.weights_mut(2);
        for j in 0..steps {
            for d in 0..2 {
                let delta = centers[j + 1][d] - centers[j][d];
                w[[d, 2 * j]] = delta;
                w[[d, 2 * j + 1]] = -delta;
            }
        }
        w[[0, noise]] = 1.0;
        w[[0, noise + 1]] = -1.0;
        w[[1, noise + 2]] = 1.0;
        w[[1, noise + 3]] = -1.0;
        let mut b = g.biases_mut(2);
        b[0] = centers[0][0];
        b[1] = centers[0][1];
    }
    g
}

fn centers(ring: &GaussianMixture) -> Vec<[f64; 2]> {
    ring.means().rows().into_iter().map(|r| [r[0], r[1]]).collect()
}

/// Generator whose output law is (up to ramp width) the eight-mode ring itself.
pub fn ring_generator(spec: &[LayerSpec], ring: &GaussianMixture) -> NetParams {
    staircase_generator(spec, &centers(ring), &NORMAL_OCTILES, RING_SIGMA)
}

/// Generator that puts all its mass on ring mode `mode`.
pub fn collapsed_generator(spec: &[LayerSpec], ring: &GaussianMixture, mode: usize) -> NetParams {
    staircase_generator(spec, &[centers(ring)[mode]], &[], RING_SIGMA)
}
