//! First-order optimizers for network parameters.
//!
//! Optimizer state is owned by whoever drives the optimization and is never
//! stored inside [`NetParams`], so any checkpoint can be re-optimized from a
//! fresh state.

use crate::error::{Error, Result};
use crate::net::{Gradients, NetParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    /// Settings used to train both GAN players (beta1 = 0.5).
    pub fn gan_training(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Library-default Adam used when searching for worst-case adversaries.
    pub fn adversary_default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "adam learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Adam moments for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        })
    }

    pub fn for_params(config: AdamConfig, params: &NetParams) -> Result<Self> {
        Self::new(config, params.len())
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    /// One bias-corrected Adam update. Refuses (leaving everything untouched)
    /// if any gradient entry is non-finite.
    pub fn step(&mut self, params: &mut NetParams, grads: &Gradients, direction: Direction) -> Result<()> {
        grads.check_matches(params)?;
        if let Some(index) = grads.first_non_finite() {
            let (layer, location) = grads.locate(index);
            return Err(Error::NonFiniteParameter { index, layer, location });
        }
        self.step_slice(params.as_mut_slice(), grads.as_slice(), direction)
    }

    /// Same update on raw slices.
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64], direction: Direction) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state holds {} moments, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteParameter {
                index,
                layer: 0,
                location: format!("flat[{index}]"),
            });
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let sign = direction.sign();
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let g = sign * g;
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Plain gradient descent/ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdState {
    lr: f64,
}

impl SgdState {
    pub fn new(lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("sgd learning rate must be positive, got {lr}")));
        }
        Ok(Self { lr })
    }

    pub fn step(&self, params: &mut NetParams, grads: &Gradients, direction: Direction) -> Result<()> {
        grads.check_matches(params)?;
        if let Some(index) = grads.first_non_finite() {
            let (layer, location) = grads.locate(index);
            return Err(Error::NonFiniteParameter { index, layer, location });
        }
        self.step_slice(params.as_mut_slice(), grads.as_slice(), direction)
    }

    pub fn step_slice(&self, params: &mut [f64], grads: &[f64], direction: Direction) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape("sgd: parameter and gradient lengths differ".into()));
        }
        let scaled = direction.sign() * self.lr;
        params.iter_mut().zip(grads).for_each(|(p, g)| *p -= scaled * g);
        Ok(())
    }
}
