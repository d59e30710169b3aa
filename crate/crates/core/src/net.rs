//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat `f64` buffer. Layer `l` occupies a contiguous
//! block holding its weight matrix (row-major, `out_dim x in_dim`) followed by
//! its bias vector. [`Gradients`] uses the identical layout, so optimizers and
//! serialization work on plain slices.

use ndarray::{linalg::general_mat_mul, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Default slope for [`Activation::LeakyRelu`].
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
}

impl Activation {
    fn validate(self) -> Result<()> {
        match self {
            Activation::LeakyRelu(slope) if !(slope > 0.0 && slope < 1.0) => Err(Error::Config(format!(
                "leaky relu slope must lie in (0, 1), got {slope}"
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    z
                } else {
                    a * z
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    /// ReLU-family derivatives at exactly zero are taken as the left slope.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }

    /// Short name used in checkpoint headers.
    pub fn token(self) -> String {
        match self {
            Activation::Identity => "identity".into(),
            Activation::Relu => "relu".into(),
            Activation::LeakyRelu(a) => format!("leaky_relu({a})"),
            Activation::Sigmoid => "sigmoid".into(),
            Activation::Tanh => "tanh".into(),
        }
    }

    pub fn parse_token(token: &str) -> Option<Self> {
        match token {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            t => {
                let inner = t.strip_prefix("leaky_relu(")?.strip_suffix(')')?;
                inner.parse().ok().map(Activation::LeakyRelu)
            }
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.out_dim * self.in_dim + self.out_dim
    }
}

/// Checks that a layer list is non-empty, has positive sizes and chains.
pub fn validate_spec(spec: &[LayerSpec]) -> Result<()> {
    if spec.is_empty() {
        return Err(Error::Config("network spec has no layers".into()));
    }
    for (i, layer) in spec.iter().enumerate() {
        if layer.in_dim == 0 || layer.out_dim == 0 {
            return Err(Error::Config(format!("layer {i} has a zero dimension")));
        }
        layer.activation.validate()?;
        if i > 0 && spec[i - 1].out_dim != layer.in_dim {
            return Err(Error::Config(format!(
                "layer {} outputs {} values but layer {i} expects {}",
                i - 1,
                spec[i - 1].out_dim,
                layer.in_dim
            )));
        }
    }
    Ok(())
}

/// Builds `[in -> h -> ... -> out]` with `hidden_act` on hidden layers.
pub fn mlp_spec(
    input: usize,
    hidden: &[usize],
    output: usize,
    hidden_act: Activation,
    out_act: Activation,
) -> Vec<LayerSpec> {
    let mut dims = vec![input];
    dims.extend_from_slice(hidden);
    dims.push(output);
    let last = dims.len() - 2;
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec::new(w[0], w[1], if i == last { out_act } else { hidden_act }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Glorot uniform weights, zero biases.
    XavierUniform,
    /// Gaussian weights with the given standard deviation, zero biases.
    Normal(f64),
    /// Every parameter zero.
    Zeros,
}

fn layer_offsets(spec: &[LayerSpec]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(spec.len() + 1);
    let mut acc = 0;
    for layer in spec {
        offsets.push(acc);
        acc += layer.param_count();
    }
    offsets.push(acc);
    offsets
}

/// Parameters of one dense network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    spec: Vec<LayerSpec>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

/// Derivatives of a scalar with respect to every entry of a [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    spec: Vec<LayerSpec>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

macro_rules! layer_views {
    ($ty:ty) => {
        impl $ty {
            pub fn spec(&self) -> &[LayerSpec] {
                &self.spec
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.values
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.values
            }

            pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
                let s = self.spec[layer];
                let start = self.offsets[layer];
                ArrayView2::from_shape(
                    (s.out_dim, s.in_dim),
                    &self.values[start..start + s.out_dim * s.in_dim],
                )
                .expect("layout matches spec")
            }

            pub fn biases(&self, layer: usize) -> ArrayView1<'_, f64> {
                let s = self.spec[layer];
                let start = self.offsets[layer] + s.out_dim * s.in_dim;
                ArrayView1::from(&self.values[start..start + s.out_dim])
            }

            pub fn weights_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, f64> {
                let s = self.spec[layer];
                let start = self.offsets[layer];
                ArrayViewMut2::from_shape(
                    (s.out_dim, s.in_dim),
                    &mut self.values[start..start + s.out_dim * s.in_dim],
                )
                .expect("layout matches spec")
            }

            pub fn biases_mut(&mut self, layer: usize) -> ArrayViewMut1<'_, f64> {
                let s = self.spec[layer];
                let start = self.offsets[layer] + s.out_dim * s.in_dim;
                ArrayViewMut1::from(&mut self.values[start..start + s.out_dim])
            }

            /// Maps a flat index to `(layer, "w[r,c]" | "b[r]")`.
            pub fn locate(&self, index: usize) -> (usize, String) {
                let layer = self
                    .offsets
                    .partition_point(|&o| o <= index)
                    .saturating_sub(1)
                    .min(self.spec.len() - 1);
                let s = self.spec[layer];
                let local = index - self.offsets[layer];
                if local < s.out_dim * s.in_dim {
                    (layer, format!("w[{},{}]", local / s.in_dim, local % s.in_dim))
                } else {
                    (layer, format!("b[{}]", local - s.out_dim * s.in_dim))
                }
            }
        }
    };
}

layer_views!(NetParams);
layer_views!(Gradients);

impl NetParams {
    /// Random initialization; deterministic for a given generator state.
    pub fn init(spec: &[LayerSpec], scheme: InitScheme, rng: &mut Rng) -> Result<Self> {
        validate_spec(spec)?;
        let mut params = Self::zeros(spec)?;
        match scheme {
            InitScheme::Zeros => {}
            InitScheme::XavierUniform => {
                for (l, s) in spec.iter().enumerate() {
                    let limit = (6.0 / (s.in_dim + s.out_dim) as f64).sqrt();
                    let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
                    params.weights_mut(l).iter_mut().for_each(|w| *w = dist.sample(rng));
                }
            }
            InitScheme::Normal(std) => {
                let dist = Normal::new(0.0, std).map_err(|e| Error::Config(format!("normal init: {e}")))?;
                for l in 0..spec.len() {
                    params.weights_mut(l).iter_mut().for_each(|w| *w = dist.sample(rng));
                }
            }
        }
        Ok(params)
    }

    pub fn zeros(spec: &[LayerSpec]) -> Result<Self> {
        validate_spec(spec)?;
        let offsets = layer_offsets(spec);
        let n = *offsets.last().expect("non-empty");
        Ok(Self {
            spec: spec.to_vec(),
            offsets,
            values: vec![0.0; n],
        })
    }

    /// Wraps a flat buffer laid out as described in the module docs.
    pub fn from_flat(spec: &[LayerSpec], values: Vec<f64>) -> Result<Self> {
        validate_spec(spec)?;
        let offsets = layer_offsets(spec);
        let n = *offsets.last().expect("non-empty");
        if values.len() != n {
            return Err(Error::Shape(format!("spec needs {n} parameters, got {}", values.len())));
        }
        Ok(Self {
            spec: spec.to_vec(),
            offsets,
            values,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.spec[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec[self.spec.len() - 1].out_dim
    }

    pub fn num_layers(&self) -> usize {
        self.spec.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn zeros_like_grad(&self) -> Gradients {
        Gradients {
            spec: self.spec.clone(),
            offsets: self.offsets.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Runs the network on each row of `batch`.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let mut current: Option<Array2<f64>> = None;
        for l in 0..self.spec.len() {
            let input = match &current {
                Some(a) => a.view(),
                None => batch.view(),
            };
            let mut z = self.affine(l, input);
            let act = self.spec[l].activation;
            if act != Activation::Identity {
                z.mapv_inplace(|v| act.apply(v));
            }
            current = Some(z);
        }
        Ok(current.expect("at least one layer"))
    }

    fn affine(&self, layer: usize, input: ArrayView2<f64>) -> Array2<f64> {
        let w = self.weights(layer);
        let mut z = Array2::zeros((input.nrows(), w.nrows()));
        general_mat_mul(1.0, &input, &w.t(), 0.0, &mut z);
        z += &self.biases(layer);
        z
    }

    /// Forward pass that keeps every intermediate needed by [`NetParams::backward_trace`].
    pub fn forward_trace(&self, batch: ArrayView2<f64>) -> Result<ForwardTrace> {
        self.check_input(&batch)?;
        let mut pre = Vec::with_capacity(self.spec.len());
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(self.spec.len());
        for l in 0..self.spec.len() {
            let input = if l == 0 { batch.view() } else { post[l - 1].view() };
            let z = self.affine(l, input);
            let act = self.spec[l].activation;
            let y = z.mapv(|v| act.apply(v));
            pre.push(z);
            post.push(y);
        }
        Ok(ForwardTrace {
            input: batch.to_owned(),
            pre,
            post,
        })
    }

    /// Gradients of `sum_ij loss_grad[i,j] * output[i,j]` with respect to the
    /// parameters and to the input batch.
    pub fn backward(&self, batch: ArrayView2<f64>, loss_grad: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>)> {
        let trace = self.forward_trace(batch)?;
        let (grads, input_grad) = self.backward_trace(&trace, loss_grad, true)?;
        Ok((grads.expect("requested"), input_grad))
    }

    /// Reverse pass over a stored trace. Parameter gradients are skipped when
    /// `want_params` is false (only the input gradient is needed when chaining
    /// a discriminator into a generator).
    pub fn backward_trace(
        &self,
        trace: &ForwardTrace,
        loss_grad: ArrayView2<f64>,
        want_params: bool,
    ) -> Result<(Option<Gradients>, Array2<f64>)> {
        let out = trace.output();
        if loss_grad.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "loss gradient is {:?}, network output is {:?}",
                loss_grad.dim(),
                out.dim()
            )));
        }
        let mut grads = want_params.then(|| self.zeros_like_grad());
        let mut upstream = loss_grad.to_owned();
        for l in (0..self.spec.len()).rev() {
            let act = self.spec[l].activation;
            let mut delta = upstream;
            if act != Activation::Identity {
                ndarray::Zip::from(&mut delta)
                    .and(&trace.pre[l])
                    .and(&trace.post[l])
                    .for_each(|d, &z, &y| *d *= act.derivative(z, y));
            }
            let input = if l == 0 {
                trace.input.view()
            } else {
                trace.post[l - 1].view()
            };
            if let Some(g) = grads.as_mut() {
                let mut dw = g.weights_mut(l);
                general_mat_mul(1.0, &delta.t(), &input, 0.0, &mut dw);
                g.biases_mut(l).assign(&delta.sum_axis(Axis(0)));
            }
            let w = self.weights(l);
            let mut dx = Array2::zeros((delta.nrows(), w.ncols()));
            general_mat_mul(1.0, &delta, &w, 0.0, &mut dx);
            upstream = dx;
        }
        Ok((grads, upstream))
    }
}

impl Gradients {
    pub fn zeros_for(params: &NetParams) -> Self {
        params.zeros_like_grad()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.values.len(), other.values.len(), "gradient layouts differ");
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// First non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    /// Checks that the layout matches `params`.
    pub fn check_matches(&self, params: &NetParams) -> Result<()> {
        if self.spec != params.spec {
            return Err(Error::Shape("gradient layout does not match parameters".into()));
        }
        Ok(())
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("at least one layer")
    }

    /// Pre-activation values of each layer.
    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre
    }
}

/// Compares analytic and central-difference gradients of a scalar loss of the
/// network output.
///
/// `loss` maps the output batch to `(value, d value / d output)`. Returns the
/// largest `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)` over all
/// parameters.
pub fn grad_check<F>(params: &NetParams, batch: ArrayView2<f64>, step: f64, loss: F) -> Result<f64>
where
    F: Fn(ArrayView2<f64>) -> (f64, Array2<f64>),
{
    let output = params.forward(batch)?;
    let (_, out_grad) = loss(output.view());
    let (analytic, _) = params.backward(batch, out_grad.view())?;

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let original = probe.values[i];
        probe.values[i] = original + step;
        let plus = loss(probe.forward(batch)?.view()).0;
        probe.values[i] = original - step;
        let minus = loss(probe.forward(batch)?.view()).0;
        probe.values[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            let (layer, location) = params.locate(i);
            return Err(Error::NonFiniteParameter {
                index: i,
                layer,
                location,
            });
        }
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic.values[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
