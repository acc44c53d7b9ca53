use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::simplex::{softmax, PositiveComposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Dense(usize),
    Activation(Activation),
    Dropout(f64),
    BatchNorm,
}

/// Architecture description. The softmax head (a dense map to `output_dim`
/// followed by softmax) is always appended by [`NetworkSpec::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden: Vec::new(),
        }
    }

    pub fn dense(mut self, width: usize) -> Self {
        self.hidden.push(LayerSpec::Dense(width));
        self
    }

    pub fn activation(mut self, act: Activation) -> Self {
        self.hidden.push(LayerSpec::Activation(act));
        self
    }

    pub fn relu(self) -> Self {
        self.activation(Activation::Relu)
    }

    pub fn tanh(self) -> Self {
        self.activation(Activation::Tanh)
    }

    pub fn dropout(mut self, rate: f64) -> Self {
        self.hidden.push(LayerSpec::Dropout(rate));
        self
    }

    pub fn batchnorm(mut self) -> Self {
        self.hidden.push(LayerSpec::BatchNorm);
        self
    }

    /// dense(64) → relu → [dropout(0.2)] → [batchnorm] → dense(64) → relu → head.
    pub fn desk_default(input_dim: usize, k: usize, dropout: bool, batchnorm: bool) -> Self {
        let mut spec = Self::new(input_dim, k).dense(64).relu();
        if dropout {
            spec = spec.dropout(0.2);
        }
        if batchnorm {
            spec = spec.batchnorm();
        }
        spec.dense(64).relu()
    }

    /// Random normal weights with standard deviation `1/sqrt(fan_in)`, zero biases.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Network> {
        if self.input_dim == 0 || self.output_dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "need input_dim >= 1 and output_dim >= 2, got {} and {}",
                self.input_dim, self.output_dim
            )));
        }
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        let mut width = self.input_dim;
        for spec in &self.hidden {
            let layer = match *spec {
                LayerSpec::Dense(out) => {
                    if out == 0 {
                        return Err(Error::InvalidParameter("dense width must be >= 1".into()));
                    }
                    let layer = Layer::dense(width, out, rng);
                    width = out;
                    layer
                }
                LayerSpec::Activation(a) => Layer::Activation(a),
                LayerSpec::Dropout(rate) => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::InvalidParameter(format!(
                            "dropout rate must lie in [0, 1), got {rate}"
                        )));
                    }
                    Layer::Dropout { rate }
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(width)),
            };
            layers.push(layer);
        }
        layers.push(Layer::dense(width, self.output_dim, rng));
        Ok(Network {
            layers,
            input_dim: self.input_dim,
            output_dim: self.output_dim,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `y = x W + b` with `W` of shape `(in, out)`.
    Dense {
        w: Array2<f64>,
        b: Array1<f64>,
    },
    Activation(Activation),
    Dropout {
        rate: f64,
    },
    BatchNorm(BatchNorm),
}

impl Layer {
    fn dense<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive sd");
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| normal.sample(rng));
        Layer::Dense {
            w,
            b: Array1::zeros(fan_out),
        }
    }
}

enum LayerCache {
    Dense { input: Array2<f64> },
    Activation { output: Array2<f64> },
    Dropout { mask: Option<Array2<f64>> },
    BatchNorm {
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
        batch_stats: bool,
    },
}

/// Intermediate values kept by the forward pass for backpropagation.
pub struct ForwardCache {
    layers: Vec<LayerCache>,
}

/// Parameter gradients, one flat vector per parameter tensor, in the order
/// of [`Network::params_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

/// A dense feed-forward network ending in a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
}

impl Network {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Final dense weights `(penultimate width, K)` and biases.
    pub fn head(&self) -> (&Array2<f64>, &Array1<f64>) {
        match self.layers.last() {
            Some(Layer::Dense { w, b }) => (w, b),
            _ => unreachable!("networks always end in a dense head"),
        }
    }

    pub fn head_mut(&mut self) -> (&mut Array2<f64>, &mut Array1<f64>) {
        match self.layers.last_mut() {
            Some(Layer::Dense { w, b }) => (w, b),
            _ => unreachable!("networks always end in a dense head"),
        }
    }

    /// Zeroes the head so that every output is the centroid.
    pub fn zero_head(&mut self) {
        let (w, b) = self.head_mut();
        w.fill(0.0);
        b.fill(0.0);
    }

    /// Mutable views of every trainable tensor: dense `w` then `b`, batchnorm
    /// `gamma` then `beta`, in layer order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { w, b } => {
                    out.push(w.as_slice_mut().expect("standard layout"));
                    out.push(b.as_slice_mut().expect("standard layout"));
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                    out.push(bn.beta.as_slice_mut().expect("standard layout"));
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense { w, b } => {
                    out.push(w.len());
                    out.push(b.len());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.len());
                    out.push(bn.beta.len());
                }
                _ => {}
            }
        }
        out
    }

    /// Index of the head's weight tensor within [`Network::params_mut`].
    pub fn head_weight_index(&self) -> usize {
        self.param_sizes().len() - 2
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} features, network expects {}",
                x.ncols(),
                self.input_dim
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        Ok(())
    }

    /// Logits for a batch. Train mode draws dropout masks from `rng` and
    /// updates batchnorm running statistics.
    pub fn forward_logits<R: Rng + ?Sized>(
        &mut self,
        x: &Array2<f64>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x)?;
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (next, cache) = match layer {
                Layer::Dense { w, b } => {
                    let out = h.dot(&*w) + &*b;
                    (out, LayerCache::Dense { input: h })
                }
                Layer::Activation(act) => {
                    let out = match act {
                        Activation::Relu => h.mapv_into(|v| v.max(0.0)),
                        Activation::Tanh => h.mapv_into(f64::tanh),
                    };
                    (out.clone(), LayerCache::Activation { output: out })
                }
                Layer::Dropout { rate } => {
                    if mode == Mode::Train && *rate > 0.0 {
                        let keep = 1.0 - *rate;
                        let mask = Array2::from_shape_fn(h.raw_dim(), |_| {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        });
                        (&h * &mask, LayerCache::Dropout { mask: Some(mask) })
                    } else {
                        (h, LayerCache::Dropout { mask: None })
                    }
                }
                Layer::BatchNorm(bn) => match mode {
                    Mode::Train => {
                        let n = h.nrows() as f64;
                        let mean = h.mean_axis(Axis(0)).expect("non-empty batch");
                        let centered = &h - &mean;
                        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
                        let inv_std = var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
                        let xhat = &centered * &inv_std;
                        let out = &xhat * &bn.gamma + &bn.beta;
                        let unbiased = if n > 1.0 { &var * (n / (n - 1.0)) } else { var.clone() };
                        bn.running_mean = &bn.running_mean * (1.0 - bn.momentum) + &mean * bn.momentum;
                        bn.running_var = &bn.running_var * (1.0 - bn.momentum) + &unbiased * bn.momentum;
                        (
                            out,
                            LayerCache::BatchNorm {
                                xhat,
                                inv_std,
                                batch_stats: true,
                            },
                        )
                    }
                    Mode::Eval => {
                        let inv_std = bn.running_var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
                        let xhat = (&h - &bn.running_mean) * &inv_std;
                        let out = &xhat * &bn.gamma + &bn.beta;
                        (
                            out,
                            LayerCache::BatchNorm {
                                xhat,
                                inv_std,
                                batch_stats: false,
                            },
                        )
                    }
                },
            };
            h = next;
            caches.push(cache);
        }
        Ok((h, ForwardCache { layers: caches }))
    }

    /// Softmax outputs `λ = f(x)` per row, plus the cache.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Array2<f64>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Vec<PositiveComposition>, ForwardCache)> {
        let (logits, cache) = self.forward_logits(x, mode, rng)?;
        Ok((rows_to_compositions(&logits)?, cache))
    }

    /// Eval-mode outputs without a cache.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<PositiveComposition>> {
        let mut net = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(net.forward(x, Mode::Eval, &mut rng)?.0)
    }

    /// Eval-mode activations feeding the head (the penultimate layer).
    pub fn penultimate(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut net = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, cache) = net.forward_logits(x, Mode::Eval, &mut rng)?;
        match cache.layers.into_iter().last() {
            Some(LayerCache::Dense { input }) => Ok(input),
            _ => unreachable!("networks always end in a dense head"),
        }
    }

    /// Backpropagates `d loss / d logits` through the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Array2<f64>) -> Gradients {
        let mut per_layer: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.layers.len());
        let mut delta = dlogits.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            match (layer, lc) {
                (Layer::Dense { w, .. }, LayerCache::Dense { input }) => {
                    let dw = input.t().dot(&delta);
                    let db = delta.sum_axis(Axis(0));
                    delta = delta.dot(&w.t());
                    per_layer.push(vec![flat(&dw), flat(&db)]);
                }
                (Layer::Activation(act), LayerCache::Activation { output }) => match act {
                    Activation::Relu => {
                        delta.zip_mut_with(output, |d, o| {
                            if *o <= 0.0 {
                                *d = 0.0
                            }
                        });
                    }
                    Activation::Tanh => {
                        delta.zip_mut_with(output, |d, o| *d *= 1.0 - o * o);
                    }
                },
                (Layer::Dropout { .. }, LayerCache::Dropout { mask }) => {
                    if let Some(mask) = mask {
                        delta = &delta * mask;
                    }
                }
                (Layer::BatchNorm(bn), LayerCache::BatchNorm { xhat, inv_std, batch_stats }) => {
                    let dgamma = (&delta * xhat).sum_axis(Axis(0));
                    let dbeta = delta.sum_axis(Axis(0));
                    let dxhat = &delta * &bn.gamma;
                    delta = if *batch_stats {
                        let n = delta.nrows() as f64;
                        let sum_dxhat = dxhat.sum_axis(Axis(0));
                        let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                        (&dxhat * n - &sum_dxhat - xhat * &sum_dxhat_xhat) * inv_std / n
                    } else {
                        &dxhat * inv_std
                    };
                    per_layer.push(vec![flat(&dgamma), flat(&dbeta)]);
                }
                _ => unreachable!("cache does not match layer"),
            }
        }
        per_layer.reverse();
        Gradients(per_layer.into_iter().flatten().collect())
    }
}

fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> Vec<f64> {
    a.iter().copied().collect()
}

pub(crate) fn rows_to_compositions(logits: &Array2<f64>) -> Result<Vec<PositiveComposition>> {
    logits
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| softmax(&row.to_vec()).map_err(|e| e.at_sample(i)))
        .collect()
}
