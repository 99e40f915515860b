//! Fully connected reconstruction network.
//!
//! `K` ReLU hidden layers map a measurement patch to a hidden code, and an
//! affine output layer maps the code to a vectorized video block:
//! `h_k = max(0, W_k h_{k-1} + c_k)`, `out = W_o h_K + c_o`, with `h_0 = y`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Layer widths of a decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderShape {
    /// Measurements per patch, `M_p`.
    pub inputs: usize,
    /// Width of every hidden layer (`N_p` in the full-size network).
    pub hidden_width: usize,
    /// Number of hidden layers `K`.
    pub hidden_layers: usize,
    /// Samples per block, `N_p`.
    pub outputs: usize,
}

impl DecoderShape {
    /// The full-size network: every hidden layer as wide as the block.
    pub fn full(inputs: usize, outputs: usize, hidden_layers: usize) -> Self {
        Self {
            inputs,
            hidden_width: outputs,
            hidden_layers,
            outputs,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.hidden_width == 0 || self.hidden_layers == 0 || self.outputs == 0 {
            return Err(Error::InvalidParameter(format!(
                "decoder dimensions must be positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// One affine layer; `weights` is `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn apply(&self, h: ArrayView2<f64>) -> Array2<f64> {
        let mut z = h.dot(&self.weights.t());
        z += &self.bias;
        z
    }
}

/// Hidden layers followed by the output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams {
    layers: Vec<DenseLayer>,
    version: u64,
}

/// Activations recorded by a forward pass: `h_0 = y, h_1, ..., h_K`.
#[derive(Clone, Debug)]
pub struct DecoderCache {
    version: u64,
    activations: Vec<Array2<f64>>,
}

impl DecoderCache {
    pub fn activations(&self) -> &[Array2<f64>] {
        &self.activations
    }
}

/// Gradients mirroring [`DecoderParams::layers`].
pub type DecoderGrads = Vec<DenseLayer>;

impl DecoderParams {
    /// Hidden layers first, output layer last. Consecutive layers must chain.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidParameter(
                "decoder needs at least one hidden layer and an output layer".into(),
            ));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {k}: {} biases for {} outputs",
                    l.bias.len(),
                    l.outputs()
                )));
            }
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {k} emits {} values, layer {} expects {}",
                    pair[0].outputs(),
                    k + 1,
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers, version: 0 })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn shape(&self) -> DecoderShape {
        DecoderShape {
            inputs: self.inputs(),
            hidden_width: self.layers[0].outputs(),
            hidden_layers: self.hidden_layers(),
            outputs: self.outputs(),
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Mutable access to the layers; bumps the version so older caches are
    /// rejected by [`backward`](Self::backward).
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.version += 1;
        &mut self.layers
    }

    /// Runs `y` (`batch x M_p`) through the network.
    pub fn forward(&self, y: ArrayView2<f64>) -> Result<(Array2<f64>, DecoderCache)> {
        if y.ncols() != self.inputs() {
            return Err(Error::DimensionMismatch(format!(
                "decoder expects {} inputs, got {}",
                self.inputs(),
                y.ncols()
            )));
        }
        let (hidden, output) = self.layers.split_at(self.layers.len() - 1);
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(y.to_owned());
        for layer in hidden {
            let mut z = layer.apply(activations.last().expect("h_0 pushed").view());
            z.mapv_inplace(|v| v.max(0.0));
            activations.push(z);
        }
        let out = output[0].apply(activations.last().expect("h_K pushed").view());
        Ok((
            out,
            DecoderCache {
                version: self.version,
                activations,
            },
        ))
    }

    /// Reverse-mode gradients for upstream gradient `grad_out` (`batch x N_p`).
    ///
    /// Returns the parameter gradients and the gradient w.r.t. the input `y`.
    pub fn backward(
        &self,
        grad_out: ArrayView2<f64>,
        cache: &DecoderCache,
    ) -> Result<(DecoderGrads, Array2<f64>)> {
        if cache.version != self.version || cache.activations.len() != self.layers.len() {
            return Err(Error::StaleCache(format!(
                "decoder cache from version {}, parameters at {}",
                cache.version, self.version
            )));
        }
        let batch = cache.activations[0].nrows();
        if grad_out.dim() != (batch, self.outputs()) {
            return Err(Error::DimensionMismatch(format!(
                "output gradient {:?}, expected ({batch}, {})",
                grad_out.dim(),
                self.outputs()
            )));
        }
        let mut grads: Vec<DenseLayer> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.to_owned();
        for k in (0..self.layers.len()).rev() {
            let h_in = &cache.activations[k];
            let layer = &self.layers[k];
            grads.push(DenseLayer {
                weights: delta.t().dot(h_in),
                bias: delta.sum_axis(Axis(0)),
            });
            let mut upstream = delta.dot(&layer.weights);
            if k > 0 {
                // ReLU derivative, zero at the kink.
                ndarray::Zip::from(&mut upstream)
                    .and(h_in)
                    .for_each(|g, &h| {
                        if h <= 0.0 {
                            *g = 0.0;
                        }
                    });
            }
            delta = upstream;
        }
        grads.reverse();
        Ok((grads, delta))
    }

    /// Single-sample forward pass.
    pub fn forward_one(&self, y: &[f64]) -> Result<(Vec<f64>, DecoderCache)> {
        let view = ArrayView2::from_shape((1, y.len()), y)
            .map_err(|_| Error::DimensionMismatch("measurement vector".into()))?;
        let (out, cache) = self.forward(view)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }
}

/// Uniform `(-1/sqrt(N_p), 1/sqrt(N_p))` weights and zero biases.
pub fn init_decoder(shape: DecoderShape, seed: u64) -> Result<DecoderParams> {
    shape.validate()?;
    let bound = 1.0 / (shape.outputs as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![shape.inputs];
    dims.extend(std::iter::repeat_n(shape.hidden_width, shape.hidden_layers));
    dims.push(shape.outputs);
    let layers = dims
        .windows(2)
        .map(|io| DenseLayer {
            weights: Array2::from_shape_simple_fn((io[1], io[0]), || rng.random_range(-bound..bound)),
            bias: Array1::zeros(io[1]),
        })
        .collect();
    DecoderParams::from_layers(layers)
}
