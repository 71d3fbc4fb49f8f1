use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::NetConfig;
use super::mask::{build_masks, MaskSet};
use crate::density::{GaussianParams, GaussianView, ParamGrads};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    /// `outputs x inputs`.
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

/// Masked fully connected network mapping a flattened window to one
/// Gaussian per prediction block.
///
/// Stored weights at masked positions are never read: every use goes
/// through [`CausalNet::effective_weight`], which selects rather than
/// multiplies.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalNet<T> {
    config: NetConfig,
    layers: Vec<Layer<T>>,
    masks: MaskSet,
}

/// Activations retained for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass<T> {
    /// `activations[0]` is the input batch, then one entry per hidden layer.
    pub activations: Vec<Array2<T>>,
    effective: Vec<Array2<T>>,
    /// `batch x output_width` raw head outputs.
    pub output: Array2<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }
}

impl<T: Scalar> CausalNet<T> {
    /// Weights uniform in `±sqrt(1 / fan_in)`, biases zero. Zero biases make
    /// the initial covariance the identity in every mode.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self> {
        let masks = build_masks(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = (1.0 / fan_in as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Layer {
                    weight: Array2::from_shape_simple_fn((fan_out, fan_in), || {
                        T::of(dist.sample(&mut rng))
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            config,
            layers,
            masks,
        })
    }

    /// Rebuilds a net from parameters in [`CausalNet::parameters`] order.
    pub fn from_parameters(config: NetConfig, params: &[T]) -> Result<Self> {
        let masks = build_masks(&config)?;
        let expected = config.parameter_count();
        if params.len() != expected {
            return Err(Error::shape("parameters", expected, params.len()));
        }
        let mut rest = params;
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let (w, tail) = rest.split_at(fan_in * fan_out);
                let (b, tail) = tail.split_at(fan_out);
                rest = tail;
                Layer {
                    weight: Array2::from_shape_vec((fan_out, fan_in), w.to_vec())
                        .expect("length checked"),
                    bias: Array1::from(b.to_vec()),
                }
            })
            .collect();
        Ok(Self {
            config,
            layers,
            masks,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn masks(&self) -> &MaskSet {
        &self.masks
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Raw parameter access. Values written at masked positions have no effect.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Every layer's weights (row-major) followed by its bias, in layer order.
    pub fn parameters(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.config.parameter_count());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    /// `W ⊙ M` for layer `index`.
    pub fn effective_weight(&self, index: usize) -> Array2<T> {
        let mask = self.masks.layers().nth(index).expect("layer index in range");
        Zip::from(&self.layers[index].weight)
            .and(mask)
            .map_collect(|&w, &keep| if keep { w } else { T::zero() })
    }

    /// Forward pass over a `batch x input_width` matrix.
    pub fn forward_batch(&self, inputs: ArrayView2<'_, T>) -> Result<ForwardPass<T>> {
        let width = self.config.input_width();
        if inputs.ncols() != width {
            return Err(Error::shape("window coordinates", width, inputs.ncols()));
        }
        let effective: Vec<Array2<T>> = (0..self.layers.len()).map(|i| self.effective_weight(i)).collect();
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(inputs.to_owned());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = activations[i].dot(&effective[i].t());
            z += &layer.bias;
            if i == last {
                return Ok(ForwardPass {
                    activations,
                    effective,
                    output: z,
                });
            }
            z.mapv_inplace(|v| v.max(T::zero()));
            activations.push(z);
        }
        unreachable!("network has an output layer")
    }

    /// Reverse-mode gradients of a loss given `d loss / d output`, one row per
    /// batch element. Masked weight positions get exactly zero.
    pub fn backward_batch(
        &self,
        pass: &ForwardPass<T>,
        output_grads: ArrayView2<'_, T>,
    ) -> Result<Gradients<T>> {
        if output_grads.dim() != pass.output.dim() {
            return Err(Error::shape(
                "output gradients",
                pass.output.len(),
                output_grads.len(),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = output_grads.to_owned();
        let masks: Vec<&Array2<bool>> = self.masks.layers().collect();
        for i in (0..self.layers.len()).rev() {
            let a_prev = &pass.activations[i];
            let mut weight = delta.t().dot(a_prev);
            Zip::from(&mut weight)
                .and(masks[i])
                .for_each(|g, &keep| {
                    if !keep {
                        *g = T::zero();
                    }
                });
            let bias = delta.sum_axis(Axis(0));
            grads.push(LayerGrad { weight, bias });
            if i > 0 {
                let mut da = delta.dot(&pass.effective[i]);
                Zip::from(&mut da).and(a_prev).for_each(|d, &a| {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = da;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Gaussian parameters of block `block` read from one raw output row.
    pub fn block_view<'a>(&self, row: &'a [T], block: usize) -> GaussianView<'a, T> {
        let b = self.config.block_size;
        let c = self.config.cov_params_per_block();
        let w = self.config.input_width();
        GaussianView {
            mode: self.config.covariance,
            mean: &row[block * b..(block + 1) * b],
            cov: &row[w + block * c..w + (block + 1) * c],
        }
    }

    pub fn decode(&self, row: &[T]) -> Vec<GaussianParams<T>> {
        (0..self.config.blocks())
            .map(|p| self.block_view(row, p).to_owned())
            .collect()
    }

    /// Per-block Gaussians for a single window.
    pub fn forward(&self, coords: &[T]) -> Result<Vec<GaussianParams<T>>> {
        let input = ArrayView2::from_shape((1, coords.len()), coords)
            .map_err(|_| Error::shape("window coordinates", self.config.input_width(), coords.len()))?;
        let pass = self.forward_batch(input)?;
        let row = pass.output.row(0);
        Ok(self.decode(row.as_slice().expect("standard layout")))
    }

    /// Lays per-block gradients out in raw output order.
    pub fn pack_output_grads(&self, grads: &[ParamGrads<T>]) -> Result<Vec<T>> {
        let p = self.config.blocks();
        if grads.len() != p {
            return Err(Error::shape("per-block gradients", p, grads.len()));
        }
        let b = self.config.block_size;
        let c = self.config.cov_params_per_block();
        let w = self.config.input_width();
        let mut out = vec![T::zero(); self.config.output_width()];
        for (k, g) in grads.iter().enumerate() {
            if g.mean.len() != b {
                return Err(Error::shape("mean gradient", b, g.mean.len()));
            }
            if g.cov.len() != c {
                return Err(Error::shape("covariance gradient", c, g.cov.len()));
            }
            out[k * b..(k + 1) * b].copy_from_slice(&g.mean);
            out[w + k * c..w + (k + 1) * c].copy_from_slice(&g.cov);
        }
        Ok(out)
    }

    /// Single-window backward pass from per-block output gradients.
    pub fn backward(&self, coords: &[T], output_grads: &[ParamGrads<T>]) -> Result<Gradients<T>> {
        let input = ArrayView2::from_shape((1, coords.len()), coords)
            .map_err(|_| Error::shape("window coordinates", self.config.input_width(), coords.len()))?;
        let pass = self.forward_batch(input)?;
        let packed = self.pack_output_grads(output_grads)?;
        let g = ArrayView2::from_shape((1, packed.len()), &packed).expect("packed row");
        self.backward_batch(&pass, g)
    }
}
