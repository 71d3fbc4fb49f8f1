use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use crate::data::{filter_confident, normalize_all, segment_all, NormScope, PoseTrack, Window};
use crate::density::nll_with_grads_unchecked;
use crate::error::{Error, Result};
use crate::net::{CausalNet, Gradients, NetConfig};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Windows whose mean keypoint confidence falls below this are dropped.
    pub confidence_filter_threshold: f64,
    pub net: NetConfig,
    #[serde(default = "default_stride")]
    pub window_stride: usize,
    #[serde(default)]
    pub normalization: NormScope,
}

fn default_stride() -> usize {
    1
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 1e-3,
            batch_size: 256,
            seed: 0,
            confidence_filter_threshold: 0.4,
            net: NetConfig::default(),
            window_stride: 1,
            normalization: NormScope::Window,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.window_stride < 1 {
            return Err(Error::Config("window stride must be >= 1".into()));
        }
        if !self.confidence_filter_threshold.is_finite() {
            return Err(Error::Config("confidence threshold must be finite".into()));
        }
        self.net.validate()
    }
}

/// Segments and normalizes tracks the way training and scoring expect.
pub fn prepare_windows<T: Scalar>(tracks: &[PoseTrack], config: &TrainConfig) -> Result<Vec<Window<T>>> {
    let windows = segment_all(tracks, config.net.frames, config.window_stride)?;
    if let Some(w) = windows.iter().find(|w| w.keypoints != config.net.keypoints) {
        return Err(Error::shape("keypoints per skeleton", config.net.keypoints, w.keypoints));
    }
    Ok(normalize_all(windows, config.normalization))
}

fn input_matrix<T: Scalar>(net: &CausalNet<T>, windows: &[&Window<T>]) -> Result<Array2<T>> {
    let width = net.config().input_width();
    let mut data = Vec::with_capacity(windows.len() * width);
    for w in windows {
        if w.coords.len() != width {
            return Err(Error::shape("window coordinates", width, w.coords.len()));
        }
        data.extend_from_slice(&w.coords);
    }
    Ok(Array2::from_shape_vec((windows.len(), width), data).expect("rows checked"))
}

/// Batch loss and its gradient with respect to every parameter.
pub fn batch_gradients<T: Scalar>(net: &CausalNet<T>, windows: &[&Window<T>]) -> Result<(T, Gradients<T>)> {
    if windows.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let inputs = input_matrix(net, windows)?;
    let pass = net.forward_batch(inputs.view())?;
    let cfg = net.config();
    let (b, c, w) = (cfg.block_size, cfg.cov_params_per_block(), cfg.input_width());
    let scale = T::one() / T::of(windows.len() as f64);
    let mut d_out = Array2::<T>::zeros(pass.output.dim());
    let mut total = T::zero();
    for (row, (out, mut grad)) in pass.output.rows().into_iter().zip(d_out.rows_mut()).enumerate() {
        let out = out.as_slice().expect("standard layout");
        let grad = grad.as_slice_mut().expect("standard layout");
        let x = inputs.row(row);
        let x = x.as_slice().expect("standard layout");
        let (g_mean, g_cov) = grad.split_at_mut(w);
        for p in 0..cfg.blocks() {
            let view = net.block_view(out, p);
            total += nll_with_grads_unchecked(
                &x[p * b..(p + 1) * b],
                &view,
                &mut g_mean[p * b..(p + 1) * b],
                &mut g_cov[p * c..(p + 1) * c],
            );
        }
    }
    d_out.mapv_inplace(|v| v * scale);
    let grads = net.backward_batch(&pass, d_out.view())?;
    Ok((total * scale, grads))
}

/// Mean over windows of the summed per-block negative log-likelihood terms.
pub fn loss_on_batch<T: Scalar>(net: &CausalNet<T>, windows: &[Window<T>]) -> Result<T> {
    if windows.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let refs: Vec<&Window<T>> = windows.iter().collect();
    let inputs = input_matrix(net, &refs)?;
    let pass = net.forward_batch(inputs.view())?;
    let cfg = net.config();
    let b = cfg.block_size;
    let mut total = T::zero();
    for (row, out) in pass.output.rows().into_iter().enumerate() {
        let out = out.as_slice().expect("standard layout");
        let x = inputs.row(row);
        let x = x.as_slice().expect("standard layout");
        for p in 0..cfg.blocks() {
            total += crate::density::nll_term(&x[p * b..(p + 1) * b], net.block_view(out, p))?;
        }
    }
    Ok(total / T::of(windows.len() as f64))
}

/// Early stopping on a held-out criterion where larger is better.
pub struct Validation<'a, T> {
    /// Epochs without improvement tolerated before stopping.
    pub patience: usize,
    pub evaluate: Box<dyn FnMut(&CausalNet<T>) -> Result<f64> + 'a>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub net: CausalNet<T>,
    /// Mean training loss per completed epoch.
    pub loss_curve: Vec<f64>,
    pub validation_curve: Vec<f64>,
    /// Epoch whose weights were kept, when validating.
    pub best_epoch: Option<usize>,
}

pub fn train<T: Scalar>(dataset: Vec<Window<T>>, config: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with_validation(dataset, config, None)
}

pub fn train_with_validation<T: Scalar>(
    dataset: Vec<Window<T>>,
    config: &TrainConfig,
    mut validation: Option<Validation<'_, T>>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let total = dataset.len();
    let data = filter_confident(dataset, config.confidence_filter_threshold);
    if data.is_empty() {
        return Err(Error::Data(format!(
            "none of {total} windows reach mean confidence {}",
            config.confidence_filter_threshold
        )));
    }
    let mut net = CausalNet::<T>::init(config.net.clone(), config.seed)?;
    let mut adam = AdamState::<T>::new(net.config().parameter_count());
    let lr = T::of(config.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut validation_curve = Vec::new();
    let mut best: Option<(f64, usize, CausalNet<T>)> = None;

    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64 + 1);
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Window<T>> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grads) = batch_gradients(&net, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss in epoch {}", epoch + 1)));
            }
            epoch_loss += loss.as_f64() * batch.len() as f64;
            apply(&mut net, &grads, &mut adam, lr)?;
        }
        loss_curve.push(epoch_loss / data.len() as f64);

        if let Some(v) = validation.as_mut() {
            let score = (v.evaluate)(&net)?;
            validation_curve.push(score);
            match &best {
                Some((s, _, _)) if score <= *s => {}
                _ => best = Some((score, epoch, net.clone())),
            }
            let best_epoch = best.as_ref().map(|b| b.1).unwrap_or(epoch);
            if epoch - best_epoch >= v.patience.max(1) {
                break;
            }
        }
    }

    let (net, best_epoch) = match best {
        Some((_, e, n)) => (n, Some(e)),
        None => (net, None),
    };
    Ok(TrainOutcome {
        net,
        loss_curve,
        validation_curve,
        best_epoch,
    })
}

fn apply<T: Scalar>(net: &mut CausalNet<T>, grads: &Gradients<T>, adam: &mut AdamState<T>, lr: T) -> Result<()> {
    let mut parts = Vec::with_capacity(grads.layers.len() * 2);
    for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
        parts.push((
            layer.weight.as_slice_mut().expect("standard layout"),
            g.weight.as_slice().expect("standard layout"),
        ));
        parts.push((
            layer.bias.as_slice_mut().expect("standard layout"),
            g.bias.as_slice().expect("standard layout"),
        ));
    }
    adam.step_parts(parts, lr)
}
