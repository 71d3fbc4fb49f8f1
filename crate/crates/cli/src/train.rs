use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use seeker_core::data::{NormScope, TrackFile};
use seeker_core::density::CovarianceMode;
use seeker_core::metrics::{auroc, FrameEval};
use seeker_core::net::NetConfig;
use seeker_core::score::ScorerConfig;
use seeker_core::train::{prepare_windows, train_with_validation, Checkpoint, TrainConfig, Validation};
use seeker_core::Scalar;

use crate::io::{output_dir, read_labels, read_tracks, write_atomic, write_json, RUN_CONFIG};
use crate::score::score_tracks;
use crate::Command;

pub const MODEL_FILE: &str = "model.skrm";
pub const LOSS_CURVE_FILE: &str = "loss_curve.csv";

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Covariance {
    Identity,
    #[default]
    Diag,
    Full,
}

impl From<Covariance> for CovarianceMode {
    fn from(c: Covariance) -> Self {
        match c {
            Covariance::Identity => CovarianceMode::Identity,
            Covariance::Diag => CovarianceMode::Diagonal,
            Covariance::Full => CovarianceMode::Full,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Window,
    Track,
}

impl From<Normalization> for NormScope {
    fn from(n: Normalization) -> Self {
        match n {
            Normalization::Window => NormScope::Window,
            Normalization::Track => NormScope::Track,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Pose track file (JSON Lines) with normal behavior only.
    #[arg(long)]
    pub tracks: PathBuf,
    /// Directory for the checkpoint, loss curve and config echo.
    #[arg(long)]
    pub out: PathBuf,
    /// Frames per window.
    #[arg(long, default_value_t = 24)]
    pub frames: usize,
    /// Coordinates per prediction block: 2 per keypoint, 2N per skeleton.
    #[arg(long, default_value_t = 2)]
    pub block_size: usize,
    #[arg(long, default_value_t = 3)]
    pub hidden_layers: usize,
    /// Hidden width as a multiple of the input width.
    #[arg(long, default_value_t = 4)]
    pub expansion: usize,
    #[arg(long, value_enum, default_value_t)]
    pub covariance: Covariance,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minimum mean keypoint confidence of a training window.
    #[arg(long, default_value_t = 0.4)]
    pub confidence_threshold: f64,
    /// Offset between consecutive training windows.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, value_enum, default_value_t)]
    pub normalization: Normalization,
    #[arg(long, value_enum, default_value_t)]
    pub precision: Precision,
    /// Labeled tracks for early stopping on validation AUROC.
    #[arg(long, requires = "val_labels")]
    pub val_tracks: Option<PathBuf>,
    /// Label file for `--val-tracks`.
    #[arg(long, requires = "val_tracks")]
    pub val_labels: Option<PathBuf>,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
}

impl TrainArgs {
    pub fn config(&self, keypoints: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.lr,
            batch_size: self.batch_size,
            seed: self.seed,
            confidence_filter_threshold: self.confidence_threshold,
            net: NetConfig {
                frames: self.frames,
                keypoints,
                block_size: self.block_size,
                hidden_layers: self.hidden_layers,
                expansion_factor: self.expansion,
                covariance: self.covariance.into(),
                ..NetConfig::default()
            },
            window_stride: self.stride,
            normalization: self.normalization.into(),
        }
    }
}

pub fn run(args: &TrainArgs, echo: &Command) -> Result<()> {
    let tracks = read_tracks(&args.tracks)?;
    let config = args.config(tracks.n_keypoints);
    config.validate()?;
    let checkpoint = match args.precision {
        Precision::F64 => fit::<f64>(args, &tracks, &config)?,
        Precision::F32 => fit::<f32>(args, &tracks, &config)?,
    };

    let dir = output_dir(&args.out)?;
    let bytes = checkpoint.to_bytes()?;
    write_atomic(&dir.join(MODEL_FILE), |w| Ok(w.write_all(&bytes)?))?;
    write_atomic(&dir.join(LOSS_CURVE_FILE), |w| {
        writeln!(w, "epoch,loss")?;
        for (i, l) in checkpoint.loss_curve.iter().enumerate() {
            writeln!(w, "{},{l}", i + 1)?;
        }
        Ok(())
    })?;
    write_json(&dir.join(RUN_CONFIG), echo)?;
    if let Some(last) = checkpoint.loss_curve.last() {
        eprintln!(
            "trained {} epochs, final loss {last:.4}; wrote {}",
            checkpoint.loss_curve.len(),
            dir.join(MODEL_FILE).display()
        );
    }
    Ok(())
}

fn fit<T: Scalar>(args: &TrainArgs, tracks: &TrackFile, config: &TrainConfig) -> Result<Checkpoint> {
    let windows = prepare_windows::<T>(&tracks.tracks, config)?;
    if windows.is_empty() {
        bail!(
            "no track in {} has {} consecutive frames",
            args.tracks.display(),
            config.net.frames
        );
    }
    let validation = match (&args.val_tracks, &args.val_labels) {
        (Some(t), Some(l)) => {
            let val_tracks = read_tracks(t)?;
            let labels = read_labels(l)?;
            let scorer = ScorerConfig {
                normalization: config.normalization,
                ..ScorerConfig::default()
            };
            Some(Validation {
                patience: args.patience,
                evaluate: Box::new(move |net| {
                    let videos = score_tracks(net, &val_tracks, Some(&labels), &scorer)?;
                    let lines: Vec<_> = videos
                        .iter()
                        .flat_map(|v| {
                            v.frame_scores.iter().enumerate().map(|(frame, &score)| seeker_core::score::FrameLine {
                                video: v.video_id.clone(),
                                frame,
                                score,
                                decision: None,
                            })
                        })
                        .collect();
                    let eval = FrameEval::from_lines(&labels.videos, &lines)?;
                    Ok(auroc(&eval.scores, &eval.labels)?)
                }),
            })
        }
        _ => None,
    };
    let outcome = train_with_validation(windows, config, validation).context("training")?;
    Ok(Checkpoint::from_net(&outcome.net, Some(config.clone()), outcome.loss_curve))
}
