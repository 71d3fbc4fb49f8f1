use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use seeker_core::data::{LabelFile, PoseTrack, TrackFile};
use seeker_core::net::CausalNet;
use seeker_core::score::{score_video, write_score_lines, ScorerConfig, VideoScores};
use seeker_core::train::load_checkpoint;
use seeker_core::Scalar;

use crate::io::{output_dir, read_labels, read_tracks, write_atomic, write_json, RUN_CONFIG};
use crate::train::Precision;
use crate::Command;

pub const SCORES_FILE: &str = "scores.jsonl";
pub const SCORES_CSV: &str = "scores.csv";

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Pose track file to score.
    #[arg(long)]
    pub tracks: PathBuf,
    /// Directory for the score files and config echo.
    #[arg(long)]
    pub out: PathBuf,
    /// Label file supplying video lengths; otherwise a video ends at its last skeleton.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Aggregate raw per-person scores without temporal smoothing.
    #[arg(long)]
    pub no_smoothing: bool,
    /// Weigh every keypoint equally instead of by detector confidence.
    #[arg(long)]
    pub no_confidence_weighting: bool,
    /// Smoothing kernel width in frames.
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    /// Flag frames scoring strictly above this value.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Also emit per-person lines with keypoint log-densities and boxes.
    #[arg(long)]
    pub per_person: bool,
    #[arg(long, value_enum, default_value_t)]
    pub precision: Precision,
}

/// Scores every video in `tracks`, plus any labeled video without tracks.
pub fn score_tracks<T: Scalar>(
    net: &CausalNet<T>,
    tracks: &TrackFile,
    labels: Option<&LabelFile>,
    scorer: &ScorerConfig,
) -> seeker_core::Result<Vec<VideoScores>> {
    let mut videos: BTreeMap<&str, Vec<&PoseTrack>> = BTreeMap::new();
    for t in &tracks.tracks {
        videos.entry(t.video_id.as_str()).or_default().push(t);
    }
    if let Some(l) = labels {
        for v in &l.videos {
            videos.entry(v.video_id.as_str()).or_default();
        }
    }
    videos
        .into_iter()
        .map(|(id, ts)| {
            let len = labels.and_then(|l| l.video(id)).map(|v| v.num_frames);
            score_video(net, id, &ts, len, scorer)
        })
        .collect()
}

pub fn run(args: &ScoreArgs, echo: &Command) -> Result<()> {
    let checkpoint = load_checkpoint(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let tracks = read_tracks(&args.tracks)?;
    if tracks.n_keypoints != checkpoint.net.keypoints {
        bail!(
            "model expects {} keypoints per skeleton but {} has {}",
            checkpoint.net.keypoints,
            args.tracks.display(),
            tracks.n_keypoints
        );
    }
    let labels = args.labels.as_deref().map(read_labels).transpose()?;
    let scorer = ScorerConfig {
        smoothing_sigma: args.sigma,
        apply_smoothing: !args.no_smoothing,
        confidence_weighting: !args.no_confidence_weighting,
        decision_threshold: args.threshold,
        normalization: checkpoint.train.as_ref().map(|t| t.normalization).unwrap_or_default(),
    };
    scorer.validate()?;
    let videos = match args.precision {
        Precision::F64 => score_tracks(&checkpoint.to_net::<f64>()?, &tracks, labels.as_ref(), &scorer)?,
        Precision::F32 => score_tracks(&checkpoint.to_net::<f32>()?, &tracks, labels.as_ref(), &scorer)?,
    };

    let dir = output_dir(&args.out)?;
    let lines: Vec<_> = videos.iter().flat_map(|v| v.lines(args.per_person)).collect();
    write_atomic(&dir.join(SCORES_FILE), |w| Ok(write_score_lines(w, &lines)?))?;
    write_atomic(&dir.join(SCORES_CSV), |w| {
        if args.threshold.is_some() {
            writeln!(w, "video,frame,score,decision")?;
        } else {
            writeln!(w, "video,frame,score")?;
        }
        for v in &videos {
            for (f, s) in v.frame_scores.iter().enumerate() {
                match &v.decisions {
                    Some(d) => writeln!(w, "{},{f},{s},{}", v.video_id, d[f])?,
                    None => writeln!(w, "{},{f},{s}", v.video_id)?,
                }
            }
        }
        Ok(())
    })?;
    write_json(&dir.join(RUN_CONFIG), echo)?;
    let frames: usize = videos.iter().map(|v| v.frame_scores.len()).sum();
    eprintln!("scored {} videos, {frames} frames", videos.len());
    Ok(())
}
