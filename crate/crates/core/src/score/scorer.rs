use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smooth::smooth;
use crate::data::{normalize_all, segment, split_contiguous, BBox, NormScope, PoseTrack, Window, REGION_INFLATION};
use crate::density::log_density_terms;
use crate::error::{Error, Result};
use crate::net::CausalNet;
use crate::scalar::Scalar;

const SCORE_BATCH: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    /// Gaussian kernel width in frames.
    pub smoothing_sigma: f64,
    pub apply_smoothing: bool,
    pub confidence_weighting: bool,
    /// Frames scoring strictly above this are flagged.
    pub decision_threshold: Option<f64>,
    /// Must match the statistics used in training.
    pub normalization: NormScope,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            smoothing_sigma: 10.0,
            apply_smoothing: true,
            confidence_weighting: true,
            decision_threshold: None,
            normalization: NormScope::Window,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.apply_smoothing && !(self.smoothing_sigma > 0.0 && self.smoothing_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "smoothing sigma must be positive, got {}",
                self.smoothing_sigma
            )));
        }
        if self.decision_threshold.is_some_and(f64::is_nan) {
            return Err(Error::Config("decision threshold is NaN".into()));
        }
        Ok(())
    }
}

/// Score of the final skeleton of one window.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonScore {
    pub score: f64,
    /// `ln p(keypoint | everything before it)` for each keypoint of the frame.
    pub keypoint_logdens: Vec<f64>,
    pub confidences: Vec<f64>,
}

impl SkeletonScore {
    fn from_terms(keypoint_logdens: Vec<f64>, confidences: Vec<f64>, weighting: bool) -> Self {
        let mut total = 0.0;
        for (ld, c) in keypoint_logdens.iter().zip(&confidences) {
            let w = if weighting { *c } else { 1.0 };
            total += w * ld;
        }
        Self {
            score: -total,
            keypoint_logdens,
            confidences,
        }
    }
}

/// Scores the last frame of every window, batching the forward passes.
pub fn score_windows<T: Scalar>(
    net: &CausalNet<T>,
    windows: &[Window<T>],
    config: &ScorerConfig,
) -> Result<Vec<SkeletonScore>> {
    let cfg = net.config();
    let width = cfg.input_width();
    let b = cfg.block_size;
    let frame_start = width - 2 * cfg.keypoints;
    let first_block = frame_start / b;
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(SCORE_BATCH) {
        let mut data = Vec::with_capacity(chunk.len() * width);
        for w in chunk {
            if w.coords.len() != width || w.keypoints != cfg.keypoints {
                return Err(Error::shape("window coordinates", width, w.coords.len()));
            }
            data.extend_from_slice(&w.coords);
        }
        let inputs = Array2::from_shape_vec((chunk.len(), width), data).expect("rows checked");
        let pass = net.forward_batch(inputs.view())?;
        for (w, row) in chunk.iter().zip(pass.output.rows()) {
            let row = row.as_slice().expect("standard layout");
            let mut logdens = vec![0.0; cfg.keypoints];
            for p in first_block..cfg.blocks() {
                let terms = log_density_terms(&w.coords[p * b..(p + 1) * b], net.block_view(row, p))?;
                for (d, t) in terms.into_iter().enumerate() {
                    let coord = p * b + d;
                    if coord >= frame_start {
                        logdens[(coord - frame_start) / 2] += t.as_f64();
                    }
                }
            }
            let confidences = w.last_frame_confidences().iter().map(|c| c.as_f64()).collect();
            out.push(SkeletonScore::from_terms(logdens, confidences, config.confidence_weighting));
        }
    }
    Ok(out)
}

pub fn score_skeleton<T: Scalar>(net: &CausalNet<T>, window: &Window<T>, config: &ScorerConfig) -> Result<SkeletonScore> {
    Ok(score_windows(net, std::slice::from_ref(window), config)?.remove(0))
}

/// One person's score at one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PersonFrame {
    pub frame: usize,
    /// Smoothed score when smoothing is on, otherwise equal to `raw_score`.
    pub score: f64,
    pub raw_score: f64,
    pub keypoint_logdens: Vec<f64>,
    pub confidences: Vec<f64>,
    pub bbox: BBox,
    /// Copied from the first fully conditioned frame of its run.
    pub backtracked: bool,
}

/// Per-frame scores for one person. Tracks are split at gaps; each piece of
/// at least `T` frames is scored by sliding windows, its first `T - 1` frames
/// take the score of frame `T - 1`, and smoothing runs within the piece.
pub fn score_track<T: Scalar>(net: &CausalNet<T>, track: &PoseTrack, config: &ScorerConfig) -> Result<Vec<PersonFrame>> {
    config.validate()?;
    let frames = net.config().frames;
    let parts: Vec<PoseTrack> = split_contiguous(track)
        .into_iter()
        .filter(|p| p.len() >= frames)
        .collect();
    let mut windows = Vec::new();
    for part in &parts {
        windows.extend(segment::<T>(part, frames, 1)?);
    }
    let scores = score_windows(net, &normalize_all(windows, config.normalization), config)?;

    let mut out = Vec::with_capacity(track.len());
    let mut next = 0;
    for part in &parts {
        let scored = &scores[next..next + part.len() + 1 - frames];
        next += scored.len();
        let mut run: Vec<PersonFrame> = part
            .skeletons
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let src = &scored[k.max(frames - 1) + 1 - frames];
                PersonFrame {
                    frame: s.frame_index,
                    score: src.score,
                    raw_score: src.score,
                    keypoint_logdens: src.keypoint_logdens.clone(),
                    confidences: src.confidences.clone(),
                    bbox: s.bounding_box().inflate(REGION_INFLATION),
                    backtracked: k + 1 < frames,
                }
            })
            .collect();
        if config.apply_smoothing {
            let raw: Vec<f64> = run.iter().map(|f| f.raw_score).collect();
            for (f, v) in run.iter_mut().zip(smooth(&raw, config.smoothing_sigma)) {
                f.score = v;
            }
        }
        out.extend(run);
    }
    Ok(out)
}

/// Per-frame maximum over persons. Frames nobody covers get the smallest
/// aggregated score in the video, or 0 when no frame is covered.
pub fn aggregate_frames(per_person: &[Vec<(usize, f64)>], num_frames: usize) -> Result<Vec<f64>> {
    if num_frames == 0 {
        return Err(Error::Argument("video has no frames".into()));
    }
    let mut best: Vec<Option<f64>> = vec![None; num_frames];
    for series in per_person {
        for &(frame, score) in series {
            let slot = best.get_mut(frame).ok_or_else(|| {
                Error::Argument(format!("frame {frame} outside a video of {num_frames} frames"))
            })?;
            *slot = Some(slot.map_or(score, |b: f64| b.max(score)));
        }
    }
    let floor = best.iter().flatten().copied().reduce(f64::min).unwrap_or(0.0);
    Ok(best.into_iter().map(|s| s.unwrap_or(floor)).collect())
}

pub fn decide(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s > threshold)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersonScores {
    pub person_id: i64,
    pub frames: Vec<PersonFrame>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoScores {
    pub video_id: String,
    pub frame_scores: Vec<f64>,
    pub decisions: Option<Vec<u8>>,
    pub persons: Vec<PersonScores>,
}

/// Scores every track of one video concurrently, then aggregates.
///
/// Without `num_frames` the video is taken to end at its last skeleton.
pub fn score_video<T: Scalar>(
    net: &CausalNet<T>,
    video_id: &str,
    tracks: &[&PoseTrack],
    num_frames: Option<usize>,
    config: &ScorerConfig,
) -> Result<VideoScores> {
    config.validate()?;
    let num_frames = match num_frames {
        Some(n) => n,
        None => tracks
            .iter()
            .flat_map(|t| t.skeletons.last())
            .map(|s| s.frame_index + 1)
            .max()
            .unwrap_or(0),
    };
    let persons: Vec<PersonScores> = tracks
        .par_iter()
        .map(|t| {
            Ok(PersonScores {
                person_id: t.person_id,
                frames: score_track(net, t, config)?,
            })
        })
        .collect::<Result<_>>()?;
    let series: Vec<Vec<(usize, f64)>> = persons
        .iter()
        .map(|p| p.frames.iter().map(|f| (f.frame, f.score)).collect())
        .collect();
    let frame_scores = aggregate_frames(&series, num_frames)?;
    let decisions = config.decision_threshold.map(|d| decide(&frame_scores, d));
    Ok(VideoScores {
        video_id: video_id.to_owned(),
        frame_scores,
        decisions,
        persons,
    })
}
