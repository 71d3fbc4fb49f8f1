use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::track::{split_contiguous, PoseTrack};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower bound on the divisor used when standardizing a constant axis.
pub const NORM_EPSILON: f64 = 1e-6;

// Slack on the inclusive confidence boundary, so a mean of identical
// confidences equal to the threshold survives summation rounding.
const CONFIDENCE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowOrigin {
    pub video_id: String,
    pub person_id: i64,
    pub last_frame: usize,
}

/// `frames` consecutive skeletons flattened time-major, keypoint-minor,
/// with `(x, y)` innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct Window<T> {
    pub frames: usize,
    pub keypoints: usize,
    pub coords: Vec<T>,
    pub confidences: Vec<T>,
    pub norm_mean: [T; 2],
    pub norm_std: [T; 2],
    pub origin: WindowOrigin,
}

impl<T: Scalar> Window<T> {
    /// Builds an unnormalized window from `frames` contiguous skeletons.
    pub fn from_skeletons(track: &PoseTrack, start: usize, frames: usize) -> Self {
        let skeletons = &track.skeletons[start..start + frames];
        let keypoints = skeletons[0].keypoints.len();
        let mut coords = Vec::with_capacity(frames * keypoints * 2);
        let mut confidences = Vec::with_capacity(frames * keypoints);
        for s in skeletons {
            for k in &s.keypoints {
                coords.push(T::of(k.x));
                coords.push(T::of(k.y));
                confidences.push(T::of(k.confidence));
            }
        }
        Window {
            frames,
            keypoints,
            coords,
            confidences,
            norm_mean: [T::zero(); 2],
            norm_std: [T::one(); 2],
            origin: WindowOrigin {
                video_id: track.video_id.clone(),
                person_id: track.person_id,
                last_frame: skeletons[frames - 1].frame_index,
            },
        }
    }

    pub fn mean_confidence(&self) -> f64 {
        if self.confidences.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.confidences.iter().map(|c| c.as_f64()).sum();
        sum / self.confidences.len() as f64
    }

    /// Coordinates of the final frame, `2 * keypoints` values.
    pub fn last_frame_coords(&self) -> &[T] {
        let width = self.keypoints * 2;
        &self.coords[self.coords.len() - width..]
    }

    pub fn last_frame_confidences(&self) -> &[T] {
        &self.confidences[self.confidences.len() - self.keypoints..]
    }
}

/// Windows covering frames `[i, i + frames)` for `i = 0, stride, ...`.
///
/// Gaps split the track first; contiguous pieces shorter than `frames`
/// contribute nothing.
pub fn segment<T: Scalar>(track: &PoseTrack, frames: usize, stride: usize) -> Result<Vec<Window<T>>> {
    if frames < 2 {
        return Err(Error::Config(format!("window length must be >= 2, got {frames}")));
    }
    if stride < 1 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    let mut out = Vec::new();
    for part in split_contiguous(track) {
        if part.len() < frames {
            continue;
        }
        let mut start = 0;
        while start + frames <= part.len() {
            out.push(Window::from_skeletons(&part, start, frames));
            start += stride;
        }
    }
    Ok(out)
}

pub fn segment_all<T: Scalar>(tracks: &[PoseTrack], frames: usize, stride: usize) -> Result<Vec<Window<T>>> {
    let mut out = Vec::new();
    for t in tracks {
        out.extend(segment(t, frames, stride)?);
    }
    Ok(out)
}

/// Per-axis location and scale used for standardization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormStats<T> {
    pub mean: [T; 2],
    pub std: [T; 2],
}

impl<T: Scalar> NormStats<T> {
    /// Population statistics pooled over every keypoint in `windows`.
    pub fn pooled<'a, I>(windows: I) -> Self
    where
        I: IntoIterator<Item = &'a Window<T>> + Clone,
        T: 'a,
    {
        let mut sum = [T::zero(); 2];
        let mut count = 0usize;
        for w in windows.clone() {
            for xy in w.coords.chunks_exact(2) {
                sum[0] += xy[0];
                sum[1] += xy[1];
            }
            count += w.coords.len() / 2;
        }
        if count == 0 {
            return NormStats {
                mean: [T::zero(); 2],
                std: [T::one(); 2],
            };
        }
        let n = T::of(count as f64);
        let mean = [sum[0] / n, sum[1] / n];
        let mut sq = [T::zero(); 2];
        for w in windows {
            for xy in w.coords.chunks_exact(2) {
                let dx = xy[0] - mean[0];
                let dy = xy[1] - mean[1];
                sq[0] += dx * dx;
                sq[1] += dy * dy;
            }
        }
        NormStats {
            mean,
            std: [(sq[0] / n).sqrt(), (sq[1] / n).sqrt()],
        }
    }

    fn apply(&self, window: &mut Window<T>) {
        let eps = T::of(NORM_EPSILON);
        let div = [self.std[0].max(eps), self.std[1].max(eps)];
        for xy in window.coords.chunks_exact_mut(2) {
            xy[0] = (xy[0] - self.mean[0]) / div[0];
            xy[1] = (xy[1] - self.mean[1]) / div[1];
        }
        window.norm_mean = self.mean;
        window.norm_std = self.std;
    }
}

/// Standardizes x and y separately with statistics pooled over the window.
pub fn normalize<T: Scalar>(mut window: Window<T>) -> Window<T> {
    let stats = NormStats::pooled(std::iter::once(&window));
    stats.apply(&mut window);
    window
}

/// Which windows share normalization statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScope {
    /// Each window on its own.
    #[default]
    Window,
    /// All windows of the same `(video, person)`.
    Track,
}

pub fn normalize_all<T: Scalar>(windows: Vec<Window<T>>, scope: NormScope) -> Vec<Window<T>> {
    match scope {
        NormScope::Window => windows.into_iter().map(normalize).collect(),
        NormScope::Track => {
            let mut groups: BTreeMap<(String, i64), Vec<usize>> = BTreeMap::new();
            for (i, w) in windows.iter().enumerate() {
                groups
                    .entry((w.origin.video_id.clone(), w.origin.person_id))
                    .or_default()
                    .push(i);
            }
            let mut stats = vec![None; windows.len()];
            for idx in groups.values() {
                let s = NormStats::pooled(idx.iter().map(|&i| &windows[i]));
                for &i in idx {
                    stats[i] = Some(s);
                }
            }
            windows
                .into_iter()
                .zip(stats)
                .map(|(mut w, s)| {
                    s.expect("every window belongs to a group").apply(&mut w);
                    w
                })
                .collect()
        }
    }
}

/// Keeps windows whose mean keypoint confidence is at least `threshold`.
pub fn filter_confident<T: Scalar>(windows: Vec<Window<T>>, threshold: f64) -> Vec<Window<T>> {
    windows
        .into_iter()
        .filter(|w| w.mean_confidence() + CONFIDENCE_SLACK >= threshold)
        .collect()
}
