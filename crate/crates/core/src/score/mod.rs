//! Anomaly scoring: per-keypoint log-densities, skeleton scores, per-person
//! smoothing and frame-level aggregation.

mod output;
mod scorer;
mod smooth;

pub use output::{read_score_lines, write_score_lines, FrameLine, PersonLine, ScoreLine};
pub use scorer::{
    aggregate_frames, decide, score_skeleton, score_track, score_video, score_windows, PersonFrame, PersonScores,
    ScorerConfig, SkeletonScore, VideoScores,
};
pub use smooth::{gaussian_kernel, smooth};
