//! Skeleton data: track ingestion, windowing, label files and the
//! synthetic walking-scene generator.

mod labels;
mod synth;
mod track;
mod window;

pub use labels::{AnomalyTrack, BBox, LabelFile, LabeledVideo, Region, VideoLabels, REGION_INFLATION};
pub use synth::{corrupt_keypoints, synth_generate, AnomalyKind, SynthConfig, SYNTH_MIN_WINDOW};
pub use track::{
    parse_tracks, split_contiguous, write_tracks, Keypoint, PoseTrack, Skeleton, TrackFile,
    DEFAULT_KEYPOINTS,
};
pub use window::{
    filter_confident, normalize, normalize_all, segment, segment_all, NormScope, NormStats, Window,
    WindowOrigin, NORM_EPSILON,
};
