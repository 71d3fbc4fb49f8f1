use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use seeker_core::data::{synth_generate, write_tracks, AnomalyKind, LabelFile, SynthConfig, TrackFile, DEFAULT_KEYPOINTS};

use crate::io::{output_dir, write_atomic, write_json, RUN_CONFIG};
use crate::Command;

pub const TRACKS_FILE: &str = "tracks.jsonl";
pub const LABELS_FILE: &str = "labels.json";

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Directory for the track file, label file and config echo.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub videos: usize,
    /// People walking in each video.
    #[arg(long, default_value_t = 3)]
    pub people: usize,
    #[arg(long, default_value_t = 300)]
    pub frames: usize,
    /// Comma-separated subset of fall, run, freeze.
    #[arg(long, value_delimiter = ',', default_value = "fall,run")]
    pub anomaly_kinds: Vec<AnomalyKind>,
    /// Share of frames inside an anomaly interval.
    #[arg(long, default_value_t = 0.2)]
    pub anomaly_fraction: f64,
    /// Standard deviation of coordinate noise in pixels.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Video ids are `<prefix>_<index>`.
    #[arg(long, default_value = "synth")]
    pub prefix: String,
}

pub fn run(args: &SynthArgs, echo: &Command) -> Result<()> {
    let mut seeds = ChaCha8Rng::seed_from_u64(args.seed);
    let mut tracks = Vec::new();
    let mut labels = LabelFile::default();
    for i in 0..args.videos {
        let video = synth_generate(&SynthConfig {
            video_id: format!("{}_{i:03}", args.prefix),
            people: args.people,
            frames: args.frames,
            anomaly_kinds: args.anomaly_kinds.clone(),
            anomaly_fraction: args.anomaly_fraction,
            noise_std: args.noise,
            seed: seeds.random(),
        })?;
        labels.videos.push(video.labels());
        tracks.extend(video.tracks);
    }
    let dir = output_dir(&args.out)?;
    let file = TrackFile {
        n_keypoints: DEFAULT_KEYPOINTS,
        tracks,
    };
    write_atomic(&dir.join(TRACKS_FILE), |w| Ok(write_tracks(w, &file)?))?;
    write_atomic(&dir.join(LABELS_FILE), |w| Ok(labels.write(w)?))?;
    write_json(&dir.join(RUN_CONFIG), echo)?;
    eprintln!("wrote {} videos to {}", args.videos, dir.display());
    Ok(())
}
