#![allow(dead_code)]

use std::time::Instant;

use seeker_core::data::{corrupt_keypoints, synth_generate, AnomalyKind, LabeledVideo, PoseTrack, SynthConfig};
use seeker_core::density::CovarianceMode;
use seeker_core::metrics::{ap, auroc};
use seeker_core::net::{CausalNet, NetConfig};
use seeker_core::score::{score_video, ScorerConfig};
use seeker_core::train::{prepare_windows, train, TrainConfig};
use seeker_core::Scalar;

/// Synthetic end-to-end setup: normal walking for training, a held-out set
/// with injected falls and runs for scoring.
#[derive(Clone, Debug)]
pub struct Bench {
    pub train_videos: usize,
    pub test_videos: usize,
    pub people: usize,
    pub frames: usize,
    pub anomaly_fraction: f64,
    pub train: TrainConfig,
    pub scorer: ScorerConfig,
    /// Fraction of test keypoints replaced by low-confidence detector errors.
    pub corrupt: Option<f64>,
    pub seed: u64,
}

impl Default for Bench {
    fn default() -> Self {
        Self {
            train_videos: 40,
            test_videos: 10,
            people: 5,
            frames: 200,
            anomaly_fraction: 0.2,
            train: TrainConfig {
                epochs: 30,
                window_stride: 4,
                net: NetConfig {
                    hidden_layers: 2,
                    expansion_factor: 1,
                    covariance: CovarianceMode::Diagonal,
                    ..NetConfig::default()
                },
                ..TrainConfig::default()
            },
            scorer: ScorerConfig::default(),
            corrupt: None,
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub auroc: f64,
    pub ap: f64,
    pub train_secs: f64,
    pub train_windows: usize,
    pub loss_curve: Vec<f64>,
}

impl Bench {
    pub fn train_tracks(&self) -> Vec<PoseTrack> {
        (0..self.train_videos)
            .flat_map(|i| {
                synth_generate(&SynthConfig {
                    video_id: format!("train_{i:03}"),
                    people: self.people,
                    frames: self.frames,
                    anomaly_fraction: 0.0,
                    seed: self.seed + i as u64,
                    ..SynthConfig::default()
                })
                .unwrap()
                .tracks
            })
            .collect()
    }

    pub fn test_videos(&self) -> Vec<LabeledVideo> {
        (0..self.test_videos)
            .map(|i| {
                let mut v = synth_generate(&SynthConfig {
                    video_id: format!("test_{i:03}"),
                    people: self.people.min(3),
                    frames: self.frames.max(300),
                    anomaly_kinds: vec![AnomalyKind::Fall, AnomalyKind::Run],
                    anomaly_fraction: self.anomaly_fraction,
                    seed: self.seed + 10_000 + i as u64,
                    ..SynthConfig::default()
                })
                .unwrap();
                if let Some(f) = self.corrupt {
                    corrupt_keypoints(&mut v.tracks, f, self.seed + 20_000 + i as u64);
                }
                v
            })
            .collect()
    }

    pub fn train_net<T: Scalar>(&self) -> (CausalNet<T>, BenchResult) {
        let tracks = self.train_tracks();
        let windows = prepare_windows::<T>(&tracks, &self.train).unwrap();
        let train_windows = windows.len();
        let start = Instant::now();
        let outcome = train(windows, &self.train).unwrap();
        let result = BenchResult {
            auroc: f64::NAN,
            ap: f64::NAN,
            train_secs: start.elapsed().as_secs_f64(),
            train_windows,
            loss_curve: outcome.loss_curve,
        };
        (outcome.net, result)
    }

    /// Frame scores and labels over the held-out set.
    pub fn score<T: Scalar>(&self, net: &CausalNet<T>, scorer: &ScorerConfig) -> (Vec<f64>, Vec<u8>) {
        let scorer = ScorerConfig {
            normalization: self.train.normalization,
            ..scorer.clone()
        };
        let (mut scores, mut labels) = (Vec::new(), Vec::new());
        for v in self.test_videos() {
            let refs: Vec<&PoseTrack> = v.tracks.iter().collect();
            let s = score_video(net, &v.video_id, &refs, Some(v.num_frames), &scorer).unwrap();
            scores.extend(s.frame_scores);
            labels.extend(v.frame_labels);
        }
        (scores, labels)
    }

    pub fn evaluate<T: Scalar>(&self, net: &CausalNet<T>, scorer: &ScorerConfig) -> (f64, f64) {
        let (s, l) = self.score(net, scorer);
        (auroc(&s, &l).unwrap(), ap(&s, &l).unwrap())
    }

    pub fn run<T: Scalar>(&self) -> BenchResult {
        let (net, mut result) = self.train_net::<T>();
        (result.auroc, result.ap) = self.evaluate(&net, &self.scorer);
        result
    }
}
