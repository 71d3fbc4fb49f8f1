//! Procedural walking scenes with injected, labeled anomalies.
//!
//! Every person walks for the whole clip: a hip anchor translates at
//! constant speed while sinusoidal joint angles drive a planar stick
//! figure in the COCO-18 keypoint order. Anomalies replace the gait for a
//! contiguous interval of one person.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::labels::{AnomalyTrack, LabeledVideo, Region, REGION_INFLATION};
use super::track::{Keypoint, PoseTrack, Skeleton};
use crate::error::{Error, Result};

/// Window length the generator guarantees room for (`frames >= 2 * this`).
pub const SYNTH_MIN_WINDOW: usize = 24;

const KEYPOINTS: usize = 18;
const TARGET_INTERVAL: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Topple to a horizontal pose and get back up.
    Fall,
    /// 2.5x gait frequency with doubled stride.
    Run,
    /// Translation and gait stop mid-stride.
    Freeze,
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fall" => Ok(AnomalyKind::Fall),
            "run" => Ok(AnomalyKind::Run),
            "freeze" => Ok(AnomalyKind::Freeze),
            other => Err(Error::Config(format!("unknown anomaly kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub video_id: String,
    pub people: usize,
    pub frames: usize,
    pub anomaly_kinds: Vec<AnomalyKind>,
    pub anomaly_fraction: f64,
    /// Standard deviation of additive coordinate noise, in pixels.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            video_id: "synth_000".into(),
            people: 3,
            frames: 300,
            anomaly_kinds: vec![AnomalyKind::Fall, AnomalyKind::Run],
            anomaly_fraction: 0.2,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.people < 1 {
            return Err(Error::Config("people must be >= 1".into()));
        }
        if self.frames < 2 * SYNTH_MIN_WINDOW {
            return Err(Error::Config(format!(
                "frames must be >= {}, got {}",
                2 * SYNTH_MIN_WINDOW,
                self.frames
            )));
        }
        if !(0.0..1.0).contains(&self.anomaly_fraction) {
            return Err(Error::Config(format!(
                "anomaly_fraction must be in [0, 1), got {}",
                self.anomaly_fraction
            )));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config("noise_std must be finite and non-negative".into()));
        }
        if self.anomaly_fraction > 0.0 && self.anomaly_kinds.is_empty() {
            return Err(Error::Config("anomaly_fraction > 0 needs at least one anomaly kind".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Interval {
    start: usize,
    end: usize,
    person: usize,
    kind: AnomalyKind,
}

/// Body proportions and gait parameters of one walker.
struct Walker {
    height: f64,
    ground_y: f64,
    start_x: f64,
    dir: f64,
    sagittal: f64,
    lateral: f64,
    stride: f64,
    freq: f64,
    phase0: f64,
}

impl Walker {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let height = rng.random_range(90.0..150.0);
        let sagittal: f64 = rng.random_range(0.6..1.0);
        Walker {
            height,
            ground_y: rng.random_range(300.0..650.0),
            start_x: rng.random_range(100.0..1100.0),
            dir: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            sagittal,
            lateral: (1.0 - sagittal * sagittal).sqrt(),
            stride: 0.8 * height * rng.random_range(0.9..1.1),
            freq: rng.random_range(0.028..0.038),
            phase0: rng.random_range(0.0..TAU),
        }
    }
}

#[derive(Clone, Copy)]
struct Gait {
    hip: f64,
    knee: f64,
    arm: f64,
    lean: f64,
}

const WALK: Gait = Gait {
    hip: 0.42,
    knee: 0.55,
    arm: 0.35,
    lean: 0.05,
};

const RUN: Gait = Gait {
    hip: 0.65,
    knee: 0.95,
    arm: 0.6,
    lean: 0.25,
};

/// Keypoints in body coordinates (hip center at the origin, y down).
fn pose(w: &Walker, phase: f64, gait: Gait, fall_angle: f64) -> [(f64, f64); KEYPOINTS] {
    let h = w.height;
    let fx = w.dir * w.sagittal;
    let lx = w.lateral;
    // Limb of length `len` swung by `angle` from the downward vertical.
    let limb = |angle: f64, len: f64| (angle.sin() * len * fx, angle.cos() * len);
    let add = |a: (f64, f64), b: (f64, f64)| (a.0 + b.0, a.1 + b.1);

    let hip_c = (0.0, -0.012 * h * (2.0 * phase).cos());
    let (thigh, shin) = (0.245 * h, 0.246 * h);
    let (upper_arm, forearm) = (0.186 * h, 0.146 * h);
    let (hip_w, sho_w) = (0.09 * h, 0.13 * h);

    let rh = gait.hip * phase.sin();
    let lh = gait.hip * (phase + PI).sin();
    let rk = gait.knee * 0.5 * (1.0 + phase.cos());
    let lk = gait.knee * 0.5 * (1.0 + (phase + PI).cos());
    let r_hip = add(hip_c, (-hip_w * lx, 0.0));
    let l_hip = add(hip_c, (hip_w * lx, 0.0));
    let r_knee = add(r_hip, limb(rh, thigh));
    let l_knee = add(l_hip, limb(lh, thigh));
    let r_ank = add(r_knee, limb(rh - rk, shin));
    let l_ank = add(l_knee, limb(lh - lk, shin));

    let torso = 0.30 * h;
    let up = (gait.lean.sin() * fx, -gait.lean.cos());
    let neck = add(hip_c, (up.0 * torso, up.1 * torso));
    let r_sho = add(neck, (-sho_w * lx, 0.0));
    let l_sho = add(neck, (sho_w * lx, 0.0));
    let rs = gait.arm * (phase + PI).sin();
    let ls = gait.arm * phase.sin();
    let r_elb = add(r_sho, limb(rs, upper_arm));
    let l_elb = add(l_sho, limb(ls, upper_arm));
    let r_wri = add(r_elb, limb(rs + 0.3 + 0.1 * phase.cos(), forearm));
    let l_wri = add(l_elb, limb(ls + 0.3 - 0.1 * phase.cos(), forearm));

    let head = 0.12 * h;
    let nose = add(neck, (up.0 * head + 0.04 * h * fx, up.1 * head));
    let r_eye = add(nose, (-0.02 * h * lx - 0.01 * h * fx, -0.02 * h));
    let l_eye = add(nose, (0.02 * h * lx - 0.01 * h * fx, -0.02 * h));
    let r_ear = add(nose, (-0.04 * h * lx - 0.05 * h * fx, -0.01 * h));
    let l_ear = add(nose, (0.04 * h * lx - 0.05 * h * fx, -0.01 * h));

    let mut pts = [
        nose, neck, r_sho, r_elb, r_wri, l_sho, l_elb, l_wri, r_hip, r_knee, r_ank, l_hip, l_knee,
        l_ank, r_eye, l_eye, r_ear, l_ear,
    ];
    if fall_angle != 0.0 {
        let pivot = (0.5 * (r_ank.0 + l_ank.0), 0.5 * (r_ank.1 + l_ank.1));
        let a = fall_angle * w.dir;
        let (s, c) = a.sin_cos();
        for p in pts.iter_mut() {
            let (dx, dy) = (p.0 - pivot.0, p.1 - pivot.1);
            *p = (pivot.0 + dx * c - dy * s, pivot.1 + dx * s + dy * c);
        }
    }
    pts
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Fall angle in `[0, pi/2]` at `offset` frames into an interval of `len`.
fn fall_profile(offset: usize, len: usize) -> f64 {
    let ramp = (len as f64 / 3.0).clamp(1.0, 15.0);
    let t = offset as f64;
    let down = smoothstep((t + 1.0) / ramp);
    let up = smoothstep((len as f64 - t) / ramp);
    FRAC_PI_2 * down.min(up)
}

fn schedule(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Interval> {
    let target = (config.anomaly_fraction * config.frames as f64).round() as usize;
    if target == 0 {
        return Vec::new();
    }
    let k = ((target as f64 / TARGET_INTERVAL).round() as usize).clamp(1, target);
    let base = target / k;
    let extra = target % k;
    let lengths: Vec<usize> = (0..k).map(|i| base + usize::from(i < extra)).collect();

    let free = config.frames - target;
    let weights: Vec<f64> = (0..=k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut gaps: Vec<usize> = weights
        .iter()
        .map(|w| (free as f64 * w / total).floor() as usize)
        .collect();
    let used: usize = gaps.iter().sum();
    gaps[k] += free - used;

    let mut out = Vec::with_capacity(k);
    let mut pos = 0;
    for (i, len) in lengths.into_iter().enumerate() {
        pos += gaps[i];
        let person = rng.random_range(0..config.people);
        let kind = config.anomaly_kinds[rng.random_range(0..config.anomaly_kinds.len())];
        out.push(Interval {
            start: pos,
            end: pos + len,
            person,
            kind,
        });
        pos += len;
    }
    out
}

struct Occlusion {
    keypoint: usize,
    remaining: usize,
    factor: f64,
}

/// Generates one labeled synthetic video. Deterministic in `config.seed`.
pub fn synth_generate(config: &SynthConfig) -> Result<LabeledVideo> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let intervals = schedule(config, &mut rng);

    let confidence = Beta::new(8.0, 2.0).expect("valid beta parameters");
    let unit = Normal::new(0.0, 1.0).expect("valid normal parameters");

    let mut frame_labels = vec![0u8; config.frames];
    for iv in &intervals {
        frame_labels[iv.start..iv.end].iter_mut().for_each(|l| *l = 1);
    }
    let mut anomaly_tracks: Vec<AnomalyTrack> = intervals
        .iter()
        .enumerate()
        .map(|(i, _)| AnomalyTrack {
            track_id: i,
            regions: Vec::new(),
        })
        .collect();

    let mut tracks = Vec::with_capacity(config.people);
    for person in 0..config.people {
        let walker = Walker::sample(&mut rng);
        let mut x = walker.start_x;
        let mut phase = walker.phase0;
        let mut occlusion: Option<Occlusion> = None;
        let mut skeletons = Vec::with_capacity(config.frames);

        for t in 0..config.frames {
            let active = intervals
                .iter()
                .enumerate()
                .find(|(_, iv)| iv.person == person && (iv.start..iv.end).contains(&t));
            let (gait, fall, speed, cadence) = match active.map(|(_, iv)| iv) {
                None => (WALK, 0.0, 1.0, 1.0),
                Some(iv) => match iv.kind {
                    AnomalyKind::Run => (RUN, 0.0, 5.0, 2.5),
                    AnomalyKind::Freeze => (WALK, 0.0, 0.0, 0.0),
                    AnomalyKind::Fall => (WALK, fall_profile(t - iv.start, iv.end - iv.start), 0.0, 0.0),
                },
            };

            let body = pose(&walker, phase, gait, fall);
            let anchor_y = walker.ground_y - 0.49 * walker.height;

            if occlusion.as_ref().is_none_or(|o| o.remaining == 0) {
                occlusion = if rng.random_bool(0.02) {
                    Some(Occlusion {
                        keypoint: rng.random_range(0..KEYPOINTS),
                        remaining: rng.random_range(5..=20),
                        factor: rng.random_range(0.05..0.35),
                    })
                } else {
                    None
                };
            }

            let mut keypoints = Vec::with_capacity(KEYPOINTS);
            for (k, &(bx, by)) in body.iter().enumerate() {
                let mut sigma = config.noise_std;
                let mut c: f64 = confidence.sample(&mut rng);
                if let Some(o) = occlusion.as_ref().filter(|o| o.keypoint == k) {
                    c *= o.factor;
                    sigma = 3.0 * config.noise_std + 0.02 * walker.height;
                }
                let nx: f64 = unit.sample(&mut rng);
                let ny: f64 = unit.sample(&mut rng);
                keypoints.push(Keypoint::new(
                    x + bx + sigma * nx,
                    anchor_y + by + sigma * ny,
                    c.clamp(0.0, 1.0),
                ));
            }
            if let Some(o) = occlusion.as_mut() {
                o.remaining -= 1;
            }

            let skeleton = Skeleton {
                frame_index: t,
                person_id: person as i64,
                keypoints,
            };
            if let Some((i, _)) = active {
                anomaly_tracks[i].regions.push(Region {
                    frame: t,
                    bbox: skeleton.bounding_box().inflate(REGION_INFLATION),
                });
            }
            skeletons.push(skeleton);

            phase = (phase + TAU * walker.freq * cadence) % TAU;
            x += walker.dir * walker.stride * walker.freq * speed;
        }
        tracks.push(PoseTrack {
            video_id: config.video_id.clone(),
            person_id: person as i64,
            skeletons,
        });
    }

    let mut regions: Vec<Region> = anomaly_tracks.iter().flat_map(|t| t.regions.clone()).collect();
    regions.sort_by_key(|r| r.frame);

    Ok(LabeledVideo {
        video_id: config.video_id.clone(),
        num_frames: config.frames,
        frame_labels,
        regions,
        anomaly_tracks,
        tracks,
    })
}

/// Simulates detector failures: each keypoint is, with probability
/// `fraction`, displaced by a body-scale random offset and given a low
/// confidence in `[0, 0.25)`. Returns the number of corrupted keypoints.
pub fn corrupt_keypoints(tracks: &mut [PoseTrack], fraction: f64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal parameters");
    let mut count = 0;
    for track in tracks.iter_mut() {
        for s in track.skeletons.iter_mut() {
            let b = s.bounding_box();
            let scale = 0.25 * (b.y2 - b.y1).max(b.x2 - b.x1).max(1.0);
            for k in s.keypoints.iter_mut() {
                if rng.random_bool(fraction) {
                    let dx: f64 = unit.sample(&mut rng);
                    let dy: f64 = unit.sample(&mut rng);
                    k.x += scale * dx;
                    k.y += scale * dy;
                    k.confidence = rng.random_range(0.0..0.25);
                    count += 1;
                }
            }
        }
    }
    count
}
