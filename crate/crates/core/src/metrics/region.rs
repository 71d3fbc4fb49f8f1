use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::data::{BBox, VideoLabels};
use crate::error::{Error, Result};

/// A scored box proposed as anomalous.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub video: String,
    pub frame: usize,
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GtRegion {
    pub video: String,
    pub frame: usize,
    pub bbox: BBox,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionEval {
    pub detections: Vec<Detection>,
    /// Ground truth for the region criterion.
    pub regions: Vec<GtRegion>,
    /// Ground truth for the track criterion, each frame-ordered.
    pub tracks: Vec<Vec<GtRegion>>,
    /// Frames evaluated, the denominator of false positives per frame.
    pub total_frames: usize,
}

impl RegionEval {
    /// Detections outside the labeled videos or frame ranges are rejected.
    pub fn from_labels(labels: &[VideoLabels], detections: Vec<Detection>) -> Result<Self> {
        let lengths: HashMap<&str, usize> = labels.iter().map(|v| (v.video_id.as_str(), v.num_frames)).collect();
        for d in &detections {
            match lengths.get(d.video.as_str()) {
                Some(&n) if d.frame < n => {}
                Some(_) => {
                    return Err(Error::Argument(format!(
                        "detection at frame {} beyond video {:?}",
                        d.frame, d.video
                    )))
                }
                None => return Err(Error::Argument(format!("detection in unlabeled video {:?}", d.video))),
            }
            if d.score.is_nan() {
                return Err(Error::Argument("NaN detection score".into()));
            }
        }
        let gt = |v: &VideoLabels, r: &crate::data::Region| GtRegion {
            video: v.video_id.clone(),
            frame: r.frame,
            bbox: r.bbox,
        };
        Ok(Self {
            detections,
            regions: labels.iter().flat_map(|v| v.regions.iter().map(move |r| gt(v, r))).collect(),
            tracks: labels
                .iter()
                .flat_map(|v| v.anomaly_tracks.iter().map(move |t| t.regions.iter().map(|r| gt(v, r)).collect()))
                .collect(),
            total_frames: labels.iter().map(|v| v.num_frames).sum(),
        })
    }
}

/// Detection rate against false positives per frame, one point per
/// detection-score tie group, starting at `(0, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionCurve {
    pub points: Vec<super::CurvePoint>,
}

impl DetectionCurve {
    /// Trapezoidal area for false positives per frame in `[0, max_fppf]`,
    /// holding the last rate out to `max_fppf`, divided by `max_fppf`.
    pub fn normalized_area(&self, max_fppf: f64) -> f64 {
        let mut area = 0.0;
        for pair in self.points.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.x >= max_fppf {
                break;
            }
            if b.x <= a.x {
                continue;
            }
            let x1 = b.x.min(max_fppf);
            let y1 = a.y + (b.y - a.y) * (x1 - a.x) / (b.x - a.x);
            area += 0.5 * (a.y + y1) * (x1 - a.x);
        }
        if let Some(last) = self.points.last() {
            if last.x < max_fppf {
                area += last.y * (max_fppf - last.x);
            }
        }
        area / max_fppf
    }
}

/// Greedy one-to-one matching by descending IoU; returns matched ground-truth
/// indices.
fn match_frame(dets: &[usize], gts: &[usize], det_box: &[BBox], gt_box: &[BBox], alpha: f64) -> Vec<usize> {
    let mut pairs = Vec::new();
    for &d in dets {
        for &g in gts {
            let iou = det_box[d].iou(&gt_box[g]);
            if iou >= alpha {
                pairs.push((iou, d, g));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_d, mut used_g) = (Vec::new(), Vec::new());
    for (_, d, g) in pairs {
        if !used_d.contains(&d) && !used_g.contains(&g) {
            used_d.push(d);
            used_g.push(g);
        }
    }
    used_g
}

#[derive(Default)]
struct FrameState {
    active: Vec<usize>,
    gts: Vec<usize>,
    matched: Vec<usize>,
}

/// Sweeps the detection threshold downward. `on_match(gt, matched)` reports
/// every change in a ground-truth region's match state and `rate()` reads
/// the current detection rate.
fn sweep(
    detections: &[Detection],
    gts: &[GtRegion],
    total_frames: usize,
    alpha: f64,
    mut on_match: impl FnMut(usize, bool),
    rate: impl Fn() -> f64,
) -> Result<DetectionCurve> {
    if total_frames == 0 {
        return Err(Error::Argument("no frames to evaluate".into()));
    }
    let det_box: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
    let gt_box: Vec<BBox> = gts.iter().map(|g| g.bbox).collect();
    let mut frames: BTreeMap<(&str, usize), FrameState> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        frames.entry((g.video.as_str(), g.frame)).or_default().gts.push(i);
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score).then(a.cmp(&b)));

    let mut fp = 0usize;
    let mut points = vec![super::CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    let mut i = 0;
    while i < order.len() {
        let threshold = detections[order[i]].score;
        while i < order.len() && detections[order[i]].score == threshold {
            let d = &detections[order[i]];
            let state = frames.entry((d.video.as_str(), d.frame)).or_default();
            let before = state.active.len() - state.matched.len();
            state.active.push(order[i]);
            let matched = match_frame(&state.active, &state.gts, &det_box, &gt_box, alpha);
            fp = fp + (state.active.len() - matched.len()) - before;
            for &g in &state.matched {
                if !matched.contains(&g) {
                    on_match(g, false);
                }
            }
            for &g in &matched {
                if !state.matched.contains(&g) {
                    on_match(g, true);
                }
            }
            state.matched = matched;
            i += 1;
        }
        points.push(super::CurvePoint {
            threshold,
            x: fp as f64 / total_frames as f64,
            y: rate(),
        });
    }
    Ok(DetectionCurve { points })
}

pub fn rbdc_curve(eval: &RegionEval, alpha: f64) -> Result<DetectionCurve> {
    if eval.regions.is_empty() {
        return Err(Error::UndefinedMetric("RBDC needs ground-truth regions".into()));
    }
    let total = eval.regions.len() as f64;
    let matched = std::cell::Cell::new(0usize);
    sweep(
        &eval.detections,
        &eval.regions,
        eval.total_frames,
        alpha,
        |_, on| matched.set(if on { matched.get() + 1 } else { matched.get() - 1 }),
        || matched.get() as f64 / total,
    )
}

/// Region-based detection criterion: area under the region detection rate
/// for false positives per frame in `[0, 1]`.
pub fn rbdc(eval: &RegionEval, alpha: f64) -> Result<f64> {
    Ok(rbdc_curve(eval, alpha)?.normalized_area(1.0))
}

pub fn tbdc_curve(eval: &RegionEval, alpha: f64, beta: f64) -> Result<DetectionCurve> {
    if eval.tracks.is_empty() {
        return Err(Error::UndefinedMetric("TBDC needs ground-truth anomaly tracks".into()));
    }
    let mut gts = Vec::new();
    let mut owner = Vec::new();
    for (t, regions) in eval.tracks.iter().enumerate() {
        gts.extend(regions.iter().cloned());
        owner.extend(std::iter::repeat_n(t, regions.len()));
    }
    let lens: Vec<usize> = eval.tracks.iter().map(Vec::len).collect();
    let counts = std::cell::RefCell::new(vec![0usize; lens.len()]);
    let detected = std::cell::Cell::new(0usize);
    let covered = |t: usize, c: usize| lens[t] > 0 && c as f64 / lens[t] as f64 >= beta;
    let total = lens.len() as f64;
    sweep(
        &eval.detections,
        &gts,
        eval.total_frames,
        alpha,
        |g, on| {
            let t = owner[g];
            let mut counts = counts.borrow_mut();
            let was = covered(t, counts[t]);
            counts[t] = if on { counts[t] + 1 } else { counts[t] - 1 };
            let now = covered(t, counts[t]);
            if now != was {
                detected.set(if now { detected.get() + 1 } else { detected.get() - 1 });
            }
        },
        || detected.get() as f64 / total,
    )
}

/// Track-based detection criterion: a track counts once at least a `beta`
/// fraction of its regions are matched.
pub fn tbdc(eval: &RegionEval, alpha: f64, beta: f64) -> Result<f64> {
    Ok(tbdc_curve(eval, alpha, beta)?.normalized_area(1.0))
}
