use std::collections::HashMap;

use serde::Serialize;

use crate::data::VideoLabels;
use crate::error::{Error, Result};
use crate::score::FrameLine;

/// Scores and labels for every evaluated frame, all videos concatenated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameEval {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    /// `(video, first index, frame count)` in concatenation order.
    pub videos: Vec<(String, usize, usize)>,
}

impl FrameEval {
    /// Pairs every labeled frame with its score line. Missing or duplicate
    /// frame lines are errors; scored videos absent from `labels` are ignored.
    pub fn from_lines(labels: &[VideoLabels], lines: &[FrameLine]) -> Result<Self> {
        let mut by_key: HashMap<(&str, usize), f64> = HashMap::with_capacity(lines.len());
        for l in lines {
            if by_key.insert((l.video.as_str(), l.frame), l.score).is_some() {
                return Err(Error::Argument(format!(
                    "duplicate score for video {:?} frame {}",
                    l.video, l.frame
                )));
            }
        }
        let mut out = FrameEval::default();
        for v in labels {
            let start = out.scores.len();
            for (frame, &label) in v.frame_labels.iter().enumerate() {
                let score = by_key.get(&(v.video_id.as_str(), frame)).ok_or_else(|| {
                    Error::Argument(format!("no score for video {:?} frame {frame}", v.video_id))
                })?;
                out.scores.push(*score);
                out.labels.push(label);
            }
            out.videos.push((v.video_id.clone(), start, v.num_frames));
        }
        Ok(out)
    }
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::shape("labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("NaN score".into()));
    }
    let mut pos = 0;
    for &l in labels {
        match l {
            0 => {}
            1 => pos += 1,
            other => return Err(Error::Argument(format!("label {other} is not binary"))),
        }
    }
    Ok((pos, labels.len() - pos))
}

/// Descending-score tie groups as `(score, positives, negatives)`.
fn tie_groups(scores: &[f64], labels: &[u8]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for i in order {
        let s = scores[i];
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if labels[i] == 1 {
                    g.1 += 1
                } else {
                    g.2 += 1
                }
            }
            _ => groups.push((s, usize::from(labels[i] == 1), usize::from(labels[i] == 0))),
        }
    }
    groups
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUROC needs both positive and negative frames".into()));
    }
    // Twice the Mann-Whitney U, kept integral.
    let mut twice_u: u128 = 0;
    let mut neg_below = neg as u128;
    for (_, p, n) in tie_groups(scores, labels) {
        neg_below -= n as u128;
        twice_u += 2 * p as u128 * neg_below + p as u128 * n as u128;
    }
    Ok((twice_u as f64 / 2.0) / (pos as f64 * neg as f64))
}

/// Step-wise average precision over descending-score tie groups.
pub fn ap(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    if pos == 0 {
        return Err(Error::UndefinedMetric("AP needs at least one positive frame".into()));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut total = 0.0;
    for (_, p, n) in tie_groups(scores, labels) {
        tp += p;
        fp += n;
        if p > 0 {
            total += (p as f64 / pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// `(false positive rate, true positive rate)` after each tie group, starting
/// from `(0, 0)` at an infinite threshold.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<CurvePoint>> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("ROC needs both classes".into()));
    }
    let mut out = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (s, p, n) in tie_groups(scores, labels) {
        tp += p;
        fp += n;
        out.push(CurvePoint {
            threshold: s,
            x: fp as f64 / neg as f64,
            y: tp as f64 / pos as f64,
        });
    }
    Ok(out)
}

/// `(recall, precision)` after each tie group.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<CurvePoint>> {
    let (pos, _) = check(scores, labels)?;
    if pos == 0 {
        return Err(Error::UndefinedMetric("PR curve needs a positive frame".into()));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    Ok(tie_groups(scores, labels)
        .into_iter()
        .map(|(s, p, n)| {
            tp += p;
            fp += n;
            CurvePoint {
                threshold: s,
                x: tp as f64 / pos as f64,
                y: tp as f64 / (tp + fp) as f64,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise_auroc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut u = 0.0;
        let (mut p, mut n) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            if li == 1 {
                p += 1.0;
            } else {
                n += 1.0;
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj == 0 {
                    if scores[i] > scores[j] {
                        u += 1.0;
                    } else if scores[i] == scores[j] {
                        u += 0.5;
                    }
                }
            }
        }
        u / (p * n)
    }

    fn threshold_ap(scores: &[f64], labels: &[u8]) -> f64 {
        let pos = labels.iter().filter(|&&l| l == 1).count();
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let mut prev_tp = 0;
        let mut total = 0.0;
        for t in thresholds {
            let tp = (0..scores.len()).filter(|&i| scores[i] >= t && labels[i] == 1).count();
            let fp = (0..scores.len()).filter(|&i| scores[i] >= t && labels[i] == 0).count();
            if tp > prev_tp {
                total += ((tp - prev_tp) as f64 / pos as f64) * (tp as f64 / (tp + fp) as f64);
            }
            prev_tp = tp;
        }
        total
    }

    #[test]
    fn worked_auroc() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [0, 0, 1, 1];
        assert_eq!(auroc(&s, &l).unwrap(), 0.75);
        assert_eq!(pairwise_auroc(&s, &l), 0.75);
    }

    #[test]
    fn separated_and_tied() {
        assert_eq!(auroc(&[0.1, 0.2, 0.9, 0.8], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 5], &[0, 1, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(ap(&[0.1, 0.2, 0.9, 0.8], &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn worked_ap() {
        let got = ap(&[3.0, 2.0, 1.0], &[1, 0, 1]).unwrap();
        assert!((got - 5.0 / 6.0).abs() <= f64::EPSILON);
        assert_eq!(got, 0.5 + 0.5 * (2.0 / 3.0));
    }

    #[test]
    fn last_ranked_positive() {
        for m in 1..20 {
            let scores: Vec<f64> = (0..m).map(|i| (m - i) as f64).collect();
            let mut labels = vec![0u8; m];
            labels[m - 1] = 1;
            assert_eq!(ap(&scores, &labels).unwrap(), 1.0 / m as f64);
        }
    }

    #[test]
    fn undefined_cases() {
        assert!(matches!(auroc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(ap(&[0.1, 0.2], &[0, 0]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(auroc(&[0.1, f64::NAN], &[0, 1]), Err(Error::Argument(_))));
        assert!(matches!(ap(&[0.1], &[2]), Err(Error::Argument(_))));
        assert!(matches!(auroc(&[0.1], &[0, 1]), Err(Error::Shape { .. })));
    }

    #[test]
    fn curves_end_at_full_recall() {
        let s = [0.1, 0.4, 0.35, 0.8, 0.4];
        let l = [0, 0, 1, 1, 1];
        let roc = roc_curve(&s, &l).unwrap();
        assert_eq!(roc[0].x, 0.0);
        assert_eq!((roc.last().unwrap().x, roc.last().unwrap().y), (1.0, 1.0));
        let pr = pr_curve(&s, &l).unwrap();
        assert_eq!(pr.last().unwrap().x, 1.0);
        assert_eq!(pr.len(), 4);
    }

    #[test]
    fn frame_eval_pairs_lines() {
        let labels = vec![VideoLabels {
            video_id: "a".into(),
            num_frames: 2,
            frame_labels: vec![0, 1],
            regions: vec![],
            anomaly_tracks: vec![],
        }];
        let line = |f, s| FrameLine {
            video: "a".into(),
            frame: f,
            score: s,
            decision: None,
        };
        let e = FrameEval::from_lines(&labels, &[line(1, 2.0), line(0, 1.0), FrameLine { video: "b".into(), ..line(0, 9.0) }]).unwrap();
        assert_eq!(e.scores, vec![1.0, 2.0]);
        assert_eq!(e.labels, vec![0, 1]);
        assert!(FrameEval::from_lines(&labels, &[line(0, 1.0)]).is_err());
        assert!(FrameEval::from_lines(&labels, &[line(0, 1.0), line(0, 1.0), line(1, 1.0)]).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..20).prop_map(|v| v as f64 / 4.0), n),
                prop::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn auroc_equals_pairwise((s, l) in instance()) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            prop_assert_eq!(auroc(&s, &l).unwrap(), pairwise_auroc(&s, &l));
        }

        #[test]
        fn ap_equals_threshold_enumeration((s, l) in instance()) {
            prop_assume!(l.contains(&1));
            prop_assert_eq!(ap(&s, &l).unwrap(), threshold_ap(&s, &l));
        }

        #[test]
        fn rank_invariance((s, l) in instance()) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let t: Vec<f64> = s.iter().map(|v| (v * 3.0).exp() - 7.0).collect();
            prop_assert_eq!(auroc(&s, &l).unwrap(), auroc(&t, &l).unwrap());
            prop_assert_eq!(ap(&s, &l).unwrap(), ap(&t, &l).unwrap());
        }

        #[test]
        fn negated_scores_complement(l in prop::collection::vec(0u8..2, 2..100)) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let s: Vec<f64> = (0..l.len()).map(|i| ((i * 7919) % 1009) as f64).collect();
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let total = auroc(&s, &l).unwrap() + auroc(&neg, &l).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
