use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use seeker_core::metrics::{
    ap, auroc, pr_curve, rbdc_curve, roc_curve, tbdc_curve, CurvePoint, Detection, FrameEval, Metric,
    MetricsReport, RegionEval, DEFAULT_ALPHA, DEFAULT_BETA,
};
use seeker_core::score::{read_score_lines, ScoreLine};

use crate::io::{output_dir, read_labels, write_atomic, write_json, RUN_CONFIG};
use crate::Command;

pub const METRICS_FILE: &str = "metrics.json";

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Score file written by `score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Ground-truth label file.
    #[arg(long)]
    pub labels: PathBuf,
    /// Directory for the report, curve files and config echo.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated subset of auroc, ap, rbdc, tbdc.
    #[arg(long, value_delimiter = ',', default_value = "auroc,ap")]
    pub metrics: Vec<Metric>,
    /// IoU a detection needs to overlap a region.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Fraction of a track's regions that must be detected.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
}

fn write_curve(path: PathBuf, header: &str, points: &[CurvePoint]) -> Result<()> {
    write_atomic(&path, |w| {
        writeln!(w, "{header}")?;
        for p in points {
            writeln!(w, "{},{},{}", p.threshold, p.x, p.y)?;
        }
        Ok(())
    })
}

pub fn run(args: &EvalArgs, echo: &Command) -> Result<()> {
    let labels = read_labels(&args.labels)?;
    let file = std::fs::File::open(&args.scores).with_context(|| format!("opening {}", args.scores.display()))?;
    let lines = read_score_lines(BufReader::new(file)).with_context(|| format!("reading {}", args.scores.display()))?;
    let (mut frames, mut persons) = (Vec::new(), Vec::new());
    for l in lines {
        match l {
            ScoreLine::Frame(f) => frames.push(f),
            ScoreLine::Person(p) => persons.push(p),
        }
    }

    let wants = |m: Metric| args.metrics.contains(&m);
    for m in [Metric::Rbdc, Metric::Tbdc] {
        if !wants(m) {
            continue;
        }
        let (field, missing) = match m {
            Metric::Rbdc => ("regions", labels.videos.iter().all(|v| v.regions.is_empty())),
            _ => ("anomaly_tracks", labels.videos.iter().all(|v| v.anomaly_tracks.is_empty())),
        };
        if missing {
            bail!("{m:?} needs ground-truth `{field}` in {}", args.labels.display());
        }
        if persons.is_empty() {
            bail!(
                "{m:?} needs per-person score lines in {}; score with --per-person",
                args.scores.display()
            );
        }
    }

    let eval = FrameEval::from_lines(&labels.videos, &frames)?;
    let dir = output_dir(&args.out)?;
    let mut report = MetricsReport {
        frames: eval.labels.len(),
        anomalous_frames: eval.labels.iter().filter(|&&l| l == 1).count(),
        ..MetricsReport::default()
    };
    if wants(Metric::Auroc) {
        report.auroc = Some(auroc(&eval.scores, &eval.labels)?);
        write_curve(dir.join("roc.csv"), "threshold,fpr,tpr", &roc_curve(&eval.scores, &eval.labels)?)?;
    }
    if wants(Metric::Ap) {
        report.ap = Some(ap(&eval.scores, &eval.labels)?);
        write_curve(dir.join("pr.csv"), "threshold,recall,precision", &pr_curve(&eval.scores, &eval.labels)?)?;
    }
    if wants(Metric::Rbdc) || wants(Metric::Tbdc) {
        let detections = persons
            .iter()
            .map(|p| Detection {
                video: p.video.clone(),
                frame: p.frame,
                bbox: p.bbox,
                score: p.score,
            })
            .collect();
        let regions = RegionEval::from_labels(&labels.videos, detections)?;
        if wants(Metric::Rbdc) {
            let curve = rbdc_curve(&regions, args.alpha)?;
            report.rbdc = Some(curve.normalized_area(1.0));
            write_curve(dir.join("rbdc.csv"), "threshold,fppf,region_rate", &curve.points)?;
        }
        if wants(Metric::Tbdc) {
            let curve = tbdc_curve(&regions, args.alpha, args.beta)?;
            report.tbdc = Some(curve.normalized_area(1.0));
            write_curve(dir.join("tbdc.csv"), "threshold,fppf,track_rate", &curve.points)?;
        }
    }
    write_json(&dir.join(METRICS_FILE), &report)?;
    write_json(&dir.join(RUN_CONFIG), echo)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}
