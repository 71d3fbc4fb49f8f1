use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seeker_core::data::{parse_tracks, LabelFile, DEFAULT_KEYPOINTS};
use seeker_core::density::CovarianceMode;
use seeker_core::score::{read_score_lines, ScoreLine};
use seeker_core::train::{load_checkpoint, TrainConfig};

fn seeker(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seeker"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn seeker")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = seeker(args, cwd);
    assert!(
        out.status.success(),
        "seeker {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL_NET: [&str; 8] = ["--frames", "8", "--hidden-layers", "1", "--expansion", "1", "--stride", "4"];

/// Training data with no anomalies plus a labeled test set.
fn fixtures(dir: &Path) {
    ok(&["synth", "--out", "train", "--videos", "2", "--anomaly-fraction", "0", "--seed", "1"], dir);
    ok(&["synth", "--out", "test", "--videos", "2", "--seed", "2"], dir);
}

fn train_small(dir: &Path, out: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["train", "--tracks", "train/tracks.jsonl", "--out", out, "--epochs", "2"];
    args.extend(SMALL_NET);
    args.extend(extra);
    ok(&args, dir);
    dir.join(out).join("model.skrm")
}

fn score_lines(path: &Path) -> Vec<ScoreLine> {
    read_score_lines(fs::read(path).unwrap().as_slice()).unwrap()
}

#[test]
fn synth_is_deterministic_and_parses() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "--out", "a", "--seed", "7", "--videos", "2"], d);
    ok(&["synth", "--out", "b", "--seed", "7", "--videos", "2"], d);
    for f in ["tracks.jsonl", "labels.json"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap());
    }
    let tracks = parse_tracks(fs::read(d.join("a/tracks.jsonl")).unwrap().as_slice(), DEFAULT_KEYPOINTS).unwrap();
    assert_eq!(tracks.tracks.len(), 6);
    let labels = LabelFile::read(fs::read(d.join("a/labels.json")).unwrap().as_slice()).unwrap();
    assert_eq!(labels.videos.len(), 2);
    assert_ne!(labels.videos[0].frame_labels, labels.videos[1].frame_labels);
}

#[test]
fn synth_without_anomalies_labels_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["synth", "--out", "n", "--anomaly-fraction", "0"], tmp.path());
    let labels = LabelFile::read(fs::read(tmp.path().join("n/labels.json")).unwrap().as_slice()).unwrap();
    assert!(labels.videos[0].frame_labels.iter().all(|&l| l == 0));
    assert!(labels.videos[0].regions.is_empty());
}

#[test]
fn synth_rejects_invalid_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = seeker(&["synth", "--out", "x", "--frames", "10"], tmp.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("frames"));
}

#[test]
fn train_echoes_defaults_and_records_covariance() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixtures(d);
    for (flag, mode) in [
        ("identity", CovarianceMode::Identity),
        ("diag", CovarianceMode::Diagonal),
        ("full", CovarianceMode::Full),
    ] {
        let out = format!("m_{flag}");
        let path = train_small(d, &out, &["--covariance", flag]);
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.net.covariance, mode);
        assert_eq!(ck.loss_curve.len(), 2);
        assert!(d.join(&out).join("loss_curve.csv").exists());
    }
    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("m_diag/run_config.json")).unwrap()).unwrap();
    let defaults = TrainConfig::default();
    assert_eq!(echo["command"], "train");
    assert_eq!(echo["lr"], defaults.learning_rate);
    assert_eq!(echo["batch_size"], defaults.batch_size);
    assert_eq!(echo["confidence_threshold"], defaults.confidence_filter_threshold);
    assert_eq!(echo["block_size"], 2);
    assert_eq!(echo["normalization"], "window");
    let ck = load_checkpoint(&d.join("m_diag/model.skrm")).unwrap();
    let train = ck.train.unwrap();
    assert_eq!(train.seed, defaults.seed);
    assert_eq!(train.net.keypoints, 18);
}

#[test]
fn help_lists_default_hyperparameters() {
    let tmp = tempfile::tempdir().unwrap();
    let help = String::from_utf8(ok(&["train", "--help"], tmp.path()).stdout).unwrap();
    for needle in ["[default: 24]", "[default: 3]", "[default: 4]", "[default: 0.001]", "[default: 256]", "[default: 0.4]"] {
        assert!(help.contains(needle), "missing {needle} in\n{help}");
    }
    let help = String::from_utf8(ok(&["score", "--help"], tmp.path()).stdout).unwrap();
    assert!(help.contains("[default: 10]"));
}

#[test]
fn training_is_byte_deterministic_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixtures(d);
    let a = fs::read(train_small(d, "a", &["--seed", "5"])).unwrap();
    let b = fs::read(train_small(d, "b", &["--seed", "5"])).unwrap();
    assert_eq!(a, b);
    let c = fs::read(train_small(d, "c", &["--seed", "6"])).unwrap();
    assert_ne!(a, c);

    let threads = Command::new(env!("CARGO_BIN_EXE_seeker"))
        .args(["--config", "a/run_config.json"])
        .env("SEEKER_THREADS", "1")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(threads.status.success(), "{}", stderr(&threads));
    assert_eq!(fs::read(d.join("a/model.skrm")).unwrap(), a);
}

#[test]
fn score_and_eval_round_trip_their_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixtures(d);
    train_small(d, "m", &[]);
    ok(
        &["score", "--model", "m/model.skrm", "--tracks", "test/tracks.jsonl", "--labels", "test/labels.json", "--out", "s", "--per-person", "--threshold", "0"],
        d,
    );
    ok(&["eval", "--scores", "s/scores.jsonl", "--labels", "test/labels.json", "--out", "e", "--metrics", "auroc,ap,rbdc,tbdc"], d);
    let files = [
        "s/scores.jsonl",
        "s/scores.csv",
        "e/metrics.json",
        "e/roc.csv",
        "e/pr.csv",
        "e/rbdc.csv",
        "e/tbdc.csv",
    ];
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(d.join(f)).unwrap()).collect();
    for f in files {
        fs::remove_file(d.join(f)).unwrap();
    }
    ok(&["--config", "s/run_config.json"], d);
    ok(&["--config", "e/run_config.json"], d);
    for (f, b) in files.iter().zip(&before) {
        assert_eq!(&fs::read(d.join(f)).unwrap(), b, "{f} differs after replay");
    }
    let report: serde_json::Value = serde_json::from_slice(&before[2]).unwrap();
    for m in ["auroc", "ap", "rbdc", "tbdc"] {
        let v = report[m].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{m} = {v}");
    }
    let csv = String::from_utf8(before[1].clone()).unwrap();
    assert!(csv.starts_with("video,frame,score,decision\n"));
}

#[test]
fn scoring_flags_change_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixtures(d);
    train_small(d, "m", &[]);
    let base = ["score", "--model", "m/model.skrm", "--tracks", "test/tracks.jsonl", "--per-person"];
    let run = |out: &str, extra: &[&str]| {
        let mut args: Vec<&str> = base.to_vec();
        args.extend(["--out", out]);
        args.extend(extra);
        ok(&args, d);
        score_lines(&d.join(out).join("scores.jsonl"))
    };
    for line in run("raw", &["--no-smoothing"]) {
        if let ScoreLine::Person(p) = line {
            assert_eq!(p.score, p.raw_score);
        }
    }
    for line in run("flat", &["--no-confidence-weighting", "--no-smoothing"]) {
        if let ScoreLine::Person(p) = line {
            let mut total = 0.0;
            for ld in &p.keypoint_logdens {
                total += ld;
            }
            assert_eq!(p.score, -total);
        }
    }
    let smoothed = run("smooth", &[]);
    assert!(smoothed.iter().any(|l| matches!(l, ScoreLine::Person(p) if p.score != p.raw_score)));
}

#[test]
fn overfit_model_scores_training_video_lower_than_anomalies() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "--out", "normal", "--anomaly-fraction", "0", "--seed", "3"], d);
    ok(&["synth", "--out", "odd", "--anomaly-fraction", "0.3", "--seed", "3"], d);
    let mut args = vec!["train", "--tracks", "normal/tracks.jsonl", "--out", "m", "--epochs", "6"];
    args.extend(SMALL_NET);
    ok(&args, d);
    let mean = |name: &str| {
        ok(&["score", "--model", "m/model.skrm", "--tracks", &format!("{name}/tracks.jsonl"), "--out", &format!("s_{name}")], d);
        let scores: Vec<f64> = score_lines(&d.join(format!("s_{name}/scores.jsonl")))
            .into_iter()
            .filter_map(|l| match l {
                ScoreLine::Frame(f) => Some(f.score),
                ScoreLine::Person(_) => None,
            })
            .collect();
        scores.iter().sum::<f64>() / scores.len() as f64
    };
    let (normal, odd) = (mean("normal"), mean("odd"));
    assert!(normal < odd, "normal {normal} vs anomalous {odd}");
}

fn write_scores(path: &Path, video: &str, scores: &[f64]) {
    let mut text = String::new();
    for (f, s) in scores.iter().enumerate() {
        text.push_str(&format!("{{\"video\":\"{video}\",\"frame\":{f},\"score\":{s}}}\n"));
    }
    fs::write(path, text).unwrap();
}

fn write_labels(path: &Path, video: &str, labels: &[u8]) {
    let v = serde_json::json!({"videos": [{"video_id": video, "num_frames": labels.len(), "frame_labels": labels}]});
    fs::write(path, v.to_string()).unwrap();
}

#[test]
fn eval_perfect_and_shuffled() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 5 == 0)).collect();
    write_labels(&d.join("labels.json"), "v", &labels);
    let perfect: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    write_scores(&d.join("perfect.jsonl"), "v", &perfect);
    let out = ok(&["eval", "--scores", "perfect.jsonl", "--labels", "labels.json", "--out", "p"], d);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["auroc"], 1.0);
    assert_eq!(report["ap"], 1.0);

    // Scores carry no information about the labels.
    let noise: Vec<f64> = (0..1000u64).map(|i| ((i * 2_654_435_761) % 1_000_003) as f64).collect();
    write_scores(&d.join("noise.jsonl"), "v", &noise);
    let out = ok(&["eval", "--scores", "noise.jsonl", "--labels", "labels.json", "--out", "n"], d);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let auroc = report["auroc"].as_f64().unwrap();
    assert!((auroc - 0.5).abs() <= 0.05, "{auroc}");
}

#[test]
fn eval_explains_missing_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_labels(&d.join("labels.json"), "v", &[0, 1, 0]);
    write_scores(&d.join("s.jsonl"), "v", &[0.1, 0.9, 0.2]);
    let out = seeker(&["eval", "--scores", "s.jsonl", "--labels", "labels.json", "--out", "e", "--metrics", "rbdc"], d);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("regions"), "{}", stderr(&out));
    assert!(!d.join("e/metrics.json").exists());
    write_scores(&d.join("short.jsonl"), "v", &[0.1, 0.9]);
    let out = seeker(&["eval", "--scores", "short.jsonl", "--labels", "labels.json", "--out", "e"], d);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("frame 2"));
}

#[test]
fn failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = seeker(&["train", "--tracks", "missing.jsonl", "--out", "m"], d);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing.jsonl"));
    assert!(!d.join("m/model.skrm").exists());

    fixtures(d);
    let mut args = vec!["train", "--tracks", "train/tracks.jsonl", "--out", "m", "--confidence-threshold", "0.99"];
    args.extend(SMALL_NET);
    let out = seeker(&args, d);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("0.99"), "{}", stderr(&out));

    let out = seeker(&["train", "--tracks", "train/tracks.jsonl", "--out", "m", "--val-tracks", "test/tracks.jsonl"], d);
    assert!(!out.status.success());

    let bad = Command::new(env!("CARGO_BIN_EXE_seeker"))
        .args(["synth", "--out", "x"])
        .env("SEEKER_THREADS", "zero")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("SEEKER_THREADS"));

    let out = seeker(&[], d);
    assert!(!out.status.success());
}

#[test]
fn score_rejects_mismatched_skeletons() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixtures(d);
    train_small(d, "m", &[]);
    let mut text = String::from("{\"meta\":{\"n_keypoints\":2}}\n");
    for f in 0..10 {
        text.push_str(&format!(
            "{{\"video\":\"v\",\"frame\":{f},\"person\":0,\"keypoints\":[[1,2,0.9],[3,4,0.9]]}}\n"
        ));
    }
    fs::write(d.join("two.jsonl"), text).unwrap();
    let out = seeker(&["score", "--model", "m/model.skrm", "--tracks", "two.jsonl", "--out", "s"], d);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("18 keypoints"), "{}", stderr(&out));
}

#[test]
fn early_stopping_uses_validation_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixtures(d);
    let out = train_small(
        d,
        "m",
        &["--val-tracks", "test/tracks.jsonl", "--val-labels", "test/labels.json", "--patience", "1"],
    );
    let ck = load_checkpoint(&out).unwrap();
    assert!(!ck.loss_curve.is_empty() && ck.loss_curve.len() <= 2);
}
