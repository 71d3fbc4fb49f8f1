use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::scorer::VideoScores;
use crate::data::BBox;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameLine {
    pub video: String,
    pub frame: usize,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonLine {
    pub video: String,
    pub frame: usize,
    pub person: i64,
    pub score: f64,
    pub raw_score: f64,
    pub keypoint_logdens: Vec<f64>,
    pub confidences: Vec<f64>,
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(default)]
    pub backtracked: bool,
}

/// One line of a score file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreLine {
    Person(PersonLine),
    Frame(FrameLine),
}

impl VideoScores {
    /// Frame lines in order, each followed by that frame's person lines when
    /// `per_person` is set.
    pub fn lines(&self, per_person: bool) -> Vec<ScoreLine> {
        let mut by_frame: Vec<Vec<ScoreLine>> = vec![Vec::new(); self.frame_scores.len()];
        if per_person {
            for p in &self.persons {
                for f in &p.frames {
                    by_frame[f.frame].push(ScoreLine::Person(PersonLine {
                        video: self.video_id.clone(),
                        frame: f.frame,
                        person: p.person_id,
                        score: f.score,
                        raw_score: f.raw_score,
                        keypoint_logdens: f.keypoint_logdens.clone(),
                        confidences: f.confidences.clone(),
                        bbox: f.bbox,
                        backtracked: f.backtracked,
                    }));
                }
            }
        }
        let mut out = Vec::new();
        for (frame, (score, persons)) in self.frame_scores.iter().zip(by_frame).enumerate() {
            out.push(ScoreLine::Frame(FrameLine {
                video: self.video_id.clone(),
                frame,
                score: *score,
                decision: self.decisions.as_ref().map(|d| d[frame]),
            }));
            out.extend(persons);
        }
        out
    }
}

pub fn write_score_lines<W: Write>(mut writer: W, lines: &[ScoreLine]) -> Result<()> {
    for line in lines {
        serde_json::to_writer(&mut writer, line).map_err(|e| Error::Numeric(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_score_lines<R: BufRead>(reader: R) -> Result<Vec<ScoreLine>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(serde_json::from_value(value).map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{PersonFrame, PersonScores};

    fn sample() -> VideoScores {
        VideoScores {
            video_id: "a".into(),
            frame_scores: vec![1.5, 2.0],
            decisions: Some(vec![0, 1]),
            persons: vec![PersonScores {
                person_id: 4,
                frames: vec![PersonFrame {
                    frame: 1,
                    score: 2.0,
                    raw_score: 2.5,
                    keypoint_logdens: vec![-1.0, -1.5],
                    confidences: vec![0.5, 1.0],
                    bbox: BBox::new(0.0, 0.0, 1.0, 2.0),
                    backtracked: false,
                }],
            }],
        }
    }

    #[test]
    fn lines_round_trip() {
        let lines = sample().lines(true);
        assert_eq!(lines.len(), 3);
        let mut buf = Vec::new();
        write_score_lines(&mut buf, &lines).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(2).unwrap().contains("\"box\":[0.0,0.0,1.0,2.0]"));
        assert_eq!(read_score_lines(&buf[..]).unwrap(), lines);
    }

    #[test]
    fn scores_round_trip_bit_exactly() {
        let line = FrameLine {
            video: "v".into(),
            frame: 0,
            score: 51.924062265872244,
            decision: None,
        };
        let mut buf = Vec::new();
        write_score_lines(&mut buf, &[ScoreLine::Frame(line.clone())]).unwrap();
        match &read_score_lines(buf.as_slice()).unwrap()[0] {
            ScoreLine::Frame(f) => assert_eq!(f.score.to_bits(), line.score.to_bits()),
            ScoreLine::Person(_) => panic!("expected a frame line"),
        }
    }

    #[test]
    fn frame_lines_only_by_default() {
        let lines = sample().lines(false);
        assert!(lines.iter().all(|l| matches!(l, ScoreLine::Frame(_))));
        let no_decisions = VideoScores {
            decisions: None,
            ..sample()
        };
        let mut buf = Vec::new();
        write_score_lines(&mut buf, &no_decisions.lines(false)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "{\"video\":\"a\",\"frame\":0,\"score\":1.5}\n{\"video\":\"a\",\"frame\":1,\"score\":2.0}\n");
    }

    #[test]
    fn bad_lines_report_position() {
        let err = read_score_lines(&b"{\"video\":\"a\",\"frame\":0,\"score\":1}\n{oops\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_score_lines(&b"{\"video\":\"a\"}\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 1, .. }));
    }
}
