use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::labels::BBox;
use crate::error::{Error, Result};

/// COCO-18 keypoint count used when a track file carries no header.
pub const DEFAULT_KEYPOINTS: usize = 18;

/// One detected body joint in pixel coordinates.
///
/// Serialized as a `[x, y, confidence]` triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && (0.0..=1.0).contains(&self.confidence)
    }
}

impl From<[f64; 3]> for Keypoint {
    fn from([x, y, confidence]: [f64; 3]) -> Self {
        Self { x, y, confidence }
    }
}

impl From<Keypoint> for [f64; 3] {
    fn from(k: Keypoint) -> Self {
        [k.x, k.y, k.confidence]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub frame_index: usize,
    pub person_id: i64,
    pub keypoints: Vec<Keypoint>,
}

impl Skeleton {
    pub fn mean_confidence(&self) -> f64 {
        if self.keypoints.is_empty() {
            return 0.0;
        }
        self.keypoints.iter().map(|k| k.confidence).sum::<f64>() / self.keypoints.len() as f64
    }

    /// Tight axis-aligned box around every keypoint.
    pub fn bounding_box(&self) -> BBox {
        let mut b = BBox::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for k in &self.keypoints {
            b.x1 = b.x1.min(k.x);
            b.y1 = b.y1.min(k.y);
            b.x2 = b.x2.max(k.x);
            b.y2 = b.y2.max(k.y);
        }
        b
    }
}

/// One person's skeletons within a video, ordered by frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseTrack {
    pub video_id: String,
    pub person_id: i64,
    pub skeletons: Vec<Skeleton>,
}

impl PoseTrack {
    pub fn len(&self) -> usize {
        self.skeletons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skeletons.is_empty()
    }

    pub fn is_contiguous(&self) -> bool {
        self.skeletons
            .windows(2)
            .all(|w| w[1].frame_index == w[0].frame_index + 1)
    }
}

/// Splits a track at every missing frame into contiguous sub-tracks.
pub fn split_contiguous(track: &PoseTrack) -> Vec<PoseTrack> {
    let mut parts: Vec<PoseTrack> = Vec::new();
    let mut prev: Option<usize> = None;
    for s in &track.skeletons {
        let continues = prev.is_some_and(|p| s.frame_index == p + 1);
        if !continues {
            parts.push(PoseTrack {
                video_id: track.video_id.clone(),
                person_id: track.person_id,
                skeletons: Vec::new(),
            });
        }
        parts.last_mut().unwrap().skeletons.push(s.clone());
        prev = Some(s.frame_index);
    }
    parts
}

/// Contents of a JSON Lines track file.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackFile {
    pub n_keypoints: usize,
    pub tracks: Vec<PoseTrack>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: Meta,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    n_keypoints: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    video: String,
    frame: usize,
    person: i64,
    keypoints: Vec<Keypoint>,
}

/// Reads a track file.
///
/// An optional `{"meta": {"n_keypoints": N}}` header on the first non-blank
/// line fixes N; otherwise `default_keypoints` applies. Records are grouped
/// by `(video, person)` and sorted by frame. Tracks come out ordered by
/// video id, then person id.
pub fn parse_tracks<R: BufRead>(reader: R, default_keypoints: usize) -> Result<TrackFile> {
    let mut n_keypoints = default_keypoints;
    let mut seen_content = false;
    let mut groups: BTreeMap<(String, i64), BTreeMap<usize, (usize, Skeleton)>> = BTreeMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let schema = |message: String| Error::Schema {
            line: line_no,
            message,
        };

        if value.get("meta").is_some() {
            if seen_content {
                return Err(schema("header must be the first line".into()));
            }
            let header: Header =
                serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
            if header.meta.n_keypoints == 0 {
                return Err(schema("n_keypoints must be positive".into()));
            }
            n_keypoints = header.meta.n_keypoints;
            seen_content = true;
            continue;
        }
        seen_content = true;

        let record: Record = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
        if record.keypoints.len() != n_keypoints {
            return Err(schema(format!(
                "expected {n_keypoints} keypoints, found {}",
                record.keypoints.len()
            )));
        }
        if let Some((i, k)) = record.keypoints.iter().enumerate().find(|(_, k)| !k.is_valid()) {
            return Err(schema(format!(
                "keypoint {i} invalid (x={}, y={}, confidence={}); coordinates must be finite and confidence in [0, 1]",
                k.x, k.y, k.confidence
            )));
        }

        let skeleton = Skeleton {
            frame_index: record.frame,
            person_id: record.person,
            keypoints: record.keypoints,
        };
        let frames = groups.entry((record.video, record.person)).or_default();
        match frames.entry(record.frame) {
            Entry::Occupied(prev) => {
                return Err(schema(format!(
                    "duplicate frame {} for this person (first seen on line {})",
                    record.frame,
                    prev.get().0
                )));
            }
            Entry::Vacant(slot) => {
                slot.insert((line_no, skeleton));
            }
        }
    }

    let tracks = groups
        .into_iter()
        .map(|((video_id, person_id), frames)| PoseTrack {
            video_id,
            person_id,
            skeletons: frames.into_values().map(|(_, s)| s).collect(),
        })
        .collect();
    Ok(TrackFile {
        n_keypoints,
        tracks,
    })
}

/// Writes a header line followed by one record per skeleton, in track order.
pub fn write_tracks<W: Write>(mut writer: W, file: &TrackFile) -> Result<()> {
    let header = Header {
        meta: Meta {
            n_keypoints: file.n_keypoints,
        },
    };
    serde_json::to_writer(&mut writer, &header).map_err(std::io::Error::from)?;
    writeln!(writer)?;
    for track in &file.tracks {
        for s in &track.skeletons {
            let record = Record {
                video: track.video_id.clone(),
                frame: s.frame_index,
                person: track.person_id,
                keypoints: s.keypoints.clone(),
            };
            serde_json::to_writer(&mut writer, &record).map_err(std::io::Error::from)?;
            writeln!(writer)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(video: &str, frame: usize, person: i64, n: usize) -> String {
        let kps: Vec<[f64; 3]> = (0..n).map(|i| [i as f64, 2.0 * i as f64, 0.9]).collect();
        serde_json::json!({"video": video, "frame": frame, "person": person, "keypoints": kps})
            .to_string()
    }

    #[test]
    fn single_line_yields_one_track_of_length_one() {
        let text = line("v", 3, 1, 18);
        let file = parse_tracks(text.as_bytes(), DEFAULT_KEYPOINTS).unwrap();
        assert_eq!(file.tracks.len(), 1);
        assert_eq!(file.tracks[0].len(), 1);
        assert_eq!(file.tracks[0].skeletons[0].frame_index, 3);
    }

    #[test]
    fn empty_stream_yields_no_tracks() {
        let file = parse_tracks("".as_bytes(), DEFAULT_KEYPOINTS).unwrap();
        assert!(file.tracks.is_empty());
    }

    #[test]
    fn wrong_keypoint_count_names_the_line() {
        let text = format!("{}\n{}\n", line("v", 0, 0, 18), line("v", 1, 0, 17));
        match parse_tracks(text.as_bytes(), DEFAULT_KEYPOINTS) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let text = format!("{}\n{{not json\n", line("v", 0, 0, 18));
        assert!(matches!(
            parse_tracks(text.as_bytes(), 18),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn confidence_out_of_range_rejected() {
        let text = r#"{"video":"v","frame":0,"person":0,"keypoints":[[1,2,1.5]]}"#;
        assert!(matches!(
            parse_tracks(text.as_bytes(), 1),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn header_sets_keypoint_count() {
        let text = format!("{{\"meta\": {{\"n_keypoints\": 2}}}}\n{}\n", line("v", 0, 0, 2));
        let file = parse_tracks(text.as_bytes(), 18).unwrap();
        assert_eq!(file.n_keypoints, 2);
        assert_eq!(file.tracks.len(), 1);
    }

    #[test]
    fn records_grouped_and_sorted() {
        let text = [
            line("b", 5, 0, 1),
            line("a", 2, 1, 1),
            line("a", 1, 1, 1),
            line("a", 0, 0, 1),
        ]
        .join("\n");
        let file = parse_tracks(text.as_bytes(), 1).unwrap();
        let keys: Vec<_> = file
            .tracks
            .iter()
            .map(|t| (t.video_id.as_str(), t.person_id, t.len()))
            .collect();
        assert_eq!(keys, vec![("a", 0, 1), ("a", 1, 2), ("b", 0, 1)]);
        let frames: Vec<_> = file.tracks[1].skeletons.iter().map(|s| s.frame_index).collect();
        assert_eq!(frames, vec![1, 2]);
    }

    #[test]
    fn duplicate_frame_rejected() {
        let text = [line("a", 0, 0, 1), line("a", 0, 0, 1)].join("\n");
        assert!(matches!(
            parse_tracks(text.as_bytes(), 1),
            Err(Error::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn gaps_split_tracks() {
        let text = [0, 1, 2, 5, 6, 9]
            .iter()
            .map(|&f| line("a", f, 0, 1))
            .collect::<Vec<_>>()
            .join("\n");
        let file = parse_tracks(text.as_bytes(), 1).unwrap();
        let parts = split_contiguous(&file.tracks[0]);
        let lens: Vec<_> = parts.iter().map(PoseTrack::len).collect();
        assert_eq!(lens, vec![3, 2, 1]);
        assert!(parts.iter().all(PoseTrack::is_contiguous));
    }
}
