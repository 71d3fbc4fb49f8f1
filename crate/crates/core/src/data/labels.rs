use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::track::PoseTrack;
use crate::error::{Error, Result};

/// Relative growth applied to a skeleton's bounding box to form its region.
pub const REGION_INFLATION: f64 = 0.1;

/// Axis-aligned box `(x1, y1, x2, y2)`, serialized as a 4-array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1).max(0.0) * (self.y2 - self.y1).max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Scales width and height by `1 + fraction` about the center.
    pub fn inflate(&self, fraction: f64) -> BBox {
        let dx = 0.5 * fraction * (self.x2 - self.x1);
        let dy = 0.5 * fraction * (self.y2 - self.y1);
        BBox::new(self.x1 - dx, self.y1 - dy, self.x2 + dx, self.y2 + dy)
    }
}

impl From<[f64; 4]> for BBox {
    fn from([x1, y1, x2, y2]: [f64; 4]) -> Self {
        Self { x1, y1, x2, y2 }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

/// Ground-truth anomalous regions of one event, ordered by frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyTrack {
    pub track_id: usize,
    pub regions: Vec<Region>,
}

/// Per-video ground truth as stored in a label file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoLabels {
    pub video_id: String,
    pub num_frames: usize,
    pub frame_labels: Vec<u8>,
    #[serde(default)]
    pub regions: Vec<Region>,
    #[serde(default)]
    pub anomaly_tracks: Vec<AnomalyTrack>,
}

impl VideoLabels {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Error::Argument(format!("labels for video {:?}: {m}", self.video_id));
        if self.frame_labels.len() != self.num_frames {
            return Err(bad(format!(
                "frame_labels has {} entries but num_frames is {}",
                self.frame_labels.len(),
                self.num_frames
            )));
        }
        if let Some(l) = self.frame_labels.iter().find(|&&l| l > 1) {
            return Err(bad(format!("frame label {l} is not binary")));
        }
        let all_regions = self
            .regions
            .iter()
            .chain(self.anomaly_tracks.iter().flat_map(|t| &t.regions));
        for r in all_regions {
            if r.frame >= self.num_frames {
                return Err(bad(format!("region frame {} out of range", r.frame)));
            }
            if self.frame_labels[r.frame] != 1 {
                return Err(bad(format!("region at frame {} lies on a normal frame", r.frame)));
            }
            if r.bbox.area() <= 0.0 {
                return Err(bad(format!("region at frame {} has empty box", r.frame)));
            }
        }
        for t in &self.anomaly_tracks {
            if t.regions.windows(2).any(|p| p[1].frame < p[0].frame) {
                return Err(bad(format!("anomaly track {} is not frame-ordered", t.track_id)));
            }
        }
        Ok(())
    }
}

/// A video with ground truth and the pose tracks observed in it.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVideo {
    pub video_id: String,
    pub num_frames: usize,
    pub frame_labels: Vec<u8>,
    pub regions: Vec<Region>,
    pub anomaly_tracks: Vec<AnomalyTrack>,
    pub tracks: Vec<PoseTrack>,
}

impl LabeledVideo {
    pub fn labels(&self) -> VideoLabels {
        VideoLabels {
            video_id: self.video_id.clone(),
            num_frames: self.num_frames,
            frame_labels: self.frame_labels.clone(),
            regions: self.regions.clone(),
            anomaly_tracks: self.anomaly_tracks.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelFile {
    pub videos: Vec<VideoLabels>,
}

impl LabelFile {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let file: LabelFile = serde_json::from_reader(reader)
            .map_err(|e| Error::Argument(format!("label file: {e}")))?;
        for v in &file.videos {
            v.validate()?;
        }
        Ok(file)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self).map_err(std::io::Error::from)?;
        Ok(())
    }

    pub fn video(&self, id: &str) -> Option<&VideoLabels> {
        self.videos.iter().find(|v| v.video_id == id)
    }
}
