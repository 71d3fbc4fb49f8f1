use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// IoU needed for a detection to count as overlapping a region.
pub const DEFAULT_ALPHA: f64 = 0.1;
/// Fraction of a track's regions that must be detected.
pub const DEFAULT_BETA: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auroc,
    Ap,
    Rbdc,
    Tbdc,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Auroc, Metric::Ap, Metric::Rbdc, Metric::Tbdc];

    pub fn needs_regions(self) -> bool {
        matches!(self, Metric::Rbdc | Metric::Tbdc)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auroc" | "auc" => Ok(Metric::Auroc),
            "ap" => Ok(Metric::Ap),
            "rbdc" => Ok(Metric::Rbdc),
            "tbdc" => Ok(Metric::Tbdc),
            other => Err(Error::Argument(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auroc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rbdc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tbdc: Option<f64>,
    pub frames: usize,
    pub anomalous_frames: usize,
}
