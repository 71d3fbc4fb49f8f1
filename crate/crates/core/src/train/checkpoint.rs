use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trainer::TrainConfig;
use crate::error::{Error, Result};
use crate::net::{CausalNet, NetConfig};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SKRM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    net: NetConfig,
    #[serde(default)]
    train: Option<TrainConfig>,
    #[serde(default)]
    loss_curve: Vec<f64>,
}

/// A trained net with the configuration that produced it.
///
/// Layout: `SKRM`, `u32` version, `u32` header length, JSON header, then the
/// parameters as little-endian `f64` in layer order (weights row-major, then
/// bias). Masks are rebuilt from the header on load.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: NetConfig,
    pub train: Option<TrainConfig>,
    pub loss_curve: Vec<f64>,
    pub parameters: Vec<f64>,
}

impl Checkpoint {
    pub fn from_net<T: Scalar>(net: &CausalNet<T>, train: Option<TrainConfig>, loss_curve: Vec<f64>) -> Self {
        Self {
            net: net.config().clone(),
            train,
            loss_curve,
            parameters: net.parameters().into_iter().map(Scalar::as_f64).collect(),
        }
    }

    pub fn to_net<T: Scalar>(&self) -> Result<CausalNet<T>> {
        let params: Vec<T> = self.parameters.iter().map(|&v| T::of(v)).collect();
        CausalNet::from_parameters(self.net.clone(), &params)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            net: self.net.clone(),
            train: self.train.clone(),
            loss_curve: self.loss_curve.clone(),
        })
        .map_err(|e| Error::Format(e.to_string()))?;
        let len = u32::try_from(header.len()).map_err(|_| Error::Format("header too large".into()))?;
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.parameters.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&header);
        for p in &self.parameters {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let take = |from: usize, n: usize, what: &str| {
            bytes
                .get(from..from + n)
                .ok_or_else(|| Error::Format(format!("truncated {what}")))
        };
        if take(0, 4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let u32_at = |from: usize, what: &str| -> Result<u32> {
            Ok(u32::from_le_bytes(take(from, 4, what)?.try_into().expect("four bytes")))
        };
        let version = u32_at(4, "version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let len = u32_at(8, "header length")? as usize;
        let header: Header =
            serde_json::from_slice(take(12, len, "header")?).map_err(|e| Error::Format(format!("header: {e}")))?;
        header.net.validate()?;
        let body = &bytes[12 + len..];
        let count = header.net.parameter_count();
        if body.len() != count * 8 {
            return Err(Error::Format(format!(
                "expected {} parameter bytes, found {}",
                count * 8,
                body.len()
            )));
        }
        let parameters = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect();
        Ok(Self {
            net: header.net,
            train: header.train,
            loss_curve: header.loss_curve,
            parameters,
        })
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
