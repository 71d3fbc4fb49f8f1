use serde::{Deserialize, Serialize};

use crate::density::CovarianceMode;
use crate::error::{Error, Result};

/// Coordinates per keypoint; ingestion is 2-D only.
pub const COORDS_PER_KEYPOINT: usize = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Frames per window.
    pub frames: usize,
    /// Keypoints per skeleton.
    pub keypoints: usize,
    /// Coordinates per prediction block: 2 for keypoint granularity,
    /// `2 * keypoints` for skeleton granularity.
    pub block_size: usize,
    pub hidden_layers: usize,
    /// Hidden width as a multiple of the input width.
    pub expansion_factor: usize,
    pub covariance: CovarianceMode,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            frames: 24,
            keypoints: 18,
            block_size: COORDS_PER_KEYPOINT,
            hidden_layers: 3,
            expansion_factor: 4,
            covariance: CovarianceMode::Diagonal,
            activation: Activation::Relu,
        }
    }
}

impl NetConfig {
    pub fn input_width(&self) -> usize {
        self.frames * self.keypoints * COORDS_PER_KEYPOINT
    }

    pub fn blocks(&self) -> usize {
        self.input_width() / self.block_size
    }

    pub fn hidden_width(&self) -> usize {
        self.expansion_factor * self.input_width()
    }

    pub fn cov_params_per_block(&self) -> usize {
        self.covariance.params_per_block(self.block_size)
    }

    /// Means for every block followed by covariance parameters for every block.
    pub fn output_width(&self) -> usize {
        self.input_width() + self.blocks() * self.cov_params_per_block()
    }

    /// Block that output row `row` parameterizes.
    pub fn output_block(&self, row: usize) -> usize {
        let w = self.input_width();
        if row < w {
            row / self.block_size
        } else {
            (row - w) / self.cov_params_per_block()
        }
    }

    /// `(inputs, outputs)` of each layer, hidden layers first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_width();
        for _ in 0..self.hidden_layers {
            shapes.push((fan_in, self.hidden_width()));
            fan_in = self.hidden_width();
        }
        shapes.push((fan_in, self.output_width()));
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.keypoints == 0 {
            return Err(Error::Config("frames and keypoints must be positive".into()));
        }
        if self.block_size == 0 || !self.input_width().is_multiple_of(self.block_size) {
            return Err(Error::Config(format!(
                "input width {} is not a multiple of block size {}",
                self.input_width(),
                self.block_size
            )));
        }
        if self.expansion_factor == 0 {
            return Err(Error::Config("expansion factor must be >= 1".into()));
        }
        Ok(())
    }
}
