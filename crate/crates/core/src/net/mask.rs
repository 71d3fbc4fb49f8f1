use ndarray::Array2;

use super::config::NetConfig;
use crate::error::Result;

/// Fixed connectivity of every layer. Row = output unit, column = input unit.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSet {
    pub hidden: Vec<Array2<bool>>,
    pub output: Array2<bool>,
}

impl MaskSet {
    /// Masks in layer order, output last.
    pub fn layers(&self) -> impl Iterator<Item = &Array2<bool>> {
        self.hidden.iter().chain(std::iter::once(&self.output))
    }
}

/// Builds the causality masks.
///
/// Hidden unit `u` belongs to block `(u mod W) / B` so each block owns an
/// equal share of every hidden layer. Hidden layers connect a unit to
/// inputs of the same or earlier blocks; the output layer connects the
/// parameters of block `p` only to hidden units of blocks `< p`, the same
/// pattern repeated for the mean and the covariance rows.
pub fn build_masks(config: &NetConfig) -> Result<MaskSet> {
    config.validate()?;
    let w = config.input_width();
    let b = config.block_size;
    let input_blocks: Vec<usize> = (0..w).map(|j| j / b).collect();
    let hidden_blocks: Vec<usize> = (0..config.hidden_width()).map(|u| (u % w) / b).collect();

    let mut hidden = Vec::with_capacity(config.hidden_layers);
    let mut prev = &input_blocks;
    for _ in 0..config.hidden_layers {
        hidden.push(Array2::from_shape_fn((hidden_blocks.len(), prev.len()), |(i, j)| {
            prev[j] <= hidden_blocks[i]
        }));
        prev = &hidden_blocks;
    }
    let output = Array2::from_shape_fn((config.output_width(), prev.len()), |(i, j)| {
        prev[j] < config.output_block(i)
    });
    Ok(MaskSet { hidden, output })
}
