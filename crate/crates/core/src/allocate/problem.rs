use std::f64::consts::LN_2;

use super::{AllocationItem, AllocationProblem, ItemKey};
use crate::error::{Error, Result};
use crate::geometry::{tile_distance, Pose6DoF};
use crate::model::UtilityConstants;
use crate::sim::BufferState;
use crate::traces::Video;

/// What the predictor believes about one frame of the window this round.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePrediction {
    pub frame: usize,
    /// Rounds until playback, `1..=window`.
    pub horizon: usize,
    pub pose: Pose6DoF,
    /// View likelihood of each tile of the frame.
    pub view_prob: Vec<f64>,
}

/// Assembles one round's allocation problem.
///
/// Every tile with a positive view likelihood becomes an item with
/// `z = w * p * a * (M / d) * ln 2`, where `w` is the weight of the frame's
/// horizon and `d` the distance from the predicted pose. `r0` comes from the
/// buffer. The utility of bytes already buffered is a constant of the round
/// and is left out.
pub fn build_problem(
    video: &Video,
    predictions: &[FramePrediction],
    buffer: &BufferState,
    weights: &[f64],
    budget: f64,
) -> Result<AllocationProblem> {
    let mut items = Vec::new();
    for pred in predictions {
        let tiles = video.tiles(pred.frame);
        if pred.frame >= buffer.frame_count() {
            return Err(Error::Input(format!("frame {} is outside the buffer", pred.frame)));
        }
        if pred.horizon == 0 || pred.horizon > weights.len() {
            return Err(Error::Input(format!(
                "frame {} has horizon {} outside 1..={}",
                pred.frame,
                pred.horizon,
                weights.len()
            )));
        }
        if pred.view_prob.len() != tiles.len() {
            return Err(Error::Input(format!(
                "frame {}: {} view probabilities for {} tiles",
                pred.frame,
                pred.view_prob.len(),
                tiles.len()
            )));
        }
        let w = weights[pred.horizon - 1];
        for (k, (tile, &p)) in tiles.iter().zip(&pred.view_prob).enumerate() {
            if p <= 0.0 {
                continue;
            }
            let d = tile_distance(&pred.pose, tile.center);
            let span = UtilityConstants::for_tile_width(tile.wid).span_deg(d);
            items.push(AllocationItem {
                key: ItemKey {
                    frame: pred.frame,
                    tile: k,
                },
                z: w * p * tile.a * span * LN_2,
                b: tile.b,
                r0: buffer.rate(pred.frame, k),
                r_max: tile.max_rate,
            });
        }
    }
    items.sort_by_key(|it| it.key);
    Ok(AllocationProblem::new(items, budget))
}
