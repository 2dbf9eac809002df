//! The Smooth-L1 regression objective over the four grasp maps.

use super::TrainError;
use crate::grasp::GraspMaps;
use crate::nn::{NodeId, Scalar, Tape};
use ndarray::{Array4, ArrayD, Axis};
use serde::{Deserialize, Serialize};

/// Loss hyperparameters: the Smooth-L1 smooth-region parameter and one
/// weight per head (quality, cos 2θ, sin 2θ, width).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub sigma: f64,
    pub head_weights: [f64; 4],
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            head_weights: [1.0; 4],
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.sigma > 0.0) {
            return Err(TrainError::BadLossConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.head_weights.iter().any(|&w| w < 0.0) {
            return Err(TrainError::BadLossConfig(
                "head weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Piecewise Smooth-L1: `(sigma x)^2 / 2` when `|x| < 1`, else
/// `|x| - 0.5 / sigma^2`. Continuously differentiable at `|x| = 1` for the
/// default `sigma = 1`.
pub fn smooth_l1(x: f64, sigma: f64) -> f64 {
    if x.abs() < 1.0 {
        (sigma * x) * (sigma * x) / 2.0
    } else {
        x.abs() - 0.5 / (sigma * sigma)
    }
}

/// Reference-path loss on plain arrays: per head, the mean Smooth-L1 over
/// all pixels, then the weighted sum over the four heads.
pub fn grasp_loss(
    pred: &GraspMaps,
    target: &GraspMaps,
    cfg: &LossConfig,
) -> Result<f64, TrainError> {
    cfg.validate()?;
    let ps = pred.shape().map_err(|_| TrainError::ShapeMismatch)?;
    let ts = target.shape().map_err(|_| TrainError::ShapeMismatch)?;
    if ps != ts {
        return Err(TrainError::ShapeMismatch);
    }
    let heads = [
        (&pred.quality, &target.quality),
        (&pred.cos2theta, &target.cos2theta),
        (&pred.sin2theta, &target.sin2theta),
        (&pred.width, &target.width),
    ];
    let mut total = 0.0;
    for ((p, t), w) in heads.into_iter().zip(cfg.head_weights) {
        let mean = p
            .iter()
            .zip(t.iter())
            .map(|(&a, &b)| smooth_l1(a as f64 - b as f64, cfg.sigma))
            .sum::<f64>()
            / p.len() as f64;
        total += w * mean;
    }
    Ok(total)
}

/// Stacks per-sample target maps into the four (N, 1, H, W) head targets.
pub fn stack_targets<T: Scalar>(targets: &[GraspMaps]) -> Result<[Array4<T>; 4], TrainError> {
    let (h, w) = targets
        .first()
        .ok_or(TrainError::EmptySplit)?
        .shape()
        .map_err(|_| TrainError::ShapeMismatch)?;
    let n = targets.len();
    let mut out = [(); 4].map(|_| Array4::<T>::zeros((n, 1, h, w)));
    for (i, maps) in targets.iter().enumerate() {
        if maps.shape().map_err(|_| TrainError::ShapeMismatch)? != (h, w) {
            return Err(TrainError::ShapeMismatch);
        }
        let planes = [&maps.quality, &maps.cos2theta, &maps.sin2theta, &maps.width];
        for (k, plane) in planes.into_iter().enumerate() {
            let mut slot = out[k].index_axis_mut(Axis(0), i);
            let mut slot = slot.index_axis_mut(Axis(0), 0);
            slot.zip_mut_with(plane, |d, &s| *d = T::from_f64_c(s as f64));
        }
    }
    Ok(out)
}

/// Records the grasp loss on the tape against constant targets and returns
/// the scalar loss node.
pub fn tape_grasp_loss<T: Scalar>(
    tape: &mut Tape<T>,
    heads: &[NodeId; 4],
    targets: &[GraspMaps],
    cfg: &LossConfig,
) -> Result<NodeId, TrainError> {
    cfg.validate()?;
    let stacked = stack_targets::<T>(targets)?;
    let sigma = T::from_f64_c(cfg.sigma);
    let mut terms = Vec::with_capacity(4);
    for (i, target) in stacked.into_iter().enumerate() {
        let target: ArrayD<T> = target.into_dyn();
        if tape.value(heads[i]).shape() != target.shape() {
            return Err(TrainError::ShapeMismatch);
        }
        let term = tape.smooth_l1_mean(heads[i], target, sigma);
        terms.push((term, T::from_f64_c(cfg.head_weights[i])));
    }
    Ok(tape.scaled_sum(terms))
}
