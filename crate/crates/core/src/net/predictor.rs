//! Predictors bridging the network (or injected rectangles) into the
//! evaluation loop.

use super::Network;
use crate::eval::GraspPredictor;
use crate::grasp::{decode_grasps, rectangle_from_planar, DecodeConfig, GraspRectangle};
use ndarray::Array3;
use std::collections::HashMap;

/// Minimum decoded opening in pixels; a degenerate zero-width prediction
/// becomes a 1 px rectangle that simply fails the overlap test.
const MIN_PREDICTED_WIDTH: f64 = 1.0;

/// Network-backed predictor: forward pass, quality clip, peak decoding and
/// rectangle reconstruction.
pub struct NetworkPredictor<'a> {
    pub net: &'a Network<f32>,
    pub w_max: f64,
    pub decode: DecodeConfig,
    pub top_k: usize,
}

impl GraspPredictor for NetworkPredictor<'_> {
    fn predict_rects(
        &self,
        _sample_id: &str,
        input: &Array3<f32>,
    ) -> Result<Vec<GraspRectangle>, String> {
        let mut maps = self.net.predict_maps(input).map_err(|e| e.to_string())?;
        maps.quality.mapv_inplace(|v| v.clamp(0.0, 1.0));
        let grasps = decode_grasps(&maps, self.top_k, self.decode.smooth_sigma, self.w_max)
            .map_err(|e| e.to_string())?;
        let mut rects = Vec::with_capacity(grasps.len());
        for g in grasps {
            let g = crate::grasp::PlanarGrasp::new(
                g.u(),
                g.v(),
                g.phi(),
                g.width().max(MIN_PREDICTED_WIDTH),
                g.quality(),
            )
            .map_err(|e| e.to_string())?;
            rects.push(rectangle_from_planar(&g, self.decode.jaw_ratio).map_err(|e| e.to_string())?);
        }
        Ok(rects)
    }
}

/// Test/debug predictor returning pre-set rectangles per sample id,
/// bypassing the network entirely.
pub struct InjectedPredictor {
    pub rects_by_id: HashMap<String, Vec<GraspRectangle>>,
}

impl GraspPredictor for InjectedPredictor {
    fn predict_rects(
        &self,
        sample_id: &str,
        _input: &Array3<f32>,
    ) -> Result<Vec<GraspRectangle>, String> {
        self.rects_by_id
            .get(sample_id)
            .cloned()
            .ok_or_else(|| format!("no injected prediction for {sample_id}"))
    }
}
