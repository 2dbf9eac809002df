//! The lightweight generative grasp detection network.
//!
//! Downsampling stem (two conv+maxpool blocks), a bottleneck of residual
//! blocks plus a multi-branch receptive-field block, a decoder that fuses
//! skip features through pixel/channel attention before each sub-pixel
//! upsample, and four linear 3x3 prediction heads (quality, cos 2θ,
//! sin 2θ, width).

mod checkpoint;
mod defs;
mod forward;
mod predictor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use forward::{ForwardNodes, ForwardTrace};
pub use predictor::{InjectedPredictor, NetworkPredictor};

use crate::grasp::GraspMaps;
use crate::nn::{Scalar, Tape};
use defs::{layer_defs, ParamDef};
use ndarray::{Array1, Array3, Array4, ArrayD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    BadConfig(String),
    #[error("bad input shape {got:?}: {why}")]
    BadInput { got: Vec<usize>, why: String },
    #[error("checkpoint error on {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
}

/// Declarative description of the layer graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// 1 (depth), 3 (RGB) or 4 (RGB-D).
    pub in_channels: usize,
    /// Widths of the two downsampling blocks.
    pub stem_widths: [usize; 2],
    /// Bottleneck width; must be divisible by 8 (two pixel-shuffle stages)
    /// and by `se_reduction`.
    pub bottleneck_width: usize,
    pub residual_blocks: usize,
    pub rfb_enabled: bool,
    pub mdafn_enabled: bool,
    /// Channel-attention squeeze ratio.
    pub se_reduction: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            in_channels: 4,
            stem_widths: [32, 64],
            bottleneck_width: 256,
            residual_blocks: 3,
            rfb_enabled: true,
            mdafn_enabled: true,
            se_reduction: 16,
        }
    }
}

impl NetworkConfig {
    /// A tiny configuration for float64 gradient checking and fast tests.
    pub fn miniature() -> Self {
        Self {
            in_channels: 1,
            stem_widths: [4, 8],
            bottleneck_width: 16,
            residual_blocks: 1,
            rfb_enabled: true,
            mdafn_enabled: true,
            se_reduction: 16,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if ![1, 3, 4].contains(&self.in_channels) {
            return Err(NetError::BadConfig(format!(
                "in_channels must be 1, 3 or 4, got {}",
                self.in_channels
            )));
        }
        if self.stem_widths.iter().any(|&w| w == 0) {
            return Err(NetError::BadConfig("stem widths must be positive".into()));
        }
        let b = self.bottleneck_width;
        if b == 0 || b % 8 != 0 {
            return Err(NetError::BadConfig(format!(
                "bottleneck width must be a positive multiple of 8, got {b}"
            )));
        }
        if self.rfb_enabled && b % 4 != 0 {
            return Err(NetError::BadConfig(
                "bottleneck width must be divisible by 4 for the receptive-field block".into(),
            ));
        }
        if self.se_reduction == 0 || b % self.se_reduction != 0 {
            return Err(NetError::BadConfig(format!(
                "bottleneck width {b} must be divisible by se_reduction {}",
                self.se_reduction
            )));
        }
        if self.residual_blocks == 0 {
            return Err(NetError::BadConfig(
                "at least one residual block is required".into(),
            ));
        }
        Ok(())
    }

    /// Channel count entering the prediction heads.
    pub fn head_input_channels(&self) -> usize {
        self.bottleneck_width / 8
    }
}

/// Batch-norm running statistic update emitted by a training forward pass.
pub type StatUpdate<T> = (String, Array1<T>, Array1<T>);

const BN_MOMENTUM: f64 = 0.1;

/// The network: a configuration plus named parameter tensors and
/// batch-norm running statistics.
pub struct Network<T: Scalar> {
    cfg: NetworkConfig,
    params: BTreeMap<String, ArrayD<T>>,
    stats: BTreeMap<String, (Array1<T>, Array1<T>)>,
}

impl<T: Scalar> Network<T> {
    /// Builds a freshly initialized network (fan-in scaled normal weights,
    /// unit norm scales, zero shifts), deterministic under `seed`.
    pub fn new(cfg: NetworkConfig, seed: u64) -> Result<Self, NetError> {
        cfg.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = BTreeMap::new();
        let mut stats = BTreeMap::new();
        for (name, def) in layer_defs(&cfg) {
            match def {
                ParamDef::Conv { out, inp, k, bias } => {
                    let fan_in = inp * k.0 * k.1;
                    let std = (2.0 / fan_in as f64).sqrt();
                    let dist = Normal::new(0.0, std).expect("valid std");
                    let weight = ArrayD::from_shape_fn(
                        ndarray::IxDyn(&[out, inp, k.0, k.1]),
                        |_| T::from_f64_c(dist.sample(&mut rng)),
                    );
                    params.insert(format!("{name}.weight"), weight);
                    if bias {
                        params.insert(
                            format!("{name}.bias"),
                            ArrayD::zeros(ndarray::IxDyn(&[out])),
                        );
                    }
                }
                ParamDef::Norm { ch } => {
                    params.insert(
                        format!("{name}.gamma"),
                        ArrayD::from_elem(ndarray::IxDyn(&[ch]), T::one()),
                    );
                    params.insert(
                        format!("{name}.beta"),
                        ArrayD::zeros(ndarray::IxDyn(&[ch])),
                    );
                    stats.insert(name, (Array1::zeros(ch), Array1::from_elem(ch, T::one())));
                }
                ParamDef::Linear { out, inp } => {
                    let std = (2.0 / inp as f64).sqrt();
                    let dist = Normal::new(0.0, std).expect("valid std");
                    let weight =
                        ArrayD::from_shape_fn(ndarray::IxDyn(&[out, inp]), |_| {
                            T::from_f64_c(dist.sample(&mut rng))
                        });
                    params.insert(format!("{name}.weight"), weight);
                    params.insert(
                        format!("{name}.bias"),
                        ArrayD::zeros(ndarray::IxDyn(&[out])),
                    );
                }
            }
        }
        Ok(Self { cfg, params, stats })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    /// Exact count of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params.values().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> &BTreeMap<String, ArrayD<T>> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut BTreeMap<String, ArrayD<T>> {
        &mut self.params
    }

    pub(crate) fn stats(&self) -> &BTreeMap<String, (Array1<T>, Array1<T>)> {
        &self.stats
    }

    pub(crate) fn stats_mut(&mut self) -> &mut BTreeMap<String, (Array1<T>, Array1<T>)> {
        &mut self.stats
    }

    fn validate_input(&self, shape: &[usize]) -> Result<(), NetError> {
        let bad = |why: String| NetError::BadInput {
            got: shape.to_vec(),
            why,
        };
        if shape.len() != 4 {
            return Err(bad("expected (N, C, H, W)".into()));
        }
        if shape[1] != self.cfg.in_channels {
            return Err(bad(format!(
                "expected {} input channels",
                self.cfg.in_channels
            )));
        }
        if shape[2] % 4 != 0 || shape[3] % 4 != 0 || shape[2] < 4 || shape[3] < 4 {
            return Err(bad("spatial size must be a positive multiple of 4".into()));
        }
        Ok(())
    }

    /// Training-mode forward on a caller-supplied tape. Parameters are
    /// recorded as differentiable leaves; batch-norm statistic updates are
    /// returned for [`Network::apply_stat_updates`].
    pub fn forward_train(
        &self,
        tape: &mut Tape<T>,
        x: Array4<T>,
    ) -> Result<(ForwardNodes, Vec<StatUpdate<T>>), NetError> {
        self.validate_input(&[x.dim().0, x.dim().1, x.dim().2, x.dim().3])?;
        forward::run(self, tape, x, true)
    }

    /// Evaluation-mode forward returning the stacked head maps
    /// (N, 4, H, W) in the order quality, cos 2θ, sin 2θ, width.
    pub fn forward_eval(&self, x: &Array4<T>) -> Result<Array4<T>, NetError> {
        self.validate_input(&[x.dim().0, x.dim().1, x.dim().2, x.dim().3])?;
        let mut tape = Tape::new();
        let (nodes, _) = forward::run(self, &mut tape, x.clone(), false)?;
        let (n, _, h, w) = x.dim();
        let mut out = Array4::<T>::zeros((n, 4, h, w));
        for (i, head) in nodes.heads.iter().enumerate() {
            let v = tape.value(*head);
            let v4 = v
                .view()
                .into_dimensionality::<ndarray::Ix4>()
                .expect("head rank");
            out.slice_mut(ndarray::s![.., i..i + 1, .., ..])
                .assign(&v4);
        }
        Ok(out)
    }

    /// Evaluation-mode forward for one sample, as grasp maps.
    pub fn predict_maps(&self, input: &Array3<T>) -> Result<GraspMaps, NetError> {
        let (c, h, w) = input.dim();
        let x = input
            .to_owned()
            .into_shape_with_order((1, c, h, w))
            .expect("batch of one");
        let out = self.forward_eval(&x)?;
        let plane = |i: usize| {
            out.index_axis(Axis(0), 0)
                .index_axis(Axis(0), i)
                .mapv(|v| v.to_f64().unwrap_or(0.0) as f32)
        };
        Ok(GraspMaps {
            quality: plane(0),
            cos2theta: plane(1),
            sin2theta: plane(2),
            width: plane(3),
        })
    }

    /// Evaluation-mode forward that also exposes the intermediate stage
    /// tensors.
    pub fn forward_trace(&self, x: &Array4<T>) -> Result<ForwardTrace<T>, NetError> {
        self.validate_input(&[x.dim().0, x.dim().1, x.dim().2, x.dim().3])?;
        let mut tape = Tape::new();
        let (nodes, _) = forward::run(self, &mut tape, x.clone(), false)?;
        Ok(ForwardTrace::from_tape(&tape, &nodes))
    }

    /// Folds batch statistics into the running averages
    /// (`running = (1 - m) * running + m * batch`, unbiased variance).
    pub fn apply_stat_updates(&mut self, updates: &[StatUpdate<T>], batch_elems: usize) {
        let m = T::from_f64_c(BN_MOMENTUM);
        let one_m = T::one() - m;
        let correction = if batch_elems > 1 {
            T::from_f64_c(batch_elems as f64 / (batch_elems as f64 - 1.0))
        } else {
            T::one()
        };
        for (name, mean, var) in updates {
            if let Some((rm, rv)) = self.stats.get_mut(name) {
                rm.zip_mut_with(mean, |r, &b| *r = one_m * *r + m * b);
                rv.zip_mut_with(var, |r, &b| *r = one_m * *r + m * b * correction);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        NetworkConfig::default().validate().unwrap();
        NetworkConfig::miniature().validate().unwrap();
    }

    #[test]
    fn bad_configs_rejected() {
        let mut cfg = NetworkConfig::default();
        cfg.in_channels = 2;
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::default();
        cfg.bottleneck_width = 100; // not divisible by 8
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::default();
        cfg.se_reduction = 48; // 256 % 48 != 0
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = Network::<f32>::new(NetworkConfig::miniature(), 9).unwrap();
        let b = Network::<f32>::new(NetworkConfig::miniature(), 9).unwrap();
        assert_eq!(a.param_count(), b.param_count());
        for (ka, va) in a.params() {
            assert_eq!(va, &b.params()[ka]);
        }
        let c = Network::<f32>::new(NetworkConfig::miniature(), 10).unwrap();
        assert!(a.params().iter().any(|(k, v)| v != &c.params()[k]));
    }

    #[test]
    fn param_count_single_conv_example() {
        // a single 3x3 conv 1->1 with bias must contribute 10 scalars;
        // verified through the defs machinery on the head convs
        let net = Network::<f32>::new(NetworkConfig::miniature(), 0).unwrap();
        let hw = net.params()["heads.quality.weight"].len();
        let hb = net.params()["heads.quality.bias"].len();
        assert_eq!(hw, net.config().head_input_channels() * 9);
        assert_eq!(hb, 1);
    }

    #[test]
    fn input_validation() {
        let net = Network::<f32>::new(NetworkConfig::miniature(), 0).unwrap();
        let bad_channels = Array4::<f32>::zeros((1, 3, 16, 16));
        assert!(net.forward_eval(&bad_channels).is_err());
        let bad_size = Array4::<f32>::zeros((1, 1, 18, 18));
        assert!(net.forward_eval(&bad_size).is_err());
    }
}
