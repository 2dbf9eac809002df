//! Tape construction for the detection network's forward pass.

use super::{NetError, Network, StatUpdate};
use crate::nn::{NodeId, Scalar, Tape};
use ndarray::{Array4, ArrayD};

/// Node handles of the interesting stages of one forward pass.
pub struct ForwardNodes {
    /// Output of the downsampling stage (the deep skip source).
    pub x_d: NodeId,
    /// Shallow skip: after the first max pool, at S/2.
    pub skip1: NodeId,
    /// Deep skip: after the second max pool, at S/4 (equals `x_d`).
    pub skip2: NodeId,
    /// Bottleneck output.
    pub x_b: NodeId,
    /// Decoder output at full resolution.
    pub x_u: NodeId,
    /// quality, cos 2θ, sin 2θ, width.
    pub heads: [NodeId; 4],
    /// Parameters bound on the tape, in traversal order.
    pub params: Vec<(String, NodeId)>,
}

/// Intermediate tensors of an evaluation-mode forward pass.
pub struct ForwardTrace<T: Scalar> {
    pub x_d: ArrayD<T>,
    pub skips: Vec<ArrayD<T>>,
    pub x_b: ArrayD<T>,
    pub x_u: ArrayD<T>,
    /// Stacked head maps (N, 4, H, W).
    pub heads: Array4<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub(crate) fn from_tape(tape: &Tape<T>, nodes: &ForwardNodes) -> Self {
        let heads_views: Vec<ArrayD<T>> =
            nodes.heads.iter().map(|&h| tape.value(h).clone()).collect();
        let (n, _, h, w) = heads_views[0]
            .view()
            .into_dimensionality::<ndarray::Ix4>()
            .expect("head rank")
            .dim();
        let mut heads = Array4::<T>::zeros((n, 4, h, w));
        for (i, hv) in heads_views.iter().enumerate() {
            let v4 = hv
                .view()
                .into_dimensionality::<ndarray::Ix4>()
                .expect("head rank");
            heads
                .slice_mut(ndarray::s![.., i..i + 1, .., ..])
                .assign(&v4);
        }
        Self {
            x_d: tape.value(nodes.x_d).clone(),
            skips: vec![
                tape.value(nodes.skip1).clone(),
                tape.value(nodes.skip2).clone(),
            ],
            x_b: tape.value(nodes.x_b).clone(),
            x_u: tape.value(nodes.x_u).clone(),
            heads,
        }
    }
}

struct Builder<'t, 'n, T: Scalar> {
    tape: &'t mut Tape<T>,
    net: &'n Network<T>,
    training: bool,
    params: Vec<(String, NodeId)>,
    stat_updates: Vec<StatUpdate<T>>,
}

impl<T: Scalar> Builder<'_, '_, T> {
    fn param(&mut self, name: &str) -> NodeId {
        let value = self
            .net
            .params()
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
            .clone();
        let id = self.tape.leaf(value, self.training);
        self.params.push((name.to_string(), id));
        id
    }

    /// Convolution with shape-preserving padding derived from kernel size
    /// and dilation. The bias is bound only when the layer has one.
    fn conv(&mut self, x: NodeId, layer: &str, dilation: (usize, usize)) -> NodeId {
        let w = self.param(&format!("{layer}.weight"));
        let bias_name = format!("{layer}.bias");
        let b = self
            .net
            .params()
            .contains_key(&bias_name)
            .then(|| self.param(&bias_name));
        let shape = self.tape.value(w).shape().to_vec();
        let (kh, kw) = (shape[2], shape[3]);
        let pad = (dilation.0 * (kh - 1) / 2, dilation.1 * (kw - 1) / 2);
        self.tape.conv2d(x, w, b, pad, dilation)
    }

    fn norm(&mut self, x: NodeId, layer: &str) -> NodeId {
        let gamma = self.param(&format!("{layer}.gamma"));
        let beta = self.param(&format!("{layer}.beta"));
        if self.training {
            let (id, stats) = self.tape.batch_norm(x, gamma, beta, None);
            let (mean, var) = stats.expect("training mode returns batch stats");
            self.stat_updates.push((layer.to_string(), mean, var));
            id
        } else {
            let (rm, rv) = self
                .net
                .stats()
                .get(layer)
                .unwrap_or_else(|| panic!("missing running stats for {layer}"));
            let (rm, rv) = (rm.clone(), rv.clone());
            let (id, _) = self.tape.batch_norm(x, gamma, beta, Some((&rm, &rv)));
            id
        }
    }

    /// conv -> norm -> relu with the given dilation.
    fn cnr(&mut self, x: NodeId, prefix: &str, dilation: (usize, usize)) -> NodeId {
        let c = self.conv(x, &format!("{prefix}.conv"), dilation);
        let n = self.norm(c, &format!("{prefix}.norm"));
        self.tape.relu(n)
    }

    /// conv -> norm (no rectifier), for pre-residual-add paths.
    fn cn(&mut self, x: NodeId, prefix: &str, dilation: (usize, usize)) -> NodeId {
        let c = self.conv(x, &format!("{prefix}.conv"), dilation);
        self.norm(c, &format!("{prefix}.norm"))
    }

    fn residual(&mut self, x: NodeId, prefix: &str) -> NodeId {
        let t = self.cnr(x, &format!("{prefix}.l0"), (1, 1));
        let t = self.cn(t, &format!("{prefix}.l1"), (1, 1));
        let sum = self.tape.add(x, t);
        self.tape.relu(sum)
    }

    fn rfb(&mut self, x: NodeId, prefix: &str) -> NodeId {
        // four parallel branches with growing receptive fields
        let b0 = {
            let r = self.cnr(x, &format!("{prefix}.b0.reduce"), (1, 1));
            self.cnr(r, &format!("{prefix}.b0.l0"), (1, 1))
        };
        let b1 = {
            let r = self.cnr(x, &format!("{prefix}.b1.reduce"), (1, 1));
            let r = self.cnr(r, &format!("{prefix}.b1.l0"), (1, 1));
            self.cnr(r, &format!("{prefix}.b1.l1"), (3, 3))
        };
        let b2 = {
            let r = self.cnr(x, &format!("{prefix}.b2.reduce"), (1, 1));
            let r = self.cnr(r, &format!("{prefix}.b2.l0"), (1, 1)); // 1x7
            self.cnr(r, &format!("{prefix}.b2.l1"), (5, 5))
        };
        let b3 = {
            let r = self.cnr(x, &format!("{prefix}.b3.reduce"), (1, 1));
            let r = self.cnr(r, &format!("{prefix}.b3.l0"), (1, 1)); // 7x1
            self.cnr(r, &format!("{prefix}.b3.l1"), (5, 5))
        };
        let cat01 = self.tape.concat_channels(b0, b1);
        let cat23 = self.tape.concat_channels(b2, b3);
        let cat = self.tape.concat_channels(cat01, cat23);
        let merged = self.cn(cat, &format!("{prefix}.merge"), (1, 1));
        let sum = self.tape.add(x, merged);
        self.tape.relu(sum)
    }

    /// Attention fusion of a shallow skip with deep decoder features.
    fn fuse(&mut self, shallow: NodeId, deep: NodeId, prefix: &str) -> NodeId {
        let f = self.tape.concat_channels(shallow, deep);
        let gated = if self.net.config().mdafn_enabled {
            // pixel attention: 3x3 conv to one channel, sigmoid
            let pw = self.param(&format!("{prefix}.pixel.weight"));
            let pb = self.param(&format!("{prefix}.pixel.bias"));
            let pconv = self.tape.conv2d(f, pw, Some(pb), (1, 1), (1, 1));
            let a_pixel = self.tape.sigmoid(pconv);
            // channel attention: squeeze-excite over the fused channels
            let pooled = self.tape.global_avg_pool(f);
            let w1 = self.param(&format!("{prefix}.se_fc1.weight"));
            let b1 = self.param(&format!("{prefix}.se_fc1.bias"));
            let h = self.tape.linear(pooled, w1, b1);
            let h = self.tape.relu(h);
            let w2 = self.param(&format!("{prefix}.se_fc2.weight"));
            let b2 = self.param(&format!("{prefix}.se_fc2.bias"));
            let h = self.tape.linear(h, w2, b2);
            let a_channel = self.tape.sigmoid(h);
            let f_ch = self.tape.value(f).shape()[1];
            let n = self.tape.value(f).shape()[0];
            let a_channel = self.tape.reshape(a_channel, &[n, f_ch, 1, 1]);
            let fp = self.tape.mul_broadcast(f, a_pixel);
            self.tape.mul_broadcast(fp, a_channel)
        } else {
            f
        };
        let out = self.conv(gated, &format!("{prefix}.out"), (1, 1));
        let out = self.norm(out, &format!("{prefix}.norm"));
        self.tape.relu(out)
    }
}

pub(crate) fn run<T: Scalar>(
    net: &Network<T>,
    tape: &mut Tape<T>,
    x: Array4<T>,
    training: bool,
) -> Result<(ForwardNodes, Vec<StatUpdate<T>>), NetError> {
    let cfg = *net.config();
    let input = tape.leaf(x.into_dyn(), false);
    let mut b = Builder {
        tape,
        net,
        training,
        params: Vec::new(),
        stat_updates: Vec::new(),
    };

    // downsampling stem
    let mut h = input;
    for i in 0..4 {
        h = b.cnr(h, &format!("stem.block0.l{i}"), (1, 1));
    }
    h = b.tape.max_pool2(h);
    let skip1 = h;
    for i in 0..2 {
        h = b.cnr(h, &format!("stem.block1.l{i}"), (1, 1));
    }
    h = b.tape.max_pool2(h);
    let skip2 = h;
    let x_d = h;

    // bottleneck
    h = b.cnr(h, "bottleneck.lift0", (1, 1));
    h = b.cnr(h, "bottleneck.lift1", (1, 1));
    for i in 0..cfg.residual_blocks {
        h = b.residual(h, &format!("bottleneck.res{i}"));
    }
    h = if cfg.rfb_enabled {
        b.rfb(h, "bottleneck.rfb")
    } else {
        b.residual(h, &format!("bottleneck.res{}", cfg.residual_blocks))
    };
    let x_b = h;

    // decoder: fuse-then-shuffle, twice
    h = b.fuse(skip2, x_b, "decoder.fuse0");
    h = b.tape.pixel_shuffle(h, 2);
    h = b.fuse(skip1, h, "decoder.fuse1");
    h = b.tape.pixel_shuffle(h, 2);
    let x_u = h;

    // linear heads
    let heads = [
        b.conv(x_u, "heads.quality", (1, 1)),
        b.conv(x_u, "heads.cos2theta", (1, 1)),
        b.conv(x_u, "heads.sin2theta", (1, 1)),
        b.conv(x_u, "heads.width", (1, 1)),
    ];

    let Builder {
        params,
        stat_updates,
        ..
    } = b;
    Ok((
        ForwardNodes {
            x_d,
            skip1,
            skip2,
            x_b,
            x_u,
            heads,
            params,
        },
        stat_updates,
    ))
}
