//! Reverse-mode tape: values are recorded on the way forward, gradients
//! flow back through the recorded ops in reverse creation order.

use super::conv::{conv2d_backward, conv2d_forward};
use super::Scalar;
use ndarray::{concatenate, Array1, Array2, Array4, ArrayD, Axis, Ix2, Ix4, IxDyn};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

const BN_EPS: f64 = 1e-5;

/// Recorded operation with whatever state its backward pass needs.
pub enum Op<T: Scalar> {
    Leaf,
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        pad: (usize, usize),
        dilation: (usize, usize),
    },
    MaxPool2x2 {
        x: NodeId,
        /// flat index into the input (H*W) plane per output element
        argmax: Vec<u32>,
    },
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: ArrayD<T>,
        inv_std: Array1<T>,
    },
    Relu {
        x: NodeId,
    },
    Sigmoid {
        x: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    /// `b` has the same rank as `a` with broadcastable (size-1) axes.
    MulBroadcast {
        a: NodeId,
        b: NodeId,
    },
    ConcatChannels {
        a: NodeId,
        b: NodeId,
        split: usize,
    },
    PixelShuffle {
        x: NodeId,
        r: usize,
    },
    GlobalAvgPool {
        x: NodeId,
    },
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Reshape {
        x: NodeId,
    },
    SmoothL1Mean {
        pred: NodeId,
        target: ArrayD<T>,
        sigma: T,
    },
    ScaledSum {
        terms: Vec<(NodeId, T)>,
    },
}

struct Node<T: Scalar> {
    value: ArrayD<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// The autodiff tape. Build it fresh for every forward/backward pass.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &ArrayD<T> {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> T {
        let v = &self.nodes[id.0].value;
        debug_assert_eq!(v.len(), 1, "scalar node expected");
        *v.iter().next().expect("scalar node")
    }

    fn push(&mut self, value: ArrayD<T>, op: Op<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn leaf(&mut self, value: ArrayD<T>, needs_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, needs_grad)
    }

    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        pad: (usize, usize),
        dilation: (usize, usize),
    ) -> NodeId {
        let xv = as4(self.value(x));
        let wv = as4(self.value(w));
        let bias = b.map(|bid| {
            self.value(bid)
                .view()
                .into_dimensionality()
                .expect("bias rank")
                .to_owned()
        });
        let y = conv2d_forward(&xv.view(), &wv.view(), bias.as_ref(), pad, dilation);
        let needs =
            self.needs(x) || self.needs(w) || b.map(|bid| self.needs(bid)).unwrap_or(false);
        self.push(
            y.into_dyn(),
            Op::Conv2d {
                x,
                w,
                b,
                pad,
                dilation,
            },
            needs,
        )
    }

    pub fn max_pool2(&mut self, x: NodeId) -> NodeId {
        let xv = as4(self.value(x));
        let (n, c, h, w) = xv.dim();
        assert!(h % 2 == 0 && w % 2 == 0, "max pool needs even spatial size");
        let (ho, wo) = (h / 2, w / 2);
        let mut y = Array4::<T>::zeros((n, c, ho, wo));
        let mut argmax = vec![0u32; n * c * ho * wo];
        let mut flat = 0;
        for ni in 0..n {
            for ci in 0..c {
                for i in 0..ho {
                    for j in 0..wo {
                        let mut best = xv[[ni, ci, 2 * i, 2 * j]];
                        let mut best_idx = (2 * i) * w + 2 * j;
                        for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                            let v = xv[[ni, ci, 2 * i + di, 2 * j + dj]];
                            if v > best {
                                best = v;
                                best_idx = (2 * i + di) * w + (2 * j + dj);
                            }
                        }
                        y[[ni, ci, i, j]] = best;
                        argmax[flat] = best_idx as u32;
                        flat += 1;
                    }
                }
            }
        }
        let needs = self.needs(x);
        self.push(y.into_dyn(), Op::MaxPool2x2 { x, argmax }, needs)
    }

    /// Batch normalization over (N, H, W) per channel.
    ///
    /// `stats` supplies fixed statistics (evaluation mode); when `None`,
    /// batch statistics are computed and returned so the caller can update
    /// its running averages.
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        stats: Option<(&Array1<T>, &Array1<T>)>,
    ) -> (NodeId, Option<(Array1<T>, Array1<T>)>) {
        let xv = as4(self.value(x));
        let (n, c, h, w) = xv.dim();
        let m = T::from_f64_c((n * h * w) as f64);
        let eps = T::from_f64_c(BN_EPS);
        let (mean, var, batch_stats) = match stats {
            Some((mean, var)) => (mean.clone(), var.clone(), None),
            None => {
                let mean = xv.sum_axis(Axis(0)).sum_axis(Axis(1)).sum_axis(Axis(1)) / m;
                let mut var = Array1::<T>::zeros(c);
                for ci in 0..c {
                    let mu = mean[ci];
                    let mut acc = T::zero();
                    for ni in 0..n {
                        for i in 0..h {
                            for j in 0..w {
                                let d = xv[[ni, ci, i, j]] - mu;
                                acc += d * d;
                            }
                        }
                    }
                    var[ci] = acc / m;
                }
                let stats = (mean.clone(), var.clone());
                (mean, var, Some(stats))
            }
        };
        let inv_std = var.mapv(|v| T::one() / (v + eps).sqrt());
        let gv: Array1<T> = self
            .value(gamma)
            .view()
            .into_dimensionality()
            .expect("gamma rank")
            .to_owned();
        let bv: Array1<T> = self
            .value(beta)
            .view()
            .into_dimensionality()
            .expect("beta rank")
            .to_owned();
        let mean_b = mean.view().into_shape_with_order((1, c, 1, 1)).unwrap();
        let istd_b = inv_std.view().into_shape_with_order((1, c, 1, 1)).unwrap();
        let xhat = (&xv - &mean_b) * &istd_b;
        let g_b = gv.view().into_shape_with_order((1, c, 1, 1)).unwrap();
        let b_b = bv.view().into_shape_with_order((1, c, 1, 1)).unwrap();
        let y = &xhat * &g_b + &b_b;
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let id = self.push(
            y.into_dyn(),
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat: xhat.into_dyn(),
                inv_std,
            },
            needs,
        );
        (id, batch_stats)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let y = self.value(x).mapv(|v| v.max(T::zero()));
        let needs = self.needs(x);
        self.push(y, Op::Relu { x }, needs)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let y = self
            .value(x)
            .mapv(|v| T::one() / (T::one() + (-v).exp()));
        let needs = self.needs(x);
        self.push(y, Op::Sigmoid { x }, needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let y = self.value(a) + self.value(b);
        let needs = self.needs(a) || self.needs(b);
        self.push(y, Op::Add { a, b }, needs)
    }

    /// Elementwise product where `b` broadcasts over `a` (same rank,
    /// size-1 axes in `b`).
    pub fn mul_broadcast(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a);
        let bv = self.value(b);
        assert_eq!(av.ndim(), bv.ndim(), "broadcast rank mismatch");
        let bb = bv.broadcast(av.raw_dim()).expect("broadcastable");
        let y = av * &bb;
        let needs = self.needs(a) || self.needs(b);
        self.push(y, Op::MulBroadcast { a, b }, needs)
    }

    pub fn concat_channels(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = as4(self.value(a));
        let bv = as4(self.value(b));
        let split = av.dim().1;
        let y = concatenate(Axis(1), &[av.view(), bv.view()]).expect("concat shapes");
        let needs = self.needs(a) || self.needs(b);
        self.push(y.into_dyn(), Op::ConcatChannels { a, b, split }, needs)
    }

    pub fn pixel_shuffle(&mut self, x: NodeId, r: usize) -> NodeId {
        let xv = as4(self.value(x));
        let (n, c, h, w) = xv.dim();
        assert!(c % (r * r) == 0, "pixel shuffle channel divisibility");
        let co = c / (r * r);
        let mut y = Array4::<T>::zeros((n, co, h * r, w * r));
        for ni in 0..n {
            for c_out in 0..co {
                for di in 0..r {
                    for dj in 0..r {
                        let c_in = c_out * r * r + di * r + dj;
                        for i in 0..h {
                            for j in 0..w {
                                y[[ni, c_out, i * r + di, j * r + dj]] = xv[[ni, c_in, i, j]];
                            }
                        }
                    }
                }
            }
        }
        let needs = self.needs(x);
        self.push(y.into_dyn(), Op::PixelShuffle { x, r }, needs)
    }

    pub fn global_avg_pool(&mut self, x: NodeId) -> NodeId {
        let xv = as4(self.value(x));
        let (_, _, h, w) = xv.dim();
        let y = xv.sum_axis(Axis(3)).sum_axis(Axis(2)) / T::from_f64_c((h * w) as f64);
        let needs = self.needs(x);
        self.push(y.into_dyn(), Op::GlobalAvgPool { x }, needs)
    }

    /// Fully connected layer: x is (N, I), w is (O, I), b is (O).
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let xv: Array2<T> = self
            .value(x)
            .view()
            .into_dimensionality()
            .expect("linear input rank")
            .to_owned();
        let wv: Array2<T> = self
            .value(w)
            .view()
            .into_dimensionality()
            .expect("linear weight rank")
            .to_owned();
        let bv: Array1<T> = self
            .value(b)
            .view()
            .into_dimensionality()
            .expect("linear bias rank")
            .to_owned();
        let mut y = xv.dot(&wv.t());
        for mut row in y.rows_mut() {
            row += &bv;
        }
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(y.into_dyn(), Op::Linear { x, w, b }, needs)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> NodeId {
        let y = self
            .value(x)
            .to_shape(IxDyn(shape))
            .expect("reshape size")
            .to_owned();
        let needs = self.needs(x);
        self.push(y, Op::Reshape { x }, needs)
    }

    /// Mean Smooth-L1 between `pred` and a constant target:
    /// `(sigma d)^2 / 2` when `|d| < 1`, else `|d| - 0.5 / sigma^2`.
    pub fn smooth_l1_mean(&mut self, pred: NodeId, target: ArrayD<T>, sigma: T) -> NodeId {
        let pv = self.value(pred);
        assert_eq!(pv.shape(), target.shape(), "smooth l1 shape mismatch");
        let count = T::from_f64_c(pv.len() as f64);
        let half = T::from_f64_c(0.5);
        let mut acc = T::zero();
        for (&p, &t) in pv.iter().zip(target.iter()) {
            let d = p - t;
            acc += if d.abs() < T::one() {
                (sigma * d) * (sigma * d) * half
            } else {
                d.abs() - half / (sigma * sigma)
            };
        }
        let y = ArrayD::from_elem(IxDyn(&[]), acc / count);
        let needs = self.needs(pred);
        self.push(
            y,
            Op::SmoothL1Mean {
                pred,
                target,
                sigma,
            },
            needs,
        )
    }

    /// Weighted sum of scalar nodes.
    pub fn scaled_sum(&mut self, terms: Vec<(NodeId, T)>) -> NodeId {
        let mut acc = T::zero();
        for &(id, k) in &terms {
            acc += self.scalar(id) * k;
        }
        let y = ArrayD::from_elem(IxDyn(&[]), acc);
        let needs = terms.iter().any(|&(id, _)| self.needs(id));
        self.push(y, Op::ScaledSum { terms }, needs)
    }

    /// Reverse pass from a scalar root.
    pub fn backward(&self, root: NodeId) -> Gradients<T> {
        let mut grads: Vec<Option<ArrayD<T>>> = vec![None; self.nodes.len()];
        assert_eq!(self.nodes[root.0].value.len(), 1, "backward root must be scalar");
        grads[root.0] = Some(ArrayD::from_elem(
            self.nodes[root.0].value.raw_dim(),
            T::one(),
        ));
        for i in (0..=root.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(dy) = grads[i].take() else { continue };
            self.step_backward(i, &dy, &mut grads);
            grads[i] = Some(dy);
        }
        Gradients { grads }
    }

    fn step_backward(&self, i: usize, dy: &ArrayD<T>, grads: &mut [Option<ArrayD<T>>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d {
                x,
                w,
                b,
                pad,
                dilation,
            } => {
                let xv = as4(self.value(*x));
                let wv = as4(self.value(*w));
                let dyv = as4(dy);
                let need_dx = self.needs(*x);
                let (dx, dw, db) = conv2d_backward(
                    &xv.view(),
                    &wv.view(),
                    &dyv.view(),
                    *pad,
                    *dilation,
                    need_dx,
                );
                if let Some(dx) = dx {
                    accumulate(&mut grads[x.0], dx.into_dyn());
                }
                if self.needs(*w) {
                    accumulate(&mut grads[w.0], dw.into_dyn());
                }
                if let Some(bid) = b {
                    if self.needs(*bid) {
                        accumulate(&mut grads[bid.0], db.into_dyn());
                    }
                }
            }
            Op::MaxPool2x2 { x, argmax } => {
                let xv = as4(self.value(*x));
                let (n, c, h, w) = xv.dim();
                let dyv = as4(dy);
                let (_, _, ho, wo) = dyv.dim();
                let mut dx = Array4::<T>::zeros((n, c, h, w));
                let mut flat = 0;
                for ni in 0..n {
                    for ci in 0..c {
                        for i in 0..ho {
                            for j in 0..wo {
                                let idx = argmax[flat] as usize;
                                dx[[ni, ci, idx / w, idx % w]] += dyv[[ni, ci, i, j]];
                                flat += 1;
                            }
                        }
                    }
                }
                accumulate(&mut grads[x.0], dx.into_dyn());
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let dyv = as4(dy);
                let xh = as4(xhat);
                let (n, c, h, w) = dyv.dim();
                let m = T::from_f64_c((n * h * w) as f64);
                let dbeta = dyv.sum_axis(Axis(0)).sum_axis(Axis(1)).sum_axis(Axis(1));
                let dgamma = (&dyv * &xh)
                    .sum_axis(Axis(0))
                    .sum_axis(Axis(1))
                    .sum_axis(Axis(1));
                if self.needs(*x) {
                    let gv: Array1<T> = self
                        .value(*gamma)
                        .view()
                        .into_dimensionality()
                        .expect("gamma rank")
                        .to_owned();
                    let coef = Array1::from_shape_fn(c, |ci| gv[ci] * inv_std[ci] / m);
                    let coef_b = coef.view().into_shape_with_order((1, c, 1, 1)).unwrap();
                    let dg_b = dgamma.view().into_shape_with_order((1, c, 1, 1)).unwrap();
                    let db_b = dbeta.view().into_shape_with_order((1, c, 1, 1)).unwrap();
                    let dx = &coef_b * &(&dyv * m - &xh * &dg_b - &db_b);
                    accumulate(&mut grads[x.0], dx.into_dyn());
                }
                if self.needs(*gamma) {
                    accumulate(&mut grads[gamma.0], dgamma.into_dyn());
                }
                if self.needs(*beta) {
                    accumulate(&mut grads[beta.0], dbeta.into_dyn());
                }
            }
            Op::Relu { x } => {
                let mask = self.value(*x).mapv(|v| {
                    if v > T::zero() {
                        T::one()
                    } else {
                        T::zero()
                    }
                });
                accumulate(&mut grads[x.0], dy * &mask);
            }
            Op::Sigmoid { x } => {
                let y = &self.nodes[i].value;
                let dx = dy * &y.mapv(|v| v * (T::one() - v));
                accumulate(&mut grads[x.0], dx);
            }
            Op::Add { a, b } => {
                if self.needs(*a) {
                    accumulate(&mut grads[a.0], dy.clone());
                }
                if self.needs(*b) {
                    accumulate(&mut grads[b.0], dy.clone());
                }
            }
            Op::MulBroadcast { a, b } => {
                let av = self.value(*a);
                let bv = self.value(*b);
                if self.needs(*a) {
                    let bb = bv.broadcast(av.raw_dim()).expect("broadcastable");
                    accumulate(&mut grads[a.0], dy * &bb);
                }
                if self.needs(*b) {
                    let mut db = dy * av;
                    // reduce over the axes b broadcasts along, keeping rank
                    for ax in 0..bv.ndim() {
                        if bv.shape()[ax] == 1 && db.shape()[ax] != 1 {
                            db = db.sum_axis(Axis(ax)).insert_axis(Axis(ax));
                        }
                    }
                    accumulate(&mut grads[b.0], db);
                }
            }
            Op::ConcatChannels { a, b, split } => {
                let dyv = as4(dy);
                if self.needs(*a) {
                    let da = dyv.slice(ndarray::s![.., ..*split, .., ..]).to_owned();
                    accumulate(&mut grads[a.0], da.into_dyn());
                }
                if self.needs(*b) {
                    let db = dyv.slice(ndarray::s![.., *split.., .., ..]).to_owned();
                    accumulate(&mut grads[b.0], db.into_dyn());
                }
            }
            Op::PixelShuffle { x, r } => {
                let dyv = as4(dy);
                let (n, co, hr, wr) = dyv.dim();
                let r = *r;
                let (h, w) = (hr / r, wr / r);
                let mut dx = Array4::<T>::zeros((n, co * r * r, h, w));
                for ni in 0..n {
                    for c_out in 0..co {
                        for di in 0..r {
                            for dj in 0..r {
                                let c_in = c_out * r * r + di * r + dj;
                                for i in 0..h {
                                    for j in 0..w {
                                        dx[[ni, c_in, i, j]] =
                                            dyv[[ni, c_out, i * r + di, j * r + dj]];
                                    }
                                }
                            }
                        }
                    }
                }
                accumulate(&mut grads[x.0], dx.into_dyn());
            }
            Op::GlobalAvgPool { x } => {
                let xv = as4(self.value(*x));
                let (n, c, h, w) = xv.dim();
                let dyv: Array2<T> = dy
                    .view()
                    .into_dimensionality()
                    .expect("gap grad rank")
                    .to_owned();
                let scale = T::one() / T::from_f64_c((h * w) as f64);
                let mut dx = Array4::<T>::zeros((n, c, h, w));
                for ni in 0..n {
                    for ci in 0..c {
                        let g = dyv[[ni, ci]] * scale;
                        dx.index_axis_mut(Axis(0), ni)
                            .index_axis_mut(Axis(0), ci)
                            .mapv_inplace(|v| v + g);
                    }
                }
                accumulate(&mut grads[x.0], dx.into_dyn());
            }
            Op::Linear { x, w, b } => {
                let xv: Array2<T> = self
                    .value(*x)
                    .view()
                    .into_dimensionality()
                    .expect("linear input rank")
                    .to_owned();
                let wv: Array2<T> = self
                    .value(*w)
                    .view()
                    .into_dimensionality()
                    .expect("linear weight rank")
                    .to_owned();
                let dyv: Array2<T> = dy
                    .view()
                    .into_dimensionality()
                    .expect("linear grad rank")
                    .to_owned();
                if self.needs(*x) {
                    accumulate(&mut grads[x.0], dyv.dot(&wv).into_dyn());
                }
                if self.needs(*w) {
                    accumulate(&mut grads[w.0], dyv.t().dot(&xv).into_dyn());
                }
                if self.needs(*b) {
                    accumulate(&mut grads[b.0], dyv.sum_axis(Axis(0)).into_dyn());
                }
            }
            Op::Reshape { x } => {
                let dx = dy
                    .to_shape(self.value(*x).raw_dim())
                    .expect("reshape grad")
                    .to_owned();
                accumulate(&mut grads[x.0], dx);
            }
            Op::SmoothL1Mean {
                pred,
                target,
                sigma,
            } => {
                let pv = self.value(*pred);
                let scale = *dy.iter().next().expect("scalar grad")
                    / T::from_f64_c(pv.len() as f64);
                let mut dp = ArrayD::<T>::zeros(pv.raw_dim());
                let s2 = *sigma * *sigma;
                for ((dst, &p), &t) in dp.iter_mut().zip(pv.iter()).zip(target.iter()) {
                    let d = p - t;
                    *dst = scale
                        * if d.abs() < T::one() {
                            s2 * d
                        } else {
                            d.signum()
                        };
                }
                accumulate(&mut grads[pred.0], dp);
            }
            Op::ScaledSum { terms } => {
                let g = *dy.iter().next().expect("scalar grad");
                for &(id, k) in terms {
                    if self.needs(id) {
                        accumulate(
                            &mut grads[id.0],
                            ArrayD::from_elem(IxDyn(&[]), g * k),
                        );
                    }
                }
            }
        }
    }
}

/// Per-node gradient slots produced by [`Tape::backward`].
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<ArrayD<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: NodeId) -> Option<&ArrayD<T>> {
        self.grads[id.0].as_ref()
    }

    pub fn take(&mut self, id: NodeId) -> Option<ArrayD<T>> {
        self.grads[id.0].take()
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<ArrayD<T>>, g: ArrayD<T>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

fn as4<T: Scalar>(v: &ArrayD<T>) -> ndarray::ArrayView4<'_, T> {
    v.view()
        .into_dimensionality::<Ix4>()
        .expect("rank-4 tensor expected")
}

#[allow(dead_code)]
fn as2<T: Scalar>(v: &ArrayD<T>) -> ndarray::ArrayView2<'_, T> {
    v.view()
        .into_dimensionality::<Ix2>()
        .expect("rank-2 tensor expected")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{Array, Array4};

    #[test]
    fn pixel_shuffle_matches_definition() {
        let mut tape = Tape::<f64>::new();
        let x = Array::from_shape_vec(IxDyn(&[1, 4, 1, 1]), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let xid = tape.leaf(x, false);
        let y = tape.pixel_shuffle(xid, 2);
        let yv = tape.value(y);
        assert_eq!(yv.shape(), &[1, 1, 2, 2]);
        assert_eq!(yv[[0, 0, 0, 0]], 1.0);
        assert_eq!(yv[[0, 0, 0, 1]], 2.0);
        assert_eq!(yv[[0, 0, 1, 0]], 3.0);
        assert_eq!(yv[[0, 0, 1, 1]], 4.0);
    }

    #[test]
    fn pixel_shuffle_preserves_multiset_and_sum() {
        let mut tape = Tape::<f64>::new();
        let x = Array::from_shape_fn(IxDyn(&[2, 8, 3, 5]), |ix| {
            (ix[0] * 1000 + ix[1] * 100 + ix[2] * 10 + ix[3]) as f64
        });
        let sum_before = x.sum();
        let mut before: Vec<u64> = x.iter().map(|&v| v as u64).collect();
        let xid = tape.leaf(x, false);
        let y = tape.pixel_shuffle(xid, 2);
        let yv = tape.value(y);
        assert_eq!(yv.shape(), &[2, 2, 6, 10]);
        assert_eq!(yv.sum(), sum_before);
        let mut after: Vec<u64> = yv.iter().map(|&v| v as u64).collect();
        before.sort_unstable();
        after.sort_unstable();
        assert_eq!(before, after);
    }

    #[test]
    fn max_pool_forward_and_backward_route() {
        let mut tape = Tape::<f64>::new();
        let x = Array::from_shape_vec(
            IxDyn(&[1, 1, 2, 4]),
            vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, 1.0, 6.0],
        )
        .unwrap();
        let xid = tape.leaf(x, true);
        let y = tape.max_pool2(xid);
        assert_eq!(tape.value(y).shape(), &[1, 1, 1, 2]);
        assert_eq!(tape.value(y)[[0, 0, 0, 0]], 5.0);
        assert_eq!(tape.value(y)[[0, 0, 0, 1]], 6.0);
        let loss = tape.smooth_l1_mean(y, ArrayD::zeros(IxDyn(&[1, 1, 1, 2])), 1.0);
        let grads = tape.backward(loss);
        let dx = grads.get(xid).unwrap();
        // gradient lands only on the argmax entries (values 5 and 6)
        assert!(dx[[0, 0, 0, 1]] != 0.0);
        assert!(dx[[0, 0, 1, 3]] != 0.0);
        assert_eq!(dx[[0, 0, 0, 0]], 0.0);
        assert_eq!(dx[[0, 0, 1, 0]], 0.0);
    }

    #[test]
    fn smooth_l1_scalar_values() {
        let mut tape = Tape::<f64>::new();
        for (x, expect) in [(0.0, 0.0), (0.5, 0.125), (2.0, 1.5), (-2.0, 1.5)] {
            let p = tape.leaf(ArrayD::from_elem(IxDyn(&[1]), x), false);
            let l = tape.smooth_l1_mean(p, ArrayD::zeros(IxDyn(&[1])), 1.0);
            assert_abs_diff_eq!(tape.scalar(l), expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn concat_splits_gradient() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Array4::<f64>::ones((1, 2, 2, 2)).into_dyn(), true);
        let b = tape.leaf(Array4::<f64>::zeros((1, 3, 2, 2)).into_dyn(), true);
        let y = tape.concat_channels(a, b);
        assert_eq!(tape.value(y).shape(), &[1, 5, 2, 2]);
        let target = ArrayD::zeros(IxDyn(&[1, 5, 2, 2]));
        let loss = tape.smooth_l1_mean(y, target, 1.0);
        let grads = tape.backward(loss);
        assert_eq!(grads.get(a).unwrap().shape(), &[1, 2, 2, 2]);
        assert_eq!(grads.get(b).unwrap().shape(), &[1, 3, 2, 2]);
    }

    #[test]
    fn sigmoid_stays_in_unit_interval() {
        let mut tape = Tape::<f32>::new();
        let x = Array::from_shape_fn(IxDyn(&[64]), |i| (i[0] as f32 - 32.0) * 0.5);
        let xid = tape.leaf(x, false);
        let y = tape.sigmoid(xid);
        assert!(tape.value(y).iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
