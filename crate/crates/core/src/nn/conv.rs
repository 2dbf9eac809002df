//! Stride-1 2-D convolution via im2col + GEMM, with dilation support.

use super::Scalar;
use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView3, ArrayView4, Axis};
use rayon::prelude::*;

/// Output spatial size for a stride-1 convolution.
pub fn conv_out_size(input: usize, kernel: usize, pad: usize, dilation: usize) -> usize {
    input + 2 * pad - dilation * (kernel - 1)
}

fn im2col<T: Scalar>(
    x: &ArrayView3<'_, T>,
    kernel: (usize, usize),
    pad: (usize, usize),
    dilation: (usize, usize),
) -> Array2<T> {
    let (c, h, w) = x.dim();
    let (kh, kw) = kernel;
    let (ph, pw) = pad;
    let (dh, dw) = dilation;
    let h_out = conv_out_size(h, kh, ph, dh);
    let w_out = conv_out_size(w, kw, pw, dw);
    let mut padded = Array3::<T>::zeros((c, h + 2 * ph, w + 2 * pw));
    padded.slice_mut(s![.., ph..ph + h, pw..pw + w]).assign(x);
    let mut col = Array2::<T>::zeros((c * kh * kw, h_out * w_out));
    let mut row = 0;
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let window = padded.slice(s![
                    ci,
                    ki * dh..ki * dh + h_out,
                    kj * dw..kj * dw + w_out
                ]);
                for (dst, &src) in col.row_mut(row).iter_mut().zip(window.iter()) {
                    *dst = src;
                }
                row += 1;
            }
        }
    }
    col
}

fn col2im<T: Scalar>(
    dcol: &Array2<T>,
    shape: (usize, usize, usize),
    kernel: (usize, usize),
    pad: (usize, usize),
    dilation: (usize, usize),
) -> Array3<T> {
    let (c, h, w) = shape;
    let (kh, kw) = kernel;
    let (ph, pw) = pad;
    let (dh, dw) = dilation;
    let h_out = conv_out_size(h, kh, ph, dh);
    let w_out = conv_out_size(w, kw, pw, dw);
    let mut padded = Array3::<T>::zeros((c, h + 2 * ph, w + 2 * pw));
    let mut row = 0;
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let mut window = padded.slice_mut(s![
                    ci,
                    ki * dh..ki * dh + h_out,
                    kj * dw..kj * dw + w_out
                ]);
                for (dst, &src) in window.iter_mut().zip(dcol.row(row).iter()) {
                    *dst += src;
                }
                row += 1;
            }
        }
    }
    padded.slice(s![.., ph..ph + h, pw..pw + w]).to_owned()
}

fn conv_single<T: Scalar>(
    x: &ArrayView3<'_, T>,
    w_mat: &Array2<T>,
    bias: Option<&Array1<T>>,
    kernel: (usize, usize),
    pad: (usize, usize),
    dilation: (usize, usize),
) -> Array3<T> {
    let (_, h, w) = x.dim();
    let h_out = conv_out_size(h, kernel.0, pad.0, dilation.0);
    let w_out = conv_out_size(w, kernel.1, pad.1, dilation.1);
    let col = im2col(x, kernel, pad, dilation);
    let mut y = w_mat.dot(&col);
    if let Some(b) = bias {
        for (mut row, &bv) in y.rows_mut().into_iter().zip(b.iter()) {
            row.mapv_inplace(|v| v + bv);
        }
    }
    let o = w_mat.nrows();
    y.into_shape_with_order((o, h_out, w_out)).expect("conv output shape")
}

/// Batched stride-1 convolution. `x` is (N, C, H, W), `weight` is
/// (O, C, kh, kw); output is (N, O, H', W').
pub fn conv2d_forward<T: Scalar>(
    x: &ArrayView4<'_, T>,
    weight: &ArrayView4<'_, T>,
    bias: Option<&Array1<T>>,
    pad: (usize, usize),
    dilation: (usize, usize),
) -> Array4<T> {
    let (n, _, h, w) = x.dim();
    let (o, c, kh, kw) = weight.dim();
    assert_eq!(x.dim().1, c, "conv input channels");
    let w_mat = weight
        .to_shape((o, c * kh * kw))
        .expect("weight reshape")
        .to_owned();
    let h_out = conv_out_size(h, kh, pad.0, dilation.0);
    let w_out = conv_out_size(w, kw, pad.1, dilation.1);
    let mut out = Array4::<T>::zeros((n, o, h_out, w_out));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut slot)| {
            let xi = x.index_axis(Axis(0), i);
            slot.assign(&conv_single(&xi, &w_mat, bias, (kh, kw), pad, dilation));
        });
    out
}

/// Gradients of a batched stride-1 convolution.
///
/// Returns `(dx, dw, db)`; `dx` is skipped when `need_dx` is false (the
/// network input does not require a gradient).
pub fn conv2d_backward<T: Scalar>(
    x: &ArrayView4<'_, T>,
    weight: &ArrayView4<'_, T>,
    dy: &ArrayView4<'_, T>,
    pad: (usize, usize),
    dilation: (usize, usize),
    need_dx: bool,
) -> (Option<Array4<T>>, Array4<T>, Array1<T>) {
    let (n, c, h, w) = x.dim();
    let (o, _, kh, kw) = weight.dim();
    let (_, _, h_out, w_out) = dy.dim();
    let w_mat = weight
        .to_shape((o, c * kh * kw))
        .expect("weight reshape")
        .to_owned();
    let w_mat_t = w_mat.t().to_owned();

    let per_sample: Vec<(Array2<T>, Array1<T>, Option<Array3<T>>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.index_axis(Axis(0), i);
            let dyi = dy
                .index_axis(Axis(0), i)
                .to_shape((o, h_out * w_out))
                .expect("dy reshape")
                .to_owned();
            let col = im2col(&xi, (kh, kw), pad, dilation);
            let dw_i = dyi.dot(&col.t());
            let db_i = dyi.sum_axis(Axis(1));
            let dx_i = need_dx.then(|| {
                let dcol = w_mat_t.dot(&dyi);
                col2im(&dcol, (c, h, w), (kh, kw), pad, dilation)
            });
            (dw_i, db_i, dx_i)
        })
        .collect();

    let mut dw = Array2::<T>::zeros((o, c * kh * kw));
    let mut db = Array1::<T>::zeros(o);
    let mut dx = need_dx.then(|| Array4::<T>::zeros((n, c, h, w)));
    // deterministic accumulation in sample order
    for (i, (dw_i, db_i, dx_i)) in per_sample.into_iter().enumerate() {
        dw += &dw_i;
        db += &db_i;
        if let (Some(dx), Some(dx_i)) = (dx.as_mut(), dx_i) {
            dx.index_axis_mut(Axis(0), i).assign(&dx_i);
        }
    }
    let dw = dw
        .into_shape_with_order((o, c, kh, kw))
        .expect("dw shape");
    (dx, dw, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array4};

    #[test]
    fn conv_identity_kernel() {
        // 1x1 kernel with unit weight reproduces the input
        let x = Array4::from_shape_fn((1, 1, 4, 4), |(_, _, i, j)| (i * 4 + j) as f64);
        let w = Array4::from_elem((1, 1, 1, 1), 1.0);
        let y = conv2d_forward(&x.view(), &w.view(), None, (0, 0), (1, 1));
        assert_eq!(y, x);
    }

    #[test]
    fn conv_known_3x3_sum() {
        // all-ones 3x3 kernel with pad 1 computes neighborhood sums
        let x = Array4::from_elem((1, 1, 3, 3), 1.0f64);
        let w = Array4::from_elem((1, 1, 3, 3), 1.0);
        let y = conv2d_forward(&x.view(), &w.view(), None, (1, 1), (1, 1));
        assert_eq!(y.dim(), (1, 1, 3, 3));
        // center pixel sees all 9, corner sees 4
        assert_abs_diff_eq!(y[[0, 0, 1, 1]], 9.0);
        assert_abs_diff_eq!(y[[0, 0, 0, 0]], 4.0);
    }

    #[test]
    fn conv_dilated_shape_preserved() {
        let x = Array4::from_elem((2, 3, 12, 12), 0.5f32);
        let w = Array4::from_elem((4, 3, 3, 3), 0.1f32);
        // dilation 3 with pad 3 preserves spatial size
        let y = conv2d_forward(&x.view(), &w.view(), None, (3, 3), (3, 3));
        assert_eq!(y.dim(), (2, 4, 12, 12));
    }

    #[test]
    fn conv_asymmetric_kernel_1x7() {
        let x = Array4::from_elem((1, 2, 8, 8), 1.0f64);
        let w = Array4::from_elem((3, 2, 1, 7), 1.0);
        let y = conv2d_forward(&x.view(), &w.view(), None, (0, 3), (1, 1));
        assert_eq!(y.dim(), (1, 3, 8, 8));
        // interior output = 2 channels x 7 taps
        assert_abs_diff_eq!(y[[0, 0, 4, 4]], 14.0);
    }

    #[test]
    fn conv_bias_applied() {
        let x = Array4::zeros((1, 1, 2, 2));
        let w = Array4::from_elem((2, 1, 1, 1), 1.0f64);
        let b = array![1.5, -2.0];
        let y = conv2d_forward(&x.view(), &w.view(), Some(&b), (0, 0), (1, 1));
        assert_abs_diff_eq!(y[[0, 0, 0, 0]], 1.5);
        assert_abs_diff_eq!(y[[0, 1, 1, 1]], -2.0);
    }

    #[test]
    fn conv_backward_matches_finite_difference() {
        let mut x = Array4::from_shape_fn((2, 2, 5, 5), |(n, c, i, j)| {
            ((n + 1) as f64 * 0.3 + c as f64 * 0.11 + (i * 5 + j) as f64 * 0.017).sin()
        });
        let mut w = Array4::from_shape_fn((3, 2, 3, 3), |(o, c, i, j)| {
            ((o * 18 + c * 9 + i * 3 + j) as f64 * 0.05).cos() * 0.2
        });
        let b = array![0.1, -0.2, 0.05];
        let pad = (1, 1);
        let dil = (1, 1);
        let loss = |x: &Array4<f64>, w: &Array4<f64>, b: &Array1<f64>| -> f64 {
            conv2d_forward(&x.view(), &w.view(), Some(b), pad, dil)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                / 2.0
        };
        let y = conv2d_forward(&x.view(), &w.view(), Some(&b), pad, dil);
        let (dx, dw, db) = conv2d_backward(&x.view(), &w.view(), &y.view(), pad, dil, true);
        let dx = dx.unwrap();
        let h = 1e-6;
        for &idx in &[(0usize, 0usize, 0usize, 0usize), (1, 1, 2, 3), (0, 1, 4, 4)] {
            let orig = x[idx];
            x[idx] = orig + h;
            let up = loss(&x, &w, &b);
            x[idx] = orig - h;
            let down = loss(&x, &w, &b);
            x[idx] = orig;
            assert_abs_diff_eq!(dx[idx], (up - down) / (2.0 * h), epsilon = 1e-5);
        }
        for &idx in &[(0usize, 0usize, 0usize, 0usize), (2, 1, 1, 2), (1, 0, 2, 0)] {
            let orig = w[idx];
            w[idx] = orig + h;
            let up = loss(&x, &w, &b);
            w[idx] = orig - h;
            let down = loss(&x, &w, &b);
            w[idx] = orig;
            assert_abs_diff_eq!(dw[idx], (up - down) / (2.0 * h), epsilon = 1e-5);
        }
        let mut b2 = b.clone();
        let orig = b2[1];
        b2[1] = orig + h;
        let up = loss(&x, &w, &b2);
        b2[1] = orig - h;
        let down = loss(&x, &w, &b2);
        assert_abs_diff_eq!(db[1], (up - down) / (2.0 * h), epsilon = 1e-5);
    }
}
