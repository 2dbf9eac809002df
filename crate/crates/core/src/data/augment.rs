//! Label-consistent online augmentation.

use super::{AugmentSpec, DataError};
use crate::grasp::GraspRectangle;
use ndarray::{Array3, Axis};
use rand::Rng;

const MAX_RETRIES: usize = 10;

/// Applies a random rotation, zoom and translation to an assembled input,
/// mapping every grasp rectangle through the identical affine transform.
///
/// Grasps whose centers leave the frame are dropped; if a draw drops all
/// of them the transform is redrawn (bounded retries).
pub fn augment(
    image: &Array3<f32>,
    rects: &[GraspRectangle],
    spec: &AugmentSpec,
    rng: &mut impl Rng,
) -> Result<(Array3<f32>, Vec<GraspRectangle>), DataError> {
    spec.validate()?;
    for _ in 0..MAX_RETRIES {
        let rotation = if spec.rotate.1 > spec.rotate.0 {
            rng.random_range(spec.rotate.0..spec.rotate.1)
        } else {
            spec.rotate.0
        };
        let zoom = if spec.zoom.1 > spec.zoom.0 {
            rng.random_range(spec.zoom.0..spec.zoom.1)
        } else {
            spec.zoom.0
        };
        let (tx, ty) = if spec.crop > 0.0 {
            (
                rng.random_range(-spec.crop..spec.crop),
                rng.random_range(-spec.crop..spec.crop),
            )
        } else {
            (0.0, 0.0)
        };
        let (image_out, rects_out) = apply_affine(image, rects, rotation, zoom, (tx, ty))?;
        if !rects_out.is_empty() || rects.is_empty() {
            return Ok((image_out, rects_out));
        }
    }
    Err(DataError::AugmentExhausted(MAX_RETRIES))
}

/// Forward map: p' = R(theta) * (p - c) * zoom + c + t, with c the image
/// center. The image is resampled through the inverse map with bilinear
/// interpolation and zero fill outside the frame.
fn apply_affine(
    image: &Array3<f32>,
    rects: &[GraspRectangle],
    rotation: f64,
    zoom: f64,
    translate: (f64, f64),
) -> Result<(Array3<f32>, Vec<GraspRectangle>), DataError> {
    let (c, h, w) = image.dim();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (sin_r, cos_r) = rotation.sin_cos();

    let identity = rotation == 0.0 && zoom == 1.0 && translate == (0.0, 0.0);
    let out = if identity {
        image.clone()
    } else {
        let mut out = Array3::<f32>::zeros((c, h, w));
        for ci in 0..c {
            let src = image.index_axis(Axis(0), ci);
            let mut dst = out.index_axis_mut(Axis(0), ci);
            for y in 0..h {
                for x in 0..w {
                    // inverse map: p = R(-theta) * (q - c - t) / zoom + c
                    let qx = x as f64 - cx - translate.0;
                    let qy = y as f64 - cy - translate.1;
                    let px = (qx * cos_r + qy * sin_r) / zoom + cx;
                    let py = (-qx * sin_r + qy * cos_r) / zoom + cy;
                    if px < 0.0 || py < 0.0 || px > w as f64 - 1.0 || py > h as f64 - 1.0 {
                        continue;
                    }
                    let x0 = px.floor() as usize;
                    let y0 = py.floor() as usize;
                    let x1 = (x0 + 1).min(w - 1);
                    let y1 = (y0 + 1).min(h - 1);
                    let dx = (px - x0 as f64) as f32;
                    let dy = (py - y0 as f64) as f32;
                    let top = src[[y0, x0]] * (1.0 - dx) + src[[y0, x1]] * dx;
                    let bottom = src[[y1, x0]] * (1.0 - dx) + src[[y1, x1]] * dx;
                    dst[[y, x]] = top * (1.0 - dy) + bottom * dy;
                }
            }
        }
        out
    };

    let mut rects_out = Vec::new();
    for r in rects {
        let dx = r.x() - cx;
        let dy = r.y() - cy;
        let x = (dx * cos_r - dy * sin_r) * zoom + cx + translate.0;
        let y = (dx * sin_r + dy * cos_r) * zoom + cy + translate.1;
        if x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64 {
            rects_out.push(GraspRectangle::new(
                x,
                y,
                r.theta() + rotation,
                r.w() * zoom,
                r.h() * zoom,
            )?);
        }
    }
    Ok((out, rects_out))
}
