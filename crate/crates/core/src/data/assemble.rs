//! Assembling raw sample files into the square n-channel network input,
//! with labels rescaled through the identical geometry.

use super::{imageio, DataError, DepthFill, InputSpec, Normalize, SampleRecord};
use crate::grasp::GraspRectangle;
use ndarray::{Array2, Array3, Axis};
use std::collections::VecDeque;

/// Loads, crops, resizes and normalizes one sample.
///
/// Returns the (C, size, size) input stack together with the grasp
/// rectangles mapped into the output frame; rectangles whose centers leave
/// the cropped frame are dropped.
pub fn assemble_input(
    rec: &SampleRecord,
    spec: &InputSpec,
) -> Result<(Array3<f32>, Vec<GraspRectangle>), DataError> {
    spec.validate()?;
    let rgb = if spec.channels.needs_rgb() {
        let path = rec
            .rgb_path
            .as_ref()
            .ok_or_else(|| DataError::MissingRgb(rec.sample_id.clone()))?;
        Some(imageio::load_rgb(path)?)
    } else {
        None
    };
    let depth = if spec.channels.needs_depth() {
        let dims = rgb.as_ref().map(|r| (r.dim().2, r.dim().1));
        let mut d = imageio::load_depth(&rec.depth_path, dims)?;
        if spec.depth_fill == DepthFill::NearestValid {
            fill_invalid_depth(&mut d, &rec.depth_path)?;
        }
        Some(d)
    } else {
        None
    };

    // geometry comes from whichever raster is present
    let (src_h, src_w) = depth
        .as_ref()
        .map(|d| d.dim())
        .or_else(|| rgb.as_ref().map(|r| (r.dim().1, r.dim().2)))
        .expect("at least one channel source");
    if let (Some(d), Some(r)) = (depth.as_ref(), rgb.as_ref()) {
        if d.dim() != (r.dim().1, r.dim().2) {
            return Err(DataError::Parse {
                path: rec.depth_path.clone(),
                message: format!(
                    "depth {:?} and rgb {:?} dimensions disagree",
                    d.dim(),
                    (r.dim().1, r.dim().2)
                ),
            });
        }
    }

    let side = src_h.min(src_w);
    let off_x = (src_w - side) / 2;
    let off_y = (src_h - side) / 2;
    let scale = spec.size as f64 / side as f64;

    let mut channels: Vec<Array2<f32>> = Vec::with_capacity(spec.channels.channels());
    if let Some(rgb) = &rgb {
        for c in 0..3 {
            let plane = rgb.index_axis(Axis(0), c).to_owned();
            let cropped = crop(&plane, off_y, off_x, side);
            channels.push(resize_bilinear(&cropped, spec.size));
        }
    }
    if let Some(depth) = &depth {
        let cropped = crop(depth, off_y, off_x, side);
        channels.push(resize_bilinear(&cropped, spec.size));
    }

    // normalize: depth is always the last channel when present
    let n_rgb = if rgb.is_some() { 3 } else { 0 };
    for (i, ch) in channels.iter_mut().enumerate() {
        let is_depth = i >= n_rgb;
        match spec.normalize {
            Normalize::PerImageZeroMean => {
                let mean = ch.mean().unwrap_or(0.0);
                ch.mapv_inplace(|v| v - mean);
                if is_depth {
                    ch.mapv_inplace(|v| v.clamp(-1.0, 1.0));
                }
            }
            Normalize::UnitRange => {
                let (mut lo, mut hi) = (f32::MAX, f32::MIN);
                for &v in ch.iter() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                let span = if hi > lo { hi - lo } else { 1.0 };
                ch.mapv_inplace(|v| (v - lo) / span);
            }
        }
    }

    let mut input = Array3::<f32>::zeros((channels.len(), spec.size, spec.size));
    for (i, ch) in channels.into_iter().enumerate() {
        input.index_axis_mut(Axis(0), i).assign(&ch);
    }

    let mut rects = Vec::new();
    for r in &rec.grasp_rects {
        let x = (r.x() - off_x as f64) * scale;
        let y = (r.y() - off_y as f64) * scale;
        if x >= 0.0 && y >= 0.0 && x < spec.size as f64 && y < spec.size as f64 {
            rects.push(GraspRectangle::new(
                x,
                y,
                r.theta(),
                r.w() * scale,
                r.h() * scale,
            )?);
        }
    }
    Ok((input, rects))
}

fn crop(src: &Array2<f32>, off_y: usize, off_x: usize, side: usize) -> Array2<f32> {
    src.slice(ndarray::s![off_y..off_y + side, off_x..off_x + side])
        .to_owned()
}

/// Bilinear resize of a square map to `size` x `size`.
pub(crate) fn resize_bilinear(src: &Array2<f32>, size: usize) -> Array2<f32> {
    let (h, w) = src.dim();
    if (h, w) == (size, size) {
        return src.clone();
    }
    let sy = h as f64 / size as f64;
    let sx = w as f64 / size as f64;
    Array2::from_shape_fn((size, size), |(y, x)| {
        // sample at the source-pixel center corresponding to (x, y)
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, h as f64 - 1.0);
        let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, w as f64 - 1.0);
        let y0 = fy.floor() as usize;
        let x0 = fx.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let dy = (fy - y0 as f64) as f32;
        let dx = (fx - x0 as f64) as f32;
        let top = src[[y0, x0]] * (1.0 - dx) + src[[y0, x1]] * dx;
        let bottom = src[[y1, x0]] * (1.0 - dx) + src[[y1, x1]] * dx;
        top * (1.0 - dy) + bottom * dy
    })
}

/// Multi-source BFS flood fill replacing invalid (zero or non-finite)
/// depth pixels with their nearest valid neighbor's value.
fn fill_invalid_depth(
    depth: &mut Array2<f32>,
    path: &std::path::Path,
) -> Result<(), DataError> {
    let (h, w) = depth.dim();
    let valid = |v: f32| v.is_finite() && v > 0.0;
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    let mut known = Array2::<bool>::from_elem((h, w), false);
    for ((y, x), &v) in depth.indexed_iter() {
        if valid(v) {
            known[[y, x]] = true;
            queue.push_back((y, x));
        }
    }
    if queue.is_empty() {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            message: "depth image has no valid pixels".into(),
        });
    }
    if queue.len() == h * w {
        return Ok(());
    }
    while let Some((y, x)) = queue.pop_front() {
        let v = depth[[y, x]];
        let neighbors = [
            (y.wrapping_sub(1), x),
            (y + 1, x),
            (y, x.wrapping_sub(1)),
            (y, x + 1),
        ];
        for (ny, nx) in neighbors {
            if ny < h && nx < w && !known[[ny, nx]] {
                known[[ny, nx]] = true;
                depth[[ny, nx]] = v;
                queue.push_back((ny, nx));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{ChannelMode, DatasetKind};
    use super::*;
    use crate::data::imageio::{save_depth_png, save_rgb_png};
    use std::path::Path;

    fn record(dir: &Path, w: usize, h: usize, with_rgb: bool) -> SampleRecord {
        let depth = Array2::from_shape_fn((h, w), |(y, x)| 0.8 + 0.0001 * (y + x) as f32);
        let depth_path = dir.join("s_depth.png");
        save_depth_png(&depth_path, &depth).unwrap();
        let rgb_path = if with_rgb {
            let rgb = Array3::from_elem((3, h, w), 0.25f32);
            let p = dir.join("s_RGB.png");
            save_rgb_png(&p, &rgb).unwrap();
            Some(p)
        } else {
            None
        };
        SampleRecord {
            sample_id: "s".into(),
            object_id: "s".into(),
            rgb_path,
            depth_path,
            grasp_rects: vec![GraspRectangle::new(
                w as f64 / 2.0,
                h as f64 / 2.0,
                0.3,
                30.0,
                12.0,
            )
            .unwrap()],
            source: DatasetKind::Cornell,
        }
    }

    #[test]
    fn depth_mode_shape_and_zero_mean() {
        let dir = tempfile::tempdir().unwrap();
        let rec = record(dir.path(), 320, 240, false);
        let spec = InputSpec {
            size: 96,
            ..InputSpec::default()
        };
        let (input, rects) = assemble_input(&rec, &spec).unwrap();
        assert_eq!(input.dim(), (1, 96, 96));
        let mean: f32 = input.iter().sum::<f32>() / input.len() as f32;
        assert!(mean.abs() < 1e-5, "mean {mean}");
        assert!(input.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(rects.len(), 1);
        // center of a 320x240 image maps to the center of the 96x96 crop
        assert!((rects[0].x() - 48.0).abs() < 1.0);
        assert!((rects[0].y() - 48.0).abs() < 1.0);
        // scale = 96/240
        assert!((rects[0].w() - 30.0 * 96.0 / 240.0).abs() < 1e-6);
    }

    #[test]
    fn rgbd_mode_has_four_channels() {
        let dir = tempfile::tempdir().unwrap();
        let rec = record(dir.path(), 300, 300, true);
        let spec = InputSpec {
            channels: ChannelMode::Rgbd,
            size: 100,
            ..InputSpec::default()
        };
        let (input, _) = assemble_input(&rec, &spec).unwrap();
        assert_eq!(input.dim(), (4, 100, 100));
    }

    #[test]
    fn rgb_requested_but_missing_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let rec = record(dir.path(), 300, 300, false);
        let spec = InputSpec {
            channels: ChannelMode::Rgb,
            ..InputSpec::default()
        };
        assert!(matches!(
            assemble_input(&rec, &spec),
            Err(DataError::MissingRgb(_))
        ));
    }

    #[test]
    fn constant_depth_normalizes_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let depth = Array2::from_elem((64, 64), 1.0f32);
        let depth_path = dir.path().join("c_depth.png");
        save_depth_png(&depth_path, &depth).unwrap();
        let rec = SampleRecord {
            sample_id: "c".into(),
            object_id: "c".into(),
            rgb_path: None,
            depth_path,
            grasp_rects: vec![GraspRectangle::new(32.0, 32.0, 0.0, 10.0, 5.0).unwrap()],
            source: DatasetKind::Cornell,
        };
        let spec = InputSpec {
            size: 64,
            ..InputSpec::default()
        };
        let (input, _) = assemble_input(&rec, &spec).unwrap();
        assert!(input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = InputSpec {
            size: 30,
            ..InputSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn off_frame_labels_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = record(dir.path(), 320, 240, false);
        // center inside the full image but outside the square center crop
        rec.grasp_rects = vec![GraspRectangle::new(5.0, 120.0, 0.0, 10.0, 5.0).unwrap()];
        let spec = InputSpec {
            size: 96,
            ..InputSpec::default()
        };
        let (_, rects) = assemble_input(&rec, &spec).unwrap();
        assert!(rects.is_empty());
    }
}
