//! Raster outputs: map heatmaps and grasp-rectangle overlays.

use crate::data::DataError;
use crate::grasp::{GraspMaps, GraspRectangle};
use image::{ImageBuffer, Rgb, RgbImage};
use ndarray::{Array2, Array3};
use std::path::Path;

/// Five-anchor blue-to-red colormap over [0, 1].
fn colormap(v: f32) -> Rgb<u8> {
    const ANCHORS: [(f32, [u8; 3]); 5] = [
        (0.0, [18, 34, 98]),
        (0.25, [1, 135, 189]),
        (0.5, [68, 197, 87]),
        (0.75, [254, 197, 39]),
        (1.0, [220, 30, 31]),
    ];
    let x = v.clamp(0.0, 1.0);
    let mut i = 0;
    while i + 1 < ANCHORS.len() - 1 && x > ANCHORS[i + 1].0 {
        i += 1;
    }
    let (x0, c0) = ANCHORS[i];
    let (x1, c1) = ANCHORS[i + 1];
    let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    let lerp = |a: u8, b: u8| (a as f32 + t * (b as f32 - a as f32)).round() as u8;
    Rgb([lerp(c0[0], c1[0]), lerp(c0[1], c1[1]), lerp(c0[2], c1[2])])
}

/// Renders a scalar map in [0, 1] as a heatmap PNG.
pub fn save_heatmap(path: &Path, map: &Array2<f32>) -> Result<(), DataError> {
    let (h, w) = map.dim();
    let img: RgbImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        colormap(map[[y as usize, x as usize]])
    });
    img.save(path).map_err(|source| DataError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Renders the grasp angle derived from the cos/sin maps, mapped from
/// [-pi/2, pi/2) onto [0, 1], masked to zero where quality is below 0.05.
pub fn save_angle_heatmap(path: &Path, maps: &GraspMaps) -> Result<(), DataError> {
    let (h, w) = maps.quality.dim();
    let mut angle = Array2::<f32>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            if maps.quality[[y, x]] < 0.05 {
                continue;
            }
            let c = maps.cos2theta[[y, x]] as f64;
            let s = maps.sin2theta[[y, x]] as f64;
            if c == 0.0 && s == 0.0 {
                continue;
            }
            let phi = s.atan2(c) / 2.0;
            angle[[y, x]] = ((phi + std::f64::consts::FRAC_PI_2) / std::f64::consts::PI) as f32;
        }
    }
    save_heatmap(path, &angle)
}

/// Converts an assembled input stack into a displayable RGB base image.
/// RGB channels are min-max rescaled; depth-only inputs become grayscale.
pub fn input_to_rgb(input: &Array3<f32>) -> Array3<f32> {
    let (c, h, w) = input.dim();
    let mut out = Array3::<f32>::zeros((3, h, w));
    let rescale = |plane: ndarray::ArrayView2<f32>| -> Array2<f32> {
        let (mut lo, mut hi) = (f32::MAX, f32::MIN);
        for &v in plane.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = if hi > lo { hi - lo } else { 1.0 };
        plane.mapv(|v| (v - lo) / span)
    };
    if c >= 3 {
        for i in 0..3 {
            out.index_axis_mut(ndarray::Axis(0), i)
                .assign(&rescale(input.index_axis(ndarray::Axis(0), i)));
        }
    } else {
        let gray = rescale(input.index_axis(ndarray::Axis(0), 0));
        for i in 0..3 {
            out.index_axis_mut(ndarray::Axis(0), i).assign(&gray);
        }
    }
    out
}

fn draw_line(img: &mut RgbImage, a: [f64; 2], b: [f64; 2], color: Rgb<u8>) {
    let (w, h) = img.dimensions();
    let steps = ((b[0] - a[0]).abs().max((b[1] - a[1]).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = a[0] + t * (b[0] - a[0]);
        let y = a[1] + t * (b[1] - a[1]);
        if x >= 0.0 && y >= 0.0 && (x as u32) < w && (y as u32) < h {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Draws grasp rectangles onto a base image: jaw edges in one color per
/// grasp rank, opening edges dimmed.
pub fn save_overlay(
    path: &Path,
    base: &Array3<f32>,
    rects: &[GraspRectangle],
) -> Result<(), DataError> {
    let (_, h, w) = base.dim();
    let mut img: RgbImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let px = |c: usize| {
            (base[[c, y as usize, x as usize]].clamp(0.0, 1.0) * 255.0).round() as u8
        };
        Rgb([px(0), px(1), px(2)])
    });
    const JAW_COLORS: [[u8; 3]; 5] = [
        [255, 40, 40],
        [40, 220, 60],
        [60, 120, 255],
        [240, 200, 40],
        [220, 60, 220],
    ];
    for (i, rect) in rects.iter().enumerate() {
        let c = rect.corners();
        let jaw = Rgb(JAW_COLORS[i % JAW_COLORS.len()]);
        let opening = Rgb([230, 230, 230]);
        // corners 0->1 and 2->3 run along the opening axis
        draw_line(&mut img, c[0], c[1], opening);
        draw_line(&mut img, c[2], c[3], opening);
        draw_line(&mut img, c[1], c[2], jaw);
        draw_line(&mut img, c[3], c[0], jaw);
    }
    img.save(path).map_err(|source| DataError::Image {
        path: path.to_path_buf(),
        source,
    })
}
