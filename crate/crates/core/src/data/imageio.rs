//! Raster and point-cloud file loading shared by the data pipeline and
//! visualization outputs.

use super::DataError;
use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use ndarray::{Array2, Array3};
use std::io::BufRead;
use std::path::Path;

fn open(path: &Path) -> Result<DynamicImage, DataError> {
    image::open(path).map_err(|source| DataError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an RGB image as (3, H, W) with values in [0, 1].
pub fn load_rgb(path: &Path) -> Result<Array3<f32>, DataError> {
    let img = open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    let mut out = Array3::<f32>::zeros((3, h as usize, w as usize));
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            out[[c, y as usize, x as usize]] = px.0[c] as f32 / 255.0;
        }
    }
    Ok(out)
}

/// Loads a depth raster as (H, W) in meters.
///
/// 16-bit grayscale PNGs are interpreted as millimeters; 8-bit images as
/// arbitrary units in [0, 1]. Zero pixels mean "no measurement".
pub fn load_depth_png(path: &Path) -> Result<Array2<f32>, DataError> {
    let img = open(path)?;
    Ok(match img {
        DynamicImage::ImageLuma16(im) => {
            let (w, h) = im.dimensions();
            let mut out = Array2::<f32>::zeros((h as usize, w as usize));
            for (x, y, px) in im.enumerate_pixels() {
                out[[y as usize, x as usize]] = px.0[0] as f32 / 1000.0;
            }
            out
        }
        other => {
            let im = other.to_luma8();
            let (w, h) = im.dimensions();
            let mut out = Array2::<f32>::zeros((h as usize, w as usize));
            for (x, y, px) in im.enumerate_pixels() {
                out[[y as usize, x as usize]] = px.0[0] as f32 / 255.0;
            }
            out
        }
    })
}

/// Converts an ASCII PCD point cloud (fields containing x, y, z and a
/// row-major pixel index) into a depth image of the given dimensions.
/// Pixels without a point stay 0 (invalid).
pub fn pcd_to_depth(path: &Path, width: usize, height: usize) -> Result<Array2<f32>, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut out = Array2::<f32>::zeros((height, width));
    let mut z_col: Option<usize> = None;
    let mut index_col: Option<usize> = None;
    let mut in_data = false;
    for line in reader.lines() {
        let line = line.map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !in_data {
            let mut parts = trimmed.split_whitespace();
            match parts.next() {
                Some("FIELDS") => {
                    let fields: Vec<&str> = parts.collect();
                    z_col = fields.iter().position(|&f| f == "z");
                    index_col = fields.iter().position(|&f| f == "index");
                }
                Some("DATA") => {
                    if parts.next() != Some("ascii") {
                        return Err(DataError::Parse {
                            path: path.to_path_buf(),
                            message: "only ascii PCD data is supported".into(),
                        });
                    }
                    in_data = true;
                }
                _ => {}
            }
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        let (Some(zc), Some(ic)) = (z_col, index_col) else {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                message: "PCD header lacks z/index fields".into(),
            });
        };
        if cols.len() <= zc.max(ic) {
            continue;
        }
        let (Ok(z), Ok(idx)) = (cols[zc].parse::<f32>(), cols[ic].parse::<u64>()) else {
            continue;
        };
        if !z.is_finite() {
            continue;
        }
        let (row, col) = ((idx as usize) / width, (idx as usize) % width);
        if row < height {
            out[[row, col]] = z;
        }
    }
    if !in_data {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            message: "no DATA section found in PCD file".into(),
        });
    }
    Ok(out)
}

/// Loads depth from either a PNG raster or an ASCII PCD cloud, chosen by
/// file extension. `dims` supplies the target image size for clouds.
pub fn load_depth(path: &Path, dims: Option<(usize, usize)>) -> Result<Array2<f32>, DataError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") | Some("jpg") | Some("jpeg") => load_depth_png(path),
        _ => {
            let (w, h) = dims.unwrap_or((640, 480));
            pcd_to_depth(path, w, h)
        }
    }
}

/// Saves a single-channel map scaled from [0, 1] into an 8-bit grayscale
/// PNG.
pub fn save_gray_png(path: &Path, map: &Array2<f32>) -> Result<(), DataError> {
    let (h, w) = map.dim();
    let img: GrayImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let v = map[[y as usize, x as usize]].clamp(0.0, 1.0);
        Luma([(v * 255.0).round() as u8])
    });
    img.save(path).map_err(|source| DataError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Saves a 16-bit depth PNG in millimeters (the layout the Cornell/Jacquard
/// loaders read back).
pub fn save_depth_png(path: &Path, depth_m: &Array2<f32>) -> Result<(), DataError> {
    let (h, w) = depth_m.dim();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let mm = (depth_m[[y as usize, x as usize]] * 1000.0).clamp(0.0, u16::MAX as f32);
        Luma([mm.round() as u16])
    });
    img.save(path).map_err(|source| DataError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Saves an RGB (3, H, W) array in [0, 1] as PNG.
pub fn save_rgb_png(path: &Path, rgb: &Array3<f32>) -> Result<(), DataError> {
    let (_, h, w) = rgb.dim();
    let img: RgbImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let px = |c: usize| {
            (rgb[[c, y as usize, x as usize]].clamp(0.0, 1.0) * 255.0).round() as u8
        };
        Rgb([px(0), px(1), px(2)])
    });
    img.save(path).map_err(|source| DataError::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn depth_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let depth = Array2::from_shape_fn((8, 6), |(y, x)| 0.5 + 0.001 * (y * 6 + x) as f32);
        save_depth_png(&path, &depth).unwrap();
        let back = load_depth_png(&path).unwrap();
        assert_eq!(back.dim(), (8, 6));
        for (a, b) in depth.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn pcd_parses_sparse_points() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# .PCD v.7 - Point Cloud Data file format").unwrap();
        writeln!(f, "FIELDS x y z rgb index").unwrap();
        writeln!(f, "SIZE 4 4 4 4 4").unwrap();
        writeln!(f, "TYPE F F F F U").unwrap();
        writeln!(f, "POINTS 2").unwrap();
        writeln!(f, "DATA ascii").unwrap();
        writeln!(f, "0.1 0.2 0.93 0 5").unwrap();
        writeln!(f, "0.1 0.2 0.80 0 13").unwrap();
        drop(f);
        let depth = pcd_to_depth(&path, 10, 4).unwrap();
        assert!((depth[[0, 5]] - 0.93).abs() < 1e-6);
        assert!((depth[[1, 3]] - 0.80).abs() < 1e-6);
        assert_eq!(depth[[0, 0]], 0.0);
    }

    #[test]
    fn pcd_without_data_section_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "FIELDS x y z index\n").unwrap();
        assert!(pcd_to_depth(&path, 4, 4).is_err());
    }
}
