//! Decoding predicted grasp maps back into planar grasps.

use super::{canonical_angle, GraspError, GraspMaps, PlanarGrasp};
use ndarray::Array2;

/// Minimum pixel distance between two decoded peaks.
const MIN_PEAK_SEPARATION: f64 = 5.0;

/// Recovers the grasp angle from a `(cos 2theta, sin 2theta)` pair.
///
/// Uses the two-argument arctangent halved, so the full half-turn range is
/// recovered, then canonicalizes into `[-pi/2, pi/2)`.
pub fn decode_angle(cos2t: f64, sin2t: f64) -> Result<f64, GraspError> {
    if cos2t == 0.0 && sin2t == 0.0 {
        return Err(GraspError::ZeroAngleVector);
    }
    Ok(canonical_angle(sin2t.atan2(cos2t) / 2.0))
}

/// Separable Gaussian blur with truncated, renormalized borders.
/// `sigma <= 0` returns the input unchanged.
pub fn gaussian_smooth(map: &Array2<f32>, sigma: f64) -> Array2<f32> {
    if sigma <= 0.0 {
        return map.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let (h, w) = map.dim();
    let mut tmp = Array2::<f32>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let xi = x as isize + ki as isize - radius;
                if xi >= 0 && (xi as usize) < w {
                    acc += k * map[[y, xi as usize]] as f64;
                    norm += k;
                }
            }
            tmp[[y, x]] = (acc / norm) as f32;
        }
    }
    let mut out = Array2::<f32>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let yi = y as isize + ki as isize - radius;
                if yi >= 0 && (yi as usize) < h {
                    acc += k * tmp[[yi as usize, x]] as f64;
                    norm += k;
                }
            }
            out[[y, x]] = (acc / norm) as f32;
        }
    }
    out
}

/// Top-k local maxima of `map`, ordered by value descending with row-major
/// index as the tie-break, separated by at least [`MIN_PEAK_SEPARATION`].
fn top_local_maxima(map: &Array2<f32>, k: usize) -> Vec<(usize, usize)> {
    let (h, w) = map.dim();
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = map[[y, x]];
            let mut is_max = true;
            'neigh: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dy == 0 && dx == 0 {
                        continue;
                    }
                    let (ny, nx) = (y as isize + dy, x as isize + dx);
                    if ny >= 0 && nx >= 0 && (ny as usize) < h && (nx as usize) < w
                        && map[[ny as usize, nx as usize]] > v
                    {
                        is_max = false;
                        break 'neigh;
                    }
                }
            }
            if is_max {
                candidates.push((y, x));
            }
        }
    }
    // value descending, then row-major index ascending (documented tie-break)
    candidates.sort_by(|&(ay, ax), &(by, bx)| {
        map[[by, bx]]
            .partial_cmp(&map[[ay, ax]])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((ay * map.dim().1 + ax).cmp(&(by * map.dim().1 + bx)))
    });
    let mut peaks: Vec<(usize, usize)> = Vec::with_capacity(k);
    for (y, x) in candidates {
        if peaks.len() >= k {
            break;
        }
        let far_enough = peaks.iter().all(|&(py, px)| {
            let d2 = (py as f64 - y as f64).powi(2) + (px as f64 - x as f64).powi(2);
            d2 >= MIN_PEAK_SEPARATION * MIN_PEAK_SEPARATION
        });
        if far_enough {
            peaks.push((y, x));
        }
    }
    peaks
}

/// Decodes the top-k grasps from a set of prediction maps.
///
/// The quality map is optionally smoothed with a Gaussian filter
/// (`smooth_sigma` in pixels, 0 disables). Each returned grasp reads its
/// angle from the angle maps at its peak pixel, its width from the width
/// map scaled by `w_max`, and its quality from the (smoothed) quality map.
/// A flat quality map degenerates to the lowest row-major index.
pub fn decode_grasps(
    maps: &GraspMaps,
    k: usize,
    smooth_sigma: f64,
    w_max: f64,
) -> Result<Vec<PlanarGrasp>, GraspError> {
    let _ = maps.shape()?;
    let k = k.max(1);
    let quality = gaussian_smooth(&maps.quality, smooth_sigma);
    let peaks = top_local_maxima(&quality, k);
    let mut out = Vec::with_capacity(peaks.len());
    for (y, x) in peaks {
        let c = maps.cos2theta[[y, x]] as f64;
        let s = maps.sin2theta[[y, x]] as f64;
        // background pixels carry a zero angle vector; treat as angle 0
        let phi = if c == 0.0 && s == 0.0 {
            0.0
        } else {
            decode_angle(c, s)?
        };
        let width = (maps.width[[y, x]] as f64 * w_max).max(0.0);
        let q = (quality[[y, x]] as f64).clamp(0.0, 1.0);
        out.push(PlanarGrasp::new(x as f64, y as f64, phi, width, q)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{encode_angle, encode_grasp_maps, GaussianEncoderConfig, GraspRectangle};
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn decode_angle_known_values() {
        assert_abs_diff_eq!(decode_angle(1.0, 0.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(decode_angle(0.0, 1.0).unwrap(), FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(
            decode_angle(-0.5, -0.866_025_403_784_438_6).unwrap(),
            -FRAC_PI_3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn decode_angle_rejects_zero_vector() {
        assert!(decode_angle(0.0, 0.0).is_err());
    }

    #[test]
    fn angle_round_trip_many() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let theta: f64 = rng.random_range(-8.0..8.0);
            let (c, s) = encode_angle(theta).unwrap();
            let back = decode_angle(c, s).unwrap();
            let expect = super::super::canonical_angle(theta);
            assert_abs_diff_eq!(back, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_peak_is_found() {
        let mut maps = GraspMaps::zeros(40, 40);
        maps.quality[[20, 10]] = 1.0;
        let grasps = decode_grasps(&maps, 1, 0.0, 150.0).unwrap();
        assert_eq!(grasps.len(), 1);
        assert_eq!(grasps[0].u(), 10.0);
        assert_eq!(grasps[0].v(), 20.0);
        assert_eq!(grasps[0].quality(), 1.0);
    }

    #[test]
    fn flat_map_returns_lowest_index() {
        let maps = GraspMaps::zeros(8, 8);
        let grasps = decode_grasps(&maps, 1, 0.0, 150.0).unwrap();
        assert_eq!(grasps.len(), 1);
        assert_eq!((grasps[0].u(), grasps[0].v()), (0.0, 0.0));
        assert_eq!(grasps[0].phi(), 0.0);
    }

    #[test]
    fn encode_decode_round_trip_single() {
        let cfg = GaussianEncoderConfig::with_scale(16.0);
        let rect = GraspRectangle::new(150.0, 150.0, 0.5, 60.0, 30.0).unwrap();
        let maps = encode_grasp_maps(&[rect], &cfg, (300, 300)).unwrap();
        let grasps = decode_grasps(&maps, 1, 0.0, cfg.w_max).unwrap();
        assert_eq!(grasps.len(), 1);
        let g = &grasps[0];
        assert!((g.u() - 150.0).abs() <= 1.0);
        assert!((g.v() - 150.0).abs() <= 1.0);
        assert!((g.phi() - 0.5).abs() <= 1e-6);
        assert!((g.width() - 60.0).abs() <= 1.0);
    }

    #[test]
    fn two_separated_grasps_recovered() {
        let cfg = GaussianEncoderConfig::with_scale(8.0);
        let a = GraspRectangle::new(60.0, 60.0, 0.3, 40.0, 20.0).unwrap();
        let b = GraspRectangle::new(200.0, 220.0, -0.8, 50.0, 25.0).unwrap();
        let maps = encode_grasp_maps(&[a, b], &cfg, (300, 300)).unwrap();
        let grasps = decode_grasps(&maps, 2, 0.0, cfg.w_max).unwrap();
        assert_eq!(grasps.len(), 2);
        let mut found_a = false;
        let mut found_b = false;
        for g in &grasps {
            if (g.u() - 60.0).abs() <= 1.0 && (g.v() - 60.0).abs() <= 1.0 {
                found_a = true;
            }
            if (g.u() - 200.0).abs() <= 1.0 && (g.v() - 220.0).abs() <= 1.0 {
                found_b = true;
            }
        }
        assert!(found_a && found_b);
    }

    #[test]
    fn smoothing_keeps_peak_near_center() {
        let cfg = GaussianEncoderConfig::with_scale(16.0);
        let rect = GraspRectangle::new(100.0, 120.0, 0.0, 50.0, 20.0).unwrap();
        let maps = encode_grasp_maps(&[rect], &cfg, (300, 300)).unwrap();
        let grasps = decode_grasps(&maps, 1, 2.0, cfg.w_max).unwrap();
        assert!((grasps[0].u() - 100.0).abs() <= 2.0);
        assert!((grasps[0].v() - 120.0).abs() <= 2.0);
    }
}
