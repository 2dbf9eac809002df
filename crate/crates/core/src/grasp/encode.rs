//! Encoding ground-truth grasps into pixel-wise target maps.

use super::{
    canonical_angle, EncodeMode, FillRegion, GaussianEncoderConfig, GraspError, GraspMaps,
    GraspRectangle,
};
use ndarray::Array2;

/// Encodes a grasp angle as the pair `(cos 2theta, sin 2theta)`.
///
/// The doubled angle makes the encoding invariant under the pi-periodic
/// identification of a two-jaw grasp.
pub fn encode_angle(theta: f64) -> Result<(f64, f64), GraspError> {
    if !theta.is_finite() {
        return Err(GraspError::NonFiniteAngle(theta));
    }
    let t2 = 2.0 * canonical_angle(theta);
    Ok((t2.cos(), t2.sin()))
}

/// Full-image Gaussian quality patch peaking at the (rounded) center.
///
/// Value at pixel (x, y) is `exp(-(x-x0)^2 / (2 T_x^2) - (y-y0)^2 / (2 T_y^2))`
/// with (x0, y0) the center rounded to the nearest pixel, so the peak value
/// is exactly 1.0.
pub fn gaussian_quality_patch(
    center: (f64, f64),
    cfg: &GaussianEncoderConfig,
    shape: (usize, usize),
) -> Result<Array2<f32>, GraspError> {
    cfg.validate()?;
    let (height, width) = shape;
    check_center_inside(center, width, height)?;
    let x0 = center.0.round();
    let y0 = center.1.round();
    let inv_2tx2 = 1.0 / (2.0 * cfg.t_x * cfg.t_x);
    let inv_2ty2 = 1.0 / (2.0 * cfg.t_y * cfg.t_y);
    Ok(Array2::from_shape_fn((height, width), |(y, x)| {
        let dx = x as f64 - x0;
        let dy = y as f64 - y0;
        (-(dx * dx) * inv_2tx2 - (dy * dy) * inv_2ty2).exp() as f32
    }))
}

fn check_center_inside(center: (f64, f64), width: usize, height: usize) -> Result<(), GraspError> {
    let (x, y) = center;
    if !(x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0 && x < width as f64 && y < height as f64)
    {
        return Err(GraspError::CenterOutsideImage {
            x,
            y,
            width,
            height,
        });
    }
    Ok(())
}

/// Encodes a list of ground-truth rectangles into the four target maps.
///
/// Quality combines per-grasp patches by element-wise max (gaussian mode)
/// or writes 1 inside each fill region (binary mode). Angle and width are
/// written inside each grasp's fill region in list order, so later grasps
/// overwrite earlier ones on overlap. Width values are normalized by
/// `w_max` and clipped to [0, 1].
pub fn encode_grasp_maps(
    grasps: &[GraspRectangle],
    cfg: &GaussianEncoderConfig,
    shape: (usize, usize),
) -> Result<GraspMaps, GraspError> {
    cfg.validate()?;
    let (height, width) = shape;
    let mut maps = GraspMaps::zeros(height, width);
    for rect in grasps {
        check_center_inside((rect.x(), rect.y()), width, height)?;
        if cfg.mode == EncodeMode::Gaussian {
            let patch = gaussian_quality_patch((rect.x(), rect.y()), cfg, shape)?;
            maps.quality.zip_mut_with(&patch, |q, &p| *q = q.max(p));
        }
        let (cos2t, sin2t) = encode_angle(rect.theta())?;
        let wnorm = (rect.w() / cfg.w_max).clamp(0.0, 1.0) as f32;
        fill_rect_region(rect, cfg.fill_region, shape, |y, x| {
            if cfg.mode == EncodeMode::Binary {
                maps.quality[[y, x]] = 1.0;
            }
            maps.cos2theta[[y, x]] = cos2t as f32;
            maps.sin2theta[[y, x]] = sin2t as f32;
            maps.width[[y, x]] = wnorm;
        });
    }
    Ok(maps)
}

/// Visits every pixel whose center falls inside the (possibly shrunk)
/// rectangle region.
fn fill_rect_region(
    rect: &GraspRectangle,
    region: FillRegion,
    shape: (usize, usize),
    mut visit: impl FnMut(usize, usize),
) {
    let (height, width) = shape;
    let (fw, fh) = match region {
        FillRegion::CenterThird => (rect.w() / 3.0, rect.h() / 3.0),
        FillRegion::FullRect => (rect.w(), rect.h()),
    };
    let (sin_t, cos_t) = rect.theta().sin_cos();
    // Bounding box of the rotated fill rectangle
    let ex = (cos_t.abs() * fw + sin_t.abs() * fh) / 2.0;
    let ey = (sin_t.abs() * fw + cos_t.abs() * fh) / 2.0;
    let x_lo = ((rect.x() - ex).floor().max(0.0)) as usize;
    let x_hi = ((rect.x() + ex).ceil().min(width as f64 - 1.0)) as usize;
    let y_lo = ((rect.y() - ey).floor().max(0.0)) as usize;
    let y_hi = ((rect.y() + ey).ceil().min(height as f64 - 1.0)) as usize;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dx = x as f64 - rect.x();
            let dy = y as f64 - rect.y();
            // rotate into the rectangle frame: axis component and jaw component
            let along = dx * cos_t + dy * sin_t;
            let across = -dx * sin_t + dy * cos_t;
            if along.abs() <= fw / 2.0 && across.abs() <= fh / 2.0 {
                visit(y, x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

    #[test]
    fn encode_angle_known_values() {
        let (c, s) = encode_angle(0.0).unwrap();
        assert_abs_diff_eq!(c, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);

        let (c, s) = encode_angle(FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);

        // cos(2pi/3) = -0.5, sin(2pi/3) = 0.86603
        let (c, s) = encode_angle(FRAC_PI_3).unwrap();
        assert_abs_diff_eq!(c, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.866_025_403_784_438_6, epsilon = 1e-12);
    }

    #[test]
    fn encode_angle_rejects_non_finite() {
        assert!(encode_angle(f64::NAN).is_err());
        assert!(encode_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn encode_angle_unit_norm_and_periodic() {
        for i in 0..10_000 {
            let theta = -20.0 + 0.004 * i as f64;
            let (c, s) = encode_angle(theta).unwrap();
            assert_abs_diff_eq!(c * c + s * s, 1.0, epsilon = 1e-12);
            let (cp, sp) = encode_angle(theta + PI).unwrap();
            // exact pi-periodicity up to the float rounding of theta + pi
            assert_abs_diff_eq!(c, cp, epsilon = 1e-14);
            assert_abs_diff_eq!(s, sp, epsilon = 1e-14);
        }
    }

    #[test]
    fn gaussian_patch_known_values() {
        let cfg = GaussianEncoderConfig::with_scale(16.0);
        let patch = gaussian_quality_patch((150.0, 150.0), &cfg, (300, 300)).unwrap();
        assert_eq!(patch[[150, 150]], 1.0);
        // one sigma along x: exp(-0.5)
        assert_abs_diff_eq!(patch[[150, 166]] as f64, 0.606_530_659, epsilon = 1e-6);
        // two sigma along y: exp(-2)
        assert_abs_diff_eq!(patch[[182, 150]] as f64, 0.135_335_283, epsilon = 1e-6);
        assert!(patch.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn gaussian_patch_rejects_outside_center() {
        let cfg = GaussianEncoderConfig::default();
        assert!(gaussian_quality_patch((300.0, 10.0), &cfg, (300, 300)).is_err());
        assert!(gaussian_quality_patch((-1.0, 10.0), &cfg, (300, 300)).is_err());
    }

    #[test]
    fn gaussian_patch_monotone_from_center() {
        let cfg = GaussianEncoderConfig::with_scale(12.0);
        let patch = gaussian_quality_patch((40.0, 60.0), &cfg, (120, 100)).unwrap();
        for x in 40..99 {
            assert!(patch[[60, x + 1]] <= patch[[60, x]]);
        }
        for x in (1..=40).rev() {
            assert!(patch[[60, x - 1]] <= patch[[60, x]]);
        }
        for y in 60..119 {
            assert!(patch[[y + 1, 40]] <= patch[[y, 40]]);
        }
    }

    #[test]
    fn encode_empty_list_gives_zero_maps() {
        let maps =
            encode_grasp_maps(&[], &GaussianEncoderConfig::default(), (64, 64)).unwrap();
        assert!(maps.quality.iter().all(|&v| v == 0.0));
        assert!(maps.width.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encode_single_grasp_writes_center_values() {
        let cfg = GaussianEncoderConfig::with_scale(16.0);
        let rect = GraspRectangle::new(150.0, 150.0, 0.0, 60.0, 30.0).unwrap();
        let maps = encode_grasp_maps(&[rect], &cfg, (300, 300)).unwrap();
        // argmax of quality at the center, value exactly 1
        let (mut best, mut best_idx) = (f32::MIN, (0, 0));
        for ((y, x), &v) in maps.quality.indexed_iter() {
            if v > best {
                best = v;
                best_idx = (y, x);
            }
        }
        assert_eq!(best_idx, (150, 150));
        assert_eq!(best, 1.0);
        assert_abs_diff_eq!(maps.width[[150, 150]] as f64, 0.4, epsilon = 1e-6);
        assert_abs_diff_eq!(maps.cos2theta[[150, 150]] as f64, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(maps.sin2theta[[150, 150]] as f64, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn overlapping_patches_combine_by_max_not_sum() {
        let cfg = GaussianEncoderConfig::with_scale(16.0);
        let a = GraspRectangle::new(146.0, 150.0, 0.0, 30.0, 12.0).unwrap();
        let b = GraspRectangle::new(154.0, 150.0, 0.0, 30.0, 12.0).unwrap();
        let maps = encode_grasp_maps(&[a, b], &cfg, (300, 300)).unwrap();
        // brute-force oracle at the midpoint pixel (150, 150)
        let val = |cx: f64| ((150.0 - cx) * (150.0 - cx) / (-2.0 * 16.0 * 16.0)).exp();
        let expect = val(146.0).max(val(154.0));
        let got = maps.quality[[150, 150]] as f64;
        assert_abs_diff_eq!(got, expect, epsilon = 1e-6);
        assert!(got < val(146.0) + val(154.0) - 0.1);
    }

    #[test]
    fn binary_mode_fills_flat_region() {
        let cfg = GaussianEncoderConfig {
            mode: EncodeMode::Binary,
            ..GaussianEncoderConfig::default()
        };
        let rect = GraspRectangle::new(32.0, 32.0, 0.0, 30.0, 12.0).unwrap();
        let maps = encode_grasp_maps(&[rect], &cfg, (64, 64)).unwrap();
        // center third: |dx| <= 5, |dy| <= 2
        assert_eq!(maps.quality[[32, 32]], 1.0);
        assert_eq!(maps.quality[[32, 36]], 1.0);
        assert_eq!(maps.quality[[32, 38]], 0.0);
        assert_eq!(maps.quality[[35, 32]], 0.0);
    }

    #[test]
    fn background_convention_holds() {
        let cfg = GaussianEncoderConfig {
            mode: EncodeMode::Binary,
            ..GaussianEncoderConfig::default()
        };
        let rect = GraspRectangle::new(32.0, 32.0, 0.7, 24.0, 12.0).unwrap();
        let maps = encode_grasp_maps(&[rect], &cfg, (64, 64)).unwrap();
        for ((y, x), &q) in maps.quality.indexed_iter() {
            if q == 0.0 {
                assert_eq!(maps.cos2theta[[y, x]], 0.0);
                assert_eq!(maps.sin2theta[[y, x]], 0.0);
                assert_eq!(maps.width[[y, x]], 0.0);
            }
        }
    }
}
