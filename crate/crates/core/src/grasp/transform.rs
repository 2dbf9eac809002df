//! Conversions from planar grasps to rectangles and world-frame poses.

use super::{
    canonical_angle, mat4_apply, Calibration, GraspError, GraspRectangle, PlanarGrasp, WorldGrasp,
};

/// Rebuilds a full evaluation rectangle from a planar grasp using a fixed
/// jaw-size/opening ratio (`h = jaw_ratio * width`).
pub fn rectangle_from_planar(
    grasp: &PlanarGrasp,
    jaw_ratio: f64,
) -> Result<GraspRectangle, GraspError> {
    if grasp.width() <= 0.0 {
        return Err(GraspError::NonPositiveWidth(grasp.width()));
    }
    if jaw_ratio <= 0.0 {
        return Err(GraspError::NonPositiveJawRatio(jaw_ratio));
    }
    GraspRectangle::new(
        grasp.u(),
        grasp.v(),
        grasp.phi(),
        grasp.width(),
        jaw_ratio * grasp.width(),
    )
}

/// Lifts a planar grasp into the world frame.
///
/// The pixel center is back-projected into the camera frame at the given
/// depth, then mapped by the camera-to-world transform. The grasp angle is
/// carried through the planar rotation component of that transform, and
/// the pixel width is converted to meters using depth and focal length.
pub fn pixel_to_world(
    grasp: &PlanarGrasp,
    depth_at_center: f64,
    calib: &Calibration,
) -> Result<WorldGrasp, GraspError> {
    if !(depth_at_center > 0.0) {
        return Err(GraspError::NonPositiveDepth(depth_at_center));
    }
    calib.validate()?;
    let t_ci = calib.t_ci(depth_at_center);
    let cam = mat4_apply(&t_ci, [grasp.u(), grasp.v(), 1.0, 1.0]);
    let world = mat4_apply(&calib.t_rc, cam);
    // planar rotation of the camera x axis about the world z axis
    let yaw = calib.t_rc[1][0].atan2(calib.t_rc[0][0]);
    Ok(WorldGrasp {
        position: [world[0], world[1], world[2]],
        varphi: canonical_angle(grasp.phi() + yaw),
        width: grasp.width() * depth_at_center / calib.intrinsics.fx,
        quality: grasp.quality(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::PinholeIntrinsics;
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn intrinsics() -> PinholeIntrinsics {
        PinholeIntrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: 160.0,
            cy: 120.0,
        }
    }

    #[test]
    fn rectangle_from_planar_axis_aligned() {
        let g = PlanarGrasp::new(5.0, 6.0, 0.0, 10.0, 1.0).unwrap();
        let r = rectangle_from_planar(&g, 0.5).unwrap();
        assert_eq!(
            (r.x(), r.y(), r.theta(), r.w(), r.h()),
            (5.0, 6.0, 0.0, 10.0, 5.0)
        );
    }

    #[test]
    fn rectangle_from_planar_rotated() {
        let g = PlanarGrasp::new(0.0, 0.0, FRAC_PI_4, 8.0, 1.0).unwrap();
        let r = rectangle_from_planar(&g, 0.5).unwrap();
        assert_abs_diff_eq!(r.theta(), FRAC_PI_4, epsilon = 1e-12);
        assert_eq!((r.w(), r.h()), (8.0, 4.0));
    }

    #[test]
    fn rectangle_from_planar_corner_expansion() {
        // theta = 0 case expands to the axis-aligned box center +- (5, 2.5)
        let g = PlanarGrasp::new(0.0, 0.0, 0.0, 10.0, 1.0).unwrap();
        let r = rectangle_from_planar(&g, 0.5).unwrap();
        let corners = r.corners();
        let xs: Vec<f64> = corners.iter().map(|c| c[0]).collect();
        let ys: Vec<f64> = corners.iter().map(|c| c[1]).collect();
        assert_abs_diff_eq!(xs.iter().cloned().fold(f64::MAX, f64::min), -5.0);
        assert_abs_diff_eq!(xs.iter().cloned().fold(f64::MIN, f64::max), 5.0);
        assert_abs_diff_eq!(ys.iter().cloned().fold(f64::MAX, f64::min), -2.5);
        assert_abs_diff_eq!(ys.iter().cloned().fold(f64::MIN, f64::max), 2.5);
    }

    #[test]
    fn rectangle_from_planar_rejects_zero_width() {
        let g = PlanarGrasp::new(0.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert!(rectangle_from_planar(&g, 0.5).is_err());
    }

    #[test]
    fn pixel_to_world_principal_point_unit_depth() {
        let calib = Calibration::identity(intrinsics());
        let g = PlanarGrasp::new(160.0, 120.0, 0.2, 40.0, 0.7).unwrap();
        let w = pixel_to_world(&g, 1.0, &calib).unwrap();
        assert_abs_diff_eq!(w.position[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.position[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.position[2], 1.0, epsilon = 1e-12);
        // quality passthrough
        assert_eq!(w.quality, 0.7);
        assert_abs_diff_eq!(w.varphi, 0.2, epsilon = 1e-12);
        // width in meters = w_px * depth / fx
        assert_abs_diff_eq!(w.width, 40.0 / 500.0, epsilon = 1e-12);
    }

    #[test]
    fn pixel_to_world_z_translation() {
        let mut calib = Calibration::identity(intrinsics());
        calib.t_rc[2][3] = 0.5;
        let g = PlanarGrasp::new(160.0, 120.0, 0.0, 10.0, 0.5).unwrap();
        let w = pixel_to_world(&g, 1.0, &calib).unwrap();
        assert_abs_diff_eq!(w.position[2], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn pixel_to_world_rejects_bad_depth() {
        let calib = Calibration::identity(intrinsics());
        let g = PlanarGrasp::new(0.0, 0.0, 0.0, 10.0, 0.5).unwrap();
        assert!(pixel_to_world(&g, 0.0, &calib).is_err());
        assert!(pixel_to_world(&g, -1.0, &calib).is_err());
    }

    #[test]
    fn calibration_rejects_bad_bottom_row() {
        let mut calib = Calibration::identity(intrinsics());
        calib.t_rc[3][0] = 0.1;
        let g = PlanarGrasp::new(0.0, 0.0, 0.0, 10.0, 0.5).unwrap();
        assert!(pixel_to_world(&g, 1.0, &calib).is_err());
    }
}
