//! Grasp representations and the conversions between them.
//!
//! Three views of the same grasp live here: the oriented annotation
//! rectangle ([`GraspRectangle`]), the planar prediction tuple
//! ([`PlanarGrasp`]) and the metric world-frame pose ([`WorldGrasp`]).
//! [`GraspMaps`] holds the four pixel-wise maps (quality, cos 2θ, sin 2θ,
//! width) that connect annotations to network targets and predictions.

mod decode;
mod encode;
mod transform;

pub use decode::{decode_angle, decode_grasps, gaussian_smooth};
pub use encode::{encode_angle, encode_grasp_maps, gaussian_quality_patch};
pub use transform::{pixel_to_world, rectangle_from_planar};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Default width-normalization constant in pixels (covers the widest
/// Cornell openings at a 300x300 input).
pub const DEFAULT_W_MAX: f64 = 150.0;
/// Default Gaussian scale factor T (sigma in pixels).
pub const DEFAULT_SCALE_FACTOR: f64 = 16.0;
/// Default jaw-size/opening ratio used to rebuild a rectangle from a
/// planar grasp (h = w / 2).
pub const DEFAULT_JAW_RATIO: f64 = 0.5;
/// Default quality-map smoothing sigma at inference time, in pixels.
pub const DEFAULT_DECODE_SIGMA: f64 = 2.0;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),
    #[error("cos/sin pair must not both be zero")]
    ZeroAngleVector,
    #[error("grasp center ({x:.2}, {y:.2}) lies outside a {width}x{height} image")]
    CenterOutsideImage {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("rectangle extents must be positive (w={w}, h={h})")]
    NonPositiveExtent { w: f64, h: f64 },
    #[error("width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("quality {0} outside [0, 1]")]
    QualityOutOfRange(f64),
    #[error("jaw ratio must be positive, got {0}")]
    NonPositiveJawRatio(f64),
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("encoder config invalid: {0}")]
    BadEncoderConfig(String),
    #[error("calibration invalid: {0}")]
    BadCalibration(String),
    #[error("grasp maps must share identical dimensions")]
    MapShapeMismatch,
    #[error("coordinate {0} must be finite")]
    NonFiniteCoordinate(f64),
}

/// Maps an angle into the canonical grasp range `[-pi/2, pi/2)` under the
/// pi-periodic identification of a two-jaw grasp.
pub fn canonical_angle(theta: f64) -> f64 {
    let mut t = (theta + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    // rem_euclid can round up to exactly pi for tiny negative inputs
    if t >= FRAC_PI_2 {
        t -= PI;
    }
    t
}

/// Oriented grasp rectangle `(x, y, theta, w, h)` in image pixels.
///
/// `w` is the gripper opening measured along the grasp axis, `h` the jaw
/// size perpendicular to it. `theta` is stored canonically in
/// `[-pi/2, pi/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspRectangle {
    x: f64,
    y: f64,
    theta: f64,
    w: f64,
    h: f64,
}

impl GraspRectangle {
    pub fn new(x: f64, y: f64, theta: f64, w: f64, h: f64) -> Result<Self, GraspError> {
        if !(w > 0.0 && h > 0.0) {
            return Err(GraspError::NonPositiveExtent { w, h });
        }
        if !theta.is_finite() {
            return Err(GraspError::NonFiniteAngle(theta));
        }
        for v in [x, y] {
            if !v.is_finite() {
                return Err(GraspError::NonFiniteCoordinate(v));
            }
        }
        Ok(Self {
            x,
            y,
            theta: canonical_angle(theta),
            w,
            h,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Corner coordinates in order: the edges corners[0]->corners[1] and
    /// corners[2]->corners[3] run along the grasp (opening) axis.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.theta.sin_cos();
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        // axis = opening direction, perp = jaw direction
        let axis = [c * hw, s * hw];
        let perp = [-s * hh, c * hh];
        [
            [self.x - axis[0] - perp[0], self.y - axis[1] - perp[1]],
            [self.x + axis[0] - perp[0], self.y + axis[1] - perp[1]],
            [self.x + axis[0] + perp[0], self.y + axis[1] + perp[1]],
            [self.x - axis[0] + perp[0], self.y - axis[1] + perp[1]],
        ]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Builds a rectangle from four annotation vertices. Edges v0->v1 and
    /// v2->v3 are taken as the jaw-opening edges defining the grasp axis;
    /// `flip_axes` swaps that convention for corpora annotated the other
    /// way around.
    pub fn from_vertices(vertices: &[[f64; 2]; 4], flip_axes: bool) -> Result<Self, GraspError> {
        for v in vertices {
            for &c in v {
                if !c.is_finite() {
                    return Err(GraspError::NonFiniteCoordinate(c));
                }
            }
        }
        let cx = vertices.iter().map(|v| v[0]).sum::<f64>() / 4.0;
        let cy = vertices.iter().map(|v| v[1]).sum::<f64>() / 4.0;
        let e01 = [
            vertices[1][0] - vertices[0][0],
            vertices[1][1] - vertices[0][1],
        ];
        let e12 = [
            vertices[2][0] - vertices[1][0],
            vertices[2][1] - vertices[1][1],
        ];
        let len01 = (e01[0] * e01[0] + e01[1] * e01[1]).sqrt();
        let len12 = (e12[0] * e12[0] + e12[1] * e12[1]).sqrt();
        let (axis, w, h) = if flip_axes {
            (e12, len12, len01)
        } else {
            (e01, len01, len12)
        };
        let theta = axis[1].atan2(axis[0]);
        Self::new(cx, cy, theta, w, h)
    }
}

/// Planar grasp prediction `(u, v, phi, width, quality)` in image space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarGrasp {
    u: f64,
    v: f64,
    phi: f64,
    width: f64,
    quality: f64,
}

impl PlanarGrasp {
    pub fn new(u: f64, v: f64, phi: f64, width: f64, quality: f64) -> Result<Self, GraspError> {
        if !(0.0..=1.0).contains(&quality) {
            return Err(GraspError::QualityOutOfRange(quality));
        }
        if width < 0.0 {
            return Err(GraspError::NonPositiveWidth(width));
        }
        if !phi.is_finite() {
            return Err(GraspError::NonFiniteAngle(phi));
        }
        Ok(Self {
            u,
            v,
            phi: canonical_angle(phi),
            width,
            quality,
        })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn quality(&self) -> f64 {
        self.quality
    }
}

/// Metric grasp pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldGrasp {
    /// Center position (x, y, z) in meters.
    pub position: [f64; 3],
    /// Gripper rotation about the world z axis, radians.
    pub varphi: f64,
    /// Gripper opening in meters.
    pub width: f64,
    /// Grasp quality in [0, 1].
    pub quality: f64,
}

/// The four pixel-wise grasp maps.
///
/// Encoded targets keep the background convention: wherever `quality` is
/// zero, the angle and width maps are zero as well.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMaps {
    pub quality: Array2<f32>,
    pub cos2theta: Array2<f32>,
    pub sin2theta: Array2<f32>,
    pub width: Array2<f32>,
}

impl GraspMaps {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            quality: Array2::zeros((height, width)),
            cos2theta: Array2::zeros((height, width)),
            sin2theta: Array2::zeros((height, width)),
            width: Array2::zeros((height, width)),
        }
    }

    /// (height, width) shared by all four maps.
    pub fn shape(&self) -> Result<(usize, usize), GraspError> {
        let dim = self.quality.dim();
        for m in [&self.cos2theta, &self.sin2theta, &self.width] {
            if m.dim() != dim {
                return Err(GraspError::MapShapeMismatch);
            }
        }
        Ok(dim)
    }
}

/// How angle/width values are written around each grasp center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FillRegion {
    /// Center third of the rectangle along both axes.
    #[default]
    CenterThird,
    /// The full rectangle.
    FullRect,
}

/// Quality-map encoding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EncodeMode {
    /// Gaussian peak at each grasp center (scale factors T_x, T_y).
    #[default]
    Gaussian,
    /// Flat binary fill inside the fill region (the non-Gaussian baseline).
    Binary,
}

/// Configuration for encoding ground-truth grasps into [`GraspMaps`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianEncoderConfig {
    /// Gaussian sigma along x, pixels.
    pub t_x: f64,
    /// Gaussian sigma along y, pixels.
    pub t_y: f64,
    /// Width normalization constant, pixels.
    pub w_max: f64,
    pub fill_region: FillRegion,
    pub mode: EncodeMode,
}

impl Default for GaussianEncoderConfig {
    fn default() -> Self {
        Self {
            t_x: DEFAULT_SCALE_FACTOR,
            t_y: DEFAULT_SCALE_FACTOR,
            w_max: DEFAULT_W_MAX,
            fill_region: FillRegion::default(),
            mode: EncodeMode::default(),
        }
    }
}

impl GaussianEncoderConfig {
    /// Uniform scale factor T_x = T_y = t.
    pub fn with_scale(t: f64) -> Self {
        Self {
            t_x: t,
            t_y: t,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GraspError> {
        if !(self.t_x > 0.0 && self.t_y > 0.0) {
            return Err(GraspError::BadEncoderConfig(format!(
                "scale factors must be positive (t_x={}, t_y={})",
                self.t_x, self.t_y
            )));
        }
        if self.w_max <= 0.0 {
            return Err(GraspError::BadEncoderConfig(format!(
                "w_max must be positive, got {}",
                self.w_max
            )));
        }
        Ok(())
    }
}

/// How prediction maps are turned back into grasps at inference time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    /// Quality-map smoothing sigma in pixels (0 disables).
    pub smooth_sigma: f64,
    /// Jaw-size/opening ratio for rectangle reconstruction.
    pub jaw_ratio: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            smooth_sigma: DEFAULT_DECODE_SIGMA,
            jaw_ratio: DEFAULT_JAW_RATIO,
        }
    }
}

/// Pinhole intrinsics of the capture camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Camera calibration: pinhole intrinsics plus the camera-to-world
/// homogeneous transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub intrinsics: PinholeIntrinsics,
    /// Camera frame -> world frame, row-major homogeneous 4x4.
    pub t_rc: [[f64; 4]; 4],
}

impl Calibration {
    pub fn identity(intrinsics: PinholeIntrinsics) -> Self {
        let mut t_rc = [[0.0; 4]; 4];
        for (i, row) in t_rc.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { intrinsics, t_rc }
    }

    pub fn validate(&self) -> Result<(), GraspError> {
        if self.intrinsics.fx == 0.0 || self.intrinsics.fy == 0.0 {
            return Err(GraspError::BadCalibration(
                "focal lengths must be nonzero".into(),
            ));
        }
        if self.t_rc[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(GraspError::BadCalibration(
                "T_RC bottom row must be (0, 0, 0, 1)".into(),
            ));
        }
        let r = &self.t_rc;
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if det.abs() < 1e-12 {
            return Err(GraspError::BadCalibration(
                "T_RC rotation block is singular".into(),
            ));
        }
        Ok(())
    }

    /// Image -> camera homogeneous transform at the given depth: maps the
    /// pixel vector (u, v, 1, 1) to the back-projected camera point.
    pub fn t_ci(&self, depth: f64) -> [[f64; 4]; 4] {
        let PinholeIntrinsics { fx, fy, cx, cy } = self.intrinsics;
        [
            [depth / fx, 0.0, 0.0, -cx * depth / fx],
            [0.0, depth / fy, 0.0, -cy * depth / fy],
            [0.0, 0.0, 0.0, depth],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

pub(crate) fn mat4_apply(m: &[[f64; 4]; 4], v: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (i, row) in m.iter().enumerate() {
        out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}
