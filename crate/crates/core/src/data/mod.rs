//! Dataset parsing, input assembly, augmentation and splits for
//! Cornell- and Jacquard-format grasp datasets.

mod assemble;
mod augment;
mod cornell;
pub mod imageio;
mod jacquard;
mod splits;

pub use assemble::assemble_input;
pub use augment::augment;
pub use cornell::parse_cornell;
pub use jacquard::parse_jacquard;
pub use splits::{make_splits, read_split_file, write_split_file, Split};

use crate::grasp::GraspError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("no samples found under {0}")]
    EmptyDataset(PathBuf),
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("rgb channels requested but sample {0} has no rgb image")]
    MissingRgb(String),
    #[error("invalid input spec: {0}")]
    BadInputSpec(String),
    #[error("invalid augment spec: {0}")]
    BadAugmentSpec(String),
    #[error("augmentation dropped all grasps after {0} attempts")]
    AugmentExhausted(usize),
    #[error("split error: {0}")]
    Split(String),
    #[error(transparent)]
    Grasp(#[from] GraspError),
}

/// Source corpus of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Cornell,
    Jacquard,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetKind::Cornell => write!(f, "cornell"),
            DatasetKind::Jacquard => write!(f, "jacquard"),
        }
    }
}

/// One dataset sample: file locations plus parsed positive grasps.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub sample_id: String,
    /// Stable across all views of the same physical object.
    pub object_id: String,
    pub rgb_path: Option<PathBuf>,
    pub depth_path: PathBuf,
    pub grasp_rects: Vec<crate::grasp::GraspRectangle>,
    pub source: DatasetKind,
}

/// Parse outcome: records plus warning bookkeeping for skipped content.
#[derive(Debug, Default)]
pub struct ParseReport {
    pub records: Vec<SampleRecord>,
    pub skipped_rectangles: usize,
    pub skipped_samples: usize,
    pub warnings: Vec<String>,
}

/// Input channel layout fed to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    #[default]
    D,
    Rgb,
    Rgbd,
}

impl ChannelMode {
    pub fn channels(&self) -> usize {
        match self {
            ChannelMode::D => 1,
            ChannelMode::Rgb => 3,
            ChannelMode::Rgbd => 4,
        }
    }

    pub fn needs_depth(&self) -> bool {
        matches!(self, ChannelMode::D | ChannelMode::Rgbd)
    }

    pub fn needs_rgb(&self) -> bool {
        matches!(self, ChannelMode::Rgb | ChannelMode::Rgbd)
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelMode::D => write!(f, "d"),
            ChannelMode::Rgb => write!(f, "rgb"),
            ChannelMode::Rgbd => write!(f, "rgbd"),
        }
    }
}

/// Strategy for invalid depth pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DepthFill {
    #[default]
    NearestValid,
    None,
}

/// Per-image normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalize {
    #[default]
    PerImageZeroMean,
    UnitRange,
}

/// How raw files become the n-channel square network input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputSpec {
    pub channels: ChannelMode,
    /// Square output size; must be divisible by 4 so the two 2x downsamples
    /// invert under the two 2x upsamples.
    pub size: usize,
    pub depth_fill: DepthFill,
    pub normalize: Normalize,
}

impl Default for InputSpec {
    fn default() -> Self {
        Self {
            channels: ChannelMode::D,
            size: 300,
            depth_fill: DepthFill::NearestValid,
            normalize: Normalize::PerImageZeroMean,
        }
    }
}

impl InputSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.size == 0 || self.size % 4 != 0 {
            return Err(DataError::BadInputSpec(format!(
                "size must be a positive multiple of 4, got {}",
                self.size
            )));
        }
        Ok(())
    }
}

/// Label-consistent augmentation parameters. All label transforms mirror
/// the image transform exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSpec {
    /// Rotation range in radians, inclusive-exclusive.
    pub rotate: (f64, f64),
    /// Zoom (scale) range, subset of (0, 1.5].
    pub zoom: (f64, f64),
    /// Maximum random translation (crop jitter) in pixels.
    pub crop: f64,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rotate: (0.0, std::f64::consts::TAU),
            zoom: (0.5, 1.0),
            crop: 8.0,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    /// A spec that leaves images and labels untouched.
    pub fn identity() -> Self {
        Self {
            rotate: (0.0, 0.0),
            zoom: (1.0, 1.0),
            crop: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let (zl, zh) = self.zoom;
        if !(zl > 0.0 && zh <= 1.5 && zl <= zh) {
            return Err(DataError::BadAugmentSpec(format!(
                "zoom range ({zl}, {zh}) must lie within (0, 1.5]"
            )));
        }
        if self.rotate.0 > self.rotate.1 || self.crop < 0.0 {
            return Err(DataError::BadAugmentSpec(
                "rotation range must be ordered and crop non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Train/test partition strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Random partition over images (new poses of seen objects).
    #[default]
    ImageWise,
    /// Random partition over object identities (unseen objects).
    ObjectWise,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitMode::ImageWise => write!(f, "image-wise"),
            SplitMode::ObjectWise => write!(f, "object-wise"),
        }
    }
}
