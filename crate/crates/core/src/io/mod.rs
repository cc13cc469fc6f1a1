//! File formats and visualizations.
//!
//! Float channels go to PFM (depth, disparity, scene flow) and Middlebury
//! `.flo` (optical flow); images and masks to binary PPM/PGM. All encoders
//! write explicit little-endian bytes, so identical content always produces
//! identical files. NaN marks invalid pixels and is written as `0x7FC00000`.

pub mod bundle;
pub mod color;
pub mod flo;
pub mod pfm;
pub mod pnm;
pub mod scene_doc;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use bundle::{read_bundle, write_bundle, BundleMeta, StoredBundle};
pub use color::{depth_to_color, flow_to_color, scene_flow_to_color};
pub use flo::{read_flo, write_flo};
pub use pfm::{read_pfm, write_pfm};
pub use pnm::{read_pgm, read_ppm, write_pgm, write_ppm};
pub use scene_doc::{parse_scene, serialize_scene};

/// Canonical quiet NaN written for invalid samples.
pub const NAN_BITS: u32 = 0x7FC0_0000;

pub fn canonical_nan() -> f32 {
    f32::from_bits(NAN_BITS)
}

/// Replaces any NaN payload by the canonical one.
pub fn canonicalize(x: f32) -> f32 {
    if x.is_nan() {
        canonical_nan()
    } else {
        x
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed {kind} data: {message}")]
    Malformed { kind: &'static str, message: String },
    #[error("{kind} does not support {channels}-channel maps")]
    UnsupportedChannels { kind: &'static str, channels: usize },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
}

impl FormatError {
    pub(crate) fn malformed(kind: &'static str, message: impl Into<String>) -> Self {
        FormatError::Malformed {
            kind,
            message: message.into(),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Dense multi-channel `f32` map, row-major with the top row first.
#[derive(Clone, Debug)]
pub struct FloatMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FloatMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self, FormatError> {
        if data.len() != width * height * channels {
            return Err(FormatError::Dimensions(format!(
                "{} values for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub fn pixel_mut(&mut self, index: usize) -> &mut [f32] {
        &mut self.data[index * self.channels..(index + 1) * self.channels]
    }

    /// Bitwise equality, so NaN pixels compare equal to themselves.
    pub fn bit_eq(&self, other: &FloatMap) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels == other.channels
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// RGB image with components in `[0, 1]` (clamped on write).
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }
}

/// Quantizes `[0, 1]` to a byte, rounding half up. NaN maps to 0.
pub fn to_byte(value: f64) -> u8 {
    if value.is_nan() {
        return 0;
    }
    (value.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}
