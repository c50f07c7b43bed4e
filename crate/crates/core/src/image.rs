//! Image and feature containers shared by every module.
//!
//! Pixels are reflectance-normalized reals in `[0, 1]`; quantization to 8 bits
//! only happens at file boundaries (see [`crate::io`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `C × H × W` grid of pixel intensities in `[0, 1]`, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from channel-major data (`data[(c * H + y) * W + x]`).
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::arg(format!(
                "image dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "{} values for a {channels}x{height}x{width} image",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::arg(format!(
                "pixel value {} at flat index {i} is outside [0, 1]",
                data[i]
            )));
        }
        Ok(Image {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            vec![value; channels * height * width],
        )
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::filled(channels, height, width, 0.0)
    }

    /// Builds an image from a function of `(c, x, y)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[self.index(c, x, y)]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Row-major `H × W` plane of channel `c`.
    pub fn channel_plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Mutable access for in-crate transforms; callers must restore the `[0, 1]` range.
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Returns `true` when every pixel is finite and inside `[0, 1]`.
    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// An axis-aligned pixel rectangle with origin `(x, y)` and size `width × height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    /// `true` if the rect is non-empty and lies inside a `width × height` image.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.width >= 1
            && self.height >= 1
            && self.x + self.width <= width
            && self.y + self.height <= height
    }
}

/// Spectral modality of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "VIS")]
    Vis,
    #[serde(rename = "NIR")]
    Nir,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Vis => "VIS",
            Modality::Nir => "NIR",
        }
    }

    pub fn other(self) -> Modality {
        match self {
            Modality::Vis => Modality::Nir,
            Modality::Nir => Modality::Vis,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "VIS" | "vis" => Ok(Modality::Vis),
            "NIR" | "nir" => Ok(Modality::Nir),
            other => Err(Error::Format(format!("unknown modality `{other}`"))),
        }
    }
}

/// A non-empty vector of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec(Vec<f64>);

impl FeatureVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("feature vector must have dimension >= 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("feature entry {i} is not finite")));
        }
        Ok(FeatureVec(values))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for FeatureVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A feature with its identity label and capture modality.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeature {
    pub feature: FeatureVec,
    pub identity: u32,
    pub modality: Modality,
}

impl LabeledFeature {
    pub fn new(feature: FeatureVec, identity: u32, modality: Modality) -> Self {
        LabeledFeature {
            feature,
            identity,
            modality,
        }
    }
}
