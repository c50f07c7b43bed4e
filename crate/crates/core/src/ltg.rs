//! Linear transformation generator.
//!
//! With probability `p` the generator repeatedly picks a random rectangle and
//! multiplies each channel of it by `α = g / max(patch)`, where `g ∈ [0, 1]`
//! comes from a [`FactorGenerator`]. Scaling by at most `1 / max(patch)` keeps
//! every pixel inside `[0, 1]`. A [`MemoryMatrix`] records the cumulative
//! factor at every position and the loop stops once any entry falls to
//! `t_min`, or after `max_iters` applied rectangles.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Rect};
use crate::rng::Rng;

/// Consecutive out-of-bounds draws tolerated before giving up on a rectangle.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 10_000;

/// Distribution of the multiplier `g` applied on top of `1 / max(patch)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FactorGenerator {
    Beta { a: f64, b: f64 },
    Uniform,
    Constant { c: f64 },
}

impl Default for FactorGenerator {
    fn default() -> Self {
        FactorGenerator::Beta { a: 0.5, b: 0.5 }
    }
}

impl FactorGenerator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FactorGenerator::Beta { a, b } if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) => {
                Err(Error::arg(format!("beta parameters must be positive, got ({a}, {b})")))
            }
            FactorGenerator::Constant { c } if !(0.0..=1.0).contains(&c) => {
                Err(Error::arg(format!("constant factor must be in [0, 1], got {c}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FactorGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorGenerator::Beta { a, b } => write!(f, "beta:{a},{b}"),
            FactorGenerator::Uniform => f.write_str("uniform"),
            FactorGenerator::Constant { c } => write!(f, "constant:{c}"),
        }
    }
}

impl FromStr for FactorGenerator {
    type Err = Error;

    /// Parses `beta:A,B`, `uniform` or `constant:C`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::arg(format!("bad generator `{s}` (beta:A,B | uniform | constant:C)"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let gen = match s.split_once(':') {
            None if s == "uniform" => FactorGenerator::Uniform,
            Some(("beta", args)) => {
                let (a, b) = args.split_once(',').ok_or_else(bad)?;
                FactorGenerator::Beta { a: num(a)?, b: num(b)? }
            }
            Some(("constant", c)) => FactorGenerator::Constant { c: num(c)? },
            _ => return Err(bad()),
        };
        gen.validate()?;
        Ok(gen)
    }
}

/// Draws one multiplier in `[0, 1]`.
pub fn sample_factor(rng: &mut Rng, generator: &FactorGenerator) -> f64 {
    match *generator {
        FactorGenerator::Beta { a, b } => rng.beta(a, b),
        FactorGenerator::Uniform => rng.unit(),
        FactorGenerator::Constant { c } => c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtgConfig {
    /// Probability of transforming an image at all.
    pub p: f64,
    /// Rectangle area bounds as fractions of `W · H`.
    pub s_min: f64,
    pub s_max: f64,
    /// Aspect (`H_r / W_r`) bounds.
    pub r_min: f64,
    pub r_max: f64,
    /// Stop once any memory entry is at or below this value.
    pub t_min: f64,
    /// Maximum number of applied rectangles.
    pub max_iters: usize,
    pub generator: FactorGenerator,
}

impl Default for LtgConfig {
    fn default() -> Self {
        LtgConfig {
            p: 0.5,
            s_min: 0.02,
            s_max: 0.4,
            r_min: 0.3,
            r_max: 1.0 / 0.3,
            t_min: 1e-6,
            max_iters: 200,
            generator: FactorGenerator::default(),
        }
    }
}

impl LtgConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::arg(m));
        if !(0.0..=1.0).contains(&self.p) {
            return fail(format!("p must be in [0, 1], got {}", self.p));
        }
        if !(self.s_min > 0.0 && self.s_min <= self.s_max && self.s_max <= 1.0) {
            return fail(format!(
                "area bounds need 0 < s_min <= s_max <= 1, got [{}, {}]",
                self.s_min, self.s_max
            ));
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max && self.r_max.is_finite()) {
            return fail(format!(
                "aspect bounds need 0 < r_min <= r_max, got [{}, {}]",
                self.r_min, self.r_max
            ));
        }
        if !(self.t_min > 0.0) {
            return fail(format!("t_min must be positive, got {}", self.t_min));
        }
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1".into());
        }
        self.generator.validate()
    }
}

/// Cumulative multiplicative factor per image position.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryMatrix {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl MemoryMatrix {
    pub fn ones(channels: usize, height: usize, width: usize) -> Self {
        MemoryMatrix {
            channels,
            height,
            width,
            data: vec![1.0; channels * height * width],
        }
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

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Channel-major values, same layout as [`Image::data`].
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// The probability gate left the image untouched.
    ProbabilitySkip,
    /// Some memory entry reached `t_min`.
    Threshold,
    /// `max_iters` rectangles were applied.
    IterationCap,
    /// No in-bounds rectangle was found within [`MAX_CONSECUTIVE_REJECTIONS`] draws.
    RejectionCap,
}

/// One applied rectangle with its per-channel factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Application {
    pub rect: Rect,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtgTrace {
    pub applied: bool,
    pub termination: Termination,
    pub applications: Vec<Application>,
    /// Rectangle draws including rejected ones.
    pub draws: usize,
}

impl LtgTrace {
    /// Re-applies the recorded rectangles to `input`.
    pub fn replay(&self, input: &Image) -> Result<(Image, MemoryMatrix)> {
        let mut img = input.clone();
        let mut memory = MemoryMatrix::ones(input.channels(), input.height(), input.width());
        for app in &self.applications {
            if !app.rect.fits(input.width(), input.height()) || app.alphas.len() != input.channels() {
                return Err(Error::shape("trace does not match the image"));
            }
            apply_factors(&mut img, &mut memory, &app.rect, &app.alphas);
        }
        Ok((img, memory))
    }
}

#[derive(Debug, Clone)]
pub struct LtgOutput {
    pub image: Image,
    pub memory: MemoryMatrix,
    pub trace: LtgTrace,
}

/// Per-channel `1 / max(patch)`; `None` for an all-zero channel patch.
fn max_factor(img: &Image, rect: &Rect, channel: usize) -> Option<f64> {
    let mut m: f64 = 0.0;
    for y in rect.y..rect.y + rect.height {
        let row = img.index(channel, rect.x, y);
        for v in &img.data()[row..row + rect.width] {
            m = m.max(*v);
        }
    }
    let a = 1.0 / m;
    (m > 0.0 && a.is_finite()).then_some(a)
}

fn apply_factors(img: &mut Image, memory: &mut MemoryMatrix, rect: &Rect, alphas: &[f64]) {
    let (h, w) = (img.height(), img.width());
    for (c, &alpha) in alphas.iter().enumerate() {
        if alpha == 1.0 {
            continue;
        }
        for y in rect.y..rect.y + rect.height {
            let start = (c * h + y) * w + rect.x;
            let range = start..start + rect.width;
            for v in &mut img.data_mut()[range.clone()] {
                // α ≤ 1 / max can overshoot 1 by one ulp.
                *v = (*v * alpha).min(1.0);
            }
            for m in &mut memory.data[range] {
                *m *= alpha;
            }
        }
    }
}

fn draw_between(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    if lo < hi {
        rng.uniform(lo, hi).expect("bounds checked")
    } else {
        lo
    }
}

/// Draws a rectangle; `None` if it falls outside the image.
fn draw_rect(rng: &mut Rng, cfg: &LtgConfig, width: usize, height: usize) -> Option<Rect> {
    let area = draw_between(rng, cfg.s_min, cfg.s_max) * (width * height) as f64;
    let aspect = draw_between(rng, cfg.r_min, cfg.r_max);
    let rect_h = (area * aspect).sqrt().round() as usize;
    let rect_w = (area / aspect).sqrt().round() as usize;
    let x = rng.below(width);
    let y = rng.below(height);
    let rect = Rect::new(x, y, rect_w, rect_h);
    rect.fits(width, height).then_some(rect)
}

/// Runs the generator on one image.
pub fn generate(img: &Image, cfg: &LtgConfig, rng: &mut Rng) -> Result<LtgOutput> {
    cfg.validate()?;
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let mut image = img.clone();
    let mut memory = MemoryMatrix::ones(c, h, w);
    let mut trace = LtgTrace {
        applied: false,
        termination: Termination::ProbabilitySkip,
        applications: Vec::new(),
        draws: 0,
    };

    if rng.unit() >= cfg.p {
        return Ok(LtgOutput {
            image,
            memory,
            trace,
        });
    }
    trace.applied = true;

    let mut rejections = 0;
    trace.termination = loop {
        trace.draws += 1;
        let Some(rect) = draw_rect(rng, cfg, w, h) else {
            rejections += 1;
            if rejections >= MAX_CONSECUTIVE_REJECTIONS {
                break Termination::RejectionCap;
            }
            continue;
        };
        rejections = 0;

        let alphas: Vec<f64> = (0..c)
            .map(|ch| match max_factor(&image, &rect, ch) {
                Some(alpha_max) => alpha_max * sample_factor(rng, &cfg.generator),
                None => 1.0,
            })
            .collect();
        apply_factors(&mut image, &mut memory, &rect, &alphas);
        trace.applications.push(Application { rect, alphas });

        // Entries outside the rect were above t_min before this step.
        if patch_min(&memory, &rect) <= cfg.t_min {
            break Termination::Threshold;
        }
        if trace.applications.len() >= cfg.max_iters {
            break Termination::IterationCap;
        }
    };

    debug_assert!(image.in_unit_range());
    Ok(LtgOutput {
        image,
        memory,
        trace,
    })
}

fn patch_min(memory: &MemoryMatrix, rect: &Rect) -> f64 {
    let mut m = f64::INFINITY;
    for c in 0..memory.channels {
        for y in rect.y..rect.y + rect.height {
            let start = (c * memory.height + y) * memory.width + rect.x;
            for v in &memory.data[start..start + rect.width] {
                m = m.min(*v);
            }
        }
    }
    m
}

/// Runs [`generate`] on every image; image `k` uses [`Rng::for_image`]`(base_seed, k)`.
pub fn generate_batch(imgs: &[Image], cfg: &LtgConfig, base_seed: u64) -> Result<Vec<LtgOutput>> {
    cfg.validate()?;
    imgs.par_iter()
        .enumerate()
        .map(|(k, img)| generate(img, cfg, &mut Rng::for_image(base_seed, k as u64)))
        .collect()
}
