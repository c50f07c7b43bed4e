//! Uniform versus per-band linear scaling of images and the feature-space
//! discrepancy it induces under a fixed hand-crafted embedding.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{FeatureVec, Image};
use crate::rng::Rng;

pub const DEFAULT_PARTS: usize = 6;
pub const DEFAULT_BINS: usize = 8;
/// Factors are drawn from `U(FACTOR_MIN, FACTOR_MAX)`.
pub const FACTOR_MIN: f64 = 0.3;
pub const FACTOR_MAX: f64 = 1.0;
/// Embedding coordinates are rounded to multiples of this step, which absorbs
/// the last-ulp differences between `mean(α·v)` and `α·mean(v)`.
pub const EMBED_GRID: f64 = 1.0 / (1u64 << 20) as f64;

/// Row ranges of `parts` horizontal bands, top to bottom. The last band
/// absorbs the remainder when `height` is not a multiple of `parts`.
pub fn band_rows(height: usize, parts: usize) -> Result<Vec<(usize, usize)>> {
    if parts == 0 || parts > height {
        return Err(Error::arg(format!(
            "cannot split {height} rows into {parts} bands"
        )));
    }
    let step = height / parts;
    Ok((0..parts)
        .map(|i| (i * step, if i + 1 == parts { height } else { (i + 1) * step }))
        .collect())
}

/// Per-band, per-channel multiplicative factors in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartScaling {
    factors: Vec<Vec<f64>>,
}

impl PartScaling {
    /// `factors[band][channel]`.
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        let channels = factors.first().map_or(0, Vec::len);
        if factors.is_empty() || channels == 0 || factors.iter().any(|f| f.len() != channels) {
            return Err(Error::shape("scaling needs >= 1 band and equal channel counts"));
        }
        for (b, row) in factors.iter().enumerate() {
            for (c, &f) in row.iter().enumerate() {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::arg(format!(
                        "factor for band {b} channel {c} is {f} (must lie in (0, 1])"
                    )));
                }
            }
        }
        Ok(PartScaling { factors })
    }

    /// One factor for every band and channel.
    pub fn uniform(parts: usize, channels: usize, factor: f64) -> Result<Self> {
        Self::new(vec![vec![factor; channels]; parts])
    }

    /// One factor per band, shared across channels.
    pub fn per_band(band_factors: &[f64], channels: usize) -> Result<Self> {
        Self::new(band_factors.iter().map(|&f| vec![f; channels]).collect())
    }

    pub fn parts(&self) -> usize {
        self.factors.len()
    }

    pub fn channels(&self) -> usize {
        self.factors[0].len()
    }

    pub fn factor(&self, band: usize, channel: usize) -> f64 {
        self.factors[band][channel]
    }

    pub fn is_uniform(&self) -> bool {
        let f = self.factors[0][0];
        self.factors.iter().flatten().all(|&v| v == f)
    }
}

pub fn apply_part_scaling(img: &Image, s: &PartScaling) -> Result<Image> {
    if s.channels() != img.channels() {
        return Err(Error::shape(format!(
            "scaling has {} channels, image has {}",
            s.channels(),
            img.channels()
        )));
    }
    let bands = band_rows(img.height(), s.parts())?;
    let mut band_of = vec![0; img.height()];
    for (b, &(lo, hi)) in bands.iter().enumerate() {
        band_of[lo..hi].iter_mut().for_each(|v| *v = b);
    }
    Image::from_fn(img.channels(), img.height(), img.width(), |c, x, y| {
        (img.get(c, x, y) * s.factor(band_of[y], c)).min(1.0)
    })
}

/// Band means plus per-band value histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EmbeddingSpec {
    pub parts: usize,
    /// Histogram bins over [0, 1]; 0 gives a mean-only embedding.
    pub bins: usize,
    pub normalize: bool,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        EmbeddingSpec {
            parts: DEFAULT_PARTS,
            bins: DEFAULT_BINS,
            normalize: true,
        }
    }
}

impl EmbeddingSpec {
    pub fn mean_only(parts: usize) -> Self {
        EmbeddingSpec {
            parts,
            bins: 0,
            normalize: true,
        }
    }

    pub fn dim(&self, channels: usize) -> usize {
        self.parts * channels * (1 + self.bins)
    }
}

/// Embedding before grid rounding. Layout per band, per channel:
/// `[mean, hist_0 .. hist_{B-1}]`; histogram entries are value fractions.
pub fn embed_unquantized(img: &Image, spec: &EmbeddingSpec) -> Result<Vec<f64>> {
    let bands = band_rows(img.height(), spec.parts)?;
    let w = img.width();
    let mut out = Vec::with_capacity(spec.dim(img.channels()));
    for &(lo, hi) in &bands {
        for c in 0..img.channels() {
            let vals = &img.channel_plane(c)[lo * w..hi * w];
            let n = vals.len() as f64;
            out.push(vals.iter().sum::<f64>() / n);
            if spec.bins > 0 {
                let mut hist = vec![0usize; spec.bins];
                for &v in vals {
                    hist[((v * spec.bins as f64) as usize).min(spec.bins - 1)] += 1;
                }
                out.extend(hist.into_iter().map(|h| h as f64 / n));
            }
        }
    }
    if spec.normalize {
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(out)
}

pub fn quantize_to_grid(v: f64) -> f64 {
    (v / EMBED_GRID).round() * EMBED_GRID
}

/// [`embed_unquantized`] rounded to [`EMBED_GRID`].
pub fn embed(img: &Image, spec: &EmbeddingSpec) -> Result<FeatureVec> {
    FeatureVec::new(
        embed_unquantized(img, spec)?
            .into_iter()
            .map(quantize_to_grid)
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    Uniform,
    PerPart,
}

impl fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingMode::Uniform => "uniform",
            ScalingMode::PerPart => "per-part",
        })
    }
}

impl FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(ScalingMode::Uniform),
            "per-part" | "per_part" => Ok(ScalingMode::PerPart),
            other => Err(Error::arg(format!(
                "unknown scaling mode `{other}` (uniform | per-part)"
            ))),
        }
    }
}

/// Distances between an original and a transformed embedding set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceSummary {
    pub centroid_distance: f64,
    pub paired_mean: f64,
    pub paired_max: f64,
}

pub fn summarize(original: &[FeatureVec], transformed: &[FeatureVec]) -> Result<DistanceSummary> {
    if original.is_empty() || original.len() != transformed.len() {
        return Err(Error::shape("embedding sets must be non-empty and paired"));
    }
    let dim = original[0].dim();
    let centroid = |set: &[FeatureVec]| {
        let mut c = vec![0.0; dim];
        for f in set {
            for (a, v) in c.iter_mut().zip(f.iter()) {
                *a += v;
            }
        }
        c.iter_mut().for_each(|a| *a /= set.len() as f64);
        c
    };
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let paired: Vec<f64> = original
        .iter()
        .zip(transformed)
        .map(|(a, b)| dist(a, b))
        .collect();
    Ok(DistanceSummary {
        centroid_distance: dist(&centroid(original), &centroid(transformed)),
        paired_mean: paired.iter().sum::<f64>() / paired.len() as f64,
        paired_max: paired.iter().copied().fold(0.0, f64::max),
    })
}

/// Two-dimensional PCA of a feature set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pca2d {
    pub mean: Vec<f64>,
    /// Unit principal directions; a zero vector when the component is absent.
    pub components: [Vec<f64>; 2],
    /// Singular values of the centered data matrix.
    pub singular_values: [f64; 2],
    pub coords: Vec<[f64; 2]>,
}

/// Projects onto the top two principal components. Each component's sign
/// makes its largest-magnitude coordinate positive (first one on ties).
/// Components whose singular value is at roundoff level relative to the
/// largest are reported as zero.
pub fn pca2d(features: &[Vec<f64>]) -> Result<Pca2d> {
    if features.len() < 2 {
        return Err(Error::arg("PCA needs at least two feature vectors"));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(Error::shape("PCA features must share a positive dimension"));
    }
    let n = features.len();
    let mut mean = vec![0.0; d];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, d, |i, j| features[i][j] - mean[j]);
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let top = order.first().map_or(0.0, |&k| svd.singular_values[k]);
    let cutoff = top * (n.max(d) as f64) * f64::EPSILON;
    let mut components = [vec![0.0; d], vec![0.0; d]];
    let mut singular_values = [0.0; 2];
    for (slot, &k) in order.iter().take(2).enumerate() {
        let s = svd.singular_values[k];
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
        let lead = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components[slot] = v;
        singular_values[slot] = s;
    }
    let coords = (0..n)
        .map(|i| {
            let row = centered.row(i);
            let proj = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [proj(&components[0]), proj(&components[1])]
        })
        .collect();
    Ok(Pca2d {
        mean,
        components,
        singular_values,
        coords,
    })
}

/// Outcome of one scaling experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub mode: ScalingMode,
    pub parts: usize,
    pub images: usize,
    pub factor_range: [f64; 2],
    pub embedding: EmbeddingSpec,
    /// Mean-only, unit-normalized embedding.
    pub mean_only: DistanceSummary,
    /// Full embedding per `embedding`.
    pub full: DistanceSummary,
    /// Factors drawn per image, `[band]` (uniform mode repeats one value).
    pub factors: Vec<Vec<f64>>,
}

/// Scales every image by factors drawn from `U(0.3, 1)`: one per image in
/// uniform mode, one per band in per-part mode, shared across channels.
pub fn run_experiment(
    imgs: &[Image],
    mode: ScalingMode,
    parts: usize,
    rng: &mut Rng,
    spec: &EmbeddingSpec,
) -> Result<DiscrepancyReport> {
    if imgs.len() < 2 {
        return Err(Error::arg("discrepancy experiment needs at least two images"));
    }
    let mean_spec = EmbeddingSpec::mean_only(spec.parts);
    let mut factors = Vec::with_capacity(imgs.len());
    let mut transformed = Vec::with_capacity(imgs.len());
    for img in imgs {
        let f: Vec<f64> = match mode {
            ScalingMode::Uniform => vec![rng.uniform(FACTOR_MIN, FACTOR_MAX)?; parts],
            ScalingMode::PerPart => (0..parts)
                .map(|_| rng.uniform(FACTOR_MIN, FACTOR_MAX))
                .collect::<Result<_>>()?,
        };
        transformed.push(apply_part_scaling(img, &PartScaling::per_band(&f, img.channels())?)?);
        factors.push(f);
    }
    let embed_all = |set: &[Image], s: &EmbeddingSpec| {
        set.iter().map(|i| embed(i, s)).collect::<Result<Vec<_>>>()
    };
    Ok(DiscrepancyReport {
        mode,
        parts,
        images: imgs.len(),
        factor_range: [FACTOR_MIN, FACTOR_MAX],
        embedding: *spec,
        mean_only: summarize(&embed_all(imgs, &mean_spec)?, &embed_all(&transformed, &mean_spec)?)?,
        full: summarize(&embed_all(imgs, spec)?, &embed_all(&transformed, spec)?)?,
        factors,
    })
}

/// Images made of `bands` horizontal stripes, each with its own random base
/// color per channel plus mild per-pixel texture, all within [0.05, 0.95].
pub fn synthetic_band_images(
    rng: &mut Rng,
    count: usize,
    channels: usize,
    height: usize,
    width: usize,
    bands: usize,
) -> Result<Vec<Image>> {
    let rows = band_rows(height, bands)?;
    (0..count)
        .map(|_| {
            let base: Vec<Vec<f64>> = (0..bands)
                .map(|_| (0..channels).map(|_| 0.15 + 0.7 * rng.unit()).collect())
                .collect();
            let mut band_of = vec![0; height];
            for (b, &(lo, hi)) in rows.iter().enumerate() {
                band_of[lo..hi].iter_mut().for_each(|v| *v = b);
            }
            Image::from_fn(channels, height, width, |c, _, y| {
                (base[band_of[y]][c] + 0.08 * rng.normal()).clamp(0.05, 0.95)
            })
        })
        .collect()
}
