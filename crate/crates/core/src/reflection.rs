//! Lambertian cross-spectral image formation and band-ratio analysis.
//!
//! A pixel response in spectrum `j` is
//! `σ(x,y) · β_j(x,y) · ω_j · Σ_λ F(λ) S(λ,x,y) Q_j(λ) Δλ`, clamped to `[0, 1]`.
//! With `β` constant the shading term cancels in any ratio of two spectra, so
//! the ratio depends only on the material's reflectance. [`band_ratio`],
//! [`fit_linear_factor`] and [`ratio_constancy_stats`] measure that.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::Rng;

/// Default number of wavelength samples.
pub const DEFAULT_WAVELENGTHS: usize = 32;

/// Default denominator threshold for ratio masking (one 8-bit level).
pub const DEFAULT_RATIO_EPS: f64 = 1.0 / 255.0;

/// Camera spectrum: red, green, blue or near-infrared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spectrum {
    R,
    G,
    B,
    N,
}

impl Spectrum {
    pub const ALL: [Spectrum; 4] = [Spectrum::R, Spectrum::G, Spectrum::B, Spectrum::N];

    fn slot(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Spectrum::R => "R",
            Spectrum::G => "G",
            Spectrum::B => "B",
            Spectrum::N => "N",
        }
    }
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Spectrum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "R" | "r" => Ok(Spectrum::R),
            "G" | "g" => Ok(Spectrum::G),
            "B" | "b" => Ok(Spectrum::B),
            "N" | "n" | "NIR" | "nir" => Ok(Spectrum::N),
            other => Err(Error::arg(format!(
                "unknown spectrum `{other}` (expected R, G, B or N)"
            ))),
        }
    }
}

/// Per-pixel material ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterialMap {
    width: usize,
    height: usize,
    ids: Vec<u32>,
}

impl MaterialMap {
    pub fn new(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("material map dimensions must be positive"));
        }
        if ids.len() != width * height {
            return Err(Error::shape(format!(
                "{} material ids for a {width}x{height} map",
                ids.len()
            )));
        }
        Ok(MaterialMap { width, height, ids })
    }

    pub fn uniform(width: usize, height: usize, id: u32) -> Result<Self> {
        Self::new(width, height, vec![id; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.ids[y * self.width + x]
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Distinct ids in ascending order.
    pub fn distinct(&self) -> Vec<u32> {
        let mut v = self.ids.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// A synthetic multi-spectral scene.
///
/// All spectra share one uniform wavelength grid with spacing `wavelength_step`.
#[derive(Debug, Clone)]
pub struct SpectralScene {
    materials: MaterialMap,
    reflectance: BTreeMap<u32, Vec<f64>>,
    illuminant: Vec<f64>,
    intensity: [f64; 4],
    sensitivity: [Vec<f64>; 4],
    shading: Vec<f64>,
    incident_ratio: [Vec<f64>; 4],
    wavelength_step: f64,
}

impl SpectralScene {
    /// Validates and assembles a scene with `β ≡ 1`.
    ///
    /// `intensity` and `sensitivity` are indexed in `R, G, B, N` order.
    pub fn new(
        materials: MaterialMap,
        reflectance: BTreeMap<u32, Vec<f64>>,
        illuminant: Vec<f64>,
        intensity: [f64; 4],
        sensitivity: [Vec<f64>; 4],
        shading: Vec<f64>,
        wavelength_step: f64,
    ) -> Result<Self> {
        let n = illuminant.len();
        if n < 1 {
            return Err(Error::arg("wavelength grid must have at least one sample"));
        }
        if !(wavelength_step > 0.0 && wavelength_step.is_finite()) {
            return Err(Error::arg("wavelength step must be positive"));
        }
        let nonneg = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !nonneg(&illuminant) {
            return Err(Error::arg("illuminant samples must be finite and non-negative"));
        }
        for (s, q) in Spectrum::ALL.iter().zip(&sensitivity) {
            if q.len() != n {
                return Err(Error::shape(format!(
                    "sensitivity {s} has {} samples, grid has {n}",
                    q.len()
                )));
            }
            if !nonneg(q) {
                return Err(Error::arg(format!(
                    "sensitivity {s} must be finite and non-negative"
                )));
            }
        }
        for (s, w) in Spectrum::ALL.iter().zip(&intensity) {
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::arg(format!("intensity {s} must be positive, got {w}")));
            }
        }
        for (id, r) in &reflectance {
            if r.len() != n {
                return Err(Error::shape(format!(
                    "reflectance of material {id} has {} samples, grid has {n}",
                    r.len()
                )));
            }
            if !r.iter().all(|v| (0.0..=1.0).contains(v)) {
                return Err(Error::arg(format!(
                    "reflectance of material {id} must lie in [0, 1]"
                )));
            }
        }
        if let Some(id) = materials
            .distinct()
            .into_iter()
            .find(|id| !reflectance.contains_key(id))
        {
            return Err(Error::arg(format!("material {id} has no reflectance entry")));
        }
        let pixels = materials.width() * materials.height();
        if shading.len() != pixels {
            return Err(Error::shape(format!(
                "shading field has {} values for {pixels} pixels",
                shading.len()
            )));
        }
        if !nonneg(&shading) {
            return Err(Error::arg("shading must be finite and non-negative"));
        }
        Ok(SpectralScene {
            materials,
            reflectance,
            illuminant,
            intensity,
            sensitivity,
            shading,
            incident_ratio: std::array::from_fn(|_| vec![1.0; pixels]),
            wavelength_step,
        })
    }

    /// Replaces the incident-light ratio field of one spectrum.
    pub fn with_incident_ratio(mut self, spectrum: Spectrum, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != self.shading.len() {
            return Err(Error::shape("incident ratio field size differs from the scene"));
        }
        if !beta.iter().all(|b| b.is_finite() && *b >= 0.0) {
            return Err(Error::arg("incident ratio must be finite and non-negative"));
        }
        self.incident_ratio[spectrum.slot()] = beta;
        Ok(self)
    }

    /// Sets `ω_j`.
    pub fn with_intensity(mut self, spectrum: Spectrum, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::arg(format!("intensity must be positive, got {omega}")));
        }
        self.intensity[spectrum.slot()] = omega;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.materials.width()
    }

    pub fn height(&self) -> usize {
        self.materials.height()
    }

    pub fn materials(&self) -> &MaterialMap {
        &self.materials
    }

    pub fn wavelengths(&self) -> usize {
        self.illuminant.len()
    }

    pub fn intensity(&self, spectrum: Spectrum) -> f64 {
        self.intensity[spectrum.slot()]
    }

    pub fn illuminant(&self) -> &[f64] {
        &self.illuminant
    }

    pub fn sensitivity(&self, spectrum: Spectrum) -> &[f64] {
        &self.sensitivity[spectrum.slot()]
    }

    pub fn wavelength_step(&self) -> f64 {
        self.wavelength_step
    }

    pub fn reflectance(&self, material: u32) -> Option<&[f64]> {
        self.reflectance.get(&material).map(Vec::as_slice)
    }

    /// `Σ_λ F(λ) S_m(λ) Q_j(λ) Δλ` for material `m`.
    pub fn spectral_integral(&self, material: u32, spectrum: Spectrum) -> Option<f64> {
        let s = self.reflectance.get(&material)?;
        let q = &self.sensitivity[spectrum.slot()];
        let sum: f64 = self
            .illuminant
            .iter()
            .zip(s)
            .zip(q)
            .map(|((f, s), q)| f * s * q)
            .sum();
        Some(sum * self.wavelength_step)
    }

    /// The shading-free response `ω_j · Σ F S Q Δλ` of a material.
    pub fn material_response(&self, material: u32, spectrum: Spectrum) -> Option<f64> {
        Some(self.intensity(spectrum) * self.spectral_integral(material, spectrum)?)
    }

    /// Analytic cross-spectral ratio `ρ_num / ρ_den` for a material with `β ≡ 1`.
    pub fn analytic_ratio(&self, material: u32, num: Spectrum, den: Spectrum) -> Option<f64> {
        let d = self.material_response(material, den)?;
        if d == 0.0 {
            return None;
        }
        Some(self.material_response(material, num)? / d)
    }

    /// Largest unclamped pixel response across all spectra.
    pub fn peak_response(&self) -> f64 {
        let mut peak: f64 = 0.0;
        for y in 0..self.height() {
            for x in 0..self.width() {
                for s in Spectrum::ALL {
                    peak = peak.max(self.unclamped(s, x, y));
                }
            }
        }
        peak
    }

    fn unclamped(&self, spectrum: Spectrum, x: usize, y: usize) -> f64 {
        let i = y * self.width() + x;
        let integral = self
            .spectral_integral(self.materials.ids[i], spectrum)
            .expect("validated at construction");
        self.shading[i] * self.incident_ratio[spectrum.slot()][i] * self.intensity(spectrum) * integral
    }
}

/// Renders one spectrum of a scene as a single-channel image.
pub fn render(scene: &SpectralScene, spectrum: Spectrum) -> Image {
    let (w, h) = (scene.width(), scene.height());
    // One integral per material rather than per pixel.
    let integrals: BTreeMap<u32, f64> = scene
        .reflectance
        .keys()
        .map(|&id| (id, scene.spectral_integral(id, spectrum).unwrap_or(0.0)))
        .collect();
    let omega = scene.intensity(spectrum);
    let beta = &scene.incident_ratio[spectrum.slot()];
    let data = (0..w * h)
        .map(|i| {
            let v = scene.shading[i] * beta[i] * omega * integrals[&scene.materials.ids[i]];
            v.clamp(0.0, 1.0)
        })
        .collect();
    Image::new(1, h, w, data).expect("clamped render is a valid image")
}

/// Parameters for [`synthesize_scene`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub materials: usize,
    pub wavelengths: usize,
    /// Largest rendered value across all spectra; kept below 1 so nothing clamps.
    pub peak: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            width: 64,
            height: 128,
            materials: 4,
            wavelengths: DEFAULT_WAVELENGTHS,
            peak: 0.9,
        }
    }
}

const LAMBDA_MIN: f64 = 400.0;
const LAMBDA_MAX: f64 = 1000.0;

fn gaussian(center: f64, width: f64) -> impl Fn(f64) -> f64 {
    move |l| (-0.5 * ((l - center) / width).powi(2)).exp()
}

/// Builds a random unclamped scene: Voronoi material regions, smooth reflectance
/// spectra over 400–1000 nm, Gaussian R/G/B/N sensor curves and a smooth shading
/// field in `[0.55, 1]`. Intensities are scaled so the brightest pixel equals
/// `params.peak`.
pub fn synthesize_scene(params: &SceneParams, rng: &mut Rng) -> Result<SpectralScene> {
    let SceneParams {
        width,
        height,
        materials,
        wavelengths,
        peak,
    } = *params;
    if width == 0 || height == 0 {
        return Err(Error::arg("scene dimensions must be positive"));
    }
    if materials == 0 || materials > width * height {
        return Err(Error::arg(format!(
            "material count {materials} must be in 1..={}",
            width * height
        )));
    }
    if wavelengths < 2 {
        return Err(Error::arg("at least two wavelength samples are required"));
    }
    if !(peak > 0.0 && peak <= 1.0) {
        return Err(Error::arg("peak must be in (0, 1]"));
    }

    let step = (LAMBDA_MAX - LAMBDA_MIN) / (wavelengths - 1) as f64;
    let grid: Vec<f64> = (0..wavelengths)
        .map(|k| LAMBDA_MIN + k as f64 * step)
        .collect();
    let t = |l: f64| (l - LAMBDA_MIN) / (LAMBDA_MAX - LAMBDA_MIN);

    let illuminant: Vec<f64> = grid.iter().map(|&l| 0.6 + 0.4 * t(l)).collect();
    let curves = [
        gaussian(600.0, 40.0),
        gaussian(540.0, 40.0),
        gaussian(460.0, 40.0),
        gaussian(850.0, 60.0),
    ];
    let sensitivity: [Vec<f64>; 4] =
        std::array::from_fn(|j| grid.iter().map(|&l| curves[j](l)).collect());

    let mut reflectance = BTreeMap::new();
    for id in 0..materials as u32 {
        let base = rng.uniform(0.2, 0.6)?;
        let slope = rng.uniform(-0.3, 0.3)?;
        let ripple = rng.uniform(0.0, 0.05)?;
        let phase = rng.uniform(0.0, std::f64::consts::TAU)?;
        let spectrum = grid
            .iter()
            .map(|&l| {
                let u = t(l);
                (base + slope * (u - 0.5) + ripple * (6.0 * u + phase).sin()).clamp(0.02, 0.98)
            })
            .collect();
        reflectance.insert(id, spectrum);
    }

    // Distinct seed pixels guarantee every material owns at least one pixel.
    let mut seeds: Vec<(usize, usize)> = Vec::with_capacity(materials);
    while seeds.len() < materials {
        let p = (rng.below(width), rng.below(height));
        if !seeds.contains(&p) {
            seeds.push(p);
        }
    }
    let mut ids = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let nearest = seeds
                .iter()
                .enumerate()
                .min_by_key(|(_, &(sx, sy))| {
                    let dx = sx.abs_diff(x);
                    let dy = sy.abs_diff(y);
                    dx * dx + dy * dy
                })
                .map(|(i, _)| i as u32)
                .expect("at least one seed");
            ids.push(nearest);
        }
    }
    let material_map = MaterialMap::new(width, height, ids)?;

    let fx = rng.uniform(0.02, 0.12)?;
    let fy = rng.uniform(0.02, 0.12)?;
    let px = rng.uniform(0.0, std::f64::consts::TAU)?;
    let py = rng.uniform(0.0, std::f64::consts::TAU)?;
    let mut shading = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let s = (fx * x as f64 + px).sin() * (fy * y as f64 + py).cos();
            shading.push(0.775 + 0.225 * s);
        }
    }

    let scene = SpectralScene::new(
        material_map,
        reflectance,
        illuminant,
        [1.0; 4],
        sensitivity,
        shading,
        step,
    )?;
    // Normalize each spectrum so its brightest pixel sits at `peak`.
    let mut intensity = [1.0; 4];
    for s in Spectrum::ALL {
        let mut top: f64 = 0.0;
        for y in 0..height {
            for x in 0..width {
                top = top.max(scene.unclamped(s, x, y));
            }
        }
        intensity[s.slot()] = peak / top;
    }
    let mut scene = scene;
    scene.intensity = intensity;
    Ok(scene)
}

/// Per-pixel ratio of two single-channel images with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMap {
    width: usize,
    height: usize,
    values: Vec<Option<f64>>,
}

impl RatioMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.values[y * self.width + x]
    }

    /// Row-major ratios; `None` where the denominator is below threshold.
    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// `a / b` wherever `b ≥ eps`.
pub fn band_ratio(a: &Image, b: &Image, eps: f64) -> Result<RatioMap> {
    if a.channels() != 1 || b.channels() != 1 {
        return Err(Error::shape("band_ratio expects single-channel images"));
    }
    if !a.same_shape(b) {
        return Err(Error::shape(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::arg(format!("eps must be positive, got {eps}")));
    }
    let values = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&num, &den)| (den >= eps).then(|| num / den))
        .collect();
    Ok(RatioMap {
        width: a.width(),
        height: a.height(),
        values,
    })
}

/// Least-squares slope through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub residual_rms: f64,
    pub samples: usize,
}

/// Fits `a ≈ k · b` by minimizing `Σ (a − k b)²`.
pub fn fit_linear_factor(pairs: &[(f64, f64)]) -> Result<LinearFit> {
    if pairs.is_empty() {
        return Err(Error::arg("at least one (a, b) pair is required"));
    }
    let sab: f64 = pairs.iter().map(|(a, b)| a * b).sum();
    let sbb: f64 = pairs.iter().map(|(_, b)| b * b).sum();
    if sbb == 0.0 {
        return Err(Error::Degenerate("all denominators are zero".into()));
    }
    let slope = sab / sbb;
    let sse: f64 = pairs.iter().map(|(a, b)| (a - slope * b).powi(2)).sum();
    Ok(LinearFit {
        slope,
        residual_rms: (sse / pairs.len() as f64).sqrt(),
        samples: pairs.len(),
    })
}

/// `(a, b)` pixel pairs of one material where `b ≥ eps`.
pub fn material_pairs(
    a: &Image,
    b: &Image,
    materials: &MaterialMap,
    material: u32,
    eps: f64,
) -> Result<Vec<(f64, f64)>> {
    if a.channels() != 1 || b.channels() != 1 || !a.same_shape(b) {
        return Err(Error::shape("material_pairs expects two same-size single-channel images"));
    }
    if materials.width() != a.width() || materials.height() != a.height() {
        return Err(Error::shape("material map size differs from the images"));
    }
    Ok(a.data()
        .iter()
        .zip(b.data())
        .zip(materials.ids())
        .filter(|&((_, &den), &id)| id == material && den >= eps)
        .map(|((&num, &den), _)| (num, den))
        .collect())
}

/// Ratio statistics for one material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialRatioStats {
    pub material: u32,
    /// Number of valid ratio samples.
    pub count: usize,
    pub mean: Option<f64>,
    /// Population standard deviation over the mean; `None` with fewer than two samples.
    pub cv: Option<f64>,
}

/// Mean and coefficient of variation of valid ratios, per material, ascending by id.
pub fn ratio_constancy_stats(
    ratio: &RatioMap,
    materials: &MaterialMap,
) -> Result<Vec<MaterialRatioStats>> {
    if materials.width() != ratio.width || materials.height() != ratio.height {
        return Err(Error::shape("material map size differs from the ratio map"));
    }
    let mut groups: BTreeMap<u32, Vec<f64>> = materials
        .distinct()
        .into_iter()
        .map(|id| (id, Vec::new()))
        .collect();
    for (v, id) in ratio.values.iter().zip(materials.ids()) {
        if let Some(v) = v {
            groups.get_mut(id).expect("all ids present").push(*v);
        }
    }
    Ok(groups
        .into_iter()
        .map(|(material, vals)| {
            let count = vals.len();
            let mean = (count > 0).then(|| vals.iter().sum::<f64>() / count as f64);
            let cv = match mean {
                Some(m) if count >= 2 && m != 0.0 => {
                    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / count as f64;
                    Some(var.sqrt() / m.abs())
                }
                _ => None,
            };
            MaterialRatioStats {
                material,
                count,
                mean,
                cv,
            }
        })
        .collect())
}
