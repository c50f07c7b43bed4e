//! Modality-aware spatial attention, part-based pooling and the dimension
//! reducing projection, as forward operators on small feature maps.

use crate::error::{Error, Result};
use crate::image::Modality;
use crate::rng::Rng;

/// `C × H × W` real-valued feature map, stored channel-major like [`crate::Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::arg(format!(
                "feature map dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "{} values for a {channels}x{height}x{width} feature map",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("feature map value {i} is not finite")));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
        })
    }

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

    /// Standard-normal entries scaled by `scale`.
    pub fn random(rng: &mut Rng, channels: usize, height: usize, width: usize, scale: f64) -> Result<Self> {
        Self::from_fn(channels, height, width, |_, _, _| scale * rng.normal())
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Channel vector at site `(x, y)`.
    pub fn site(&self, x: usize, y: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.get(c, x, y)).collect()
    }

    /// Per-channel mean over all sites.
    pub fn global_average(&self) -> Vec<f64> {
        let n = (self.height * self.width) as f64;
        self.data
            .chunks(self.height * self.width)
            .map(|plane| plane.iter().sum::<f64>() / n)
            .collect()
    }
}

/// `H × W` map of attention weights in the open interval (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl AttentionMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width || height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "{} values for a {height}x{width} attention map",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::arg(format!(
                "attention value {i} is {} (must lie in (0, 1))",
                values[i]
            )));
        }
        Ok(AttentionMap {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Affine map `W·v + b` with `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    in_dim: usize,
    out_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Linear {
    /// Parameters may be non-finite; only shapes are checked.
    pub fn new(in_dim: usize, out_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::arg("linear map dimensions must be positive"));
        }
        if weight.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::shape(format!(
                "linear {in_dim}->{out_dim} needs {} weights and {out_dim} biases, got {} and {}",
                in_dim * out_dim,
                weight.len(),
                bias.len()
            )));
        }
        Ok(Linear {
            in_dim,
            out_dim,
            weight,
            bias,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Result<Self> {
        Self::new(in_dim, out_dim, vec![0.0; in_dim * out_dim], vec![0.0; out_dim])
    }

    /// Ones on the leading diagonal, zero bias.
    pub fn identity(in_dim: usize, out_dim: usize) -> Result<Self> {
        let mut w = vec![0.0; in_dim * out_dim];
        for k in 0..in_dim.min(out_dim) {
            w[k * in_dim + k] = 1.0;
        }
        Self::new(in_dim, out_dim, w, vec![0.0; out_dim])
    }

    /// Weights drawn from `N(0, 1/in_dim)`, bias from `N(0, 0.01)`.
    pub fn seeded(rng: &mut Rng, in_dim: usize, out_dim: usize) -> Result<Self> {
        let s = 1.0 / (in_dim.max(1) as f64).sqrt();
        let weight = (0..in_dim * out_dim).map(|_| s * rng.normal()).collect();
        let bias = (0..out_dim).map(|_| 0.1 * rng.normal()).collect();
        Self::new(in_dim, out_dim, weight, bias)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.in_dim {
            return Err(Error::shape(format!(
                "linear map expects {} inputs, got {}",
                self.in_dim,
                v.len()
            )));
        }
        Ok(self
            .weight
            .chunks(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect())
    }
}

/// One per-site linear map per modality.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityTransform {
    vis: Linear,
    nir: Linear,
}

impl ModalityTransform {
    pub fn new(vis: Linear, nir: Linear) -> Result<Self> {
        if (vis.in_dim, vis.out_dim) != (nir.in_dim, nir.out_dim) {
            return Err(Error::shape(format!(
                "VIS transform is {}->{} but NIR transform is {}->{}",
                vis.in_dim, vis.out_dim, nir.in_dim, nir.out_dim
            )));
        }
        Ok(ModalityTransform { vis, nir })
    }

    /// VIS and NIR maps drawn from independent streams of `seed`.
    pub fn seeded(seed: u64, in_dim: usize, out_dim: usize) -> Result<Self> {
        let vis = Linear::seeded(&mut Rng::new(seed, 1), in_dim, out_dim)?;
        let nir = Linear::seeded(&mut Rng::new(seed, 2), in_dim, out_dim)?;
        Self::new(vis, nir)
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Result<Self> {
        Self::new(Linear::zeros(in_dim, out_dim)?, Linear::zeros(in_dim, out_dim)?)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(Linear::identity(dim, dim)?, Linear::identity(dim, dim)?)
    }

    pub fn for_modality(&self, modality: Modality) -> &Linear {
        match modality {
            Modality::Vis => &self.vis,
            Modality::Nir => &self.nir,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.vis.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.vis.out_dim
    }

    /// Applies the modality's map at every site.
    pub fn transform(&self, f: &FeatureMap, modality: Modality) -> Result<FeatureMap> {
        let lin = self.for_modality(modality);
        if f.channels != lin.in_dim {
            return Err(Error::shape(format!(
                "transform expects {} channels, feature map has {}",
                lin.in_dim, f.channels
            )));
        }
        let plane = f.height * f.width;
        let mut out = vec![0.0; lin.out_dim * plane];
        for y in 0..f.height {
            for x in 0..f.width {
                let g = lin.apply(&f.site(x, y))?;
                for (k, v) in g.into_iter().enumerate() {
                    out[k * plane + y * f.width + x] = v;
                }
            }
        }
        // Non-finite parameters surface here as a FeatureMap validation error.
        FeatureMap::new(lin.out_dim, f.height, f.width, out)
    }
}

/// Logistic function kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0f64.next_down())
}

/// `A(x, y) = σ(mean_k t_m(F)(k, x, y))`.
pub fn mam_attention(f: &FeatureMap, t: &ModalityTransform, modality: Modality) -> Result<AttentionMap> {
    let g = t.transform(f, modality)?;
    let plane = g.height * g.width;
    let values = (0..plane)
        .map(|s| {
            let mean = (0..g.channels).map(|k| g.data[k * plane + s]).sum::<f64>() / g.channels as f64;
            sigmoid(mean)
        })
        .collect();
    AttentionMap::new(g.height, g.width, values)
}

/// Scales every channel of `f` by the attention weight of its site.
pub fn apply_attention(f: &FeatureMap, a: &AttentionMap) -> Result<FeatureMap> {
    if (f.height, f.width) != (a.height, a.width) {
        return Err(Error::shape(format!(
            "feature map is {}x{} but attention map is {}x{}",
            f.height, f.width, a.height, a.width
        )));
    }
    let plane = f.height * f.width;
    let data = f
        .data
        .iter()
        .enumerate()
        .map(|(i, v)| v * a.values[i % plane])
        .collect();
    FeatureMap::new(f.channels, f.height, f.width, data)
}

/// Splits `f` into `k` equal horizontal bands, top to bottom, and averages
/// each band per channel.
pub fn pcb_split_gap(f: &FeatureMap, k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 || !f.height.is_multiple_of(k) {
        return Err(Error::arg(format!(
            "feature height {} is not divisible into {k} parts",
            f.height
        )));
    }
    let band = f.height / k;
    let n = (band * f.width) as f64;
    Ok((0..k)
        .map(|part| {
            (0..f.channels)
                .map(|c| {
                    let start = (c * f.height + part * band) * f.width;
                    f.data[start..start + band * f.width].iter().sum::<f64>() / n
                })
                .collect()
        })
        .collect())
}

pub fn reduce_fc(v: &[f64], proj: &Linear) -> Result<Vec<f64>> {
    proj.apply(v)
}

/// Pooled part vectors and their projections.
#[derive(Debug, Clone, PartialEq)]
pub struct PartDescriptor {
    pub pooled: Vec<Vec<f64>>,
    pub reduced: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub attention: AttentionMap,
    pub parts: PartDescriptor,
    /// Channel-wise global average of the modality-transformed map.
    pub global: Vec<f64>,
}

/// Attention, attended-feature part pooling and projection, plus the global
/// vector of the transformed map. `projections` holds either one map shared
/// by all parts or one per part.
pub fn forward_pipeline(
    f: &FeatureMap,
    transforms: &ModalityTransform,
    modality: Modality,
    k: usize,
    projections: &[Linear],
) -> Result<PipelineOutput> {
    if projections.len() != 1 && projections.len() != k {
        return Err(Error::arg(format!(
            "expected 1 or {k} projections, got {}",
            projections.len()
        )));
    }
    let attention = mam_attention(f, transforms, modality)?;
    let attended = apply_attention(f, &attention)?;
    let pooled = pcb_split_gap(&attended, k)?;
    let reduced = pooled
        .iter()
        .enumerate()
        .map(|(i, v)| reduce_fc(v, &projections[if projections.len() == 1 { 0 } else { i }]))
        .collect::<Result<Vec<_>>>()?;
    let global = transforms.transform(f, modality)?.global_average();
    Ok(PipelineOutput {
        attention,
        parts: PartDescriptor { pooled, reduced },
        global,
    })
}
