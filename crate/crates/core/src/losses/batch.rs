use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::image::{LabeledFeature, Modality};
use crate::rng::Rng;

/// `N` labeled features of a common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityBatch {
    dim: usize,
    values: Vec<f64>,
    identities: Vec<u32>,
    modalities: Vec<Modality>,
}

impl ModalityBatch {
    pub fn new(
        dim: usize,
        values: Vec<f64>,
        identities: Vec<u32>,
        modalities: Vec<Modality>,
    ) -> Result<Self> {
        let n = identities.len();
        if n == 0 {
            return Err(Error::arg("batch must contain at least one sample"));
        }
        if dim == 0 {
            return Err(Error::arg("feature dimension must be at least 1"));
        }
        if modalities.len() != n || values.len() != n * dim {
            return Err(Error::shape(format!(
                "{} values, {} ids and {} modalities for dimension {dim}",
                values.len(),
                n,
                modalities.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!(
                "feature value of sample {} is not finite",
                i / dim
            )));
        }
        Ok(ModalityBatch {
            dim,
            values,
            identities,
            modalities,
        })
    }

    pub fn from_samples(samples: &[LabeledFeature]) -> Result<Self> {
        let dim = samples
            .first()
            .ok_or_else(|| Error::arg("batch must contain at least one sample"))?
            .feature
            .dim();
        let mut values = Vec::with_capacity(samples.len() * dim);
        for s in samples {
            if s.feature.dim() != dim {
                return Err(Error::shape(format!(
                    "feature dimension {} differs from {dim}",
                    s.feature.dim()
                )));
            }
            values.extend_from_slice(&s.feature);
        }
        Self::new(
            dim,
            values,
            samples.iter().map(|s| s.identity).collect(),
            samples.iter().map(|s| s.modality).collect(),
        )
    }

    /// Same labels, new feature values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.dim,
            values,
            self.identities.clone(),
            self.modalities.clone(),
        )
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn identity(&self, i: usize) -> u32 {
        self.identities[i]
    }

    pub fn identities(&self) -> &[u32] {
        &self.identities
    }

    pub fn modality(&self, i: usize) -> Modality {
        self.modalities[i]
    }

    pub fn modalities(&self) -> &[Modality] {
        &self.modalities
    }

    pub fn count(&self, modality: Modality) -> usize {
        self.modalities.iter().filter(|&&m| m == modality).count()
    }

    /// Distinct identities in ascending order.
    pub fn distinct_identities(&self) -> Vec<u32> {
        let mut ids = self.identities.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Sample indices of `identity`, optionally restricted to one modality.
    pub fn members(&self, identity: u32, modality: Option<Modality>) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                self.identities[i] == identity && modality.is_none_or(|m| self.modalities[i] == m)
            })
            .collect()
    }

    /// Fails unless every identity has at least one sample of each modality.
    pub fn require_both_modalities(&self) -> Result<()> {
        for id in self.distinct_identities() {
            for m in [Modality::Vis, Modality::Nir] {
                if self.members(id, Some(m)).is_empty() {
                    return Err(Error::MissingModality {
                        identity: id,
                        modality: m,
                    });
                }
            }
        }
        Ok(())
    }

    /// Random batch where each identity has a base point and the two
    /// modalities are offset from it in opposite directions by `separation / 2`
    /// along a random unit vector. Both modalities get isotropic Gaussian
    /// spread `spread`.
    pub fn synthetic(
        rng: &mut Rng,
        identities: usize,
        per_modality: usize,
        dim: usize,
        separation: f64,
        spread: f64,
    ) -> Result<Self> {
        if identities == 0 || per_modality == 0 || dim == 0 {
            return Err(Error::arg("synthetic batch sizes must be positive"));
        }
        let mut values = Vec::new();
        let mut ids = Vec::new();
        let mut mods = Vec::new();
        for id in 0..identities as u32 {
            let base: Vec<f64> = (0..dim).map(|_| 4.0 * rng.normal()).collect();
            let mut dir: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            dir.iter_mut().for_each(|v| *v /= norm);
            for m in [Modality::Vis, Modality::Nir] {
                let sign = if m == Modality::Vis { 0.5 } else { -0.5 };
                for _ in 0..per_modality {
                    values.extend(
                        base.iter()
                            .zip(&dir)
                            .map(|(b, d)| b + sign * separation * d + spread * rng.normal()),
                    );
                    ids.push(id);
                    mods.push(m);
                }
            }
        }
        Self::new(dim, values, ids, mods)
    }
}

/// In-batch means for one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCenters {
    pub all: Vec<f64>,
    pub vis: Option<Vec<f64>>,
    pub nir: Option<Vec<f64>>,
    pub n_vis: usize,
    pub n_nir: usize,
}

impl IdentityCenters {
    pub fn of(&self, modality: Modality) -> Option<&[f64]> {
        match modality {
            Modality::Vis => self.vis.as_deref(),
            Modality::Nir => self.nir.as_deref(),
        }
    }
}

/// Per-identity centers, ascending by identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Centers(pub BTreeMap<u32, IdentityCenters>);

impl Centers {
    pub fn get(&self, identity: u32) -> Option<&IdentityCenters> {
        self.0.get(&identity)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u32, &IdentityCenters)> {
        self.0.iter()
    }

    /// Mean over identities of `‖c_v − c_n‖`; identities lacking a modality are skipped.
    pub fn mean_modality_gap(&self) -> f64 {
        let gaps: Vec<f64> = self
            .0
            .values()
            .filter_map(|c| Some(euclidean(c.vis.as_deref()?, c.nir.as_deref()?)))
            .collect();
        if gaps.is_empty() {
            0.0
        } else {
            gaps.iter().sum::<f64>() / gaps.len() as f64
        }
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn mean_of(batch: &ModalityBatch, idx: &[usize]) -> Option<Vec<f64>> {
    if idx.is_empty() {
        return None;
    }
    // Mean of offsets from the first member, so coincident samples give
    // their common point exactly.
    let origin = batch.feature(idx[0]);
    let mut acc = vec![0.0; batch.dim()];
    for &i in &idx[1..] {
        for ((a, v), o) in acc.iter_mut().zip(batch.feature(i)).zip(origin) {
            *a += v - o;
        }
    }
    let n = idx.len() as f64;
    Some(acc.iter().zip(origin).map(|(a, o)| o + a / n).collect())
}

/// Arithmetic means per identity and per identity-modality pair.
pub fn compute_centers(batch: &ModalityBatch) -> Centers {
    let mut out = BTreeMap::new();
    for id in batch.distinct_identities() {
        let all = batch.members(id, None);
        let vis = batch.members(id, Some(Modality::Vis));
        let nir = batch.members(id, Some(Modality::Nir));
        out.insert(
            id,
            IdentityCenters {
                all: mean_of(batch, &all).expect("identity has samples"),
                vis: mean_of(batch, &vis),
                nir: mean_of(batch, &nir),
                n_vis: vis.len(),
                n_nir: nir.len(),
            },
        );
    }
    Centers(out)
}
