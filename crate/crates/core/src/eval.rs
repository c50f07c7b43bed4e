//! CMC and mean average precision for query/gallery feature sets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::LabeledFeature;

/// Query and gallery features compared by Euclidean distance.
#[derive(Debug, Clone)]
pub struct RetrievalSet {
    query: Vec<LabeledFeature>,
    gallery: Vec<LabeledFeature>,
}

impl RetrievalSet {
    /// Fails when either side is empty, dimensions differ, or some query
    /// identity has no gallery entry.
    pub fn new(query: Vec<LabeledFeature>, gallery: Vec<LabeledFeature>) -> Result<Self> {
        if query.is_empty() || gallery.is_empty() {
            return Err(Error::arg("query and gallery must both be non-empty"));
        }
        let dim = query[0].feature.dim();
        if let Some(f) = query.iter().chain(&gallery).find(|f| f.feature.dim() != dim) {
            return Err(Error::shape(format!(
                "feature of identity {} has dimension {}, expected {dim}",
                f.identity,
                f.feature.dim()
            )));
        }
        if let Some(q) = query
            .iter()
            .find(|q| !gallery.iter().any(|g| g.identity == q.identity))
        {
            return Err(Error::Protocol(format!(
                "query identity {} does not appear in the gallery",
                q.identity
            )));
        }
        Ok(RetrievalSet { query, gallery })
    }

    pub fn query(&self) -> &[LabeledFeature] {
        &self.query
    }

    pub fn gallery(&self) -> &[LabeledFeature] {
        &self.gallery
    }

    /// Gallery indices ordered by ascending distance to query `q`, ties by index.
    pub fn ranking(&self, q: usize) -> Vec<usize> {
        let qf = &self.query[q].feature;
        let dist: Vec<f64> = self
            .gallery
            .iter()
            .map(|g| {
                qf.iter()
                    .zip(g.feature.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let mut order: Vec<usize> = (0..self.gallery.len()).collect();
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        order
    }

    /// 0-based positions of same-identity gallery items in query `q`'s ranking.
    fn hit_positions(&self, q: usize) -> Vec<usize> {
        let id = self.query[q].identity;
        self.ranking(q)
            .into_iter()
            .enumerate()
            .filter(|&(_, g)| self.gallery[g].identity == id)
            .map(|(pos, _)| pos)
            .collect()
    }
}

/// Rank-k accuracies for k = 1..=max_rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CmcCurve {
    values: Vec<f64>,
}

impl CmcCurve {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_rank(&self) -> usize {
        self.values.len()
    }

    /// Accuracy at 1-based rank `k`.
    pub fn rank(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }
}

pub fn cmc(set: &RetrievalSet, max_rank: usize) -> Result<CmcCurve> {
    if max_rank == 0 || max_rank > set.gallery.len() {
        return Err(Error::arg(format!(
            "max rank must lie in 1..={}, got {max_rank}",
            set.gallery.len()
        )));
    }
    let first_hits: Vec<usize> = (0..set.query.len())
        .into_par_iter()
        .map(|q| set.hit_positions(q)[0])
        .collect();
    let mut counts = vec![0usize; max_rank];
    for &p in &first_hits {
        for c in counts.iter_mut().skip(p) {
            *c += 1;
        }
    }
    let n = set.query.len() as f64;
    Ok(CmcCurve {
        values: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Non-interpolated average precision of each query.
pub fn average_precisions(set: &RetrievalSet) -> Vec<f64> {
    (0..set.query.len())
        .into_par_iter()
        .map(|q| {
            let hits = set.hit_positions(q);
            hits.iter()
                .enumerate()
                .map(|(i, &pos)| (i + 1) as f64 / (pos + 1) as f64)
                .sum::<f64>()
                / hits.len() as f64
        })
        .collect()
}

pub fn mean_ap(set: &RetrievalSet) -> f64 {
    let aps = average_precisions(set);
    aps.iter().sum::<f64>() / aps.len() as f64
}
