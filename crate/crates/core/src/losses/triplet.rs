use super::batch::{euclidean, ModalityBatch};
use super::LossResult;
use crate::error::{Error, Result};

/// Default triplet margin.
pub const DEFAULT_MARGIN: f64 = 0.3;

/// The hardest positive and negative chosen for one anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardTriplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    pub positive_distance: f64,
    pub negative_distance: f64,
}

fn check(batch: &ModalityBatch) -> Result<()> {
    let ids = batch.distinct_identities();
    if ids.len() < 2 {
        return Err(Error::arg("batch-hard triplet needs at least two identities"));
    }
    for id in ids {
        if batch.members(id, None).len() < 2 {
            return Err(Error::arg(format!(
                "identity {id} has fewer than two samples"
            )));
        }
    }
    Ok(())
}

/// Farthest same-identity and nearest other-identity sample per anchor, by
/// Euclidean distance. Ties go to the lowest sample index.
pub fn mine_hard_triplets(batch: &ModalityBatch) -> Result<Vec<HardTriplet>> {
    check(batch)?;
    let n = batch.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(batch.feature(i), batch.feature(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok((0..n)
        .map(|a| {
            let mut pos: Option<(usize, f64)> = None;
            let mut neg: Option<(usize, f64)> = None;
            for j in 0..n {
                if j == a {
                    continue;
                }
                let d = dist[a * n + j];
                if batch.identity(j) == batch.identity(a) {
                    if pos.is_none_or(|(_, best)| d > best) {
                        pos = Some((j, d));
                    }
                } else if neg.is_none_or(|(_, best)| d < best) {
                    neg = Some((j, d));
                }
            }
            let (positive, positive_distance) = pos.expect("identity has two samples");
            let (negative, negative_distance) = neg.expect("two identities present");
            HardTriplet {
                anchor: a,
                positive,
                negative,
                positive_distance,
                negative_distance,
            }
        })
        .collect())
}

fn add_unit(grad: &mut [f64], dim: usize, target: usize, a: &[f64], b: &[f64], d: f64, scale: f64) {
    if d == 0.0 {
        return;
    }
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        grad[target * dim + k] += scale * (x - y) / d;
    }
}

/// `(1/N) Σ_a max(0, margin + d(a, p*) − d(a, n*))` over batch-hard triplets.
pub fn triplet_batch_hard(batch: &ModalityBatch, margin: f64) -> Result<LossResult> {
    if !margin.is_finite() || margin < 0.0 {
        return Err(Error::arg(format!("margin must be non-negative, got {margin}")));
    }
    let triplets = mine_hard_triplets(batch)?;
    let n = batch.len() as f64;
    let dim = batch.dim();
    let mut grad = vec![0.0; batch.values().len()];
    let mut value = 0.0;
    for t in &triplets {
        let hinge = margin + t.positive_distance - t.negative_distance;
        if hinge <= 0.0 {
            continue;
        }
        value += hinge;
        let (fa, fp, fn_) = (
            batch.feature(t.anchor),
            batch.feature(t.positive),
            batch.feature(t.negative),
        );
        let s = 1.0 / n;
        add_unit(&mut grad, dim, t.anchor, fa, fp, t.positive_distance, s);
        add_unit(&mut grad, dim, t.positive, fa, fp, t.positive_distance, -s);
        add_unit(&mut grad, dim, t.anchor, fa, fn_, t.negative_distance, -s);
        add_unit(&mut grad, dim, t.negative, fa, fn_, t.negative_distance, s);
    }
    Ok(LossResult {
        value: value / n,
        gradient: grad,
        dim,
    })
}
