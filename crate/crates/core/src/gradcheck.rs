//! Finite-difference checks of the analytic loss gradients, plus the loss
//! invariants, packaged as a serializable report.

use serde::Serialize;

use crate::error::Result;
use crate::losses::{
    center_loss, cross_center_loss, hetero_center_loss, softmax_ce, triplet_batch_hard,
    LossResult, ModalityBatch,
};
use crate::rng::Rng;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Largest accepted relative error between analytic and numeric gradients.
pub const GRAD_TOLERANCE: f64 = 1e-6;
/// Minimum distance from any kink or tie for a triplet batch to be checked.
pub const TRIPLET_CLEARANCE: f64 = 1e-3;

/// Numeric gradient of `f` at `x` by central differences with step `h`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, taken as 0 when both are zero.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

type BatchLoss = fn(&ModalityBatch) -> Result<LossResult>;

/// Relative error between the analytic feature gradient of `loss` and its
/// central-difference estimate on `batch`.
pub fn feature_gradient_error(batch: &ModalityBatch, loss: impl Fn(&ModalityBatch) -> Result<LossResult>) -> Result<f64> {
    let analytic = loss(batch)?.gradient;
    let numeric = central_difference(
        |x| {
            let b = batch.with_values(x.to_vec()).expect("same shape");
            loss(&b).expect("valid batch").value
        },
        batch.values(),
        FD_STEP,
    );
    Ok(relative_error(&analytic, &numeric))
}

/// True when no hinge, hardest-pair choice, or distance is within
/// `clearance` of a point where the triplet loss is not differentiable.
pub fn triplet_is_smooth(batch: &ModalityBatch, margin: f64, clearance: f64) -> bool {
    let n = batch.len();
    let d = |i: usize, j: usize| {
        batch
            .feature(i)
            .iter()
            .zip(batch.feature(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    for a in 0..n {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for j in (0..n).filter(|&j| j != a) {
            let dj = d(a, j);
            if dj < clearance {
                return false;
            }
            if batch.identity(j) == batch.identity(a) {
                pos.push(dj);
            } else {
                neg.push(dj);
            }
        }
        pos.sort_by(|x, y| y.total_cmp(x));
        neg.sort_by(|x, y| x.total_cmp(y));
        if pos.len() > 1 && pos[0] - pos[1] < clearance {
            return false;
        }
        if neg.len() > 1 && neg[1] - neg[0] < clearance {
            return false;
        }
        if (margin + pos[0] - neg[0]).abs() < clearance {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    pub loss: String,
    pub trials: usize,
    /// Batches redrawn because they fell too close to a kink.
    pub resampled: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LossCheckReport {
    pub seed: u64,
    pub trials: usize,
    pub gradients: Vec<GradientCheck>,
    pub invariants: Vec<InvariantCheck>,
    pub passed: bool,
}

/// Batch shape used by the checks: 3 identities, 4 VIS + 4 NIR each, d = 8.
pub fn check_batch(rng: &mut Rng) -> Result<ModalityBatch> {
    ModalityBatch::synthetic(rng, 3, 4, 8, 3.0, 1.0)
}

fn gradient_check(name: &str, trials: usize, errors: Vec<f64>, resampled: usize) -> GradientCheck {
    let max = errors.iter().copied().fold(0.0, f64::max);
    GradientCheck {
        loss: name.to_string(),
        trials,
        resampled,
        max_relative_error: max,
        tolerance: GRAD_TOLERANCE,
        passed: errors.len() == trials && max < GRAD_TOLERANCE,
    }
}

fn invariant(name: &str, deviations: impl IntoIterator<Item = f64>, tolerance: f64) -> InvariantCheck {
    let max = deviations.into_iter().fold(0.0, f64::max);
    InvariantCheck {
        name: name.to_string(),
        max_deviation: max,
        tolerance,
        passed: max <= tolerance,
    }
}

fn center_losses() -> [(&'static str, BatchLoss); 3] {
    [
        ("center", |b| Ok(center_loss(b))),
        ("cross-center", cross_center_loss),
        ("hetero-center", hetero_center_loss),
    ]
}

/// Reverses sample order.
fn reversed(batch: &ModalityBatch) -> Result<ModalityBatch> {
    let order: Vec<usize> = (0..batch.len()).rev().collect();
    ModalityBatch::new(
        batch.dim(),
        order.iter().flat_map(|&i| batch.feature(i).iter().copied()).collect(),
        order.iter().map(|&i| batch.identity(i)).collect(),
        order.iter().map(|&i| batch.modality(i)).collect(),
    )
}

/// Sets every sample of `identity` to the same point.
fn collapse(batch: &ModalityBatch, identity: u32) -> Result<ModalityBatch> {
    let first = batch.members(identity, None)[0];
    let point = batch.feature(first).to_vec();
    let dim = batch.dim();
    let mut values = batch.values().to_vec();
    for i in batch.members(identity, None) {
        values[i * dim..(i + 1) * dim].copy_from_slice(&point);
    }
    batch.with_values(values)
}

/// Runs `trials` randomized gradient checks per loss and the invariant checks.
pub fn run_loss_checks(seed: u64, trials: usize) -> Result<LossCheckReport> {
    let mut gradients = Vec::new();

    for (stream, (name, loss)) in center_losses().into_iter().enumerate() {
        let mut rng = Rng::new(seed, stream as u64);
        let mut errors = Vec::with_capacity(trials);
        for _ in 0..trials {
            errors.push(feature_gradient_error(&check_batch(&mut rng)?, loss)?);
        }
        gradients.push(gradient_check(name, trials, errors, 0));
    }

    {
        let mut rng = Rng::new(seed, 3);
        let (n, classes) = (24, 6);
        let mut errors = Vec::with_capacity(trials);
        for _ in 0..trials {
            let logits: Vec<f64> = (0..n * classes).map(|_| 3.0 * rng.normal()).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
            let analytic = softmax_ce(&logits, classes, &labels)?.gradient;
            let numeric = central_difference(
                |z| softmax_ce(z, classes, &labels).expect("valid logits").value,
                &logits,
                FD_STEP,
            );
            errors.push(relative_error(&analytic, &numeric));
        }
        gradients.push(gradient_check("softmax-ce", trials, errors, 0));
    }

    {
        let mut rng = Rng::new(seed, 4);
        let mut errors = Vec::with_capacity(trials);
        let mut resampled = 0;
        // Bounded so a pathological seed cannot loop forever.
        while errors.len() < trials && resampled < 1000 * trials.max(1) {
            let batch = check_batch(&mut rng)?;
            let margin = rng.uniform(0.3, 6.0)?;
            if !triplet_is_smooth(&batch, margin, TRIPLET_CLEARANCE) {
                resampled += 1;
                continue;
            }
            errors.push(feature_gradient_error(&batch, |b| triplet_batch_hard(b, margin))?);
        }
        gradients.push(gradient_check("triplet", trials, errors, resampled));
    }

    let mut rng = Rng::new(seed, 5);
    let batches = (0..trials.max(1))
        .map(|_| check_batch(&mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut invariants = Vec::new();
    for (name, loss) in center_losses() {
        let mut translation = Vec::new();
        let mut scale = Vec::new();
        let mut permutation = Vec::new();
        let mut collapsed = Vec::new();
        for (t, batch) in batches.iter().enumerate() {
            let base = loss(batch)?.value;
            let shift: Vec<f64> = (0..batch.dim()).map(|k| (k as f64 - 3.5) * (t as f64 + 1.0)).collect();
            let moved: Vec<f64> = batch
                .values()
                .chunks(batch.dim())
                .flat_map(|f| f.iter().zip(&shift).map(|(a, s)| a + s).collect::<Vec<_>>())
                .collect();
            let moved = loss(&batch.with_values(moved)?)?.value;
            translation.push((moved - base).abs() / base.max(1.0));
            for s in [2.0, 0.5] {
                let scaled: Vec<f64> = batch.values().iter().map(|v| v * s).collect();
                let scaled = loss(&batch.with_values(scaled)?)?.value;
                scale.push((scaled - s * s * base).abs());
            }
            permutation.push((loss(&reversed(batch)?)?.value - base).abs() / base.max(1.0));
            let mut all = batch.clone();
            for id in batch.distinct_identities() {
                all = collapse(&all, id)?;
            }
            collapsed.push(loss(&all)?.value.abs());
        }
        invariants.push(invariant(&format!("{name}/translation"), translation, 1e-9));
        invariants.push(invariant(&format!("{name}/scale"), scale, 0.0));
        invariants.push(invariant(&format!("{name}/permutation"), permutation, 1e-12));
        invariants.push(invariant(&format!("{name}/collapse"), collapsed, 0.0));
    }

    let passed = gradients.iter().all(|g| g.passed) && invariants.iter().all(|i| i.passed);
    Ok(LossCheckReport {
        seed,
        trials,
        gradients,
        invariants,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_difference_of_cubic() {
        let g = central_difference(|x| x[0].powi(3) + 2.0 * x[1], &[1.0, 5.0], 1e-4);
        assert!((g[0] - 3.0).abs() < 1e-7);
        assert!((g[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(relative_error(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((relative_error(&[3.0, 4.0], &[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_report_passes() {
        let r = run_loss_checks(11, 5).unwrap();
        assert!(r.passed, "{r:#?}");
        assert_eq!(r.gradients.len(), 5);
    }
}
