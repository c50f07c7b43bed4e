//! Metric-learning losses over labeled VIS/NIR feature batches.
//!
//! Every loss returns a [`LossResult`] carrying its value and the gradient with
//! respect to each sample's feature (or each logit, for [`softmax_ce`]).

mod batch;
mod center;
mod descent;
mod softmax;
mod triplet;

pub use batch::{compute_centers, Centers, IdentityCenters, ModalityBatch};
pub use center::{
    center_loss, center_loss_with, cross_center_loss, cross_center_loss_with,
    hetero_center_loss, hetero_center_loss_with, CenterDistance,
};
pub use descent::{
    descent_smoke, DescentObjective, DescentStep, DescentTrajectory, DIVERGENCE_PATIENCE,
};
pub use softmax::softmax_ce;
pub use triplet::{mine_hard_triplets, triplet_batch_hard, HardTriplet, DEFAULT_MARGIN};

use crate::error::{Error, Result};

/// Default weight of the cross-center term in [`classifier_loss`].
pub const DEFAULT_LAMBDA: f64 = 3.0;

/// Default number of horizontal parts.
pub const DEFAULT_PARTS: usize = 12;

/// A loss value and its gradient, row-major with `dim` entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub dim: usize,
}

impl LossResult {
    /// Gradient row of sample `i`.
    pub fn grad(&self, i: usize) -> &[f64] {
        &self.gradient[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-classifier objective: identity + triplet + `λ` · cross-center.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierLoss {
    pub value: f64,
    pub identity: f64,
    pub triplet: f64,
    pub cross_center: f64,
    pub lambda: f64,
    /// Gradient with respect to the batch features (triplet + `λ` · cross-center).
    pub feature_gradient: Vec<f64>,
    /// Gradient with respect to the logits (identity term).
    pub logit_gradient: Vec<f64>,
}

pub fn classifier_loss(
    batch: &ModalityBatch,
    logits: &[f64],
    classes: usize,
    labels: &[usize],
    lambda: f64,
    margin: f64,
) -> Result<ClassifierLoss> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!("lambda must be non-negative, got {lambda}")));
    }
    if labels.len() != batch.len() {
        return Err(Error::shape(format!(
            "{} labels for a batch of {}",
            labels.len(),
            batch.len()
        )));
    }
    let id = softmax_ce(logits, classes, labels)?;
    let tri = triplet_batch_hard(batch, margin)?;
    let cc = cross_center_loss(batch)?;
    let feature_gradient = tri
        .gradient
        .iter()
        .zip(&cc.gradient)
        .map(|(t, c)| t + lambda * c)
        .collect();
    Ok(ClassifierLoss {
        value: id.value + tri.value + lambda * cc.value,
        identity: id.value,
        triplet: tri.value,
        cross_center: cc.value,
        lambda,
        feature_gradient,
        logit_gradient: id.gradient,
    })
}

/// Sum of the two modality identity losses and every part's classifier loss.
pub fn total_loss(part_losses: &[f64], identity_vis: f64, identity_nir: f64) -> Result<f64> {
    if part_losses.is_empty() {
        return Err(Error::arg("at least one part loss is required"));
    }
    Ok(identity_vis + identity_nir + part_losses.iter().sum::<f64>())
}
