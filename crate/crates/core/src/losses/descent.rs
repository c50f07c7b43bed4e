//! Plain gradient descent on batch features under a center-type loss.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::batch::{compute_centers, ModalityBatch};
use super::center::{center_loss, cross_center_loss, hetero_center_loss};
use super::LossResult;
use crate::error::{Error, Result};

/// Consecutive objective increases that mark a run as diverged.
pub const DIVERGENCE_PATIENCE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentObjective {
    Center,
    CrossCenter,
    HeteroCenter,
}

impl DescentObjective {
    pub fn evaluate(self, batch: &ModalityBatch) -> Result<LossResult> {
        match self {
            DescentObjective::Center => Ok(center_loss(batch)),
            DescentObjective::CrossCenter => cross_center_loss(batch),
            DescentObjective::HeteroCenter => hetero_center_loss(batch),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            DescentObjective::Center => "center",
            DescentObjective::CrossCenter => "cross-center",
            DescentObjective::HeteroCenter => "hetero-center",
        }
    }
}

impl fmt::Display for DescentObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DescentObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "center" => Ok(DescentObjective::Center),
            "cross-center" | "cross_center" | "cc" => Ok(DescentObjective::CrossCenter),
            "hetero-center" | "hetero_center" | "hc" => Ok(DescentObjective::HeteroCenter),
            other => Err(Error::arg(format!(
                "unknown objective `{other}` (center | cross-center | hetero-center)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentStep {
    pub step: usize,
    /// Value of the optimized objective.
    pub objective: f64,
    /// Cross-center loss of the same features, whatever the objective.
    pub cross_center: f64,
    /// Mean over identities of `‖c_v − c_n‖`.
    pub modality_gap: f64,
}

#[derive(Debug, Clone)]
pub struct DescentTrajectory {
    pub objective: DescentObjective,
    pub lr: f64,
    /// Step 0 is the starting batch.
    pub steps: Vec<DescentStep>,
    pub diverged: bool,
    pub final_batch: ModalityBatch,
}

fn record(step: usize, objective: f64, batch: &ModalityBatch) -> Result<DescentStep> {
    Ok(DescentStep {
        step,
        objective,
        cross_center: cross_center_loss(batch)?.value,
        modality_gap: compute_centers(batch).mean_modality_gap(),
    })
}

/// Runs `steps` updates `f ← f − lr ∇L(f)`. Stops early and sets `diverged`
/// after [`DIVERGENCE_PATIENCE`] consecutive increases or a non-finite value.
pub fn descent_smoke(
    batch: &ModalityBatch,
    objective: DescentObjective,
    steps: usize,
    lr: f64,
) -> Result<DescentTrajectory> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::arg(format!("learning rate must be positive, got {lr}")));
    }
    batch.require_both_modalities()?;

    let mut current = batch.clone();
    let mut loss = objective.evaluate(&current)?;
    let mut out = vec![record(0, loss.value, &current)?];
    let mut increases = 0;
    let mut diverged = false;

    for step in 1..=steps {
        let next: Vec<f64> = current
            .values()
            .iter()
            .zip(&loss.gradient)
            .map(|(f, g)| f - lr * g)
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
        current = current.with_values(next)?;
        let prev = loss.value;
        loss = objective.evaluate(&current)?;
        out.push(record(step, loss.value, &current)?);
        increases = if loss.value > prev { increases + 1 } else { 0 };
        if increases >= DIVERGENCE_PATIENCE || !loss.value.is_finite() {
            diverged = true;
            break;
        }
    }

    Ok(DescentTrajectory {
        objective,
        lr,
        steps: out,
        diverged,
        final_batch: current,
    })
}
