//! Center-based losses with gradients taken through the in-batch centers.
//!
//! Each sample term `D(f_i, c)` contributes `∂D/∂r` (with `r = f_i − c`) to its
//! own feature and `−∂D/∂r` to the center it is measured against. A center's
//! accumulated gradient is then spread evenly over the samples it averages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::batch::{compute_centers, Centers, ModalityBatch};
use super::LossResult;
use crate::error::Result;
use crate::image::Modality;

/// Distance used by the center losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterDistance {
    /// `‖f − c‖²`.
    #[default]
    Squared,
    /// `‖f − c‖`, with zero subgradient at coincidence.
    Euclidean,
}

impl CenterDistance {
    fn value_and_grad(self, r: &[f64]) -> (f64, Vec<f64>) {
        let sq: f64 = r.iter().map(|v| v * v).sum();
        match self {
            CenterDistance::Squared => (sq, r.iter().map(|v| 2.0 * v).collect()),
            CenterDistance::Euclidean => {
                let norm = sq.sqrt();
                if norm == 0.0 {
                    (0.0, vec![0.0; r.len()])
                } else {
                    (norm, r.iter().map(|v| v / norm).collect())
                }
            }
        }
    }
}

/// Which center of an identity a term refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    All,
    Of(Modality),
}

struct Engine<'a> {
    batch: &'a ModalityBatch,
    centers: Centers,
    grad: Vec<f64>,
    center_grad: BTreeMap<(u32, Slot), Vec<f64>>,
}

impl<'a> Engine<'a> {
    fn new(batch: &'a ModalityBatch) -> Self {
        Engine {
            batch,
            centers: compute_centers(batch),
            grad: vec![0.0; batch.values().len()],
            center_grad: BTreeMap::new(),
        }
    }

    fn center(&self, id: u32, slot: Slot) -> &[f64] {
        let c = self.centers.get(id).expect("identity present");
        match slot {
            Slot::All => &c.all,
            Slot::Of(m) => c.of(m).expect("modality checked"),
        }
    }

    fn add_center_grad(&mut self, id: u32, slot: Slot, g: &[f64], scale: f64) {
        let acc = self
            .center_grad
            .entry((id, slot))
            .or_insert_with(|| vec![0.0; g.len()]);
        for (a, v) in acc.iter_mut().zip(g) {
            *a += scale * v;
        }
    }

    /// Adds `weight · D(f_i, c)` and returns its value.
    fn sample_term(&mut self, i: usize, slot: Slot, weight: f64, dist: CenterDistance) -> f64 {
        let id = self.batch.identity(i);
        let r: Vec<f64> = self
            .batch
            .feature(i)
            .iter()
            .zip(self.center(id, slot))
            .map(|(f, c)| f - c)
            .collect();
        let (d, g) = dist.value_and_grad(&r);
        let dim = self.batch.dim();
        for (a, v) in self.grad[i * dim..(i + 1) * dim].iter_mut().zip(&g) {
            *a += weight * v;
        }
        self.add_center_grad(id, slot, &g, -weight);
        weight * d
    }

    /// Adds `weight · D(c_a, c_b)` and returns its value.
    fn center_term(&mut self, id: u32, a: Slot, b: Slot, weight: f64, dist: CenterDistance) -> f64 {
        let r: Vec<f64> = self
            .center(id, a)
            .iter()
            .zip(self.center(id, b))
            .map(|(x, y)| x - y)
            .collect();
        let (d, g) = dist.value_and_grad(&r);
        self.add_center_grad(id, a, &g, weight);
        self.add_center_grad(id, b, &g, -weight);
        weight * d
    }

    fn finish(mut self, value: f64) -> LossResult {
        let dim = self.batch.dim();
        for ((id, slot), g) in std::mem::take(&mut self.center_grad) {
            let modality = match slot {
                Slot::All => None,
                Slot::Of(m) => Some(m),
            };
            let members = self.batch.members(id, modality);
            let share = 1.0 / members.len() as f64;
            for i in members {
                for (a, v) in self.grad[i * dim..(i + 1) * dim].iter_mut().zip(&g) {
                    *a += share * v;
                }
            }
        }
        LossResult {
            value,
            gradient: self.grad,
            dim,
        }
    }
}

/// `½ Σ_i D(f_i, c_{y_i})` with `c_y` the in-batch identity mean.
pub fn center_loss(batch: &ModalityBatch) -> LossResult {
    center_loss_with(batch, CenterDistance::Squared)
}

pub fn center_loss_with(batch: &ModalityBatch, dist: CenterDistance) -> LossResult {
    let mut e = Engine::new(batch);
    let mut value = 0.0;
    for i in 0..batch.len() {
        value += e.sample_term(i, Slot::All, 0.5, dist);
    }
    e.finish(value)
}

/// `½ (Σ_{VIS} D(f_i, c^n_{y_i}) + Σ_{NIR} D(f_i, c^v_{y_i}))`: every sample is
/// pulled toward the opposite modality's center of its identity.
pub fn cross_center_loss(batch: &ModalityBatch) -> Result<LossResult> {
    cross_center_loss_with(batch, CenterDistance::Squared)
}

pub fn cross_center_loss_with(batch: &ModalityBatch, dist: CenterDistance) -> Result<LossResult> {
    batch.require_both_modalities()?;
    let mut e = Engine::new(batch);
    let mut value = 0.0;
    for i in 0..batch.len() {
        value += e.sample_term(i, Slot::Of(batch.modality(i).other()), 0.5, dist);
    }
    Ok(e.finish(value))
}

/// `(1/N) Σ_y D(c^v_y, c^n_y)`, the batch-size-normalized hetero-center loss.
pub fn hetero_center_loss(batch: &ModalityBatch) -> Result<LossResult> {
    hetero_center_loss_with(batch, CenterDistance::Squared)
}

pub fn hetero_center_loss_with(batch: &ModalityBatch, dist: CenterDistance) -> Result<LossResult> {
    batch.require_both_modalities()?;
    let mut e = Engine::new(batch);
    let weight = 1.0 / batch.len() as f64;
    let mut value = 0.0;
    for id in batch.distinct_identities() {
        value += e.center_term(id, Slot::Of(Modality::Vis), Slot::Of(Modality::Nir), weight, dist);
    }
    Ok(e.finish(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn batch(rows: &[(&[f64], u32, Modality)]) -> ModalityBatch {
        ModalityBatch::new(
            rows[0].0.len(),
            rows.iter().flat_map(|r| r.0.iter().copied()).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
        )
        .unwrap()
    }

    fn square() -> ModalityBatch {
        batch(&[
            (&[0.0, 0.0], 0, Modality::Vis),
            (&[2.0, 0.0], 0, Modality::Vis),
            (&[0.0, 2.0], 0, Modality::Nir),
            (&[2.0, 2.0], 0, Modality::Nir),
        ])
    }

    #[test]
    fn center_loss_two_points() {
        let b = batch(&[(&[0.0, 0.0], 0, Modality::Vis), (&[2.0, 0.0], 0, Modality::Nir)]);
        let l = center_loss(&b);
        assert_eq!(l.value, 1.0);
        assert_eq!(l.gradient, vec![-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn center_loss_singletons_are_zero() {
        let b = batch(&[(&[3.0, 1.0], 0, Modality::Vis), (&[5.0, 2.0], 1, Modality::Nir)]);
        assert_eq!(center_loss(&b).value, 0.0);
    }

    #[test]
    fn cross_center_hand_example() {
        let l = cross_center_loss(&square()).unwrap();
        assert_eq!(l.value, 10.0);
        // Direct term plus the pull through the opposite center: (f − c^n) + (c^v − c^n).
        assert_eq!(l.grad(0), &[-1.0, -4.0]);
        assert_eq!(l.grad(3), &[1.0, 4.0]);
    }

    #[test]
    fn hetero_center_hand_example() {
        let l = hetero_center_loss(&square()).unwrap();
        assert_eq!(l.value, 1.0);
        // ∂/∂f_vis = (2/N)(c^v − c^n)/n_v = (2/4)(0, −2)/2.
        assert_eq!(l.grad(0), &[0.0, -0.5]);
        assert_eq!(l.grad(2), &[0.0, 0.5]);
    }

    #[test]
    fn identical_modalities_collapsed_to_a_point_give_zero() {
        let b = batch(&[
            (&[1.0, 1.0], 0, Modality::Vis),
            (&[1.0, 1.0], 0, Modality::Nir),
            (&[4.0, 0.0], 1, Modality::Vis),
            (&[4.0, 0.0], 1, Modality::Nir),
        ]);
        assert_eq!(cross_center_loss(&b).unwrap().value, 0.0);
        assert_eq!(hetero_center_loss(&b).unwrap().value, 0.0);
        assert_eq!(center_loss(&b).value, 0.0);
    }

    #[test]
    fn modality_losses_require_both_modalities() {
        let b = batch(&[(&[0.0], 0, Modality::Vis), (&[1.0], 0, Modality::Vis)]);
        assert!(matches!(cross_center_loss(&b), Err(Error::MissingModality { .. })));
        assert!(matches!(hetero_center_loss(&b), Err(Error::MissingModality { .. })));
        assert_eq!(center_loss(&b).value, 0.25);
    }

    #[test]
    fn euclidean_variant_hand_values() {
        let b = square();
        // Each sample sits at distance √5 from the opposite center.
        let l = cross_center_loss_with(&b, CenterDistance::Euclidean).unwrap();
        assert!((l.value - 2.0 * 5f64.sqrt()).abs() < 1e-12);
        let l = hetero_center_loss_with(&b, CenterDistance::Euclidean).unwrap();
        assert!((l.value - 0.5).abs() < 1e-15);
    }
}
