use super::LossResult;
use crate::error::{Error, Result};

/// Mean softmax cross-entropy over rows of a row-major `N × classes` logit matrix.
///
/// The returned gradient is with respect to the logits: `(softmax − onehot) / N`.
pub fn softmax_ce(logits: &[f64], classes: usize, labels: &[usize]) -> Result<LossResult> {
    if classes == 0 || labels.is_empty() {
        return Err(Error::arg("softmax_ce needs at least one class and one sample"));
    }
    if logits.len() != labels.len() * classes {
        return Err(Error::shape(format!(
            "{} logits for {} samples x {classes} classes",
            logits.len(),
            labels.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("logits must be finite"));
    }

    let n = labels.len() as f64;
    let mut grad = vec![0.0; logits.len()];
    let mut value = 0.0;
    for (row, &label) in labels.iter().enumerate() {
        let z = &logits[row * classes..(row + 1) * classes];
        let shift = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = z.iter().map(|v| (v - shift).exp()).sum();
        let log_norm = shift + sum_exp.ln();
        value += log_norm - z[label];
        let g = &mut grad[row * classes..(row + 1) * classes];
        for (k, gk) in g.iter_mut().enumerate() {
            let p = (z[k] - log_norm).exp();
            *gk = (p - if k == label { 1.0 } else { 0.0 }) / n;
        }
    }
    Ok(LossResult {
        value: value / n,
        gradient: grad,
        dim: classes,
    })
}
