//! Least-squares adversarial losses and the auxiliary cross-entropy.
//!
//! Each loss returns its value together with the gradient with respect to its
//! network-output argument(s).

use super::real::{r, Real};
use super::GanError;

/// `0.5 * mean((real - t_real)^2) + 0.5 * mean((fake - t_fake)^2)`.
pub fn ls_loss_discriminator<T: Real>(adv_real: &[T], adv_fake: &[T], t_real: f64, t_fake: f64) -> f64 {
    half_mse(adv_real, t_real) + half_mse(adv_fake, t_fake)
}

/// `0.5 * mean((fake - t_real)^2)`.
pub fn ls_loss_generator<T: Real>(adv_fake: &[T], t_real: f64) -> f64 {
    half_mse(adv_fake, t_real)
}

fn half_mse<T: Real>(v: &[T], target: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    0.5 * v.iter().map(|&a| (a.to_f64() - target).powi(2)).sum::<f64>() / v.len() as f64
}

/// Gradient of `0.5 * mean((v - target)^2)` with respect to `v`.
pub fn half_mse_grad<T: Real>(v: &[T], target: f64) -> Vec<T> {
    let n = r::<T>(v.len() as f64);
    let t = r::<T>(target);
    v.iter().map(|&a| (a - t) / n).collect()
}

/// Mean over the batch of `-log softmax(logits)[label]`.
pub fn ce_loss<T: Real>(logits: &[T], labels: &[usize], n_classes: usize) -> Result<f64, GanError> {
    Ok(ce_loss_with_grad(logits, labels, n_classes)?.0)
}

pub fn ce_loss_with_grad<T: Real>(logits: &[T], labels: &[usize], n_classes: usize) -> Result<(f64, Vec<T>), GanError> {
    if n_classes < 2 {
        return Err(GanError::Config(format!(
            "cross-entropy needs at least 2 classes, got {n_classes}"
        )));
    }
    if logits.len() != labels.len() * n_classes {
        return Err(GanError::Shape(format!(
            "logits hold {} values for {} labels x {} classes",
            logits.len(),
            labels.len(),
            n_classes
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= n_classes) {
        return Err(GanError::Label { label: bad, n_classes });
    }
    let b = labels.len();
    let mut total = 0.0;
    let mut grad = vec![T::ZERO; logits.len()];
    let inv_b = 1.0 / b as f64;
    for ((row, g), &c) in logits
        .chunks_exact(n_classes)
        .zip(grad.chunks_exact_mut(n_classes))
        .zip(labels)
    {
        // log-sum-exp in f64 so the confident limit stays accurate
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v.to_f64() - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[c].to_f64();
        for (k, (gk, &v)) in g.iter_mut().zip(row).enumerate() {
            let p = (v.to_f64() - lse).exp();
            let onehot = if k == c { 1.0 } else { 0.0 };
            *gk = T::from_f64((p - onehot) * inv_b);
        }
    }
    Ok((total * inv_b, grad))
}
