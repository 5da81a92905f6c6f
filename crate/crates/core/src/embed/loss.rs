use ndarray::{Array1, Array2, ArrayView1};

use super::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveSample {
    pub project: u32,
    pub positive: u32,
    pub negatives: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    /// Mean loss over the batch.
    pub loss: f64,
    pub grad_projects: Array2<f64>,
    pub grad_libraries: Array2<f64>,
}

/// Cosine and its gradients with respect to both arguments.
fn cosine_with_grads(a: ArrayView1<f64>, b: ArrayView1<f64>) -> (f64, Array1<f64>, Array1<f64>) {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na < 1e-12 || nb < 1e-12 {
        return (0.0, Array1::zeros(a.len()), Array1::zeros(b.len()));
    }
    let c = a.dot(&b) / (na * nb);
    let ga = &b / (na * nb) - &a * (c / (na * na));
    let gb = &a / (na * nb) - &b * (c / (nb * nb));
    (c, ga, gb)
}

/// Popularity-attenuated sampled softmax.
///
/// Per sample, the positive logit is `cos(e_u, e_pos) * (1 - beta * rate(pos)) / tau`
/// and each negative logit is `cos(e_u, e_neg) / tau`; the loss is the
/// negative log-probability of the positive. With `beta = 0` this is plain
/// InfoNCE.
pub fn debiased_contrastive_loss(
    batch: &[ContrastiveSample],
    table: &EmbeddingTable,
    rates: &[f64],
    beta: f64,
    tau: f64,
) -> Result<LossOutput> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Config(format!("beta must lie in [0, 1), got {beta}")));
    }
    let mut grad_projects = Array2::zeros(table.projects.raw_dim());
    let mut grad_libraries = Array2::zeros(table.libraries.raw_dim());
    if batch.is_empty() {
        return Ok(LossOutput {
            loss: 0.0,
            grad_projects,
            grad_libraries,
        });
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;

    for sample in batch {
        let u = table.project(sample.project);
        let attenuation = 1.0 - beta * rates[sample.positive as usize];
        let items: Vec<u32> = std::iter::once(sample.positive)
            .chain(sample.negatives.iter().copied())
            .collect();

        let mut logits = Vec::with_capacity(items.len());
        let mut partials = Vec::with_capacity(items.len());
        for (j, &item) in items.iter().enumerate() {
            let (c, ga, gb) = cosine_with_grads(u, table.library(item));
            let w = if j == 0 { attenuation } else { 1.0 };
            logits.push(c * w / tau);
            partials.push((w / tau, ga, gb));
        }

        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - logits[0];

        for (j, (&item, (dz_dc, ga, gb))) in items.iter().zip(partials).enumerate() {
            let p = (logits[j] - lse).exp();
            let dl_dz = if j == 0 { p - 1.0 } else { p };
            let coeff = scale * dl_dz * dz_dc;
            let mut gu = grad_projects.row_mut(sample.project as usize);
            gu.scaled_add(coeff, &ga);
            let mut gi = grad_libraries.row_mut(item as usize);
            gi.scaled_add(coeff, &gb);
        }
    }

    let loss = total * scale;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("contrastive loss is {loss}")));
    }
    Ok(LossOutput {
        loss,
        grad_projects,
        grad_libraries,
    })
}
