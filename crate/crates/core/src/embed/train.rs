use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::graph::{build_adjacency, propagate_stacked, NormAdjacency};
use super::loss::{debiased_contrastive_loss, ContrastiveSample};
use super::EmbeddingTable;
use crate::data::{InteractionDataset, PopularityTable};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::rank::top_k;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    pub layers: usize,
    pub dim: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub l2: f64,
    pub negatives: usize,
    pub temperature: f64,
    /// Popularity attenuation strength; 0 disables debiasing.
    pub beta: f64,
    /// Epochs without a validation Recall@10 improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub init_std: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            dim: 64,
            batch_size: 1024,
            lr: 1e-4,
            l2: 1e-5,
            negatives: 128,
            temperature: 0.1,
            beta: 0.5,
            patience: 20,
            max_epochs: 1000,
            init_std: 0.1,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("embedding {what}")));
        if self.dim == 0 || self.batch_size == 0 || self.negatives == 0 || self.max_epochs == 0 {
            return bad("dim, batch size, negatives and max epochs must be positive");
        }
        if self.patience < 1 {
            return bad("patience must be at least 1");
        }
        if !(self.lr > 0.0) || !(self.temperature > 0.0) || !(self.init_std > 0.0) || self.l2 < 0.0 {
            return bad("learning rate, temperature and init std must be positive, l2 non-negative");
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbedReport {
    /// Mean batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// Validation Recall@10 (percent) per epoch.
    pub validation_recall: Vec<f64>,
    pub best_epoch: usize,
}

/// Hold out roughly `fraction` of the interactions for early stopping while
/// leaving every project at least one fitting interaction.
pub fn holdout_split(ds: &InteractionDataset, fraction: f64, seed: u64) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let mut fit: Vec<Vec<u32>> = (0..ds.n_projects() as u32)
        .map(|p| ds.libraries_of(p).to_vec())
        .collect();
    let mut held = vec![Vec::new(); ds.n_projects()];
    let target = (fraction * ds.n_interactions() as f64).round() as usize;
    if target == 0 {
        return (fit, held);
    }
    let mut edges: Vec<(u32, u32)> = ds.interactions().collect();
    edges.shuffle(&mut rng::seeded(seed));
    let mut moved = 0;
    for (p, l) in edges {
        if moved == target {
            break;
        }
        let list = &mut fit[p as usize];
        if list.len() > 1 {
            list.retain(|&x| x != l);
            held[p as usize].push(l);
            moved += 1;
        }
    }
    for h in &mut held {
        h.sort_unstable();
    }
    (fit, held)
}

fn validation_recall(
    table: &EmbeddingTable,
    fit: &[Vec<u32>],
    held: &[Vec<u32>],
    k: usize,
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, truth) in held.iter().enumerate() {
        if truth.is_empty() {
            continue;
        }
        let known = &fit[p];
        let scores = table.scores_for(p as u32);
        let top = top_k(&scores, k, |i| known.binary_search(&(i as u32)).is_err());
        let hits = top.iter().filter(|l| truth.binary_search(l).is_ok()).count();
        sum += hits as f64 / truth.len() as f64;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        100.0 * sum / count as f64
    }
}

fn sample_negatives<R: Rng>(rng: &mut R, known: &[u32], n_libraries: usize, count: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c = rng.random_range(0..n_libraries as u32);
        if known.binary_search(&c).is_err() {
            out.push(c);
        }
    }
    out
}

fn finalized(adj: &NormAdjacency, e0: &Array2<f64>, layers: usize, n: usize) -> EmbeddingTable {
    let mut table = EmbeddingTable::from_stacked(n, &propagate_stacked(adj, e0, layers));
    table.normalize();
    table
}

/// Fit layer-propagated embeddings by mini-batch Adam with early stopping on
/// validation Recall@10. The best-scoring base embeddings are propagated over
/// the full training graph and returned with unit-norm rows.
pub fn train_embeddings(train: &InteractionDataset, cfg: &EmbedConfig) -> Result<(EmbeddingTable, EmbedReport)> {
    cfg.validate()?;
    let n = train.n_projects();
    let m = train.n_libraries();
    let mut rng = rng::seeded(rng::mix(cfg.seed, 0xe3b0));

    let rates = PopularityTable::from_dataset(train).rates();
    let (fit_lists, held) = holdout_split(train, cfg.validation_fraction, rng::mix(cfg.seed, 0x401d));
    let has_holdout = held.iter().any(|h| !h.is_empty());
    let (fit_ds, _) = train.with_lists(&fit_lists);
    let adj_fit = build_adjacency(&fit_ds);
    let adj_full = build_adjacency(train);

    let normal = Normal::new(0.0, cfg.init_std).expect("positive std");
    let mut e0 = Array2::from_shape_simple_fn((n + m, cfg.dim), || normal.sample(&mut rng));
    let mut adam = Adam::new(e0.len());
    let mut best = e0.clone();
    let mut best_recall = f64::NEG_INFINITY;
    let mut stale = 0usize;
    let mut report = EmbedReport::default();

    let mut edges: Vec<(u32, u32)> = fit_ds.interactions().collect();
    let complement_empty: Vec<bool> = (0..n as u32)
        .map(|p| train.libraries_of(p).len() >= m)
        .collect();

    for epoch in 0..cfg.max_epochs {
        edges.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in edges.chunks(cfg.batch_size) {
            let batch: Vec<ContrastiveSample> = chunk
                .iter()
                .filter(|(p, _)| !complement_empty[*p as usize])
                .map(|&(p, l)| ContrastiveSample {
                    project: p,
                    positive: l,
                    negatives: sample_negatives(&mut rng, train.libraries_of(p), m, cfg.negatives),
                })
                .collect();
            if batch.is_empty() {
                continue;
            }
            let table = EmbeddingTable::from_stacked(n, &propagate_stacked(&adj_fit, &e0, cfg.layers));
            let out = debiased_contrastive_loss(&batch, &table, &rates, cfg.beta, cfg.temperature)?;
            let grad_out = EmbeddingTable::new(out.grad_projects, out.grad_libraries).stacked();
            let mut grad = propagate_stacked(&adj_fit, &grad_out, cfg.layers);

            let reg_scale = cfg.l2 / batch.len() as f64;
            let mut reg = 0.0;
            for s in &batch {
                let rows = std::iter::once(s.project as usize)
                    .chain(std::iter::once(n + s.positive as usize))
                    .chain(s.negatives.iter().map(|&l| n + l as usize));
                for r in rows {
                    let row = e0.row(r);
                    reg += 0.5 * reg_scale * row.dot(&row);
                    grad.row_mut(r).scaled_add(reg_scale, &row);
                }
            }
            let loss = out.loss + reg;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "embedding training diverged at epoch {epoch} (loss {loss})"
                )));
            }
            adam.step(
                e0.as_slice_mut().expect("standard layout"),
                grad.as_slice().expect("standard layout"),
                cfg.lr,
            );
            epoch_loss += loss;
            batches += 1;
        }
        report.epoch_loss.push(if batches > 0 { epoch_loss / batches as f64 } else { 0.0 });

        if !has_holdout {
            best.assign(&e0);
            report.best_epoch = epoch;
            continue;
        }
        let table = finalized(&adj_fit, &e0, cfg.layers, n);
        let recall = validation_recall(&table, &fit_lists, &held, 10);
        report.validation_recall.push(recall);
        if recall > best_recall {
            best_recall = recall;
            best.assign(&e0);
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log::debug!("early stop after epoch {epoch}, best Recall@10 {best_recall:.2}");
                break;
            }
        }
    }

    let table = finalized(&adj_full, &best, cfg.layers, n);
    if !table.is_finite() {
        return Err(Error::Numeric("final embedding table has non-finite entries".into()));
    }
    Ok((table, report))
}
