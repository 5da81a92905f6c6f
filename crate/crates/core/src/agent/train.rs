use std::io::Write;

use super::buffer::{BufferConfig, ReplayBuffer};
use super::cql::{cql_loss_with_targets, q_targets, stack};
use super::qnet::QNetwork;
use super::transition::{gen_transition, Transition};
use crate::coldstart::RepresentativeTable;
use crate::data::{InteractionDataset, PopularityTable};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::optim::{Adam, CosineAnnealing};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Weight of the conservative regulariser.
    pub alpha: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    /// Gradient steps between hard target-network copies.
    pub target_sync: usize,
    pub buffer: BufferConfig,
    /// Gradient steps per epoch; 0 means one pass over the epoch's fresh
    /// transitions (`ceil(generated / batch_size)`).
    pub updates_per_epoch: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            alpha: 5.5,
            lr: 1e-3,
            epochs: 20,
            batch_size: 256,
            hidden: 256,
            target_sync: 500,
            buffer: BufferConfig::default(),
            updates_per_epoch: 0,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if !(self.lr > 0.0) || self.batch_size == 0 || self.hidden == 0 || self.target_sync == 0 {
            return Err(Error::Config(
                "agent learning rate, batch size, hidden size and target sync must be positive".into(),
            ));
        }
        self.buffer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    pub mean_q: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    /// Samples whose conservative regulariser came out negative.
    pub regularizer_violations: usize,
    /// Smallest per-sample regulariser seen during training.
    pub min_regularizer: f64,
    /// Transitions whose action was rare, counted at insertion.
    pub rare_inserted: usize,
    /// Times the rare partition held an action at or above the threshold.
    pub rare_impurities: usize,
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,step,loss,lr,mean_q")?;
        for r in &self.records {
            writeln!(out, "{},{},{:.9e},{:.9e},{:.9e}", r.epoch, r.step, r.loss, r.lr, r.mean_q)?;
        }
        Ok(())
    }
}

/// Train a dueling double-DQN with the conservative objective on
/// transitions drawn from the training projects' histories.
///
/// Each epoch generates one transition per usable library of every training
/// project, inserts them into the partitioned buffer, then runs gradient
/// steps on partition-weighted batches with a cosine-annealed learning rate.
pub fn train_agent(
    train: &InteractionDataset,
    table: &EmbeddingTable,
    reps: &RepresentativeTable,
    cfg: &AgentConfig,
) -> Result<(QNetwork, TrainLog)> {
    cfg.validate()?;
    let m = train.n_libraries();
    if reps.n_libraries() != m || table.n_libraries() != m {
        return Err(Error::InvalidInput("library catalogue sizes disagree".into()));
    }
    let mut rng = rng::seeded(rng::mix(cfg.seed, 0xa9e7));
    let rates = PopularityTable::from_dataset(train).rates();
    let mut buffer = ReplayBuffer::new(cfg.buffer, rates)?;

    let usable: Vec<Vec<u32>> = (0..train.n_projects() as u32)
        .map(|p| {
            train
                .libraries_of(p)
                .iter()
                .copied()
                .filter(|&l| reps.is_available(l))
                .collect()
        })
        .collect();
    let per_epoch: usize = usable.iter().filter(|l| l.len() >= 2).map(Vec::len).sum();
    if per_epoch == 0 {
        return Err(Error::InvalidInput(
            "no training project has two or more usable libraries".into(),
        ));
    }
    let steps_per_epoch = if cfg.updates_per_epoch > 0 {
        cfg.updates_per_epoch
    } else {
        per_epoch.div_ceil(cfg.batch_size)
    };
    let schedule = CosineAnnealing {
        base: cfg.lr,
        floor: 0.0,
        total: steps_per_epoch * cfg.epochs,
    };

    let mut online = QNetwork::new(table.dim(), cfg.hidden, m, &mut rng);
    let mut target = online.clone();
    let mut adam = Adam::new(online.params().len());
    let mut log = TrainLog {
        min_regularizer: f64::INFINITY,
        ..TrainLog::default()
    };
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        for (p, libs) in usable.iter().enumerate() {
            for _ in 0..libs.len() {
                let Some(t) = gen_transition(p as u32, libs, table, reps, &mut rng)? else {
                    break;
                };
                if buffer.is_rare_action(t.action) {
                    log.rare_inserted += 1;
                }
                buffer.insert(t, &mut rng);
            }
        }
        log.rare_impurities += buffer.rare_items().filter(|t| !buffer.is_rare_action(t.action)).count();

        for _ in 0..steps_per_epoch {
            let batch = buffer.sample(cfg.batch_size, &mut rng)?;
            let weights = batch.item_weights();
            let transitions: Vec<&Transition> = batch.items.iter().map(|(_, t)| t).collect();
            let y = q_targets(&transitions, &online, &target, cfg.gamma);
            let states = stack(transitions.iter().map(|t| &t.state));
            let actions: Vec<u32> = transitions.iter().map(|t| t.action).collect();
            let out = cql_loss_with_targets(&online, &states, &actions, &y, &weights, cfg.alpha)
                .map_err(|e| match e {
                    Error::Numeric(msg) => Error::Numeric(format!("agent diverged at step {step}: {msg}")),
                    other => other,
                })?;
            for &r in &out.regularizer {
                log.min_regularizer = log.min_regularizer.min(r);
                if r < 0.0 {
                    log.regularizer_violations += 1;
                }
            }
            debug_assert!(out.regularizer.iter().all(|&r| r >= 0.0));

            let lr = schedule.lr(step);
            adam.step(online.params_mut(), &out.grad, lr);
            if !online.is_finite() {
                return Err(Error::Numeric(format!("Q-network parameters non-finite at step {step}")));
            }
            log.records.push(TrainRecord {
                epoch,
                step,
                loss: out.loss,
                lr,
                mean_q: out.mean_q,
            });
            step += 1;
            if step.is_multiple_of(cfg.target_sync) {
                target = online.clone();
            }
        }
    }
    Ok((online, log))
}
