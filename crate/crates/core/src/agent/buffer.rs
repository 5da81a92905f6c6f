//! Popularity-aware replay memory split into three partitions.
//!
//! * rare: FIFO of transitions whose action is a long-tail library
//! * random: reservoir over every inserted transition
//! * sequential: per-project queues of fresh transitions, sampled by a
//!   cursor that cycles over projects in arrival order
//!
//! A transition may live in more than one partition at once.

use std::collections::{HashMap, VecDeque};

use rand::Rng;

use super::transition::Transition;
use crate::data::RARE_THRESHOLD;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Rare = 0,
    Random = 1,
    Sequential = 2,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Rare, Partition::Random, Partition::Sequential];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Rare => "rare",
            Partition::Random => "random",
            Partition::Sequential => "sequential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferConfig {
    pub capacity: usize,
    /// Ratios for rare, random and sequential partitions; must sum to 1.
    pub mu: [f64; 3],
    pub rare_threshold: f64,
}

impl Default for BufferConfig {
    fn default() -> Self {
        Self {
            capacity: 100_000,
            mu: [0.2, 0.5, 0.3],
            rare_threshold: RARE_THRESHOLD,
        }
    }
}

impl BufferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu.iter().any(|&m| !(0.0..=1.0).contains(&m)) || (self.mu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "partition ratios must be in [0, 1] and sum to 1, got {:?}",
                self.mu
            )));
        }
        if self.capacity == 0 {
            return Err(Error::Config("buffer capacity must be positive".into()));
        }
        Ok(())
    }

    pub fn partition_capacity(&self, p: Partition) -> usize {
        (self.mu[p as usize] * self.capacity as f64 + 1e-9).floor() as usize
    }
}

/// Split `total` into integer quotas proportional to `weights` (largest
/// remainder; ties go to the earlier partition).
pub fn quotas(weights: [f64; 3], total: usize) -> [usize; 3] {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return [0, total, 0];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out = [0usize; 3];
    for i in 0..3 {
        out[i] = (exact[i] + 1e-9).floor() as usize;
    }
    let mut left = total - out.iter().sum::<usize>().min(total);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - out[a] as f64;
        let fb = exact[b] - out[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

#[derive(Debug, Clone, Default)]
struct SequentialPartition {
    capacity: usize,
    queues: Vec<(u32, VecDeque<Transition>, usize)>,
    slot: HashMap<u32, usize>,
    arrivals: VecDeque<u32>,
    cursor: usize,
}

impl SequentialPartition {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            ..Self::default()
        }
    }

    fn len(&self) -> usize {
        self.arrivals.len()
    }

    fn push(&mut self, t: Transition) {
        if self.capacity == 0 {
            return;
        }
        let project = t.project;
        let idx = match self.slot.get(&project) {
            Some(&i) => i,
            None => {
                self.queues.push((project, VecDeque::new(), 0));
                self.slot.insert(project, self.queues.len() - 1);
                self.queues.len() - 1
            }
        };
        self.queues[idx].1.push_back(t);
        self.arrivals.push_back(project);
        if self.arrivals.len() > self.capacity {
            let oldest = self.arrivals.pop_front().expect("nonempty");
            let i = self.slot[&oldest];
            self.queues[i].1.pop_front();
            if self.queues[i].1.is_empty() {
                self.queues.remove(i);
                if self.cursor > i {
                    self.cursor -= 1;
                }
                self.slot = self
                    .queues
                    .iter()
                    .enumerate()
                    .map(|(k, q)| (q.0, k))
                    .collect();
            }
        }
    }

    /// Next transition in round-robin order over projects; within a project
    /// the freshest transitions are served first.
    fn next(&mut self) -> Option<&Transition> {
        if self.queues.is_empty() {
            return None;
        }
        let i = self.cursor % self.queues.len();
        self.cursor = i + 1;
        let (_, items, served) = &mut self.queues[i];
        let k = items.len() - 1 - (*served % items.len());
        *served += 1;
        items.get(k)
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    cfg: BufferConfig,
    rates: Vec<f64>,
    rare: VecDeque<Transition>,
    random: Vec<Transition>,
    random_seen: u64,
    sequential: SequentialPartition,
}

/// A sampled batch with per-item partition tags and the effective loss
/// weight of each partition.
#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub items: Vec<(Partition, Transition)>,
    pub weights: [f64; 3],
}

impl SampledBatch {
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for (p, _) in &self.items {
            c[*p as usize] += 1;
        }
        c
    }

    /// Per-item weights `w_x / n_x`, so the weighted sum of per-item losses
    /// equals `Σ_x w_x · mean(loss over partition x)`.
    pub fn item_weights(&self) -> Vec<f64> {
        let counts = self.counts();
        let present: f64 = (0..3).filter(|&x| counts[x] > 0).map(|x| self.weights[x]).sum();
        self.items
            .iter()
            .map(|(p, _)| {
                let x = *p as usize;
                if present > 0.0 {
                    self.weights[x] / present / counts[x] as f64
                } else {
                    1.0 / self.items.len() as f64
                }
            })
            .collect()
    }
}

impl ReplayBuffer {
    /// `rates[a]` is the training popularity rate of library `a`.
    pub fn new(cfg: BufferConfig, rates: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            sequential: SequentialPartition::new(cfg.partition_capacity(Partition::Sequential)),
            cfg,
            rates,
            rare: VecDeque::new(),
            random: Vec::new(),
            random_seen: 0,
        })
    }

    pub fn config(&self) -> &BufferConfig {
        &self.cfg
    }

    pub fn len(&self, p: Partition) -> usize {
        match p {
            Partition::Rare => self.rare.len(),
            Partition::Random => self.random.len(),
            Partition::Sequential => self.sequential.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        Partition::ALL.iter().all(|&p| self.len(p) == 0)
    }

    pub fn rare_items(&self) -> impl Iterator<Item = &Transition> {
        self.rare.iter()
    }

    pub fn random_items(&self) -> &[Transition] {
        &self.random
    }

    pub fn is_rare_action(&self, action: u32) -> bool {
        self.rates[action as usize] < self.cfg.rare_threshold
    }

    pub fn insert<R: Rng>(&mut self, t: Transition, rng: &mut R) {
        let rare_cap = self.cfg.partition_capacity(Partition::Rare);
        if rare_cap > 0 && self.is_rare_action(t.action) {
            self.rare.push_back(t.clone());
            if self.rare.len() > rare_cap {
                self.rare.pop_front();
            }
        }
        self.sequential.push(t.clone());

        let rand_cap = self.cfg.partition_capacity(Partition::Random);
        if rand_cap > 0 {
            self.random_seen += 1;
            if self.random.len() < rand_cap {
                self.random.push(t);
            } else {
                let j = rng.random_range(0..self.random_seen);
                if (j as usize) < rand_cap {
                    self.random[j as usize] = t;
                }
            }
        }
    }

    /// Draw `batch_size` transitions, `round(mu_x * B)` from each partition.
    /// Quota (and loss weight) of an empty partition moves to the random
    /// partition, or to the first nonempty one if that is empty too.
    pub fn sample<R: Rng>(&mut self, batch_size: usize, rng: &mut R) -> Result<SampledBatch> {
        if self.is_empty() {
            return Err(Error::InvalidInput("replay buffer is empty".into()));
        }
        let mut q = quotas(self.cfg.mu, batch_size);
        let mut weights = self.cfg.mu;
        let receiver = if self.len(Partition::Random) > 0 {
            Partition::Random
        } else {
            *Partition::ALL
                .iter()
                .find(|&&p| self.len(p) > 0)
                .expect("some partition is nonempty")
        };
        for p in Partition::ALL {
            if p != receiver && self.len(p) == 0 {
                q[receiver as usize] += q[p as usize];
                q[p as usize] = 0;
                weights[receiver as usize] += weights[p as usize];
                weights[p as usize] = 0.0;
            }
        }

        let mut items = Vec::with_capacity(batch_size);
        for _ in 0..q[Partition::Rare as usize] {
            let i = rng.random_range(0..self.rare.len());
            items.push((Partition::Rare, self.rare[i].clone()));
        }
        for _ in 0..q[Partition::Random as usize] {
            let i = rng.random_range(0..self.random.len());
            items.push((Partition::Random, self.random[i].clone()));
        }
        for _ in 0..q[Partition::Sequential as usize] {
            let t = self.sequential.next().expect("nonempty").clone();
            items.push((Partition::Sequential, t));
        }
        Ok(SampledBatch { items, weights })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array1;

    fn t(project: u32, action: u32) -> Transition {
        Transition {
            project,
            state: Array1::zeros(2),
            action,
            reward: 1.0,
            next_state: Array1::zeros(2),
            terminal: false,
        }
    }

    fn rates() -> Vec<f64> {
        // library 0 is rare, library 1 popular
        vec![0.05, 0.95]
    }

    #[test]
    fn quota_examples() {
        assert_eq!(quotas([0.2, 0.5, 0.3], 10), [2, 5, 3]);
        assert_eq!(quotas([0.2, 0.5, 0.3], 7).iter().sum::<usize>(), 7);
        assert_eq!(quotas([0.0, 1.0, 0.0], 9), [0, 9, 0]);
    }

    #[test]
    fn routing_by_popularity() {
        let mut r = rng::seeded(0);
        let mut buf = ReplayBuffer::new(BufferConfig::default(), rates()).unwrap();
        buf.insert(t(0, 0), &mut r);
        assert_eq!(buf.len(Partition::Rare), 1);
        buf.insert(t(0, 1), &mut r);
        assert_eq!(buf.len(Partition::Rare), 1);
        assert!(buf.rare_items().all(|x| x.action == 0));
        assert_eq!(buf.len(Partition::Random), 2);
        assert_eq!(buf.len(Partition::Sequential), 2);
    }

    #[test]
    fn batch_composition() {
        let mut r = rng::seeded(1);
        let mut buf = ReplayBuffer::new(BufferConfig::default(), rates()).unwrap();
        for i in 0..50 {
            buf.insert(t(i % 5, i % 2), &mut r);
        }
        let b = buf.sample(10, &mut r).unwrap();
        assert_eq!(b.counts(), [2, 5, 3]);
        assert_eq!(b.items.len(), 10);
        let w: f64 = b.item_weights().iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_rare_quota_goes_to_random() {
        let mut r = rng::seeded(2);
        let mut buf = ReplayBuffer::new(BufferConfig::default(), rates()).unwrap();
        for i in 0..20 {
            buf.insert(t(i, 1), &mut r);
        }
        let b = buf.sample(10, &mut r).unwrap();
        assert_eq!(b.counts(), [0, 7, 3]);
        assert!((b.weights[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn empty_buffer_errors() {
        let mut r = rng::seeded(2);
        let mut buf = ReplayBuffer::new(BufferConfig::default(), rates()).unwrap();
        assert!(buf.sample(4, &mut r).is_err());
    }

    #[test]
    fn rejects_bad_ratios() {
        let cfg = BufferConfig {
            mu: [0.5, 0.5, 0.5],
            ..BufferConfig::default()
        };
        assert!(ReplayBuffer::new(cfg, rates()).is_err());
    }

    #[test]
    fn capacities_respected() {
        let mut r = rng::seeded(3);
        let cfg = BufferConfig {
            capacity: 20,
            ..BufferConfig::default()
        };
        let mut buf = ReplayBuffer::new(cfg, rates()).unwrap();
        for i in 0..500 {
            buf.insert(t(i % 7, i % 2), &mut r);
            assert!(buf.len(Partition::Rare) <= 4);
            assert!(buf.len(Partition::Random) <= 10);
            assert!(buf.len(Partition::Sequential) <= 6);
        }
    }

    #[test]
    fn sequential_cycles_projects() {
        let mut r = rng::seeded(3);
        let cfg = BufferConfig {
            mu: [0.0, 0.0, 1.0],
            ..BufferConfig::default()
        };
        let mut buf = ReplayBuffer::new(cfg, rates()).unwrap();
        for p in 0..3 {
            for _ in 0..4 {
                buf.insert(t(p, 1), &mut r);
            }
        }
        let b = buf.sample(6, &mut r).unwrap();
        let projects: Vec<u32> = b.items.iter().map(|(_, x)| x.project).collect();
        assert_eq!(projects, vec![0, 1, 2, 0, 1, 2]);
    }
}
