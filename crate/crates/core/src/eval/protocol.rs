use std::time::Instant;

use rayon::prelude::*;

use super::metrics::{coverage_at_k, epc_at_k, popularity_ranking, precision_recall_at_k, random_baseline, EpcMode};
use crate::agent::{recommend, AgentConfig, RecommendMode};
use crate::data::{split_interactions, split_query_test, split_users, InteractionDataset, PopularityTable, SplitMode, SplitSpec};
use crate::embed::EmbedConfig;
use crate::error::{Error, ErrorClass, Result};
use crate::pipeline::train_model;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Held-out projects, query set drawn with the configured fraction.
    ColdStart100,
    /// Held-out projects with 30% of their libraries as the query.
    ColdStart30,
    /// Every project's history split into train and test parts.
    InteractionSplit,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coldstart-100" => Ok(Self::ColdStart100),
            "coldstart-30" => Ok(Self::ColdStart30),
            "interaction-split" => Ok(Self::InteractionSplit),
            _ => Err(Error::Config(format!(
                "unknown protocol {s:?} (expected coldstart-100, coldstart-30 or interaction-split)"
            ))),
        }
    }
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ColdStart100 => "coldstart-100",
            Self::ColdStart30 => "coldstart-30",
            Self::InteractionSplit => "interaction-split",
        }
    }
}

/// Everything one protocol run needs. The seeds inside `embed` and `agent`
/// are replaced per fold with values derived from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub folds: usize,
    pub k: usize,
    /// Query share of each held-out project under coldstart-100.
    pub query_fraction: f64,
    /// Train share of each history under interaction-split.
    pub train_fraction: f64,
    pub lambda: f64,
    pub embed: EmbedConfig,
    pub agent: AgentConfig,
    pub epc_mode: EpcMode,
    pub recommend_mode: RecommendMode,
    pub seed: u64,
    /// Folds run concurrently; 1 runs them in order on the caller's thread.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::ColdStart100,
            folds: 10,
            k: 10,
            query_fraction: 0.5,
            train_fraction: 0.8,
            lambda: 0.5,
            embed: EmbedConfig::default(),
            agent: AgentConfig::default(),
            epc_mode: EpcMode::Unweighted,
            recommend_mode: RecommendMode::Sequential,
            seed: 0,
            jobs: 1,
        }
    }
}

impl EvalConfig {
    pub fn effective_query_fraction(&self) -> f64 {
        match self.protocol {
            Protocol::ColdStart30 => 0.3,
            _ => self.query_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.jobs == 0 {
            return Err(Error::Config("k and jobs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        SplitSpec {
            mode: SplitMode::UserSplit,
            query_fraction: self.effective_query_fraction(),
            fold_count: self.folds,
            seed: self.seed,
        }
        .validate()?;
        self.embed.validate()?;
        self.agent.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FoldMetrics {
    pub precision: f64,
    pub recall: f64,
    pub epc: f64,
    pub coverage: f64,
    /// Expected Recall@K of a uniformly random policy.
    pub random_recall: f64,
    /// Recall@K of recommending the most used training libraries.
    pub popularity_recall: f64,
}

impl FoldMetrics {
    pub const NAMES: [&'static str; 6] = [
        "precision",
        "recall",
        "epc",
        "coverage",
        "random_recall",
        "popularity_recall",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.precision,
            self.recall,
            self.epc,
            self.coverage,
            self.random_recall,
            self.popularity_recall,
        ]
    }

    fn mean(all: &[FoldMetrics]) -> Option<FoldMetrics> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        let avg = |f: fn(&FoldMetrics) -> f64| all.iter().map(f).sum::<f64>() / n;
        Some(FoldMetrics {
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            epc: avg(|m| m.epc),
            coverage: avg(|m| m.coverage),
            random_recall: avg(|m| m.random_recall),
            popularity_recall: avg(|m| m.popularity_recall),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    /// `None` when a stage failed; see `error`.
    pub metrics: Option<FoldMetrics>,
    pub error: Option<String>,
    pub error_class: Option<ErrorClass>,
    /// Test projects that were scored.
    pub evaluated: usize,
    /// Test projects left out because no query/test pair could be formed.
    pub dropped: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub protocol: Protocol,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Equal-weight mean over completed folds.
    pub average: Option<FoldMetrics>,
    pub seconds: f64,
}

impl MetricsReport {
    pub fn incomplete(&self) -> Vec<usize> {
        self.folds.iter().filter(|f| f.metrics.is_none()).map(|f| f.fold).collect()
    }

    pub fn dropped(&self) -> usize {
        self.folds.iter().map(|f| f.dropped).sum()
    }
}

/// One project to score: what the recommender sees and what it should find.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCase {
    pub query: Vec<u32>,
    pub truth: Vec<u32>,
}

struct FoldPlan {
    train: InteractionDataset,
    cases: Vec<EvalCase>,
    dropped: usize,
}

fn plan_folds(ds: &InteractionDataset, cfg: &EvalConfig) -> Result<Vec<FoldPlan>> {
    match cfg.protocol {
        Protocol::ColdStart100 | Protocol::ColdStart30 => {
            let spec = SplitSpec {
                mode: SplitMode::UserSplit,
                query_fraction: cfg.effective_query_fraction(),
                fold_count: cfg.folds,
                seed: cfg.seed,
            };
            split_users(ds, &spec)?
                .into_iter()
                .map(|fold| {
                    let mut cases = Vec::new();
                    let mut dropped = 0;
                    for tp in &fold.test {
                        let seed = rng::mix(cfg.seed, ((fold.fold as u64) << 32) | tp.project as u64);
                        match split_query_test(&tp.libraries, spec.query_fraction, seed)? {
                            Some((query, truth)) => cases.push(EvalCase { query, truth }),
                            None => dropped += 1,
                        }
                    }
                    Ok(FoldPlan {
                        train: ds.subset_projects(&fold.train),
                        cases,
                        dropped,
                    })
                })
                .collect()
        }
        Protocol::InteractionSplit => (0..cfg.folds)
            .map(|fold| {
                let splits = split_interactions(ds, cfg.train_fraction, rng::mix(cfg.seed, fold as u64))?;
                let lists: Vec<Vec<u32>> = splits.iter().map(|s| s.train.clone()).collect();
                let (train, _) = ds.with_lists(&lists);
                let seen = train.seen_libraries();
                let mut cases = Vec::new();
                let mut dropped = 0;
                for s in splits.into_iter().filter(|s| !s.test.is_empty()) {
                    let truth: Vec<u32> = s.test.into_iter().filter(|&l| seen[l as usize]).collect();
                    if truth.is_empty() {
                        dropped += 1;
                    } else {
                        cases.push(EvalCase { query: s.train, truth });
                    }
                }
                Ok(FoldPlan { train, cases, dropped })
            })
            .collect(),
    }
}

/// Score ranked lists against their cases. `pop` comes from the training
/// split and defines both EPC and the popularity baseline.
pub fn score_lists(
    cases: &[EvalCase],
    lists: &[Vec<u32>],
    pop: &PopularityTable,
    available: &[bool],
    k: usize,
    epc_mode: EpcMode,
) -> FoldMetrics {
    let n = cases.len().max(1) as f64;
    let mut m = FoldMetrics::default();
    let n_available = available.iter().filter(|&&a| a).count();
    for (case, rec) in cases.iter().zip(lists) {
        let (p, r) = precision_recall_at_k(rec, &case.truth, k).unwrap_or((0.0, 0.0));
        m.precision += p / n;
        m.recall += r / n;
        let query_available = case.query.iter().filter(|&&l| available[l as usize]).count();
        let truth_available = case.truth.iter().filter(|&&l| available[l as usize]).count();
        m.random_recall += random_baseline(n_available - query_available, truth_available, case.truth.len(), k).1 / n;
        let popular = popularity_ranking(pop, &case.query, available, k);
        m.popularity_recall += precision_recall_at_k(&popular, &case.truth, k).map_or(0.0, |x| x.1) / n;
    }
    let truths: Vec<Vec<u32>> = cases.iter().map(|c| c.truth.clone()).collect();
    m.epc = epc_at_k(lists, &truths, pop, k, epc_mode);
    m.coverage = coverage_at_k(lists, available.len(), k);
    m
}

fn run_fold(fold: usize, plan: &FoldPlan, cfg: &EvalConfig) -> Result<(FoldMetrics, usize)> {
    if plan.cases.is_empty() {
        return Err(Error::Split(format!("fold {fold} has no scorable test project")));
    }
    let embed = EmbedConfig {
        seed: rng::mix(cfg.seed, 0xe000 + fold as u64),
        ..cfg.embed.clone()
    };
    let agent = AgentConfig {
        seed: rng::mix(cfg.seed, 0xa000 + fold as u64),
        ..cfg.agent.clone()
    };
    let model = train_model(&plan.train, &embed, cfg.lambda, &agent)?;
    let reps = &model.representatives;
    let lists = plan
        .cases
        .iter()
        .map(|c| {
            Ok(recommend(&c.query, cfg.k, &model.network, reps, cfg.recommend_mode)?
                .into_iter()
                .map(|r| r.library)
                .collect())
        })
        .collect::<Result<Vec<Vec<u32>>>>()?;
    let pop = PopularityTable::from_dataset(&plan.train);
    Ok((
        score_lists(&plan.cases, &lists, &pop, reps.availability(), cfg.k, cfg.epc_mode),
        plan.cases.len(),
    ))
}

/// Run every fold of a protocol and average the completed ones. A failing
/// fold is recorded with its diagnostic rather than aborting the run.
pub fn run_protocol(ds: &InteractionDataset, cfg: &EvalConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let start = Instant::now();
    let plans = plan_folds(ds, cfg)?;
    let one = |(fold, plan): (usize, &FoldPlan)| {
        let t = Instant::now();
        let outcome = run_fold(fold, plan, cfg);
        let seconds = t.elapsed().as_secs_f64();
        match outcome {
            Ok((metrics, evaluated)) => {
                log::info!("fold {fold}: recall {:.2}, {evaluated} projects", metrics.recall);
                FoldResult {
                    fold,
                    metrics: Some(metrics),
                    error: None,
                    error_class: None,
                    evaluated,
                    dropped: plan.dropped,
                    seconds,
                }
            }
            Err(e) => {
                log::error!("fold {fold} failed: {e}");
                FoldResult {
                    fold,
                    metrics: None,
                    error: Some(e.to_string()),
                    error_class: Some(e.class()),
                    evaluated: 0,
                    dropped: plan.dropped,
                    seconds,
                }
            }
        }
    };
    let folds: Vec<FoldResult> = if cfg.jobs <= 1 {
        plans.iter().enumerate().map(one).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.jobs)))?
            .install(|| plans.par_iter().enumerate().map(one).collect())
    };
    let dropped: usize = folds.iter().map(|f| f.dropped).sum();
    if dropped > 0 {
        log::info!("{dropped} test projects dropped (fewer than two usable libraries)");
    }
    let completed: Vec<FoldMetrics> = folds.iter().filter_map(|f| f.metrics).collect();
    Ok(MetricsReport {
        protocol: cfg.protocol,
        k: cfg.k,
        seed: cfg.seed,
        average: FoldMetrics::mean(&completed),
        folds,
        seconds: start.elapsed().as_secs_f64(),
    })
}
