//! Flat `key = value` run configuration (TOML syntax) with command-line
//! style overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, BufferConfig, RecommendMode};
use crate::data::{SplitMode, SplitSpec};
use crate::embed::EmbedConfig;
use crate::error::{Error, Result};
use crate::eval::{EpcMode, EvalConfig, Protocol};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub output: PathBuf,
    pub protocol: String,
    pub seed: u64,
    pub folds: usize,
    pub k: usize,
    pub query_fraction: f64,
    pub train_fraction: f64,
    pub jobs: usize,

    pub dim: usize,
    pub layers: usize,
    pub embed_batch_size: usize,
    pub embed_lr: f64,
    pub l2: f64,
    pub negatives: usize,
    pub temperature: f64,
    pub beta: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub init_std: f64,
    pub validation_fraction: f64,

    pub lambda: f64,

    pub gamma: f64,
    pub alpha: f64,
    pub agent_lr: f64,
    pub epochs: usize,
    pub agent_batch_size: usize,
    pub hidden: usize,
    pub target_sync: usize,
    pub updates_per_epoch: usize,
    pub buffer_capacity: usize,
    pub mu_rare: f64,
    pub mu_random: f64,
    pub mu_sequential: f64,
    pub rare_threshold: f64,
    pub popular_threshold: f64,

    pub epc_mode: String,
    pub recommend_mode: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = EmbedConfig::default();
        let a = AgentConfig::default();
        let ev = EvalConfig::default();
        Self {
            dataset: None,
            output: PathBuf::from("tplrec-out"),
            protocol: ev.protocol.as_str().into(),
            seed: 0,
            folds: ev.folds,
            k: ev.k,
            query_fraction: ev.query_fraction,
            train_fraction: ev.train_fraction,
            jobs: 1,
            dim: e.dim,
            layers: e.layers,
            embed_batch_size: e.batch_size,
            embed_lr: e.lr,
            l2: e.l2,
            negatives: e.negatives,
            temperature: e.temperature,
            beta: e.beta,
            patience: e.patience,
            max_epochs: e.max_epochs,
            init_std: e.init_std,
            validation_fraction: e.validation_fraction,
            lambda: ev.lambda,
            gamma: a.gamma,
            alpha: a.alpha,
            agent_lr: a.lr,
            epochs: a.epochs,
            agent_batch_size: a.batch_size,
            hidden: a.hidden,
            target_sync: a.target_sync,
            updates_per_epoch: a.updates_per_epoch,
            buffer_capacity: a.buffer.capacity,
            mu_rare: a.buffer.mu[0],
            mu_random: a.buffer.mu[1],
            mu_sequential: a.buffer.mu[2],
            rare_threshold: a.buffer.rare_threshold,
            popular_threshold: crate::data::POPULAR_THRESHOLD,
            epc_mode: EpcMode::default().as_str().into(),
            recommend_mode: RecommendMode::default().as_str().into(),
        }
    }
}

fn override_value(raw: &str) -> toml::Value {
    // Bare words and paths are not valid TOML values; keep them as strings.
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

impl RunConfig {
    /// Parse a config document, then apply `(key, value)` overrides in order.
    pub fn from_str_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_owned()))?;
        for (key, raw) in overrides {
            table.insert(key.replace('-', "_"), override_value(raw));
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load from an optional file; without one, defaults plus overrides.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_str_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rare_threshold) || !(0.0..=1.0).contains(&self.popular_threshold) {
            return Err(Error::Config("thresholds must lie in [0, 1]".into()));
        }
        self.eval_config()?.validate()
    }

    pub fn protocol(&self) -> Result<Protocol> {
        self.protocol.parse()
    }

    pub fn embed_config(&self) -> EmbedConfig {
        EmbedConfig {
            layers: self.layers,
            dim: self.dim,
            batch_size: self.embed_batch_size,
            lr: self.embed_lr,
            l2: self.l2,
            negatives: self.negatives,
            temperature: self.temperature,
            beta: self.beta,
            patience: self.patience,
            max_epochs: self.max_epochs,
            init_std: self.init_std,
            validation_fraction: self.validation_fraction,
            seed: rng::mix(self.seed, 0xe000),
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            gamma: self.gamma,
            alpha: self.alpha,
            lr: self.agent_lr,
            epochs: self.epochs,
            batch_size: self.agent_batch_size,
            hidden: self.hidden,
            target_sync: self.target_sync,
            buffer: BufferConfig {
                capacity: self.buffer_capacity,
                mu: [self.mu_rare, self.mu_random, self.mu_sequential],
                rare_threshold: self.rare_threshold,
            },
            updates_per_epoch: self.updates_per_epoch,
            seed: rng::mix(self.seed, 0xa000),
        }
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        let protocol = self.protocol()?;
        Ok(SplitSpec {
            mode: match protocol {
                Protocol::InteractionSplit => SplitMode::InteractionSplit,
                _ => SplitMode::UserSplit,
            },
            query_fraction: if protocol == Protocol::ColdStart30 { 0.3 } else { self.query_fraction },
            fold_count: self.folds,
            seed: self.seed,
        })
    }

    pub fn eval_config(&self) -> Result<EvalConfig> {
        Ok(EvalConfig {
            protocol: self.protocol()?,
            folds: self.folds,
            k: self.k,
            query_fraction: self.query_fraction,
            train_fraction: self.train_fraction,
            lambda: self.lambda,
            embed: self.embed_config(),
            agent: self.agent_config(),
            epc_mode: self.epc_mode.parse()?,
            recommend_mode: self.recommend_mode.parse()?,
            seed: self.seed,
            jobs: self.jobs,
        })
    }
}

/// Split `--key value` pairs. Every key must start with `--` and be
/// followed by a value.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .filter(|k| !k.is_empty())
            .ok_or_else(|| Error::Config(format!("expected --key, found {flag:?}")))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_owned(), v.to_owned()));
            continue;
        }
        let value = it
            .next()
            .ok_or_else(|| Error::Config(format!("missing value for --{key}")))?;
        out.push((key.to_owned(), value.clone()));
    }
    Ok(out)
}
