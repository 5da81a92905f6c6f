use std::collections::HashSet;

use super::qnet::QNetwork;
use crate::coldstart::{Aggregator, RepresentativeTable};
use crate::error::{Error, Result};
use crate::rank::{argmax, top_k};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecommendMode {
    /// Roll the policy forward: each pick joins the known set before the
    /// next state is built.
    #[default]
    Sequential,
    /// Rank once from the query state.
    OneShot,
}

impl std::str::FromStr for RecommendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Self::Sequential),
            "one-shot" | "oneshot" => Ok(Self::OneShot),
            _ => Err(Error::Config(format!("unknown recommend mode {s:?}"))),
        }
    }
}

impl RecommendMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sequential => "sequential",
            Self::OneShot => "one-shot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub library: u32,
    pub q_value: f64,
}

/// Greedy top-`k` libraries for a query set. Query members, earlier picks
/// and libraries without a representative are never returned; ties go to
/// the lower library index. The list is shorter than `k` when the catalogue
/// runs out.
pub fn recommend(
    query: &[u32],
    k: usize,
    net: &QNetwork,
    reps: &RepresentativeTable,
    mode: RecommendMode,
) -> Result<Vec<Recommendation>> {
    if query.is_empty() {
        return Err(Error::InvalidInput("query set is empty".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut blocked: HashSet<u32> = query.iter().copied().collect();
    let candidates = (0..net.n_actions() as u32)
        .filter(|l| reps.is_available(*l) && !blocked.contains(l))
        .count();
    if k > candidates {
        log::warn!("requested {k} recommendations but only {candidates} candidates remain");
    }
    let mut agg = Aggregator::from_set(reps, query)?;

    match mode {
        RecommendMode::OneShot => {
            let q = net.q_values(agg.state().view());
            Ok(top_k(&q, k, |i| reps.is_available(i as u32) && !blocked.contains(&(i as u32)))
                .into_iter()
                .map(|library| Recommendation {
                    library,
                    q_value: q[library as usize],
                })
                .collect())
        }
        RecommendMode::Sequential => {
            let mut out = Vec::with_capacity(k.min(candidates));
            for _ in 0..k {
                let q = net.q_values(agg.state().view());
                let Some(pick) = argmax(&q, |i| reps.is_available(i as u32) && !blocked.contains(&(i as u32))) else {
                    break;
                };
                out.push(Recommendation {
                    library: pick,
                    q_value: q[pick as usize],
                });
                blocked.insert(pick);
                agg.push(reps, pick)?;
            }
            Ok(out)
        }
    }
}
