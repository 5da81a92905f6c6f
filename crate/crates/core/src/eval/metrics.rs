use std::collections::HashSet;

use crate::data::PopularityTable;

/// Precision@K and Recall@K in percent for one project, or `None` when the
/// ground truth is empty. Lists longer than `k` are cut to `k`.
pub fn precision_recall_at_k(recommended: &[u32], truth: &[u32], k: usize) -> Option<(f64, f64)> {
    if truth.is_empty() || k == 0 {
        return None;
    }
    let hits = hit_count(&recommended[..recommended.len().min(k)], truth);
    Some((
        100.0 * hits as f64 / k as f64,
        100.0 * hits as f64 / truth.len() as f64,
    ))
}

fn hit_count(recommended: &[u32], truth: &[u32]) -> usize {
    let truth: HashSet<u32> = truth.iter().copied().collect();
    recommended.iter().filter(|l| truth.contains(l)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpcMode {
    /// Every hit counts equally.
    #[default]
    Unweighted,
    /// Hits at rank `r` (1-based) weigh `1 / log2(r + 1)`.
    RankDiscounted,
}

impl std::str::FromStr for EpcMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "unweighted" => Ok(Self::Unweighted),
            "rank-discounted" => Ok(Self::RankDiscounted),
            _ => Err(crate::Error::Config(format!("unknown EPC mode {s:?}"))),
        }
    }
}

impl EpcMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unweighted => "unweighted",
            Self::RankDiscounted => "rank-discounted",
        }
    }
}

/// Expected popularity complement in percent: the mean of `1 - rate` over
/// relevant recommended items, pooled across projects. Zero without hits.
pub fn epc_at_k(
    recommended: &[Vec<u32>],
    truth: &[Vec<u32>],
    pop: &PopularityTable,
    k: usize,
    mode: EpcMode,
) -> f64 {
    assert_eq!(recommended.len(), truth.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for (rec, t) in recommended.iter().zip(truth) {
        let t: HashSet<u32> = t.iter().copied().collect();
        for (rank, l) in rec.iter().take(k).enumerate() {
            if !t.contains(l) {
                continue;
            }
            let w = match mode {
                EpcMode::Unweighted => 1.0,
                EpcMode::RankDiscounted => 1.0 / ((rank + 2) as f64).log2(),
            };
            num += w * (1.0 - pop.rate(*l));
            den += w;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        100.0 * num / den
    }
}

/// Share of the catalogue (percent) that appears in at least one top-`k` list.
pub fn coverage_at_k(recommended: &[Vec<u32>], n_libraries: usize, k: usize) -> f64 {
    if n_libraries == 0 {
        return 0.0;
    }
    let distinct: HashSet<u32> = recommended.iter().flat_map(|r| r.iter().take(k)).copied().collect();
    100.0 * distinct.len() as f64 / n_libraries as f64
}

/// Expected Precision@K and Recall@K (percent) of a policy that picks `k`
/// libraries uniformly from `candidates`.
pub fn random_baseline(candidates: usize, truth_in_candidates: usize, truth: usize, k: usize) -> (f64, f64) {
    if candidates == 0 || truth == 0 || k == 0 {
        return (0.0, 0.0);
    }
    let picked = k.min(candidates) as f64;
    let hits = truth_in_candidates as f64 * picked / candidates as f64;
    (100.0 * hits / k as f64, 100.0 * hits / truth as f64)
}

/// The `k` most used training libraries outside `exclude`, most popular
/// first, ties to the lower index.
pub fn popularity_ranking(pop: &PopularityTable, exclude: &[u32], allowed: &[bool], k: usize) -> Vec<u32> {
    let exclude: HashSet<u32> = exclude.iter().copied().collect();
    let counts: Vec<f64> = pop.counts().iter().map(|&c| c as f64).collect();
    crate::rank::top_k(&counts, k, |i| allowed[i] && !exclude.contains(&(i as u32)))
}
