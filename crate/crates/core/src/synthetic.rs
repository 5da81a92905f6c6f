//! Seeded synthetic interaction generators used by the tests, the
//! acceptance suite and the Python smoke test.

use rand::seq::index;
use rand::Rng;

use crate::data::InteractionDataset;
use crate::rng;

fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    (0..n).map(|r| 1.0 / ((r + 1) as f64).powf(exponent)).collect()
}

fn build(n_projects: usize, n_libraries: usize, lists: Vec<Vec<u32>>) -> InteractionDataset {
    InteractionDataset::from_lists(
        (0..n_projects).map(|p| format!("proj{p}")).collect(),
        (0..n_libraries).map(|l| format!("lib{l}")).collect(),
        lists,
    )
    .expect("generator produces valid lists")
}

/// Projects each draw `per_project` libraries from a global Zipf(1) law.
pub fn long_tail(n_projects: usize, n_libraries: usize, per_project: usize, seed: u64) -> InteractionDataset {
    let mut rng = rng::seeded(seed);
    let w = zipf_weights(n_libraries, 1.0);
    let k = per_project.min(n_libraries);
    let lists = (0..n_projects)
        .map(|_| {
            index::sample_weighted(&mut rng, n_libraries, |i| w[i], k)
                .expect("positive weights")
                .into_iter()
                .map(|i| i as u32)
                .collect()
        })
        .collect();
    build(n_projects, n_libraries, lists)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub projects: usize,
    pub libraries: usize,
    pub communities: usize,
    pub per_project: usize,
    /// Fraction of each project's libraries drawn from other communities.
    pub noise: f64,
    /// Zipf exponent of library popularity inside a community.
    pub skew: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            projects: 200,
            libraries: 200,
            communities: 4,
            per_project: 20,
            noise: 0.1,
            skew: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Planted {
    pub dataset: InteractionDataset,
    pub project_community: Vec<usize>,
    pub library_community: Vec<usize>,
}

/// Planted-partition data: projects and libraries are split into equal
/// contiguous communities and projects mostly use their own community's
/// libraries.
pub fn planted(cfg: &PlantedConfig, seed: u64) -> Planted {
    let mut rng = rng::seeded(seed);
    let c = cfg.communities.max(1);
    let project_community: Vec<usize> = (0..cfg.projects).map(|p| p * c / cfg.projects).collect();
    let library_community: Vec<usize> = (0..cfg.libraries).map(|l| l * c / cfg.libraries).collect();
    let members: Vec<Vec<u32>> = (0..c)
        .map(|k| {
            (0..cfg.libraries as u32)
                .filter(|&l| library_community[l as usize] == k)
                .collect()
        })
        .collect();

    let noisy = (cfg.noise * cfg.per_project as f64).round() as usize;
    let lists = project_community
        .iter()
        .map(|&k| {
            let own = &members[k];
            let inside = (cfg.per_project - noisy).min(own.len());
            let w = zipf_weights(own.len(), cfg.skew);
            let mut list: Vec<u32> = index::sample_weighted(&mut rng, own.len(), |i| w[i], inside)
                .expect("positive weights")
                .into_iter()
                .map(|i| own[i])
                .collect();
            let outside: Vec<u32> = (0..cfg.libraries as u32)
                .filter(|&l| library_community[l as usize] != k)
                .collect();
            let extra = noisy.min(outside.len());
            list.extend(
                index::sample(&mut rng, outside.len(), extra)
                    .into_iter()
                    .map(|i| outside[i]),
            );
            list
        })
        .collect();
    Planted {
        dataset: build(cfg.projects, cfg.libraries, lists),
        project_community,
        library_community,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadTailConfig {
    pub projects: usize,
    pub head: usize,
    pub tail: usize,
    /// Probability that a project uses any given head library.
    pub head_usage: f64,
    pub communities: usize,
    pub tail_per_project: usize,
    pub tail_skew: f64,
}

impl Default for HeadTailConfig {
    fn default() -> Self {
        Self {
            projects: 200,
            head: 20,
            tail: 180,
            head_usage: 0.6,
            communities: 4,
            tail_per_project: 8,
            tail_skew: 0.5,
        }
    }
}

/// A small set of head libraries used by most projects plus a long tail
/// organised in communities. Head libraries occupy indices `0..head`.
pub fn head_tail(cfg: &HeadTailConfig, seed: u64) -> InteractionDataset {
    let mut rng = rng::seeded(seed);
    let c = cfg.communities.max(1);
    let tail_members: Vec<Vec<u32>> = (0..c)
        .map(|k| {
            (0..cfg.tail)
                .filter(|t| t * c / cfg.tail == k)
                .map(|t| (cfg.head + t) as u32)
                .collect()
        })
        .collect();
    let lists = (0..cfg.projects)
        .map(|p| {
            let k = p * c / cfg.projects;
            let mut list: Vec<u32> = (0..cfg.head as u32)
                .filter(|_| rng.random::<f64>() < cfg.head_usage)
                .collect();
            let own = &tail_members[k];
            let w = zipf_weights(own.len(), cfg.tail_skew);
            let take = cfg.tail_per_project.min(own.len());
            list.extend(
                index::sample_weighted(&mut rng, own.len(), |i| w[i], take)
                    .expect("positive weights")
                    .into_iter()
                    .map(|i| own[i]),
            );
            list
        })
        .collect();
    build(cfg.projects, cfg.head + cfg.tail, lists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::popularity;

    #[test]
    fn planted_shape() {
        let p = planted(&PlantedConfig::default(), 1);
        assert_eq!(p.dataset.n_projects(), 200);
        assert_eq!(p.dataset.n_libraries(), 200);
        for u in 0..200u32 {
            let libs = p.dataset.libraries_of(u);
            assert_eq!(libs.len(), 20);
            let cross = libs
                .iter()
                .filter(|&&l| p.library_community[l as usize] != p.project_community[u as usize])
                .count();
            assert_eq!(cross, 2);
        }
    }

    #[test]
    fn head_tail_rates() {
        let ds = head_tail(&HeadTailConfig::default(), 4);
        let pop = popularity(&ds);
        for h in 0..20 {
            assert!(pop.rate(h) > 0.5, "head {h} rate {}", pop.rate(h));
        }
        let rare = (20..200).filter(|&t| pop.is_rare(t)).count();
        assert!(rare > 150, "only {rare} rare tail libraries");
    }
}
