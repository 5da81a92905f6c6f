use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::coldstart::{Aggregator, RepresentativeTable};
use crate::embed::EmbeddingTable;
use crate::error::Result;

/// One experience tuple generated from a training project's history.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub project: u32,
    pub state: Array1<f64>,
    pub action: u32,
    pub reward: f64,
    pub next_state: Array1<f64>,
    pub terminal: bool,
}

/// `1 + e_a · s`. Lies in `[0, 2]` when `e_a` is unit-norm and `‖s‖ ≤ 1`.
pub fn reward(state: ArrayView1<'_, f64>, action: u32, table: &EmbeddingTable) -> f64 {
    1.0 + table.library(action).dot(&state)
}

/// Sample a transition from a project's library set: a nonempty proper
/// subset as the known set, one of the remaining libraries as the action.
/// The subset size is uniform on `1..n`, its contents uniform given the size.
///
/// Returns `Ok(None)` when fewer than two libraries are available.
pub fn gen_transition<R: Rng>(
    project: u32,
    libraries: &[u32],
    table: &EmbeddingTable,
    reps: &RepresentativeTable,
    rng: &mut R,
) -> Result<Option<Transition>> {
    let Some((known, action)) = sample_known_and_action(libraries, rng) else {
        return Ok(None);
    };
    let size = known.len();
    let n = libraries.len();

    let mut agg = Aggregator::from_set(reps, &known)?;
    let state = agg.state();
    let r = reward(state.view(), action, table);
    agg.push(reps, action)?;
    Ok(Some(Transition {
        project,
        reward: r,
        action,
        next_state: agg.state(),
        state,
        terminal: size + 1 == n,
    }))
}

/// The known set and action drawn by [`gen_transition`].
pub fn sample_known_and_action<R: Rng>(libraries: &[u32], rng: &mut R) -> Option<(Vec<u32>, u32)> {
    let n = libraries.len();
    if n < 2 {
        return None;
    }
    let size = rng.random_range(1..n);
    let mut pool = libraries.to_vec();
    let (picked, _) = pool.partial_shuffle(rng, size + 1);
    Some((picked[..size].to_vec(), picked[size]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::InteractionDataset;
    use crate::rng;
    use ndarray::array;
    use std::collections::HashSet;

    fn fixture() -> (EmbeddingTable, RepresentativeTable, InteractionDataset) {
        let ds = InteractionDataset::from_lists(
            vec!["p".into()],
            (0..5).map(|i| format!("l{i}")).collect(),
            vec![vec![0, 1, 2, 3, 4]],
        )
        .unwrap();
        let table = EmbeddingTable::new(
            array![[1.0, 0.0]],
            array![[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [0.8, 0.6], [-1.0, 0.0]],
        );
        let reps = RepresentativeTable::build(&table, &ds, 0.5).unwrap();
        (table, reps, ds)
    }

    #[test]
    fn reward_endpoints() {
        let (table, _, _) = fixture();
        assert_eq!(reward(array![0.0, 1.0].view(), 0, &table), 1.0);
        assert_eq!(reward(array![1.0, 0.0].view(), 0, &table), 2.0);
    }

    #[test]
    fn two_library_project_is_forced_and_terminal() {
        let (table, reps, _) = fixture();
        let mut r = rng::seeded(0);
        for _ in 0..20 {
            let t = gen_transition(7, &[1, 3], &table, &reps, &mut r).unwrap().unwrap();
            assert!(t.terminal);
            let known = if t.action == 1 { 3 } else { 1 };
            assert_eq!(t.state, reps.get(known).unwrap().to_owned());
            assert_eq!(t.next_state, reps.aggregate(&[1, 3]).unwrap());
        }
        assert!(gen_transition(7, &[2], &table, &reps, &mut r).unwrap().is_none());
    }

    #[test]
    fn action_never_in_known_set() {
        let mut r = rng::seeded(4);
        let libs = [0, 1, 2, 3, 4];
        for _ in 0..2000 {
            let (known, action) = sample_known_and_action(&libs, &mut r).unwrap();
            assert!(!known.contains(&action));
            assert!(!known.is_empty() && known.len() < libs.len());
        }
    }

    #[test]
    fn every_size_action_combination_appears() {
        let mut r = rng::seeded(12);
        let libs = [0, 1, 2, 3, 4];
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let (known, action) = sample_known_and_action(&libs, &mut r).unwrap();
            seen.insert((known.len(), action));
        }
        // sizes 1..=4 times 5 actions
        assert_eq!(seen.len(), 20);
    }

    #[test]
    fn transition_matches_its_parts() {
        let (table, reps, ds) = fixture();
        let mut r = rng::seeded(9);
        for _ in 0..200 {
            let t = gen_transition(0, ds.libraries_of(0), &table, &reps, &mut r).unwrap().unwrap();
            assert!((0.0..=2.0).contains(&t.reward));
            assert!((t.reward - reward(t.state.view(), t.action, &table)).abs() < 1e-15);
        }
    }
}
