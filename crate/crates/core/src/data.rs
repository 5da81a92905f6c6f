//! Interaction records, popularity statistics and the split protocols.
//!
//! Projects play the role of users and libraries the role of items. All
//! identifiers are interned to dense `u32` indices in first-appearance
//! order, so index-aligned tables (embeddings, representatives, Q-heads)
//! can be shared between a dataset and any project subset derived from it.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Bipartite project/library usage records.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    projects: Vec<String>,
    libraries: Vec<String>,
    library_lookup: HashMap<String, u32>,
    /// Sorted, deduplicated library indices per project.
    by_project: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestStats {
    pub records: usize,
    pub duplicates: usize,
}

impl InteractionDataset {
    /// Parse `<project-id>\t<library-id>` lines. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn ingest<R: BufRead>(source: R) -> Result<(Self, IngestStats)> {
        let mut builder = Builder::default();
        let mut stats = IngestStats::default();
        for (lineno, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (project, library) = match (fields.next(), fields.next(), fields.next()) {
                (Some(p), Some(l), None) if !p.trim().is_empty() && !l.trim().is_empty() => {
                    (p.trim(), l.trim())
                }
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected `<project>\\t<library>`, got {line:?}"),
                    })
                }
            };
            stats.records += 1;
            if !builder.add(project, library) {
                stats.duplicates += 1;
            }
        }
        Ok((builder.finish()?, stats))
    }

    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut builder = Builder::default();
        for (p, l) in pairs {
            builder.add(p, l);
        }
        builder.finish()
    }

    /// Build from already-interned data. Lists may be unsorted and contain
    /// duplicates; projects without interactions are rejected.
    pub fn from_lists(
        projects: Vec<String>,
        libraries: Vec<String>,
        lists: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if projects.len() != lists.len() {
            return Err(Error::InvalidInput(format!(
                "{} project ids but {} interaction lists",
                projects.len(),
                lists.len()
            )));
        }
        let m = libraries.len() as u32;
        let mut by_project = Vec::with_capacity(lists.len());
        for (p, mut list) in lists.into_iter().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "project {:?} has no interactions",
                    projects[p]
                )));
            }
            if let Some(&bad) = list.iter().find(|&&l| l >= m) {
                return Err(Error::InvalidInput(format!(
                    "library index {bad} out of range (M = {m})"
                )));
            }
            by_project.push(list);
        }
        if by_project.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let library_lookup = libraries
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Ok(Self {
            projects,
            libraries,
            library_lookup,
            by_project,
        })
    }

    pub fn n_projects(&self) -> usize {
        self.projects.len()
    }

    pub fn n_libraries(&self) -> usize {
        self.libraries.len()
    }

    pub fn n_interactions(&self) -> usize {
        self.by_project.iter().map(Vec::len).sum()
    }

    pub fn project_id(&self, p: u32) -> &str {
        &self.projects[p as usize]
    }

    pub fn library_id(&self, i: u32) -> &str {
        &self.libraries[i as usize]
    }

    pub fn project_ids(&self) -> &[String] {
        &self.projects
    }

    pub fn library_ids(&self) -> &[String] {
        &self.libraries
    }

    pub fn library_index(&self, id: &str) -> Option<u32> {
        self.library_lookup.get(id).copied()
    }

    /// Sorted library indices used by project `p`.
    pub fn libraries_of(&self, p: u32) -> &[u32] {
        &self.by_project[p as usize]
    }

    pub fn uses(&self, p: u32, library: u32) -> bool {
        self.by_project[p as usize].binary_search(&library).is_ok()
    }

    /// Every `(project, library)` edge, grouped by project.
    pub fn interactions(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.by_project
            .iter()
            .enumerate()
            .flat_map(|(p, libs)| libs.iter().map(move |&l| (p as u32, l)))
    }

    /// Projects that used each library (the per-library user sets).
    pub fn library_users(&self) -> Vec<Vec<u32>> {
        let mut users = vec![Vec::new(); self.n_libraries()];
        for (p, l) in self.interactions() {
            users[l as usize].push(p);
        }
        users
    }

    /// Restrict to a subset of projects. The library catalogue is kept whole
    /// so library indices stay aligned with the parent dataset.
    pub fn subset_projects(&self, projects: &[u32]) -> Self {
        Self {
            projects: projects
                .iter()
                .map(|&p| self.projects[p as usize].clone())
                .collect(),
            libraries: self.libraries.clone(),
            library_lookup: self.library_lookup.clone(),
            by_project: projects
                .iter()
                .map(|&p| self.by_project[p as usize].clone())
                .collect(),
        }
    }

    /// Same project and library catalogue with per-project lists replaced.
    /// Projects whose replacement list is empty are dropped; the returned
    /// vector maps new project indices back to the originals.
    pub fn with_lists(&self, lists: &[Vec<u32>]) -> (Self, Vec<u32>) {
        let kept: Vec<u32> = (0..self.n_projects() as u32)
            .filter(|&p| !lists[p as usize].is_empty())
            .collect();
        let ds = Self {
            projects: kept
                .iter()
                .map(|&p| self.projects[p as usize].clone())
                .collect(),
            libraries: self.libraries.clone(),
            library_lookup: self.library_lookup.clone(),
            by_project: kept
                .iter()
                .map(|&p| {
                    let mut l = lists[p as usize].clone();
                    l.sort_unstable();
                    l.dedup();
                    l
                })
                .collect(),
        };
        (ds, kept)
    }

    /// Libraries with at least one interaction in this dataset.
    pub fn seen_libraries(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n_libraries()];
        for (_, l) in self.interactions() {
            seen[l as usize] = true;
        }
        seen
    }
}

#[derive(Default)]
struct Builder {
    projects: Vec<String>,
    project_lookup: HashMap<String, u32>,
    libraries: Vec<String>,
    library_lookup: HashMap<String, u32>,
    lists: Vec<BTreeSet<u32>>,
}

impl Builder {
    fn add(&mut self, project: &str, library: &str) -> bool {
        let p = intern(&mut self.projects, &mut self.project_lookup, project);
        let l = intern(&mut self.libraries, &mut self.library_lookup, library);
        if p as usize == self.lists.len() {
            self.lists.push(BTreeSet::new());
        }
        self.lists[p as usize].insert(l)
    }

    fn finish(self) -> Result<InteractionDataset> {
        if self.lists.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(InteractionDataset {
            projects: self.projects,
            libraries: self.libraries,
            library_lookup: self.library_lookup,
            by_project: self
                .lists
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
        })
    }
}

fn intern(ids: &mut Vec<String>, lookup: &mut HashMap<String, u32>, id: &str) -> u32 {
    if let Some(&i) = lookup.get(id) {
        return i;
    }
    let i = ids.len() as u32;
    ids.push(id.to_owned());
    lookup.insert(id.to_owned(), i);
    i
}

pub const RARE_THRESHOLD: f64 = 0.1;
pub const POPULAR_THRESHOLD: f64 = 0.9;

/// Per-library usage counts and rates over a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityTable {
    counts: Vec<u32>,
    n_projects: usize,
    rare_threshold: f64,
    popular_threshold: f64,
}

impl PopularityTable {
    pub fn from_dataset(train: &InteractionDataset) -> Self {
        let mut counts = vec![0u32; train.n_libraries()];
        for (_, l) in train.interactions() {
            counts[l as usize] += 1;
        }
        Self {
            counts,
            n_projects: train.n_projects(),
            rare_threshold: RARE_THRESHOLD,
            popular_threshold: POPULAR_THRESHOLD,
        }
    }

    pub fn with_thresholds(mut self, rare: f64, popular: f64) -> Self {
        self.rare_threshold = rare;
        self.popular_threshold = popular;
        self
    }

    pub fn count(&self, library: u32) -> u32 {
        self.counts[library as usize]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn n_projects(&self) -> usize {
        self.n_projects
    }

    pub fn n_libraries(&self) -> usize {
        self.counts.len()
    }

    pub fn rate(&self, library: u32) -> f64 {
        self.counts[library as usize] as f64 / self.n_projects as f64
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.counts.len() as u32).map(|l| self.rate(l)).collect()
    }

    pub fn is_rare(&self, library: u32) -> bool {
        self.rate(library) < self.rare_threshold
    }

    pub fn is_popular(&self, library: u32) -> bool {
        self.rate(library) > self.popular_threshold
    }

    /// Library indices ordered by descending count, ties by index.
    pub fn ranked(&self) -> Vec<u32> {
        let mut idx: Vec<u32> = (0..self.counts.len() as u32).collect();
        idx.sort_by(|&a, &b| self.counts[b as usize].cmp(&self.counts[a as usize]).then(a.cmp(&b)));
        idx
    }
}

/// Convenience wrapper matching the operation name used by the protocols.
pub fn popularity(train: &InteractionDataset) -> PopularityTable {
    PopularityTable::from_dataset(train)
}

/// Histogram of libraries by interaction count: `(count, number of libraries)`.
pub fn long_tail_histogram(ds: &InteractionDataset) -> Vec<(u32, usize)> {
    let pop = PopularityTable::from_dataset(ds);
    let mut hist = std::collections::BTreeMap::new();
    for &c in pop.counts() {
        *hist.entry(c).or_insert(0usize) += 1;
    }
    hist.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    UserSplit,
    InteractionSplit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub query_fraction: f64,
    pub fold_count: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.query_fraction > 0.0 && self.query_fraction < 1.0) {
            return Err(Error::Config(format!(
                "query fraction must lie in (0, 1), got {}",
                self.query_fraction
            )));
        }
        if self.fold_count < 2 {
            return Err(Error::Config(format!(
                "fold count must be at least 2, got {}",
                self.fold_count
            )));
        }
        Ok(())
    }
}

/// A held-out project with its ground truth restricted to libraries that
/// occur in the fold's training projects.
#[derive(Debug, Clone, PartialEq)]
pub struct TestProject {
    pub project: u32,
    pub libraries: Vec<u32>,
    /// Libraries removed because no training project uses them.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserFold {
    pub fold: usize,
    pub train: Vec<u32>,
    pub test: Vec<TestProject>,
}

/// Partition projects into `fold_count` disjoint test groups.
pub fn split_users(ds: &InteractionDataset, spec: &SplitSpec) -> Result<Vec<UserFold>> {
    if spec.mode != SplitMode::UserSplit {
        return Err(Error::Split("split_users requires user-split mode".into()));
    }
    spec.validate()?;
    let n = ds.n_projects();
    if spec.fold_count > n {
        return Err(Error::Split(format!(
            "{} folds requested but only {n} projects",
            spec.fold_count
        )));
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng::seeded(rng::mix(spec.seed, 0x5011_7000)));
    let mut assignment = vec![0usize; n];
    for (pos, &p) in order.iter().enumerate() {
        assignment[p as usize] = pos % spec.fold_count;
    }

    let mut folds = Vec::with_capacity(spec.fold_count);
    for fold in 0..spec.fold_count {
        let (test_ids, train): (Vec<u32>, Vec<u32>) =
            (0..n as u32).partition(|&p| assignment[p as usize] == fold);
        let mut seen = vec![false; ds.n_libraries()];
        for &p in &train {
            for &l in ds.libraries_of(p) {
                seen[l as usize] = true;
            }
        }
        let test = test_ids
            .into_iter()
            .map(|p| {
                let all = ds.libraries_of(p);
                let libraries: Vec<u32> = all.iter().copied().filter(|&l| seen[l as usize]).collect();
                TestProject {
                    project: p,
                    dropped: all.len() - libraries.len(),
                    libraries,
                }
            })
            .collect();
        folds.push(UserFold { fold, train, test });
    }
    Ok(folds)
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Split one project's libraries into a query set and a held-out test set.
///
/// Returns `Ok(None)` when the project has fewer than two libraries. The
/// query set has `max(1, round(fraction * n))` members, capped at `n - 1`.
pub fn split_query_test(
    libraries: &[u32],
    query_fraction: f64,
    seed: u64,
) -> Result<Option<(Vec<u32>, Vec<u32>)>> {
    if !(query_fraction > 0.0 && query_fraction < 1.0) {
        return Err(Error::Split(format!(
            "query fraction must lie in (0, 1), got {query_fraction}"
        )));
    }
    let n = libraries.len();
    if n < 2 {
        log::warn!("project with {n} usable interaction(s) cannot form query and test sets; skipped");
        return Ok(None);
    }
    let q = round_half_up(query_fraction * n as f64).clamp(1, n - 1);
    let mut shuffled = libraries.to_vec();
    shuffled.shuffle(&mut rng::seeded(seed));
    let mut query = shuffled[..q].to_vec();
    let mut test = shuffled[q..].to_vec();
    query.sort_unstable();
    test.sort_unstable();
    Ok(Some((query, test)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSplit {
    pub project: u32,
    pub train: Vec<u32>,
    pub test: Vec<u32>,
}

/// Split every project's history into disjoint train and test parts.
/// Single-interaction projects keep their interaction in train and get an
/// empty test part.
pub fn split_interactions(
    ds: &InteractionDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<Vec<InteractionSplit>> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut out = Vec::with_capacity(ds.n_projects());
    for p in 0..ds.n_projects() as u32 {
        let libs = ds.libraries_of(p);
        let n = libs.len();
        if n == 1 {
            out.push(InteractionSplit {
                project: p,
                train: libs.to_vec(),
                test: Vec::new(),
            });
            continue;
        }
        let k = round_half_up(train_fraction * n as f64).clamp(1, n - 1);
        let mut shuffled = libs.to_vec();
        shuffled.shuffle(&mut rng::seeded(rng::mix(seed, p as u64)));
        let mut train = shuffled[..k].to_vec();
        let mut test = shuffled[k..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        out.push(InteractionSplit {
            project: p,
            train,
            test,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Query,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Query => "query",
            Role::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Role::Train),
            "query" => Some(Role::Query),
            "test" => Some(Role::Test),
            _ => None,
        }
    }
}

/// One line of a split manifest: a project's libraries under a given role.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub fold: usize,
    pub role: Role,
    pub project: String,
    pub libraries: Vec<String>,
}

/// Write rows as `fold\trole\tproject\tlib1\tlib2...`.
pub fn write_manifest<W: Write>(mut out: W, rows: &[ManifestRow]) -> Result<()> {
    for row in rows {
        write!(out, "{}\t{}\t{}", row.fold, row.role.as_str(), row.project)?;
        for l in &row.libraries {
            write!(out, "\t{l}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(source: R) -> Result<Vec<ManifestRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: lineno + 1,
            msg: msg.to_owned(),
        };
        let mut fields = line.split('\t');
        let fold = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad("bad fold number"))?;
        let role = fields
            .next()
            .and_then(Role::parse)
            .ok_or_else(|| bad("bad role"))?;
        let project = fields.next().ok_or_else(|| bad("missing project"))?.to_owned();
        rows.push(ManifestRow {
            fold,
            role,
            project,
            libraries: fields.map(str::to_owned).collect(),
        });
    }
    Ok(rows)
}
