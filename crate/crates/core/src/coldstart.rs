//! Library representatives and the aggregation operator that turns a short
//! list of known libraries into a project (state) vector.

use ndarray::{Array1, Array2, ArrayView1};

use crate::data::InteractionDataset;
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};

/// Similarity-weighted mean of the embeddings of a library's users, blended
/// with the library's own embedding:
/// `p_i = lambda * Σ y(u,i) e_u / Σ y(u,i) + (1 - lambda) * e_i`.
///
/// Similarities are clamped at zero; if every clamped weight is zero the
/// plain mean of the user embeddings is used instead.
pub fn representative(
    library: u32,
    table: &EmbeddingTable,
    users: &[u32],
    lambda: f64,
) -> Result<Array1<f64>> {
    if users.is_empty() {
        return Err(Error::InvalidInput(format!(
            "library {library} has no training interactions"
        )));
    }
    let e_i = table.library(library);
    if let ([u], 1.0) = (users, lambda) {
        // `y e_u / y` is not always bit-identical to `e_u`
        return Ok(table.project(*u).to_owned());
    }
    let mut weighted = Array1::<f64>::zeros(table.dim());
    let mut total = 0.0;
    for &u in users {
        let e_u = table.project(u);
        let y = e_u.dot(&e_i).max(0.0);
        weighted.scaled_add(y, &e_u);
        total += y;
    }
    let project_part = if total > 0.0 {
        weighted / total
    } else {
        let mut mean = Array1::<f64>::zeros(table.dim());
        for &u in users {
            mean += &table.project(u);
        }
        mean / users.len() as f64
    };
    if lambda == 1.0 {
        return Ok(project_part);
    }
    if lambda == 0.0 {
        return Ok(e_i.to_owned());
    }
    Ok(project_part * lambda + &e_i * (1.0 - lambda))
}

/// Precomputed representatives for every library that occurs in training.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeTable {
    reps: Array2<f64>,
    available: Vec<bool>,
    lambda: f64,
}

impl RepresentativeTable {
    pub fn build(table: &EmbeddingTable, train: &InteractionDataset, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        if table.n_projects() != train.n_projects() || table.n_libraries() != train.n_libraries() {
            return Err(Error::InvalidInput(format!(
                "embedding table is {}x{} but training data has {} projects and {} libraries",
                table.n_projects(),
                table.n_libraries(),
                train.n_projects(),
                train.n_libraries()
            )));
        }
        let users = train.library_users();
        let mut reps = Array2::zeros((table.n_libraries(), table.dim()));
        let mut available = vec![false; table.n_libraries()];
        for (i, us) in users.iter().enumerate() {
            if us.is_empty() {
                continue;
            }
            let p = representative(i as u32, table, us, lambda)?;
            reps.row_mut(i).assign(&p);
            available[i] = true;
        }
        Ok(Self {
            reps,
            available,
            lambda,
        })
    }

    pub fn from_parts(reps: Array2<f64>, available: Vec<bool>, lambda: f64) -> Self {
        assert_eq!(reps.nrows(), available.len());
        Self {
            reps,
            available,
            lambda,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.reps.ncols()
    }

    pub fn n_libraries(&self) -> usize {
        self.reps.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.reps
    }

    pub fn is_available(&self, library: u32) -> bool {
        self.available.get(library as usize).copied().unwrap_or(false)
    }

    pub fn availability(&self) -> &[bool] {
        &self.available
    }

    pub fn get(&self, library: u32) -> Option<ArrayView1<'_, f64>> {
        self.is_available(library).then(|| self.reps.row(library as usize))
    }

    /// Mean of the representatives of `libraries`.
    pub fn aggregate(&self, libraries: &[u32]) -> Result<Array1<f64>> {
        if libraries.is_empty() {
            return Err(Error::InvalidInput(
                "cannot aggregate an empty library set".into(),
            ));
        }
        let mut acc = Array1::<f64>::zeros(self.dim());
        for &l in libraries {
            let p = self.get(l).ok_or_else(|| {
                Error::InvalidInput(format!("library {l} has no representative"))
            })?;
            acc += &p;
        }
        Ok(acc / libraries.len() as f64)
    }
}

/// Running aggregate supporting O(d) insertion.
#[derive(Debug, Clone)]
pub struct Aggregator {
    sum: Array1<f64>,
    count: usize,
}

impl Aggregator {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: Array1::zeros(dim),
            count: 0,
        }
    }

    pub fn from_set(reps: &RepresentativeTable, libraries: &[u32]) -> Result<Self> {
        let mut agg = Self::new(reps.dim());
        for &l in libraries {
            agg.push(reps, l)?;
        }
        Ok(agg)
    }

    pub fn push(&mut self, reps: &RepresentativeTable, library: u32) -> Result<()> {
        let p = reps
            .get(library)
            .ok_or_else(|| Error::InvalidInput(format!("library {library} has no representative")))?;
        self.sum += &p;
        self.count += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn state(&self) -> Array1<f64> {
        &self.sum / self.count.max(1) as f64
    }
}
