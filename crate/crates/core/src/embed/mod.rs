//! Collaborative embeddings over the project/library graph.
//!
//! Embeddings are propagated through the symmetrically normalised bipartite
//! adjacency (mean over layers, no weights or nonlinearity) and trained with
//! a popularity-attenuated sampled softmax. Rows are L2-normalised once
//! training has finished, so scoring reduces to a dot product.

mod graph;
mod loss;
mod train;

pub use graph::{build_adjacency, propagate, propagate_stacked, NormAdjacency};
pub use loss::{debiased_contrastive_loss, ContrastiveSample, LossOutput};
pub use train::{holdout_split, train_embeddings, EmbedConfig, EmbedReport};

use ndarray::{concatenate, s, Array2, ArrayView1, Axis};

/// Project rows and library rows sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub projects: Array2<f64>,
    pub libraries: Array2<f64>,
}

impl EmbeddingTable {
    pub fn new(projects: Array2<f64>, libraries: Array2<f64>) -> Self {
        assert_eq!(projects.ncols(), libraries.ncols(), "embedding dimensions differ");
        Self {
            projects,
            libraries,
        }
    }

    pub fn n_projects(&self) -> usize {
        self.projects.nrows()
    }

    pub fn n_libraries(&self) -> usize {
        self.libraries.nrows()
    }

    pub fn dim(&self) -> usize {
        self.projects.ncols()
    }

    pub fn project(&self, u: u32) -> ArrayView1<'_, f64> {
        self.projects.row(u as usize)
    }

    pub fn library(&self, i: u32) -> ArrayView1<'_, f64> {
        self.libraries.row(i as usize)
    }

    /// Vertex-ordered stack: projects first, then libraries.
    pub fn stacked(&self) -> Array2<f64> {
        concatenate(Axis(0), &[self.projects.view(), self.libraries.view()])
            .expect("matching column counts")
    }

    pub fn from_stacked(n_projects: usize, stacked: &Array2<f64>) -> Self {
        Self {
            projects: stacked.slice(s![..n_projects, ..]).to_owned(),
            libraries: stacked.slice(s![n_projects.., ..]).to_owned(),
        }
    }

    /// Scale every row to unit L2 norm. All-zero rows are left untouched.
    pub fn normalize(&mut self) {
        for mat in [&mut self.projects, &mut self.libraries] {
            for mut row in mat.rows_mut() {
                let norm = row.dot(&row).sqrt();
                if norm > 0.0 {
                    row /= norm;
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.projects.iter().chain(self.libraries.iter()).all(|v| v.is_finite())
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.projects
            .rows()
            .into_iter()
            .chain(self.libraries.rows())
            .map(|r| (r.dot(&r).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Dot-product score of every library for a given project row.
    pub fn scores_for(&self, u: u32) -> Vec<f64> {
        self.libraries.dot(&self.project(u)).to_vec()
    }
}

/// Similarity of two unit-norm rows.
pub fn score(u: ArrayView1<'_, f64>, i: ArrayView1<'_, f64>) -> f64 {
    u.dot(&i)
}
