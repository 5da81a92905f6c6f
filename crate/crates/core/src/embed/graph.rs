use ndarray::{Array2, Zip};

use super::EmbeddingTable;
use crate::data::InteractionDataset;

/// Symmetrically normalised adjacency of the project/library graph in CSR
/// form. Vertices `0..N` are projects and `N..N+M` are libraries.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdjacency {
    n_projects: usize,
    n_libraries: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// One entry pair `1 / sqrt(deg(u) * deg(i))` per interaction.
pub fn build_adjacency(ds: &InteractionDataset) -> NormAdjacency {
    let n = ds.n_projects();
    let m = ds.n_libraries();
    let mut lib_deg = vec![0usize; m];
    for (_, l) in ds.interactions() {
        lib_deg[l as usize] += 1;
    }

    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n + m];
    for p in 0..n as u32 {
        let libs = ds.libraries_of(p);
        let dp = libs.len() as f64;
        for &l in libs {
            let w = 1.0 / (dp * lib_deg[l as usize] as f64).sqrt();
            rows[p as usize].push((n as u32 + l, w));
            rows[n + l as usize].push((p, w));
        }
    }

    let mut row_ptr = Vec::with_capacity(n + m + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for mut row in rows {
        row.sort_unstable_by_key(|&(c, _)| c);
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    NormAdjacency {
        n_projects: n,
        n_libraries: m,
        row_ptr,
        cols,
        vals,
    }
}

impl NormAdjacency {
    pub fn n_vertices(&self) -> usize {
        self.n_projects + self.n_libraries
    }

    pub fn n_projects(&self) -> usize {
        self.n_projects
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[span.clone()].binary_search(&(col as u32)) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let v = self.n_vertices();
        let mut out = Array2::zeros((v, v));
        for r in 0..v {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[[r, self.cols[k] as usize]] = self.vals[k];
            }
        }
        out
    }

    /// Sparse-dense product `Â · x`.
    pub fn mul(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n_vertices());
        let mut out = Array2::zeros(x.raw_dim());
        for (r, mut out_row) in out.rows_mut().into_iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let w = self.vals[k];
                Zip::from(&mut out_row)
                    .and(&x.row(self.cols[k] as usize))
                    .for_each(|o, &v| *o += w * v);
            }
        }
        out
    }
}

/// Layer-mean propagation on a vertex-ordered stack of embeddings.
///
/// The operator `(1/(L+1)) Σ_k Â^k` is symmetric, so the same call also
/// back-propagates gradients from output rows to input rows.
pub fn propagate_stacked(adj: &NormAdjacency, e0: &Array2<f64>, layers: usize) -> Array2<f64> {
    let mut acc = e0.clone();
    let mut cur = e0.clone();
    for _ in 0..layers {
        cur = adj.mul(&cur);
        acc += &cur;
    }
    acc / (layers + 1) as f64
}

pub fn propagate(adj: &NormAdjacency, e0: &EmbeddingTable, layers: usize) -> EmbeddingTable {
    assert_eq!(e0.n_projects(), adj.n_projects);
    assert_eq!(e0.n_libraries(), adj.n_libraries);
    let out = propagate_stacked(adj, &e0.stacked(), layers);
    EmbeddingTable::from_stacked(adj.n_projects, &out)
}
