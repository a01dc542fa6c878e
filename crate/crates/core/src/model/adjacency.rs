use ndarray::Array2;
use rayon::prelude::*;

use crate::graph::Graph;

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Non-zeros of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.offsets[i]..self.offsets[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// `self * x`. Each output row is reduced in a fixed order, so the result
    /// is bitwise reproducible regardless of thread count.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let (n, d) = x.dim();
        assert_eq!(n, self.dim(), "operator and matrix disagree on row count");
        let mut out = vec![0.0; n * d];
        out.par_chunks_mut(d.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                for (j, a) in self.row(i) {
                    for (o, &xv) in row.iter_mut().zip(x.row(j)) {
                        *o += a * xv;
                    }
                }
            });
        Array2::from_shape_vec((n, d), out).unwrap()
    }

    /// Rows `rows` of `self * x`.
    pub fn apply_rows(&self, x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
        let d = x.ncols();
        let mut out = Array2::zeros((rows.len(), d));
        for (k, &i) in rows.iter().enumerate() {
            let mut o = out.row_mut(k);
            for (j, a) in self.row(i) {
                o.scaled_add(a, &x.row(j));
            }
        }
        out
    }

    /// `selfᵀ * y` where `y` holds only the rows listed in `rows` (all other rows zero).
    pub fn transpose_apply_rows(&self, y: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((self.dim(), y.ncols()));
        for (k, &i) in rows.iter().enumerate() {
            let yr = y.row(k);
            for (j, a) in self.row(i) {
                out.row_mut(j).scaled_add(a, &yr);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.dim();
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for (j, a) in self.row(i) {
                out[[i, j]] = a;
            }
        }
        out
    }
}

/// `D̃^(-1/2) (A + I) D̃^(-1/2)`, with `D̃` the degree matrix of `A + I`.
/// An existing self-loop is not counted twice: the diagonal of `A + I` is 1.
pub fn normalized_adjacency(graph: &Graph) -> SparseOperator {
    let n = graph.num_nodes();
    let degree: Vec<f64> = (0..n)
        .map(|u| {
            let loops = graph.neighbors(u).binary_search(&u).is_ok() as usize;
            (graph.degree(u) - loops + 1) as f64
        })
        .collect();
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();

    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    offsets.push(0);
    for u in 0..n {
        let mut diag_done = false;
        for &v in graph.neighbors(u) {
            if v > u && !diag_done {
                cols.push(u);
                vals.push(inv_sqrt[u] * inv_sqrt[u]);
                diag_done = true;
            }
            if v == u {
                diag_done = true;
            }
            cols.push(v);
            vals.push(inv_sqrt[u] * inv_sqrt[v]);
        }
        if !diag_done {
            cols.push(u);
            vals.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        offsets.push(cols.len());
    }
    SparseOperator {
        offsets,
        cols,
        vals,
    }
}
