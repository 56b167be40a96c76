use serde::{Deserialize, Serialize};

/// Compressed sparse row matrix. Duplicate triplets are summed on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Panics if an index is out of range.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for r in 0..nrows {
            counts[r + 1] += counts[r];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let p = next[r];
            cols[p] = c;
            vals[p] = v;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|p| (cols[p], vals[p])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|r| {
                let (c, v) = self.row(r);
                c.iter().zip(v).map(move |(&c, &v)| (r, c, v))
            })
            .collect()
    }

    /// `out = self * x`
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for (r, o) in out.iter_mut().enumerate().take(self.nrows) {
            let (c, v) = self.row(r);
            *o = c.iter().zip(v).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `out = self^T * y`
    pub fn mul_transpose_vec(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.nrows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let (c, v) = self.row(r);
            for (&c, &v) in c.iter().zip(v) {
                out[c] += v * yr;
            }
        }
    }

    /// Scales entry `(r, c)` by `row_scale[r] * col_scale[c]`.
    pub fn scale(&mut self, row_scale: &[f64], col_scale: &[f64]) {
        for r in 0..self.nrows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                self.values[p] *= row_scale[r] * col_scale[self.indices[p]];
            }
        }
    }

    /// Infinity norm of each row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect()
    }

    /// Infinity norm of each column.
    pub fn col_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0_f64; self.ncols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            out[c] = out[c].max(v.abs());
        }
        out
    }
}
