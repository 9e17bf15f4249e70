//! Compressed sparse row matrices with deterministic summation order.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    /// Rows given as `(column, value)` lists. Columns are sorted, duplicates
    /// summed in input order, and explicit zeros dropped.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if j >= ncols {
                    return Err(Error::invalid(format!(
                        "row {i}: column {j} out of range for {ncols} columns"
                    )));
                }
                if last == Some(j) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    data.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        let mut m = Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        };
        m.prune_zeros();
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Self::from_rows(ncols, sparse).expect("dense rows are in range")
    }

    fn prune_zeros(&mut self) {
        if self.data.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        indptr.push(0);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                if v != 0.0 {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.data[range].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(k) => self.data[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates all stored `(row, col, value)` triples in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row_sum(i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    /// Column action `P·f`.
    pub fn mul_vec(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.ncols {
            return Err(Error::invalid(format!(
                "vector of length {} against {} columns",
                f.len(),
                self.ncols
            )));
        }
        Ok((0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * f[j]).sum())
            .collect())
    }

    /// Row action `μ·P`.
    pub fn vec_mul(&self, mu: &[f64]) -> Result<Vec<f64>> {
        if mu.len() != self.nrows {
            return Err(Error::invalid(format!(
                "row vector of length {} against {} rows",
                mu.len(),
                self.nrows
            )));
        }
        let mut out = vec![0.0; self.ncols];
        for (i, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += m * v;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for (i, j, v) in self.triplets() {
            let slot = next[j];
            indices[slot] = i;
            data[slot] = v;
            next[j] += 1;
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }

    /// Sparse product `self · rhs`; rows are computed independently, so the
    /// result does not depend on the thread count.
    pub fn matmul(&self, rhs: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != rhs.nrows {
            return Err(Error::invalid(format!(
                "shape mismatch: {}x{} times {}x{}",
                self.nrows, self.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let rows: Vec<Vec<(usize, f64)>> = (0..self.nrows)
            .into_par_iter()
            .map_init(
                || (vec![0.0; rhs.ncols], vec![false; rhs.ncols]),
                |(acc, seen), i| {
                    let mut touched = Vec::new();
                    for (k, a) in self.row(i) {
                        for (j, b) in rhs.row(k) {
                            if !seen[j] {
                                seen[j] = true;
                                touched.push(j);
                            }
                            acc[j] += a * b;
                        }
                    }
                    touched.sort_unstable();
                    let row = touched
                        .iter()
                        .map(|&j| {
                            let v = acc[j];
                            acc[j] = 0.0;
                            seen[j] = false;
                            (j, v)
                        })
                        .collect();
                    row
                },
            )
            .collect();
        CsrMatrix::from_rows(rhs.ncols, rows)
    }

    /// Restriction to the given rows and columns; `col_map[j]` is the new
    /// column of old column `j`, or `None` to drop it.
    pub fn select(&self, rows: &[usize], col_map: &[Option<usize>], ncols: usize) -> CsrMatrix {
        let out_rows = rows
            .iter()
            .map(|&i| {
                self.row(i)
                    .filter_map(|(j, v)| col_map[j].map(|c| (c, v)))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(ncols, out_rows).expect("column map stays in range")
    }

    /// `Σ wₖ·Aₖ` over matrices of equal shape, summed in the given order per entry.
    pub fn weighted_sum(parts: &[(f64, &CsrMatrix)]) -> Result<CsrMatrix> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::invalid("weighted sum of no matrices"));
        };
        let (nrows, ncols) = (first.nrows, first.ncols);
        if parts.iter().any(|(_, m)| m.nrows != nrows || m.ncols != ncols) {
            return Err(Error::invalid("weighted sum of matrices with different shapes"));
        }
        let rows = (0..nrows)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = Vec::new();
                for (w, m) in parts {
                    for (j, v) in m.row(i) {
                        row.push((j, w * v));
                    }
                }
                row
            })
            .collect();
        // from_rows sorts stably, so per-entry accumulation follows `parts` order
        CsrMatrix::from_rows(ncols, rows)
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}
