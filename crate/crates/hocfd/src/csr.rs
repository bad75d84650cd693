//! Minimal compressed-sparse-row matrix, enough for operator storage,
//! matvecs, and forming the time-stepping systems.

/// Sparse matrix in CSR layout with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entry lists. Entries must be sorted by column
    /// with no duplicates (assembly guarantees this).
    pub fn from_rows(n_cols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0), "unsorted row");
            for &(c, v) in row {
                debug_assert!(c < n_cols);
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            indptr: vec![0; n_rows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.data[lo..hi])
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for (i, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            *o = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// alpha * self + beta * other, merging sorted rows.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.n_rows);
        for i in 0..self.n_rows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let mut merged = Vec::with_capacity(ca.len() + cb.len());
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let next_a = ca.get(p).copied().unwrap_or(usize::MAX);
                let next_b = cb.get(q).copied().unwrap_or(usize::MAX);
                if next_a == next_b {
                    merged.push((next_a, alpha * va[p] + beta * vb[q]));
                    p += 1;
                    q += 1;
                } else if next_a < next_b {
                    merged.push((next_a, alpha * va[p]));
                    p += 1;
                } else {
                    merged.push((next_b, beta * vb[q]));
                    q += 1;
                }
            }
            rows.push(merged);
        }
        CsrMatrix::from_rows(self.n_cols, &rows)
    }

    /// Replaces the listed rows by unit diagonal rows.
    pub fn set_identity_rows(&mut self, mask: &[bool]) {
        assert_eq!(mask.len(), self.n_rows);
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.n_rows);
        for (i, &is_identity) in mask.iter().enumerate() {
            if is_identity {
                rows.push(vec![(i, 1.0)]);
            } else {
                let (c, v) = self.row(i);
                rows.push(c.iter().copied().zip(v.iter().copied()).collect());
            }
        }
        *self = CsrMatrix::from_rows(self.n_cols, &rows);
    }
}
