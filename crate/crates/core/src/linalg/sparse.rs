use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed-sparse-row matrix.
///
/// Column indices are strictly increasing within a row and no explicit
/// zeros are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed on finalization.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut k = 0;
        for i in 0..self.nrows {
            while k < self.entries.len() && self.entries[k].0 == i {
                let j = self.entries[k].1;
                let mut v = 0.0;
                while k < self.entries.len() && self.entries[k].0 == i && self.entries[k].1 == j {
                    v += self.entries[k].2;
                    k += 1;
                }
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::new(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            b.push(i, i, v);
        }
        b.build()
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut b = TripletBuilder::new(a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                b.push(i, j, a[(i, j)]);
            }
        }
        b.build()
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterator over `(col, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "csr matvec: x has wrong length");
        assert_eq!(y.len(), self.nrows, "csr matvec: y has wrong length");
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `y += c * A x`.
    pub fn mul_vec_add(&self, c: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi += c * s;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        let mut s = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let mut r = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.values[k] * y[self.col_idx[k]];
            }
            s += xi * r;
        }
        s
    }

    /// Product with a dense matrix, column by column.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.ncols);
        let mut out = DMatrix::zeros(self.nrows, b.ncols());
        for j in 0..b.ncols() {
            let x = b.column(j);
            let mut col = out.column_mut(j);
            for i in 0..self.nrows {
                let mut s = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.values[k] * x[self.col_idx[k]];
                }
                col[i] = s;
            }
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let dst = next[j];
                col_idx[dst] = i;
                values[dst] = self.values[k];
                next[j] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn scaled(&self, c: f64) -> CsrMatrix {
        if c == 0.0 {
            return CsrMatrix::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `Σ c_k A_k` over matrices of identical shape.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Result<CsrMatrix> {
        let (_, first) = terms.first().expect("at least one term");
        let (nr, nc) = (first.nrows, first.ncols);
        let mut b = TripletBuilder::new(nr, nc);
        for (c, m) in terms {
            if m.nrows != nr || m.ncols != nc {
                return Err(Error::DimensionMismatch {
                    context: "linear_combination",
                    expected: nr,
                    got: m.nrows,
                });
            }
            for i in 0..nr {
                for (j, v) in m.row(i) {
                    b.push(i, j, c * v);
                }
            }
        }
        Ok(b.build())
    }

    /// Assembles a block matrix. `blocks[r][c]` may be `None` for a zero block;
    /// every block row must determine its height and every block column its width.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix>>]) -> Result<CsrMatrix> {
        let nbr = blocks.len();
        let nbc = blocks[0].len();
        let mut heights = vec![usize::MAX; nbr];
        let mut widths = vec![usize::MAX; nbc];
        for (r, row) in blocks.iter().enumerate() {
            for (c, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    for (slot, val, ctx) in [
                        (&mut heights[r], m.nrows, "block row height"),
                        (&mut widths[c], m.ncols, "block column width"),
                    ] {
                        if *slot == usize::MAX {
                            *slot = val;
                        } else if *slot != val {
                            return Err(Error::DimensionMismatch {
                                context: ctx,
                                expected: *slot,
                                got: val,
                            });
                        }
                    }
                }
            }
        }
        if heights.contains(&usize::MAX) || widths.contains(&usize::MAX) {
            return Err(Error::DimensionMismatch {
                context: "block: undetermined block size",
                expected: 0,
                got: 0,
            });
        }
        let roff: Vec<usize> = std::iter::once(0)
            .chain(heights.iter().scan(0, |s, &h| {
                *s += h;
                Some(*s)
            }))
            .collect();
        let coff: Vec<usize> = std::iter::once(0)
            .chain(widths.iter().scan(0, |s, &w| {
                *s += w;
                Some(*s)
            }))
            .collect();
        let mut b = TripletBuilder::new(roff[nbr], coff[nbc]);
        for (r, row) in blocks.iter().enumerate() {
            for (c, blk) in row.iter().enumerate() {
                if let Some(m) = blk {
                    for i in 0..m.nrows {
                        for (j, v) in m.row(i) {
                            b.push(roff[r] + i, coff[c] + j, v);
                        }
                    }
                }
            }
        }
        Ok(b.build())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `Φᵀ A Ψ` for dense bases `Φ` (rows of A) and `Ψ` (columns of A).
    pub fn congruence(&self, test: &DMatrix<f64>, trial: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(test.nrows(), self.nrows);
        let a_trial = self.mul_dense(trial);
        test.transpose() * a_trial
    }
}
