//! Dense and sparse (CSR) matrix storage behind one interface.
//!
//! Tomography forward models are sparse with a few hundred nonzeros per row;
//! unit-test models are small and dense. [`Matrix`] lets every downstream
//! operation accept either without caring which it got. Matrix-vector
//! products accumulate per output entry in index order, so results are
//! deterministic regardless of how callers parallelize over rows.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, Scalar};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Matrix with no stored entries.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
            sorted.push((i, j, v));
        }
        sorted.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                let n = values.len() - 1;
                values[n] += v;
            } else {
                col_idx.push(j);
                values.push(v);
                last = Some((i, j));
            }
            row_ptr[i + 1] = col_idx.len();
        }
        // rows without entries inherit the running offset
        for i in 1..=nrows {
            if row_ptr[i] < row_ptr[i - 1] {
                row_ptr[i] = row_ptr[i - 1];
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from per-row `(col, value)` lists, one list per row, columns
    /// assumed unsorted but unique within a row.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if j >= ncols {
                    return Err(Error::DimensionMismatch(format!(
                        "column {j} outside width {ncols}"
                    )));
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
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

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn iter_triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals.iter()).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn matvec(&self, x: &DVector<T>) -> DVector<T> {
        assert_eq!(x.len(), self.ncols, "matvec width mismatch");
        let mut y = DVector::zeros(self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = T::zero();
            for (&j, &v) in cols.iter().zip(vals.iter()) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        y
    }

    pub fn tr_matvec(&self, y: &DVector<T>) -> DVector<T> {
        assert_eq!(y.len(), self.nrows, "tr_matvec height mismatch");
        let mut x = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            let yi = y[i];
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals.iter()) {
                x[j] += v * yi;
            }
        }
        x
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter_triplets() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn frobenius_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    /// Multiplies every stored value by `s`.
    pub fn scaled(mut self, s: T) -> Self {
        for v in &mut self.values {
            *v *= s;
        }
        self
    }

    /// Submatrix of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &i in rows {
            let (cols, vals) = self.row(i);
            col_idx.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: rows.len(),
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Submatrix of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            map[old] = new;
        }
        let mut rows: Vec<Vec<(usize, T)>> = Vec::with_capacity(self.nrows);
        for i in 0..self.nrows {
            let (ci, vi) = self.row(i);
            let mut row = Vec::new();
            for (&j, &v) in ci.iter().zip(vi.iter()) {
                if map[j] != usize::MAX {
                    row.push((map[j], v));
                }
            }
            rows.push(row);
        }
        Self::from_rows(cols.len(), rows).expect("mapped columns are in range")
    }

    /// Dense `A * A^T`, accumulated by sorted row-row merges.
    pub fn gram_rows(&self) -> DMatrix<T> {
        let m = self.nrows;
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            let (ci, vi) = self.row(i);
            for k in i..m {
                let (ck, vk) = self.row(k);
                let mut acc = T::zero();
                let (mut a, mut b) = (0usize, 0usize);
                while a < ci.len() && b < ck.len() {
                    match ci[a].cmp(&ck[b]) {
                        std::cmp::Ordering::Less => a += 1,
                        std::cmp::Ordering::Greater => b += 1,
                        std::cmp::Ordering::Equal => {
                            acc += vi[a] * vk[b];
                            a += 1;
                            b += 1;
                        }
                    }
                }
                g[(i, k)] = acc;
                g[(k, i)] = acc;
            }
        }
        g
    }
}

/// Dense or sparse matrix behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix<T> {
    Dense(DMatrix<T>),
    Sparse(CsrMatrix<T>),
}

impl<T: Scalar> Matrix<T> {
    /// Dense zero matrix with no columns; the degenerate "no clutter" block.
    pub fn empty(nrows: usize) -> Self {
        Matrix::Dense(DMatrix::zeros(nrows, 0))
    }

    pub fn nrows(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.nrows(),
            Matrix::Sparse(s) => s.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.ncols(),
            Matrix::Sparse(s) => s.ncols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Matrix::Sparse(_))
    }

    pub fn matvec(&self, x: &DVector<T>) -> DVector<T> {
        match self {
            Matrix::Dense(d) => d * x,
            Matrix::Sparse(s) => s.matvec(x),
        }
    }

    pub fn tr_matvec(&self, y: &DVector<T>) -> DVector<T> {
        match self {
            Matrix::Dense(d) => d.transpose() * y,
            Matrix::Sparse(s) => s.tr_matvec(y),
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        match self {
            Matrix::Dense(d) => d.clone(),
            Matrix::Sparse(s) => s.to_dense(),
        }
    }

    pub fn frobenius_norm(&self) -> T {
        match self {
            Matrix::Dense(d) => d.norm(),
            Matrix::Sparse(s) => s.frobenius_norm(),
        }
    }

    pub fn scaled(self, s: T) -> Self {
        match self {
            Matrix::Dense(d) => Matrix::Dense(d * s),
            Matrix::Sparse(sp) => Matrix::Sparse(sp.scaled(s)),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        match self {
            Matrix::Dense(d) => Matrix::Dense(d.select_columns(cols.iter())),
            Matrix::Sparse(s) => Matrix::Sparse(s.select_columns(cols)),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        match self {
            Matrix::Dense(d) => Matrix::Dense(d.select_rows(rows.iter())),
            Matrix::Sparse(s) => Matrix::Sparse(s.select_rows(rows)),
        }
    }

    pub fn column(&self, j: usize) -> DVector<T> {
        match self {
            Matrix::Dense(d) => d.column(j).into_owned(),
            Matrix::Sparse(s) => {
                let mut c = DVector::zeros(s.nrows());
                for i in 0..s.nrows() {
                    let (cols, vals) = s.row(i);
                    if let Ok(pos) = cols.binary_search(&j) {
                        c[i] = vals[pos];
                    }
                }
                c
            }
        }
    }

    /// `lhs * self` without densifying a sparse operand.
    pub fn premul_dense(&self, lhs: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(lhs.ncols(), self.nrows(), "premul shape mismatch");
        match self {
            Matrix::Dense(d) => lhs * d,
            Matrix::Sparse(s) => {
                let mut out = DMatrix::zeros(lhs.nrows(), s.ncols());
                for (i, j, v) in s.iter_triplets() {
                    out.column_mut(j).axpy(v, &lhs.column(i), T::one());
                }
                out
            }
        }
    }

    /// Dense `self * self^T`.
    pub fn gram_rows(&self) -> DMatrix<T> {
        match self {
            Matrix::Dense(d) => d * d.transpose(),
            Matrix::Sparse(s) => s.gram_rows(),
        }
    }
}

impl<T: Scalar> From<DMatrix<T>> for Matrix<T> {
    fn from(d: DMatrix<T>) -> Self {
        Matrix::Dense(d)
    }
}

impl<T: Scalar> From<CsrMatrix<T>> for Matrix<T> {
    fn from(s: CsrMatrix<T>) -> Self {
        Matrix::Sparse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_csr() -> CsrMatrix<f64> {
        CsrMatrix::from_triplets(
            3,
            4,
            &[
                (0, 1, 2.0),
                (0, 3, -1.0),
                (1, 0, 4.0),
                (2, 2, 5.0),
                (2, 0, 1.5),
            ],
        )
        .unwrap()
    }

    #[test]
    fn triplets_round_trip_through_dense() {
        let s = sample_csr();
        let d = s.to_dense();
        assert_eq!(d[(0, 1)], 2.0);
        assert_eq!(d[(2, 0)], 1.5);
        assert_eq!(s.nnz(), 5);
    }

    #[test]
    fn duplicate_triplets_accumulate() {
        let s = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.5)]).unwrap();
        assert_eq!(s.to_dense()[(0, 0)], 3.5);
        assert_eq!(s.nnz(), 1);
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let s = sample_csr();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = s.matvec(&x);
        let yd = s.to_dense() * &x;
        assert_relative_eq!(y, yd, epsilon = 1e-14);

        let z = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_relative_eq!(s.tr_matvec(&z), s.to_dense().transpose() * &z, epsilon = 1e-14);
    }

    #[test]
    fn column_and_row_selection_match_dense() {
        let s = sample_csr();
        let d = s.to_dense();
        let sel = s.select_columns(&[3, 0]);
        assert_eq!(sel.ncols(), 2);
        assert_eq!(sel.to_dense().column(0), d.column(3));
        assert_eq!(sel.to_dense().column(1), d.column(0));

        let rs = s.select_rows(&[2, 2, 0]);
        assert_eq!(rs.to_dense().row(0), d.row(2));
        assert_eq!(rs.to_dense().row(2), d.row(0));
    }

    #[test]
    fn gram_rows_matches_dense_product() {
        let s = sample_csr();
        let g = s.gram_rows();
        let d = s.to_dense();
        assert_relative_eq!(g, &d * d.transpose(), epsilon = 1e-14);
    }

    #[test]
    fn premul_dense_matches_dense_product() {
        let s = sample_csr();
        let lhs = DMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64 - 1.0);
        let m: Matrix<f64> = s.clone().into();
        assert_relative_eq!(m.premul_dense(&lhs), &lhs * s.to_dense(), epsilon = 1e-14);
    }

    #[test]
    fn frobenius_matches_dense() {
        let s = sample_csr();
        assert_relative_eq!(s.frobenius_norm(), s.to_dense().norm(), epsilon = 1e-14);
    }
}
