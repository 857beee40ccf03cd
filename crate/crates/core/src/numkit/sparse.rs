use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg};

use num_traits::Zero;

/// Compressed sparse row matrix. Duplicates are merged on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T> CsrMatrix<T>
where
    T: Copy + Zero + Add<Output = T> + Mul<Output = T> + PartialEq,
{
    /// Builds from coordinate triplets, summing duplicates and dropping
    /// entries that sum to exactly zero.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut rows: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of range");
            let e = rows[i].entry(j).or_insert_with(T::zero);
            *e = *e + v;
        }
        Self::from_row_maps(nrows, ncols, rows)
    }

    fn from_row_maps(nrows: usize, ncols: usize, rows: Vec<BTreeMap<usize, T>>) -> Self {
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                if !v.is_zero() {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self
    where
        T: num_traits::One,
    {
        let t: Vec<_> = (0..n).map(|i| (i, i, T::one())).collect();
        Self::from_triplets(n, n, &t)
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
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols, "matvec input length");
        assert_eq!(y.len(), self.nrows, "matvec output length");
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.indptr[i]..self.indptr[i + 1] {
                s = s + self.values[k] * x[self.indices[k]];
            }
            *yi = s;
        }
    }

    /// `y += A^T x`
    pub fn tmatvec_add(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                y[j] = y[j] + self.values[k] * xi;
            }
        }
    }

    pub fn tmatvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.ncols];
        self.tmatvec_add(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.iter() {
            t.push((j, i, v));
        }
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Sparse product `self * other` accumulated in exact row order.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul inner dimension");
        let mut rows = Vec::with_capacity(self.nrows);
        for i in 0..self.nrows {
            let mut acc: BTreeMap<usize, T> = BTreeMap::new();
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &b) in cb.iter().zip(vb) {
                    let e = acc.entry(j).or_insert_with(T::zero);
                    *e = *e + a * b;
                }
            }
            rows.push(acc);
        }
        Self::from_row_maps(self.nrows, other.ncols, rows)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.iter().collect();
        t.extend(other.iter().map(|(i, j, v)| (i, j, alpha * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn scale(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = alpha * *v;
        }
        out
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut t = Vec::new();
        for (r, &i) in rows.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push((r, j, x));
            }
        }
        Self::from_triplets(rows.len(), self.ncols, &t)
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (c, &j) in cols.iter().enumerate() {
            map[j] = c;
        }
        let t: Vec<_> = self
            .iter()
            .filter(|&(_, j, _)| map[j] != usize::MAX)
            .map(|(i, j, v)| (i, map[j], v))
            .collect();
        Self::from_triplets(self.nrows, cols.len(), &t)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

impl<T> CsrMatrix<T>
where
    T: Copy + Zero + Add<Output = T> + Mul<Output = T> + PartialEq + Neg<Output = T>,
{
    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }
}

impl CsrMatrix<f64> {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> super::DenseMatrix<f64> {
        let mut d = super::DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_merge_and_cancel() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (1, 0, -1.0)]);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 0), 3.0);
    }

    #[test]
    fn product_and_transpose() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1i64), (0, 2, -1), (1, 1, 2)]);
        let b = a.transpose();
        let c = a.matmul(&b);
        assert_eq!(c.get(0, 0), 2);
        assert_eq!(c.get(1, 1), 4);
        assert_eq!(c.get(0, 1), 0);
        assert_eq!(a.tmatvec(&[1, 1]), vec![1, 2, -1]);
    }

    #[test]
    fn row_and_column_selection() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (2, 0, 4.0)]);
        let r = a.select_rows(&[2, 0]).select_cols(&[0]);
        assert_eq!(r.to_dense().matvec(&[1.0]), vec![4.0, 1.0]);
    }
}
