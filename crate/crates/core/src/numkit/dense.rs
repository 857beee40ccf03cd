use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative pivot size below which a factorisation is declared singular.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

/// Field element usable by the dense and banded kernels.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from equally long rows.
    ///
    /// # Panics
    /// If the rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut s = T::zero();
                for (a, b) in self.row(i).iter().zip(x) {
                    s += *a * *b;
                }
                s
            })
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other[(k, j)];
                    out[(i, j)] += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(&self) -> Result<LuFactors<T>> {
        assert_eq!(self.rows, self.cols, "LU needs a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut piv = vec![0usize; n];
        let scale = self.max_abs();
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].modulus();
            for i in k + 1..n {
                let v = a[(i, k)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= PIVOT_THRESHOLD * scale || best == 0.0 {
                return Err(Error::Singular { col: k, pivot: best });
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
            }
            let d = a[(k, k)];
            for i in k + 1..n {
                let l = a[(i, k)] / d;
                a[(i, k)] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = a[(k, j)];
                    a[(i, j)] -= l * u;
                }
            }
        }
        Ok(LuFactors { lu: a, piv })
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factors of a dense matrix.
#[derive(Clone, Debug)]
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> LuFactors<T> {
    pub fn dim(&self) -> usize {
        self.piv.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
    }

    /// Determinant from the factors.
    pub fn det(&self) -> T {
        let mut d = T::one();
        for k in 0..self.dim() {
            d = d * self.lu[(k, k)];
            if self.piv[k] != k {
                d = -d;
            }
        }
        d
    }
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn lu_solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    if b.len() != a.rows() {
        return Err(Error::Dimension {
            what: "lu_solve right side",
            expected: a.rows(),
            got: b.len(),
        });
    }
    Ok(a.lu()?.solve(b))
}
