use super::dense::{Scalar, PIVOT_THRESHOLD};
use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Each row stores `2 kl + ku + 1` slots so partial pivoting has room for
/// the fill it creates above the original band.
#[derive(Clone, Debug)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            T::zero()
        }
    }

    /// # Panics
    /// If `(i, j)` lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                let mut s = T::zero();
                for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                    s += self.data[self.slot(i, j)] * *xj;
                }
                s
            })
            .collect()
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// Band LU with partial pivoting.
    pub fn lu(mut self) -> Result<BandedLu<T>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let scale = self.max_abs();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].modulus();
            for i in k + 1..=last_row {
                let v = self.data[self.slot(i, k)].modulus();
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
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.slot(k, k)];
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let l = self.data[s] / d;
                self.data[s] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let u = self.data[self.slot(k, j)];
                    let t = self.slot(i, j);
                    self.data[t] -= l * u;
                }
            }
        }
        Ok(BandedLu { a: self, piv })
    }
}

/// Factors produced by [`BandedMatrix::lu`].
#[derive(Clone, Debug)]
pub struct BandedLu<T> {
    a: BandedMatrix<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandedLu<T> {
    pub fn dim(&self) -> usize {
        self.a.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = self.a.n;
        let (kl, ku) = (self.a.kl, self.a.ku);
        assert_eq!(x.len(), n);
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                x[i] -= self.a.data[self.a.slot(i, k)] * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.a.data[self.a.slot(i, j)] * x[j];
            }
            x[i] = s / self.a.data[self.a.slot(i, i)];
        }
    }
}

/// Solves a banded system in one call.
pub fn banded_solve<T: Scalar>(a: BandedMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    if b.len() != a.dim() {
        return Err(Error::Dimension {
            what: "banded right side",
            expected: a.dim(),
            got: b.len(),
        });
    }
    Ok(a.lu()?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::dense::DenseMatrix;

    fn tridiag(n: usize) -> BandedMatrix<f64> {
        let mut a = BandedMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn tridiagonal_poisson() {
        let n = 9;
        let a = tridiag(n);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let y = banded_solve(a, &b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn pivoting_needed() {
        // zero diagonal forces row swaps that fill the upper band
        let n = 6;
        let mut a = BandedMatrix::zeros(n, 2, 1);
        let mut d = DenseMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 1).min(n - 1) {
                let v = if i == j { 0.0 } else { 1.0 + (i * 7 + j * 3) as f64 * 0.1 };
                a.set(i, j, v);
                d[(i, j)] = v;
            }
        }
        let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let b = d.matvec(&x);
        let y = banded_solve(a, &b).unwrap();
        let z = d.lu().unwrap().solve(&b);
        for i in 0..n {
            assert!((y[i] - x[i]).abs() < 1e-12, "{y:?}");
            assert!((z[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "outside band")]
    fn outside_band_panics() {
        let mut a = BandedMatrix::<f64>::zeros(4, 1, 0);
        a.set(0, 1, 1.0);
    }

    #[test]
    fn singular_band() {
        let a = BandedMatrix::<f64>::zeros(3, 1, 1);
        assert!(a.lu().is_err());
    }
}
