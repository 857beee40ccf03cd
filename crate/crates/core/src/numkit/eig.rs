use num_complex::Complex64;

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

type C = Complex64;

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

fn c0() -> C {
    C::new(0.0, 0.0)
}

/// Reduces `a` to upper Hessenberg form by Householder reflections.
fn hessenberg(a: &mut DenseMatrix<C>) {
    let n = a.rows();
    for k in 0..n.saturating_sub(2) {
        let alpha: f64 = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C::new(1.0, 0.0) };
        let mut v: Vec<C> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] += phase * alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // A <- (I - 2 v v^H / |v|^2) A (I - 2 v v^H / |v|^2)
        for j in 0..n {
            let mut s = c0();
            for (r, vi) in v.iter().enumerate() {
                s += vi.conj() * a[(k + 1 + r, j)];
            }
            let f = s * (2.0 / vnorm2);
            for (r, vi) in v.iter().enumerate() {
                a[(k + 1 + r, j)] -= vi * f;
            }
        }
        for i in 0..n {
            let mut s = c0();
            for (r, vi) in v.iter().enumerate() {
                s += a[(i, k + 1 + r)] * vi;
            }
            let f = s * (2.0 / vnorm2);
            for (r, vi) in v.iter().enumerate() {
                a[(i, k + 1 + r)] -= f * vi.conj();
            }
        }
        for i in k + 2..n {
            a[(i, k)] = c0();
        }
    }
}

/// Eigenvalue of the 2x2 block `[[a, b], [c, d]]` nearest to `d`.
fn wilkinson_shift(a: C, b: C, c: C, d: C) -> C {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// All eigenvalues of a general complex matrix by Hessenberg reduction and
/// shifted QR with deflation.
pub fn eigenvalues(a: &DenseMatrix<C>) -> Result<Vec<C>> {
    assert_eq!(a.rows(), a.cols(), "eigenvalues need a square matrix");
    let n = a.rows();
    if a.max_abs().is_nan() {
        return Err(Error::Degenerate("matrix has non-finite entries".into()));
    }
    let mut h = a.clone();
    hessenberg(&mut h);
    let mut out = Vec::with_capacity(n);
    let mut hi = n;
    let mut sweeps = 0usize;
    while hi > 0 {
        let last = hi - 1;
        // locate the start of the unreduced trailing block
        let mut lo = last;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let floor = if diag > 0.0 { f64::EPSILON * diag } else { f64::MIN_POSITIVE };
            if sub <= floor {
                h[(lo, lo - 1)] = c0();
                break;
            }
            lo -= 1;
        }
        if lo == last {
            out.push(h[(last, last)]);
            hi -= 1;
            sweeps = 0;
            continue;
        }
        sweeps += 1;
        if sweeps > MAX_SWEEPS_PER_EIGENVALUE {
            return Err(Error::Convergence {
                what: "complex QR eigenvalue iteration",
                iterations: sweeps,
                residual: h[(last, last - 1)].norm(),
                history: Vec::new(),
            });
        }
        let mut mu = wilkinson_shift(
            h[(last - 1, last - 1)],
            h[(last - 1, last)],
            h[(last, last - 1)],
            h[(last, last)],
        );
        if sweeps % 11 == 10 {
            // exceptional shift to break cycles
            mu = h[(last, last)] + C::new(h[(last, last - 1)].norm(), 0.0) * 0.75;
        }
        for i in lo..=last {
            h[(i, i)] -= mu;
        }
        let mut rots: Vec<(C, C)> = Vec::with_capacity(last - lo);
        for k in lo..last {
            let x = h[(k, k)];
            let y = h[(k + 1, k)];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (C::new(1.0, 0.0), c0())
            } else {
                (x / r, y / r)
            };
            // G = [[conj c, conj s], [-s, c]] applied from the left
            for j in k..=last {
                let a0 = h[(k, j)];
                let a1 = h[(k + 1, j)];
                h[(k, j)] = c.conj() * a0 + s.conj() * a1;
                h[(k + 1, j)] = -s * a0 + c * a1;
            }
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = lo + idx;
            // right multiplication by G^H
            for i in lo..=(k + 2).min(last) {
                let a0 = h[(i, k)];
                let a1 = h[(i, k + 1)];
                h[(i, k)] = a0 * c + a1 * s;
                h[(i, k + 1)] = -a0 * s.conj() + a1 * c.conj();
            }
        }
        for i in lo..=last {
            h[(i, i)] += mu;
        }
    }
    out.reverse();
    Ok(out)
}

/// Determinant of a small complex matrix by LU; zero when singular.
pub fn det(a: &DenseMatrix<C>) -> C {
    match a.lu() {
        Ok(f) => f.det(),
        Err(_) => c0(),
    }
}

/// The four eigenvalues of a 4x4 complex matrix ordered by argument, then
/// modulus.
pub fn eig4(a: &[[C; 4]; 4]) -> Result<[C; 4]> {
    let m = DenseMatrix::from_fn(4, 4, |i, j| a[i][j]);
    let mut ev = eigenvalues(&m)?;
    ev.sort_by(|x, y| {
        x.arg()
            .partial_cmp(&y.arg())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.norm().partial_cmp(&y.norm()).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok([ev[0], ev[1], ev[2], ev[3]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn diagonal_values_exact() {
        let mut a = [[c(0.0, 0.0); 4]; 4];
        a[0][0] = c(1.0, 0.0);
        a[1][1] = c(0.0, 1.0);
        a[2][2] = c(-1.0, 0.0);
        a[3][3] = c(0.0, -1.0);
        let ev = eig4(&a).unwrap();
        assert_eq!(ev, [c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]);
    }

    #[test]
    fn identity() {
        let mut a = [[c(0.0, 0.0); 4]; 4];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = c(1.0, 0.0);
        }
        assert_eq!(eig4(&a).unwrap(), [c(1.0, 0.0); 4]);
    }

    #[test]
    fn companion_of_known_roots() {
        // roots 2, -1, i, 3 - i
        let roots = [c(2.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(3.0, -1.0)];
        let mut coef = vec![c(1.0, 0.0)];
        for r in roots {
            let mut next = vec![c(0.0, 0.0); coef.len() + 1];
            for (k, a) in coef.iter().enumerate() {
                next[k] += *a;
                next[k + 1] -= *a * r;
            }
            coef = next;
        }
        let m = DenseMatrix::from_fn(4, 4, |i, j| {
            if i == 0 {
                -coef[j + 1]
            } else if i == j + 1 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let ev = eigenvalues(&m).unwrap();
        for r in roots {
            let best = ev.iter().map(|e| (e - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "{r} not found in {ev:?}");
        }
    }

    #[test]
    fn jordan_block_converges() {
        let m = DenseMatrix::from_fn(4, 4, |i, j| {
            if j == i || j == i + 1 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        // a defective eigenvalue is only determined to about eps^(1/4)
        let ev = eigenvalues(&m).unwrap();
        for e in ev {
            assert!((e - c(1.0, 0.0)).norm() < 1e-3);
        }
    }
}
