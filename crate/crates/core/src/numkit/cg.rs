use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Outcome of a conjugate gradient solve.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `|b - A x|_2 / |b|_2`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi preconditioned conjugate gradients for symmetric positive
/// definite `a`.
pub fn cg_solve(a: &CsrMatrix<f64>, b: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::Dimension {
            what: "cg right side",
            expected: n,
            got: b.len(),
        });
    }
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let dinv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Degenerate(format!(
                "cg met non-positive curvature {pap:e}; matrix not SPD"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        history.push(res);
        if res <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: res,
            });
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Convergence {
        what: "conjugate gradients",
        iterations: max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
