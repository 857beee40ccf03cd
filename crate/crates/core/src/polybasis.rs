//! One dimensional Gauss-Lobatto-Legendre nodal and edge bases on [-1, 1].

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Legendre polynomials `P_{n-1}(x)`, `P_n(x)` and the derivative `P_n'(x)`.
fn legendre(n: usize, x: f64) -> (f64, f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (0.0, 1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        let nf = n as f64;
        x.powi(n as i32 + 1) * nf * (nf + 1.0) / 2.0
    } else {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    };
    (p0, p1, dp)
}

/// A one dimensional quadrature rule on [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `n`-point Gauss-Legendre rule.
pub fn gauss_legendre(n: usize) -> Result<QuadRule> {
    if n == 0 {
        return Err(Error::InvalidDegree(0));
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (_, p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                what: "Gauss-Legendre Newton iteration",
                iterations: NEWTON_MAX_ITER,
                residual: legendre(n, x).1.abs(),
                history: Vec::new(),
            });
        }
        let (_, _, dp) = legendre(n, x);
        points[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    symmetrise(&mut points, &mut weights);
    Ok(QuadRule { points, weights })
}

fn symmetrise(points: &mut [f64], weights: &mut [f64]) {
    let n = points.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (points[j] - points[i]);
        points[i] = -x;
        points[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
}

/// Lagrange basis on the `p + 1` Gauss-Lobatto-Legendre nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalBasis {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
    diff: Vec<Vec<f64>>,
}

/// Builds the degree `p` GLL basis.
pub fn gll_nodes(p: usize) -> Result<NodalBasis> {
    if p == 0 {
        return Err(Error::InvalidDegree(0));
    }
    let n = p + 1;
    let mut nodes = vec![0.0; n];
    // Newton on (1 - x^2) P_p'(x), written through the Legendre recurrence
    for (i, node) in nodes.iter_mut().enumerate() {
        let mut x = -(std::f64::consts::PI * i as f64 / p as f64).cos();
        if i == 0 || i == p {
            *node = x.signum();
            continue;
        }
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (pm1, pp, _) = legendre(p, x);
            let dx = (x * pp - pm1) / (n as f64 * pp);
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                what: "GLL Newton iteration",
                iterations: NEWTON_MAX_ITER,
                residual: legendre(p, x).2.abs(),
                history: Vec::new(),
            });
        }
        *node = x;
    }
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (_, pp, _) = legendre(p, x);
            2.0 / (p as f64 * n as f64 * pp * pp)
        })
        .collect();
    symmetrise(&mut nodes, &mut weights);
    let bary: Vec<f64> = (0..n)
        .map(|j| {
            1.0 / (0..n)
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product::<f64>()
        })
        .collect();
    let mut diff = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if i != j {
                diff[i][j] = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                s += diff[i][j];
            }
        }
        diff[i][i] = -s;
    }
    Ok(NodalBasis {
        degree: p,
        nodes,
        weights,
        bary,
        diff,
    })
}

impl NodalBasis {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `D[i][j] = l_j'(x_i)`.
    pub fn differentiation_matrix(&self) -> &[Vec<f64>] {
        &self.diff
    }

    pub fn quadrature(&self) -> QuadRule {
        QuadRule {
            points: self.nodes.clone(),
            weights: self.weights.clone(),
        }
    }

    /// Values of all `p + 1` Lagrange polynomials at `x`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let n = self.nodes.len();
        if let Some(k) = self.nodes.iter().position(|&xn| xn == x) {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            return v;
        }
        let terms: Vec<f64> = (0..n).map(|j| self.bary[j] / (x - self.nodes[j])).collect();
        let total: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / total).collect()
    }

    /// Derivatives of all Lagrange polynomials at `x`.
    pub fn eval_derivative(&self, x: f64) -> Vec<f64> {
        let l = self.eval(x);
        let n = self.nodes.len();
        (0..n)
            .map(|k| (0..n).map(|i| l[i] * self.diff[i][k]).sum())
            .collect()
    }

    /// Interpolates nodal values at `x`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        self.eval(x).iter().zip(values).map(|(a, b)| a * b).sum()
    }
}

/// Histopolating edge polynomials `e_0 .. e_{p-1}` of degree `p - 1`.
///
/// `e_j = sum_{k > j} l_k'`, so the integral of `e_j` over the gap
/// `[x_i, x_{i+1}]` is `delta_ij` and `f' = sum_j (f_{j+1} - f_j) e_j` for
/// any nodal expansion `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeBasis {
    nodal: NodalBasis,
}

pub fn edge_basis(n: &NodalBasis) -> EdgeBasis {
    EdgeBasis { nodal: n.clone() }
}

impl EdgeBasis {
    pub fn len(&self) -> usize {
        self.nodal.degree
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodal(&self) -> &NodalBasis {
        &self.nodal
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let d = self.nodal.eval_derivative(x);
        let p = self.nodal.degree;
        let mut out = vec![0.0; p];
        let mut acc = 0.0;
        for j in (0..p).rev() {
            acc += d[j + 1];
            out[j] = acc;
        }
        out
    }

    /// The 1D incidence matrix mapping nodal to edge coefficients.
    pub fn incidence(&self) -> Vec<Vec<i64>> {
        let p = self.nodal.degree;
        (0..p)
            .map(|j| {
                let mut row = vec![0; p + 1];
                row[j] = -1;
                row[j + 1] = 1;
                row
            })
            .collect()
    }
}

/// Linear nodal pair and constant edge function on one time slab.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalPair {
    pub t0: f64,
    pub dt: f64,
}

impl TemporalPair {
    pub fn new(t0: f64, dt: f64) -> Result<Self> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { t0, dt })
    }

    pub fn l0(&self, t: f64) -> f64 {
        (self.t0 + self.dt - t) / self.dt
    }

    pub fn l1(&self, t: f64) -> f64 {
        (t - self.t0) / self.dt
    }

    pub fn e1(&self, _t: f64) -> f64 {
        1.0 / self.dt
    }

    pub fn dl0(&self) -> f64 {
        -self.e1(self.t0)
    }

    pub fn dl1(&self) -> f64 {
        self.e1(self.t0)
    }

    /// `int e1 e1 dt` over the slab.
    pub fn mass(&self) -> f64 {
        self.e1(self.t0) * self.e1(self.t0) * self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn degree_zero_rejected() {
        assert!(matches!(gll_nodes(0), Err(Error::InvalidDegree(0))));
    }

    #[test]
    fn p1_and_p2_rules() {
        let b = gll_nodes(1).unwrap();
        assert_eq!(b.nodes(), &[-1.0, 1.0]);
        assert_eq!(b.weights(), &[1.0, 1.0]);
        let b = gll_nodes(2).unwrap();
        assert_eq!(b.nodes(), &[-1.0, 0.0, 1.0]);
        for (w, e) in b.weights().iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn p3_interior_nodes() {
        let b = gll_nodes(3).unwrap();
        let r = (0.2f64).sqrt();
        assert_abs_diff_eq!(b.nodes()[1], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(b.nodes()[2], r, epsilon = 1e-15);
    }

    #[test]
    fn p1_edge_is_half() {
        let e = edge_basis(&gll_nodes(1).unwrap());
        for x in [-1.0, -0.3, 0.7, 1.0] {
            assert_abs_diff_eq!(e.eval(x)[0], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn temporal_pair() {
        let t = TemporalPair::new(2.0, 0.25).unwrap();
        assert_eq!(t.e1(2.1), 4.0);
        assert_eq!(t.l0(2.0), 1.0);
        assert_eq!(t.l1(2.25), 1.0);
        assert_eq!(t.dl1(), t.e1(2.0));
        assert_eq!(t.dl0(), -t.e1(2.0));
        assert_eq!(t.mass(), 4.0);
    }

    #[test]
    fn gauss_rule_exact_to_degree() {
        let g = gauss_legendre(5).unwrap();
        for d in 0..10 {
            let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
            assert_abs_diff_eq!(g.integrate(|x| x.powi(d)), exact, epsilon = 1e-14);
        }
    }
}
