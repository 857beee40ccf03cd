//! Structured x-z slice mesh carrying the discrete de Rham complex.
//!
//! The slice is periodic in x and bounded by rigid walls in z. Every
//! element is an affine `dx` by `dz` rectangle with degree `p` tensor
//! product bases built from [`crate::polybasis`].
//!
//! Coefficients of every space are stored x-major: the index of DOF
//! `(ix, iz)` is `ix * nz_count + iz`, so a vertical line of DOFs is
//! contiguous.

mod incidence;
mod ops;

pub use incidence::{nilpotency_report, Incidence, NilpotencyReport};
pub use ops::{project_div, weak_curl_pv, MeshOperators};
pub(crate) use ops::weak_curl_pv_points;

use crate::error::{Error, Result};
use crate::numkit::CsrMatrix;
use crate::polybasis::{edge_basis, gauss_legendre, gll_nodes, EdgeBasis, NodalBasis, QuadRule};

/// The discrete function spaces of the slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Space {
    /// Nodal in x and z (streamfunction and potential vorticity).
    P,
    /// Horizontal flux component: nodal in x, edge in z.
    Upar,
    /// Vertical flux component: edge in x, nodal in z, wall values removed.
    Uperp,
    /// Potential temperature: edge in x, nodal in z including the walls.
    Theta,
    /// Cell integrated densities: edge in x and z.
    Q,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::P => "P",
            Space::Upar => "U_par",
            Space::Uperp => "U_perp",
            Space::Theta => "theta",
            Space::Q => "Q",
        }
    }
}

/// Quadrature used for assembly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Rule {
    /// `p + 1` point Gauss-Lobatto-Legendre, collocated with the nodes.
    #[default]
    Collocated,
    /// `p + 3` point Gauss-Legendre, for diagnostics.
    Over,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Nodal,
    Edge,
}

#[derive(Clone, Debug)]
struct Tables {
    rule: QuadRule,
    /// `nodal[a][q]`
    nodal: Vec<Vec<f64>>,
    /// `edge[a][q]`, unscaled reference edge functions
    edge: Vec<Vec<f64>>,
}

impl Tables {
    fn new(rule: QuadRule, nodal: &NodalBasis, edge: &EdgeBasis) -> Self {
        let p = nodal.degree();
        let mut nt = vec![vec![0.0; rule.len()]; p + 1];
        let mut et = vec![vec![0.0; rule.len()]; p];
        for (q, &x) in rule.points.iter().enumerate() {
            for (a, v) in nodal.eval(x).into_iter().enumerate() {
                nt[a][q] = v;
            }
            for (a, v) in edge.eval(x).into_iter().enumerate() {
                et[a][q] = v;
            }
        }
        Self {
            rule,
            nodal: nt,
            edge: et,
        }
    }
}

/// Coefficients of a field together with the space they live in.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldCoefficients {
    pub space: Space,
    pub values: Vec<f64>,
    pub units: &'static str,
}

impl FieldCoefficients {
    pub fn new(space: Space, values: Vec<f64>, units: &'static str) -> Self {
        Self {
            space,
            values,
            units,
        }
    }
}

/// One local DOF of an element: reference basis indices and global index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalDof {
    pub a: usize,
    pub b: usize,
    pub global: Option<usize>,
}

/// A quadrature point in physical coordinates with its weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    pub x: f64,
    pub z: f64,
    pub weight: f64,
}

/// Tensor product mesh with its spaces and quadrature tables.
#[derive(Clone, Debug)]
pub struct MeshComplex {
    pub nx: usize,
    pub nz: usize,
    pub p: usize,
    pub lx: f64,
    pub lz: f64,
    pub dx: f64,
    pub dz: f64,
    nodal: NodalBasis,
    edge: EdgeBasis,
    colloc: Tables,
    over: Tables,
}

/// Builds an `nx` by `nz` mesh of degree `p` on `[0, lx] x [0, lz]`.
pub fn build_mesh(nx: usize, nz: usize, p: usize, lx: f64, lz: f64) -> Result<MeshComplex> {
    if nx == 0 || nz == 0 {
        return Err(Error::Config(format!("element counts must be positive, got {nx}x{nz}")));
    }
    if p == 0 {
        return Err(Error::InvalidDegree(p));
    }
    if !(lx > 0.0 && lz > 0.0) || !lx.is_finite() || !lz.is_finite() {
        return Err(Error::Config(format!("domain extents must be positive, got {lx} x {lz}")));
    }
    let nodal = gll_nodes(p)?;
    let edge = edge_basis(&nodal);
    let colloc = Tables::new(nodal.quadrature(), &nodal, &edge);
    let over = Tables::new(gauss_legendre(p + 3)?, &nodal, &edge);
    Ok(MeshComplex {
        nx,
        nz,
        p,
        lx,
        lz,
        dx: lx / nx as f64,
        dz: lz / nz as f64,
        nodal,
        edge,
        colloc,
        over,
    })
}

impl MeshComplex {
    pub fn nodal_basis(&self) -> &NodalBasis {
        &self.nodal
    }

    pub fn edge_basis(&self) -> &EdgeBasis {
        &self.edge
    }

    /// Number of distinct x nodes (periodic, so equal to the x edge count).
    pub fn nx_nodes(&self) -> usize {
        self.nx * self.p
    }

    pub fn nx_edges(&self) -> usize {
        self.nx * self.p
    }

    pub fn nz_nodes(&self) -> usize {
        self.nz * self.p + 1
    }

    pub fn nz_edges(&self) -> usize {
        self.nz * self.p
    }

    fn kinds(space: Space) -> (Kind, Kind) {
        match space {
            Space::P => (Kind::Nodal, Kind::Nodal),
            Space::Upar => (Kind::Nodal, Kind::Edge),
            Space::Uperp | Space::Theta => (Kind::Edge, Kind::Nodal),
            Space::Q => (Kind::Edge, Kind::Edge),
        }
    }

    /// Number of DOFs along x and along z.
    pub fn shape(&self, space: Space) -> (usize, usize) {
        match space {
            Space::P => (self.nx_nodes(), self.nz_nodes()),
            Space::Upar => (self.nx_nodes(), self.nz_edges()),
            Space::Uperp => (self.nx_edges(), self.nz_nodes() - 2),
            Space::Theta => (self.nx_edges(), self.nz_nodes()),
            Space::Q => (self.nx_edges(), self.nz_edges()),
        }
    }

    pub fn dim(&self, space: Space) -> usize {
        let (a, b) = self.shape(space);
        a * b
    }

    pub fn index(&self, space: Space, ix: usize, iz: usize) -> usize {
        let (_, nzc) = self.shape(space);
        debug_assert!(iz < nzc);
        ix * nzc + iz
    }

    /// Physical scale factors applied to the reference basis in x and z.
    fn scales(&self, space: Space) -> (f64, f64) {
        let sx = 2.0 / self.dx;
        let sz = 2.0 / self.dz;
        match space {
            Space::P => (1.0, 1.0),
            Space::Upar => (1.0, sz),
            Space::Uperp => (sx, 1.0),
            Space::Theta => (1.0, 1.0),
            Space::Q => (sx, sz),
        }
    }

    pub fn element_count(&self) -> usize {
        self.nx * self.nz
    }

    /// Element index for column `ex` and level `ez`.
    pub fn element(&self, ex: usize, ez: usize) -> usize {
        ex * self.nz + ez
    }

    /// Local DOFs of `space` in element `(ex, ez)`, ordered `a`-major.
    pub fn element_dofs(&self, space: Space, ex: usize, ez: usize) -> Vec<LocalDof> {
        let (kx, kz) = Self::kinds(space);
        let p = self.p;
        let na = if kx == Kind::Nodal { p + 1 } else { p };
        let nb = if kz == Kind::Nodal { p + 1 } else { p };
        let (_, nzc) = self.shape(space);
        let mut out = Vec::with_capacity(na * nb);
        for a in 0..na {
            let gx = match kx {
                Kind::Nodal => (ex * p + a) % self.nx_nodes(),
                Kind::Edge => ex * p + a,
            };
            for b in 0..nb {
                let gz = ez * p + b;
                let global = if space == Space::Uperp {
                    if gz == 0 || gz == self.nz_nodes() - 1 {
                        None
                    } else {
                        Some(gx * nzc + gz - 1)
                    }
                } else {
                    Some(gx * nzc + gz)
                };
                out.push(LocalDof { a, b, global });
            }
        }
        out
    }

    fn tables(&self, rule: Rule) -> &Tables {
        match rule {
            Rule::Collocated => &self.colloc,
            Rule::Over => &self.over,
        }
    }

    /// Reference quadrature rule in one direction.
    pub fn rule_1d(&self, rule: Rule) -> &QuadRule {
        &self.tables(rule).rule
    }

    /// Points per element for `rule`.
    pub fn points_per_element(&self, rule: Rule) -> usize {
        let n = self.tables(rule).rule.len();
        n * n
    }

    pub fn n_points(&self, rule: Rule) -> usize {
        self.element_count() * self.points_per_element(rule)
    }

    /// Jacobian of the affine element map.
    pub fn jacobian(&self) -> f64 {
        self.dx * self.dz / 4.0
    }

    /// All quadrature points, element by element, `qx`-major within each.
    pub fn quad_points(&self, rule: Rule) -> Vec<QuadPoint> {
        let r = &self.tables(rule).rule;
        let j = self.jacobian();
        let mut out = Vec::with_capacity(self.n_points(rule));
        for ex in 0..self.nx {
            for ez in 0..self.nz {
                for (qx, &xi) in r.points.iter().enumerate() {
                    for (qz, &eta) in r.points.iter().enumerate() {
                        out.push(QuadPoint {
                            x: (ex as f64 + 0.5 * (xi + 1.0)) * self.dx,
                            z: (ez as f64 + 0.5 * (eta + 1.0)) * self.dz,
                            weight: r.weights[qx] * r.weights[qz] * j,
                        });
                    }
                }
            }
        }
        out
    }

    /// Reference basis tables (x, z) and the scale for `space`.
    fn basis_tables(&self, space: Space, rule: Rule) -> (&[Vec<f64>], &[Vec<f64>], f64) {
        let t = self.tables(rule);
        let (kx, kz) = Self::kinds(space);
        let (sx, sz) = self.scales(space);
        let tx = if kx == Kind::Nodal { &t.nodal } else { &t.edge };
        let tz = if kz == Kind::Nodal { &t.nodal } else { &t.edge };
        (tx, tz, sx * sz)
    }

    fn check_len(&self, what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension {
                what,
                expected,
                got,
            })
        }
    }

    /// Values of the field with coefficients `c` at every quadrature point.
    pub fn eval(&self, space: Space, c: &[f64], rule: Rule) -> Result<Vec<f64>> {
        self.check_len("field coefficients", self.dim(space), c.len())?;
        let (tx, tz, s) = self.basis_tables(space, rule);
        let nq = self.tables(rule).rule.len();
        let mut out = vec![0.0; self.n_points(rule)];
        for ex in 0..self.nx {
            for ez in 0..self.nz {
                let base = self.element(ex, ez) * nq * nq;
                let vals = &mut out[base..base + nq * nq];
                for d in self.element_dofs(space, ex, ez) {
                    let Some(g) = d.global else { continue };
                    let cg = c[g] * s;
                    if cg == 0.0 {
                        continue;
                    }
                    for qx in 0..nq {
                        let fx = tx[d.a][qx];
                        if fx == 0.0 {
                            continue;
                        }
                        let row = &mut vals[qx * nq..(qx + 1) * nq];
                        for (qz, v) in row.iter_mut().enumerate() {
                            *v += cg * fx * tz[d.b][qz];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Load vector `b_i = sum_q w_q phi_i(q) f_q`.
    pub fn integrate(&self, space: Space, f: &[f64], rule: Rule) -> Result<Vec<f64>> {
        self.check_len("quadrature values", self.n_points(rule), f.len())?;
        let (tx, tz, s) = self.basis_tables(space, rule);
        let r = &self.tables(rule).rule;
        let nq = r.len();
        let j = self.jacobian();
        let mut out = vec![0.0; self.dim(space)];
        for ex in 0..self.nx {
            for ez in 0..self.nz {
                let base = self.element(ex, ez) * nq * nq;
                for d in self.element_dofs(space, ex, ez) {
                    let Some(g) = d.global else { continue };
                    let mut acc = 0.0;
                    for qx in 0..nq {
                        let fx = tx[d.a][qx];
                        if fx == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for qz in 0..nq {
                            inner += r.weights[qz] * tz[d.b][qz] * f[base + qx * nq + qz];
                        }
                        acc += r.weights[qx] * fx * inner;
                    }
                    out[g] += acc * s * j;
                }
            }
        }
        Ok(out)
    }

    /// Assembles `A_ij = sum_q w_q weight_q test_i(q) trial_j(q)`.
    ///
    /// `weight` holds one value per quadrature point; `None` means 1.
    pub fn assemble(
        &self,
        test: Space,
        trial: Space,
        weight: Option<&[f64]>,
        rule: Rule,
    ) -> Result<CsrMatrix<f64>> {
        if let Some(w) = weight {
            self.check_len("weight values", self.n_points(rule), w.len())?;
        }
        let (ux, uz, us) = self.basis_tables(test, rule);
        let (vx, vz, vs) = self.basis_tables(trial, rule);
        let r = &self.tables(rule).rule;
        let nq = r.len();
        let j = self.jacobian();
        let mut trip = Vec::new();
        let mut wq = vec![0.0; nq * nq];
        for ex in 0..self.nx {
            for ez in 0..self.nz {
                let base = self.element(ex, ez) * nq * nq;
                for qx in 0..nq {
                    for qz in 0..nq {
                        let k = qx * nq + qz;
                        wq[k] = r.weights[qx] * r.weights[qz] * j * weight.map_or(1.0, |w| w[base + k]);
                    }
                }
                let td = self.element_dofs(test, ex, ez);
                let sd = self.element_dofs(trial, ex, ez);
                for u in &td {
                    let Some(gi) = u.global else { continue };
                    for v in &sd {
                        let Some(gj) = v.global else { continue };
                        let mut acc = 0.0;
                        for qx in 0..nq {
                            let fx = ux[u.a][qx] * vx[v.a][qx];
                            if fx == 0.0 {
                                continue;
                            }
                            for qz in 0..nq {
                                acc += wq[qx * nq + qz] * fx * uz[u.b][qz] * vz[v.b][qz];
                            }
                        }
                        if acc != 0.0 {
                            trip.push((gi, gj, acc * us * vs));
                        }
                    }
                }
            }
        }
        Ok(CsrMatrix::from_triplets(self.dim(test), self.dim(trial), &trip))
    }

    /// Mass matrix of `space`, optionally weighted by a positive field.
    pub fn mass_matrix(
        &self,
        space: Space,
        weight: Option<&FieldCoefficients>,
        rule: Rule,
    ) -> Result<CsrMatrix<f64>> {
        let wq = match weight {
            None => None,
            Some(f) => {
                let v = self.eval(f.space, &f.values, rule)?;
                if let Some((k, bad)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
                    return Err(Error::Degenerate(format!(
                        "mass weight {bad:e} at quadrature point {k} is not positive"
                    )));
                }
                Some(v)
            }
        };
        self.assemble(space, space, wq.as_deref(), rule)
    }

    /// x coordinate of global x node `ix`.
    pub fn node_x(&self, ix: usize) -> f64 {
        let (e, a) = (ix / self.p, ix % self.p);
        (e as f64 + 0.5 * (self.nodal.nodes()[a] + 1.0)) * self.dx
    }

    /// z coordinate of global z node `iz`.
    pub fn node_z(&self, iz: usize) -> f64 {
        if iz == self.nz_nodes() - 1 {
            return self.lz;
        }
        let (e, b) = (iz / self.p, iz % self.p);
        (e as f64 + 0.5 * (self.nodal.nodes()[b] + 1.0)) * self.dz
    }

    /// Degrees of freedom of a pointwise function: nodal values at nodes and
    /// integrals over sub-grid edges and cells.
    ///
    /// For `Space::Upar`/`Space::Uperp` `f` is the relevant velocity
    /// component. Theta edge integrals are taken in reference x.
    pub fn reduce(&self, space: Space, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let g = gauss_legendre(self.p + 4).expect("positive order");
        let seg = |lo: f64, hi: f64, h: &dyn Fn(f64) -> f64| -> f64 {
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            g.integrate(|t| h(mid + half * t)) * half
        };
        let (nxc, nzc) = self.shape(space);
        let xe = |k: usize| (self.node_x(k), if k + 1 == self.nx_nodes() { self.lx } else { self.node_x(k + 1) });
        let ze = |k: usize| (self.node_z(k), self.node_z(k + 1));
        let mut out = vec![0.0; nxc * nzc];
        for ix in 0..nxc {
            for iz in 0..nzc {
                out[ix * nzc + iz] = match space {
                    Space::P => f(self.node_x(ix), self.node_z(iz)),
                    Space::Upar => {
                        let x = self.node_x(ix);
                        let (a, b) = ze(iz);
                        seg(a, b, &|z| f(x, z))
                    }
                    Space::Uperp => {
                        let z = self.node_z(iz + 1);
                        let (a, b) = xe(ix);
                        seg(a, b, &|x| f(x, z))
                    }
                    Space::Theta => {
                        let z = self.node_z(iz);
                        let (a, b) = xe(ix);
                        seg(a, b, &|x| f(x, z)) * 2.0 / self.dx
                    }
                    Space::Q => {
                        let (a, b) = xe(ix);
                        let (c, d) = ze(iz);
                        seg(a, b, &|x| seg(c, d, &|z| f(x, z)))
                    }
                };
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn invalid_sizes() {
        assert!(build_mesh(0, 1, 1, 1.0, 1.0).is_err());
        assert!(build_mesh(1, 1, 0, 1.0, 1.0).is_err());
        assert!(build_mesh(1, 1, 1, -1.0, 1.0).is_err());
    }

    #[test]
    fn single_lowest_order_element() {
        let m = build_mesh(1, 1, 1, 1.0, 1.0).unwrap();
        assert_eq!(m.dim(Space::Q), 1);
        let one = m.eval(Space::Q, &[1.0], Rule::Collocated).unwrap();
        let integral: f64 = m
            .quad_points(Rule::Collocated)
            .iter()
            .zip(&one)
            .map(|(q, v)| q.weight * v)
            .sum();
        assert_relative_eq!(integral, 1.0, epsilon = 1e-15);
        let mq = m.mass_matrix(Space::Q, None, Rule::Collocated).unwrap();
        assert_relative_eq!(mq.get(0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn reduce_then_eval_reproduces_polynomials() {
        let m = build_mesh(2, 3, 3, 2.0, 3.0).unwrap();
        let f = |_x: f64, z: f64| 1.0 + 0.3 * z + 0.5 * z * z;
        let g = |x: f64, z: f64| z * (3.0 - z) * (1.0 + 0.1 * x);
        for (s, h) in [
            (Space::P, &f as &dyn Fn(f64, f64) -> f64),
            (Space::Upar, &f),
            (Space::Theta, &f),
            (Space::Q, &g),
            (Space::Uperp, &g),
        ] {
            let c = m.reduce(s, h);
            let v = m.eval(s, &c, Rule::Over).unwrap();
            for (q, val) in m.quad_points(Rule::Over).iter().zip(&v) {
                let exact = h(q.x, q.z);
                assert!((val - exact).abs() < 1e-12, "{s:?}: {val} vs {exact}");
            }
        }
    }

    #[test]
    fn mass_weight_must_be_positive() {
        let m = build_mesh(2, 2, 2, 1.0, 1.0).unwrap();
        let rho = FieldCoefficients::new(Space::Q, m.reduce(Space::Q, |x, _| x - 0.5), "kg/m3");
        assert!(matches!(
            m.mass_matrix(Space::Upar, Some(&rho), Rule::Collocated),
            Err(Error::Degenerate(_))
        ));
    }
}
