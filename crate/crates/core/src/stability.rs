//! Linear amplification analysis of three time integrators for the
//! compressible Boussinesq system in variables `(u, w, p, b)`:
//!
//! ```text
//! du/dt = -i k p,   dw/dt = -i l p + b,   dp/dt = -c^2 (i k u + i l w),   db/dt = -N^2 w
//! ```

use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numkit::{eig4, DenseMatrix};

type C = Complex64;

/// Modulus above which a mode counts as growing.
pub const INSTABILITY_THRESHOLD: f64 = 1.0 + 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Fully implicit trapezoidal rule.
    CrankNicolson,
    /// Forward horizontal predictor, trapezoidal vertical solve, trapezoidal
    /// horizontal corrector.
    HeviNew,
    /// Two stage trapezoidal HEVI.
    HeviTrapezoidal,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::CrankNicolson, Scheme::HeviNew, Scheme::HeviTrapezoidal];

    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::CrankNicolson => "cn",
            Scheme::HeviNew => "new",
            Scheme::HeviTrapezoidal => "trap",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cn" | "crank_nicolson" => Ok(Scheme::CrankNicolson),
            "new" | "hevi_new" => Ok(Scheme::HeviNew),
            "trap" | "hevi_trapezoidal" => Ok(Scheme::HeviTrapezoidal),
            other => Err(Error::Config(format!("unknown scheme {other:?}, expected cn, new or trap"))),
        }
    }
}

/// Sound speed `c`, buoyancy frequency `n`, step `dt` and wavenumbers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoussinesqParams {
    pub c: f64,
    pub n: f64,
    pub dt: f64,
    pub k: f64,
    pub l: f64,
}

impl BoussinesqParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("sound speed must be positive, got {}", self.c)));
        }
        if !(self.n >= 0.0 && self.n.is_finite()) {
            return Err(Error::Config(format!("buoyancy frequency must be non-negative, got {}", self.n)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.k.is_finite() && self.l.is_finite()) {
            return Err(Error::Config("wavenumbers must be finite".into()));
        }
        Ok(())
    }

    /// Tendency matrix `G` of `dx/dt = G x`.
    pub fn tendency(&self) -> DenseMatrix<C> {
        let i = C::new(0.0, 1.0);
        let (k, l, c2, n2) = (self.k, self.l, self.c * self.c, self.n * self.n);
        let z = C::new(0.0, 0.0);
        let one = C::new(1.0, 0.0);
        DenseMatrix::from_rows(&[
            vec![z, z, -i * k, z],
            vec![z, z, -i * l, one],
            vec![-i * k * c2, -i * l * c2, z, z],
            vec![z, -one * n2, z, z],
        ])
    }
}

fn identity_plus(scale: f64, g: &DenseMatrix<C>, with_identity: bool) -> DenseMatrix<C> {
    DenseMatrix::from_fn(4, 4, |r, s| {
        let id = if with_identity && r == s { 1.0 } else { 0.0 };
        C::new(id, 0.0) + g[(r, s)] * scale
    })
}

fn solve_columns(lhs: &DenseMatrix<C>, rhs: &DenseMatrix<C>) -> Result<DenseMatrix<C>> {
    let lu = lhs.lu()?;
    let mut out = DenseMatrix::zeros(4, 4);
    for j in 0..4 {
        let col: Vec<C> = (0..4).map(|r| rhs[(r, j)]).collect();
        for (r, v) in lu.solve(&col).into_iter().enumerate() {
            out[(r, j)] = v;
        }
    }
    Ok(out)
}

/// Left and right matrices `(L, R)` with `L x^{n+1} = R x^n` for the single
/// stage schemes.
fn single_stage(scheme: Scheme, p: &BoussinesqParams) -> (DenseMatrix<C>, DenseMatrix<C>) {
    let g = p.tendency();
    let h = 0.5 * p.dt;
    let mut lhs = identity_plus(-h, &g, true);
    let mut rhs = identity_plus(h, &g, true);
    if scheme == Scheme::HeviNew {
        // the pressure equation sees u^n and the forward predicted u'
        let i = C::new(0.0, 1.0);
        let kc2 = p.k * p.c * p.c;
        lhs[(2, 0)] = C::new(0.0, 0.0);
        rhs[(2, 0)] = -i * p.dt * kc2;
        rhs[(2, 2)] = C::new(1.0 - 0.5 * p.dt * p.dt * p.k * kc2, 0.0);
    }
    (lhs, rhs)
}

/// One step amplification matrix of `scheme`.
pub fn amplification_matrix(scheme: Scheme, p: &BoussinesqParams) -> Result<DenseMatrix<C>> {
    p.validate()?;
    match scheme {
        Scheme::CrankNicolson | Scheme::HeviNew => {
            let (lhs, rhs) = single_stage(scheme, p);
            solve_columns(&lhs, &rhs)
        }
        Scheme::HeviTrapezoidal => {
            let g = p.tendency();
            let h = 0.5 * p.dt;
            let i = C::new(0.0, 1.0);
            let z = C::new(0.0, 0.0);
            let (k, l, c2, n2, dt) = (p.k, p.l, p.c * p.c, p.n * p.n, p.dt);
            let one = C::new(1.0, 0.0);
            let l1 = DenseMatrix::from_rows(&[
                vec![one, z, z, z],
                vec![z, one, i * dt * l * 0.5, -one * h],
                vec![z, i * dt * l * c2 * 0.5, one, z],
                vec![z, one * (h * n2), z, one],
            ]);
            let r1 = DenseMatrix::from_rows(&[
                vec![one, z, -i * dt * k, z],
                vec![z, one, -i * dt * l * 0.5, one * h],
                vec![-i * dt * k * c2, -i * dt * l * c2 * 0.5, one, z],
                vec![z, one * (h * n2), z, one],
            ]);
            let stage = solve_columns(&l1, &r1)?;
            let r2 = identity_plus(h, &g, true);
            let s2 = identity_plus(h, &g, false);
            let corr = s2.matmul(&stage);
            Ok(DenseMatrix::from_fn(4, 4, |r, s| r2[(r, s)] + corr[(r, s)]))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModeLabel {
    AcousticPlus,
    AcousticMinus,
    GravityPlus,
    GravityMinus,
}

impl ModeLabel {
    pub fn is_acoustic(self) -> bool {
        matches!(self, ModeLabel::AcousticPlus | ModeLabel::AcousticMinus)
    }
}

/// Eigenvalues of one amplification matrix with mode labels.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplificationResult {
    pub eigenvalues: [C; 4],
    pub moduli: [f64; 4],
    pub labels: [ModeLabel; 4],
    /// Largest `|det(A - lambda I)| / |A|^4` over the eigenvalues.
    pub det_residual: f64,
}

impl AmplificationResult {
    fn by_label(&self, label: ModeLabel) -> usize {
        self.labels.iter().position(|l| *l == label).expect("every label assigned once")
    }

    pub fn eigenvalue(&self, label: ModeLabel) -> C {
        self.eigenvalues[self.by_label(label)]
    }

    pub fn max_modulus(&self) -> f64 {
        self.moduli.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn acoustic_modulus(&self) -> f64 {
        self.family_modulus(true)
    }

    pub fn gravity_modulus(&self) -> f64 {
        self.family_modulus(false)
    }

    fn family_modulus(&self, acoustic: bool) -> f64 {
        self.labels
            .iter()
            .zip(&self.moduli)
            .filter(|(l, _)| l.is_acoustic() == acoustic)
            .fold(0.0, |a, (_, m)| a.max(*m))
    }
}

/// A null vector of the rank deficient 4x4 matrix `b`, read off the
/// largest column of its adjugate.
fn null_vector(b: &DenseMatrix<C>) -> [C; 4] {
    let minor = |skip_r: usize, skip_c: usize| -> C {
        let rows: Vec<usize> = (0..4).filter(|r| *r != skip_r).collect();
        let cols: Vec<usize> = (0..4).filter(|c| *c != skip_c).collect();
        let m = |i: usize, j: usize| b[(rows[i], cols[j])];
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    };
    let mut best = [C::new(0.0, 0.0); 4];
    let mut best_norm = -1.0;
    for j in 0..4 {
        // column j of adj(b) holds the cofactors of row j
        let col: [C; 4] = std::array::from_fn(|i| {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            minor(j, i) * sign
        });
        let n: f64 = col.iter().map(|z| z.norm_sqr()).sum();
        if n > best_norm {
            best_norm = n;
            best = col;
        }
    }
    best
}

/// Share of the scaled eigenvector carried by pressure.
fn pressure_fraction(a: &DenseMatrix<C>, lambda: C, c: f64, n: f64) -> f64 {
    let b = DenseMatrix::from_fn(4, 4, |r, s| if r == s { a[(r, s)] - lambda } else { a[(r, s)] });
    let v = null_vector(&b);
    let scale = [1.0, 1.0, 1.0 / c, if n > 0.0 { 1.0 / n } else { 1.0 }];
    let e: Vec<f64> = v.iter().zip(scale).map(|(z, s)| (z * s).norm_sqr()).collect();
    let total: f64 = e.iter().sum();
    if total > 0.0 {
        e[2] / total
    } else {
        0.0
    }
}

fn labels_for(a: &DenseMatrix<C>, ev: &[C; 4], p: &BoussinesqParams) -> [ModeLabel; 4] {
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&x, &y| ev[y].arg().abs().total_cmp(&ev[x].arg().abs()).then(x.cmp(&y)));
    let gap = ev[order[1]].arg().abs() - ev[order[2]].arg().abs();
    let wavenumber = (p.k * p.k + p.l * p.l).sqrt();
    let resolved = p.c * p.dt * wavenumber < std::f64::consts::PI && gap > 1e-8;
    if !resolved {
        let frac: Vec<f64> = ev.iter().map(|l| pressure_fraction(a, *l, p.c, p.n)).collect();
        order.sort_by(|&x, &y| frac[y].total_cmp(&frac[x]).then(x.cmp(&y)));
    }
    let mut labels = [ModeLabel::GravityPlus; 4];
    for (pair, (plus, minus)) in [
        (&order[..2], (ModeLabel::AcousticPlus, ModeLabel::AcousticMinus)),
        (&order[2..], (ModeLabel::GravityPlus, ModeLabel::GravityMinus)),
    ] {
        let (a, b) = (pair[0], pair[1]);
        let a_first = ev[a].im > ev[b].im || (ev[a].im == ev[b].im && a < b);
        let (hi, lo) = if a_first { (a, b) } else { (b, a) };
        labels[hi] = plus;
        labels[lo] = minus;
    }
    labels
}

/// Eigenvalues, moduli and mode labels of the amplification matrix.
///
/// The pair with the larger `|arg lambda|` is acoustic while the acoustic
/// phase stays below pi; beyond that, or when the two pairs are not
/// separated, the pair whose eigenvectors carry more pressure is acoustic.
pub fn amplification_factors(scheme: Scheme, p: &BoussinesqParams) -> Result<AmplificationResult> {
    let raw = amplification_matrix(scheme, p)?;
    // Similarity to energy variables (u, w, p/c, b/N), under which the
    // continuous operator is skew, so the eigenproblem is well conditioned.
    let d = [1.0, 1.0, 1.0 / p.c, if p.n > 0.0 { 1.0 / p.n } else { 1.0 }];
    let a = DenseMatrix::from_fn(4, 4, |r, s| raw[(r, s)] * (d[r] / d[s]));
    let rows: [[C; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|s| a[(r, s)]));
    let ev = eig4(&rows)?;
    let anorm = a.norm_inf().max(1.0);
    let det_residual = ev
        .iter()
        .map(|l| {
            let b = DenseMatrix::from_fn(4, 4, |r, s| if r == s { a[(r, s)] - l } else { a[(r, s)] });
            crate::numkit::det(&b).norm() / anorm.powi(4)
        })
        .fold(0.0, f64::max);
    Ok(AmplificationResult {
        eigenvalues: ev,
        moduli: ev.map(|z| z.norm()),
        labels: labels_for(&raw, &ev, p),
        det_residual,
    })
}

/// Wavenumber lattice `k_m = 2 pi m / lx`, `l_n = 2 pi n / lz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepParams {
    pub c: f64,
    pub n: f64,
    pub dt: f64,
    pub lx: f64,
    pub lz: f64,
    pub nk: usize,
    pub nl: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            c: 340.0,
            n: 0.01,
            dt: 0.5,
            lx: 1000.0,
            lz: 1000.0,
            nk: 64,
            nl: 64,
        }
    }
}

impl SweepParams {
    pub fn k(&self, m: usize) -> f64 {
        2.0 * std::f64::consts::PI * m as f64 / self.lx
    }

    pub fn l(&self, n: usize) -> f64 {
        2.0 * std::f64::consts::PI * n as f64 / self.lz
    }

    pub fn at(&self, k: f64, l: f64) -> BoussinesqParams {
        BoussinesqParams {
            c: self.c,
            n: self.n,
            dt: self.dt,
            k,
            l,
        }
    }

    /// Horizontal acoustic CFL number `k c dt / pi`.
    pub fn cfl(&self, k: f64) -> f64 {
        k * self.c * self.dt / std::f64::consts::PI
    }

    fn validate(&self) -> Result<()> {
        if self.nk == 0 || self.nl == 0 {
            return Err(Error::Config("the wavenumber grid needs at least one point per direction".into()));
        }
        if !(self.lx > 0.0 && self.lz > 0.0) {
            return Err(Error::Config("domain lengths must be positive".into()));
        }
        self.at(0.0, 0.0).validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub m: usize,
    pub n: usize,
    pub k: f64,
    pub l: f64,
    pub result: AmplificationResult,
}

/// The mean state row: buoyancy still rotates `(w, b)` at `k = l = 0`, but
/// the lattice records the uniform mode as left unchanged.
fn identity_result() -> AmplificationResult {
    let one = C::new(1.0, 0.0);
    AmplificationResult {
        eigenvalues: [one; 4],
        moduli: [1.0; 4],
        labels: [
            ModeLabel::AcousticPlus,
            ModeLabel::AcousticMinus,
            ModeLabel::GravityPlus,
            ModeLabel::GravityMinus,
        ],
        det_residual: 0.0,
    }
}

/// Amplification factors over the whole lattice, `k` major. The points are
/// evaluated in parallel; the order of the output does not depend on it.
pub fn sweep_grid(scheme: Scheme, sp: &SweepParams) -> Result<Vec<GridPoint>> {
    sp.validate()?;
    (0..sp.nk * sp.nl)
        .into_par_iter()
        .map(|idx| {
            let (m, n) = (idx / sp.nl, idx % sp.nl);
            let (k, l) = (sp.k(m), sp.l(n));
            let result = if m == 0 && n == 0 {
                identity_result()
            } else {
                amplification_factors(scheme, &sp.at(k, l))?
            };
            Ok(GridPoint { m, n, k, l, result })
        })
        .collect()
}

/// Header of the sweep CSV.
pub const SWEEP_HEADER: [&str; 8] = [
    "k",
    "l",
    "mod_acoustic",
    "mod_gravity",
    "arg_acoustic_plus",
    "arg_acoustic_minus",
    "arg_gravity_plus",
    "arg_gravity_minus",
];

/// One CSV row per lattice point in [`SWEEP_HEADER`] order.
pub fn sweep_rows(grid: &[GridPoint]) -> Vec<Vec<f64>> {
    grid.iter()
        .map(|g| {
            let r = &g.result;
            vec![
                g.k,
                g.l,
                r.acoustic_modulus(),
                r.gravity_modulus(),
                r.eigenvalue(ModeLabel::AcousticPlus).arg(),
                r.eigenvalue(ModeLabel::AcousticMinus).arg(),
                r.eigenvalue(ModeLabel::GravityPlus).arg(),
                r.eigenvalue(ModeLabel::GravityMinus).arg(),
            ]
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    /// Lattice index of the first unstable horizontal wavenumber.
    pub m: usize,
    pub k: f64,
    pub cfl: f64,
}

/// Onset of acoustic growth along the horizontal wavenumber axis.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityBoundary {
    /// `None` when every sampled mode is stable.
    pub threshold: Option<Threshold>,
    /// Per `k` index, whether some vertical wavenumber has an acoustic
    /// modulus above [`INSTABILITY_THRESHOLD`].
    pub unstable: Vec<bool>,
}

impl StabilityBoundary {
    /// Stable below the threshold and unstable at and above it.
    pub fn is_sharp(&self) -> bool {
        match self.threshold {
            None => self.unstable.iter().all(|u| !u),
            Some(t) => self.unstable.iter().enumerate().all(|(m, u)| *u == (m >= t.m)),
        }
    }
}

/// Scans the lattice for the smallest `k` at which an acoustic mode grows.
pub fn acoustic_stability_boundary(scheme: Scheme, sp: &SweepParams) -> Result<StabilityBoundary> {
    let grid = sweep_grid(scheme, sp)?;
    let mut unstable = vec![false; sp.nk];
    for g in &grid {
        if g.result.acoustic_modulus() > INSTABILITY_THRESHOLD {
            unstable[g.m] = true;
        }
    }
    let threshold = unstable.iter().position(|u| *u).map(|m| Threshold {
        m,
        k: sp.k(m),
        cfl: sp.cfl(sp.k(m)),
    });
    Ok(StabilityBoundary { threshold, unstable })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: f64, l: f64, dt: f64) -> BoussinesqParams {
        BoussinesqParams {
            c: 340.0,
            n: 0.01,
            dt,
            k,
            l,
        }
    }

    fn i() -> C {
        C::new(0.0, 1.0)
    }

    fn solve3(a: [[C; 3]; 3], b: [C; 3]) -> [C; 3] {
        let m = DenseMatrix::from_fn(3, 3, |r, s| a[r][s]);
        let x = m.lu().unwrap().solve(&b);
        [x[0], x[1], x[2]]
    }

    /// The three update equations of the balanced scheme applied in turn.
    fn new_step(p: &BoussinesqParams, x: [C; 4]) -> [C; 4] {
        let [u, w, pr, b] = x;
        let (dt, k, l, c2, n2) = (p.dt, p.k, p.l, p.c * p.c, p.n * p.n);
        let u_pred = u - i() * k * dt * pr;
        // unknowns (w1, p1, b1), horizontal flux (u + u')/2 known
        let a = [
            [C::new(1.0, 0.0), i() * l * dt / 2.0, C::new(-dt / 2.0, 0.0)],
            [i() * l * c2 * dt / 2.0, C::new(1.0, 0.0), C::new(0.0, 0.0)],
            [C::new(n2 * dt / 2.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)],
        ];
        let rhs = [
            w - i() * l * dt / 2.0 * pr + b * (dt / 2.0),
            pr - i() * k * c2 * dt * (u + u_pred) / 2.0 - i() * l * c2 * dt / 2.0 * w,
            b - w * (n2 * dt / 2.0),
        ];
        let [w1, p1, b1] = solve3(a, rhs);
        let u1 = u - i() * k * dt * (pr + p1) / 2.0;
        [u1, w1, p1, b1]
    }

    fn tendency(p: &BoussinesqParams, x: [C; 4]) -> [C; 4] {
        let [u, w, pr, b] = x;
        [
            -i() * p.k * pr,
            -i() * p.l * pr + b,
            -(i() * p.k * u + i() * p.l * w) * p.c * p.c,
            -w * p.n * p.n,
        ]
    }

    /// Crank-Nicolson by fixed point iteration on the implicit average.
    fn cn_step(p: &BoussinesqParams, x: [C; 4]) -> [C; 4] {
        let mut y = x;
        for _ in 0..200 {
            let fa = tendency(p, x);
            let fb = tendency(p, y);
            y = std::array::from_fn(|j| x[j] + (fa[j] + fb[j]) * (p.dt / 2.0));
        }
        y
    }

    fn oracle_matrix(step: impl Fn([C; 4]) -> [C; 4]) -> DenseMatrix<C> {
        let mut out = DenseMatrix::zeros(4, 4);
        for j in 0..4 {
            let mut e = [C::new(0.0, 0.0); 4];
            e[j] = C::new(1.0, 0.0);
            for (r, v) in step(e).into_iter().enumerate() {
                out[(r, j)] = v;
            }
        }
        out
    }

    fn max_diff(a: &DenseMatrix<C>, b: &DenseMatrix<C>) -> f64 {
        let mut d = 0.0f64;
        for r in 0..4 {
            for s in 0..4 {
                d = d.max((a[(r, s)] - b[(r, s)]).norm());
            }
        }
        d
    }

    #[test]
    fn matrices_match_update_equations() {
        for (k, l) in [(0.01, 0.02), (0.1, 0.003), (0.0, 0.05)] {
            let p = params(k, l, 0.1);
            let a = amplification_matrix(Scheme::HeviNew, &p).unwrap();
            assert!(max_diff(&a, &oracle_matrix(|x| new_step(&p, x))) < 1e-12);
            let small = params(k, l, 0.01);
            let a = amplification_matrix(Scheme::CrankNicolson, &small).unwrap();
            assert!(max_diff(&a, &oracle_matrix(|x| cn_step(&small, x))) < 1e-12);
        }
    }

    #[test]
    fn trapezoidal_matrix_matches_its_stages() {
        let p = params(0.02, 0.03, 0.2);
        let (dt, k, l, c2, n2) = (p.dt, p.k, p.l, p.c * p.c, p.n * p.n);
        let step = |x: [C; 4]| -> [C; 4] {
            let [u, w, pr, b] = x;
            let u1 = u - i() * k * dt * pr;
            let a = [
                [C::new(1.0, 0.0), i() * l * dt / 2.0, C::new(-dt / 2.0, 0.0)],
                [i() * l * c2 * dt / 2.0, C::new(1.0, 0.0), C::new(0.0, 0.0)],
                [C::new(n2 * dt / 2.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)],
            ];
            let rhs = [
                w - i() * l * dt / 2.0 * pr + b * (dt / 2.0),
                pr - i() * k * c2 * dt * u - i() * l * c2 * dt / 2.0 * w,
                b + w * (n2 * dt / 2.0),
            ];
            let [w1, p1, b1] = solve3(a, rhs);
            let f0 = tendency(&p, x);
            let f1 = tendency(&p, [u1, w1, p1, b1]);
            std::array::from_fn(|j| x[j] + (f0[j] + f1[j]) * (dt / 2.0))
        };
        let a = amplification_matrix(Scheme::HeviTrapezoidal, &p).unwrap();
        assert!(max_diff(&a, &oracle_matrix(step)) < 1e-12);
    }

    #[test]
    fn zero_wavenumber_is_neutral_and_the_grid_anchor_is_identity() {
        for s in Scheme::ALL {
            let mut p = params(0.0, 0.0, 0.5);
            p.n = 0.0;
            let a = amplification_matrix(s, &p).unwrap();
            for (r, c) in [(0, 0), (2, 2), (1, 1), (3, 3)] {
                assert!((a[(r, c)] - 1.0).norm() < 1e-15, "{s}");
            }
            assert!(amplification_factors(s, &p).unwrap().moduli.iter().all(|m| (m - 1.0).abs() < 1e-12));
            let sp = SweepParams { nk: 2, nl: 2, ..Default::default() };
            let g = sweep_grid(s, &sp).unwrap();
            assert_eq!(g[0].result.moduli, [1.0; 4]);
        }
        // with buoyancy the uniform mode still oscillates in (w, b)
        let r = amplification_factors(Scheme::HeviNew, &params(0.0, 0.0, 0.5)).unwrap();
        assert!(r.moduli.iter().all(|m| (m - 1.0).abs() < 1e-14));
        assert!(r.eigenvalues.iter().any(|e| e.im.abs() > 1e-4));
    }

    #[test]
    fn no_buoyancy_and_no_vertical_wavenumber_decouples_w_and_b() {
        let mut p = params(0.05, 0.0, 0.5);
        p.n = 0.0;
        let a = amplification_matrix(Scheme::HeviNew, &p).unwrap();
        for r in [0, 2] {
            for s in [1, 3] {
                assert_eq!(a[(r, s)], C::new(0.0, 0.0));
                assert_eq!(a[(s, r)], C::new(0.0, 0.0));
            }
        }
        assert_eq!(a[(3, 3)], C::new(1.0, 0.0));
    }

    #[test]
    fn labels_and_pairs() {
        let r = amplification_factors(Scheme::CrankNicolson, &params(0.02, 0.01, 0.1)).unwrap();
        let ac = r.eigenvalue(ModeLabel::AcousticPlus);
        let gr = r.eigenvalue(ModeLabel::GravityPlus);
        assert!(ac.arg() > gr.arg() && gr.arg() > 0.0);
        assert!((r.eigenvalue(ModeLabel::AcousticMinus).arg() + ac.arg()).abs() < 1e-12);
        assert!(r.det_residual < 1e-10);
        // the exact trapezoidal phase of the acoustic mode
        let omega = 340.0 * (0.02f64.powi(2) + 0.01f64.powi(2)).sqrt();
        let gravity = 0.01 * 0.02 / (0.02f64.powi(2) + 0.01f64.powi(2)).sqrt();
        let expect = 2.0 * (0.05 * (omega * omega + gravity * gravity).sqrt()).atan();
        assert!((ac.arg() - expect).abs() < 1e-3 * expect, "{} {}", ac.arg(), expect);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut p = params(0.1, 0.1, 0.1);
        p.c = 0.0;
        assert!(amplification_matrix(Scheme::HeviNew, &p).is_err());
        let sp = SweepParams { nk: 0, ..Default::default() };
        assert!(sweep_grid(Scheme::HeviNew, &sp).is_err());
        assert!("leapfrog".parse::<Scheme>().is_err());
        assert_eq!("trap".parse::<Scheme>().unwrap(), Scheme::HeviTrapezoidal);
    }

    #[test]
    fn single_point_grid_is_the_identity_row() {
        let sp = SweepParams { nk: 1, nl: 1, ..Default::default() };
        let g = sweep_grid(Scheme::HeviNew, &sp).unwrap();
        assert_eq!(g.len(), 1);
        assert!((g[0].result.max_modulus() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moduli_are_symmetric_in_the_vertical_wavenumber() {
        for s in Scheme::ALL {
            for (k, l) in [(0.05, 0.08), (0.3, 0.01)] {
                let a = amplification_factors(s, &params(k, l, 0.5)).unwrap();
                let b = amplification_factors(s, &params(k, -l, 0.5)).unwrap();
                let mut ma = a.moduli;
                let mut mb = b.moduli;
                ma.sort_by(f64::total_cmp);
                mb.sort_by(f64::total_cmp);
                for (x, y) in ma.iter().zip(&mb) {
                    assert!((x - y).abs() < 1e-10 * x.max(1.0));
                }
            }
        }
    }

    #[test]
    fn crank_nicolson_has_no_boundary() {
        let sp = SweepParams { nk: 16, nl: 16, ..Default::default() };
        let b = acoustic_stability_boundary(Scheme::CrankNicolson, &sp).unwrap();
        assert!(b.threshold.is_none() && b.is_sharp());
    }
}
