use crate::error::Result;
use crate::mesh::{MeshOperators, Space};
use crate::thermo::{exner_load_points, PhysConstants};

/// Time averaged variational derivatives over one step.
///
/// `v_bar` and `w_bar` are mass fluxes, `phi_bar` the Bernoulli function
/// and `pi_bar` the Exner pressure, all as coefficients. The load vectors
/// `<gamma, .>` of the two scalars are kept as well since every product
/// with a Q mass matrix reduces to them.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxSet {
    pub v_bar: Vec<f64>,
    pub w_bar: Vec<f64>,
    pub phi_bar: Vec<f64>,
    pub pi_bar: Vec<f64>,
    pub phi_load: Vec<f64>,
    pub pi_load: Vec<f64>,
}

/// The two time levels entering the flux averages. `v_prov` is the
/// provisional horizontal velocity standing in for `v` at the new level.
#[derive(Clone, Copy, Debug)]
pub struct FluxLevels<'a> {
    pub v_n: &'a [f64],
    pub v_prov: &'a [f64],
    pub w_n: &'a [f64],
    pub w_next: &'a [f64],
    pub rho_n: &'a [f64],
    pub rho_next: &'a [f64],
    pub theta_d_n: &'a [f64],
    pub theta_d_next: &'a [f64],
}

/// Point values needed by the averages, shared with the stepper.
pub(crate) struct PointLevels<'a> {
    pub vn: &'a [f64],
    pub vp: &'a [f64],
    pub wn: &'a [f64],
    pub w1: &'a [f64],
    pub rn: &'a [f64],
    pub r1: &'a [f64],
    pub pi_load_n: &'a [f64],
    pub pi_load_1: &'a [f64],
}

pub(crate) fn averages_from_points(ops: &MeshOperators, z_q: &[f64], g: f64, l: &PointLevels<'_>) -> FluxSet {
    let n = z_q.len();
    let third = 1.0 / 3.0;
    let sixth = 1.0 / 6.0;
    let mut fv = vec![0.0; n];
    let mut fw = vec![0.0; n];
    let mut phi = vec![0.0; n];
    for k in 0..n {
        let (a, b) = (l.rn[k], l.r1[k]);
        fv[k] = (third * a + sixth * b) * l.vn[k] + (sixth * a + third * b) * l.vp[k];
        fw[k] = (third * a + sixth * b) * l.wn[k] + (sixth * a + third * b) * l.w1[k];
        let kin = l.vn[k] * l.vn[k] + l.vn[k] * l.vp[k] + l.vp[k] * l.vp[k]
            + l.wn[k] * l.wn[k]
            + l.wn[k] * l.w1[k]
            + l.w1[k] * l.w1[k];
        phi[k] = sixth * kin + g * z_q[k];
    }
    let v_bar = ops.m_par_inv.solve(&ops.load(Space::Upar, &fv));
    let w_bar = ops.m_perp_inv.solve(&ops.load(Space::Uperp, &fw));
    let phi_load = ops.load(Space::Q, &phi);
    let pi_load: Vec<f64> = l.pi_load_n.iter().zip(l.pi_load_1).map(|(a, b)| 0.5 * (a + b)).collect();
    FluxSet {
        v_bar,
        w_bar,
        phi_bar: ops.m_q_inv.solve(&phi_load),
        pi_bar: ops.m_q_inv.solve(&pi_load),
        phi_load,
        pi_load,
    }
}

/// Exact time integrals of the mass fluxes, Bernoulli function and Exner
/// pressure for fields linear in time between the two levels.
///
/// The mass fluxes use the 1/3, 1/6 weighting of the products of density
/// and velocity, the Bernoulli function the six term kinetic average and
/// the Exner pressure the mean of its two end values.
pub fn flux_time_averages(ops: &MeshOperators, c: &PhysConstants, lv: &FluxLevels<'_>) -> Result<FluxSet> {
    let m = &ops.mesh;
    let at = |s, x: &[f64]| m.eval(s, x, crate::mesh::Rule::Collocated);
    let vn = at(Space::Upar, lv.v_n)?;
    let vp = at(Space::Upar, lv.v_prov)?;
    let wn = at(Space::Uperp, lv.w_n)?;
    let w1 = at(Space::Uperp, lv.w_next)?;
    let rn = at(Space::Q, lv.rho_n)?;
    let r1 = at(Space::Q, lv.rho_next)?;
    let pn = exner_load_points(ops, &at(Space::Q, lv.theta_d_n)?, c)?;
    let p1 = exner_load_points(ops, &at(Space::Q, lv.theta_d_next)?, c)?;
    let z_q: Vec<f64> = m.quad_points(crate::mesh::Rule::Collocated).iter().map(|q| q.z).collect();
    Ok(averages_from_points(
        ops,
        &z_q,
        c.g,
        &PointLevels {
            vn: &vn,
            vp: &vp,
            wn: &wn,
            w1: &w1,
            rn: &rn,
            r1: &r1,
            pi_load_n: &pn,
            pi_load_1: &p1,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Rule};

    fn setup() -> (MeshOperators, PhysConstants) {
        (
            MeshOperators::new(build_mesh(2, 3, 2, 2.0, 3.0).unwrap()).unwrap(),
            PhysConstants::default(),
        )
    }

    #[test]
    fn frozen_levels_give_pointwise_products() {
        let (o, c) = setup();
        let m = &o.mesh;
        let v = m.reduce(Space::Upar, |x, z| 1.0 + x * z);
        let w = m.reduce(Space::Uperp, |x, z| x.sin() * z * (3.0 - z));
        let rho = m.reduce(Space::Q, |x, z| 1.0 + 0.1 * x - 0.05 * z);
        let td = m.reduce(Space::Q, |_, z| 300.0 - z);
        let lv = FluxLevels {
            v_n: &v,
            v_prov: &v,
            w_n: &w,
            w_next: &w,
            rho_n: &rho,
            rho_next: &rho,
            theta_d_n: &td,
            theta_d_next: &td,
        };
        let f = flux_time_averages(&o, &c, &lv).unwrap();
        let at = |s, x: &[f64]| m.eval(s, x, Rule::Collocated).unwrap();
        let (rq, vq, wq) = (at(Space::Q, &rho), at(Space::Upar, &v), at(Space::Uperp, &w));
        let fv: Vec<f64> = rq.iter().zip(&vq).map(|(r, v)| r * v).collect();
        let expect = o.m_par_inv.solve(&o.load(Space::Upar, &fv));
        for (a, b) in f.v_bar.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13 * b.abs().max(1.0));
        }
        let zq: Vec<f64> = m.quad_points(Rule::Collocated).iter().map(|q| q.z).collect();
        let phi: Vec<f64> = (0..zq.len()).map(|k| 0.5 * (vq[k] * vq[k] + wq[k] * wq[k]) + c.g * zq[k]).collect();
        for (a, b) in f.phi_load.iter().zip(o.load(Space::Q, &phi)) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
        let pi = exner_load_points(&o, &at(Space::Q, &td), &c).unwrap();
        assert_eq!(f.pi_load, pi);
    }

    #[test]
    fn linear_in_time_products_are_integrated_exactly() {
        let (o, c) = setup();
        let m = &o.mesh;
        let w0 = m.reduce(Space::Uperp, |x, z| x * z * (3.0 - z));
        let w1 = m.reduce(Space::Uperp, |x, z| (1.0 - x) * z * (3.0 - z));
        let r0 = m.reduce(Space::Q, |_, z| 1.2 - 0.1 * z);
        let r1 = m.reduce(Space::Q, |x, _| 0.9 + 0.1 * x);
        let v = vec![0.0; m.dim(Space::Upar)];
        let td = m.reduce(Space::Q, |_, _| 300.0);
        let lv = FluxLevels {
            v_n: &v,
            v_prov: &v,
            w_n: &w0,
            w_next: &w1,
            rho_n: &r0,
            rho_next: &r1,
            theta_d_n: &td,
            theta_d_next: &td,
        };
        let f = flux_time_averages(&o, &c, &lv).unwrap();
        let at = |s, x: &[f64]| m.eval(s, x, Rule::Collocated).unwrap();
        let (a0, a1, b0, b1) = (at(Space::Q, &r0), at(Space::Q, &r1), at(Space::Uperp, &w0), at(Space::Uperp, &w1));
        // two point Gauss in time is exact for the quadratic products
        let nodes = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        let mut fw = vec![0.0; a0.len()];
        let mut kin = vec![0.0; a0.len()];
        for s in nodes {
            for k in 0..fw.len() {
                let r = a0[k] + s * (a1[k] - a0[k]);
                let w = b0[k] + s * (b1[k] - b0[k]);
                fw[k] += 0.5 * r * w;
                kin[k] += 0.25 * w * w;
            }
        }
        let expect = o.m_perp_inv.solve(&o.load(Space::Uperp, &fw));
        for (a, b) in f.w_bar.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13 * b.abs().max(1.0));
        }
        let zq: Vec<f64> = m.quad_points(Rule::Collocated).iter().map(|q| q.z).collect();
        let phi: Vec<f64> = (0..zq.len()).map(|k| kin[k] + c.g * zq[k]).collect();
        for (a, b) in f.phi_load.iter().zip(o.load(Space::Q, &phi)) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }
}
