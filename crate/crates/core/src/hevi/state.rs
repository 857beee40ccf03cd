use crate::error::{Error, Result};
use crate::mesh::{MeshComplex, Rule, Space};

/// Prognostic coefficients at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    /// Horizontal velocity in U_par.
    pub v: Vec<f64>,
    /// Vertical velocity in U_perp (wall values are not stored).
    pub w: Vec<f64>,
    /// Density in Q.
    pub rho: Vec<f64>,
    /// Density weighted potential temperature in Q.
    pub theta_d: Vec<f64>,
    pub t: f64,
}

impl StateVector {
    /// Zero velocity with the given thermodynamic fields.
    pub fn at_rest(mesh: &MeshComplex, rho: Vec<f64>, theta_d: Vec<f64>) -> Self {
        Self {
            v: vec![0.0; mesh.dim(Space::Upar)],
            w: vec![0.0; mesh.dim(Space::Uperp)],
            rho,
            theta_d,
            t: 0.0,
        }
    }

    /// Checks lengths and positivity of density and Theta at the
    /// collocated points.
    pub fn check(&self, mesh: &MeshComplex) -> Result<()> {
        for (what, space, len) in [
            ("v", Space::Upar, self.v.len()),
            ("w", Space::Uperp, self.w.len()),
            ("rho", Space::Q, self.rho.len()),
            ("Theta", Space::Q, self.theta_d.len()),
        ] {
            if mesh.dim(space) != len {
                return Err(Error::Dimension {
                    what,
                    expected: mesh.dim(space),
                    got: len,
                });
            }
        }
        for (what, c) in [("density", &self.rho), ("Theta", &self.theta_d)] {
            let vals = mesh.eval(Space::Q, c, Rule::Collocated)?;
            if let Some(k) = vals.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::Thermodynamic(format!("{what} = {:e} at quadrature point {k}", vals[k])));
            }
        }
        Ok(())
    }
}
