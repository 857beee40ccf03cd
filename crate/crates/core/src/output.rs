//! CSV writers. Floats are printed with 17 significant digits so that
//! values read back bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{MeshComplex, Rule, Space};

/// Formats one float for output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `header` and then one line per row.
pub fn write_timeseries(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Dimension {
                what: "time series row",
                expected: header.len(),
                got: row.len(),
            });
        }
        let line: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Writes `x,z,value` for every collocated quadrature point of a field.
pub fn write_field_csv(path: &Path, mesh: &MeshComplex, space: Space, coeffs: &[f64]) -> Result<()> {
    let vals = mesh.eval(space, coeffs, Rule::Collocated)?;
    let pts = mesh.quad_points(Rule::Collocated);
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "x,z,value")?;
    for (q, v) in pts.iter().zip(&vals) {
        writeln!(f, "{},{},{}", fmt_f64(q.x), fmt_f64(q.z), fmt_f64(*v))?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    #[test]
    fn header_only_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_timeseries(&p, &["t", "x"], &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "t,x\n");
        let x = 0.1 + 0.2;
        write_timeseries(&p, &["t", "x"], &[vec![1.0 / 3.0, x]]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let vals: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(vals, vec![1.0 / 3.0, x]);
        assert!(write_timeseries(&p, &["t"], &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn field_dump_has_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_mesh(2, 3, 2, 1.0, 1.0).unwrap();
        let theta = m.reduce(Space::Theta, |x, z| x + z);
        let p = dir.path().join("theta.csv");
        write_field_csv(&p, &m, Space::Theta, &theta).unwrap();
        let n = std::fs::read_to_string(&p).unwrap().lines().count();
        assert_eq!(n, 1 + m.n_points(Rule::Collocated));
    }
}
