use super::dense::{DenseMatrix, LuFactors};
use super::sparse::CsrMatrix;
use crate::error::Result;

/// Direct solver for a sparse matrix that decouples into small blocks.
///
/// The connected components of the sparsity graph are found once and each
/// block is factored densely. Mass matrices under collocated quadrature
/// split this way into blocks of at most one element.
#[derive(Clone, Debug)]
pub struct BlockSolver {
    n: usize,
    blocks: Vec<(Vec<usize>, LuFactors<f64>)>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl BlockSolver {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "block solver needs a square matrix");
        let n = a.nrows();
        let mut parent: Vec<usize> = (0..n).collect();
        for (i, j, _) in a.iter() {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let r = find(&mut parent, i);
            members[r].push(i);
        }
        let mut local = vec![0usize; n];
        let mut blocks = Vec::new();
        for idx in members.into_iter().filter(|m| !m.is_empty()) {
            for (k, &g) in idx.iter().enumerate() {
                local[g] = k;
            }
            let mut d = DenseMatrix::zeros(idx.len(), idx.len());
            for (k, &g) in idx.iter().enumerate() {
                let (c, v) = a.row(g);
                for (&j, &x) in c.iter().zip(v) {
                    d[(k, local[j])] = x;
                }
            }
            blocks.push((idx, d.lu()?));
        }
        Ok(Self { n, blocks })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.0.len()).max().unwrap_or(0)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        let mut buf = Vec::new();
        for (idx, lu) in &self.blocks {
            buf.clear();
            buf.extend(idx.iter().map(|&g| b[g]));
            lu.solve_in_place(&mut buf);
            for (&g, &v) in idx.iter().zip(&buf) {
                x[g] = v;
            }
        }
        x
    }

    /// The inverse as a sparse matrix with the same block structure.
    pub fn inverse(&self) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for (idx, lu) in &self.blocks {
            let n = idx.len();
            for c in 0..n {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                lu.solve_in_place(&mut e);
                for (r, v) in e.into_iter().enumerate() {
                    t.push((idx[r], idx[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(self.n, self.n, &t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blocks_solved_independently() {
        let a = CsrMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 2.0), (0, 2, 1.0), (2, 0, 1.0), (2, 2, 3.0), (1, 1, 4.0), (3, 3, 5.0)],
        );
        let s = BlockSolver::new(&a).unwrap();
        assert_eq!(s.largest_block(), 2);
        let x = vec![1.0, -1.0, 2.0, 0.5];
        let y = s.solve(&a.matvec(&x));
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-15);
        }
        let inv = s.inverse();
        let y2 = inv.matvec(&a.matvec(&x));
        for (u, v) in x.iter().zip(&y2) {
            assert!((u - v).abs() < 1e-14);
        }
    }
}
