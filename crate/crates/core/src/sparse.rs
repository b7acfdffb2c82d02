//! Minimal coordinate-format operator for the hot loops of the master equations.
//!
//! Ladder operators and the interaction Hamiltonians have O(D) nonzeros, so
//! sparse-times-dense products cost O(D²) instead of O(D³).

use crate::hilbert::{CMatrix, C64};

#[derive(Debug, Clone)]
pub(crate) struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_dense(m: &CMatrix) -> Self {
        assert!(m.is_square());
        let mut entries = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        Self {
            dim: m.nrows(),
            entries,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        }
    }

    /// `out += coeff * self * x`
    pub fn left_acc(&self, coeff: C64, x: &CMatrix, out: &mut CMatrix) {
        let n = self.dim;
        debug_assert_eq!(x.nrows(), n);
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for &(r, c, v) in &self.entries {
            let w = coeff * v;
            for (d, s) in os[r..].iter_mut().step_by(n).zip(xs[c..].iter().step_by(n)) {
                *d += w * *s;
            }
        }
    }

    /// `out += coeff * x * self`
    pub fn right_acc(&self, coeff: C64, x: &CMatrix, out: &mut CMatrix) {
        let n = self.dim;
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for &(r, c, v) in &self.entries {
            let w = coeff * v;
            let src = &xs[r * n..(r + 1) * n];
            let dst = &mut os[c * n..(c + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * *s;
            }
        }
    }

    /// `Tr[self * x]`
    pub fn trace_with(&self, x: &CMatrix) -> C64 {
        self.entries.iter().map(|&(r, c, v)| v * x[(c, r)]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{mode_lowering, Mode, ModeDims};

    fn test_matrix(n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| {
            C64::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05)
        })
    }

    #[test]
    fn products_match_dense() {
        let dims = ModeDims::new(3, 2, 3).unwrap();
        let a =
            mode_lowering(Mode::Cavity1, dims) + mode_lowering(Mode::Mechanics, dims).adjoint() * C64::new(0.0, 0.3);
        let s = SparseOp::from_dense(&a);
        let x = test_matrix(dims.total());
        let coeff = C64::new(0.5, -1.5);

        let mut out = CMatrix::zeros(18, 18);
        s.left_acc(coeff, &x, &mut out);
        assert!((out - (&a * &x) * coeff).norm() < 1e-12);

        let mut out = CMatrix::zeros(18, 18);
        s.right_acc(coeff, &x, &mut out);
        assert!((out - (&x * &a) * coeff).norm() < 1e-12);

        let sa = s.adjoint();
        let mut out = CMatrix::zeros(18, 18);
        sa.left_acc(C64::from(1.0), &x, &mut out);
        assert!((out - a.adjoint() * &x).norm() < 1e-12);

        assert!((s.trace_with(&x) - (&a * &x).trace()).norm() < 1e-12);
    }
}
