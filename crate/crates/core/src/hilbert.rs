//! Truncated Fock-space linear algebra on the three-mode composite space.
//!
//! The composite space is always ordered cavity-1 ⊗ cavity-2 ⊗ mechanics, so
//! the basis state `|n1, n2, nb⟩` sits at index `(n1 * d2 + n2) * dm + nb`.
//! Everything here is dense; composite dimensions stay below about a thousand.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type Ket = DVector<C64>;
pub type DensityOp = CMatrix;

/// Coherent-state tail mass allowed to fall outside a truncation.
pub const TAIL_TOLERANCE: f64 = 1e-10;
/// Headroom kept above the Poisson cutoff for ladder action of the interaction.
pub const TRUNCATION_HEADROOM: usize = 2;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Per-mode Fock cutoffs for cavity-1, cavity-2 and the mechanics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeDims {
    pub d1: usize,
    pub d2: usize,
    pub dm: usize,
}

impl ModeDims {
    pub fn new(d1: usize, d2: usize, dm: usize) -> Result<Self> {
        for (name, d) in [("d1", d1), ("d2", d2), ("dm", dm)] {
            if d < 2 {
                return Err(Error::InvalidDimension(format!("{name} = {d} < 2")));
            }
        }
        Ok(Self { d1, d2, dm })
    }

    pub fn total(&self) -> usize {
        self.d1 * self.d2 * self.dm
    }

    pub fn of(&self, mode: Mode) -> usize {
        match mode {
            Mode::Cavity1 => self.d1,
            Mode::Cavity2 => self.d2,
            Mode::Mechanics => self.dm,
        }
    }

    pub fn index(&self, n1: usize, n2: usize, nb: usize) -> usize {
        debug_assert!(n1 < self.d1 && n2 < self.d2 && nb < self.dm);
        (n1 * self.d2 + n2) * self.dm + nb
    }

    /// Inverse of [`ModeDims::index`].
    pub fn occupations(&self, index: usize) -> (usize, usize, usize) {
        let nb = index % self.dm;
        let rest = index / self.dm;
        (rest / self.d2, rest % self.d2, nb)
    }

    fn as_array(&self) -> [usize; 3] {
        [self.d1, self.d2, self.dm]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Cavity1,
    Cavity2,
    Mechanics,
}

impl Mode {
    fn position(self) -> usize {
        match self {
            Mode::Cavity1 => 0,
            Mode::Cavity2 => 1,
            Mode::Mechanics => 2,
        }
    }
}

/// Truncated annihilation operator with `⟨n-1|a|n⟩ = √n`.
pub fn annihilation(dim: usize) -> Result<CMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("mode dimension {dim} < 2")));
    }
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    Ok(a)
}

pub fn creation(dim: usize) -> Result<CMatrix> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number(dim: usize) -> Result<CMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("mode dimension {dim} < 2")));
    }
    Ok(CMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        (0..dim).map(|n| C64::from(n as f64)),
    )))
}

/// Kronecker embedding of a single-mode operator into the composite space.
pub fn embed(op: &CMatrix, mode: Mode, dims: ModeDims) -> Result<CMatrix> {
    let d = dims.of(mode);
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: op.nrows().max(op.ncols()),
        });
    }
    let eye = |n: usize| CMatrix::identity(n, n);
    Ok(match mode {
        Mode::Cavity1 => op.kronecker(&eye(dims.d2)).kronecker(&eye(dims.dm)),
        Mode::Cavity2 => eye(dims.d1).kronecker(op).kronecker(&eye(dims.dm)),
        Mode::Mechanics => eye(dims.d1).kronecker(&eye(dims.d2)).kronecker(op),
    })
}

/// Annihilation operator of `mode` on the composite space.
pub fn mode_lowering(mode: Mode, dims: ModeDims) -> CMatrix {
    // dims are validated at construction, so this cannot fail
    embed(&annihilation(dims.of(mode)).unwrap(), mode, dims).unwrap()
}

/// Basis vector `|n1, n2, nb⟩`.
pub fn basis_ket(dims: ModeDims, n1: usize, n2: usize, nb: usize) -> Ket {
    let mut k = Ket::zeros(dims.total());
    k[dims.index(n1, n2, nb)] = ONE;
    k
}

pub fn single_mode_basis(dim: usize, n: usize) -> Ket {
    let mut k = Ket::zeros(dim);
    k[n] = ONE;
    k
}

/// `(ln p_n)` for the Poisson distribution of mean `x`, n = 0..len.
fn poisson_log_weights(x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut ln_fact = 0.0;
    for n in 0..len {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        let w = if x == 0.0 {
            if n == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            -x + n as f64 * x.ln() - ln_fact
        };
        out.push(w);
    }
    out
}

/// Weight of a coherent state of amplitude `|beta|` outside the first `dim` levels.
pub fn coherent_tail_mass(beta_abs: f64, dim: usize) -> f64 {
    let x = beta_abs * beta_abs;
    let span = (x + 40.0 * x.sqrt() + 60.0).ceil() as usize;
    let len = span.max(dim + 1);
    let logs = poisson_log_weights(x, len);
    logs[dim.min(len)..].iter().map(|l| l.exp()).sum()
}

/// Smallest cutoff whose Poisson tail is below [`TAIL_TOLERANCE`], plus headroom.
pub fn required_dim(beta_abs: f64) -> usize {
    let x = beta_abs * beta_abs;
    let span = (x + 40.0 * x.sqrt() + 60.0).ceil() as usize;
    let logs = poisson_log_weights(x, span);
    let mut tail: f64 = 0.0;
    let mut cutoff = span;
    for n in (0..span).rev() {
        tail += logs[n].exp();
        if tail >= TAIL_TOLERANCE {
            cutoff = n + 1;
            break;
        }
        cutoff = n;
    }
    cutoff.max(1) + TRUNCATION_HEADROOM
}

pub fn truncation_ok(beta_abs: f64, dim: usize) -> bool {
    dim >= required_dim(beta_abs)
}

fn check_truncation(beta_abs: f64, dim: usize) -> Result<()> {
    let required = required_dim(beta_abs);
    if dim < required {
        return Err(Error::Truncation {
            beta: beta_abs,
            dim,
            tail: coherent_tail_mass(beta_abs, dim),
            required,
        });
    }
    Ok(())
}

/// Coherent state `|beta⟩` truncated to `dim` levels and renormalized.
pub fn coherent_ket(beta: C64, dim: usize) -> Result<Ket> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("mode dimension {dim} < 2")));
    }
    check_truncation(beta.norm(), dim)?;
    let r = beta.norm();
    if r == 0.0 {
        return Ok(single_mode_basis(dim, 0));
    }
    let phase = beta.arg();
    let logs = poisson_log_weights(r * r, dim);
    let mut k = Ket::from_iterator(
        dim,
        logs.iter()
            .enumerate()
            .map(|(n, l)| C64::from_polar((0.5 * l).exp(), n as f64 * phase)),
    );
    let norm = k.norm();
    k /= C64::from(norm);
    Ok(k)
}

/// Displacement operator `exp(beta b† - beta* b)` on a `dim`-level mode.
///
/// Requires one extra unit of amplitude of headroom so that `D(beta)` acting on
/// the lowest levels stays away from the truncation edge.
pub fn displacement(beta: C64, dim: usize) -> Result<CMatrix> {
    check_truncation(beta.norm() + 1.0, dim)?;
    let b = annihilation(dim)?;
    let generator = (b.adjoint() * beta - &b * beta.conj()) * I;
    unitary(&generator, 1.0)
}

pub(crate) fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Hermiticity check, relative to the matrix scale once entries exceed one.
pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && hermitian_defect(m) <= tol * max_abs(m).max(1.0)
}

fn require_hermitian(h: &CMatrix) -> Result<()> {
    if !h.is_square() {
        return Err(Error::ContractViolation(format!(
            "generator is {}x{}, not square",
            h.nrows(),
            h.ncols()
        )));
    }
    if !is_hermitian(h, 1e-12) {
        return Err(Error::ContractViolation(format!(
            "generator is not Hermitian (defect {:e})",
            hermitian_defect(h)
        )));
    }
    Ok(())
}

fn eigh(h: &CMatrix) -> SymmetricEigen<C64, nalgebra::Dyn> {
    // symmetrize so round-off in the input cannot leak into the decomposition
    let sym = (h + h.adjoint()) * C64::from(0.5);
    SymmetricEigen::new(sym)
}

/// `exp(-i H t)` through the Hermitian eigendecomposition of `H`.
pub fn unitary(h: &CMatrix, t: f64) -> Result<CMatrix> {
    require_hermitian(h)?;
    let eig = eigh(h);
    let v = &eig.eigenvectors;
    let phases = DVector::from_iterator(v.ncols(), eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * t)));
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    Ok(scaled * v.adjoint())
}

/// `exp(-i H t) psi`.
pub fn expm_apply(h: &CMatrix, t: f64, psi: &Ket) -> Result<Ket> {
    require_hermitian(h)?;
    if psi.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            got: psi.len(),
        });
    }
    let eig = eigh(h);
    let v = &eig.eigenvectors;
    let mut coeffs = v.adjoint() * psi;
    for (c, &l) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c *= C64::from_polar(1.0, -l * t);
    }
    Ok(v * coeffs)
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = eigh(h).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm(h: &CMatrix) -> f64 {
    eigh(h).eigenvalues.iter().map(|l| l.abs()).sum()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn projector(psi: &Ket) -> DensityOp {
    psi * psi.adjoint()
}

pub fn expectation(op: &CMatrix, rho: &DensityOp) -> C64 {
    (op * rho).trace()
}

/// Reduced operator on the modes in `keep` (taken in the fixed mode order).
pub fn partial_trace(rho: &DensityOp, keep: &[Mode], dims: ModeDims) -> Result<DensityOp> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument(
            "partial trace needs at least one kept mode".into(),
        ));
    }
    let n = dims.total();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rho.nrows(),
        });
    }
    let d = dims.as_array();
    let mut kept = [false; 3];
    for m in keep {
        kept[m.position()] = true;
    }
    let out_dim: usize = (0..3).filter(|&k| kept[k]).map(|k| d[k]).product();
    let traced_dim: usize = (0..3).filter(|&k| !kept[k]).map(|k| d[k]).product();

    // split a composite index into (kept index, traced index)
    let split = |idx: usize| -> (usize, usize) {
        let occ = [idx / (d[1] * d[2]), (idx / d[2]) % d[1], idx % d[2]];
        let (mut ki, mut ti) = (0, 0);
        for k in 0..3 {
            if kept[k] {
                ki = ki * d[k] + occ[k];
            } else {
                ti = ti * d[k] + occ[k];
            }
        }
        (ki, ti)
    };
    let parts: Vec<(usize, usize)> = (0..n).map(split).collect();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for i in 0..n {
        let (ki, ti) = parts[i];
        for j in 0..n {
            let (kj, tj) = parts[j];
            if ti == tj {
                out[(ki, kj)] += rho[(i, j)];
            }
        }
    }
    debug_assert!(traced_dim >= 1);
    Ok(out)
}

/// Checks the density-operator contract: Hermitian, declared trace, no negative eigenvalues.
pub fn check_density(rho: &DensityOp, expected_trace: f64) -> Result<()> {
    let defect = hermitian_defect(rho);
    if defect > 1e-10 {
        return Err(Error::ContractViolation(format!(
            "density operator not Hermitian (defect {defect:e})"
        )));
    }
    let tr = rho.trace();
    if (tr.re - expected_trace).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::ContractViolation(format!(
            "density operator trace {tr} differs from {expected_trace}"
        )));
    }
    let min = hermitian_eigenvalues(rho)[0];
    if min < -1e-8 {
        return Err(Error::ContractViolation(format!(
            "density operator has eigenvalue {min:e}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn annihilation_small_dims() {
        let a = annihilation(2).unwrap();
        assert_eq!(a[(0, 1)], ONE);
        assert_eq!(a[(0, 0)], ZERO);
        assert_eq!(a[(1, 0)], ZERO);
        assert_eq!(a[(1, 1)], ZERO);
        let a3 = annihilation(3).unwrap();
        assert_eq!(a3[(1, 2)], C64::from(2f64.sqrt()));
        assert!(matches!(annihilation(1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn truncated_commutator_edge() {
        let a = annihilation(10).unwrap();
        let c = commutator(&a, &a.adjoint());
        for i in 0..10 {
            for j in 0..10 {
                let want = match (i, j) {
                    (9, 9) => C64::from(-9.0),
                    (i, j) if i == j => ONE,
                    _ => ZERO,
                };
                assert!(close(c[(i, j)], want, 1e-12), "({i},{j}) = {}", c[(i, j)]);
            }
        }
    }

    #[test]
    fn number_operator_diagonal() {
        let a = annihilation(6).unwrap();
        let n = a.adjoint() * &a;
        assert!((n - number(6).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn embed_identity_and_commuting_modes() {
        let dims = ModeDims::new(2, 3, 4).unwrap();
        for mode in [Mode::Cavity1, Mode::Cavity2, Mode::Mechanics] {
            let d = dims.of(mode);
            let e = embed(&CMatrix::identity(d, d), mode, dims).unwrap();
            assert_eq!(e, CMatrix::identity(24, 24));
        }
        let a1 = mode_lowering(Mode::Cavity1, dims);
        let a2 = mode_lowering(Mode::Cavity2, dims);
        assert_eq!(commutator(&a1, &a2.adjoint()), CMatrix::zeros(24, 24));
        // exact equality of the products, not just a small commutator
        assert_eq!(&a1 * a2.adjoint(), a2.adjoint() * &a1);
    }

    #[test]
    fn embed_number_on_mechanics() {
        let dims = ModeDims::new(2, 2, 4).unwrap();
        let n = embed(&number(4).unwrap(), Mode::Mechanics, dims).unwrap();
        let k = basis_ket(dims, 0, 0, 2);
        assert!((n * &k - &k * C64::from(2.0)).norm() < 1e-14);
    }

    #[test]
    fn embed_rejects_wrong_size() {
        let dims = ModeDims::new(2, 3, 4).unwrap();
        let err = embed(&annihilation(3).unwrap(), Mode::Cavity1, dims).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn mode_dims_reject_small() {
        assert!(ModeDims::new(2, 1, 3).is_err());
        let dims = ModeDims::new(3, 3, 5).unwrap();
        for idx in 0..dims.total() {
            let (a, b, c) = dims.occupations(idx);
            assert_eq!(dims.index(a, b, c), idx);
        }
    }

    #[test]
    fn coherent_components() {
        let vac = coherent_ket(ZERO, 5).unwrap();
        assert_eq!(vac, single_mode_basis(5, 0));
        let k = coherent_ket(ONE, 25).unwrap();
        assert!((k[1].re - (-0.5f64).exp()).abs() < 1e-12);
        let k2 = coherent_ket(C64::from(2.0), 40).unwrap();
        let n = number(40).unwrap();
        let mean = (k2.adjoint() * n * &k2)[(0, 0)];
        assert!((mean.re - 4.0).abs() < 1e-9);
    }

    #[test]
    fn coherent_rejects_short_truncation() {
        match coherent_ket(C64::from(3.0), 8) {
            Err(Error::Truncation { tail, required, .. }) => {
                assert!(tail > 1e-10);
                assert!(required > 8);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn required_dim_bounds_tail() {
        for beta in [0.0, 0.3, 1.0, 2.0, 5.0, 8.0] {
            let d = required_dim(beta);
            let cutoff = d - TRUNCATION_HEADROOM;
            assert!(coherent_tail_mass(beta, cutoff) < TAIL_TOLERANCE);
            if cutoff > 1 {
                assert!(coherent_tail_mass(beta, cutoff - 1) >= TAIL_TOLERANCE);
            }
        }
        assert_eq!(required_dim(1.0), 15);
    }

    #[test]
    fn displacement_matches_coherent_state() {
        let d0 = displacement(ZERO, 16).unwrap();
        assert!((d0 - CMatrix::identity(16, 16)).norm() < 1e-12);
        assert!(matches!(displacement(ZERO, 6), Err(Error::Truncation { .. })));

        let d = displacement(ONE, 30).unwrap();
        let from_d = d.column(0).into_owned();
        let direct = coherent_ket(ONE, 30).unwrap();
        let worst = (from_d - direct).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        assert!(worst <= 1e-8, "max component difference {worst:e}");

        let b = C64::from(1.5);
        let prod = displacement(b, 40).unwrap() * displacement(-b, 40).unwrap();
        assert!(max_abs(&(prod - CMatrix::identity(40, 40))) < 1e-8);
    }

    #[test]
    fn displacement_shifts_lowering_operator() {
        let dim = 40;
        let beta = C64::new(1.2, -0.4);
        let d = displacement(beta, dim).unwrap();
        let b = annihilation(dim).unwrap();
        let shifted = d.adjoint() * &b * &d;
        let want = &b + CMatrix::identity(dim, dim) * beta;
        for i in 0..10 {
            for j in 0..10 {
                assert!(close(shifted[(i, j)], want[(i, j)], 1e-8));
            }
        }
    }

    #[test]
    fn partial_trace_of_products() {
        let dims = ModeDims::new(2, 3, 2).unwrap();
        let r1 = CMatrix::from_row_slice(
            2,
            2,
            &[C64::from(0.7), C64::new(0.1, 0.2), C64::new(0.1, -0.2), C64::from(0.3)],
        );
        let r2 = projector(&coherent_ket(C64::from(0.0), 3).unwrap());
        let rm = CMatrix::from_diagonal_element(2, 2, C64::from(0.5));
        let full = r1.kronecker(&r2).kronecker(&rm);
        let red = partial_trace(&full, &[Mode::Cavity1], dims).unwrap();
        assert!((red - &r1).norm() < 1e-12);
        let red2 = partial_trace(&full, &[Mode::Cavity2, Mode::Cavity1], dims).unwrap();
        assert!((red2 - r1.kronecker(&r2)).norm() < 1e-12);
        assert!(partial_trace(&full, &[], dims).is_err());
    }

    #[test]
    fn partial_trace_bell_pair() {
        let dims = ModeDims::new(2, 2, 2).unwrap();
        let s = C64::from(std::f64::consts::FRAC_1_SQRT_2);
        let psi = (basis_ket(dims, 0, 1, 0) + basis_ket(dims, 1, 0, 0)) * s;
        let red = partial_trace(&projector(&psi), &[Mode::Cavity1], dims).unwrap();
        let want = CMatrix::from_diagonal_element(2, 2, C64::from(0.5));
        assert!((red - want).norm() < 1e-12);
    }

    #[test]
    fn expm_apply_contract() {
        let dims = ModeDims::new(2, 2, 2).unwrap();
        let a1 = mode_lowering(Mode::Cavity1, dims);
        let a2 = mode_lowering(Mode::Cavity2, dims);
        let g = 0.7;
        let h = (a1.adjoint() * &a2 + &a1 * a2.adjoint()) * C64::from(g);
        let psi = basis_ket(dims, 0, 1, 0);
        assert!((expm_apply(&h, 0.0, &psi).unwrap() - &psi).norm() < 1e-14);
        let out = expm_apply(&h, std::f64::consts::FRAC_PI_2 / g, &psi).unwrap();
        let want = basis_ket(dims, 1, 0, 0) * (-I);
        assert!((out - want).norm() < 1e-12);

        let not_h = &a1 * C64::from(1.0);
        assert!(matches!(
            expm_apply(&not_h, 1.0, &psi),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn check_density_flags_problems() {
        let good = CMatrix::from_diagonal_element(3, 3, C64::from(1.0 / 3.0));
        assert!(check_density(&good, 1.0).is_ok());
        let mut bad = good.clone();
        bad[(0, 0)] = C64::from(-0.1);
        assert!(check_density(&bad, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_hermitian(dim: usize, entries: &[(f64, f64)]) -> CMatrix {
            let mut h = CMatrix::zeros(dim, dim);
            let mut it = entries.iter();
            for i in 0..dim {
                for j in i..dim {
                    let &(re, im) = it.next().unwrap();
                    if i == j {
                        h[(i, i)] = C64::from(re);
                    } else {
                        h[(i, j)] = C64::new(re, im);
                        h[(j, i)] = C64::new(re, -im);
                    }
                }
            }
            h
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn evolution_preserves_norm(
                entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 78),
                psi in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12),
                g in 0.1f64..2.0,
            ) {
                let h = random_hermitian(12, &entries);
                let mut v = Ket::from_iterator(12, psi.iter().map(|&(a, b)| C64::new(a, b)));
                let n = v.norm();
                prop_assume!(n > 1e-3);
                v /= C64::from(n);
                let out = expm_apply(&h, 10.0 / g, &v).unwrap();
                prop_assert!((out.norm() - 1.0).abs() < 1e-10);
            }

            #[test]
            fn coherent_state_statistics(re in -2.5f64..2.5, im in -2.5f64..2.5) {
                let beta = C64::new(re, im);
                let dim = required_dim(beta.norm());
                let k = coherent_ket(beta, dim).unwrap();
                prop_assert!((k.norm() - 1.0).abs() < 1e-12);
                let n = number(dim).unwrap();
                let mean = (k.adjoint() * n * &k)[(0, 0)].re;
                prop_assert!((mean - beta.norm_sqr()).abs() < 1e-8);
                let big = required_dim(beta.norm() + 1.0);
                let d = displacement(beta, big).unwrap();
                let u = d.adjoint() * &d;
                prop_assert!(max_abs(&(u - CMatrix::identity(big, big))) < 1e-9);
            }

            #[test]
            fn partial_trace_keeps_trace(
                diag in proptest::collection::vec(0.0f64..1.0, 12),
                keep_mask in 1u8..8,
            ) {
                let dims = ModeDims::new(2, 3, 2).unwrap();
                let total: f64 = diag.iter().sum();
                prop_assume!(total > 1e-3);
                let rho = CMatrix::from_diagonal(&DVector::from_iterator(
                    12, diag.iter().map(|d| C64::from(d / total))));
                let keep: Vec<Mode> = [Mode::Cavity1, Mode::Cavity2, Mode::Mechanics]
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| keep_mask & (1 << i) != 0)
                    .map(|(_, m)| m)
                    .collect();
                let red = partial_trace(&rho, &keep, dims).unwrap();
                prop_assert!((red.trace().re - 1.0).abs() < 1e-10);
            }
        }
    }
}
