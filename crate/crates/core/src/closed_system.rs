//! Single-frequency unitary model: Schwinger SU(2) structure, the trilinear
//! and displaced Hamiltonians, controller branch states and the second-order
//! dephasing map.
//!
//! Optical-only operators act on two modes of equal cutoff `d` with basis
//! index `n1 * d + n2`, the same ordering `partial_trace` produces when it
//! keeps both cavities.

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, commutator, expm_apply, hermitian_eigenvalues, mode_lowering, partial_trace, projector, trace_norm,
    unitary, CMatrix, DensityOp, Ket, Mode, ModeDims, C64, ONE,
};

/// Angular-momentum labels for the `N`-photon sector, `|s,m⟩ = |s-m⟩₁|s+m⟩₂`.
///
/// Half-integers are stored doubled: `twice_s = N`, `twice_m ∈ {-N, -N+2, …, N}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchwingerBasis {
    pub twice_s: usize,
}

impl SchwingerBasis {
    pub fn new(photons: usize) -> Self {
        Self { twice_s: photons }
    }

    pub fn photons(&self) -> usize {
        self.twice_s
    }

    pub fn len(&self) -> usize {
        self.twice_s + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Doubled magnetic quantum numbers, ascending.
    pub fn twice_ms(&self) -> impl Iterator<Item = i64> {
        let n = self.twice_s as i64;
        (0..=n).map(move |k| 2 * k - n)
    }

    /// Position of `twice_m` in the ascending ordering.
    pub fn position(&self, twice_m: i64) -> Result<usize> {
        let n = self.twice_s as i64;
        if twice_m.abs() > n || (twice_m + n) % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "2m = {twice_m} is not a level of s = {n}/2"
            )));
        }
        Ok(((twice_m + n) / 2) as usize)
    }

    /// Photon numbers `(n1, n2) = (s - m, s + m)`.
    pub fn occupations(&self, twice_m: i64) -> Result<(usize, usize)> {
        let k = self.position(twice_m)?;
        Ok((self.twice_s - k, k))
    }

    /// Inverse of [`occupations`](Self::occupations).
    pub fn from_occupations(n1: usize, n2: usize) -> (Self, i64) {
        (Self::new(n1 + n2), n2 as i64 - n1 as i64)
    }

    /// `|s,m⟩` as an optical ket with per-mode cutoff `d`.
    pub fn ket(&self, twice_m: i64, d: usize) -> Result<Ket> {
        let (n1, n2) = self.occupations(twice_m)?;
        if d <= self.twice_s {
            return Err(Error::InvalidDimension(format!(
                "cutoff {d} cannot hold {} photons",
                self.twice_s
            )));
        }
        let mut k = Ket::zeros(d * d);
        k[n1 * d + n2] = ONE;
        Ok(k)
    }
}

/// Coupling, interaction time and mechanical amplitude of one control run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub g: f64,
    pub t: f64,
    pub beta: f64,
}

impl ControlParams {
    pub fn gbar(&self) -> f64 {
        self.g * self.beta
    }

    /// Effective beam-splitter angle `θ = ḡ t`.
    pub fn theta(&self) -> f64 {
        self.gbar() * self.t
    }

    /// The amplitude that realises angle `theta` at coupling `g` and time `t`.
    pub fn for_angle(theta: f64, g: f64, t: f64) -> Result<Self> {
        if !(g > 0.0 && t > 0.0) {
            return Err(Error::InvalidArgument("g and t must be positive".into()));
        }
        Ok(Self {
            g,
            t,
            beta: theta / (g * t),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Su2Generators {
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
    pub s_plus: CMatrix,
    pub s_minus: CMatrix,
}

impl Su2Generators {
    pub fn casimir(&self) -> CMatrix {
        &self.sx * &self.sx + &self.sy * &self.sy + &self.sz * &self.sz
    }
}

fn optical_lowering(d: usize) -> Result<(CMatrix, CMatrix)> {
    let a = annihilation(d)?;
    let id = CMatrix::identity(d, d);
    Ok((a.kronecker(&id), id.kronecker(&a)))
}

/// Schwinger generators on two optical modes with cutoff `N + 1` each.
pub fn su2_generators(photons: usize) -> Result<Su2Generators> {
    if photons == 0 {
        return Err(Error::InvalidDimension("need at least one photon".into()));
    }
    su2_generators_with_cutoff(photons + 1)
}

/// Schwinger generators on two optical modes with per-mode cutoff `d`.
pub fn su2_generators_with_cutoff(d: usize) -> Result<Su2Generators> {
    let (a1, a2) = optical_lowering(d)?;
    let n1 = a1.adjoint() * &a1;
    let n2 = a2.adjoint() * &a2;
    let s_plus = a2.adjoint() * &a1;
    let s_minus = s_plus.adjoint();
    let half = C64::from(0.5);
    let sx = (&s_plus + &s_minus) * half;
    let sy = (&s_plus - &s_minus) * C64::new(0.0, -0.5);
    let sz = (n2 - n1) * half;
    Ok(Su2Generators {
        sx,
        sy,
        sz,
        s_plus,
        s_minus,
    })
}

/// `g (a₁†a₂b† + a₁a₂†b)`.
pub fn trilinear_h(g: f64, dims: ModeDims) -> CMatrix {
    let a1 = mode_lowering(Mode::Cavity1, dims);
    let a2 = mode_lowering(Mode::Cavity2, dims);
    let b = mode_lowering(Mode::Mechanics, dims);
    let term = a1.adjoint() * &a2 * b.adjoint();
    (&term + term.adjoint()) * C64::from(g)
}

/// `ḡ (a₁†a₂ + a₁a₂†) + g (a₁†a₂b̄† + a₁a₂†b̄)`, the trilinear coupling with the
/// mechanics displaced by a real amplitude `ḡ / g`.
pub fn displaced_h(gbar: f64, g: f64, dims: ModeDims) -> CMatrix {
    let a1 = mode_lowering(Mode::Cavity1, dims);
    let a2 = mode_lowering(Mode::Cavity2, dims);
    let hop = a1.adjoint() * &a2;
    (&hop + hop.adjoint()) * C64::from(gbar) + trilinear_h(g, dims)
}

/// `exp(-iθ(a₁†a₂ + a₁a₂†))` on the optical space with cutoff `d`.
pub fn beam_splitter_unitary(theta: f64, d: usize) -> Result<CMatrix> {
    let (a1, a2) = optical_lowering(d)?;
    let hop = a1.adjoint() * &a2;
    unitary(&(&hop + hop.adjoint()), theta)
}

fn optical_cutoff(len: usize) -> Result<usize> {
    let d = (len as f64).sqrt().round() as usize;
    if d * d != len || d < 2 {
        return Err(Error::InvalidDimension(format!(
            "optical space of size {len} is not two equal modes"
        )));
    }
    Ok(d)
}

/// Controller states `|φ_m(t)⟩ = ⟨s,m|U(t)|ψ₀⊗φ₀⟩`, ascending in `m`.
#[derive(Debug, Clone)]
pub struct BranchStates {
    pub basis: SchwingerBasis,
    pub kets: Vec<Ket>,
}

impl BranchStates {
    pub fn get(&self, twice_m: i64) -> Result<&Ket> {
        Ok(&self.kets[self.basis.position(twice_m)?])
    }

    pub fn norms_squared(&self) -> Vec<f64> {
        self.kets.iter().map(|k| k.norm_squared()).collect()
    }
}

/// The photon-number sector of an optical ket, if it lies in exactly one.
fn photon_sector(psi: &Ket, d: usize) -> Result<usize> {
    let mut sector = None;
    for (i, amp) in psi.iter().enumerate() {
        if amp.norm_sqr() <= 1e-24 {
            continue;
        }
        let n = i / d + i % d;
        match sector {
            None => sector = Some(n),
            Some(s) if s != n => {
                return Err(Error::InvalidArgument(format!(
                    "optical state mixes the {s}- and {n}-photon sectors"
                )))
            }
            _ => {}
        }
    }
    sector.ok_or_else(|| Error::InvalidArgument("optical state is zero".into()))
}

/// Evolves `ψ₀⊗φ₀` under the trilinear Hamiltonian and projects onto the
/// Schwinger basis of the photon sector of `ψ₀`.
pub fn branch_states(psi0: &Ket, phi0: &Ket, g: f64, t: f64) -> Result<BranchStates> {
    let d = optical_cutoff(psi0.len())?;
    let dm = phi0.len();
    let photons = photon_sector(psi0, d)?;
    // each photon hop creates at most one phonon
    let top: f64 = phi0.iter().skip(dm.saturating_sub(photons)).map(|a| a.norm_sqr()).sum();
    if dm < 2 || top > 1e-12 {
        return Err(Error::InvalidDimension(format!(
            "mechanical cutoff {dm} leaves no room for {photons} phonon(s)"
        )));
    }
    let dims = ModeDims::new(d, d, dm)?;
    let psi = psi0.kronecker(phi0);
    let evolved = expm_apply(&trilinear_h(g, dims), t, &psi)?;

    let basis = SchwingerBasis::new(photons);
    let kets = basis
        .twice_ms()
        .map(|tm| {
            let (n1, n2) = basis.occupations(tm)?;
            let start = dims.index(n1, n2, 0);
            Ok(evolved.rows(start, dm).into_owned())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BranchStates { basis, kets })
}

/// Gram matrix `R[n][m] = ⟨φ_n|φ_m⟩` of the branch states.
pub fn r_coefficients(branches: &BranchStates) -> CMatrix {
    let k = &branches.kets;
    CMatrix::from_fn(k.len(), k.len(), |n, m| k[n].dotc(&k[m]))
}

/// Reduced optical state `Σ R_{n,m} |s,m⟩⟨s,n|` with per-mode cutoff `d`.
pub fn reduced_optical_state(r: &CMatrix, basis: SchwingerBasis, d: usize) -> Result<DensityOp> {
    if r.nrows() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: r.nrows(),
        });
    }
    let kets = basis
        .twice_ms()
        .map(|tm| basis.ket(tm, d))
        .collect::<Result<Vec<_>>>()?;
    let mut rho = DensityOp::zeros(d * d, d * d);
    for (n, kn) in kets.iter().enumerate() {
        for (m, km) in kets.iter().enumerate() {
            rho += km * kn.adjoint() * r[(n, m)];
        }
    }
    Ok(rho)
}

/// Eigenvalues of the trilinear Hamiltonian on the doublet
/// `{|0,1,n-1⟩, |1,0,n⟩}`, checked against `±g√n`.
pub fn dressed_eigencheck(n: usize, g: f64) -> Result<[f64; 2]> {
    if n == 0 {
        return Err(Error::InvalidArgument("doublet needs n >= 1".into()));
    }
    let dims = ModeDims::new(2, 2, n + 2)?;
    let h = trilinear_h(g, dims);
    let idx = [dims.index(0, 1, n - 1), dims.index(1, 0, n)];
    let block = CMatrix::from_fn(2, 2, |i, j| h[(idx[i], idx[j])]);
    let ev = hermitian_eigenvalues(&block);
    let want = g * (n as f64).sqrt();
    if (ev[0] + want).abs() > 1e-10 || (ev[1] - want).abs() > 1e-10 {
        return Err(Error::ContractViolation(format!(
            "doublet n = {n} has eigenvalues {ev:?}, expected ±{want}"
        )));
    }
    Ok([ev[0], ev[1]])
}

/// `(|0⟩ + β|1⟩)/√(1+|β|²)`, the weak-amplitude stand-in for a coherent state.
pub fn small_beta_state(beta: C64, dim: usize) -> Result<Ket> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("dim {dim} < 2")));
    }
    let mut k = Ket::zeros(dim);
    k[0] = ONE;
    k[1] = beta;
    Ok(k.unscale(k.norm()))
}

#[derive(Debug, Clone)]
pub struct DephasingCheck {
    pub rho_exact: DensityOp,
    pub rho_second_order: DensityOp,
    pub deviation: f64,
}

/// Mechanical cutoff for the displaced-frame evolution; phonons are only
/// created at rate `g`, so a handful of levels suffices for `gt ≪ 1`.
const DISPLACED_FRAME_PHONONS: usize = 12;

/// Compares the exact reduced optical state after time `t` with the
/// second-order dephasing map `U_BS(θ)[ρ₀ - (θgt)²/2 [Sz,[Sz,ρ₀]]]U_BS†(θ)`.
///
/// The mechanics starts in `|β⟩` with `β = θ/(gt)`. The evolution runs in the
/// frame displaced by `β`, where the mechanics starts in vacuum and the
/// Hamiltonian is [`displaced_h`] with `ḡ = θ/t`; the two are unitarily
/// equivalent, and the displaced frame needs no cutoff growing with `β`.
pub fn dephasing_map_check(rho0: &DensityOp, theta: f64, g: f64, t: f64) -> Result<DephasingCheck> {
    let d = optical_cutoff(rho0.nrows())?;
    crate::hilbert::check_density(rho0, 1.0)?;
    let ctl = ControlParams::for_angle(theta, g, t)?;
    let dims = ModeDims::new(d, d, DISPLACED_FRAME_PHONONS)?;

    let h = displaced_h(ctl.gbar(), g, dims);
    let u = unitary(&h, t)?;
    let vac = {
        let mut v = Ket::zeros(dims.dm);
        v[0] = ONE;
        projector(&v)
    };
    let full = rho0.kronecker(&vac);
    let evolved = &u * full * u.adjoint();
    let top = (0..dims.total())
        .filter(|&i| dims.occupations(i).2 == dims.dm - 1)
        .map(|i| evolved[(i, i)].re)
        .sum::<f64>();
    if top > 1e-14 {
        return Err(Error::Truncation {
            beta: ctl.beta,
            dim: dims.dm,
            tail: top,
            required: dims.dm + 1,
        });
    }
    let rho_exact = partial_trace(&evolved, &[Mode::Cavity1, Mode::Cavity2], dims)?;

    let sz = su2_generators_with_cutoff(d)?.sz;
    let dc = commutator(&sz, &commutator(&sz, rho0));
    let eps = theta * g * t;
    let inner = rho0 - dc * C64::from(0.5 * eps * eps);
    let ubs = beam_splitter_unitary(theta, d)?;
    let rho_second_order = &ubs * inner * ubs.adjoint();
    let deviation = trace_norm(&(&rho_exact - &rho_second_order));
    Ok(DephasingCheck {
        rho_exact,
        rho_second_order,
        deviation,
    })
}

/// Log-log least-squares slope of `ys` against `xs`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("need two or more paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
