//! Loading a coherent amplitude into the mechanics through a Raman-memory swap.
//!
//! A strong read/write pulse `𝓔(t)` on cavity 1 is eliminated adiabatically,
//! `α(t) = 2𝓔(t)/√κ₁`, leaving a beam-splitter coupling `gα(t)` between
//! cavity 2 and the mechanics plus a correlated jump `a₂b†` at rate
//! `Γ = 4g²/κ₁`. Cavity 2 is pre-loaded with `|α₀⟩`, `α₀ = -2iε/κ₂`, and a
//! pulse of area `A` with `gA = π/2` moves it into the mechanics as `|-iα₀⟩`.
//!
//! The memory condition `ΓT ≪ gA` is read as `gA / (ΓT) ≥ 10`.

use crate::error::{Error, Result};
use crate::hierarchy::{rk4_step, step_grid, Rk4Work};
use crate::hilbert::{
    annihilation, check_density, coherent_ket, coherent_tail_mass, projector, required_dim, truncation_ok, unitary,
    CMatrix, DensityOp, Ket, C64,
};
use crate::sparse::SparseOp;

/// Smallest `gA / (ΓT)` that counts as satisfying the memory condition.
pub const MEMORY_MARGIN: f64 = 10.0;

/// Time profile of the intracavity control amplitude `α(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `α = A/T` on `[0, T]`, zero elsewhere.
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryPrepParams {
    pub g: f64,
    /// Read/write cavity damping; `f64::INFINITY` gives `Γ = 0`.
    pub kappa1: f64,
    pub kappa2: f64,
    /// Cavity-2 drive amplitude `ε`.
    pub epsilon: C64,
    /// Read/write pulse duration `T`.
    pub duration: f64,
    /// Pulse area `A = ∫α dt`.
    pub area: f64,
    pub profile: Profile,
}

impl MemoryPrepParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("duration", self.duration)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be > 0")));
            }
        }
        // κ₁ = ∞ is allowed and switches the correlated jump off
        if !(self.kappa1 > 0.0) {
            return Err(Error::InvalidArgument(format!("kappa1 = {} must be > 0", self.kappa1)));
        }
        if !(self.kappa2 >= 0.0) || !self.area.is_finite() {
            return Err(Error::InvalidArgument("kappa2 >= 0 and a finite area required".into()));
        }
        Ok(())
    }

    /// `Γ = 4g²/κ₁`.
    pub fn gamma(&self) -> f64 {
        4.0 * self.g * self.g / self.kappa1
    }

    /// `α₀ = -2iε/κ₂`.
    pub fn alpha0(&self) -> Result<C64> {
        if !(self.kappa2 > 0.0) {
            return Err(Error::InvalidArgument("alpha0 needs kappa2 > 0".into()));
        }
        Ok(C64::new(0.0, -2.0) * self.epsilon / self.kappa2)
    }

    /// `g̃ = gA`.
    pub fn g_tilde(&self) -> f64 {
        self.g * self.area
    }

    /// `α(t)`.
    pub fn alpha(&self, t: f64) -> C64 {
        match self.profile {
            Profile::Square => {
                if (0.0..=self.duration).contains(&t) {
                    C64::from(self.area / self.duration)
                } else {
                    C64::from(0.0)
                }
            }
        }
    }

    /// `θ(t) = (1/A) ∫_{-∞}^t α`, rising from 0 to 1 across the pulse.
    pub fn theta(&self, t: f64) -> f64 {
        match self.profile {
            Profile::Square => (t / self.duration).clamp(0.0, 1.0),
        }
    }
}

/// `α = 2𝓔/√κ₁`.
pub fn adiabatic_amplitude(e: C64, kappa1: f64) -> Result<C64> {
    if !(kappa1 > 0.0) {
        return Err(Error::InvalidArgument(format!("kappa1 = {kappa1} must be > 0")));
    }
    Ok(e * (2.0 / kappa1.sqrt()))
}

/// Cutoffs `(cavity 2, mechanics)` for the two-mode space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryDims {
    pub d2: usize,
    pub dm: usize,
}

impl MemoryDims {
    pub fn new(d2: usize, dm: usize) -> Result<Self> {
        if d2 < 2 || dm < 2 {
            return Err(Error::InvalidDimension(format!("cutoffs ({d2}, {dm}) must be >= 2")));
        }
        Ok(Self { d2, dm })
    }

    /// Cutoffs that hold `|α₀|` in either mode.
    pub fn for_amplitude(alpha0: f64) -> Self {
        let d = required_dim(alpha0);
        Self { d2: d, dm: d }
    }

    pub fn total(&self) -> usize {
        self.d2 * self.dm
    }

    /// `a₂`, `b` on the product space (cavity index major).
    pub fn lowering(&self) -> Result<(CMatrix, CMatrix)> {
        let a = annihilation(self.d2)?.kronecker(&CMatrix::identity(self.dm, self.dm));
        let b = CMatrix::identity(self.d2, self.d2).kronecker(&annihilation(self.dm)?);
        Ok((a, b))
    }

    pub fn product(&self, cavity: &Ket, mech: &Ket) -> Ket {
        cavity.kronecker(mech)
    }
}

fn check_truncation(alpha0: C64, dims: MemoryDims) -> Result<()> {
    let a = alpha0.norm();
    for d in [dims.d2, dims.dm] {
        if !truncation_ok(a, d) {
            return Err(Error::Truncation {
                beta: a,
                dim: d,
                tail: coherent_tail_mass(a, d),
                required: required_dim(a),
            });
        }
    }
    Ok(())
}

/// `e^{-iφ(a†b + ab†)} |α₀⟩₂|0⟩_b` with `φ = g̃θ`.
pub fn swap_final_state(alpha0: C64, g_tilde_theta: f64, dims: MemoryDims) -> Result<Ket> {
    check_truncation(alpha0, dims)?;
    let (a, b) = dims.lowering()?;
    let hop = a.adjoint() * &b;
    let gen = &hop + hop.adjoint();
    let mut vac = Ket::zeros(dims.dm);
    vac[0] = C64::from(1.0);
    let psi = dims.product(&coherent_ket(alpha0, dims.d2)?, &vac);
    Ok(unitary(&gen, g_tilde_theta)? * psi)
}

/// `|0⟩₂|-iα₀⟩_b`, the ideal outcome of the write step.
pub fn swap_target(alpha0: C64, dims: MemoryDims) -> Result<Ket> {
    check_truncation(alpha0, dims)?;
    let mut vac = Ket::zeros(dims.d2);
    vac[0] = C64::from(1.0);
    Ok(dims.product(&vac, &coherent_ket(C64::new(0.0, -1.0) * alpha0, dims.dm)?))
}

/// Integrates
/// `dρ/dt = -ig[a₂b†α* + a₂†bα, ρ] + Γ𝓓[a₂b†]ρ + κ₂𝓓[a₂]ρ`
/// from `rho0` at `t = 0` to `t_end` with RK4 step `dt`.
pub fn memory_me_evolve<F>(
    params: &MemoryPrepParams,
    alpha: F,
    rho0: &DensityOp,
    dims: MemoryDims,
    t_end: f64,
    dt: f64,
) -> Result<DensityOp>
where
    F: Fn(f64) -> C64,
{
    memory_me_sampled(params, alpha, rho0, dims, t_end, dt, f64::INFINITY, |_, _| Ok(()))
}

/// [`memory_me_evolve`] with `observe(t, ρ)` called at `t = 0` and every
/// multiple of `sample_dt` up to `t_end` (the grid is cut there).
#[allow(clippy::too_many_arguments)]
pub fn memory_me_sampled<F, O>(
    params: &MemoryPrepParams,
    alpha: F,
    rho0: &DensityOp,
    dims: MemoryDims,
    t_end: f64,
    dt: f64,
    sample_dt: f64,
    mut observe: O,
) -> Result<DensityOp>
where
    F: Fn(f64) -> C64,
    O: FnMut(f64, &DensityOp) -> Result<()>,
{
    if !(dt > 0.0 && sample_dt > 0.0 && t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need dt, sample_dt > 0 and finite t_end >= 0 (dt {dt}, sample_dt {sample_dt}, t_end {t_end})"
        )));
    }
    params.validate()?;
    if rho0.nrows() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            got: rho0.nrows(),
        });
    }
    check_density(rho0, 1.0)?;
    let (a, b) = dims.lowering()?;
    let x = &a * b.adjoint();
    let jumps = [
        x.clone() * C64::from(params.gamma().sqrt()),
        a * C64::from(params.kappa2.sqrt()),
    ];
    let decay: CMatrix = jumps
        .iter()
        .map(|l| l.adjoint() * l)
        .fold(CMatrix::zeros(dims.total(), dims.total()), |s, m| s + m)
        * C64::from(0.5);
    let decay = SparseOp::from_dense(&decay);
    let jumps: Vec<(SparseOp, SparseOp)> = jumps
        .iter()
        .map(|l| {
            let s = SparseOp::from_dense(l);
            let d = s.adjoint();
            (s, d)
        })
        .collect();
    let x = SparseOp::from_dense(&x);
    let x_dag = x.adjoint();
    let minus_ig = C64::new(0.0, -params.g);
    let one = C64::from(1.0);
    let mut y = vec![rho0.clone()];
    let mut work = Rk4Work::new(1, dims.total(), 0);
    let mut breaks = match params.profile {
        Profile::Square => vec![0.0, params.duration],
    };
    let samples: Vec<f64> = (1..)
        .map(|k| k as f64 * sample_dt)
        .take_while(|&s| s < t_end * (1.0 - 1e-12))
        .chain(std::iter::once(t_end))
        .collect();
    breaks.extend_from_slice(&samples);
    observe(0.0, rho0)?;
    let mut next = 0;
    for (s, e) in step_grid(0.0, t_end, dt, &breaks) {
        // the profile is smooth inside each step, so it is sampled at the midpoint
        let al = alpha(0.5 * (s + e));
        let mut f = |_t: f64, y: &[CMatrix], dy: &mut [CMatrix], _: &mut [C64], tmp: &mut CMatrix| {
            let r = &y[0];
            let out = &mut dy[0];
            x.left_acc(minus_ig * al.conj(), r, out);
            x.right_acc(-minus_ig * al.conj(), r, out);
            x_dag.left_acc(minus_ig * al, r, out);
            x_dag.right_acc(-minus_ig * al, r, out);
            decay.left_acc(-one, r, out);
            decay.right_acc(-one, r, out);
            for (l, ld) in &jumps {
                tmp.fill(C64::from(0.0));
                l.left_acc(one, r, tmp);
                ld.right_acc(one, tmp, out);
            }
        };
        rk4_step(&mut y, &mut [], s, e - s, &mut work, &mut f);
        if next < samples.len() && (e - samples[next]).abs() <= 1e-9 * (1.0 + e) {
            observe(samples[next], &y[0])?;
            next += 1;
        }
    }
    let rho = y.remove(0);
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::IntegrationDiverged {
            time: t_end,
            detail: format!("trace drifted to {tr}"),
        });
    }
    Ok(rho)
}

/// Reduced mechanical state of a cavity-2 ⊗ mechanics density operator.
pub fn mechanical_state(rho: &DensityOp, dims: MemoryDims) -> DensityOp {
    let (d2, dm) = (dims.d2, dims.dm);
    CMatrix::from_fn(dm, dm, |i, j| (0..d2).map(|k| rho[(k * dm + i, k * dm + j)]).sum())
}

/// `⟨-iα₀|ρ_b|-iα₀⟩` after the write step.
pub fn mechanical_fidelity(rho: &DensityOp, alpha0: C64, dims: MemoryDims) -> Result<f64> {
    let target = coherent_ket(C64::new(0.0, -1.0) * alpha0, dims.dm)?;
    let rb = mechanical_state(rho, dims);
    Ok((target.adjoint() * rb * &target)[(0, 0)].re)
}

/// Runs the write step with the square profile and returns the mechanical fidelity.
pub fn write_fidelity(params: &MemoryPrepParams, alpha0: C64, dims: MemoryDims, dt: f64) -> Result<f64> {
    let mut vac = Ket::zeros(dims.dm);
    vac[0] = C64::from(1.0);
    let rho0 = projector(&dims.product(&coherent_ket(alpha0, dims.d2)?, &vac));
    let rho = memory_me_evolve(params, |t| params.alpha(t), &rho0, dims, params.duration, dt)?;
    mechanical_fidelity(&rho, alpha0, dims)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryCondition {
    pub satisfied: bool,
    /// `gA / (ΓT)`; infinite when `Γ = 0`.
    pub margin: f64,
}

pub fn memory_condition(params: &MemoryPrepParams) -> MemoryCondition {
    let loss = params.gamma() * params.duration;
    let margin = if loss == 0.0 {
        f64::INFINITY
    } else {
        params.g_tilde().abs() / loss
    };
    MemoryCondition {
        satisfied: margin >= MEMORY_MARGIN * (1.0 - 1e-12),
        margin,
    }
}
