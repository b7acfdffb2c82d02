//! Unconditional Fock-state master-equation hierarchy for one single-photon
//! wavepacket entering each cavity.
//!
//! Level `(m,n;p,q)` evolves as
//!
//! ```text
//! dρ_{mn;pq}/dt = -i[H, ρ] + Σ_d 𝓛[L_d]ρ
//!               + √m ξ [ρ_{m-1,n;p,q}, L₁†] + √p η [ρ_{m,n;p-1,q}, L₂†]
//!               + √n ξ* [L₁, ρ_{m,n-1;p,q}] + √q η* [L₂, ρ_{m,n;p,q-1}]
//! ```
//!
//! with `L_d = √κ_d a_d`. The hierarchy itself is independent of the input
//! field state; the field enters only through the coefficients `c` used to
//! assemble the physical state `Σ c* ρ`. Output fluxes use
//! `a_out = √κ a + a_in`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::closed_system::{displaced_h, trilinear_h};
use crate::error::{Error, Result};
use crate::hierarchy::{
    adjoint_partner, axpy, idx, instant_amplitudes, is_diagonal, mirror, rk4_step, step_amplitudes, step_grid,
    Generator, Kernel, Rk4Work, LEVELS, PRIMARY,
};
use crate::hilbert::{
    coherent_ket, embed, hermitian_defect, hermitian_eigenvalues, mode_lowering, number, projector, required_dim,
    CMatrix, DensityOp, Ket, Mode, ModeDims, C64,
};
use crate::semiclassical::{PulseShape, SystemParams};

pub const ADJOINT_TOL: f64 = 1e-8;
pub const TRACE_TOL: f64 = 1e-6;
pub const HERMITIAN_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-6;

/// How the mechanics enters the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// `g(a₁†a₂b† + h.c.)` with the mechanics loaded in `|β⟩`.
    Lab,
    /// `ḡ(a₁†a₂ + h.c.) + g(a₁†a₂b̄† + h.c.)` with the mechanics in vacuum.
    Displaced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// One photon split by the first MZ beam splitter, phase `phi` in one arm.
    Mz { phi: f64 },
    /// One photon per cavity, the cavity-2 photon delayed by `tau`.
    Hom { tau: f64 },
}

impl Scenario {
    pub fn photons(&self) -> usize {
        match self {
            Scenario::Mz { .. } => 1,
            Scenario::Hom { .. } => 2,
        }
    }

    /// Optical cutoff per cavity.
    pub fn optical_dim(&self) -> usize {
        self.photons() + 1
    }

    /// Pulse envelopes with the time origin at the first arrival.
    pub fn pulses(&self, gamma: f64) -> [PulseShape; 2] {
        match *self {
            Scenario::Mz { .. } => [PulseShape::new(gamma, 0.0), PulseShape::new(gamma, 0.0)],
            Scenario::Hom { tau } => [
                PulseShape::new(gamma, (-tau).max(0.0)),
                PulseShape::new(gamma, tau.max(0.0)),
            ],
        }
    }

    pub fn coeffs(&self) -> FieldCoeffs {
        match *self {
            Scenario::Mz { phi } => FieldCoeffs::mz(phi),
            Scenario::Hom { .. } => FieldCoeffs::hom(),
        }
    }
}

/// Input-field coefficients `c_{m,n;p,q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldCoeffs {
    pub c: [C64; LEVELS],
}

impl FieldCoeffs {
    pub fn zero() -> Self {
        Self {
            c: [C64::from(0.0); LEVELS],
        }
    }

    pub fn get(&self, m: usize, n: usize, p: usize, q: usize) -> C64 {
        self.c[idx(m, n, p, q)]
    }

    pub fn mz(phi: f64) -> Self {
        let mut f = Self::zero();
        f.c[idx(1, 1, 0, 0)] = C64::from(0.5);
        f.c[idx(0, 0, 1, 1)] = C64::from(0.5);
        f.c[idx(0, 1, 1, 0)] = C64::from_polar(0.5, -phi);
        f.c[idx(1, 0, 0, 1)] = C64::from_polar(0.5, phi);
        f
    }

    pub fn hom() -> Self {
        let mut f = Self::zero();
        f.c[idx(1, 1, 1, 1)] = C64::from(1.0);
        f
    }

    /// A lone photon in cavity `channel` (1 or 2).
    pub fn single_photon(channel: usize) -> Result<Self> {
        let mut f = Self::zero();
        match channel {
            1 => f.c[idx(1, 1, 0, 0)] = C64::from(1.0),
            2 => f.c[idx(0, 0, 1, 1)] = C64::from(1.0),
            _ => return Err(Error::InvalidArgument(format!("no input channel {channel}"))),
        }
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..LEVELS {
            if (self.c[i] - self.c[adjoint_partner(i)].conj()).norm() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "field coefficients are not Hermitian at level {i}"
                )));
            }
        }
        let tr: C64 = (0..LEVELS).filter(|&i| is_diagonal(i)).map(|i| self.c[i]).sum();
        if (tr - C64::from(1.0)).norm() > 1e-12 {
            return Err(Error::InvalidArgument(format!("field trace {tr} != 1")));
        }
        Ok(())
    }

    /// `Σ c* x_i` for per-level values `x`.
    pub fn contract(&self, x: &[C64]) -> C64 {
        self.c.iter().zip(x).map(|(c, v)| c.conj() * v).sum()
    }
}

/// Largest invariant defects seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantReport {
    pub adjoint_defect: f64,
    pub trace_defect: f64,
    pub hermitian_defect: f64,
    /// Most negative eigenvalue of any checked state (0 if none negative).
    pub min_eigenvalue: f64,
}

impl InvariantReport {
    fn merge(&mut self, o: &InvariantReport) {
        self.adjoint_defect = self.adjoint_defect.max(o.adjoint_defect);
        self.trace_defect = self.trace_defect.max(o.trace_defect);
        self.hermitian_defect = self.hermitian_defect.max(o.hermitian_defect);
        self.min_eigenvalue = self.min_eigenvalue.min(o.min_eigenvalue);
    }

    pub fn within_tolerance(&self) -> bool {
        self.adjoint_defect <= ADJOINT_TOL
            && self.trace_defect <= TRACE_TOL
            && self.hermitian_defect <= HERMITIAN_TOL
            && self.min_eigenvalue >= -POSITIVITY_TOL
    }
}

#[derive(Debug, Clone)]
pub struct FockHierarchy {
    pub t: f64,
    pub ops: Vec<DensityOp>,
    pub dims: ModeDims,
    pub pulses: [PulseShape; 2],
    pub params: SystemParams,
    pub frame: Frame,
    /// `∫ Tr[J_d(ρ)_i] dt` for detector `d` at position `16 d + i`.
    emitted: Vec<C64>,
    pub(crate) generator: Generator,
    pub report: InvariantReport,
}

/// Default RK4 step `2e-3 / κ`.
pub fn default_dt(p: &SystemParams) -> f64 {
    2e-3 / p.kappa1.max(p.kappa2)
}

/// Default horizon `40 / max(κ, γ)` extended by the delay.
pub fn default_t_end(p: &SystemParams, tau: f64) -> f64 {
    40.0 / p.kappa1.max(p.kappa2).max(p.gamma) + tau.abs()
}

/// Largest step for which fixed-step RK4 stays well inside its stability region.
pub fn dt_max(p: &SystemParams, dims: ModeDims) -> f64 {
    let rate = 2.0 * (p.kappa1 + p.kappa2) + p.gamma + 4.0 * p.gbar + 4.0 * p.g * (dims.dm as f64).sqrt();
    1.0 / rate
}

/// Mechanical cutoff for `photons` input photons.
///
/// In the lab frame the coherent state needs `required_dim(β)` levels and
/// each photon can add one phonon. In the displaced frame the mechanics
/// starts in vacuum and phonons are only created at rate `g`.
pub fn mechanical_dim(p: &SystemParams, frame: Frame, photons: usize) -> usize {
    match frame {
        Frame::Lab => required_dim(p.beta.map_or(0.0, |b| b.norm())) + photons,
        Frame::Displaced => {
            if p.g == 0.0 {
                2
            } else {
                let x = p.g / p.kappa1.min(p.kappa2);
                (4.0 + 12.0 * x).ceil() as usize + 2 * photons
            }
        }
    }
}

/// Initial mechanical state for the frame: `|β⟩` in the lab, vacuum when displaced.
pub fn mechanical_state(p: &SystemParams, frame: Frame, dm: usize) -> Result<Ket> {
    match frame {
        Frame::Lab => coherent_ket(p.beta.unwrap_or_default(), dm),
        Frame::Displaced => {
            let mut v = Ket::zeros(dm);
            v[0] = C64::from(1.0);
            Ok(v)
        }
    }
}

fn frame_hamiltonian(p: &SystemParams, frame: Frame, dims: ModeDims) -> CMatrix {
    match frame {
        Frame::Lab => trilinear_h(p.g, dims),
        Frame::Displaced => displaced_h(p.gbar, p.g, dims),
    }
}

/// Cavities empty, mechanics in `mech_state`; levels `(m,m;p,p)` start in that
/// state and all others at zero.
pub fn init_hierarchy(
    scenario: Scenario,
    p: &SystemParams,
    dims: ModeDims,
    mech_state: &Ket,
    frame: Frame,
) -> Result<(FockHierarchy, FieldCoeffs)> {
    p.validate()?;
    if mech_state.len() != dims.dm {
        return Err(Error::DimensionMismatch {
            expected: dims.dm,
            got: mech_state.len(),
        });
    }
    if (mech_state.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "mechanical state has norm {}",
            mech_state.norm()
        )));
    }
    if frame == Frame::Lab && p.g == 0.0 && p.gbar > 0.0 {
        return Err(Error::Unsupported(
            "classical control (g = 0) needs the displaced frame".into(),
        ));
    }
    let mut cav = Ket::zeros(dims.d1 * dims.d2);
    cav[0] = C64::from(1.0);
    let rho0 = projector(&cav.kronecker(mech_state));
    let zero = DensityOp::zeros(dims.total(), dims.total());
    let ops = (0..LEVELS)
        .map(|i| if is_diagonal(i) { rho0.clone() } else { zero.clone() })
        .collect();
    let h = frame_hamiltonian(p, frame, dims);
    let coeffs = scenario.coeffs();
    coeffs.validate()?;
    Ok((
        FockHierarchy {
            t: 0.0,
            ops,
            dims,
            pulses: scenario.pulses(p.gamma),
            params: *p,
            frame,
            emitted: vec![C64::from(0.0); 2 * LEVELS],
            generator: Generator::new(&h, dims, [p.kappa1, p.kappa2]),
            report: InvariantReport::default(),
        },
        coeffs,
    ))
}

/// Builds a hierarchy with default dimensions and mechanical state.
pub fn setup(
    scenario: Scenario,
    p: &SystemParams,
    frame: Frame,
    mech_dim: Option<usize>,
) -> Result<(FockHierarchy, FieldCoeffs)> {
    let d = scenario.optical_dim();
    let dm = mech_dim.unwrap_or_else(|| mechanical_dim(p, frame, scenario.photons()));
    let dims = ModeDims::new(d, d, dm)?;
    let mech = mechanical_state(p, frame, dm)?;
    init_hierarchy(scenario, p, dims, &mech, frame)
}

/// Time derivative of every level at time `t` (inputs right-continuous at onsets).
pub fn hierarchy_rhs(h: &FockHierarchy, t: f64) -> Vec<DensityOp> {
    let amps = instant_amplitudes(&h.pulses, t);
    let n = h.dims.total();
    let mut out = vec![DensityOp::zeros(n, n); LEVELS];
    let mut tmp = DensityOp::zeros(n, n);
    for (i, o) in out.iter_mut().enumerate() {
        h.generator.apply(&h.ops, i, amps, Kernel::UNCONDITIONAL, o, &mut tmp);
    }
    out
}

impl FockHierarchy {
    pub fn level(&self, m: usize, n: usize, p: usize, q: usize) -> &DensityOp {
        &self.ops[idx(m, n, p, q)]
    }

    /// Per-level instantaneous flux `Tr[J_d(ρ)_i]` at the current time.
    pub fn level_flux(&self, detector: usize) -> Result<Vec<C64>> {
        let d = detector_index(detector)?;
        let amps = instant_amplitudes(&self.pulses, self.t);
        Ok((0..LEVELS)
            .map(|i| self.generator.jump_trace(&self.ops, i, amps, d))
            .collect())
    }

    /// Per-level time-integrated flux since the start.
    pub fn level_emitted(&self, detector: usize) -> Result<&[C64]> {
        let d = detector_index(detector)?;
        Ok(&self.emitted[d * LEVELS..(d + 1) * LEVELS])
    }

    /// Largest `‖ρ_{m,n;p,q} - ρ_{n,m;q,p}†‖`.
    pub fn adjoint_defect(&self) -> f64 {
        (0..LEVELS)
            .map(|i| {
                let j = adjoint_partner(i);
                (&self.ops[i] - self.ops[j].adjoint())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Checks the hierarchy invariants and the physical state for each of `coeffs`.
    pub fn check_invariants(&mut self, coeffs: &[FieldCoeffs]) -> Result<InvariantReport> {
        let mut r = InvariantReport {
            adjoint_defect: self.adjoint_defect(),
            ..Default::default()
        };
        for i in 0..LEVELS {
            let want = if is_diagonal(i) { 1.0 } else { 0.0 };
            r.trace_defect = r.trace_defect.max((self.ops[i].trace() - C64::from(want)).norm());
        }
        let top = self.ops[idx(1, 1, 1, 1)].trace().re - 1.0;
        let mut states: Vec<DensityOp> = [idx(0, 0, 0, 0), idx(1, 1, 1, 1)]
            .iter()
            .map(|&i| self.ops[i].clone())
            .collect();
        for c in coeffs {
            let rho = physical_state(self, c);
            r.trace_defect = r.trace_defect.max((rho.trace() - C64::from(1.0)).norm());
            states.push(rho);
        }
        for s in &states {
            r.hermitian_defect = r.hermitian_defect.max(hermitian_defect(s));
            let lo = hermitian_eigenvalues(&((s + s.adjoint()) * C64::from(0.5)))[0];
            r.min_eigenvalue = r.min_eigenvalue.min(lo.min(0.0));
        }
        self.report.merge(&r);

        let t = self.t;
        if top > 10.0 * TRACE_TOL {
            return Err(Error::GeneratorSign { time: t, growth: top });
        }
        let fail = |what: &str, v: f64, tol: f64| -> Result<()> {
            if v > 10.0 * tol {
                Err(Error::IntegrationDiverged {
                    time: t,
                    detail: format!("{what} {v:e} exceeds 10 x {tol:e}"),
                })
            } else {
                Ok(())
            }
        };
        fail("adjoint-symmetry defect", r.adjoint_defect, ADJOINT_TOL)?;
        fail("trace defect", r.trace_defect, TRACE_TOL)?;
        fail("hermiticity defect", r.hermitian_defect, HERMITIAN_TOL)?;
        fail("negative eigenvalue", -r.min_eigenvalue, POSITIVITY_TOL)?;
        Ok(r)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.pulses.iter().map(|p| p.offset).collect()
    }

    fn step_to(&mut self, t_end: f64, dt: f64, work: &mut Rk4Work) {
        let gen = &self.generator;
        let pulses = self.pulses;
        for (a, b) in step_grid(self.t, t_end, dt, &self.breakpoints()) {
            let mut f = |t: f64, y: &[CMatrix], dy: &mut [CMatrix], dacc: &mut [C64], tmp: &mut CMatrix| {
                let amps = step_amplitudes(&pulses, a, t);
                for i in 0..LEVELS {
                    gen.apply(y, i, amps, Kernel::UNCONDITIONAL, &mut dy[i], tmp);
                }
                for d in 0..2 {
                    for i in 0..LEVELS {
                        dacc[d * LEVELS + i] = gen.jump_trace(y, i, amps, d);
                    }
                }
            };
            rk4_step(&mut self.ops, &mut self.emitted, a, b - a, work, &mut f);
            self.t = b;
        }
    }
}

fn detector_index(detector: usize) -> Result<usize> {
    match detector {
        1 | 2 => Ok(detector - 1),
        _ => Err(Error::InvalidArgument(format!("no detector {detector}"))),
    }
}

/// Integrates to `t_end` with step `dt`, checking invariants every `sample_dt`
/// and handing each sample (including the start) to `observer`.
pub fn integrate_with<F>(
    h: &mut FockHierarchy,
    t_end: f64,
    dt: f64,
    sample_dt: f64,
    check: &[FieldCoeffs],
    mut observer: F,
) -> Result<()>
where
    F: FnMut(&FockHierarchy) -> Result<()>,
{
    if !(dt > 0.0) || !(sample_dt > 0.0) {
        return Err(Error::InvalidArgument("dt and sample_dt must be positive".into()));
    }
    let limit = dt_max(&h.params, h.dims);
    if dt > limit {
        return Err(Error::StepSize {
            time: h.t,
            detail: format!("dt = {dt} exceeds the stability limit {limit}"),
        });
    }
    let mut work = Rk4Work::new(LEVELS, h.dims.total(), 2 * LEVELS);
    h.check_invariants(check)?;
    observer(h)?;
    let t0 = h.t;
    let mut k = 1usize;
    loop {
        let next = (t0 + k as f64 * sample_dt).min(t_end);
        if next <= h.t {
            break;
        }
        h.step_to(next, dt, &mut work);
        h.check_invariants(check)?;
        observer(h)?;
        if next >= t_end {
            break;
        }
        k += 1;
    }
    Ok(())
}

/// Integrates to `t_end` with invariant checks at the end only.
pub fn integrate(mut h: FockHierarchy, t_end: f64, dt: f64) -> Result<FockHierarchy> {
    let span = (t_end - h.t).max(dt);
    integrate_with(&mut h, t_end, dt, span, &[], |_| Ok(()))?;
    Ok(h)
}

/// `Σ c* ρ_{m,n;p,q}`.
pub fn physical_state(h: &FockHierarchy, c: &FieldCoeffs) -> DensityOp {
    let n = h.dims.total();
    let mut rho = DensityOp::zeros(n, n);
    for (ci, op) in c.c.iter().zip(&h.ops) {
        if *ci != C64::from(0.0) {
            axpy(&mut rho, ci.conj(), op);
        }
    }
    rho
}

/// Output photon flux `⟨a_out† a_out⟩` at `detector` (1 or 2) at the current time.
pub fn detector_flux(h: &FockHierarchy, c: &FieldCoeffs, detector: usize) -> Result<f64> {
    Ok(c.contract(&h.level_flux(detector)?).re)
}

/// Photon number emitted through `detector` up to the current time.
pub fn emitted_photons(h: &FockHierarchy, c: &FieldCoeffs, detector: usize) -> Result<f64> {
    Ok(c.contract(h.level_emitted(detector)?).re)
}

/// `κ₁κ₂ Tr[a₁†a₁ a₂†a₂ ρ_{1,1;1,1}]`.
pub fn coincidence_rate(h: &FockHierarchy) -> Result<f64> {
    let n1 = embed(&number(h.dims.d1)?, Mode::Cavity1, h.dims)?;
    let n2 = embed(&number(h.dims.d2)?, Mode::Cavity2, h.dims)?;
    let op = n1 * n2;
    let v = (op * h.level(1, 1, 1, 1)).trace().re;
    Ok(h.params.kappa1 * h.params.kappa2 * v)
}

/// Mean excitation `⟨N₁ + N₂ + n_b⟩` of the physical state.
pub fn excitation(h: &FockHierarchy, c: &FieldCoeffs) -> Result<f64> {
    let rho = physical_state(h, c);
    let mut total = 0.0;
    for mode in [Mode::Cavity1, Mode::Cavity2, Mode::Mechanics] {
        let a = mode_lowering(mode, h.dims);
        total += (a.adjoint() * a * &rho).trace().re;
    }
    Ok(total)
}

/// Options shared by the scenario drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub frame: Frame,
    pub mech_dim: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub sample_dt: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            frame: Frame::Displaced,
            mech_dim: None,
            dt: None,
            t_end: None,
            sample_dt: 0.1,
        }
    }
}

impl RunOptions {
    fn resolve(&self, p: &SystemParams, tau: f64) -> (f64, f64) {
        (
            self.dt.unwrap_or_else(|| default_dt(p)),
            self.t_end.unwrap_or_else(|| default_t_end(p, tau)),
        )
    }
}

/// Upper-detector statistics of the MZ interferometer.
#[derive(Debug, Clone)]
pub struct MzObservables {
    pub phis: Vec<f64>,
    pub times: Vec<f64>,
    /// Detection rate at the upper detector, `[time][phi]`; `P_u(t:t+dt)` is this times `dt`.
    pub rate: Vec<Vec<f64>>,
    /// Fringe visibility of the rate at each sample time.
    pub visibility: Vec<f64>,
    /// Time-integrated `P_u(φ)`.
    pub pu: Vec<f64>,
    /// Fringe visibility of the time-integrated `P_u`.
    pub v_integrated: f64,
    pub report: InvariantReport,
}

/// Visibility of `P(φ) = P₀ + Re(P₁ e^{iφ})` from its values at `φ = 0, π/2, π`.
fn fringe(at0: f64, at_half: f64, at_pi: f64) -> f64 {
    let mean = 0.5 * (at0 + at_pi);
    let amp = (0.5 * (at0 - at_pi)).hypot(at_half - mean);
    if mean > 0.0 {
        amp / mean
    } else {
        0.0
    }
}

/// Runs the MZ hierarchy once and evaluates `P_u` on the phase grid.
pub fn mz_observables(p: &SystemParams, phis: &[f64], opts: &RunOptions) -> Result<MzObservables> {
    if phis.is_empty() {
        return Err(Error::InvalidArgument("empty phase grid".into()));
    }
    let (mut h, _) = setup(Scenario::Mz { phi: 0.0 }, p, opts.frame, opts.mech_dim)?;
    let (dt, t_end) = opts.resolve(p, 0.0);
    let coeffs: Vec<FieldCoeffs> = phis.iter().map(|&phi| FieldCoeffs::mz(phi)).collect();
    let probes = [0.0, FRAC_PI_2, PI].map(FieldCoeffs::mz);
    let check = [FieldCoeffs::mz(0.0), FieldCoeffs::mz(FRAC_PI_2)];
    let mut times = Vec::new();
    let mut rate = Vec::new();
    let mut visibility = Vec::new();
    integrate_with(&mut h, t_end, dt, opts.sample_dt, &check, |h| {
        let lf = h.level_flux(1)?;
        let row: Vec<f64> = coeffs.iter().map(|c| c.contract(&lf).re).collect();
        let [r0, r1, r2] = probes.map(|c| c.contract(&lf).re);
        visibility.push(fringe(r0, r1, r2));
        if let Some(&bad) = row.iter().find(|&&v| v < -1e-10) {
            return Err(Error::IntegrationDiverged {
                time: h.t,
                detail: format!("negative detection rate {bad:e}"),
            });
        }
        times.push(h.t);
        rate.push(row);
        Ok(())
    })?;
    let emitted = h.level_emitted(1)?;
    let pu: Vec<f64> = coeffs.iter().map(|c| c.contract(emitted).re).collect();
    let [e0, e1, e2] = probes.map(|c| c.contract(emitted).re);
    Ok(MzObservables {
        phis: phis.to_vec(),
        times,
        rate,
        visibility,
        v_integrated: fringe(e0, e1, e2),
        pu,
        report: h.report,
    })
}

/// Coincidence-rate trace of one HOM run.
#[derive(Debug, Clone)]
pub struct HomRun {
    pub tau: f64,
    pub times: Vec<f64>,
    pub coincidence: Vec<f64>,
    /// Emitted photon numbers at detectors 1 and 2.
    pub emitted: [f64; 2],
    pub report: InvariantReport,
}

pub fn hom_run(p: &SystemParams, tau: f64, opts: &RunOptions) -> Result<HomRun> {
    let scenario = Scenario::Hom { tau };
    let (mut h, c) = setup(scenario, p, opts.frame, opts.mech_dim)?;
    let (dt, t_end) = opts.resolve(p, tau);
    let mut times = Vec::new();
    let mut coincidence = Vec::new();
    integrate_with(&mut h, t_end, dt, opts.sample_dt, &[c], |h| {
        let v = coincidence_rate(h)?;
        if v < -1e-10 {
            return Err(Error::IntegrationDiverged {
                time: h.t,
                detail: format!("negative coincidence rate {v:e}"),
            });
        }
        times.push(h.t);
        coincidence.push(v);
        Ok(())
    })?;
    Ok(HomRun {
        tau,
        times,
        coincidence,
        emitted: [emitted_photons(&h, &c, 1)?, emitted_photons(&h, &c, 2)?],
        report: h.report,
    })
}

/// HOM visibility against detection time,
/// `v(t) = (max_{τ<0} C(t,τ) - C(t,0)) / (max_{τ<0} C(t,τ) + C(t,0))`.
///
/// Needs a `τ = 0` run and at least one `τ < 0` run; the curve covers the
/// sample times the runs share. Where both rates vanish `v` is reported as 0.
pub fn hom_visibility_curve(runs: &[HomRun]) -> Result<(Vec<f64>, Vec<f64>)> {
    let zero = runs
        .iter()
        .find(|r| r.tau == 0.0)
        .ok_or_else(|| Error::InvalidArgument("HOM visibility needs a tau = 0 run".into()))?;
    let negative: Vec<&HomRun> = runs.iter().filter(|r| r.tau < 0.0).collect();
    if negative.is_empty() {
        return Err(Error::InvalidArgument("HOM visibility needs a tau < 0 run".into()));
    }
    let len = negative
        .iter()
        .map(|r| r.times.len())
        .fold(zero.times.len(), usize::min);
    for r in &negative {
        if r.times[..len]
            .iter()
            .zip(&zero.times)
            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()))
        {
            return Err(Error::InvalidArgument(format!(
                "run at tau = {} is sampled on a different time grid",
                r.tau
            )));
        }
    }
    let v = (0..len)
        .map(|k| {
            let top = negative
                .iter()
                .map(|r| r.coincidence[k])
                .fold(f64::NEG_INFINITY, f64::max);
            let dip = zero.coincidence[k];
            if top + dip > 0.0 {
                (top - dip) / (top + dip)
            } else {
                0.0
            }
        })
        .collect();
    Ok((zero.times[..len].to_vec(), v))
}

/// Two-detector statistics of one HOM run from the counting-resolved hierarchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDetection {
    pub tau: f64,
    /// Probability that both detectors click.
    pub p11: f64,
    /// Mean photon numbers at detectors 1 and 2.
    pub n1: f64,
    pub n2: f64,
    /// `p11 / (n1 n2)`.
    pub g2: f64,
}

/// Joint detection probability over the whole run.
///
/// The hierarchy is split by detection record: class `(c₁, c₂)` with
/// `c_d ∈ {0, ≥1}` collects the part of the state in which detector `d` has
/// (not) clicked. Jumps move weight from `c_d = 0` into `c_d = 1`; the sum over
/// classes is the unconditional hierarchy.
pub fn joint_detection_probability(p: &SystemParams, tau: f64, opts: &RunOptions) -> Result<JointDetection> {
    let scenario = Scenario::Hom { tau };
    let (h, c) = setup(scenario, p, opts.frame, opts.mech_dim)?;
    let (dt, t_end) = opts.resolve(p, tau);
    let limit = dt_max(p, h.dims);
    if dt > limit {
        return Err(Error::StepSize {
            time: 0.0,
            detail: format!("dt = {dt} exceeds the stability limit {limit}"),
        });
    }
    let n = h.dims.total();
    let zero = DensityOp::zeros(n, n);
    // class (c1, c2) occupies block 2 c1 + c2
    let mut y: Vec<DensityOp> = Vec::with_capacity(4 * LEVELS);
    y.extend(h.ops.iter().cloned());
    y.extend(std::iter::repeat(zero).take(3 * LEVELS));
    let mut acc = vec![C64::from(0.0); 2 * LEVELS];
    let mut work = Rk4Work::new(4 * LEVELS, n, 2 * LEVELS);
    let gen = &h.generator;
    let pulses = h.pulses;
    let breaks: Vec<f64> = pulses.iter().map(|p| p.offset).collect();
    for (a, b) in step_grid(0.0, t_end, dt, &breaks) {
        let mut f = |t: f64, y: &[CMatrix], dy: &mut [CMatrix], dacc: &mut [C64], tmp: &mut CMatrix| {
            let amps = step_amplitudes(&pulses, a, t);
            for class in 0..4 {
                let (c1, c2) = (class >> 1, class & 1);
                let own = &y[class * LEVELS..(class + 1) * LEVELS];
                let out = &mut dy[class * LEVELS..(class + 1) * LEVELS];
                let kernel = Kernel {
                    no_jump: true,
                    jump: [c1 == 1, c2 == 1],
                };
                // every class keeps the adjoint symmetry, so only primary levels are evolved
                for &i in &PRIMARY {
                    gen.apply(own, i, amps, kernel, &mut out[i], tmp);
                }
                for (d, cd) in [(0, c1), (1, c2)] {
                    if cd == 1 {
                        let from = class ^ (if d == 0 { 2 } else { 1 });
                        let src = &y[from * LEVELS..(from + 1) * LEVELS];
                        for &i in &PRIMARY {
                            gen.apply(src, i, amps, Kernel::jump(d), &mut out[i], tmp);
                        }
                    }
                }
                mirror(out);
            }
            for d in 0..2 {
                for i in 0..LEVELS {
                    dacc[d * LEVELS + i] = (0..4)
                        .map(|k| gen.jump_trace(&y[k * LEVELS..(k + 1) * LEVELS], i, amps, d))
                        .sum();
                }
            }
        };
        rk4_step(&mut y, &mut acc, a, b - a, &mut work, &mut f);
    }
    let both: Vec<C64> = (0..LEVELS).map(|i| y[3 * LEVELS + i].trace()).collect();
    let p11 = c.contract(&both).re;
    let n1 = c.contract(&acc[..LEVELS]).re;
    let n2 = c.contract(&acc[LEVELS..]).re;
    Ok(JointDetection {
        tau,
        p11,
        n1,
        n2,
        g2: p11 / (n1 * n2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::unpack;

    fn semiclassical() -> SystemParams {
        SystemParams::semiclassical(1.0, 1.0, 1.0 / 3.0)
    }

    fn random_hierarchy(scenario: Scenario, p: &SystemParams, dm: usize) -> FockHierarchy {
        let (mut h, _) = setup(scenario, p, Frame::Displaced, Some(dm)).unwrap();
        let n = h.dims.total();
        let mut seed = 12345u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..LEVELS {
            let j = adjoint_partner(i);
            if j < i {
                continue;
            }
            let m = CMatrix::from_fn(n, n, |_, _| C64::new(rnd(), rnd()));
            h.ops[i] = if i == j { &m + m.adjoint() } else { m.clone() };
            if i != j {
                h.ops[j] = m.adjoint();
            }
        }
        h.t = 0.3;
        h
    }

    #[test]
    fn coefficients() {
        let mz = FieldCoeffs::mz(0.0);
        assert_eq!(mz.c.iter().filter(|c| c.norm() > 0.0).count(), 4);
        assert!(mz
            .c
            .iter()
            .filter(|c| c.norm() > 0.0)
            .all(|c| (c - C64::from(0.5)).norm() < 1e-15));
        mz.validate().unwrap();
        let hom = FieldCoeffs::hom();
        assert_eq!(hom.c.iter().filter(|c| c.norm() > 0.0).count(), 1);
        hom.validate().unwrap();
        FieldCoeffs::mz(1.3).validate().unwrap();
    }

    #[test]
    fn unnormalized_mechanics_rejected() {
        let dims = ModeDims::new(2, 2, 3).unwrap();
        let v = Ket::from_element(3, C64::from(1.0));
        assert!(matches!(
            init_hierarchy(Scenario::Mz { phi: 0.0 }, &semiclassical(), dims, &v, Frame::Displaced),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn initial_physical_states() {
        let p = SystemParams::with_beta(1.0, 1.0, 1.0 / 3.0, 2.0).unwrap();
        for phi in [0.0, 1.0, std::f64::consts::PI] {
            let (h, c) = setup(Scenario::Mz { phi }, &p, Frame::Displaced, Some(4)).unwrap();
            let rho = physical_state(&h, &c);
            assert!((rho.trace() - C64::from(1.0)).norm() < 1e-14);
            assert!(hermitian_defect(&rho) < 1e-14);
        }
        let (h, c) = setup(Scenario::Hom { tau: 0.0 }, &p, Frame::Displaced, Some(4)).unwrap();
        assert_eq!(physical_state(&h, &c), h.ops[15]);
    }

    #[test]
    fn rhs_preserves_adjoint_symmetry() {
        let p = SystemParams::with_beta(1.0, 0.7, 1.0 / 3.0, 1.5).unwrap();
        let h = random_hierarchy(Scenario::Hom { tau: 0.0 }, &p, 4);
        let d = hierarchy_rhs(&h, 0.3);
        for i in 0..LEVELS {
            let j = adjoint_partner(i);
            assert!((&d[i] - d[j].adjoint()).norm() < 1e-12, "level {:?}", unpack(i));
        }
    }

    #[test]
    fn rhs_without_inputs_is_lindblad() {
        let p = SystemParams::with_beta(1.0, 1.0, 1.0 / 3.0, 1.5).unwrap();
        let mut h = random_hierarchy(Scenario::Hom { tau: 0.0 }, &p, 3);
        h.pulses = [PulseShape::new(1.0, 100.0), PulseShape::new(1.0, 100.0)];
        let d = hierarchy_rhs(&h, 0.0);
        let ham = displaced_h(p.gbar, p.g, h.dims);
        let ls: Vec<CMatrix> = [Mode::Cavity1, Mode::Cavity2]
            .iter()
            .map(|&m| mode_lowering(m, h.dims))
            .collect();
        for i in 0..LEVELS {
            let r = &h.ops[i];
            let mut want = (&ham * r - r * &ham) * C64::new(0.0, -1.0);
            for l in &ls {
                let ld = l.adjoint();
                want += l * r * &ld - (&ld * l * r + r * &ld * l) * C64::from(0.5);
            }
            assert!((&d[i] - want).norm() < 1e-12);
        }
        // the vacuum hierarchy is stationary
        let (h0, _) = setup(Scenario::Hom { tau: 0.0 }, &p, Frame::Displaced, Some(3)).unwrap();
        let mut h0 = h0;
        h0.pulses = h.pulses;
        assert!(hierarchy_rhs(&h0, 0.0).iter().all(|x| x.norm() < 1e-14));
    }

    #[test]
    fn top_level_trace_starts_flat() {
        let p = SystemParams::with_beta(1.0, 1.0, 1.0 / 3.0, 1.0).unwrap();
        let (h, _) = setup(Scenario::Hom { tau: 0.0 }, &p, Frame::Displaced, None).unwrap();
        let d = hierarchy_rhs(&h, 0.0);
        assert!(d[15].trace().norm() < 1e-12);
    }

    #[test]
    fn single_cavity_filtering() {
        let p = SystemParams::semiclassical(1.0, 1.0, 0.0);
        let (mut h, c) = setup(Scenario::Hom { tau: 0.0 }, &p, Frame::Displaced, None).unwrap();
        let n1 = embed(&number(3).unwrap(), Mode::Cavity1, h.dims).unwrap();
        let mut worst: f64 = 0.0;
        integrate_with(&mut h, 8.0, default_dt(&p), 0.25, &[c], |h| {
            let pop = (&n1 * physical_state(h, &c)).trace().re;
            // κ = γ = 1: κγ t² e^{-κt} / ... reduces to t² e^{-t}
            let want = h.t * h.t * (-h.t).exp();
            worst = worst.max((pop - want).abs());
            Ok(())
        })
        .unwrap();
        assert!(worst < 1e-9, "worst {worst:e}");
    }

    #[test]
    fn flux_vanishes_before_pulses() {
        let p = semiclassical();
        let (mut h, c) = setup(Scenario::Hom { tau: 3.0 }, &p, Frame::Displaced, None).unwrap();
        for pl in h.pulses.iter_mut() {
            pl.offset += 1.0;
        }
        h = integrate(h, 0.9, default_dt(&p)).unwrap();
        assert!(detector_flux(&h, &c, 1).unwrap().abs() < 1e-12);
        assert!(detector_flux(&h, &c, 2).unwrap().abs() < 1e-12);
        assert!(coincidence_rate(&h).unwrap().abs() < 1e-12);
    }

    #[test]
    fn phase_periodicity() {
        let p = SystemParams::with_beta(1.0, 1.0, 1.0 / 3.0, 2.0).unwrap();
        let (h, _) = setup(Scenario::Mz { phi: 0.0 }, &p, Frame::Displaced, None).unwrap();
        let h = integrate(h, 2.0, default_dt(&p)).unwrap();
        let a = physical_state(&h, &FieldCoeffs::mz(std::f64::consts::PI));
        let b = physical_state(&h, &FieldCoeffs::mz(-std::f64::consts::PI));
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn coarse_step_rejected() {
        let p = semiclassical();
        let (h, _) = setup(Scenario::Mz { phi: 0.0 }, &p, Frame::Displaced, None).unwrap();
        assert!(matches!(integrate(h, 1.0, 0.5), Err(Error::StepSize { .. })));
    }
}
