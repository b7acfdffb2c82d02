//! Two-jump Monte-Carlo unraveling of the Fock-state hierarchy for the HOM
//! interferometer.
//!
//! Between detections every level follows the no-jump generator
//!
//! ```text
//! dρ̃/dt = -i H_eff ρ + i ρ H_eff† - √m ξ L₁†ρ_{m-1,n} - √n ξ* ρ_{m,n-1} L₁
//!         - √(mn)|ξ|² ρ_{m-1,n-1} + (the same for L₂, η, p, q)
//! ```
//!
//! and a click at detector `d` replaces the hierarchy by `J_d(ρ)` renormalised.
//! Per step of length `dt` the click probabilities are `P_d = dt Tr[J_d(ρ)]`
//! and the vacuum probability is fixed by closure, `P₀ = 1 - P₁ - P₂`.
//!
//! Trajectory `i` of an estimate draws from its own `ChaCha8Rng` seeded with
//! [`trajectory_seed`]`(master_seed, i)`, so results do not depend on
//! scheduling. All trajectories share the deterministic no-jump path up to
//! their first click; that segment is integrated once.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock_master::{default_dt, setup, FieldCoeffs, RunOptions, Scenario};
use crate::hierarchy::{
    instant_amplitudes, mirror, rk4_step, step_amplitudes, step_grid, Generator, Kernel, Rk4Work, LEVELS, PRIMARY,
};
use crate::hilbert::{embed, number, CMatrix, DensityOp, Mode, ModeDims, C64};
use crate::semiclassical::{PulseShape, SystemParams};
use crate::sparse::SparseOp;

/// Largest click probability allowed in one step.
pub const MAX_JUMP_PROBABILITY: f64 = 0.05;

/// Trajectories that have not seen both photons by `RUNAWAY_HORIZON / κ` fail.
pub const RUNAWAY_HORIZON: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    D1,
    D2,
}

impl Detector {
    fn index(self) -> usize {
        match self {
            Detector::D1 => 0,
            Detector::D2 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub time: f64,
    pub detector: Detector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Coincidence,
    BunchedAtD1,
    BunchedAtD2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub jumps: Vec<Detection>,
    pub outcome: Outcome,
    /// Conditional `⟨a₁†a₁⟩` at the requested sample times.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Estimate {
    pub tau: f64,
    pub n_traj: usize,
    pub coincidences: usize,
    pub p_hat: f64,
    /// Two standard deviations of a Bernoulli mean, `2√(p̂(1-p̂)/n)`.
    pub half_width: f64,
}

impl G2Estimate {
    pub fn from_counts(tau: f64, coincidences: usize, n_traj: usize) -> Self {
        let p_hat = coincidences as f64 / n_traj as f64;
        Self {
            tau,
            n_traj,
            coincidences,
            p_hat,
            half_width: 2.0 * (p_hat * (1.0 - p_hat) / n_traj as f64).sqrt(),
        }
    }
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index`: `splitmix64(master_seed ^ splitmix64(index))`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

/// Hierarchy conditioned on a detection record.
#[derive(Debug, Clone)]
pub struct ConditionalHierarchy {
    pub t: f64,
    pub ops: Vec<DensityOp>,
    pub dims: ModeDims,
    pub pulses: [PulseShape; 2],
    pub params: SystemParams,
    pub coeffs: FieldCoeffs,
    pub record: Vec<Detection>,
    pub normalized: bool,
    generator: Generator,
    work: Rk4Work,
}

impl ConditionalHierarchy {
    /// Both photons about to enter, cavities empty, no clicks yet.
    pub fn hom(p: &SystemParams, tau: f64, opts: &RunOptions) -> Result<Self> {
        let (h, coeffs) = setup(Scenario::Hom { tau }, p, opts.frame, opts.mech_dim)?;
        let n = h.dims.total();
        Ok(Self {
            t: 0.0,
            work: Rk4Work::new(LEVELS, n, 0),
            ops: h.ops,
            dims: h.dims,
            pulses: h.pulses,
            params: h.params,
            coeffs,
            record: Vec::new(),
            normalized: true,
            generator: h.generator,
        })
    }

    /// `Σ c* Tr ρ`, the probability of the record so far relative to the last normalisation.
    pub fn trace(&self) -> f64 {
        let tr: Vec<C64> = self.ops.iter().map(|o| o.trace()).collect();
        self.coeffs.contract(&tr).re
    }

    /// Click rates `Σ c* Tr[J_d(ρ)]` at the current time.
    pub fn jump_rates(&self) -> [f64; 2] {
        let amps = instant_amplitudes(&self.pulses, self.t);
        let rate = |d| {
            let x: Vec<C64> = (0..LEVELS)
                .map(|i| self.generator.jump_trace(&self.ops, i, amps, d))
                .collect();
            self.coeffs.contract(&x).re
        };
        [rate(0), rate(1)]
    }

    pub fn normalize(&mut self) -> Result<()> {
        let tr = self.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidTransition(format!(
                "cannot normalise a record of probability {tr:e}"
            )));
        }
        let s = C64::from(1.0 / tr);
        for o in self.ops.iter_mut() {
            *o *= s;
        }
        self.normalized = true;
        Ok(())
    }

    /// `Σ c* Tr[O ρ]` for the current, normalised state.
    pub(crate) fn expect(&self, op: &SparseOp) -> f64 {
        let x: Vec<C64> = self.ops.iter().map(|o| op.trace_with(o)).collect();
        self.coeffs.contract(&x).re / self.trace()
    }

    pub fn clicks(&self) -> usize {
        self.record.len()
    }
}

/// Advances the un-normalised state by one RK4 step of the no-jump generator.
pub fn no_jump_step(ch: &mut ConditionalHierarchy, dt: f64) -> Result<()> {
    let before = ch.trace();
    let a = ch.t;
    let gen = &ch.generator;
    let pulses = ch.pulses;
    let mut f = |t: f64, y: &[CMatrix], dy: &mut [CMatrix], _: &mut [C64], tmp: &mut CMatrix| {
        let amps = step_amplitudes(&pulses, a, t);
        for &i in &PRIMARY {
            gen.apply(y, i, amps, Kernel::NO_JUMP, &mut dy[i], tmp);
        }
        mirror(dy);
    };
    rk4_step(&mut ch.ops, &mut [], a, dt, &mut ch.work, &mut f);
    ch.t = a + dt;
    ch.normalized = false;
    let after = ch.trace();
    if after > before + 1e-10 {
        return Err(Error::GeneratorSign {
            time: ch.t,
            growth: after - before,
        });
    }
    Ok(())
}

/// `[P₀, P₁, P₂]` for the interval `(t, t + dt]`.
pub fn detection_probabilities(ch: &ConditionalHierarchy, dt: f64) -> Result<[f64; 3]> {
    let [r1, r2] = ch.jump_rates();
    let (p1, p2) = (dt * r1, dt * r2);
    let p0 = 1.0 - p1 - p2;
    for (what, v) in [("P0", p0), ("P1", p1), ("P2", p2)] {
        if !(-1e-9..=1.0 + 1e-9).contains(&v) {
            return Err(Error::StepSize {
                time: ch.t,
                detail: format!("{what} = {v} outside [0, 1]"),
            });
        }
    }
    if p1 > MAX_JUMP_PROBABILITY || p2 > MAX_JUMP_PROBABILITY {
        return Err(Error::StepSize {
            time: ch.t,
            detail: format!(
                "click probability per step {:.3} exceeds {MAX_JUMP_PROBABILITY}",
                p1.max(p2)
            ),
        });
    }
    Ok([p0, p1.max(0.0), p2.max(0.0)])
}

/// Probability of no click in `(t, t + dt]`.
pub fn vacuum_probability(ch: &ConditionalHierarchy, dt: f64) -> Result<f64> {
    Ok(detection_probabilities(ch, dt)?[0])
}

/// Click at `detector` during `(t, t + dt]`: the state is carried to `t + dt`
/// by the no-jump generator and replaced there by `J_d(ρ)`, renormalised,
/// and the click is recorded at `t + dt`.
///
/// Applying `J_d` at the start of the step instead would skip the input that
/// arrives during the step and strand `O(|ξ|² dt)` of the remaining photon.
pub fn jump_update(ch: &mut ConditionalHierarchy, detector: Detector, dt: f64) -> Result<()> {
    let d = detector.index();
    no_jump_step(ch, dt)?;
    let rate = ch.jump_rates()[d];
    if !(rate * dt > 1e-300) {
        return Err(Error::InvalidTransition(format!(
            "click at {detector:?} has probability {:e} at t = {}",
            rate * dt,
            ch.t
        )));
    }
    let amps = instant_amplitudes(&ch.pulses, ch.t);
    let n = ch.dims.total();
    let mut out = vec![DensityOp::zeros(n, n); LEVELS];
    let mut tmp = DensityOp::zeros(n, n);
    for &i in &PRIMARY {
        ch.generator
            .apply(&ch.ops, i, amps, Kernel::jump(d), &mut out[i], &mut tmp);
    }
    mirror(&mut out);
    ch.ops = out;
    ch.normalize()?;
    ch.record.push(Detection { time: ch.t, detector });
    Ok(())
}

fn outcome(jumps: &[Detection]) -> Outcome {
    match (jumps[0].detector, jumps[1].detector) {
        (Detector::D1, Detector::D1) => Outcome::BunchedAtD1,
        (Detector::D2, Detector::D2) => Outcome::BunchedAtD2,
        _ => Outcome::Coincidence,
    }
}

/// Monte-Carlo settings beyond the physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOptions {
    pub run: RunOptions,
    /// Times at which to record the conditional `⟨a₁†a₁⟩`.
    pub sample_times: Vec<f64>,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            sample_times: Vec::new(),
        }
    }
}

struct Plan {
    steps: Vec<(f64, f64)>,
    /// `sample_at[k]`: indices of sample times equal to the end of step `k`.
    sample_at: Vec<Vec<usize>>,
    n_samples: usize,
    n1: SparseOp,
}

impl Plan {
    fn new(ch: &ConditionalHierarchy, dt: f64, horizon: f64, sample_times: &[f64]) -> Result<Self> {
        if let Some(&bad) = sample_times.iter().find(|&&s| !(s > 0.0 && s <= horizon)) {
            return Err(Error::InvalidArgument(format!(
                "sample time {bad} outside (0, {horizon}]"
            )));
        }
        let mut breaks: Vec<f64> = ch.pulses.iter().map(|p| p.offset).collect();
        breaks.extend_from_slice(sample_times);
        let steps = step_grid(0.0, horizon, dt, &breaks);
        let mut sample_at = vec![Vec::new(); steps.len()];
        for (j, &s) in sample_times.iter().enumerate() {
            let k = steps
                .iter()
                .position(|&(_, b)| (b - s).abs() <= 1e-12 * (1.0 + s))
                .ok_or_else(|| Error::InvalidArgument(format!("sample time {s} not on the grid")))?;
            sample_at[k].push(j);
        }
        let n1 = embed(&number(ch.dims.d1)?, Mode::Cavity1, ch.dims)?;
        Ok(Self {
            steps,
            sample_at,
            n_samples: sample_times.len(),
            n1: SparseOp::from_dense(&n1),
        })
    }
}

/// One step of a trajectory from a normalised state: returns the click, if any.
fn advance(ch: &mut ConditionalHierarchy, h: f64, rng: &mut ChaCha8Rng) -> Result<Option<Detector>> {
    let [p0, p1, _] = detection_probabilities(ch, h)?;
    let r: f64 = rng.random();
    if p0 > r {
        no_jump_step(ch, h)?;
        ch.normalize()?;
        return Ok(None);
    }
    let rj: f64 = rng.random();
    let det = if p1 / (1.0 - p0) > rj {
        Detector::D1
    } else {
        Detector::D2
    };
    jump_update(ch, det, h)?;
    Ok(Some(det))
}

struct FirstClick {
    step: usize,
    detector: Detector,
    rng: ChaCha8Rng,
}

/// Completes a trajectory after its first click at the end of step `k`.
fn finish(
    mut ch: ConditionalHierarchy,
    plan: &Plan,
    k: usize,
    mut rng: ChaCha8Rng,
    seed: u64,
    mut samples: Vec<f64>,
) -> Result<TrajectoryRecord> {
    for &j in &plan.sample_at[k] {
        samples[j] = ch.expect(&plan.n1);
    }
    for (s, &(a, b)) in plan.steps.iter().enumerate().skip(k + 1) {
        ch.t = a;
        if advance(&mut ch, b - a, &mut rng)?.is_some() {
            // both photons are gone; the cavities are empty from here on
            for later in &plan.sample_at[s..] {
                for &j in later {
                    samples[j] = 0.0;
                }
            }
            let jumps = ch.record.clone();
            return Ok(TrajectoryRecord {
                seed,
                outcome: outcome(&jumps),
                jumps,
                samples,
            });
        }
        for &j in &plan.sample_at[s] {
            samples[j] = ch.expect(&plan.n1);
        }
    }
    Err(Error::RunawayTrajectory {
        seed,
        detections: ch.clicks(),
        time: ch.t,
    })
}

/// Runs one trajectory per seed.
///
/// Output order follows `seeds`; each record depends only on its seed.
pub fn run_trajectories(
    p: &SystemParams,
    tau: f64,
    seeds: &[u64],
    opts: &TrajectoryOptions,
) -> Result<Vec<TrajectoryRecord>> {
    let start = ConditionalHierarchy::hom(p, tau, &opts.run)?;
    let dt = opts.run.dt.unwrap_or_else(|| default_dt(p));
    let horizon = RUNAWAY_HORIZON / p.kappa1.min(p.kappa2) + tau.abs();
    let plan = Plan::new(&start, dt, horizon, &opts.sample_times)?;

    // first pass: the shared no-jump path, probabilities only, until every seed has clicked
    let mut rngs: Vec<Option<ChaCha8Rng>> = seeds.iter().map(|&s| Some(ChaCha8Rng::seed_from_u64(s))).collect();
    let mut firsts: Vec<Option<FirstClick>> = (0..seeds.len()).map(|_| None).collect();
    let mut waiting = seeds.len();
    let mut path = start.clone();
    for (k, &(a, b)) in plan.steps.iter().enumerate() {
        if waiting == 0 {
            break;
        }
        path.t = a;
        let [p0, p1, _] = detection_probabilities(&path, b - a)?;
        for (slot, first) in rngs.iter_mut().zip(firsts.iter_mut()) {
            let Some(rng) = slot else { continue };
            let r: f64 = rng.random();
            if p0 > r {
                continue;
            }
            let rj: f64 = rng.random();
            let detector = if p1 / (1.0 - p0) > rj {
                Detector::D1
            } else {
                Detector::D2
            };
            *first = Some(FirstClick {
                step: k,
                detector,
                rng: slot.take().expect("seed still waiting"),
            });
            waiting -= 1;
        }
        no_jump_step(&mut path, b - a)?;
        path.normalize()?;
    }
    let firsts: Vec<FirstClick> = firsts
        .into_iter()
        .zip(seeds)
        .map(|(f, &seed)| {
            f.ok_or(Error::RunawayTrajectory {
                seed,
                detections: 0,
                time: horizon,
            })
        })
        .collect::<Result<_>>()?;

    // second pass: replay the shared path and branch off at each first click
    let mut by_step: Vec<Vec<usize>> = vec![Vec::new(); plan.steps.len()];
    for (i, f) in firsts.iter().enumerate() {
        by_step[f.step].push(i);
    }
    let mut shared = vec![0.0; plan.n_samples];
    let mut results: Vec<Option<TrajectoryRecord>> = vec![None; seeds.len()];
    let batch = 4 * rayon::current_num_threads().max(1);
    let mut pending: Vec<(usize, usize, ConditionalHierarchy, Vec<f64>)> = Vec::new();
    let flush = |pending: &mut Vec<(usize, usize, ConditionalHierarchy, Vec<f64>)>,
                 results: &mut Vec<Option<TrajectoryRecord>>|
     -> Result<()> {
        let done: Vec<(usize, Result<TrajectoryRecord>)> = pending
            .par_drain(..)
            .map(|(i, k, ch, samples)| {
                let rng = firsts[i].rng.clone();
                (i, finish(ch, &plan, k, rng, seeds[i], samples))
            })
            .collect();
        for (i, r) in done {
            results[i] = Some(r?);
        }
        Ok(())
    };
    let last = firsts.iter().map(|f| f.step).max().unwrap_or(0);
    let mut path = start;
    for (k, &(a, b)) in plan.steps.iter().enumerate() {
        path.t = a;
        for &i in &by_step[k] {
            let mut ch = path.clone();
            jump_update(&mut ch, firsts[i].detector, b - a)?;
            pending.push((i, k, ch, shared.clone()));
        }
        if pending.len() >= batch {
            flush(&mut pending, &mut results)?;
        }
        if k >= last {
            break;
        }
        no_jump_step(&mut path, b - a)?;
        path.normalize()?;
        for &j in &plan.sample_at[k] {
            shared[j] = path.expect(&plan.n1);
        }
    }
    flush(&mut pending, &mut results)?;
    Ok(results
        .into_iter()
        .map(|r| r.expect("every trajectory finishes"))
        .collect())
}

/// One trajectory with its own seed.
pub fn run_trajectory(p: &SystemParams, tau: f64, seed: u64, opts: &TrajectoryOptions) -> Result<TrajectoryRecord> {
    Ok(run_trajectories(p, tau, &[seed], opts)?.remove(0))
}

/// Coincidence fraction over `n_traj` trajectories seeded from `master_seed`.
pub fn estimate_g2(
    p: &SystemParams,
    tau: f64,
    n_traj: usize,
    master_seed: u64,
    opts: &TrajectoryOptions,
) -> Result<G2Estimate> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    let seeds: Vec<u64> = (0..n_traj as u64).map(|i| trajectory_seed(master_seed, i)).collect();
    let records = run_trajectories(p, tau, &seeds, opts)?;
    Ok(aggregate(tau, &records))
}

pub fn aggregate(tau: f64, records: &[TrajectoryRecord]) -> G2Estimate {
    let hits = records.iter().filter(|r| r.outcome == Outcome::Coincidence).count();
    G2Estimate::from_counts(tau, hits, records.len())
}
