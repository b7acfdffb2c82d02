//! Scenario drivers: each turns a config into one or more tables.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use phonon_bs_core::closed_system::{branch_states, r_coefficients, SchwingerBasis};
use phonon_bs_core::fock_master::{
    default_t_end, hom_run, hom_visibility_curve, mz_observables, Frame, HomRun, RunOptions,
};
use phonon_bs_core::hilbert::{coherent_ket, projector, Ket, C64};
use phonon_bs_core::memory_prep::{
    mechanical_fidelity, memory_me_sampled, MemoryDims, MemoryPrepParams, Profile, MEMORY_MARGIN,
};
use phonon_bs_core::semiclassical::SystemParams;
use phonon_bs_core::trajectories::{estimate_g2, TrajectoryOptions};

use crate::config::{FrameName, RunConfig, ScenarioKind};
use crate::output::{Cell, Table};
use crate::CliError;

/// A table plus the suffix that names its file (`None` for the primary output).
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub suffix: Option<&'static str>,
    pub table: Table,
}

pub fn params_for(cfg: &RunConfig, beta: Option<f64>) -> Result<SystemParams, CliError> {
    Ok(match beta {
        None => SystemParams::semiclassical(cfg.kappa, cfg.gamma, cfg.gbar),
        Some(b) => SystemParams::with_beta(cfg.kappa, cfg.gamma, cfg.gbar, b)?,
    })
}

fn run_options(cfg: &RunConfig) -> RunOptions {
    RunOptions {
        frame: match cfg.frame {
            FrameName::Displaced => Frame::Displaced,
            FrameName::Lab => Frame::Lab,
        },
        mech_dim: cfg.mech_dim,
        dt: cfg.dt,
        t_end: cfg.t_end,
        sample_dt: cfg.sample_dt,
    }
}

pub fn run_scenario(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    cfg.validate()?;
    match cfg.scenario() {
        ScenarioKind::MzSweep => mz_sweep(cfg),
        ScenarioKind::HomDip => hom_dip(cfg),
        ScenarioKind::HomMc => hom_mc(cfg),
        ScenarioKind::ControlCurves => control_curves(cfg),
        ScenarioKind::MemoryPrep => memory_prep(cfg),
    }
}

fn primary(table: Table) -> Artifact {
    Artifact { suffix: None, table }
}

fn mz_sweep(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let opts = run_options(cfg);
    let runs = cfg
        .beta_list
        .par_iter()
        .map(|&beta| {
            let p = params_for(cfg, beta)?;
            Ok((beta, mz_observables(&p, &cfg.phi_grid, &opts)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut t = Table::new(&["beta", "phi", "t", "P_u", "v_t", "v_integrated"]);
    for (beta, mz) in runs {
        for (k, &time) in mz.times.iter().enumerate() {
            for (i, &phi) in mz.phis.iter().enumerate() {
                t.push(vec![
                    Cell::Beta(beta),
                    Cell::Num(phi),
                    Cell::Num(time),
                    Cell::Num(mz.rate[k][i]),
                    Cell::Num(mz.visibility[k]),
                    Cell::Num(mz.v_integrated),
                ]);
            }
        }
    }
    Ok(vec![primary(t)])
}

fn hom_dip(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let jobs: Vec<(Option<f64>, f64)> = cfg
        .beta_list
        .iter()
        .flat_map(|&b| cfg.tau_grid.iter().map(move |&tau| (b, tau)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(beta, tau)| {
            let p = params_for(cfg, beta)?;
            // one horizon for the whole delay grid keeps the time samples aligned
            let horizon = cfg.tau_grid.iter().map(|&s| default_t_end(&p, s)).fold(0.0, f64::max);
            let opts = RunOptions {
                t_end: Some(cfg.t_end.unwrap_or(horizon)),
                ..run_options(cfg)
            };
            Ok(hom_run(&p, tau, &opts)?)
        })
        .collect::<Result<Vec<HomRun>, CliError>>()?;

    let mut dip = Table::new(&["beta", "tau", "t", "C"]);
    for (&(beta, tau), run) in jobs.iter().zip(&runs) {
        for (&time, &c) in run.times.iter().zip(&run.coincidence) {
            dip.push(vec![Cell::Beta(beta), Cell::Num(tau), Cell::Num(time), Cell::Num(c)]);
        }
    }
    // needs τ = 0 and some τ < 0 on the grid; otherwise the file holds the header only
    let mut vis = Table::new(&["beta", "t", "v"]);
    let per_beta = cfg.tau_grid.len();
    if cfg.tau_grid.contains(&0.0) && cfg.tau_grid.iter().any(|&s| s < 0.0) {
        for (&beta, group) in cfg.beta_list.iter().zip(runs.chunks(per_beta)) {
            let (times, v) = hom_visibility_curve(group)?;
            for (time, v) in times.into_iter().zip(v) {
                vis.push(vec![Cell::Beta(beta), Cell::Num(time), Cell::Num(v)]);
            }
        }
    }
    Ok(vec![
        primary(dip),
        Artifact {
            suffix: Some("visibility"),
            table: vis,
        },
    ])
}

fn hom_mc(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let opts = TrajectoryOptions {
        run: run_options(cfg),
        sample_times: Vec::new(),
    };
    let mut t = Table::new(&["tau", "beta", "n_traj", "p_hat", "half_width"]);
    // trajectories run in parallel inside each point
    for &beta in &cfg.beta_list {
        let p = params_for(cfg, beta)?;
        for &tau in &cfg.tau_grid {
            let est = estimate_g2(&p, tau, cfg.n_traj, cfg.master_seed, &opts)?;
            t.push(vec![
                Cell::Num(tau),
                Cell::Beta(beta),
                Cell::Int(est.n_traj as u64),
                Cell::Num(est.p_hat),
                Cell::Num(est.half_width),
            ]);
        }
    }
    Ok(vec![primary(t)])
}

/// Two photons in the `m = 0` state `|1,1⟩`, mechanics in `(|0⟩ + |1⟩)/√2`, `g = 1`.
fn control_curves(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let basis = SchwingerBasis::new(2);
    let psi = basis.ket(0, 3)?;
    let mut phi = Ket::zeros(6);
    phi[0] = C64::from(0.5f64.sqrt());
    phi[1] = C64::from(0.5f64.sqrt());
    let rows = cfg
        .gt_grid
        .par_iter()
        .map(|&gt| {
            let r = r_coefficients(&branch_states(&psi, &phi, 1.0, gt)?);
            // index 0, 1, 2 is m = -1, 0, +1
            Ok(vec![
                Cell::Num(gt),
                Cell::Num(r[(1, 2)].norm()),
                Cell::Num(r[(1, 0)].norm()),
                Cell::Num(r[(2, 1)].norm()),
                Cell::Num(r[(0, 1)].norm()),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut t = Table::new(&["gt", "R_01", "R_0m1", "R_10", "R_m10"]);
    for row in rows {
        t.push(row);
    }
    Ok(vec![primary(t)])
}

/// Write-step parameters from the config; `κ₁` defaults to the threshold margin.
pub fn memory_params(cfg: &RunConfig) -> MemoryPrepParams {
    let m = &cfg.memory;
    let area = m.area.unwrap_or(FRAC_PI_2 / m.g);
    let kappa1 = m.kappa1.unwrap_or_else(|| {
        let gamma = m.g * area / (MEMORY_MARGIN * m.duration);
        4.0 * m.g * m.g / gamma
    });
    MemoryPrepParams {
        g: m.g,
        kappa1,
        kappa2: m.kappa2,
        epsilon: C64::new(0.0, 0.5 * m.kappa2 * m.alpha0),
        duration: m.duration,
        area,
        profile: Profile::Square,
    }
}

fn memory_prep(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let params = memory_params(cfg);
    let alpha0 = C64::from(cfg.memory.alpha0);
    let dims = MemoryDims::for_amplitude(cfg.memory.alpha0.abs());
    let mut vac = Ket::zeros(dims.dm);
    vac[0] = C64::from(1.0);
    let rho0 = projector(&dims.product(&coherent_ket(alpha0, dims.d2)?, &vac));
    let t_end = cfg.t_end.unwrap_or(params.duration);
    let dt = cfg.dt.unwrap_or(params.duration / 1000.0);
    let mut t = Table::new(&["t", "fidelity", "trace"]);
    memory_me_sampled(
        &params,
        |s| params.alpha(s),
        &rho0,
        dims,
        t_end,
        dt,
        cfg.sample_dt,
        |time, rho| {
            t.push(vec![
                Cell::Num(time),
                Cell::Num(mechanical_fidelity(rho, alpha0, dims)?),
                Cell::Num(rho.trace().re),
            ]);
            Ok(())
        },
    )?;
    Ok(vec![primary(t)])
}
