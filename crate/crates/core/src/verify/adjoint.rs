//! E1 (finite-difference adjoint consistency) and E2 (the duality identity
//! between the tracking residual, linearized state and adjoint).

use rayon::prelude::*;

use crate::error::Result;
use crate::optim::{gradient_field, objective};
use crate::pde::{solve_adjoint, solve_linearized, solve_state, SolveOptions};
use crate::quad::{l2_inner_control, l2_inner_space, l2_inner_spacetime};
use crate::verify::context::ExperimentConfig;
use crate::verify::report::{ExperimentReport, Metadata, Table};
use crate::verify::sample::{
    control_direction, gaussian_spatial, random_feasible, smooth_control_direction,
};

const E1_BLOCK: u64 = 10;
const E2_BLOCK: u64 = 20;

pub fn run_e1(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let spec = &cfg.spec;
    let n_samples = cfg.samples(20);
    let eps_grid: Vec<f64> = (0..5).map(|i| 10f64.powf(-3.0 - 0.5 * i as f64)).collect();

    let rows_per_sample: Vec<Result<Vec<Vec<f64>>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.rng(E1_BLOCK, i as u64);
            let u = random_feasible(spec, &mut rng);
            let v = smooth_control_direction(spec.grid, &mut rng);
            let eta = spec.y0.clone();
            let p = gradient_field(spec, &u, &eta)?;
            let pairing = l2_inner_control(&p, &v)?;
            let mut rows = Vec::with_capacity(eps_grid.len());
            for &eps in &eps_grid {
                let jp = objective(spec, &u.axpy(eps, &v)?, &eta)?;
                let jm = objective(spec, &u.axpy(-eps, &v)?, &eta)?;
                let fd = (jp - jm) / (2.0 * eps);
                rows.push(vec![i as f64, eps, fd, pairing, (fd - pairing).abs()]);
            }
            crate::verify::progress::emit(cfg.experiment_id.name(), i as u64);
            Ok(rows)
        })
        .collect();

    let mut table = Table::new(&["sample", "eps", "fd_central", "pairing", "abs_err"]);
    for rows in rows_per_sample {
        for row in rows? {
            table.push(row);
        }
    }
    let meta = Metadata {
        seed: cfg.seed,
        grid_nx: spec.grid.nx(),
        grid_nt: spec.grid.nt(),
        gap_tol: 0.0,
        samples_attempted: n_samples,
        samples_used: n_samples,
        samples_excluded: 0,
        notes: vec![format!("eps grid {:?}", eps_grid)],
    };
    ExperimentReport::build(cfg.experiment_id, table, meta)
}

pub fn run_e2(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let spec = &cfg.spec;
    let nt = spec.grid.nt();
    let n_samples = cfg.samples(50);
    let taus = [0, nt / 4, nt / 2];
    let solve = SolveOptions::tight();

    let mut table = Table::new(&["tau_index", "sample", "lhs", "rhs", "rel_mismatch"]);
    for (ti, &m) in taus.iter().enumerate() {
        // any admissible control gives a valid trajectory for the identity
        let mut rng = cfg.rng(E2_BLOCK + ti as u64, u64::MAX);
        let u_full = random_feasible(spec, &mut rng);
        let y_full = solve_state(spec, &u_full, &spec.y0.clone(), &solve)?.y;
        let sub = spec.restrict(m, &y_full.slice(m))?;
        let u_sub = if m == 0 {
            u_full.clone()
        } else {
            u_full.restrict(m)?
        };
        let ybar = solve_state(&sub, &u_sub, &sub.y0.clone(), &solve)?.y;
        let pbar = solve_adjoint(&sub, &ybar)?;
        let residual = ybar.axpy(-1.0, &sub.yq)?;
        let p_tau = pbar.slice(0);

        let rows: Vec<Result<Vec<f64>>> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = cfg.rng(E2_BLOCK + ti as u64, i as u64);
                let du = control_direction(sub.grid, &mut rng).scale(2.0);
                let zeta = gaussian_spatial(sub.grid, &mut rng).scale(0.5);
                let z = solve_linearized(&sub, &ybar, &du, &zeta)?;
                let lhs = l2_inner_spacetime(&residual, &z)?;
                let rhs = l2_inner_control(&pbar, &du)? + l2_inner_space(&p_tau, &zeta)?;
                let denom = lhs.abs().max(rhs.abs());
                let rel = if denom == 0.0 {
                    0.0
                } else {
                    (lhs - rhs).abs() / denom
                };
                crate::verify::progress::emit(cfg.experiment_id.name(), i as u64);
                Ok(vec![m as f64, i as f64, lhs, rhs, rel])
            })
            .collect();
        for row in rows {
            table.push(row?);
        }
    }

    let meta = Metadata {
        seed: cfg.seed,
        grid_nx: spec.grid.nx(),
        grid_nt: spec.grid.nt(),
        gap_tol: 0.0,
        samples_attempted: n_samples * taus.len(),
        samples_used: n_samples * taus.len(),
        samples_excluded: 0,
        notes: vec![format!("tau indices {:?}", taus)],
    };
    ExperimentReport::build(cfg.experiment_id, table, meta)
}
