//! E6: solution stability of re-optimized problems under joint time/state
//! perturbations, with a grid-refinement control.

use rayon::prelude::*;

use crate::error::Result;
use crate::optim::{minimize, OptimizeOptions};
use crate::quad::{l2_norm_q, l2_norm_space};
use crate::verify::context::{inner_gap_tol, ExperimentConfig, Workbench};
use crate::verify::report::{ExperimentReport, Metadata, Table};
use crate::verify::sample::spatial_direction;

const E6_BLOCK: u64 = 60;
const SCALES: [f64; 3] = [1e-1, 1e-2, 1e-3];
const H_STEPS: [usize; 3] = [1, 2, 4];

fn stability_rows(
    wb: &Workbench,
    m: usize,
    phase: f64,
    count: usize,
) -> Result<(Vec<Vec<f64>>, usize, usize)> {
    let spec = &wb.cfg.spec;
    let k = spec.grid.dt();
    let eta_tau = wb.base.ybar.slice(m);

    let evals: Vec<Result<Option<Vec<f64>>>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let h_steps = H_STEPS[i % H_STEPS.len()];
            let scale = SCALES[(i / H_STEPS.len()) % SCALES.len()];
            let idx = m + h_steps;
            let mut rng = wb.cfg.rng(E6_BLOCK + phase as u64, i as u64);
            let e = spatial_direction(spec.grid, &mut rng, i);
            let eta = eta_tau.axpy(scale, &e)?;

            let sub = spec.restrict(idx, &eta)?;
            let warm = wb.base.ubar.restrict(idx)?;
            let rep = minimize(
                &sub,
                &sub.y0.clone(),
                &OptimizeOptions {
                    gap_tol: Some(inner_gap_tol(wb.gap_tol, 1.0)),
                    max_iter: wb.cfg.optimize.max_iter,
                    solve: wb.cfg.optimize.solve,
                    ..OptimizeOptions::warm(warm)
                },
            )?;
            if !rep.converged {
                return Ok(None);
            }
            crate::verify::progress::emit(wb.cfg.experiment_id.name(), i as u64);
            let reference = wb.base.ybar.restrict(idx)?;
            let lhs = l2_norm_q(&rep.ybar.axpy(-1.0, &reference)?);
            let drift = l2_norm_space(&wb.base.ybar.slice(idx).axpy(-1.0, &eta_tau)?);
            let denom = drift + scale;
            Ok(Some(vec![
                phase,
                i as f64,
                h_steps as f64 * k,
                scale,
                denom,
                lhs,
                lhs / denom,
            ]))
        })
        .collect();

    let mut rows = Vec::new();
    let mut excluded = 0;
    for e in evals {
        match e? {
            Some(row) => rows.push(row),
            None => excluded += 1,
        }
    }
    Ok((rows, count, excluded))
}

pub fn run_e6(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.spec.grid.nt() < 8 {
        return Err(crate::error::Error::invalid(
            "stability sweep shifts tau by up to 4 steps and needs nt >= 8",
        ));
    }
    let wb = Workbench::new(cfg)?;
    let count = cfg.samples(40);
    let m = cfg.spec.grid.nt() / 4;

    let mut table = Table::new(&["phase", "sample", "h", "scale", "denom", "lhs", "ratio"]);
    let (rows, attempted_c, excluded_c) = stability_rows(&wb, m, 0.0, count)?;
    for row in rows {
        table.push(row);
    }

    // one uniform refinement: nx 2nx+1, nt 2nt; the empirical constant must
    // be grid-stable
    let fine_cfg = ExperimentConfig {
        spec: cfg.spec.refine()?,
        ..cfg.clone()
    };
    let fine_wb = Workbench::new(&fine_cfg)?;
    let (rows, attempted_f, excluded_f) = stability_rows(&fine_wb, 2 * m, 1.0, count)?;
    for row in rows {
        table.push(row);
    }

    let meta = Metadata {
        seed: cfg.seed,
        grid_nx: cfg.spec.grid.nx(),
        grid_nt: cfg.spec.grid.nt(),
        gap_tol: wb.gap_tol,
        samples_attempted: attempted_c + attempted_f,
        samples_used: attempted_c + attempted_f - excluded_c - excluded_f,
        samples_excluded: excluded_c + excluded_f,
        notes: vec![format!(
            "tau index {m}, h steps {:?}, scales {:?}",
            H_STEPS, SCALES
        )],
    };
    ExperimentReport::build(cfg.experiment_id, table, meta)
}
