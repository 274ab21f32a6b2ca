//! E10: dynamic-programming consistency of the computed value function.

use crate::error::Result;
use crate::optim::running_cost;
use crate::verify::context::{ExperimentConfig, Workbench};
use crate::verify::report::{ExperimentReport, Metadata, Table};

pub fn run_e10(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let wb = Workbench::new(cfg)?;
    let spec = &cfg.spec;
    let nt = spec.grid.nt();
    let v_total = wb.base.j;

    let mut table = Table::new(&[
        "tau_index",
        "v_total",
        "running",
        "v_tau",
        "tail",
        "bellman_residual",
        "reopt_residual",
    ]);
    let mut attempted = 0;
    let mut excluded = 0;
    for m in [0, nt / 4, nt / 2, 3 * nt / 4, nt] {
        attempted += 1;
        let running = running_cost(spec, &wb.base.ybar, m);
        let (v_tau, tail) = if m == nt {
            (0.0, 0.0)
        } else {
            let (sub, rep) = wb.restricted(m)?;
            if !rep.converged {
                excluded += 1;
                continue;
            }
            // cost-to-go of the restriction of the base minimizer
            let warm = if m == 0 {
                wb.base.ubar.clone()
            } else {
                wb.base.ubar.restrict(m)?
            };
            let tail_state =
                crate::pde::solve_state(&sub, &warm, &sub.y0.clone(), &cfg.optimize.solve)?;
            let tail = crate::optim::tracking_cost(&sub, &tail_state.y);
            (rep.j, tail)
        };
        let bellman = (v_total - running - v_tau).abs();
        let reopt = (v_tau - tail).abs();
        table.push(vec![
            m as f64, v_total, running, v_tau, tail, bellman, reopt,
        ]);
    }

    let meta = Metadata {
        seed: cfg.seed,
        grid_nx: spec.grid.nx(),
        grid_nt: spec.grid.nt(),
        gap_tol: wb.gap_tol,
        samples_attempted: attempted,
        samples_used: attempted - excluded,
        samples_excluded: excluded,
        notes: vec!["tau at {0, nt/4, nt/2, 3nt/4, nt}".into()],
    };
    ExperimentReport::build(cfg.experiment_id, table, meta)
}
