//! Optimizer checks against independent oracles: finite differences for the
//! gradient, Taylor remainders for the second variation, exhaustive
//! enumeration for global quality, and dynamic-programming identities.

use pvl_core::field::{Field, SpatialField};
use pvl_core::grid::Grid;
use pvl_core::nonlin::Nonlinearity;
use pvl_core::optim::{
    gradient_field, minimize, objective, oracle_enumerate, primal_dual_gap, running_cost,
    second_variation, second_variation_at, tracking_cost, value, BlockPartition, Method,
    OptimizeOptions,
};
use pvl_core::pde::{solve_adjoint, solve_state, SolveOptions};
use pvl_core::problem::ProblemSpec;
use pvl_core::quad::{l2_inner_control, l2_norm_q, project_box};
use pvl_core::rng::rng_for;
use pvl_core::verify::sample::{random_feasible, smooth_control_direction};

/// Frozen on first computation at nx = 49, nt = 100 (default instance).
const J_ZERO_CONTROL_FIXTURE: f64 = 3.25285030344218823e-2;

#[test]
fn zero_control_objective_regression() {
    let spec = ProblemSpec::default_instance(49, 100).unwrap();
    let j = objective(&spec, &Field::zeros(spec.grid), &spec.y0.clone()).unwrap();
    let rel = (j - J_ZERO_CONTROL_FIXTURE).abs() / J_ZERO_CONTROL_FIXTURE;
    assert!(rel <= 1e-12, "J(0) = {j:.17e}, fixture rel err {rel:.2e}");
}

#[test]
fn constant_target_objective_matches_quadrature() {
    // f = 0, u = 0, eta = 0, yQ = 1: J = 1/2 ||1||^2 under the interior
    // rectangle rule, i.e. (nx h)/2 on the unit cylinder.
    let grid = Grid::unit(1, 49, 20, 1.0).unwrap();
    let spec = ProblemSpec::new(
        grid,
        SpatialField::constant(grid, 0.1).unwrap(),
        Nonlinearity::Zero,
        SpatialField::zeros(grid),
        Field::constant(grid, 1.0).unwrap(),
        Field::constant(grid, -1.0).unwrap(),
        Field::constant(grid, 1.0).unwrap(),
    )
    .unwrap();
    let j = objective(&spec, &Field::zeros(grid), &SpatialField::zeros(grid)).unwrap();
    let expect = 0.5 * 49.0 * grid.dx(0);
    assert!((j - expect).abs() <= 1e-12);
}

#[test]
fn gradient_matches_finite_differences() {
    let spec = ProblemSpec::default_instance(19, 24).unwrap();
    let eta = spec.y0.clone();
    let mut rng = rng_for(21, 0);
    let u = random_feasible(&spec, &mut rng);
    let v = smooth_control_direction(spec.grid, &mut rng);
    let p = gradient_field(&spec, &u, &eta).unwrap();
    let pairing = l2_inner_control(&p, &v).unwrap();

    // forward differences: first-order error, ratio ~ 10 per decade
    let mut fwd_errs = Vec::new();
    for eps in [1e-3, 1e-4, 1e-5] {
        let jp = objective(&spec, &u.axpy(eps, &v).unwrap(), &eta).unwrap();
        let j0 = objective(&spec, &u, &eta).unwrap();
        fwd_errs.push(((jp - j0) / eps - pairing).abs());
    }
    assert!(
        fwd_errs[0] / fwd_errs[1] > 5.0 && fwd_errs[1] / fwd_errs[2] > 5.0,
        "forward errors {fwd_errs:?}"
    );

    // central difference at 1e-4 pins the pairing to 1e-6 relative
    let eps = 1e-4;
    let jp = objective(&spec, &u.axpy(eps, &v).unwrap(), &eta).unwrap();
    let jm = objective(&spec, &u.axpy(-eps, &v).unwrap(), &eta).unwrap();
    let central = (jp - jm) / (2.0 * eps);
    assert!(
        (central - pairing).abs() / pairing.abs() <= 1e-6,
        "central rel err {:e}",
        (central - pairing).abs() / pairing.abs()
    );
}

#[test]
fn gradient_vanishes_on_realized_target() {
    let mut spec = ProblemSpec::default_instance(15, 12).unwrap();
    let u = Field::constant(spec.grid, 0.3).unwrap();
    let y = solve_state(&spec, &u, &spec.y0.clone(), &SolveOptions::tight())
        .unwrap()
        .y;
    spec.yq = y;
    let p = gradient_field(&spec, &u, &spec.y0.clone()).unwrap();
    assert_eq!(p.max_abs(), 0.0);
}

#[test]
fn second_variation_edge_cases() {
    let spec = ProblemSpec::default_instance(15, 12).unwrap();
    let zero = Field::zeros(spec.grid);
    let sv = second_variation(&spec, &zero, &spec.y0.clone(), &zero).unwrap();
    assert_eq!(sv, 0.0);

    // affine f: the curvature term collapses and J'' = ||z||^2 exactly
    let lin = spec.with_nonlinearity(Nonlinearity::Zero);
    let mut rng = rng_for(22, 0);
    let v = smooth_control_direction(lin.grid, &mut rng);
    let ybar = solve_state(&lin, &zero, &lin.y0.clone(), &SolveOptions::tight())
        .unwrap()
        .y;
    let pbar = solve_adjoint(&lin, &ybar).unwrap();
    let sv = second_variation_at(&lin, &ybar, &pbar, &v).unwrap();
    let z =
        pvl_core::pde::solve_linearized(&lin, &ybar, &v, &SpatialField::zeros(lin.grid)).unwrap();
    let zn = l2_norm_q(&z);
    assert!((sv - zn * zn).abs() <= 1e-14 * sv.max(1e-30));
}

/// |J(u+sv) - J - s J'v - s^2/2 J''(v,v)| decays cubically: the discrete
/// second variation is the exact Hessian quadratic form.
#[test]
fn taylor_remainder_is_cubic() {
    let spec = ProblemSpec::default_instance(19, 24).unwrap();
    let eta = spec.y0.clone();
    let u = project_box(&Field::zeros(spec.grid), &spec.ua, &spec.ub).unwrap();
    let mut rng = rng_for(23, 2);
    let v = smooth_control_direction(spec.grid, &mut rng).scale(0.2);
    let j0 = objective(&spec, &u, &eta).unwrap();
    let p = gradient_field(&spec, &u, &eta).unwrap();
    let jv = l2_inner_control(&p, &v).unwrap();
    let jvv = second_variation(&spec, &u, &eta, &v).unwrap();

    let scales = [0.1, 0.05, 0.025];
    let rem: Vec<f64> = scales
        .iter()
        .map(|&s| {
            let js = objective(&spec, &u.axpy(s, &v).unwrap(), &eta).unwrap();
            (js - j0 - s * jv - 0.5 * s * s * jvv).abs()
        })
        .collect();
    let slope = (rem[0] / rem[2]).ln() / (scales[0] / scales[2]).ln();
    assert!(slope >= 2.7, "Taylor remainder slope {slope}, {rem:?}");
}

#[test]
fn coarse_instance_matches_exhaustive_enumeration() {
    let spec = ProblemSpec::default_instance(3, 4).unwrap();
    let eta = spec.y0.clone();
    let blocks = BlockPartition {
        time_blocks: 2,
        space_blocks: 2,
    };
    let (_, best) = oracle_enumerate(&spec, &eta, &blocks).unwrap();
    for method in [Method::ConditionalGradient, Method::ProjectedGradient] {
        let rep = minimize(
            &spec,
            &eta,
            &OptimizeOptions {
                method,
                multistart: 5,
                seed: 1,
                ..OptimizeOptions::default()
            },
        )
        .unwrap();
        assert!(
            rep.j <= best + 1e-9,
            "{method:?}: J {0:.12e} vs enumeration {best:.12e}",
            rep.j
        );
    }
}

#[test]
fn gap_bounds_suboptimality_on_convex_instance() {
    // f = 0 makes the reduced objective convex; the duality gap at any
    // feasible point dominates the distance to the enumeration optimum on
    // the bang-bang subset.
    let spec = ProblemSpec::default_instance(3, 4)
        .unwrap()
        .with_nonlinearity(Nonlinearity::Zero);
    let eta = spec.y0.clone();
    let blocks = BlockPartition {
        time_blocks: 2,
        space_blocks: 1,
    };
    let (_, best_bb) = oracle_enumerate(&spec, &eta, &blocks).unwrap();
    let u0 = project_box(&Field::zeros(spec.grid), &spec.ua, &spec.ub).unwrap();
    let j0 = objective(&spec, &u0, &eta).unwrap();
    let p0 = gradient_field(&spec, &u0, &eta).unwrap();
    let gap = primal_dual_gap(&p0, &u0, &spec.ua, &spec.ub).unwrap();
    assert!(gap >= 0.0);
    assert!(
        gap >= j0 - best_bb - 1e-12,
        "gap {gap} vs residual {}",
        j0 - best_bb
    );
}

#[test]
fn converged_control_is_bang_bang_where_adjoint_is_active() {
    let spec = ProblemSpec::default_instance(19, 24).unwrap();
    let rep = minimize(
        &spec,
        &spec.y0.clone(),
        &OptimizeOptions {
            multistart: 1,
            ..OptimizeOptions::default()
        },
    )
    .unwrap();
    assert!(rep.converged);
    let g = spec.grid;
    let cell = g.dt() * g.cell_volume();
    let threshold = 10.0 * rep.gap_tol / cell;
    for i in 1..=g.nt() {
        for j in 0..g.n_nodes() {
            let p = rep.pbar.row(i)[j];
            if p.abs() <= threshold {
                continue;
            }
            let u = rep.ubar.row(i)[j];
            let target = if p > 0.0 {
                spec.ua.row(i)[j]
            } else {
                spec.ub.row(i)[j]
            };
            assert!(
                (u - target).abs() <= 1e-6,
                "cell ({i},{j}): |p| = {:.2e} but u = {u} vs bound {target}",
                p.abs()
            );
        }
    }
}

#[test]
fn multistart_starts_agree_on_default_instance() {
    let spec = ProblemSpec::default_instance(19, 24).unwrap();
    let rep = minimize(
        &spec,
        &spec.y0.clone(),
        &OptimizeOptions {
            multistart: 4,
            seed: 9,
            ..OptimizeOptions::default()
        },
    )
    .unwrap();
    let hi = rep.starts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = rep.starts.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi - lo <= 1e-8, "start spread {:e}", hi - lo);
}

#[test]
fn bellman_identity_at_half_horizon() {
    let spec = ProblemSpec::default_instance(19, 24).unwrap();
    let opts = OptimizeOptions {
        multistart: 2,
        ..OptimizeOptions::default()
    };
    let base = minimize(&spec, &spec.y0.clone(), &opts).unwrap();
    assert!(base.converged);
    let m = spec.grid.nt() / 2;
    let run = running_cost(&spec, &base.ybar, m);
    let tail = value(
        &spec,
        m,
        &base.ybar.slice(m),
        &OptimizeOptions {
            gap_tol: Some(base.gap_tol),
            ..OptimizeOptions::warm(base.ubar.restrict(m).unwrap())
        },
    )
    .unwrap();
    let residual = (base.j - run - tail.v).abs();
    assert!(
        residual <= 10.0 * base.gap_tol,
        "Bellman residual {residual:e} vs tol {:e}",
        10.0 * base.gap_tol
    );
}

#[test]
fn running_and_tail_cost_split_exactly() {
    let spec = ProblemSpec::default_instance(15, 16).unwrap();
    let mut rng = rng_for(25, 1);
    let u = random_feasible(&spec, &mut rng);
    let y = solve_state(&spec, &u, &spec.y0.clone(), &SolveOptions::tight())
        .unwrap()
        .y;
    let total = tracking_cost(&spec, &y);
    for m in [4, 8, 11] {
        let run = running_cost(&spec, &y, m);
        let sub = spec.restrict(m, &y.slice(m)).unwrap();
        let tail = tracking_cost(&sub, &y.restrict(m).unwrap());
        assert!(
            (total - run - tail).abs() <= 1e-14 * total.max(1e-30),
            "split defect at m = {m}"
        );
    }
}

#[test]
fn report_objective_is_reevaluated_consistently() {
    let spec = ProblemSpec::default_instance(15, 12).unwrap();
    let rep = minimize(
        &spec,
        &spec.y0.clone(),
        &OptimizeOptions {
            multistart: 2,
            ..OptimizeOptions::default()
        },
    )
    .unwrap();
    let j = objective(&spec, &rep.ubar, &spec.y0.clone()).unwrap();
    assert_eq!(j, rep.j, "report objective drifted from re-evaluation");
    // feasibility of the reported control
    let clamped = project_box(&rep.ubar, &spec.ua, &spec.ub).unwrap();
    assert_eq!(clamped.values(), rep.ubar.values());
}

#[test]
fn iteration_cap_is_flagged_not_silent() {
    let spec = ProblemSpec::default_instance(15, 24).unwrap();
    let rep = minimize(
        &spec,
        &spec.y0.clone(),
        &OptimizeOptions {
            multistart: 1,
            max_iter: 1,
            gap_tol: Some(1e-13),
            ..OptimizeOptions::default()
        },
    )
    .unwrap();
    assert!(!rep.converged);
    assert!(rep.gap > rep.gap_tol);
    assert_eq!(rep.iterations, 1);
}
