//! Tracking objective and its first and second variations.

use crate::error::Result;
use crate::field::{Field, SpatialField};
use crate::pde::{solve_adjoint, solve_linearized, solve_state, SolveOptions};
use crate::problem::ProblemSpec;
use crate::quad::time_weight;

/// 0.5 || y - yQ ||^2 over the cylinder, trapezoid in time.
pub fn tracking_cost(spec: &ProblemSpec, y: &Field) -> f64 {
    let g = &spec.grid;
    let k = g.dt();
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for i in 0..=g.nt() {
        let w = time_weight(i, g.nt());
        let s: f64 = y
            .row(i)
            .iter()
            .zip(spec.yq.row(i))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        acc += w * k * vol * s;
    }
    0.5 * acc
}

/// Trapezoid quadrature of the running cost 0.5 |y - yQ|^2 over [t0, time(m)].
pub fn running_cost(spec: &ProblemSpec, y: &Field, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let g = &spec.grid;
    let k = g.dt();
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for i in 0..=m {
        let w = time_weight(i, m);
        let s: f64 = y
            .row(i)
            .iter()
            .zip(spec.yq.row(i))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        acc += w * k * vol * s;
    }
    0.5 * acc
}

/// Scale used to resolve relative optimizer tolerances: the cost of the zero
/// state, floored at one.
pub fn problem_scale(spec: &ProblemSpec) -> f64 {
    tracking_cost(spec, &Field::zeros(spec.grid)).max(1.0)
}

/// J(u) for initial datum eta; feasibility of u is not required.
pub fn objective(spec: &ProblemSpec, u: &Field, eta: &SpatialField) -> Result<f64> {
    Ok(objective_with_state(spec, u, eta)?.0)
}

/// J(u) together with the realized state (avoids re-solving).
pub fn objective_with_state(
    spec: &ProblemSpec,
    u: &Field,
    eta: &SpatialField,
) -> Result<(f64, Field)> {
    let sol = solve_state(spec, u, eta, &SolveOptions::tight())?;
    Ok((tracking_cost(spec, &sol.y), sol.y))
}

/// Riesz representative of the first variation: the adjoint state of u.
pub fn gradient_field(spec: &ProblemSpec, u: &Field, eta: &SpatialField) -> Result<Field> {
    let sol = solve_state(spec, u, eta, &SolveOptions::tight())?;
    solve_adjoint(spec, &sol.y)
}

/// Exact discrete second variation at (ubar, eta) in direction v:
/// ||z_v||^2 under trapezoid weights minus the curvature correction
/// sum_{n>=1} k h^d pbar^n f''(ybar^n) (z^n)^2, which is the transpose-exact
/// discretization of the (1 - pbar f''(ybar)) z^2 integrand.
pub fn second_variation(
    spec: &ProblemSpec,
    ubar: &Field,
    eta: &SpatialField,
    v: &Field,
) -> Result<f64> {
    let sol = solve_state(spec, ubar, eta, &SolveOptions::tight())?;
    let pbar = solve_adjoint(spec, &sol.y)?;
    second_variation_at(spec, &sol.y, &pbar, v)
}

/// Exact discrete Hessian-vector product: the control-space Riesz
/// representative of J''(u)(q, .) at the trajectory (ybar, pbar). Matrix-free:
/// one linearized solve plus one transpose solve.
pub fn hessian_apply(spec: &ProblemSpec, ybar: &Field, pbar: &Field, q: &Field) -> Result<Field> {
    let z = crate::pde::solve_linearized(spec, ybar, q, &SpatialField::zeros(spec.grid))?;
    let g = &spec.grid;
    let n = g.n_nodes();
    let affine = spec.nonlinearity.is_affine();
    let f = &spec.nonlinearity;
    let mut s = Field::zeros(*g);
    for i in 0..=g.nt() {
        let w = time_weight(i, g.nt());
        let zr = z.row(i);
        let row = s.row_mut(i);
        for j in 0..n {
            row[j] = w * zr[j];
        }
        if i >= 1 && !affine {
            let (pr, yr) = (pbar.row(i), ybar.row(i));
            let row = s.row_mut(i);
            for j in 0..n {
                row[j] -= pr[j] * f.ddf(yr[j]) * zr[j];
            }
        }
    }
    crate::pde::transpose_weighted(spec, ybar, &s)
}

/// Second variation with the trajectory and adjoint already available.
pub fn second_variation_at(
    spec: &ProblemSpec,
    ybar: &Field,
    pbar: &Field,
    v: &Field,
) -> Result<f64> {
    let z = solve_linearized(spec, ybar, v, &SpatialField::zeros(spec.grid))?;
    Ok(second_variation_from_z(spec, ybar, pbar, &z))
}

/// Quadrature of the second variation given the linearized state: no solves.
pub fn second_variation_from_z(spec: &ProblemSpec, ybar: &Field, pbar: &Field, z: &Field) -> f64 {
    let g = &spec.grid;
    let k = g.dt();
    let vol = g.cell_volume();
    let mut quad = 0.0;
    for i in 0..=g.nt() {
        let w = time_weight(i, g.nt());
        let s: f64 = z.row(i).iter().map(|a| a * a).sum();
        quad += w * k * vol * s;
    }
    if spec.nonlinearity.is_affine() {
        return quad;
    }
    let f = &spec.nonlinearity;
    let mut curv = 0.0;
    for i in 1..=g.nt() {
        let s: f64 = z
            .row(i)
            .iter()
            .zip(pbar.row(i))
            .zip(ybar.row(i))
            .map(|((zi, pi), yi)| pi * f.ddf(*yi) * zi * zi)
            .sum();
        curv += k * vol * s;
    }
    quad - curv
}
