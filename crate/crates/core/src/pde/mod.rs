//! Time-stepping solvers: the semilinear state equation, its linearization,
//! the backward adjoint, and the generic linear equation with potential.
//!
//! The linearized forward step is z^{n} = M_n^{-1}(z^{n-1} + k v^n) with
//! M_n = I + k L + k diag(f'(ybar^n)); the adjoint runs the exact transpose
//! of that recursion against the trapezoid-weighted tracking residual, so the
//! duality identity
//!     <ybar - yQ, z_{v,zeta}>_Q = <p, v>_ctrl + <p(t0), zeta>_Omega
//! holds to rounding, not merely to discretization order.

mod banded;
mod operator;

pub use operator::DiffusionOperator;

use crate::error::{Error, Result};
use crate::field::{same_grid, Field, SpatialField};
use crate::grid::Grid;
use crate::problem::ProblemSpec;
use crate::quad::{l2_norm_q, l2_norm_space, time_weight};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Max-norm residual tolerance for the per-step Newton solve.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Time scheme: 1.0 = implicit Euler, 0.5 = Crank-Nicolson. Only the
    /// state solver honours theta; the linearized/adjoint pair is implicit
    /// Euler by construction.
    pub theta: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            newton_tol: 1e-10,
            newton_max_iter: 25,
            theta: 1.0,
        }
    }
}

impl SolveOptions {
    /// Near-machine-precision solves. The optimizer and the verification
    /// experiments use this so that finite-difference probes of the objective
    /// are not polluted by Newton stopping noise.
    pub fn tight() -> Self {
        SolveOptions {
            newton_tol: 1e-12,
            newton_max_iter: 40,
            theta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::invalid("newton_tol must be positive"));
        }
        if self.newton_max_iter < 1 {
            return Err(Error::invalid("newton_max_iter must be >= 1"));
        }
        if self.theta != 1.0 && self.theta != 0.5 {
            return Err(Error::invalid(
                "theta must be 1 (implicit Euler) or 1/2 (Crank-Nicolson)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StateSolution {
    pub y: Field,
    /// Newton iterations spent in each time step.
    pub newton_iters: Vec<usize>,
    /// Final residual max-norm of each time step.
    pub residuals: Vec<f64>,
}

impl StateSolution {
    /// Trace as CSV (step, iterations, residual).
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("step,iterations,residual\n");
        for (i, (it, r)) in self.newton_iters.iter().zip(&self.residuals).enumerate() {
            s.push_str(&format!("{},{},{:.17e}\n", i + 1, it, r));
        }
        s
    }
}

/// Ratio ||y||_Q / (||u - f(0)||_Q + ||eta||_Omega) behind the discrete
/// a-priori bound; 0 when the data term vanishes.
pub fn apriori_ratio(spec: &ProblemSpec, u: &Field, eta: &SpatialField, y: &Field) -> f64 {
    let f0 = spec.nonlinearity.f(0.0);
    let mut shifted = u.clone();
    shifted.values_mut().iter_mut().for_each(|v| *v -= f0);
    let denom = l2_norm_q(&shifted) + l2_norm_space(eta);
    if denom == 0.0 {
        0.0
    } else {
        l2_norm_q(y) / denom
    }
}

/// Semilinear state solve: y(t0) = eta, then per step Newton on
/// (I + k L + k f)(y^{n}) = y^{n-1} + k u^{n}.
pub fn solve_state(
    spec: &ProblemSpec,
    u: &Field,
    eta: &SpatialField,
    opts: &SolveOptions,
) -> Result<StateSolution> {
    opts.validate()?;
    same_grid(u.grid(), &spec.grid, "control not on problem grid")?;
    same_grid(eta.grid(), &spec.grid, "initial datum not on problem grid")?;
    let grid = spec.grid;
    let op = DiffusionOperator::assemble(&grid, &spec.diffusion)?;
    let n = grid.n_nodes();
    let k = grid.dt();
    let f = &spec.nonlinearity;

    let mut y = Field::zeros(grid);
    y.row_mut(0).copy_from_slice(eta.values());
    let mut newton_iters = Vec::with_capacity(grid.nt());
    let mut residuals = Vec::with_capacity(grid.nt());

    let implicit = opts.theta == 1.0;
    let mut ly = vec![0.0; n];
    for step in 1..=grid.nt() {
        // rhs of the step equation
        let mut rhs = y.row(step - 1).to_vec();
        if implicit {
            for (r, us) in rhs.iter_mut().zip(u.row(step)) {
                *r += k * us;
            }
        } else {
            // Crank-Nicolson: explicit half of the operator plus averaged forcing
            op.apply(y.row(step - 1), &mut ly);
            for j in 0..n {
                let yp = y.row(step - 1)[j];
                rhs[j] +=
                    -0.5 * k * (ly[j] + f.f(yp)) + 0.5 * k * (u.row(step)[j] + u.row(step - 1)[j]);
            }
        }
        let kk = if implicit { k } else { 0.5 * k };

        // Newton on G(w) = w + kk (L w + f(w)) - rhs
        let mut w = y.row(step - 1).to_vec();
        let mut iters = 0usize;
        let mut res;
        loop {
            op.apply(&w, &mut ly);
            let mut gmax = 0.0f64;
            let mut g = vec![0.0; n];
            for j in 0..n {
                g[j] = w[j] + kk * (ly[j] + f.f(w[j])) - rhs[j];
                gmax = gmax.max(g[j].abs());
            }
            res = gmax;
            if res <= opts.newton_tol {
                break;
            }
            if iters >= opts.newton_max_iter {
                return Err(Error::SolverFailure {
                    step,
                    residual: res,
                    context: format!("Newton did not reach {:.1e}", opts.newton_tol),
                });
            }
            let mut fp = vec![0.0; n];
            for j in 0..n {
                let d = f.df(w[j]);
                if d < 0.0 {
                    return Err(Error::ModelViolation(format!(
                        "f'(y) = {d:.3e} < 0 at step {step}, node {j} (y = {:.3e})",
                        w[j]
                    )));
                }
                fp[j] = d;
            }
            let m = op
                .step_matrix(1.0, kk, &fp)
                .cholesky()
                .map_err(|e| match e {
                    Error::SolverFailure {
                        residual, context, ..
                    } => Error::SolverFailure {
                        step,
                        residual,
                        context,
                    },
                    other => other,
                })?;
            let mut delta: Vec<f64> = g.iter().map(|v| -v).collect();
            m.solve(&mut delta);
            for j in 0..n {
                w[j] += delta[j];
            }
            iters += 1;
        }
        y.row_mut(step).copy_from_slice(&w);
        newton_iters.push(iters);
        residuals.push(res);
    }
    // The Field constructor enforces finiteness; rebuild to run the check.
    let y = Field::new(grid, y.values().to_vec())?;
    Ok(StateSolution {
        y,
        newton_iters,
        residuals,
    })
}

/// Shared forward recursion z^n = M_n^{-1}(z^{n-1} + k g^n) with
/// M_n = I + k L + k diag(c^n); c rows indexed 1..=nt.
fn forward_linear(
    grid: &Grid,
    op: &DiffusionOperator,
    coeff_at: impl Fn(usize, usize) -> f64,
    source: &Field,
    zeta: &SpatialField,
) -> Result<Field> {
    let n = grid.n_nodes();
    let k = grid.dt();
    let mut z = Field::zeros(*grid);
    z.row_mut(0).copy_from_slice(zeta.values());
    let mut c = vec![0.0; n];
    for step in 1..=grid.nt() {
        for j in 0..n {
            c[j] = coeff_at(step, j);
        }
        let m = op.step_matrix(1.0, k, &c).cholesky()?;
        let mut rhs: Vec<f64> = z
            .row(step - 1)
            .iter()
            .zip(source.row(step))
            .map(|(zp, g)| zp + k * g)
            .collect();
        m.solve(&mut rhs);
        z.row_mut(step).copy_from_slice(&rhs);
    }
    Ok(z)
}

/// Linearized state equation at a frozen trajectory `ybar`:
/// dz/dt + L z + f'(ybar) z = v, z(t0) = zeta.
pub fn solve_linearized(
    spec: &ProblemSpec,
    ybar: &Field,
    v: &Field,
    zeta: &SpatialField,
) -> Result<Field> {
    same_grid(ybar.grid(), &spec.grid, "ybar not on problem grid")?;
    same_grid(v.grid(), &spec.grid, "source not on problem grid")?;
    same_grid(zeta.grid(), &spec.grid, "zeta not on problem grid")?;
    let op = DiffusionOperator::assemble(&spec.grid, &spec.diffusion)?;
    let f = spec.nonlinearity.clone();
    let n = spec.grid.n_nodes();
    forward_linear(
        &spec.grid,
        &op,
        |step, j| f.df(ybar.values()[step * n + j]),
        v,
        zeta,
    )
}

/// Discrete adjoint of the linearized stepping against the trapezoid-weighted
/// tracking cost. Backward from an implicit zero terminal condition:
///   M_n p^n = p^{n+1} + k w_n (ybar^n - yQ^n),  n = nt .. 1,  p^{nt+1} = 0,
///   p^0 = p^1 + (k/2)(ybar^0 - yQ^0).
pub fn solve_adjoint(spec: &ProblemSpec, ybar: &Field) -> Result<Field> {
    same_grid(ybar.grid(), &spec.grid, "ybar not on problem grid")?;
    let grid = spec.grid;
    let nt = grid.nt();
    let n = grid.n_nodes();
    let mut source = Field::zeros(grid);
    for i in 0..=nt {
        let w = time_weight(i, nt);
        let row = source.row_mut(i);
        for j in 0..n {
            row[j] = w * (ybar.row(i)[j] - spec.yq.row(i)[j]);
        }
    }
    transpose_weighted(spec, ybar, &source)
}

/// Transpose of the linearized forward map against an arbitrary per-row
/// source s (already carrying any time weights):
///   M_n q^n = q^{n+1} + k s^n for n = nt..1, q^{nt+1} = 0, q^0 = q^1 + k s^0.
/// For any (v, zeta): sum_n k h^d s^n . z_{v,zeta}^n = <q, v>_ctrl
/// + h^d q^0 . zeta, exactly.
pub fn transpose_weighted(spec: &ProblemSpec, ybar: &Field, s: &Field) -> Result<Field> {
    same_grid(ybar.grid(), &spec.grid, "ybar not on problem grid")?;
    same_grid(s.grid(), &spec.grid, "source not on problem grid")?;
    let grid = spec.grid;
    let op = DiffusionOperator::assemble(&grid, &spec.diffusion)?;
    let f = &spec.nonlinearity;
    let n = grid.n_nodes();
    let k = grid.dt();
    let nt = grid.nt();

    let mut q = Field::zeros(grid);
    let mut carry = vec![0.0; n];
    let mut c = vec![0.0; n];
    for step in (1..=nt).rev() {
        for j in 0..n {
            c[j] = f.df(ybar.row(step)[j]);
        }
        let m = op.step_matrix(1.0, k, &c).cholesky()?;
        let mut rhs: Vec<f64> = carry
            .iter()
            .zip(s.row(step))
            .map(|(cv, sv)| cv + k * sv)
            .collect();
        m.solve(&mut rhs);
        q.row_mut(step).copy_from_slice(&rhs);
        carry.copy_from_slice(q.row(step));
    }
    let row0: Vec<f64> = q
        .row(1)
        .iter()
        .zip(s.row(0))
        .map(|(q1, sv)| q1 + k * sv)
        .collect();
    q.row_mut(0).copy_from_slice(&row0);
    Ok(q)
}

/// Generic linear parabolic solve dz/dt + L z + alpha z = rho with zero
/// initial and boundary data; alpha must be pointwise nonnegative.
pub fn solve_linear_parabolic(
    grid: &Grid,
    diffusion: &SpatialField,
    alpha: &Field,
    rho: &Field,
) -> Result<Field> {
    same_grid(alpha.grid(), grid, "alpha not on solver grid")?;
    same_grid(rho.grid(), grid, "rho not on solver grid")?;
    if let Some(bad) = alpha.values().iter().find(|v| **v < 0.0) {
        return Err(Error::invalid(format!(
            "potential alpha must be nonnegative, found {bad}"
        )));
    }
    let op = DiffusionOperator::assemble(grid, diffusion)?;
    let n = grid.n_nodes();
    let zero = SpatialField::zeros(*grid);
    forward_linear(
        grid,
        &op,
        |step, j| alpha.values()[step * n + j],
        rho,
        &zero,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlin::Nonlinearity;

    fn heat_spec(nx: usize, nt: usize, nu: f64) -> ProblemSpec {
        let grid = Grid::unit(1, nx, nt, 1.0).unwrap();
        ProblemSpec::new(
            grid,
            SpatialField::constant(grid, nu).unwrap(),
            Nonlinearity::Zero,
            SpatialField::zeros(grid),
            Field::zeros(grid),
            Field::constant(grid, -1.0).unwrap(),
            Field::constant(grid, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_data_zero_solution() {
        let spec = heat_spec(9, 6, 0.1);
        let sol = solve_state(
            &spec,
            &Field::zeros(spec.grid),
            &SpatialField::zeros(spec.grid),
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.y.max_abs(), 0.0);
        assert!(sol.residuals.iter().all(|r| *r <= 1e-10));
    }

    #[test]
    fn linear_parabolic_zero_source() {
        let grid = Grid::unit(1, 9, 6, 1.0).unwrap();
        let a = SpatialField::constant(grid, 0.2).unwrap();
        let z =
            solve_linear_parabolic(&grid, &a, &Field::zeros(grid), &Field::zeros(grid)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn linear_parabolic_rejects_negative_alpha() {
        let grid = Grid::unit(1, 9, 6, 1.0).unwrap();
        let a = SpatialField::constant(grid, 0.2).unwrap();
        let alpha = Field::constant(grid, -0.1).unwrap();
        assert!(solve_linear_parabolic(&grid, &a, &alpha, &Field::zeros(grid)).is_err());
    }

    #[test]
    fn adjoint_zero_when_on_target() {
        let spec = heat_spec(9, 6, 0.1);
        // yq = 0 and ybar = 0: residual vanishes
        let p = solve_adjoint(&spec, &Field::zeros(spec.grid)).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn model_violation_detected() {
        let grid = Grid::unit(1, 5, 4, 1.0).unwrap();
        let f = Nonlinearity::custom(
            std::sync::Arc::new(|y: f64| -y),
            std::sync::Arc::new(|_| -1.0),
            std::sync::Arc::new(|_| 0.0),
            1.0,
            0.0,
        )
        .unwrap();
        let spec = ProblemSpec::new(
            grid,
            SpatialField::constant(grid, 0.1).unwrap(),
            f,
            SpatialField::constant(grid, 0.5).unwrap(),
            Field::zeros(grid),
            Field::constant(grid, -1.0).unwrap(),
            Field::constant(grid, 1.0).unwrap(),
        )
        .unwrap();
        let got = solve_state(
            &spec,
            &Field::zeros(grid),
            &spec.y0.clone(),
            &SolveOptions::default(),
        );
        assert!(matches!(got, Err(Error::ModelViolation(_))));
    }
}
