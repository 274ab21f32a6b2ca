//! Constrained minimization over the box U_ad.
//!
//! Conditional gradient is the primary method: the linearized subproblem over
//! the box is solved exactly by the bang-bang vertex induced by the adjoint
//! sign, and the primal-dual gap <p_k, u_k - w_k> certifies first-order
//! stationarity. Projected gradient with Armijo backtracking serves as an
//! independent cross-check.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Field, SpatialField};
use crate::optim::brent::brent_min;
use crate::optim::functional::hessian_apply;
use crate::optim::functional::{problem_scale, tracking_cost};
use crate::pde::{solve_adjoint, solve_state, SolveOptions};
use crate::problem::ProblemSpec;
use crate::quad::{l2_inner_control, project_box};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact line search on the segment toward the bang-bang vertex.
    ConditionalGradient,
    /// Armijo-backtracked projected gradient.
    ProjectedGradient,
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub method: Method,
    pub max_iter: usize,
    /// Absolute primal-dual gap tolerance; `None` resolves to
    /// 1e-8 * problem scale.
    pub gap_tol: Option<f64>,
    /// Number of starts. Start 0 is the warm start when given (the clamped
    /// zero control otherwise); the remaining starts are uniform random
    /// feasible controls.
    pub multistart: usize,
    pub seed: u64,
    pub warm_start: Option<Field>,
    pub solve: SolveOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            method: Method::ConditionalGradient,
            max_iter: 400,
            gap_tol: None,
            multistart: 5,
            seed: 0,
            warm_start: None,
            solve: SolveOptions::tight(),
        }
    }
}

impl OptimizeOptions {
    pub fn warm(start: Field) -> Self {
        OptimizeOptions {
            multistart: 1,
            warm_start: Some(start),
            ..OptimizeOptions::default()
        }
    }

    pub fn resolved_gap_tol(&self, spec: &ProblemSpec) -> f64 {
        self.gap_tol.unwrap_or(1e-8 * problem_scale(spec))
    }

    fn validate(&self) -> Result<()> {
        if let Some(g) = self.gap_tol {
            if !(g > 0.0) {
                return Err(Error::invalid("gap_tol must be positive"));
            }
        }
        if self.multistart < 1 {
            return Err(Error::invalid("multistart must be >= 1"));
        }
        if self.max_iter < 1 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        self.solve.validate()
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub ubar: Field,
    pub ybar: Field,
    pub pbar: Field,
    pub j: f64,
    /// Final primal-dual gap of the winning start.
    pub gap: f64,
    pub gap_history: Vec<f64>,
    /// Final objective of every start, in start order.
    pub starts: Vec<f64>,
    /// Fraction of dynamic control cells sitting at a bound.
    pub active_fraction: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gap_tol: f64,
    pub seed: u64,
    pub method: Method,
}

/// Bang-bang vertex of the linearized subproblem: u_a where p > 0, u_b where
/// p < 0, u_a on ties. Row 0 (never read by the dynamics) is pinned at u_a.
pub fn bang_bang_vertex(p: &Field, ua: &Field, ub: &Field) -> Field {
    let g = *p.grid();
    let n = g.n_nodes();
    let mut w = Field::zeros(g);
    w.row_mut(0).copy_from_slice(&ua.values()[..n]);
    for i in 1..=g.nt() {
        let (pr, ar, br) = (p.row(i), ua.row(i), ub.row(i));
        let out = w.row_mut(i);
        for j in 0..n {
            out[j] = if pr[j] > 0.0 {
                ar[j]
            } else if pr[j] < 0.0 {
                br[j]
            } else {
                ar[j]
            };
        }
    }
    w
}

/// Primal-dual gap <p, u - w> with w the bang-bang vertex; nonnegative by
/// construction.
pub fn primal_dual_gap(p: &Field, u: &Field, ua: &Field, ub: &Field) -> Result<f64> {
    let w = bang_bang_vertex(p, ua, ub);
    l2_inner_control(p, &u.axpy(-1.0, &w)?)
}

struct RunOutcome {
    u: Field,
    y: Field,
    p: Field,
    j: f64,
    gap: f64,
    gap_history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

pub fn minimize(
    spec: &ProblemSpec,
    eta: &SpatialField,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    opts.validate()?;
    let eta = eta.with_grid(spec.grid)?;
    let gap_tol = opts.resolved_gap_tol(spec);

    let outcomes: Vec<Result<RunOutcome>> = (0..opts.multistart)
        .into_par_iter()
        .map(|start| {
            let u0 = start_control(spec, opts, start)?;
            match opts.method {
                Method::ConditionalGradient => {
                    run_conditional_gradient(spec, &eta, u0, gap_tol, opts)
                }
                Method::ProjectedGradient => run_projected_gradient(spec, &eta, u0, gap_tol, opts),
            }
        })
        .collect();
    let outcomes: Vec<RunOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let starts: Vec<f64> = outcomes.iter().map(|o| o.j).collect();
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            (a.j, ia)
                .partial_cmp(&(b.j, ib))
                .expect("finite objectives")
        })
        .map(|(i, _)| i)
        .expect("multistart >= 1");
    let win = &outcomes[best];

    Ok(OptimizeReport {
        active_fraction: active_fraction(&win.u, &spec.ua, &spec.ub),
        ubar: win.u.clone(),
        ybar: win.y.clone(),
        pbar: win.p.clone(),
        j: win.j,
        gap: win.gap,
        gap_history: win.gap_history.clone(),
        starts,
        iterations: win.iterations,
        converged: win.converged,
        gap_tol,
        seed: opts.seed,
        method: opts.method,
    })
}

fn start_control(spec: &ProblemSpec, opts: &OptimizeOptions, start: usize) -> Result<Field> {
    let mut u = if start == 0 {
        match &opts.warm_start {
            Some(w) => project_box(w, &spec.ua, &spec.ub)?,
            None => project_box(&Field::zeros(spec.grid), &spec.ua, &spec.ub)?,
        }
    } else {
        let mut rng = rng_for(opts.seed, 1000 + start as u64);
        let mut f = Field::zeros(spec.grid);
        for ((v, a), b) in f
            .values_mut()
            .iter_mut()
            .zip(spec.ua.values())
            .zip(spec.ub.values())
        {
            let r: f64 = rng.random();
            *v = a + r * (b - a);
        }
        f
    };
    let n = spec.grid.n_nodes();
    u.row_mut(0).copy_from_slice(&spec.ua.values()[..n]);
    Ok(u)
}

/// State of one descent run; bundles the repeatedly-updated quantities.
struct Iterate {
    u: Field,
    y: Field,
    p: Field,
    j: f64,
}

impl Iterate {
    fn at(spec: &ProblemSpec, eta: &SpatialField, u: Field, solve: &SolveOptions) -> Result<Self> {
        let y = solve_state(spec, &u, eta, solve)?.y;
        let j = tracking_cost(spec, &y);
        let p = solve_adjoint(spec, &y)?;
        Ok(Iterate { u, y, p, j })
    }
}

/// Exact line search for J(clamp(u + gamma dir)) over gamma in [0, hi] with
/// `hi` as an explicit candidate; returns the improved iterate or None.
fn exact_search(
    spec: &ProblemSpec,
    eta: &SpatialField,
    cur: &Iterate,
    dir: &Field,
    hi: f64,
    opts: &OptimizeOptions,
) -> Result<Option<Iterate>> {
    if !(hi > 0.0) {
        return Ok(None);
    }
    let mut line_err: Option<Error> = None;
    let mut phi = |gamma: f64| -> f64 {
        let trial = cur.u.axpy(gamma, dir).expect("same grid");
        let trial = project_box(&trial, &spec.ua, &spec.ub).expect("bounds pre-validated");
        match solve_state(spec, &trial, eta, &opts.solve) {
            Ok(sol) => tracking_cost(spec, &sol.y),
            Err(e) => {
                line_err.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let (mut gamma, mut fgam) = brent_min(&mut phi, 0.0, hi, 1e-12, 80);
    let f_hi = phi(hi);
    if let Some(e) = line_err {
        return Err(e);
    }
    if f_hi <= fgam {
        (gamma, fgam) = (hi, f_hi);
    }
    if fgam >= cur.j {
        return Ok(None);
    }
    let u = project_box(&cur.u.axpy(gamma, dir)?, &spec.ua, &spec.ub)?;
    Ok(Some(Iterate::at(spec, eta, u, &opts.solve)?))
}

fn run_conditional_gradient(
    spec: &ProblemSpec,
    eta: &SpatialField,
    u0: Field,
    gap_tol: f64,
    opts: &OptimizeOptions,
) -> Result<RunOutcome> {
    let mut cur = Iterate::at(spec, eta, u0, &opts.solve)?;
    let mut gap_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut lambda_rel = 1e-2;
    let mut gap;

    loop {
        let w = bang_bang_vertex(&cur.p, &spec.ua, &spec.ub);
        let d = w.axpy(-1.0, &cur.u)?;
        gap = l2_inner_control(&cur.p, &cur.u.axpy(-1.0, &w)?)?.max(0.0);
        gap_history.push(gap);
        if gap <= gap_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        let j_before = cur.j;

        // vertex step: exact line search on the slice toward the bang-bang
        // vertex, the vertex itself as an explicit candidate
        if let Some(next) = exact_search(spec, eta, &cur, &d, 1.0, opts)? {
            cur = next;
        }

        // damped Newton correction on the free cells. Pure vertex steps
        // zig-zag sublinearly once the minimizer has a singular arc; the
        // matrix-free Levenberg step restores fast convergence there. The
        // vertex gap above remains the stopping certificate.
        if let Some(q) = levenberg_direction(spec, &cur, lambda_rel)? {
            if let Some(next) = exact_search_with_gamma(spec, eta, &cur, &q, 1.5, opts)? {
                let (next, gamma) = next;
                cur = next;
                lambda_rel = if gamma >= 0.5 {
                    (lambda_rel / 3.0).max(1e-8)
                } else {
                    (lambda_rel * 10.0).min(1e3)
                };
            } else {
                lambda_rel = (lambda_rel * 10.0).min(1e3);
            }
        }

        iterations += 1;
        if cur.j >= j_before {
            // no step made progress: numerical floor reached
            break;
        }
    }

    Ok(RunOutcome {
        u: cur.u,
        y: cur.y,
        p: cur.p,
        j: cur.j,
        gap,
        gap_history,
        iterations,
        converged,
    })
}

/// Like `exact_search` but also reports the accepted step length.
fn exact_search_with_gamma(
    spec: &ProblemSpec,
    eta: &SpatialField,
    cur: &Iterate,
    dir: &Field,
    hi: f64,
    opts: &OptimizeOptions,
) -> Result<Option<(Iterate, f64)>> {
    if !(hi > 0.0) {
        return Ok(None);
    }
    let mut line_err: Option<Error> = None;
    let mut phi = |gamma: f64| -> f64 {
        let trial = cur.u.axpy(gamma, dir).expect("same grid");
        let trial = project_box(&trial, &spec.ua, &spec.ub).expect("bounds pre-validated");
        match solve_state(spec, &trial, eta, &opts.solve) {
            Ok(sol) => tracking_cost(spec, &sol.y),
            Err(e) => {
                line_err.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let (mut gamma, mut fgam) = brent_min(&mut phi, 0.0, hi, 1e-12, 80);
    let f_one = phi(1.0_f64.min(hi));
    if let Some(e) = line_err {
        return Err(e);
    }
    if f_one <= fgam {
        (gamma, fgam) = (1.0_f64.min(hi), f_one);
    }
    if fgam >= cur.j {
        return Ok(None);
    }
    let u = project_box(&cur.u.axpy(gamma, dir)?, &spec.ua, &spec.ub)?;
    Ok(Some((Iterate::at(spec, eta, u, &opts.solve)?, gamma)))
}

/// Damped Newton direction: conjugate-gradient solve of
/// (H + lambda I) q = -p restricted to the cells the box leaves free
/// (strictly inside, or at a bound with an inward gradient). The shift is
/// `lambda_rel` times the Rayleigh quotient of H along the gradient, which
/// keeps the step inside the well-conditioned subspace. Returns None when
/// every cell is frozen or the free gradient vanishes.
fn levenberg_direction(
    spec: &ProblemSpec,
    cur: &Iterate,
    lambda_rel: f64,
) -> Result<Option<Field>> {
    let g = spec.grid;
    let n = g.n_nodes();
    let mut mask = vec![false; (g.nt() + 1) * n];
    let mut any = false;
    for i in 1..=g.nt() {
        for jn in 0..n {
            let (uv, a, b, pv) = (
                cur.u.row(i)[jn],
                spec.ua.row(i)[jn],
                spec.ub.row(i)[jn],
                cur.p.row(i)[jn],
            );
            let tol = 1e-12 * (1.0 + a.abs().max(b.abs()));
            let frozen = (uv - a <= tol && pv >= 0.0) || (b - uv <= tol && pv <= 0.0);
            if !frozen {
                mask[i * n + jn] = true;
                any = true;
            }
        }
    }
    if !any {
        return Ok(None);
    }
    let apply_mask = |f: &mut Field| {
        for (v, m) in f.values_mut().iter_mut().zip(&mask) {
            if !m {
                *v = 0.0;
            }
        }
    };

    let mut rhs = cur.p.scale(-1.0);
    apply_mask(&mut rhs);
    let rr0 = l2_inner_control(&rhs, &rhs)?;
    if rr0 == 0.0 {
        return Ok(None);
    }

    // Rayleigh quotient along the gradient sets the damping scale.
    let mut hg = hessian_apply(spec, &cur.y, &cur.p, &rhs)?;
    apply_mask(&mut hg);
    let rayleigh = (l2_inner_control(&rhs, &hg)? / rr0).max(0.0);
    let lambda = (lambda_rel * rayleigh).max(1e-30);

    let mut x = Field::zeros(g);
    let mut r = rhs.clone();
    let mut d = r.clone();
    let mut rr = rr0;
    for it in 0..150 {
        let mut hd = hessian_apply(spec, &cur.y, &cur.p, &d)?;
        apply_mask(&mut hd);
        let hd = hd.axpy(lambda, &d)?;
        let dhd = l2_inner_control(&d, &hd)?;
        if dhd <= 0.0 {
            if it == 0 {
                x = d.clone();
            }
            break;
        }
        let a = rr / dhd;
        x = x.axpy(a, &d)?;
        r = r.axpy(-a, &hd)?;
        let rr_new = l2_inner_control(&r, &r)?;
        if rr_new <= 2.5e-3 * rr0 {
            break;
        }
        d = r.axpy(rr_new / rr, &d)?;
        rr = rr_new;
    }
    Ok(Some(x))
}

fn run_projected_gradient(
    spec: &ProblemSpec,
    eta: &SpatialField,
    mut u: Field,
    gap_tol: f64,
    opts: &OptimizeOptions,
) -> Result<RunOutcome> {
    let n = spec.grid.n_nodes();
    let mut y = solve_state(spec, &u, eta, &opts.solve)?.y;
    let mut j = tracking_cost(spec, &y);
    let mut p = solve_adjoint(spec, &y)?;
    let mut gap_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut sigma = 1.0;
    let mut gap;

    loop {
        let w = bang_bang_vertex(&p, &spec.ua, &spec.ub);
        gap = l2_inner_control(&p, &u.axpy(-1.0, &w)?)?.max(0.0);
        gap_history.push(gap);
        if gap <= gap_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        // Armijo backtracking on the projected step
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = u.axpy(-sigma, &p)?;
            trial.row_mut(0).copy_from_slice(&spec.ua.values()[..n]);
            let trial = project_box(&trial, &spec.ua, &spec.ub)?;
            let step = trial.axpy(-1.0, &u)?;
            let step_sq = l2_inner_control(&step, &step)?;
            if step_sq == 0.0 {
                break;
            }
            let sol = solve_state(spec, &trial, eta, &opts.solve)?;
            let jt = tracking_cost(spec, &sol.y);
            if jt <= j - 1e-4 / sigma * step_sq {
                u = trial;
                y = sol.y;
                j = jt;
                accepted = true;
                break;
            }
            sigma *= 0.5;
        }
        if !accepted {
            break;
        }
        sigma *= 1.8;
        p = solve_adjoint(spec, &y)?;
        iterations += 1;
    }

    Ok(RunOutcome {
        u,
        y,
        p,
        j,
        gap,
        gap_history,
        iterations,
        converged,
    })
}

fn active_fraction(u: &Field, ua: &Field, ub: &Field) -> f64 {
    let g = u.grid();
    let n = g.n_nodes();
    let mut active = 0usize;
    let mut total = 0usize;
    for i in 1..=g.nt() {
        for j in 0..n {
            let (uv, a, b) = (u.row(i)[j], ua.row(i)[j], ub.row(i)[j]);
            let tol = 1e-9 * (1.0 + a.abs().max(b.abs()));
            if uv - a <= tol || b - uv <= tol {
                active += 1;
            }
            total += 1;
        }
    }
    active as f64 / total as f64
}
