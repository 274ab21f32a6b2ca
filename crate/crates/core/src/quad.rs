//! Discrete inner products, norms and the box projection.
//!
//! Space is integrated by the composite rectangle rule over interior nodes
//! (exact trapezoid for functions vanishing on the Dirichlet boundary); time
//! by the trapezoid rule with half-weights at both window ends. Controls are
//! piecewise constant on the time intervals ((n-1)k, nk], so their natural
//! pairing is the right-rectangle rule over rows 1..=nt; that pairing is what
//! makes the discrete adjoint identities exact.

use crate::error::{Error, Result};
use crate::field::{same_grid, Field, SpatialField};

/// Trapezoid weight of time row `i` on a window with `nt` steps.
pub fn time_weight(i: usize, nt: usize) -> f64 {
    if i == 0 || i == nt {
        0.5
    } else {
        1.0
    }
}

/// Spatial L2 inner product: h^dim * sum_j a_j b_j.
pub fn l2_inner_space(a: &SpatialField, b: &SpatialField) -> Result<f64> {
    same_grid(a.grid(), b.grid(), "l2_inner_space")?;
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok(a.grid().cell_volume() * dot)
}

pub fn l2_norm_space(a: &SpatialField) -> f64 {
    l2_inner_space(a, a).expect("same field").sqrt()
}

/// Space-time L2 inner product with trapezoid weighting in time.
pub fn l2_inner_spacetime(a: &Field, b: &Field) -> Result<f64> {
    same_grid(a.grid(), b.grid(), "l2_inner_spacetime")?;
    let g = a.grid();
    let k = g.dt();
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for i in 0..=g.nt() {
        let w = time_weight(i, g.nt());
        let dot: f64 = a.row(i).iter().zip(b.row(i)).map(|(x, y)| x * y).sum();
        acc += w * k * vol * dot;
    }
    Ok(acc)
}

/// Space-time L^p norm, trapezoid in time: (k h^dim sum w_i |a_ij|^p)^(1/p).
pub fn l2_norm_spacetime(a: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!(
            "L^p norm needs p in [1, inf), got {p}"
        )));
    }
    let g = a.grid();
    let k = g.dt();
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for i in 0..=g.nt() {
        let w = time_weight(i, g.nt());
        let s: f64 = if p == 2.0 {
            a.row(i).iter().map(|v| v * v).sum()
        } else if p == 1.0 {
            a.row(i).iter().map(|v| v.abs()).sum()
        } else {
            a.row(i).iter().map(|v| v.abs().powf(p)).sum()
        };
        acc += w * k * vol * s;
    }
    Ok(acc.powf(1.0 / p))
}

pub fn l2_norm_q(a: &Field) -> f64 {
    l2_norm_spacetime(a, 2.0).expect("p = 2 is valid")
}

/// Duality pairing for piecewise-constant-in-time controls:
/// k h^dim sum_{n=1..nt} a^n . b^n. Row 0 never enters the dynamics and is
/// ignored here.
pub fn l2_inner_control(a: &Field, b: &Field) -> Result<f64> {
    same_grid(a.grid(), b.grid(), "l2_inner_control")?;
    let g = a.grid();
    let k = g.dt();
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for i in 1..=g.nt() {
        let dot: f64 = a.row(i).iter().zip(b.row(i)).map(|(x, y)| x * y).sum();
        acc += k * vol * dot;
    }
    Ok(acc)
}

/// Control-space L1 norm under the same rectangle-in-time rule.
pub fn l1_norm_control(a: &Field) -> f64 {
    let g = a.grid();
    let k = g.dt();
    let vol = g.cell_volume();
    (1..=g.nt())
        .map(|i| k * vol * a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .sum()
}

/// Pointwise clamp of `u` into [ua, ub].
pub fn project_box(u: &Field, ua: &Field, ub: &Field) -> Result<Field> {
    same_grid(u.grid(), ua.grid(), "project_box ua")?;
    same_grid(u.grid(), ub.grid(), "project_box ub")?;
    check_bounds(ua, ub)?;
    let values = u
        .values()
        .iter()
        .zip(ua.values())
        .zip(ub.values())
        .map(|((u, a), b)| u.max(*a).min(*b))
        .collect();
    Field::new(*u.grid(), values)
}

pub(crate) fn check_bounds(ua: &Field, ub: &Field) -> Result<()> {
    for (idx, (a, b)) in ua.values().iter().zip(ub.values()).enumerate() {
        if a > b {
            let n = ua.grid().n_nodes();
            return Err(Error::invalid(format!(
                "ua exceeds ub at time row {}, node {} ({a} > {b})",
                idx / n,
                idx % n
            )));
        }
    }
    Ok(())
}
