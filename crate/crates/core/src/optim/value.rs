//! Value function evaluation: minimal cost-to-go from (tau, eta).

use crate::error::{Error, Result};
use crate::field::SpatialField;
use crate::optim::minimize::{minimize, OptimizeOptions, OptimizeReport};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone)]
pub struct ValueSample {
    pub tau_index: usize,
    pub eta: SpatialField,
    pub v: f64,
    /// Absent only at tau = T, where the cost-to-go is the empty integral.
    pub report: Option<OptimizeReport>,
}

/// v(tau, eta): restrict the instance to [time(tau_index), T] with initial
/// datum eta and minimize.
pub fn value(
    spec: &ProblemSpec,
    tau_index: usize,
    eta: &SpatialField,
    opts: &OptimizeOptions,
) -> Result<ValueSample> {
    if tau_index > spec.grid.nt() {
        return Err(Error::invalid(format!(
            "tau index {tau_index} outside 0..={}",
            spec.grid.nt()
        )));
    }
    if tau_index == spec.grid.nt() {
        return Ok(ValueSample {
            tau_index,
            eta: eta.clone(),
            v: 0.0,
            report: None,
        });
    }
    let sub = spec.restrict(tau_index, eta)?;
    let report = minimize(&sub, &sub.y0.clone(), opts)?;
    Ok(ValueSample {
        tau_index,
        eta: eta.clone(),
        v: report.j,
        report: Some(report),
    })
}
