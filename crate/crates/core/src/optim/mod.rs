//! Objective, variations, constrained minimization, the enumeration oracle
//! and the value-function evaluator.

mod brent;
mod functional;
mod minimize;
mod oracle;
mod value;

pub use brent::brent_min;
pub use functional::{
    gradient_field, hessian_apply, objective, objective_with_state, problem_scale, running_cost,
    second_variation, second_variation_at, second_variation_from_z, tracking_cost,
};
pub use minimize::{
    bang_bang_vertex, minimize, primal_dual_gap, Method, OptimizeOptions, OptimizeReport,
};
pub use oracle::{block_control, oracle_enumerate, BlockPartition};
pub use value::{value, ValueSample};
