//! Exhaustive bang-bang enumeration on a coarse control partition.
//!
//! Serves as the global-minimizer surrogate on instances small enough to
//! enumerate: every control assigning u_a or u_b per block is evaluated.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Field, SpatialField};
use crate::optim::functional::objective;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy)]
pub struct BlockPartition {
    /// Chunks of the time intervals 1..=nt.
    pub time_blocks: usize,
    /// Chunks of the lexicographic node ordering.
    pub space_blocks: usize,
}

impl BlockPartition {
    pub fn count(&self) -> usize {
        self.time_blocks * self.space_blocks
    }

    fn block_of(&self, nt: usize, n_nodes: usize, step: usize, node: usize) -> usize {
        let tb = (step - 1) * self.time_blocks / nt;
        let sb = node * self.space_blocks / n_nodes;
        tb * self.space_blocks + sb
    }
}

/// Control field for one bang-bang assignment: bit b of `mask` set means
/// block b takes u_b, cleared means u_a.
pub fn block_control(spec: &ProblemSpec, blocks: &BlockPartition, mask: usize) -> Field {
    let g = spec.grid;
    let n = g.n_nodes();
    let mut u = Field::zeros(g);
    u.row_mut(0).copy_from_slice(&spec.ua.values()[..n]);
    for step in 1..=g.nt() {
        for node in 0..n {
            let b = blocks.block_of(g.nt(), n, step, node);
            let hi = mask & (1 << b) != 0;
            u.row_mut(step)[node] = if hi {
                spec.ub.row(step)[node]
            } else {
                spec.ua.row(step)[node]
            };
        }
    }
    u
}

/// Evaluate all 2^blocks assignments; return the best control and value.
/// Deterministic: ties break toward the lowest assignment index.
pub fn oracle_enumerate(
    spec: &ProblemSpec,
    eta: &SpatialField,
    blocks: &BlockPartition,
) -> Result<(Field, f64)> {
    let nb = blocks.count();
    if nb == 0 {
        return Err(Error::invalid("block partition must be nonempty"));
    }
    if nb > 20 {
        return Err(Error::invalid(format!(
            "refusing to enumerate 2^{nb} bang-bang controls (limit 20 blocks)"
        )));
    }
    if blocks.time_blocks > spec.grid.nt() || blocks.space_blocks > spec.grid.n_nodes() {
        return Err(Error::invalid(
            "block partition finer than the control grid",
        ));
    }
    let eta = eta.with_grid(spec.grid)?;
    let evals: Vec<Result<(f64, usize)>> = (0..(1usize << nb))
        .into_par_iter()
        .map(|mask| {
            let u = block_control(spec, blocks, mask);
            Ok((objective(spec, &u, &eta)?, mask))
        })
        .collect();
    let evals: Vec<(f64, usize)> = evals.into_iter().collect::<Result<_>>()?;
    let &(j, mask) = evals
        .iter()
        .min_by(|a, b| a.partial_cmp(b).expect("finite objectives"))
        .expect("at least one assignment");
    Ok((block_control(spec, blocks, mask), j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_box_single_block() {
        let mut spec = ProblemSpec::default_instance(5, 4).unwrap();
        spec.ub = spec.ua.clone();
        let blocks = BlockPartition {
            time_blocks: 1,
            space_blocks: 1,
        };
        let (u, j) = oracle_enumerate(&spec, &spec.y0.clone(), &blocks).unwrap();
        assert_eq!(u.row(2), spec.ua.row(2));
        assert!(j.is_finite());
    }

    #[test]
    fn two_blocks_best_bounds_each() {
        let spec = ProblemSpec::default_instance(5, 4).unwrap();
        let blocks = BlockPartition {
            time_blocks: 2,
            space_blocks: 1,
        };
        let eta = spec.y0.clone();
        let (_, best) = oracle_enumerate(&spec, &eta, &blocks).unwrap();
        for mask in 0..4usize {
            let u = block_control(&spec, &blocks, mask);
            let j = objective(&spec, &u, &eta).unwrap();
            assert!(best <= j + 1e-15);
        }
    }

    #[test]
    fn refuses_exponential_blowup() {
        let spec = ProblemSpec::default_instance(25, 24).unwrap();
        let blocks = BlockPartition {
            time_blocks: 7,
            space_blocks: 3,
        };
        assert!(oracle_enumerate(&spec, &spec.y0.clone(), &blocks).is_err());
    }
}
