//! Shared machinery for the experiments: configuration, the cached base
//! solution, restricted re-optimizations and tolerance scaling.

use crate::error::{Error, Result};
use crate::field::{Field, SpatialField};
use crate::optim::{minimize, OptimizeOptions, OptimizeReport};
use crate::problem::ProblemSpec;
use crate::verify::report::ExperimentId;
use crate::verify::sample::default_scales;

/// Gap tolerances below this are numerically unreachable; inner
/// re-optimizations clamp here.
pub const GAP_FLOOR: f64 = 3e-11;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment_id: ExperimentId,
    pub spec: ProblemSpec,
    /// Overrides the per-experiment default when set.
    pub sample_count: Option<usize>,
    /// Strictly decreasing positive perturbation scales.
    pub perturbation_scales: Vec<f64>,
    pub seed: u64,
    /// Options for the base optimization; inner re-optimizations derive
    /// their warm starts and tolerances from it.
    pub optimize: OptimizeOptions,
}

impl ExperimentConfig {
    pub fn new(experiment_id: ExperimentId, spec: ProblemSpec) -> Self {
        ExperimentConfig {
            experiment_id,
            spec,
            sample_count: None,
            perturbation_scales: default_scales(),
            seed: 0,
            optimize: OptimizeOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = !self.perturbation_scales.is_empty()
            && self.perturbation_scales.iter().all(|s| *s > 0.0)
            && self.perturbation_scales.windows(2).all(|w| w[0] > w[1]);
        if !ok {
            return Err(Error::invalid(
                "perturbation scales must be strictly decreasing and positive",
            ));
        }
        Ok(())
    }

    pub fn samples(&self, default: usize) -> usize {
        self.sample_count.unwrap_or(default)
    }

    /// Seed stream for a (block, sample) pair. Blocks are allocated globally
    /// (not per experiment) so that E5 reproduces E3/E4 rows bit-identically
    /// under a shared master seed.
    pub fn stream(&self, block: u64, sample: u64) -> u64 {
        crate::rng::derive_seed(
            self.seed,
            block.wrapping_mul(1_000_003).wrapping_add(sample),
        )
    }

    pub fn rng(&self, block: u64, sample: u64) -> rand_chacha::ChaCha8Rng {
        use rand_chacha::rand_core::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(self.stream(block, sample))
    }
}

/// Base solution on the full window plus per-tau restricted polish.
pub struct Workbench<'a> {
    pub cfg: &'a ExperimentConfig,
    pub base: OptimizeReport,
    pub gap_tol: f64,
}

impl<'a> Workbench<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let opts = OptimizeOptions {
            seed: cfg.optimize.seed,
            ..cfg.optimize.clone()
        };
        let base = minimize(&cfg.spec, &cfg.spec.y0.clone(), &opts)?;
        if !base.converged {
            return Err(Error::invalid(format!(
                "base optimization did not converge (gap {:.3e} > {:.3e})",
                base.gap, base.gap_tol
            )));
        }
        let gap_tol = base.gap_tol;
        Ok(Workbench { cfg, base, gap_tol })
    }

    /// Restriction of the instance to [time(m), T] started at the optimal
    /// trajectory, re-polished so its adjoint is the restricted problem's
    /// own (the tau-slice gradient of the cost-to-go).
    pub fn restricted(&self, m: usize) -> Result<(ProblemSpec, OptimizeReport)> {
        let eta = self.base.ybar.slice(m);
        let sub = self.cfg.spec.restrict(m, &eta)?;
        let warm = if m == 0 {
            self.base.ubar.clone()
        } else {
            self.base.ubar.restrict(m)?
        };
        let report = minimize(
            &sub,
            &sub.y0.clone(),
            &OptimizeOptions {
                gap_tol: Some(self.gap_tol),
                max_iter: self.cfg.optimize.max_iter,
                solve: self.cfg.optimize.solve,
                ..OptimizeOptions::warm(warm)
            },
        )?;
        Ok((sub, report))
    }

    /// Cost-to-go from (time(m), eta) with a warm start and a gap tolerance
    /// scaled to the perturbation size. Returns None when the inner
    /// optimization fails to converge (the sample is then excluded).
    pub fn value_scaled(
        &self,
        m: usize,
        eta: &SpatialField,
        warm: &Field,
        scale: f64,
    ) -> Result<Option<f64>> {
        let tol = inner_gap_tol(self.gap_tol, scale);
        if m == self.cfg.spec.grid.nt() {
            return Ok(Some(0.0));
        }
        let sub = self.cfg.spec.restrict(m, eta)?;
        let report = minimize(
            &sub,
            &sub.y0.clone(),
            &OptimizeOptions {
                gap_tol: Some(tol),
                max_iter: self.cfg.optimize.max_iter,
                solve: self.cfg.optimize.solve,
                ..OptimizeOptions::warm(warm.clone())
            },
        )?;
        Ok(report.converged.then_some(report.j))
    }
}

/// Inner tolerance for a perturbation of size `scale`: the base tolerance
/// shrunk by scale^2 (remainders at scale s are meaningless if optimizer
/// noise exceeds s^2), floored at the numerically reachable gap.
pub fn inner_gap_tol(base_tol: f64, scale: f64) -> f64 {
    (base_tol * scale.powi(2).min(1.0)).max(GAP_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_tolerance_floors() {
        assert_eq!(inner_gap_tol(1e-8, 1.0), 1e-8);
        assert!((inner_gap_tol(1e-8, 1e-1) - 1e-10).abs() < 1e-24);
        assert_eq!(inner_gap_tol(1e-8, 1e-4), GAP_FLOOR);
    }

    #[test]
    fn config_validation() {
        let spec = ProblemSpec::default_instance(5, 4).unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentId::E1Adjoint, spec);
        assert!(cfg.validate().is_ok());
        cfg.perturbation_scales = vec![1e-2, 1e-1];
        assert!(cfg.validate().is_err());
    }
}
