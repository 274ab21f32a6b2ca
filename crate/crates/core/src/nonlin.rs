//! The nonlinearity catalogue for the reaction term f(y).
//!
//! Every admissible f is C^2 with bounded derivatives and f'(y) >= 0; the
//! solvers check the sign condition at every probed point and refuse to
//! continue on a violation.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Nonlinearity {
    /// f = 0 (pure heat equation).
    Zero,
    /// f(y) = alpha * y with alpha >= 0.
    Linear(f64),
    /// f(y) = sin y + y.
    SinePlusIdentity,
    /// User-supplied f, f', f'' with declared sup-norm bounds of f' and f''.
    Custom {
        f: ScalarFn,
        df: ScalarFn,
        ddf: ScalarFn,
        bound_df: f64,
        bound_ddf: f64,
    },
}

impl Nonlinearity {
    pub fn linear(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!(
                "linear nonlinearity needs alpha >= 0, got {alpha}"
            )));
        }
        Ok(Nonlinearity::Linear(alpha))
    }

    pub fn custom(
        f: ScalarFn,
        df: ScalarFn,
        ddf: ScalarFn,
        bound_df: f64,
        bound_ddf: f64,
    ) -> Result<Self> {
        if !bound_df.is_finite() || !bound_ddf.is_finite() {
            return Err(Error::invalid("declared derivative bounds must be finite"));
        }
        Ok(Nonlinearity::Custom {
            f,
            df,
            ddf,
            bound_df,
            bound_ddf,
        })
    }

    pub fn f(&self, y: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear(a) => a * y,
            Nonlinearity::SinePlusIdentity => y.sin() + y,
            Nonlinearity::Custom { f, .. } => f(y),
        }
    }

    pub fn df(&self, y: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear(a) => *a,
            Nonlinearity::SinePlusIdentity => y.cos() + 1.0,
            Nonlinearity::Custom { df, .. } => df(y),
        }
    }

    pub fn ddf(&self, y: f64) -> f64 {
        match self {
            Nonlinearity::Zero | Nonlinearity::Linear(_) => 0.0,
            Nonlinearity::SinePlusIdentity => -y.sin(),
            Nonlinearity::Custom { ddf, .. } => ddf(y),
        }
    }

    /// Declared sup norms of (f', f'').
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Nonlinearity::Zero => (0.0, 0.0),
            Nonlinearity::Linear(a) => (*a, 0.0),
            Nonlinearity::SinePlusIdentity => (2.0, 1.0),
            Nonlinearity::Custom {
                bound_df,
                bound_ddf,
                ..
            } => (*bound_df, *bound_ddf),
        }
    }

    /// True for f identically linear (f'' = 0), which collapses the second
    /// variation to the squared linearized-state norm.
    pub fn is_affine(&self) -> bool {
        matches!(self, Nonlinearity::Zero | Nonlinearity::Linear(_))
    }

    /// Name used in configs and report metadata.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Nonlinearity::Zero => "zero",
            Nonlinearity::Linear(_) => "linear",
            Nonlinearity::SinePlusIdentity => "sin_plus_id",
            Nonlinearity::Custom { .. } => "custom",
        }
    }
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Linear(a) => write!(fm, "Linear({a})"),
            other => fm.write_str(other.kind_name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_plus_identity_derivatives() {
        let f = Nonlinearity::SinePlusIdentity;
        assert_eq!(f.f(0.0), 0.0);
        assert_eq!(f.df(0.0), 2.0);
        for y in [-3.0, -0.5, 0.0, 1.2, 7.0] {
            assert!(f.df(y) >= 0.0);
            let fd = (f.f(y + 1e-6) - f.f(y - 1e-6)) / 2e-6;
            assert!((fd - f.df(y)).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_rejects_negative_slope() {
        assert!(Nonlinearity::linear(-0.1).is_err());
        assert!(Nonlinearity::linear(2.0).is_ok());
    }
}
