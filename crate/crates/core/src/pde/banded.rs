//! Symmetric banded Cholesky factorization.
//!
//! Every time-step matrix here is I + k*(stiffness + nonnegative diagonal),
//! hence symmetric positive definite with bandwidth 1 (dim 1) or nx (dim 2).
//! A dense-band LL^T factorization is exact and cheap at these sizes.

use crate::error::{Error, Result};

/// Lower-band storage: `band[d][i] = A[i + dist(d)][i]`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    /// Band distances, ascending, first entry 0 (the diagonal).
    dists: Vec<usize>,
    bands: Vec<Vec<f64>>,
}

impl BandedMatrix {
    pub fn new(n: usize, dists: Vec<usize>) -> Self {
        assert!(!dists.is_empty() && dists[0] == 0);
        let bands = dists.iter().map(|d| vec![0.0; n - d.min(&n)]).collect();
        BandedMatrix { n, dists, bands }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.bands[0]
    }

    pub fn band_mut(&mut self, which: usize) -> &mut [f64] {
        &mut self.bands[which]
    }

    /// y = A x for the symmetric matrix represented by the bands.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (b, &d) in self.bands.iter().zip(&self.dists) {
            if d == 0 {
                for i in 0..self.n {
                    y[i] += b[i] * x[i];
                }
            } else {
                for i in 0..self.n - d {
                    y[i + d] += b[i] * x[i];
                    y[i] += b[i] * x[i + d];
                }
            }
        }
    }

    /// In-place LL^T factorization. Fails if a pivot is not positive.
    pub fn cholesky(self) -> Result<BandedCholesky> {
        let n = self.n;
        let bw = *self.dists.last().unwrap();
        // Expand to dense band columns for the factorization: low[j][r] holds
        // L[j + r][j] for r in 0..=bw.
        let mut low = vec![vec![0.0; bw + 1]; n];
        for (b, &d) in self.bands.iter().zip(&self.dists) {
            for i in 0..b.len() {
                low[i][d] = b[i];
            }
        }
        for j in 0..n {
            // finish column j
            let mut diag = low[j][0];
            for m in j.saturating_sub(bw)..j {
                let l = low[m][j - m];
                diag -= l * l;
            }
            if !(diag > 0.0) {
                return Err(Error::SolverFailure {
                    step: j,
                    residual: diag,
                    context: "nonpositive pivot in banded Cholesky".into(),
                });
            }
            let dsq = diag.sqrt();
            low[j][0] = dsq;
            let max_r = bw.min(n - 1 - j);
            for r in 1..=max_r {
                let i = j + r;
                let mut s = low[j][r];
                for m in i.saturating_sub(bw)..j {
                    s -= low[m][i - m] * low[m][j - m];
                }
                low[j][r] = s / dsq;
            }
        }
        Ok(BandedCholesky { n, bw, low })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// low[j][r] = L[j+r][j]
    low: Vec<Vec<f64>>,
}

impl BandedCholesky {
    /// Solve A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        // forward: L y = b
        for j in 0..n {
            let y = b[j] / self.low[j][0];
            b[j] = y;
            let max_r = self.bw.min(n - 1 - j);
            for r in 1..=max_r {
                b[j + r] -= self.low[j][r] * y;
            }
        }
        // backward: L^T x = y
        for j in (0..n).rev() {
            let mut s = b[j];
            let max_r = self.bw.min(n - 1 - j);
            for r in 1..=max_r {
                s -= self.low[j][r] * b[j + r];
            }
            b[j] = s / self.low[j][0];
        }
    }
}
