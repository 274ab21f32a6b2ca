//! Second-order finite-difference discretization of -div(a(x) grad .) on the
//! interior nodes, Dirichlet boundary eliminated.
//!
//! Face coefficients are arithmetic means of the adjacent node values; faces
//! touching the boundary reuse the interior node value. The resulting matrix
//! is symmetric and positive definite for uniformly positive a.

use crate::error::{Error, Result};
use crate::field::SpatialField;
use crate::grid::Grid;
use crate::pde::banded::BandedMatrix;

#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    n: usize,
    dists: Vec<usize>,
    diag: Vec<f64>,
    /// Off-diagonal bands aligned with `dists[1..]`.
    off: Vec<Vec<f64>>,
}

impl DiffusionOperator {
    pub fn assemble(grid: &Grid, a: &SpatialField) -> Result<Self> {
        if a.grid() != grid {
            return Err(Error::grid_mismatch("diffusion field not on solver grid"));
        }
        let n = grid.n_nodes();
        let nx = grid.nx();
        let av = a.values();
        match grid.dim() {
            1 => {
                let h2 = grid.dx(0) * grid.dx(0);
                let mut diag = vec![0.0; n];
                let mut band1 = vec![0.0; n - 1];
                for j in 0..n {
                    let a_left = if j == 0 {
                        av[0]
                    } else {
                        0.5 * (av[j - 1] + av[j])
                    };
                    let a_right = if j == n - 1 {
                        av[n - 1]
                    } else {
                        0.5 * (av[j] + av[j + 1])
                    };
                    diag[j] = (a_left + a_right) / h2;
                    if j + 1 < n {
                        band1[j] = -0.5 * (av[j] + av[j + 1]) / h2;
                    }
                }
                Ok(DiffusionOperator {
                    n,
                    dists: vec![0, 1],
                    diag,
                    off: vec![band1],
                })
            }
            2 => {
                let hx2 = grid.dx(0) * grid.dx(0);
                let hy2 = grid.dx(1) * grid.dx(1);
                let mut diag = vec![0.0; n];
                let mut band_x = vec![0.0; n - 1];
                let mut band_y = vec![0.0; n - nx];
                let at = |ix: usize, iy: usize| av[iy * nx + ix];
                for iy in 0..nx {
                    for ix in 0..nx {
                        let j = iy * nx + ix;
                        let a_w = if ix == 0 {
                            at(ix, iy)
                        } else {
                            0.5 * (at(ix - 1, iy) + at(ix, iy))
                        };
                        let a_e = if ix == nx - 1 {
                            at(ix, iy)
                        } else {
                            0.5 * (at(ix, iy) + at(ix + 1, iy))
                        };
                        let a_s = if iy == 0 {
                            at(ix, iy)
                        } else {
                            0.5 * (at(ix, iy - 1) + at(ix, iy))
                        };
                        let a_n = if iy == nx - 1 {
                            at(ix, iy)
                        } else {
                            0.5 * (at(ix, iy) + at(ix, iy + 1))
                        };
                        diag[j] = (a_w + a_e) / hx2 + (a_s + a_n) / hy2;
                        if ix + 1 < nx {
                            band_x[j] = -a_e / hx2;
                        }
                        // wrap positions between tensor rows stay zero
                        if iy + 1 < nx {
                            band_y[j] = -a_n / hy2;
                        }
                    }
                }
                Ok(DiffusionOperator {
                    n,
                    dists: vec![0, 1, nx],
                    diag,
                    off: vec![band_x, band_y],
                })
            }
            d => Err(Error::invalid(format!("unsupported dimension {d}"))),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// y = L x
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for j in 0..self.n {
            y[j] = self.diag[j] * x[j];
        }
        for (band, &d) in self.off.iter().zip(&self.dists[1..]) {
            for i in 0..self.n - d {
                y[i + d] += band[i] * x[i];
                y[i] += band[i] * x[i + d];
            }
        }
    }

    /// Banded matrix scale*I + k*L + k*diag(c).
    pub fn step_matrix(&self, scale: f64, k: f64, c: &[f64]) -> BandedMatrix {
        let mut m = BandedMatrix::new(self.n, self.dists.clone());
        for j in 0..self.n {
            m.diag_mut()[j] = scale + k * (self.diag[j] + c[j]);
        }
        for (w, band) in self.off.iter().enumerate() {
            let dst = m.band_mut(w + 1);
            for (i, v) in band.iter().enumerate() {
                dst[i] = k * v;
            }
        }
        m
    }
}
