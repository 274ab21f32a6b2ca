//! Tensor space-time grids with eliminated homogeneous Dirichlet boundary.
//!
//! A grid covers the cylinder (t0, t1) x Omega where Omega is an axis-aligned
//! box in dimension 1 or 2. Only interior nodes are stored: the boundary value
//! is identically zero and never appears in a vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    nx: usize,
    nt: usize,
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
    /// Initial time of the current window (tau).
    t0: f64,
    /// Final time (T).
    t1: f64,
}

impl Grid {
    /// Grid on a general box. `nx` counts interior nodes per axis.
    pub fn new(
        dim: usize,
        nx: usize,
        nt: usize,
        lo: [f64; MAX_DIM],
        hi: [f64; MAX_DIM],
        t0: f64,
        t1: f64,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("dim must be 1 or 2, got {dim}")));
        }
        if nx < 2 {
            return Err(Error::invalid(format!("nx must be >= 2, got {nx}")));
        }
        if nt < 1 {
            return Err(Error::invalid(format!("nt must be >= 1, got {nt}")));
        }
        if !(t0 >= 0.0 && t1 > t0) {
            return Err(Error::invalid(format!(
                "time window must satisfy 0 <= t0 < t1, got [{t0}, {t1}]"
            )));
        }
        for ax in 0..dim {
            if !(hi[ax] > lo[ax]) || !lo[ax].is_finite() || !hi[ax].is_finite() {
                return Err(Error::invalid(format!(
                    "domain axis {ax} must be a finite box, got [{}, {}]",
                    lo[ax], hi[ax]
                )));
            }
        }
        Ok(Grid {
            dim,
            nx,
            nt,
            lo,
            hi,
            t0,
            t1,
        })
    }

    /// Grid on the unit box (0,1)^dim with time window (0, t1).
    pub fn unit(dim: usize, nx: usize, nt: usize, t1: f64) -> Result<Self> {
        Grid::new(dim, nx, nt, [0.0; MAX_DIM], [1.0; MAX_DIM], 0.0, t1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    /// Interior node count: nx^dim.
    pub fn n_nodes(&self) -> usize {
        self.nx.pow(self.dim as u32)
    }

    /// Time step k = (t1 - t0)/nt.
    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.nt as f64
    }

    /// Spatial spacing along `axis`: side/(nx+1).
    pub fn dx(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.nx + 1) as f64
    }

    /// Volume of one spatial quadrature cell, prod_axis dx.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|ax| self.dx(ax)).product()
    }

    /// Time at row `i` (row 0 sits at t0).
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt()
    }

    /// Coordinates of interior node `j` under lexicographic ordering
    /// (x fastest, then y).
    pub fn node_coords(&self, j: usize) -> [f64; MAX_DIM] {
        let mut c = [0.0; MAX_DIM];
        let mut rem = j;
        for ax in 0..self.dim {
            let idx = rem % self.nx;
            rem /= self.nx;
            c[ax] = self.lo[ax] + (idx + 1) as f64 * self.dx(ax);
        }
        c
    }

    /// Sub-grid covering [time(m), t1] with the same spacing. `m` must leave
    /// at least one time step.
    pub fn restrict(&self, m: usize) -> Result<Grid> {
        if m >= self.nt {
            return Err(Error::invalid(format!(
                "restriction index {m} leaves no time step (nt = {})",
                self.nt
            )));
        }
        Ok(Grid {
            nt: self.nt - m,
            t0: self.time(m),
            ..*self
        })
    }

    /// Uniformly refined grid: nx -> 2 nx + 1 keeps nested nodes, nt doubles.
    pub fn refine(&self) -> Grid {
        Grid {
            nx: 2 * self.nx + 1,
            nt: 2 * self.nt,
            ..*self
        }
    }
}
