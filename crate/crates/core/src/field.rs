//! Discrete function spaces: space-only and space-time scalar fields.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Function of space only: one value per interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    grid: Grid,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::invalid(format!(
                "spatial field has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("spatial field contains non-finite entries"));
        }
        Ok(SpatialField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        SpatialField {
            values: vec![0.0; grid.n_nodes()],
            grid,
        }
    }

    /// Evaluate `f` at every interior node. 1-d functions receive (x, 0).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.n_nodes())
            .map(|j| {
                let c = grid.node_coords(j);
                f(c[0], c[1])
            })
            .collect();
        SpatialField::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        SpatialField::new(grid, vec![c; grid.n_nodes()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// a + s*b
    pub fn axpy(&self, s: f64, b: &SpatialField) -> Result<SpatialField> {
        same_grid(&self.grid, &b.grid, "spatial axpy")?;
        let values = self
            .values
            .iter()
            .zip(&b.values)
            .map(|(a, b)| a + s * b)
            .collect();
        SpatialField::new(self.grid, values)
    }

    pub fn scale(&self, s: f64) -> SpatialField {
        SpatialField {
            grid: self.grid,
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }

    /// Re-home the field onto a grid with identical spatial layout (used when
    /// slicing a space-time field on a restricted window).
    pub fn with_grid(&self, grid: Grid) -> Result<SpatialField> {
        if grid.dim() != self.grid.dim()
            || grid.nx() != self.grid.nx()
            || grid.lo() != self.grid.lo()
            || grid.hi() != self.grid.hi()
        {
            return Err(Error::grid_mismatch(
                "spatial layout differs, cannot re-home field",
            ));
        }
        SpatialField::new(grid, self.values.clone())
    }
}

/// Space-time scalar field: (nt + 1) rows of node values, row 0 at t = t0.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    /// Row-major storage, row i = time level i.
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let expect = (grid.nt() + 1) * grid.n_nodes();
        if values.len() != expect {
            return Err(Error::invalid(format!(
                "field has {} values, grid wants {} ({} rows x {} nodes)",
                values.len(),
                expect,
                grid.nt() + 1,
                grid.n_nodes()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("field contains non-finite entries"));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            values: vec![0.0; (grid.nt() + 1) * grid.n_nodes()],
            grid,
        }
    }

    /// Evaluate `f(t, x, y)` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let n = grid.n_nodes();
        let mut values = Vec::with_capacity((grid.nt() + 1) * n);
        for i in 0..=grid.nt() {
            let t = grid.time(i);
            for j in 0..n {
                let c = grid.node_coords(j);
                values.push(f(t, c[0], c[1]));
            }
        }
        Field::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Field::new(grid, vec![c; (grid.nt() + 1) * grid.n_nodes()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.n_nodes();
        &mut self.values[i * n..(i + 1) * n]
    }

    /// Time slice as a spatial field on the same grid.
    pub fn slice(&self, i: usize) -> SpatialField {
        SpatialField {
            grid: self.grid,
            values: self.row(i).to_vec(),
        }
    }

    /// a + s*b
    pub fn axpy(&self, s: f64, b: &Field) -> Result<Field> {
        same_grid(&self.grid, &b.grid, "field axpy")?;
        let values = self
            .values
            .iter()
            .zip(&b.values)
            .map(|(a, b)| a + s * b)
            .collect();
        Field::new(self.grid, values)
    }

    pub fn scale(&self, s: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }

    /// Restriction to the window [time(m), t1]: rows m..=nt on grid.restrict(m).
    pub fn restrict(&self, m: usize) -> Result<Field> {
        let sub = self.grid.restrict(m)?;
        let n = self.grid.n_nodes();
        Field::new(sub, self.values[m * n..].to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn same_grid(a: &Grid, b: &Grid, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::grid_mismatch(what.to_string()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_and_restrict() {
        let g = Grid::unit(1, 3, 4, 1.0).unwrap();
        let f = Field::from_fn(g, |t, x, _| t + x).unwrap();
        let s = f.slice(2);
        assert!((s.values()[1] - (0.5 + 0.5)).abs() < 1e-15);

        let r = f.restrict(2).unwrap();
        assert_eq!(r.grid().nt(), 2);
        assert_eq!(r.row(0), f.row(2));
        assert_eq!(r.row(2), f.row(4));
    }

    #[test]
    fn shape_checks() {
        let g = Grid::unit(1, 3, 2, 1.0).unwrap();
        assert!(Field::new(g, vec![0.0; 5]).is_err());
        assert!(SpatialField::new(g, vec![f64::NAN; 3]).is_err());
        let other = Grid::unit(1, 4, 2, 1.0).unwrap();
        let a = Field::zeros(g);
        let b = Field::zeros(other);
        assert!(a.axpy(1.0, &b).is_err());
    }
}
