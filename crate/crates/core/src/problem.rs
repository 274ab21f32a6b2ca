//! Full instance data for one control problem.

use crate::error::{Error, Result};
use crate::field::{Field, SpatialField};
use crate::grid::Grid;
use crate::nonlin::Nonlinearity;
use crate::quad::check_bounds;

/// Everything that defines one instance: domain and grid, isotropic diffusion
/// a(x), reaction f, initial datum y0, tracking target yQ and control bounds.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: Grid,
    /// Per-node diffusion coefficient, uniformly positive.
    pub diffusion: SpatialField,
    pub nonlinearity: Nonlinearity,
    pub y0: SpatialField,
    pub yq: Field,
    pub ua: Field,
    pub ub: Field,
}

impl ProblemSpec {
    pub fn new(
        grid: Grid,
        diffusion: SpatialField,
        nonlinearity: Nonlinearity,
        y0: SpatialField,
        yq: Field,
        ua: Field,
        ub: Field,
    ) -> Result<Self> {
        for (name, g) in [
            ("diffusion", diffusion.grid()),
            ("y0", y0.grid()),
            ("yq", yq.grid()),
            ("ua", ua.grid()),
            ("ub", ub.grid()),
        ] {
            if g != &grid {
                return Err(Error::grid_mismatch(format!("{name} not on problem grid")));
            }
        }
        let a_min = diffusion
            .values()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(a_min > 0.0) {
            return Err(Error::validation(
                "diffusion",
                format!("must be uniformly positive, min = {a_min}"),
            ));
        }
        check_bounds(&ua, &ub).map_err(|e| Error::validation("ua", e.to_string()))?;
        Ok(ProblemSpec {
            grid,
            diffusion,
            nonlinearity,
            y0,
            yq,
            ua,
            ub,
        })
    }

    /// The desk-scale reference instance: Omega = (0,1), T = 1, a = 0.1,
    /// f(y) = sin y + y, y0 = sin(pi x), yQ = (1-t) sin(pi x) + 0.3 sin(2 pi x),
    /// u in [-1, 1]. The second target mode keeps exact tracking infeasible, so
    /// the adjoint never vanishes identically on a tail of the horizon.
    pub fn default_instance(nx: usize, nt: usize) -> Result<Self> {
        let grid = Grid::unit(1, nx, nt, 1.0)?;
        let pi = std::f64::consts::PI;
        ProblemSpec::new(
            grid,
            SpatialField::constant(grid, 0.1)?,
            Nonlinearity::SinePlusIdentity,
            SpatialField::from_fn(grid, |x, _| (pi * x).sin())?,
            Field::from_fn(grid, |t, x, _| {
                (1.0 - t) * (pi * x).sin() + 0.3 * (2.0 * pi * x).sin()
            })?,
            Field::constant(grid, -1.0)?,
            Field::constant(grid, 1.0)?,
        )
    }

    /// Same data with a different nonlinearity (used by the linear-instance
    /// consistency checks).
    pub fn with_nonlinearity(&self, f: Nonlinearity) -> ProblemSpec {
        ProblemSpec {
            nonlinearity: f,
            ..self.clone()
        }
    }

    /// Restriction to the window [time(m), T] with initial datum `eta`.
    pub fn restrict(&self, m: usize, eta: &SpatialField) -> Result<ProblemSpec> {
        if m == 0 {
            let mut spec = self.clone();
            spec.y0 = eta.with_grid(self.grid)?;
            return Ok(spec);
        }
        let sub = self.grid.restrict(m)?;
        ProblemSpec::new(
            sub,
            self.diffusion.with_grid(sub)?,
            self.nonlinearity.clone(),
            eta.with_grid(sub)?,
            self.yq.restrict(m)?,
            self.ua.restrict(m)?,
            self.ub.restrict(m)?,
        )
    }

    /// Interpolate the instance onto a uniformly refined grid (nx -> 2nx+1,
    /// nt -> 2nt). New nodes take the mean of their neighbours; boundary
    /// neighbours contribute zero for y0 and nearest-value for data fields.
    pub fn refine(&self) -> Result<ProblemSpec> {
        let fine = self.grid.refine();
        Ok(ProblemSpec::new(
            fine,
            refine_spatial(&self.diffusion, fine, true)?,
            self.nonlinearity.clone(),
            refine_spatial(&self.y0, fine, false)?,
            refine_field(&self.yq, fine, false)?,
            refine_field(&self.ua, fine, true)?,
            refine_field(&self.ub, fine, true)?,
        )?)
    }
}

/// Linear interpolation of interior-node values onto the refined grid.
/// `clamp_edges` repeats the edge value where a coarse neighbour would be the
/// (eliminated) boundary; otherwise the boundary contributes zero.
fn refine_spatial(a: &SpatialField, fine: Grid, clamp_edges: bool) -> Result<SpatialField> {
    let coarse = *a.grid();
    if fine.dim() != 1 {
        // 2-d refinement interpolates axis by axis.
        return refine_spatial_2d(a, fine, clamp_edges);
    }
    let n = coarse.nx();
    let v = a.values();
    let mut out = Vec::with_capacity(fine.nx());
    for j in 0..fine.nx() {
        // Fine node j sits at coarse coordinate (j+1)/2: odd j are coarse
        // nodes, even j are midpoints.
        if j % 2 == 1 {
            out.push(v[(j - 1) / 2]);
        } else {
            let left = if j == 0 {
                if clamp_edges {
                    v[0]
                } else {
                    0.0
                }
            } else {
                v[j / 2 - 1]
            };
            let right = if j == fine.nx() - 1 {
                if clamp_edges {
                    v[n - 1]
                } else {
                    0.0
                }
            } else {
                v[j / 2]
            };
            out.push(0.5 * (left + right));
        }
    }
    SpatialField::new(fine, out)
}

fn refine_spatial_2d(a: &SpatialField, fine: Grid, clamp_edges: bool) -> Result<SpatialField> {
    let coarse = *a.grid();
    let cn = coarse.nx();
    let fetch = |ix: isize, iy: isize| -> f64 {
        if ix < 0 || iy < 0 || ix >= cn as isize || iy >= cn as isize {
            if clamp_edges {
                let cx = ix.clamp(0, cn as isize - 1) as usize;
                let cy = iy.clamp(0, cn as isize - 1) as usize;
                a.values()[cy * cn + cx]
            } else {
                0.0
            }
        } else {
            a.values()[iy as usize * cn + ix as usize]
        }
    };
    let interp_axis = |j: usize| -> (isize, isize, bool) {
        // (left coarse index, right coarse index, on-node)
        if j % 2 == 1 {
            (((j - 1) / 2) as isize, ((j - 1) / 2) as isize, true)
        } else {
            (j as isize / 2 - 1, j as isize / 2, false)
        }
    };
    let fnx = fine.nx();
    let mut out = Vec::with_capacity(fnx * fnx);
    for jy in 0..fnx {
        let (y0, y1, ony) = interp_axis(jy);
        for jx in 0..fnx {
            let (x0, x1, onx) = interp_axis(jx);
            let v = match (onx, ony) {
                (true, true) => fetch(x0, y0),
                (false, true) => 0.5 * (fetch(x0, y0) + fetch(x1, y0)),
                (true, false) => 0.5 * (fetch(x0, y0) + fetch(x0, y1)),
                (false, false) => {
                    0.25 * (fetch(x0, y0) + fetch(x1, y0) + fetch(x0, y1) + fetch(x1, y1))
                }
            };
            out.push(v);
        }
    }
    SpatialField::new(fine, out)
}

fn refine_field(a: &Field, fine: Grid, clamp_edges: bool) -> Result<Field> {
    let coarse = *a.grid();
    let refined: Vec<SpatialField> = (0..=coarse.nt())
        .map(|i| refine_spatial(&a.slice(i), fine, clamp_edges))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity((fine.nt() + 1) * fine.n_nodes());
    for i in 0..=fine.nt() {
        if i % 2 == 0 {
            values.extend_from_slice(refined[i / 2].values());
        } else {
            let (lo, hi) = (refined[(i - 1) / 2].values(), refined[(i + 1) / 2].values());
            values.extend(lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)));
        }
    }
    Field::new(fine, values)
}
