use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Boundary values `φ(x, t)` on the edge of a Dirichlet box.
pub type BoundaryFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Boundary {
    Periodic,
    /// Values prescribed on the box edge. `None` means homogeneous data where
    /// the operator allows it.
    Dirichlet(Option<BoundaryFn>),
}

impl Boundary {
    pub fn dirichlet(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Boundary::Dirichlet(Some(Arc::new(f)))
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => write!(f, "Periodic"),
            Boundary::Dirichlet(Some(_)) => write!(f, "Dirichlet(<fn>)"),
            Boundary::Dirichlet(None) => write!(f, "Dirichlet(homogeneous)"),
        }
    }
}

/// Where a stencil offset lands: an unknown or a point on the Dirichlet edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighbor {
    Node(usize),
    Ghost([f64; 2]),
}

/// Uniform mesh on a 1D interval or 2D square-celled box.
///
/// Periodic boxes hold `n` nodes per axis at `lo + i·dx`, `dx = (hi − lo)/n`
/// (the right endpoint is the image of `lo`). Dirichlet boxes hold `n`
/// interior nodes at `lo + (i+1)·dx`, `dx = (hi − lo)/(n + 1)`; the edge
/// points are not unknowns. Nodes are numbered `ix + n·iy`.
#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    n: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    dx: [f64; 2],
    boundary: Boundary,
}

impl Grid {
    pub fn new(dim: usize, n: usize, lo: &[f64], hi: &[f64], boundary: Boundary) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidParameter(format!(
                "need at least 3 nodes per axis, got {n}"
            )));
        }
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::InvalidParameter(
                "box corners must have one entry per axis".into(),
            ));
        }
        let cells = if boundary.is_periodic() { n } else { n + 1 } as f64;
        let mut g = Grid {
            dim,
            n,
            lo: [0.0; 2],
            hi: [0.0; 2],
            dx: [0.0; 2],
            boundary,
        };
        for axis in 0..dim {
            if !(hi[axis] > lo[axis]) {
                return Err(Error::InvalidParameter(format!(
                    "empty box along axis {axis}: [{}, {}]",
                    lo[axis], hi[axis]
                )));
            }
            g.lo[axis] = lo[axis];
            g.hi[axis] = hi[axis];
            g.dx[axis] = (hi[axis] - lo[axis]) / cells;
        }
        Ok(g)
    }

    pub fn new_1d(n: usize, lo: f64, hi: f64, boundary: Boundary) -> Result<Self> {
        Grid::new(1, n, &[lo], &[hi], boundary)
    }

    pub fn new_2d(n: usize, lo: [f64; 2], hi: [f64; 2], boundary: Boundary) -> Result<Self> {
        Grid::new(2, n, &lo, &hi, boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx[..self.dim]
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary.is_periodic()
    }

    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Volume of one cell, used as the quadrature weight of discrete norms.
    pub fn cell_volume(&self) -> f64 {
        self.dx().iter().product()
    }

    fn axis_coord(&self, axis: usize, raw: i64) -> f64 {
        let shift = if self.is_periodic() { 0 } else { 1 };
        self.lo[axis] + (raw + shift) as f64 * self.dx[axis]
    }

    pub fn axis_indices(&self, node: usize) -> [usize; 2] {
        [node % self.n, node / self.n]
    }

    /// Coordinates of a node; only the first `dim` entries are meaningful.
    pub fn coords(&self, node: usize) -> [f64; 2] {
        let idx = self.axis_indices(node);
        let mut x = [0.0; 2];
        for axis in 0..self.dim {
            x[axis] = self.axis_coord(axis, idx[axis] as i64);
        }
        x
    }

    /// The node reached from `node` by an integer offset (at most one cell
    /// per axis for Dirichlet boxes).
    pub fn neighbor(&self, node: usize, offset: [i64; 2]) -> Neighbor {
        let idx = self.axis_indices(node);
        let n = self.n as i64;
        let mut out = [0usize; 2];
        let mut ghost = None;
        for axis in 0..self.dim {
            let raw = idx[axis] as i64 + offset[axis];
            if self.is_periodic() {
                out[axis] = raw.rem_euclid(n) as usize;
            } else if raw < 0 || raw >= n {
                ghost.get_or_insert([0.0; 2]);
            } else {
                out[axis] = raw as usize;
            }
        }
        if ghost.is_some() {
            let mut x = [0.0; 2];
            for axis in 0..self.dim {
                x[axis] = self.axis_coord(axis, idx[axis] as i64 + offset[axis]);
            }
            return Neighbor::Ghost(x);
        }
        Neighbor::Node(out[0] + self.n * out[1])
    }

    /// Value prescribed at a ghost point.
    pub fn boundary_value(&self, x: &[f64], t: f64) -> f64 {
        match &self.boundary {
            Boundary::Dirichlet(Some(f)) => f(x, t),
            _ => 0.0,
        }
    }

    /// All ghost points touched by unit offsets (axis and diagonal).
    pub fn ghost_points(&self) -> Vec<[f64; 2]> {
        if self.is_periodic() {
            return Vec::new();
        }
        let n = self.n as i64;
        let mut pts = Vec::new();
        match self.dim {
            1 => {
                pts.push([self.axis_coord(0, -1), 0.0]);
                pts.push([self.axis_coord(0, n), 0.0]);
            }
            _ => {
                for i in -1..=n {
                    for j in -1..=n {
                        if i == -1 || j == -1 || i == n || j == n {
                            pts.push([self.axis_coord(0, i), self.axis_coord(1, j)]);
                        }
                    }
                }
            }
        }
        pts
    }

    /// Node closest to `x` (wrapping on periodic boxes, clamping otherwise).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut idx = [0usize; 2];
        let n = self.n as i64;
        for axis in 0..self.dim {
            let raw = ((x[axis] - self.lo[axis]) / self.dx[axis]).round() as i64;
            idx[axis] = if self.is_periodic() {
                raw.rem_euclid(n) as usize
            } else {
                (raw - 1).clamp(0, n - 1) as usize
            };
        }
        idx[0] + self.n * idx[1]
    }
}

/// One real value per grid node.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Shape {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at node {i}"
            )));
        }
        Ok(GridField { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|i| f(&grid.coords(i)[..grid.dim()]))
            .collect();
        GridField::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self> {
        let n = grid.node_count();
        GridField::new(grid, vec![c; n])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_layout() {
        let g = Grid::new_1d(4, 0.0, 2.0, Boundary::Periodic).unwrap();
        assert_eq!(g.dx(), &[0.5]);
        assert_eq!(g.coords(3)[0], 1.5);
        assert_eq!(g.neighbor(3, [1, 0]), Neighbor::Node(0));
        assert_eq!(g.neighbor(0, [-1, 0]), Neighbor::Node(3));
        assert_eq!(g.nearest_node(&[1.98]), 0);
    }

    #[test]
    fn dirichlet_layout() {
        let g = Grid::new_1d(3, 0.0, 1.0, Boundary::Dirichlet(None)).unwrap();
        assert_eq!(g.dx(), &[0.25]);
        assert_eq!(g.coords(0)[0], 0.25);
        assert_eq!(g.neighbor(0, [-1, 0]), Neighbor::Ghost([0.0, 0.0]));
        assert_eq!(g.neighbor(2, [1, 0]), Neighbor::Ghost([1.0, 0.0]));
        assert_eq!(g.ghost_points().len(), 2);
    }

    #[test]
    fn two_d_numbering() {
        let g = Grid::new_2d(3, [0.0, 0.0], [3.0, 3.0], Boundary::Periodic).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.coords(5), [2.0, 1.0]);
        assert_eq!(g.neighbor(0, [-1, -1]), Neighbor::Node(8));
        let d = Grid::new_2d(3, [0.0, 0.0], [4.0, 4.0], Boundary::Dirichlet(None)).unwrap();
        assert_eq!(d.neighbor(0, [1, -1]), Neighbor::Ghost([2.0, 0.0]));
        assert_eq!(d.ghost_points().len(), 16);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new_1d(2, 0.0, 1.0, Boundary::Periodic).is_err());
        assert!(Grid::new_1d(8, 1.0, 1.0, Boundary::Periodic).is_err());
        assert!(Grid::new(3, 8, &[0.0; 3], &[1.0; 3], Boundary::Periodic).is_err());
        let g = Arc::new(Grid::new_1d(4, 0.0, 1.0, Boundary::Periodic).unwrap());
        assert!(GridField::new(g.clone(), vec![0.0; 3]).is_err());
        assert!(GridField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
