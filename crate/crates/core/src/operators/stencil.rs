use std::borrow::Cow;
use std::sync::Arc;

use super::grid::{Grid, GridField, Neighbor};
use super::{pucci_weight, Coefficient, OperatorKind, OperatorSpec};
use crate::error::{Error, Result};

/// Offsets of the 9-point neighbourhood. Axis `a` uses entries `2a` (minus)
/// and `2a + 1` (plus); the two diagonals follow.
const OFFSETS: [[i64; 2]; 8] = [
    [-1, 0],
    [1, 0],
    [0, -1],
    [0, 1],
    [-1, -1],
    [1, 1],
    [-1, 1],
    [1, -1],
];

#[derive(Debug, Clone)]
enum NodalCoeffs {
    Linear {
        a: Vec<f64>,
        b: Vec<[f64; 2]>,
        src: Vec<f64>,
    },
    Eikonal {
        c: Vec<f64>,
        src: Vec<f64>,
    },
    Pucci {
        lambda: f64,
        big_lambda: f64,
    },
}

/// A linear grid operator `u ↦ diag·u + Σ off·u_j + constant`, row by row.
#[derive(Debug, Clone)]
pub struct LinearStencil {
    pub diag: Vec<f64>,
    pub off: Vec<Vec<(usize, f64)>>,
    pub constant: Vec<f64>,
}

impl LinearStencil {
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.diag[i] * u[i]
                + self.off[i].iter().map(|&(j, w)| w * u[j]).sum::<f64>()
                + self.constant[i];
        }
    }
}

/// The nodewise map `u ↦ F^h[u]` of a spec on a grid.
///
/// Second derivatives use centred differences, first-order terms upwind
/// differences chosen by the sign of the drift, and `|Du|` the Rouy–Tourin
/// form `max(D⁻u, −D⁺u, 0)` per axis. In 2D the Pucci operator replaces the
/// extreme Hessian eigenvalues by the max and min of the second differences
/// along the two axes and two diagonals. Every variant is monotone:
/// `F^h[u](x_i)` is nonincreasing in each `u(x_j)`, `j ≠ i`.
#[derive(Debug, Clone)]
pub struct StencilOperator {
    spec: OperatorSpec,
    grid: Arc<Grid>,
    neighbors: Vec<[Neighbor; 8]>,
    frozen: Option<NodalCoeffs>,
}

impl StencilOperator {
    pub fn new(spec: OperatorSpec, grid: Arc<Grid>) -> Result<Self> {
        if let (OperatorKind::Eikonal { .. }, super::Boundary::Dirichlet(None)) =
            (spec.kind(), grid.boundary())
        {
            return Err(Error::Config(
                "Dirichlet boundary for the eikonal operator needs a boundary value function"
                    .into(),
            ));
        }
        if let OperatorKind::LinearDiffusion { drift, .. } = spec.kind() {
            if !drift.is_empty() && drift.len() != grid.dim() {
                return Err(Error::Config(format!(
                    "drift has {} components on a {}D grid",
                    drift.len(),
                    grid.dim()
                )));
            }
        }
        let neighbors = (0..grid.node_count())
            .map(|i| OFFSETS.map(|off| grid.neighbor(i, off)))
            .collect();
        let mut op = StencilOperator {
            spec,
            grid,
            neighbors,
            frozen: None,
        };
        // Validates the coefficient signs even for time-dependent specs.
        let at_zero = op.sample(0.0)?;
        if !op.spec.time_dependent() {
            op.frozen = Some(at_zero);
        }
        Ok(op)
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn sample(&self, t: f64) -> Result<NodalCoeffs> {
        let g = &*self.grid;
        let nonneg = |name: &str, v: Vec<f64>| -> Result<Vec<f64>> {
            match v.iter().position(|&x| !(x >= 0.0)) {
                Some(i) => Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative, got {} at node {i} (t = {t})",
                    v[i]
                ))),
                None => Ok(v),
            }
        };
        Ok(match self.spec.kind() {
            OperatorKind::LinearDiffusion {
                diffusivity,
                drift,
                source,
            } => {
                let a = nonneg("diffusivity", diffusivity.sample(g, t))?;
                let mut b = vec![[0.0; 2]; g.node_count()];
                for (axis, comp) in drift.iter().enumerate() {
                    for (bi, v) in b.iter_mut().zip(comp.sample(g, t)) {
                        bi[axis] = v;
                    }
                }
                NodalCoeffs::Linear {
                    a,
                    b,
                    src: source.sample(g, t),
                }
            }
            OperatorKind::Eikonal { speed, source } => NodalCoeffs::Eikonal {
                c: nonneg("speed", speed.sample(g, t))?,
                src: source.sample(g, t),
            },
            OperatorKind::PucciMaximal { lambda, big_lambda } => NodalCoeffs::Pucci {
                lambda: *lambda,
                big_lambda: *big_lambda,
            },
        })
    }

    fn coeffs(&self, t: f64) -> Result<Cow<'_, NodalCoeffs>> {
        match &self.frozen {
            Some(c) => Ok(Cow::Borrowed(c)),
            None => Ok(Cow::Owned(self.sample(t)?)),
        }
    }

    #[inline]
    fn value(&self, u: &[f64], nb: Neighbor, t: f64) -> f64 {
        match nb {
            Neighbor::Node(j) => u[j],
            Neighbor::Ghost(x) => self.grid.boundary_value(&x[..self.grid.dim()], t),
        }
    }

    /// Writes `F^h[u]` at time `t` into `out`.
    pub fn apply_into(&self, u: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let n = self.grid.node_count();
        if u.len() != n || out.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: u.len().min(out.len()),
            });
        }
        let coeffs = self.coeffs(t)?;
        let dim = self.grid.dim();
        let dx = self.grid.dx();
        for (i, o) in out.iter_mut().enumerate() {
            let nb = &self.neighbors[i];
            let ui = u[i];
            *o = match &*coeffs {
                NodalCoeffs::Linear { a, b, src } => {
                    let mut lap = 0.0;
                    let mut adv = 0.0;
                    for axis in 0..dim {
                        let um = self.value(u, nb[2 * axis], t);
                        let up = self.value(u, nb[2 * axis + 1], t);
                        lap += (um + up - 2.0 * ui) / (dx[axis] * dx[axis]);
                        let bi = b[i][axis];
                        adv += if bi > 0.0 {
                            bi * (up - ui) / dx[axis]
                        } else {
                            bi * (ui - um) / dx[axis]
                        };
                    }
                    -a[i] * lap - adv - src[i]
                }
                NodalCoeffs::Eikonal { c, src } => {
                    let mut sq = 0.0;
                    for axis in 0..dim {
                        let um = self.value(u, nb[2 * axis], t);
                        let up = self.value(u, nb[2 * axis + 1], t);
                        let q = ((ui - um) / dx[axis]).max((ui - up) / dx[axis]).max(0.0);
                        sq += q * q;
                    }
                    c[i] * sq.sqrt() - src[i]
                }
                NodalCoeffs::Pucci { lambda, big_lambda } => {
                    let second = |k: usize, len2: f64| {
                        (self.value(u, nb[k], t) + self.value(u, nb[k + 1], t) - 2.0 * ui) / len2
                    };
                    if dim == 1 {
                        -pucci_weight(second(0, dx[0] * dx[0]), *lambda, *big_lambda)
                    } else {
                        let diag2 = dx[0] * dx[0] + dx[1] * dx[1];
                        let d = [
                            second(0, dx[0] * dx[0]),
                            second(2, dx[1] * dx[1]),
                            second(4, diag2),
                            second(6, diag2),
                        ];
                        let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
                        -(pucci_weight(hi, *lambda, *big_lambda)
                            + pucci_weight(lo, *lambda, *big_lambda))
                    }
                }
            };
        }
        Ok(())
    }

    pub fn apply(&self, u: &GridField, t: f64) -> Result<GridField> {
        let mut out = vec![0.0; self.grid.node_count()];
        self.apply_into(u.values(), t, &mut out)?;
        GridField::new(self.grid.clone(), out)
    }

    /// Upper bound on `∂F^h[u](x_i)/∂u(x_i)` over all nodes and states.
    pub fn diagonal_bound(&self, t: f64) -> Result<f64> {
        let dx = self.grid.dx();
        let inv2: f64 = dx.iter().map(|d| 1.0 / (d * d)).sum();
        let coeffs = self.coeffs(t)?;
        Ok(match &*coeffs {
            NodalCoeffs::Linear { a, b, .. } => a
                .iter()
                .zip(b)
                .map(|(ai, bi)| {
                    2.0 * ai * inv2 + bi.iter().zip(dx).map(|(v, d)| v.abs() / d).sum::<f64>()
                })
                .fold(0.0, f64::max),
            NodalCoeffs::Eikonal { c, .. } => c.iter().fold(0.0f64, |m, v| m.max(*v)) * inv2.sqrt(),
            NodalCoeffs::Pucci { big_lambda, .. } => {
                let min_dx = dx.iter().copied().fold(f64::INFINITY, f64::min);
                let per_eig = 2.0 / (min_dx * min_dx);
                if self.grid.dim() == 1 {
                    big_lambda * per_eig
                } else {
                    2.0 * big_lambda * per_eig
                }
            }
        })
    }

    /// Diffusivity of the constant-coefficient Laplacian used to precondition
    /// nonlinear resolvent iterations (zero: no preconditioning).
    pub fn preconditioner_weight(&self) -> f64 {
        match self.spec.kind() {
            OperatorKind::PucciMaximal { big_lambda, .. } => *big_lambda,
            _ => 0.0,
        }
    }

    /// The exact linear form of `F^h` at time `t`, available for linear
    /// diffusion only. Boundary values and the source fold into `constant`.
    pub fn linear_system(&self, t: f64) -> Result<Option<LinearStencil>> {
        let coeffs = self.coeffs(t)?;
        let NodalCoeffs::Linear { a, b, src } = &*coeffs else {
            return Ok(None);
        };
        let n = self.grid.node_count();
        let dim = self.grid.dim();
        let dx = self.grid.dx();
        let mut sys = LinearStencil {
            diag: vec![0.0; n],
            off: vec![Vec::with_capacity(2 * dim); n],
            constant: src.iter().map(|s| -s).collect(),
        };
        for i in 0..n {
            for axis in 0..dim {
                let d2 = dx[axis] * dx[axis];
                let bi = b[i][axis];
                // coefficients multiplying u_{i-1}, u_{i+1}
                let mut wm = -a[i] / d2;
                let mut wp = -a[i] / d2;
                sys.diag[i] += 2.0 * a[i] / d2 + bi.abs() / dx[axis];
                if bi > 0.0 {
                    wp -= bi / dx[axis];
                } else {
                    wm += bi / dx[axis];
                }
                for (k, w) in [(2 * axis, wm), (2 * axis + 1, wp)] {
                    if w == 0.0 {
                        continue;
                    }
                    match self.neighbors[i][k] {
                        Neighbor::Node(j) => sys.off[i].push((j, w)),
                        Neighbor::Ghost(x) => {
                            sys.constant[i] += w * self.grid.boundary_value(&x[..dim], t)
                        }
                    }
                }
            }
        }
        Ok(Some(sys))
    }

    /// `κ·(−Δ_h)` with homogeneous boundary data, for correction equations.
    pub fn laplacian_system(&self, kappa: f64) -> LinearStencil {
        let n = self.grid.node_count();
        let dim = self.grid.dim();
        let dx = self.grid.dx();
        let mut sys = LinearStencil {
            diag: vec![0.0; n],
            off: vec![Vec::with_capacity(2 * dim); n],
            constant: vec![0.0; n],
        };
        for i in 0..n {
            for axis in 0..dim {
                let w = kappa / (dx[axis] * dx[axis]);
                sys.diag[i] += 2.0 * w;
                for k in [2 * axis, 2 * axis + 1] {
                    if let Neighbor::Node(j) = self.neighbors[i][k] {
                        sys.off[i].push((j, -w));
                    }
                }
            }
        }
        sys
    }
}

impl Coefficient {
    /// Largest `|value|` over the grid nodes at time `t`.
    pub fn sup_on(&self, grid: &Grid, t: f64) -> f64 {
        self.sample(grid, t).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::Boundary;
    use super::*;

    fn heat() -> OperatorSpec {
        OperatorSpec::linear_diffusion(
            Coefficient::Constant(1.0),
            vec![],
            Coefficient::Constant(0.0),
        )
        .unwrap()
    }

    #[test]
    fn second_difference_exact_on_quadratics() {
        let grid =
            Arc::new(Grid::new_1d(20, -1.0, 2.0, Boundary::dirichlet(|x, _| x[0] * x[0])).unwrap());
        let op = heat().discretize(grid.clone()).unwrap();
        let u = GridField::from_fn(grid, |x| x[0] * x[0]).unwrap();
        let f = op.apply(&u, 0.0).unwrap();
        for v in f.values() {
            assert!((v + 2.0).abs() <= 1e-10, "{v}");
        }
    }

    #[test]
    fn eikonal_on_constants_is_minus_source() {
        let grid = Arc::new(Grid::new_1d(16, 0.0, 1.0, Boundary::Periodic).unwrap());
        let spec =
            OperatorSpec::eikonal(Coefficient::Constant(1.0), Coefficient::Constant(0.75)).unwrap();
        let op = spec.discretize(grid.clone()).unwrap();
        let f = op
            .apply(&GridField::constant(grid, 4.2).unwrap(), 0.0)
            .unwrap();
        assert!(f.values().iter().all(|&v| v == -0.75));
    }

    #[test]
    fn eikonal_dirichlet_requires_values() {
        let grid = Arc::new(Grid::new_1d(16, 0.0, 1.0, Boundary::Dirichlet(None)).unwrap());
        let spec =
            OperatorSpec::eikonal(Coefficient::Constant(1.0), Coefficient::Constant(0.0)).unwrap();
        assert!(matches!(spec.discretize(grid), Err(Error::Config(_))));
    }

    #[test]
    fn negative_diffusivity_rejected() {
        let grid = Arc::new(Grid::new_1d(8, 0.0, 1.0, Boundary::Periodic).unwrap());
        let spec = OperatorSpec::linear_diffusion(
            Coefficient::analytic("dip", |x, _| x[0] - 0.5),
            vec![],
            Coefficient::Constant(0.0),
        )
        .unwrap();
        assert!(spec.discretize(grid).is_err());
    }

    #[test]
    fn linear_system_matches_apply() {
        let grid = Arc::new(
            Grid::new_2d(
                6,
                [0.0, 0.0],
                [1.0, 1.0],
                Boundary::dirichlet(|x, t| x[0] - x[1] + t),
            )
            .unwrap(),
        );
        let spec = OperatorSpec::linear_diffusion(
            Coefficient::analytic("a", |x, _| 1.0 + x[0]),
            vec![
                Coefficient::analytic("bx", |x, _| x[1] - 0.5),
                Coefficient::Constant(-0.3),
            ],
            Coefficient::analytic("s", |x, _| x[0] * x[1]),
        )
        .unwrap();
        let op = spec.discretize(grid.clone()).unwrap();
        let u = GridField::from_fn(grid.clone(), |x| (3.0 * x[0]).sin() * x[1]).unwrap();
        let direct = op.apply(&u, 0.25).unwrap();
        let sys = op.linear_system(0.25).unwrap().unwrap();
        let mut via = vec![0.0; grid.node_count()];
        sys.apply(u.values(), &mut via);
        for (a, b) in direct.values().iter().zip(&via) {
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn pucci_2d_exact_on_axis_aligned_quadratic() {
        let grid = Arc::new(
            Grid::new_2d(
                9,
                [-1.0, -1.0],
                [1.0, 1.0],
                Boundary::dirichlet(|x, _| 0.5 * (x[0] * x[0] - 3.0 * x[1] * x[1])),
            )
            .unwrap(),
        );
        let spec = OperatorSpec::pucci_maximal(1.0, 2.0).unwrap();
        let op = spec.discretize(grid.clone()).unwrap();
        let u = GridField::from_fn(grid, |x| 0.5 * (x[0] * x[0] - 3.0 * x[1] * x[1])).unwrap();
        let exact = spec.eval_f(
            &[0.0, 0.0],
            0.0,
            &[0.0, 0.0],
            &super::super::SymMat::new_2d(1.0, 0.0, -3.0),
        );
        for v in op.apply(&u, 0.0).unwrap().values() {
            assert!((v - exact).abs() < 1e-10);
        }
    }
}
