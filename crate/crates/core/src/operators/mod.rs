//! The nonlinear operator `F(x, t, p, X)` and its monotone discretisation.
//!
//! Three degenerate elliptic families are built in:
//!
//! - linear diffusion `F = −a(x)·tr X − b(x)·p − s(x)` with `a ≥ 0`,
//! - eikonal `F = c(x)|p| − s(x)` with `c ≥ 0`,
//! - the maximal Pucci operator `F = −𝒫⁺(X)`, where
//!   `𝒫⁺(X) = Λ·Σ_{e>0} e + λ·Σ_{e<0} e` over the eigenvalues `e` of `X`.

mod grid;
mod stencil;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

pub use grid::{Boundary, BoundaryFn, Grid, GridField, Neighbor};
pub use stencil::{LinearStencil, StencilOperator};

use crate::error::{Error, Result};

/// A scalar coefficient field `x, t ↦ value`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Analytic {
        name: String,
        func: BoundaryFn,
    },
    /// Per-node values on a given grid; off-node points take the value of the
    /// nearest node.
    Nodal {
        grid: Arc<Grid>,
        values: Arc<[f64]>,
    },
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Analytic { name, .. } => write!(f, "Analytic({name})"),
            Coefficient::Nodal { values, .. } => write!(f, "Nodal({} values)", values.len()),
        }
    }
}

impl Coefficient {
    pub fn analytic(
        name: impl Into<String>,
        func: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Coefficient::Analytic {
            name: name.into(),
            func: Arc::new(func),
        }
    }

    pub fn nodal(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Shape {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        Ok(Coefficient::Nodal {
            grid,
            values: values.into(),
        })
    }

    /// Reads one value per line, node-major order.
    pub fn from_csv(path: impl AsRef<Path>, grid: Arc<Grid>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .from_path(path)?;
        let mut values = Vec::with_capacity(grid.node_count());
        for record in reader.records() {
            let record = record?;
            let field = record
                .get(0)
                .ok_or_else(|| Error::Config("empty line in coefficient file".into()))?;
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("not a number: {field:?}")))?;
            values.push(v);
        }
        Coefficient::nodal(grid, values)
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Analytic { func, .. } => func(x, t),
            Coefficient::Nodal { grid, values } => values[grid.nearest_node(x)],
        }
    }

    pub(crate) fn sample(&self, grid: &Grid, t: f64) -> Vec<f64> {
        (0..grid.node_count())
            .map(|i| self.value(&grid.coords(i)[..grid.dim()], t))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Constant(c) if *c == 0.0)
    }
}

/// A real symmetric 1×1 or 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    dim: usize,
    xx: f64,
    xy: f64,
    yy: f64,
}

impl SymMat {
    pub fn new_1d(xx: f64) -> Self {
        SymMat {
            dim: 1,
            xx,
            xy: 0.0,
            yy: 0.0,
        }
    }

    pub fn new_2d(xx: f64, xy: f64, yy: f64) -> Self {
        SymMat { dim: 2, xx, xy, yy }
    }

    pub fn zero(dim: usize) -> Self {
        SymMat {
            dim,
            xx: 0.0,
            xy: 0.0,
            yy: 0.0,
        }
    }

    pub fn diag(dim: usize, v: f64) -> Self {
        if dim == 1 {
            SymMat::new_1d(v)
        } else {
            SymMat::new_2d(v, 0.0, v)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> (f64, f64, f64) {
        (self.xx, self.xy, self.yy)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy).sqrt()
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        SymMat {
            dim: self.dim,
            xx: self.xx + other.xx,
            xy: self.xy + other.xy,
            yy: self.yy + other.yy,
        }
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        SymMat {
            dim: self.dim,
            xx: self.xx - other.xx,
            xy: self.xy - other.xy,
            yy: self.yy - other.yy,
        }
    }

    /// `PᵀP` for a 2×2 (or 1×1) matrix `P` given row-major; always ≥ 0.
    pub fn gram(dim: usize, p: [f64; 4]) -> SymMat {
        if dim == 1 {
            return SymMat::new_1d(p[0] * p[0]);
        }
        let [a, b, c, d] = p;
        SymMat::new_2d(a * a + c * c, a * b + c * d, b * b + d * d)
    }

    /// Eigenvalues in increasing order (one entry used in 1D).
    pub fn eigenvalues(&self) -> [f64; 2] {
        if self.dim == 1 {
            return [self.xx, self.xx];
        }
        let mean = 0.5 * (self.xx + self.yy);
        let rad = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        [mean - rad, mean + rad]
    }
}

/// `Λ·max(e, 0) + λ·min(e, 0)`, the Pucci weight of a single eigenvalue.
pub(crate) fn pucci_weight(e: f64, lambda: f64, big_lambda: f64) -> f64 {
    if e > 0.0 {
        big_lambda * e
    } else {
        lambda * e
    }
}

#[derive(Debug, Clone)]
pub enum OperatorKind {
    /// `F = −a(x)·tr X − b(x)·p − src(x)`; `drift` holds one component per
    /// axis or is empty for no drift.
    LinearDiffusion {
        diffusivity: Coefficient,
        drift: Vec<Coefficient>,
        source: Coefficient,
    },
    /// `F = c(x)|p| − src(x)`.
    Eikonal {
        speed: Coefficient,
        source: Coefficient,
    },
    /// `F = −𝒫⁺(X)` with ellipticity bounds `0 < lambda ≤ big_lambda`.
    PucciMaximal { lambda: f64, big_lambda: f64 },
}

/// `F` together with whether its coefficients depend on time.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    kind: OperatorKind,
    time_dependent: bool,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, time_dependent: bool) -> Result<Self> {
        if let OperatorKind::PucciMaximal { lambda, big_lambda } = kind {
            if !(lambda > 0.0 && big_lambda >= lambda && big_lambda.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "Pucci bounds need 0 < lambda <= Lambda, got ({lambda}, {big_lambda})"
                )));
            }
        }
        if let OperatorKind::LinearDiffusion { drift, .. } = &kind {
            if drift.len() > 2 {
                return Err(Error::InvalidParameter(
                    "drift has more than two components".into(),
                ));
            }
        }
        Ok(OperatorSpec {
            kind,
            time_dependent,
        })
    }

    pub fn linear_diffusion(
        diffusivity: Coefficient,
        drift: Vec<Coefficient>,
        source: Coefficient,
    ) -> Result<Self> {
        OperatorSpec::new(
            OperatorKind::LinearDiffusion {
                diffusivity,
                drift,
                source,
            },
            false,
        )
    }

    /// `F ≡ 0`.
    pub fn zero() -> Self {
        OperatorSpec {
            kind: OperatorKind::LinearDiffusion {
                diffusivity: Coefficient::Constant(0.0),
                drift: Vec::new(),
                source: Coefficient::Constant(0.0),
            },
            time_dependent: false,
        }
    }

    pub fn eikonal(speed: Coefficient, source: Coefficient) -> Result<Self> {
        OperatorSpec::new(OperatorKind::Eikonal { speed, source }, false)
    }

    pub fn pucci_maximal(lambda: f64, big_lambda: f64) -> Result<Self> {
        OperatorSpec::new(OperatorKind::PucciMaximal { lambda, big_lambda }, false)
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn with_time_dependence(mut self, time_dependent: bool) -> Self {
        self.time_dependent = time_dependent;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            OperatorKind::LinearDiffusion { .. } => "linear_diffusion",
            OperatorKind::Eikonal { .. } => "eikonal",
            OperatorKind::PucciMaximal { .. } => "pucci_maximal",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, OperatorKind::LinearDiffusion { .. })
    }

    /// Pointwise value `F(x, t, p, X)`.
    pub fn eval_f(&self, x: &[f64], t: f64, p: &[f64], hess: &SymMat) -> f64 {
        match &self.kind {
            OperatorKind::LinearDiffusion {
                diffusivity,
                drift,
                source,
            } => {
                let transport: f64 = drift.iter().zip(p).map(|(b, pi)| b.value(x, t) * pi).sum();
                -diffusivity.value(x, t) * hess.trace() - transport - source.value(x, t)
            }
            OperatorKind::Eikonal { speed, source } => {
                let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                speed.value(x, t) * norm - source.value(x, t)
            }
            OperatorKind::PucciMaximal { lambda, big_lambda } => {
                let e = hess.eigenvalues();
                let used = if hess.dim() == 1 { &e[..1] } else { &e[..] };
                -used
                    .iter()
                    .map(|&v| pucci_weight(v, *lambda, *big_lambda))
                    .sum::<f64>()
            }
        }
    }

    /// `F(x, t, 0, 0)`, the part of `F` that survives on constants.
    pub fn eval_at_rest(&self, x: &[f64], t: f64, dim: usize) -> f64 {
        self.eval_f(x, t, &[0.0; 2][..dim], &SymMat::zero(dim))
    }

    /// Lipschitz constant in `(p, X)` over the grid nodes at time `t`:
    /// `max(sup a, sup |b|, sup c, Λ) · dim`.
    pub fn lipschitz_bound(&self, grid: &Grid, t: f64) -> f64 {
        let sup = |c: &Coefficient| c.sample(grid, t).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let base = match &self.kind {
            OperatorKind::LinearDiffusion {
                diffusivity, drift, ..
            } => drift.iter().map(sup).fold(sup(diffusivity), f64::max),
            OperatorKind::Eikonal { speed, .. } => sup(speed),
            OperatorKind::PucciMaximal { big_lambda, .. } => *big_lambda,
        };
        base * grid.dim() as f64
    }

    pub fn discretize(&self, grid: Arc<Grid>) -> Result<StencilOperator> {
        StencilOperator::new(self.clone(), grid)
    }
}
