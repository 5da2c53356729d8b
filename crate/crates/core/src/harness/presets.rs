use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::caputo::{discrete_caputo_with, FractionalParams, PointHistory, WeightTable};
use crate::error::{Error, Result};
use crate::operators::{Boundary, BoundaryFn, Coefficient, Grid, GridField, OperatorSpec, SymMat};
use crate::special::{gamma, mittag_leffler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    FracHeat,
    ConstSource,
    EikonalConst,
    PucciRadial,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::FracHeat,
        PresetName::ConstSource,
        PresetName::EikonalConst,
        PresetName::PucciRadial,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::FracHeat => "frac_heat",
            PresetName::ConstSource => "const_source",
            PresetName::EikonalConst => "eikonal_const",
            PresetName::PucciRadial => "pucci_radial",
        }
    }

    /// Node count per axis used when none is given.
    pub fn default_nx(&self, dim: usize) -> usize {
        match (self, dim) {
            (PresetName::ConstSource, _) => 4,
            (_, 2) => 32,
            (PresetName::FracHeat, _) => 256,
            _ => 128,
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown problem '{s}' (expected frac_heat, const_source, eikonal_const or pucci_radial)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    Dirichlet,
}

impl BoundaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::Periodic => "periodic",
            BoundaryKind::Dirichlet => "dirichlet",
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(BoundaryKind::Periodic),
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            _ => Err(Error::Config(format!(
                "unknown boundary '{s}' (expected periodic or dirichlet)"
            ))),
        }
    }
}

pub type SpaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ExactFn = Arc<dyn Fn(&[f64], f64) -> Result<f64> + Send + Sync>;
/// Exact gradient and Hessian, for residual checks.
pub type ExactDerivFn = Arc<dyn Fn(&[f64], f64) -> Result<([f64; 2], SymMat)> + Send + Sync>;

/// `sin(kx) · E_α(−k² t^α)`, the separable mode solution of the fractional
/// heat equation. `α = 1` gives the classical `e^{−k² t}` decay.
pub fn exact_frac_heat(alpha: f64, x: f64, t: f64, k: f64) -> Result<f64> {
    Ok((k * x).sin() * heat_amplitude(alpha, k * k, t)?)
}

fn heat_amplitude(alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(
            "exact_frac_heat",
            format!("t must be >= 0, got {t}"),
        ));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    mittag_leffler(alpha, -lambda * t.powf(alpha))
}

/// `t^α / Γ(1 + α)`, the solution of `∂_t^α u = 1`, `u(0) = 0`.
pub fn exact_const_source(alpha: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    t.powf(alpha) / gamma(1.0 + alpha).unwrap_or(f64::NAN)
}

/// A ready-to-run problem: operator, initial datum, box and, where one is
/// known, the exact solution.
#[derive(Clone)]
pub struct ProblemPreset {
    pub name: PresetName,
    pub alpha: f64,
    pub dim: usize,
    pub boundary: BoundaryKind,
    pub spec: OperatorSpec,
    pub u0: SpaceFn,
    pub exact: Option<ExactFn>,
    pub exact_derivs: Option<ExactDerivFn>,
    pub lo: f64,
    pub hi: f64,
    boundary_fn: Option<BoundaryFn>,
}

impl fmt::Debug for ProblemPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemPreset")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("dim", &self.dim)
            .field("boundary", &self.boundary)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemPreset {
    pub fn new(name: PresetName, alpha: f64, dim: usize, boundary: BoundaryKind) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        let d = dim as f64;
        let preset = match name {
            PresetName::FracHeat => {
                let lambda = d * PI * PI;
                let mode = move |x: &[f64]| x.iter().map(|xi| (PI * xi).sin()).product::<f64>();
                let exact: ExactFn =
                    Arc::new(move |x: &[f64], t| Ok(mode(x) * heat_amplitude(alpha, lambda, t)?));
                let derivs: ExactDerivFn = Arc::new(move |x: &[f64], t| {
                    let amp = heat_amplitude(alpha, lambda, t)?;
                    let (s, c): (Vec<f64>, Vec<f64>) = x
                        .iter()
                        .map(|xi| ((PI * xi).sin(), (PI * xi).cos()))
                        .unzip();
                    Ok(if s.len() == 1 {
                        (
                            [PI * c[0] * amp, 0.0],
                            SymMat::new_1d(-PI * PI * s[0] * amp),
                        )
                    } else {
                        (
                            [PI * c[0] * s[1] * amp, PI * s[0] * c[1] * amp],
                            SymMat::new_2d(
                                -PI * PI * s[0] * s[1] * amp,
                                PI * PI * c[0] * c[1] * amp,
                                -PI * PI * s[0] * s[1] * amp,
                            ),
                        )
                    })
                });
                ProblemPreset {
                    name,
                    alpha,
                    dim,
                    boundary,
                    spec: OperatorSpec::linear_diffusion(
                        Coefficient::Constant(1.0),
                        vec![],
                        Coefficient::Constant(0.0),
                    )?,
                    u0: Arc::new(mode),
                    exact: Some(exact),
                    exact_derivs: Some(derivs),
                    lo: 0.0,
                    hi: 2.0,
                    boundary_fn: None,
                }
            }
            PresetName::ConstSource => ProblemPreset {
                name,
                alpha,
                dim,
                boundary,
                spec: OperatorSpec::linear_diffusion(
                    Coefficient::Constant(0.0),
                    vec![],
                    Coefficient::Constant(1.0),
                )?,
                u0: Arc::new(|_| 0.0),
                exact: Some(Arc::new(move |_, t| Ok(exact_const_source(alpha, t)))),
                exact_derivs: Some(Arc::new(move |_, _| Ok(([0.0; 2], SymMat::zero(dim))))),
                lo: 0.0,
                hi: 1.0,
                boundary_fn: Some(Arc::new(move |_, t| exact_const_source(alpha, t))),
            },
            PresetName::EikonalConst => {
                let u0 = |x: &[f64]| x.iter().map(|xi| (PI * xi).cos()).product::<f64>();
                ProblemPreset {
                    name,
                    alpha,
                    dim,
                    boundary,
                    spec: OperatorSpec::eikonal(
                        Coefficient::Constant(1.0),
                        Coefficient::Constant(0.0),
                    )?,
                    u0: Arc::new(u0),
                    exact: None,
                    exact_derivs: None,
                    lo: 0.0,
                    hi: 2.0,
                    boundary_fn: Some(Arc::new(move |x, _| u0(x))),
                }
            }
            PresetName::PucciRadial => ProblemPreset {
                name,
                alpha,
                dim,
                boundary,
                spec: OperatorSpec::pucci_maximal(1.0, 2.0)?,
                u0: Arc::new(|x: &[f64]| {
                    let r2: f64 = x.iter().map(|xi| (xi - 1.0) * (xi - 1.0)).sum();
                    (-8.0 * r2).exp()
                }),
                exact: None,
                exact_derivs: None,
                lo: 0.0,
                hi: 2.0,
                boundary_fn: None,
            },
        };
        Ok(preset)
    }

    pub fn grid(&self, n: usize) -> Result<Arc<Grid>> {
        let boundary = match self.boundary {
            BoundaryKind::Periodic => Boundary::Periodic,
            BoundaryKind::Dirichlet => Boundary::Dirichlet(self.boundary_fn.clone()),
        };
        let lo = [self.lo; 2];
        let hi = [self.hi; 2];
        Ok(Arc::new(Grid::new(
            self.dim,
            n,
            &lo[..self.dim],
            &hi[..self.dim],
            boundary,
        )?))
    }

    pub fn initial(&self, grid: &Arc<Grid>) -> Result<GridField> {
        let u0 = self.u0.clone();
        GridField::from_fn(grid.clone(), move |x| u0(x))
    }

    /// The exact solution at every node of `grid` at time `t`.
    pub fn exact_on(&self, grid: &Arc<Grid>, t: f64) -> Result<Option<GridField>> {
        let Some(exact) = &self.exact else {
            return Ok(None);
        };
        let dim = grid.dim();
        let values = (0..grid.node_count())
            .map(|i| exact(&grid.coords(i)[..dim], t))
            .collect::<Result<Vec<_>>>()?;
        GridField::new(grid.clone(), values).map(Some)
    }

    /// Largest `|∂^{α,h} u(x, t) + F(x, t, Du, D²u)|` for the exact solution
    /// over the given points and times (each a multiple of `h`).
    pub fn exact_residual(
        &self,
        h: f64,
        points: &[[f64; 2]],
        times: &[f64],
    ) -> Result<Option<f64>> {
        let (Some(exact), Some(derivs)) = (&self.exact, &self.exact_derivs) else {
            return Ok(None);
        };
        let params = FractionalParams::new(self.alpha, h)?;
        let max_m = times
            .iter()
            .map(|t| (t / h).round() as usize)
            .max()
            .unwrap_or(1)
            .max(1);
        let table = WeightTable::new(self.alpha, max_m)?;
        let mut worst: f64 = 0.0;
        for x in points {
            let x = &x[..self.dim];
            for &t in times {
                let m = (t / h).round() as usize;
                if m == 0 || ((m as f64) * h - t).abs() > 1e-12 * t.max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "residual time {t} is not a positive multiple of h = {h}"
                    )));
                }
                let samples = (0..=m)
                    .map(|k| exact(x, k as f64 * h))
                    .collect::<Result<Vec<_>>>()?;
                let dc = discrete_caputo_with(&PointHistory::new(samples)?, &params, &table)?;
                let (p, hess) = derivs(x, t)?;
                let r = dc + self.spec.eval_f(x, t, &p[..self.dim], &hess);
                worst = worst.max(r.abs());
            }
        }
        Ok(Some(worst))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solution_examples() {
        assert_eq!(
            exact_frac_heat(0.5, 0.3, 0.0, PI).unwrap(),
            (0.3 * PI).sin()
        );
        let v = exact_frac_heat(1.0, 0.5, 0.1, PI).unwrap();
        assert!((v - (-PI * PI * 0.1).exp()).abs() < 1e-15, "{v}");
        let amp = exact_frac_heat(0.5, 0.5, 0.25, PI).unwrap();
        assert!((amp - 0.11211287583542981).abs() < 1e-10, "{amp}");
        assert_eq!(exact_const_source(0.5, 0.0), 0.0);
        assert!((exact_const_source(1.0, 2.0) - 2.0).abs() < 1e-14);
        assert!((exact_const_source(0.5, 1.0) - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-9);
        assert!(exact_frac_heat(0.5, 0.0, -1.0, PI).is_err());
    }

    #[test]
    fn names_round_trip() {
        for p in PresetName::ALL {
            assert_eq!(p.as_str().parse::<PresetName>().unwrap(), p);
        }
        assert!("heat".parse::<PresetName>().is_err());
        assert_eq!(
            "dirichlet".parse::<BoundaryKind>().unwrap(),
            BoundaryKind::Dirichlet
        );
        assert!("neumann".parse::<BoundaryKind>().is_err());
    }

    #[test]
    fn exact_residuals_are_small() {
        let h = 2f64.powi(-8);
        let pts = [[0.3, 0.7], [0.5, 1.1], [1.7, 0.2]];
        for a in [0.3, 0.5, 0.7] {
            let p =
                ProblemPreset::new(PresetName::ConstSource, a, 1, BoundaryKind::Periodic).unwrap();
            let r = p
                .exact_residual(h, &pts, &[0.25, 0.5, 1.0])
                .unwrap()
                .unwrap();
            assert!(r <= 1e-3, "const_source alpha={a}: {r}");
            for dim in [1, 2] {
                let p = ProblemPreset::new(PresetName::FracHeat, a, dim, BoundaryKind::Periodic)
                    .unwrap();
                let r = p.exact_residual(h, &pts, &[0.5, 1.0]).unwrap().unwrap();
                assert!(r <= 1e-3, "frac_heat alpha={a} dim={dim}: {r}");
            }
        }
        let p =
            ProblemPreset::new(PresetName::PucciRadial, 0.5, 2, BoundaryKind::Dirichlet).unwrap();
        assert!(p.exact_residual(h, &pts, &[0.25]).unwrap().is_none());
    }

    #[test]
    fn grids_and_initial_data() {
        for name in PresetName::ALL {
            for dim in [1, 2] {
                for b in [BoundaryKind::Periodic, BoundaryKind::Dirichlet] {
                    let p = ProblemPreset::new(name, 0.5, dim, b).unwrap();
                    let g = p.grid(name.default_nx(dim)).unwrap();
                    let u0 = p.initial(&g).unwrap();
                    assert_eq!(u0.values().len(), g.node_count());
                    assert!(p.spec.discretize(g).is_ok());
                }
            }
        }
    }
}
