//! The per-level elliptic problem `μ(u − g) + F^h[u] = 0`.
//!
//! Linear diffusion is solved directly by banded elimination. Every other
//! operator, and linear diffusion whose factorisation meets a vanishing
//! pivot, goes through a damped fixed-point iteration
//!
//! ```text
//! U ← U − τ · P⁻¹ (μ(U − g) + F^h[U]),   P = μI + κ(−Δ_h),
//! ```
//!
//! with `τ` halved (and the step rejected) whenever the sup-norm residual
//! grows. `κ = 0` for the eikonal operator, where `P⁻¹` is just `1/μ`; the
//! Pucci operator uses `κ = Λ`.

mod banded;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{GridField, StencilOperator};

use banded::BandedLu;

pub const DEFAULT_LINEAR_TOL: f64 = 1e-10;
pub const DEFAULT_NONLINEAR_TOL: f64 = 1e-8;
const PIVOT_FLOOR: f64 = 1e-14;
const MAX_REFINEMENTS: usize = 3;
const MIN_DAMPING: f64 = 1e-12;

/// One instance of the resolvent equation.
#[derive(Debug, Clone)]
pub struct ResolventProblem {
    pub mu: f64,
    /// Memory term: the equation is `μ(u − g) + F^h[u] = 0`.
    pub g: GridField,
    pub stencil: Arc<StencilOperator>,
    /// Time at which `F` is frozen.
    pub t: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl ResolventProblem {
    /// A problem with the default tolerance for the operator kind and
    /// `max_iters = 10·n²` (`n` nodes per axis).
    pub fn new(stencil: Arc<StencilOperator>, mu: f64, g: GridField, t: f64) -> Result<Self> {
        let tol = default_tol(&stencil);
        let n = stencil.grid().n();
        let prob = ResolventProblem {
            mu,
            g,
            stencil,
            t,
            tol,
            max_iters: 10 * n * n,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.g.values().len() != self.stencil.grid().node_count() {
            return Err(Error::Shape {
                expected: self.stencil.grid().node_count(),
                got: self.g.values().len(),
            });
        }
        Ok(())
    }
}

pub fn default_tol(stencil: &StencilOperator) -> f64 {
    if stencil.spec().is_linear() {
        DEFAULT_LINEAR_TOL
    } else {
        DEFAULT_NONLINEAR_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Sup norm of `μ(U − g) + F^h[U]` at the returned `U`.
    pub final_residual: f64,
    pub converged: bool,
}

/// Sup over nodes of `|μ(U − g) + F^h[U]|`.
pub fn residual(prob: &ResolventProblem, u: &GridField) -> Result<f64> {
    let mut buf = vec![0.0; u.values().len()];
    residual_into(
        &prob.stencil,
        prob.mu,
        prob.g.values(),
        u.values(),
        prob.t,
        &mut buf,
    )
}

fn residual_into(
    stencil: &StencilOperator,
    mu: f64,
    g: &[f64],
    u: &[f64],
    t: f64,
    out: &mut [f64],
) -> Result<f64> {
    stencil.apply_into(u, t, out)?;
    let mut sup: f64 = 0.0;
    for ((r, &ui), &gi) in out.iter_mut().zip(u).zip(g) {
        *r += mu * (ui - gi);
        sup = sup.max(r.abs());
    }
    Ok(sup)
}

/// Solves one resolvent problem from the initial guess `init`.
pub fn solve_resolvent(
    prob: &ResolventProblem,
    init: &GridField,
) -> Result<(GridField, SolveReport)> {
    let mut solver = ResolventSolver::new(prob.stencil.clone(), prob.mu)?;
    solver.solve(prob, init)
}

/// Reusable solver for a fixed stencil and `μ`; caches factorisations
/// across calls (per time level when the coefficients depend on time).
#[derive(Debug)]
pub struct ResolventSolver {
    stencil: Arc<StencilOperator>,
    mu: f64,
    direct: Option<(f64, BandedLu)>,
    direct_failed: bool,
    preconditioner: Option<BandedLu>,
}

impl ResolventSolver {
    pub fn new(stencil: Arc<StencilOperator>, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {mu}"
            )));
        }
        Ok(ResolventSolver {
            stencil,
            mu,
            direct: None,
            direct_failed: false,
            preconditioner: None,
        })
    }

    pub fn solve(
        &mut self,
        prob: &ResolventProblem,
        init: &GridField,
    ) -> Result<(GridField, SolveReport)> {
        prob.validate()?;
        if !Arc::ptr_eq(&prob.stencil, &self.stencil) || prob.mu != self.mu {
            return Err(Error::InvalidParameter(
                "problem does not match the solver's stencil and mu".into(),
            ));
        }
        if init.values().len() != prob.g.values().len() {
            return Err(Error::Shape {
                expected: prob.g.values().len(),
                got: init.values().len(),
            });
        }
        if self.stencil.spec().is_linear() && !self.direct_failed {
            if let Some(out) = self.solve_direct(prob)? {
                return Ok(out);
            }
        }
        self.solve_iterative(prob, init)
    }

    fn solve_direct(
        &mut self,
        prob: &ResolventProblem,
    ) -> Result<Option<(GridField, SolveReport)>> {
        let sys = self
            .stencil
            .linear_system(prob.t)?
            .expect("linear stencil exposes its system");
        let key = if self.stencil.spec().time_dependent() {
            prob.t
        } else {
            0.0
        };
        let cached = matches!(&self.direct, Some((k, _)) if *k == key);
        if !cached {
            match BandedLu::factor(self.stencil.grid(), &sys, self.mu, PIVOT_FLOOR * self.mu) {
                Ok(lu) => self.direct = Some((key, lu)),
                Err(_) => {
                    self.direct_failed = true;
                    return Ok(None);
                }
            }
        }
        let lu = &self.direct.as_ref().expect("factorisation cached").1;
        let g = prob.g.values();
        let rhs: Vec<f64> = g
            .iter()
            .zip(&sys.constant)
            .map(|(gi, ci)| self.mu * gi - ci)
            .collect();
        let mut u = lu.solve(&rhs);
        let mut r = vec![0.0; u.len()];
        let mut res = residual_into(&self.stencil, self.mu, g, &u, prob.t, &mut r)?;
        let mut iterations = 1;
        while res > prob.tol && iterations <= MAX_REFINEMENTS {
            let correction = lu.solve(&r);
            for (ui, ci) in u.iter_mut().zip(&correction) {
                *ui -= ci;
            }
            res = residual_into(&self.stencil, self.mu, g, &u, prob.t, &mut r)?;
            iterations += 1;
        }
        if res > prob.tol {
            return Err(Error::NotConverged {
                what: "direct resolvent solve",
                iterations,
                residual: res,
                tol: prob.tol,
            });
        }
        let field = GridField::new(self.stencil.grid().clone(), u)?;
        Ok(Some((
            field,
            SolveReport {
                iterations,
                final_residual: res,
                converged: true,
            },
        )))
    }

    fn solve_iterative(
        &mut self,
        prob: &ResolventProblem,
        init: &GridField,
    ) -> Result<(GridField, SolveReport)> {
        let kappa = self.stencil.preconditioner_weight();
        let mut tau = if kappa > 0.0 {
            if self.preconditioner.is_none() {
                let sys = self.stencil.laplacian_system(kappa);
                let lu =
                    BandedLu::factor(self.stencil.grid(), &sys, self.mu, PIVOT_FLOOR * self.mu)
                        .map_err(|p| {
                            Error::InvalidParameter(format!(
                                "preconditioner pivot {:e} at row {}",
                                p.pivot, p.row
                            ))
                        })?;
                self.preconditioner = Some(lu);
            }
            1.0
        } else {
            let k = self.stencil.diagonal_bound(prob.t)?;
            (self.mu / (self.mu + k)).min(1.0)
        };
        let g = prob.g.values();
        let n = g.len();
        let mut u = init.values().to_vec();
        let mut r = vec![0.0; n];
        let mut res = residual_into(&self.stencil, self.mu, g, &u, prob.t, &mut r)?;
        let mut trial = vec![0.0; n];
        let mut r_trial = vec![0.0; n];
        let mut iterations = 0;
        while res > prob.tol {
            if iterations >= prob.max_iters {
                return Err(Error::NotConverged {
                    what: "resolvent iteration",
                    iterations,
                    residual: res,
                    tol: prob.tol,
                });
            }
            iterations += 1;
            let direction = match &self.preconditioner {
                Some(lu) if kappa > 0.0 => lu.solve(&r),
                _ => r.iter().map(|ri| ri / self.mu).collect(),
            };
            for ((ti, ui), di) in trial.iter_mut().zip(&u).zip(&direction) {
                *ti = ui - tau * di;
            }
            let res_trial = residual_into(&self.stencil, self.mu, g, &trial, prob.t, &mut r_trial)?;
            if res_trial > res {
                tau *= 0.5;
                if tau < MIN_DAMPING {
                    return Err(Error::NotConverged {
                        what: "resolvent iteration (damping exhausted)",
                        iterations,
                        residual: res,
                        tol: prob.tol,
                    });
                }
                continue;
            }
            std::mem::swap(&mut u, &mut trial);
            std::mem::swap(&mut r, &mut r_trial);
            res = res_trial;
        }
        let field = GridField::new(self.stencil.grid().clone(), u)?;
        Ok((
            field,
            SolveReport {
                iterations,
                final_residual: res,
                converged: true,
            },
        ))
    }
}
