//! The time-stepping scheme.
//!
//! Level `m + 1` solves `μ(u − Σ_k C_{m+1,k} U_k) + F^h[u] = 0` with `F`
//! frozen at `t = (m+1)h`. Every level is stored, and `u^h(·, t)` is the
//! piecewise-constant extension `U_{⌊t/h⌋}`.

use std::sync::Arc;

use crate::caputo::{discrete_caputo_with, FractionalParams, PointHistory, WeightTable};
use crate::error::{Error, Result};
use crate::operators::{Grid, GridField, OperatorSpec, StencilOperator};
use crate::resolvent::{default_tol, ResolventProblem, ResolventSolver, SolveReport};

/// Slack added to the uniform bound before a level is rejected.
pub const BOUND_SLACK: f64 = 1e-8;
/// Allowed ordering defect, in multiples of the resolvent tolerance.
pub const ORDER_SLACK_FACTOR: f64 = 10.0;
const BARRIER_SLACK: f64 = 1e-12;

#[derive(Debug)]
pub struct SchemeState {
    params: FractionalParams,
    grid: Arc<Grid>,
    spec: OperatorSpec,
    stencil: Arc<StencilOperator>,
    solver: ResolventSolver,
    table: WeightTable,
    tol: f64,
    max_iters: Option<usize>,
    history: Vec<GridField>,
    reports: Vec<SolveReport>,
    memory_ops: u64,
    sup_u0: f64,
    rest_sup: f64,
    boundary_sup: f64,
    enforce_bound: bool,
}

impl SchemeState {
    /// Level 0 with `U_0 = u0`.
    pub fn new(
        spec: OperatorSpec,
        grid: Arc<Grid>,
        u0: GridField,
        params: FractionalParams,
    ) -> Result<Self> {
        if u0.grid().node_count() != grid.node_count() || u0.grid().dim() != grid.dim() {
            return Err(Error::Shape {
                expected: grid.node_count(),
                got: u0.values().len(),
            });
        }
        let u0 = GridField::new(grid.clone(), u0.into_values())?;
        let stencil = Arc::new(spec.discretize(grid.clone())?);
        let solver = ResolventSolver::new(stencil.clone(), params.mu())?;
        let tol = default_tol(&stencil);
        let mut state = SchemeState {
            params,
            grid,
            spec,
            stencil,
            solver,
            table: WeightTable::new(params.alpha(), 1)?,
            tol,
            max_iters: None,
            sup_u0: u0.sup_norm(),
            history: vec![u0],
            reports: Vec::new(),
            memory_ops: 0,
            rest_sup: 0.0,
            boundary_sup: 0.0,
            enforce_bound: true,
        };
        state.observe_data(0.0);
        Ok(state)
    }

    /// Overrides the resolvent tolerance.
    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {tol}"
            )));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = Some(max_iters);
        self
    }

    /// Turns the per-level uniform-bound assertion on or off.
    pub fn with_bound_check(mut self, enforce: bool) -> Self {
        self.enforce_bound = enforce;
        self
    }

    pub fn params(&self) -> &FractionalParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn level(&self) -> usize {
        self.history.len() - 1
    }

    pub fn history(&self) -> &[GridField] {
        &self.history
    }

    pub fn current(&self) -> &GridField {
        self.history.last().expect("history is never empty")
    }

    pub fn reports(&self) -> &[SolveReport] {
        &self.reports
    }

    /// Node-level multiply-adds spent on memory sums so far.
    pub fn memory_ops(&self) -> u64 {
        self.memory_ops
    }

    /// Running `sup |F(x, t, 0, 0)|` over the nodes and the levels reached.
    pub fn m0(&self) -> f64 {
        self.rest_sup
    }

    /// `sup |u₀| + Γ(2−α) M₀ (mh)^α / ((1−α)α)`, where on Dirichlet boxes
    /// `sup |u₀|` also covers the boundary data seen so far.
    pub fn uniform_bound(&self, m: usize) -> f64 {
        let a = self.params.alpha();
        let t = m as f64 * self.params.h();
        self.sup_u0.max(self.boundary_sup)
            + self.params.gamma2ma() * self.rest_sup * t.powf(a) / ((1.0 - a) * a)
    }

    fn observe_data(&mut self, t: f64) {
        let dim = self.grid.dim();
        for i in 0..self.grid.node_count() {
            let x = self.grid.coords(i);
            let v = self.spec.eval_at_rest(&x[..dim], t, dim).abs();
            self.rest_sup = self.rest_sup.max(v);
        }
        for x in self.grid.ghost_points() {
            let v = self.grid.boundary_value(&x[..dim], t).abs();
            self.boundary_sup = self.boundary_sup.max(v);
        }
    }

    /// `Σ_{k=0}^{m} C_{m+1,k} U_k`, the memory term of the next level.
    pub fn assemble_memory(&mut self) -> Result<GridField> {
        let m = self.level();
        self.table.extend_to(m + 1)?;
        let row = self.table.row(m + 1)?;
        let mut g = vec![0.0; self.grid.node_count()];
        for (c, field) in row.coeffs().iter().zip(&self.history) {
            for (gi, ui) in g.iter_mut().zip(field.values()) {
                *gi += c * ui;
            }
        }
        self.memory_ops += ((m + 1) * g.len()) as u64;
        GridField::new(self.grid.clone(), g)
    }

    /// Advances one level.
    pub fn step(&mut self) -> Result<()> {
        let next = self.level() + 1;
        if next > self.params.max_steps() {
            return Err(Error::OutOfRange {
                t: next as f64 * self.params.h(),
                max: self.params.horizon(),
            });
        }
        let t = next as f64 * self.params.h();
        let wrap = |e: Error| Error::StepFailed {
            level: next,
            source: Box::new(e),
        };
        let g = self.assemble_memory().map_err(wrap)?;
        let mut prob = ResolventProblem::new(self.stencil.clone(), self.params.mu(), g, t)
            .and_then(|p| p.with_tol(self.tol))
            .map_err(wrap)?;
        if let Some(it) = self.max_iters {
            prob = prob.with_max_iters(it);
        }
        let init = self.current().clone();
        let (u, report) = self.solver.solve(&prob, &init).map_err(wrap)?;
        self.observe_data(t);
        if self.enforce_bound {
            let sup = u.sup_norm();
            let bound = self.uniform_bound(next) + BOUND_SLACK;
            if !(sup <= bound) {
                return Err(Error::BoundViolated {
                    level: next,
                    sup,
                    bound,
                });
            }
        }
        self.history.push(u);
        self.reports.push(report);
        Ok(())
    }

    /// `u^h(·, t) = U_{⌊t/h⌋}`.
    pub fn sample(&self, t: f64) -> Result<&GridField> {
        let max = self.level() as f64 * self.params.h();
        let ratio = t / self.params.h();
        if !(t >= 0.0) || ratio > self.level() as f64 * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::OutOfRange { t, max });
        }
        let m = ((ratio * (1.0 + 1e-12)).floor() as usize).min(self.level());
        Ok(&self.history[m])
    }
}

/// Runs `n_steps` levels from `u0`.
pub fn run(
    spec: &OperatorSpec,
    grid: Arc<Grid>,
    u0: GridField,
    params: FractionalParams,
    n_steps: usize,
) -> Result<SchemeState> {
    let state = SchemeState::new(spec.clone(), grid, u0, params)?;
    advance(state, n_steps)
}

/// Advances an existing state by `n_steps` levels.
pub fn advance(mut state: SchemeState, n_steps: usize) -> Result<SchemeState> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    let target = state.level() + n_steps;
    if target > state.params.max_steps() {
        return Err(Error::OutOfRange {
            t: target as f64 * state.params.h(),
            max: state.params.horizon(),
        });
    }
    for _ in 0..n_steps {
        state.step()?;
    }
    Ok(state)
}

/// Smallest value of `∂^{α,h}(kh)^α − (1−α)α/Γ(2−α)` over levels
/// `1..=n_levels`.
pub fn barrier_margin(params: &FractionalParams, n_levels: usize) -> Result<f64> {
    if n_levels == 0 {
        return Err(Error::InvalidParameter(
            "n_levels must be at least 1".into(),
        ));
    }
    let a = params.alpha();
    let h = params.h();
    let floor = (1.0 - a) * a / params.gamma2ma();
    let table = WeightTable::new(a, n_levels)?;
    let samples = PointHistory::sampled(|t| t.powf(a), h, n_levels);
    let mut margin = f64::INFINITY;
    for m in 1..=n_levels {
        let hist = PointHistory::new(samples.values()[..=m].to_vec())?;
        let d = discrete_caputo_with(&hist, params, &table)?;
        margin = margin.min(d - floor);
    }
    Ok(margin)
}

/// Whether the barrier `(kh)^α` satisfies its lower bound at every level.
pub fn check_barrier(params: &FractionalParams, n_levels: usize) -> bool {
    matches!(barrier_margin(params, n_levels), Ok(m) if m >= -BARRIER_SLACK)
}

/// Smallest nodewise gap `V_m − U_m` over every level of the two runs.
pub fn monotone_gap(
    spec: &OperatorSpec,
    grid: Arc<Grid>,
    low: GridField,
    high: GridField,
    params: FractionalParams,
    n_steps: usize,
) -> Result<(f64, f64)> {
    let mut a = SchemeState::new(spec.clone(), grid.clone(), low, params)?;
    let mut b = SchemeState::new(spec.clone(), grid, high, params)?;
    let tol = a.tol();
    let gap = |a: &SchemeState, b: &SchemeState| {
        a.current()
            .values()
            .iter()
            .zip(b.current().values())
            .fold(f64::INFINITY, |m, (u, v)| m.min(v - u))
    };
    let mut min_gap = gap(&a, &b);
    for _ in 0..n_steps {
        a.step()?;
        b.step()?;
        min_gap = min_gap.min(gap(&a, &b));
    }
    Ok((min_gap, tol))
}

/// Whether ordered initial data stay ordered (up to `10·tol`) for
/// `n_steps` levels. A failed solve counts as a violation.
pub fn check_monotone(
    spec: &OperatorSpec,
    grid: Arc<Grid>,
    low: GridField,
    high: GridField,
    params: FractionalParams,
    n_steps: usize,
) -> bool {
    matches!(
        monotone_gap(spec, grid, low, high, params, n_steps),
        Ok((gap, tol)) if gap >= -ORDER_SLACK_FACTOR * tol
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Boundary, Coefficient};
    use crate::special::{gamma, mittag_leffler};
    use std::f64::consts::PI;

    fn periodic(n: usize) -> Arc<Grid> {
        Arc::new(Grid::new_1d(n, 0.0, 2.0, Boundary::Periodic).unwrap())
    }

    fn heat() -> OperatorSpec {
        OperatorSpec::linear_diffusion(
            Coefficient::Constant(1.0),
            vec![],
            Coefficient::Constant(0.0),
        )
        .unwrap()
    }

    fn const_source() -> OperatorSpec {
        OperatorSpec::linear_diffusion(
            Coefficient::Constant(0.0),
            vec![],
            Coefficient::Constant(1.0),
        )
        .unwrap()
    }

    #[test]
    fn memory_of_two_levels() {
        let grid = periodic(4);
        let a = GridField::from_fn(grid.clone(), |x| x[0]).unwrap();
        let params = FractionalParams::new(0.5, 0.1).unwrap();
        let mut s =
            SchemeState::new(OperatorSpec::zero(), grid.clone(), a.clone(), params).unwrap();
        assert_eq!(s.assemble_memory().unwrap().values(), a.values());
        s.step().unwrap();
        let b = s.current().clone();
        let g = s.assemble_memory().unwrap();
        for i in 0..4 {
            let want = 0.4142135624 * a.values()[i] + 0.5857864376 * b.values()[i];
            assert!((g.values()[i] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn constants_are_preserved() {
        let grid = periodic(16);
        let params = FractionalParams::new(0.4, 0.05).unwrap();
        let u0 = GridField::constant(grid.clone(), 2.5).unwrap();
        for spec in [
            OperatorSpec::zero(),
            heat(),
            OperatorSpec::pucci_maximal(1.0, 3.0).unwrap(),
        ] {
            let s = run(&spec, grid.clone(), u0.clone(), params, 10).unwrap();
            for f in s.history() {
                for v in f.values() {
                    assert!((v - 2.5).abs() <= 10.0 * s.tol());
                }
            }
        }
    }

    #[test]
    fn first_heat_step_scales_the_mode() {
        let n = 128;
        let grid = periodic(n);
        let params = FractionalParams::new(0.5, 0.01).unwrap();
        let u0 = GridField::from_fn(grid.clone(), |x| (PI * x[0]).sin()).unwrap();
        let s = run(&heat(), grid, u0.clone(), params, 1).unwrap();
        let dx = 2.0 / n as f64;
        let kh = (2.0 - 2.0 * (PI * dx).cos()) / (dx * dx);
        let amp = params.mu() / (params.mu() + kh);
        for (u, v) in s.current().values().iter().zip(u0.values()) {
            assert!((u - amp * v).abs() <= 1e-10);
        }
    }

    #[test]
    fn constant_source_tracks_power_law() {
        let grid = periodic(4);
        let h = 2f64.powi(-10);
        let params = FractionalParams::new(0.5, h)
            .unwrap()
            .with_horizon(1.0)
            .unwrap();
        let u0 = GridField::constant(grid.clone(), 0.0).unwrap();
        let s = run(&const_source(), grid, u0, params, 1024).unwrap();
        let exact = 1.0 / gamma(1.5).unwrap();
        let err = s
            .current()
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max((v - exact).abs()));
        assert!(err <= 3e-4, "{err}");
        assert_eq!(s.history().len(), 1025);
        assert_eq!(s.memory_ops(), 4 * (1024 * 1025 / 2));
    }

    #[test]
    fn heat_mode_against_mittag_leffler() {
        let grid = periodic(256);
        let h = 2f64.powi(-10);
        let params = FractionalParams::new(0.5, h)
            .unwrap()
            .with_horizon(0.25)
            .unwrap();
        let u0 = GridField::from_fn(grid.clone(), |x| (PI * x[0]).sin()).unwrap();
        let s = run(&heat(), grid.clone(), u0, params, 256).unwrap();
        let amp = mittag_leffler(0.5, -PI * PI * 0.5).unwrap();
        let err = (0..grid.node_count())
            .map(|i| (s.current().values()[i] - amp * (PI * grid.coords(i)[0]).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-2, "{err}");
    }

    #[test]
    fn sampling_follows_the_floor_rule() {
        let grid = periodic(8);
        let params = FractionalParams::new(0.3, 0.1).unwrap();
        let u0 = GridField::from_fn(grid.clone(), |x| x[0].cos()).unwrap();
        let s = run(&heat(), grid, u0, params, 3).unwrap();
        assert_eq!(s.sample(0.0).unwrap().values(), s.history()[0].values());
        assert_eq!(s.sample(0.15).unwrap().values(), s.history()[1].values());
        assert_eq!(s.sample(0.3).unwrap().values(), s.history()[3].values());
        assert_eq!(s.sample(0.2).unwrap().values(), s.history()[2].values());
        assert!(matches!(s.sample(0.31), Err(Error::OutOfRange { .. })));
        assert!(s.sample(-0.01).is_err());
    }

    #[test]
    fn horizon_is_enforced() {
        let grid = periodic(8);
        let params = FractionalParams::new(0.3, 0.1)
            .unwrap()
            .with_horizon(0.3)
            .unwrap();
        let u0 = GridField::constant(grid.clone(), 0.0).unwrap();
        assert!(run(&heat(), grid.clone(), u0.clone(), params, 3).is_ok());
        assert!(run(&heat(), grid.clone(), u0.clone(), params, 4).is_err());
        assert!(run(&heat(), grid, u0, params, 0).is_err());
    }

    #[test]
    fn barrier_examples() {
        for (a, h, n) in [(0.5, 0.01, 1000), (0.9, 1.0, 10_000), (0.1, 1e-3, 100)] {
            let p = FractionalParams::new(a, h).unwrap();
            assert!(check_barrier(&p, n));
            assert!(barrier_margin(&p, n).unwrap() >= 0.0);
        }
    }

    #[test]
    fn ordered_constants_keep_their_gap() {
        let grid = periodic(8);
        let params = FractionalParams::new(0.6, 0.1).unwrap();
        let low = GridField::from_fn(grid.clone(), |x| x[0].sin()).unwrap();
        let high =
            GridField::new(grid.clone(), low.values().iter().map(|v| v + 1.0).collect()).unwrap();
        let (gap, _) = monotone_gap(
            &OperatorSpec::zero(),
            grid.clone(),
            low.clone(),
            high,
            params,
            5,
        )
        .unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
        let (gap, _) =
            monotone_gap(&heat(), grid.clone(), low.clone(), low.clone(), params, 5).unwrap();
        assert_eq!(gap, 0.0);
        assert!(check_monotone(&heat(), grid, low.clone(), low, params, 5));
    }

    #[test]
    fn bound_holds_and_violations_abort() {
        let grid = periodic(8);
        let params = FractionalParams::new(0.5, 0.1).unwrap();
        let u0 = GridField::constant(grid.clone(), 0.0).unwrap();
        let s = run(&const_source(), grid.clone(), u0.clone(), params, 20).unwrap();
        assert_eq!(s.m0(), 1.0);
        for (m, f) in s.history().iter().enumerate() {
            assert!(f.sup_norm() <= s.uniform_bound(m) + BOUND_SLACK);
        }
        let mut s = SchemeState::new(const_source(), grid, u0, params).unwrap();
        s.sup_u0 = -1.0;
        s.boundary_sup = f64::NEG_INFINITY;
        assert!(matches!(
            s.step(),
            Err(Error::BoundViolated { level: 1, .. })
        ));
        assert_eq!(s.level(), 0);
    }
}
