use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::caputo::{
    continuous_caputo_quadrature, discrete_caputo_with, FractionalParams, PointHistory, WeightRow,
    WeightTable,
};
use crate::error::Result;
use crate::operators::{Boundary, Coefficient, Grid, GridField, OperatorSpec, SymMat};
use crate::special::gamma;
use crate::stepper::{
    barrier_margin, monotone_gap, run, SchemeState, BOUND_SLACK, ORDER_SLACK_FACTOR,
};

use super::presets::{BoundaryKind, PresetName, ProblemPreset};

pub const DEFAULT_SEED: u64 = 0x5EED;

/// Supplies weight rows to the weight checks, so a broken source can be
/// swapped in.
pub trait WeightSource {
    fn rows(&self, alpha: f64, max_level: usize) -> Result<Vec<WeightRow>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StandardWeights;

impl WeightSource for StandardWeights {
    fn rows(&self, alpha: f64, max_level: usize) -> Result<Vec<WeightRow>> {
        let table = WeightTable::new(alpha, max_level)?;
        (1..=max_level).map(|m| table.row(m)).collect()
    }
}

/// Standard weights with `C_{level,index}` negated.
#[derive(Debug, Clone, Copy)]
pub struct NegatedWeight {
    pub level: usize,
    pub index: usize,
}

impl WeightSource for NegatedWeight {
    fn rows(&self, alpha: f64, max_level: usize) -> Result<Vec<WeightRow>> {
        let mut rows = StandardWeights.rows(alpha, max_level)?;
        if let Some(row) = rows.get_mut(self.level.wrapping_sub(1)) {
            let mut c = row.coeffs().to_vec();
            if let Some(v) = c.get_mut(self.index) {
                *v = -*v;
            }
            *row = WeightRow::from_raw(c);
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// The statement being checked, by name.
    pub statement: &'static str,
    /// Distance to failure; nonnegative exactly when the check passes.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    fn push(&mut self, name: impl Into<String>, statement: &'static str, margin: Result<f64>) {
        let margin = margin.unwrap_or(f64::NEG_INFINITY);
        self.checks.push(CheckResult {
            name: name.into(),
            statement,
            margin,
            pass: margin >= 0.0,
        });
    }
}

const ALPHAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const WEIGHT_LEVELS: usize = 2000;
const SUM_TOL: f64 = 1e-12;
const BARRIER_SLACK: f64 = 1e-12;

/// Runs the whole suite with the standard weights.
pub fn verify_all(seed: u64) -> VerifyReport {
    verify_with(seed, &StandardWeights)
}

/// Runs the whole suite, taking weight rows from `weights`.
pub fn verify_with(seed: u64, weights: &dyn WeightSource) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerifyReport {
        seed,
        checks: Vec::new(),
    };
    report.push(
        "weight_positivity",
        "weight positivity",
        weight_positivity(weights),
    );
    report.push("weight_sum", "weight normalisation", weight_sum(weights));
    report.push("barrier", "barrier lemma", barrier());
    report.push(
        "linear_exactness",
        "L1 exactness on piecewise-linear data",
        linear_exactness(),
    );
    report.push("consistency", "consistency lemma", consistency());
    for kind in OperatorKindTag::ALL {
        report.push(
            format!("degenerate_ellipticity_{}", kind.name()),
            "degenerate ellipticity",
            ellipticity(kind, &mut rng),
        );
        report.push(
            format!("stencil_monotonicity_{}", kind.name()),
            "monotone discretisation",
            stencil_monotonicity(kind, &mut rng),
        );
        report.push(
            format!("comparison_{}", kind.name()),
            "monotonicity proposition",
            comparison(kind, &mut rng),
        );
    }
    for name in PresetName::ALL {
        report.push(
            format!("uniform_bound_{name}"),
            "uniform boundedness lemma",
            uniform_bound(name),
        );
    }
    report.push(
        "constant_preservation",
        "weight normalisation",
        constant_preservation(),
    );
    report.push(
        "initial_consistency",
        "initial consistency",
        initial_consistency(),
    );
    report
}

fn weight_positivity(weights: &dyn WeightSource) -> Result<f64> {
    let mut min = f64::INFINITY;
    for a in ALPHAS {
        for row in weights.rows(a, WEIGHT_LEVELS)? {
            min = row.coeffs().iter().fold(min, |m, &c| m.min(c));
        }
    }
    Ok(min)
}

fn weight_sum(weights: &dyn WeightSource) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in ALPHAS {
        for row in weights.rows(a, WEIGHT_LEVELS)? {
            worst = worst.max((row.sum() - 1.0).abs());
        }
    }
    Ok(SUM_TOL - worst)
}

fn barrier() -> Result<f64> {
    let mut min = f64::INFINITY;
    for a in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for h in [1e-3, 1e-2, 1.0] {
            min = min.min(barrier_margin(&FractionalParams::new(a, h)?, 1000)?);
        }
    }
    Ok(min + BARRIER_SLACK)
}

fn linear_exactness() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in [0.2, 0.5, 0.8] {
        let h = 0.01;
        let params = FractionalParams::new(a, h)?;
        let table = WeightTable::new(a, 200)?;
        let hist = PointHistory::sampled(|t| t, h, 200);
        for m in [1, 7, 50, 200] {
            let sub = PointHistory::new(hist.values()[..=m].to_vec())?;
            let got = discrete_caputo_with(&sub, &params, &table)?;
            let t = m as f64 * h;
            let want = t.powf(1.0 - a) / gamma(2.0 - a)?;
            worst = worst.max((got - want).abs());
        }
    }
    Ok(1e-10 - worst)
}

/// `ψ(t) = t²` at `h = 2⁻⁸` against the quadrature value.
fn consistency() -> Result<f64> {
    let mut worst: f64 = 0.0;
    let h = 2f64.powi(-8);
    for a in [0.3, 0.5, 0.7] {
        let params = FractionalParams::new(a, h)?;
        let table = WeightTable::new(a, 256)?;
        for t in [0.25, 0.5, 1.0] {
            let m = (t / h).round() as usize;
            let d = discrete_caputo_with(&PointHistory::sampled(|s| s * s, h, m), &params, &table)?;
            let c = continuous_caputo_quadrature(|s| 2.0 * s, t, a, 64)?;
            worst = worst.max((d - c).abs());
        }
    }
    Ok(1e-3 - worst)
}

#[derive(Debug, Clone, Copy)]
enum OperatorKindTag {
    Linear,
    Eikonal,
    Pucci,
}

impl OperatorKindTag {
    const ALL: [OperatorKindTag; 3] = [
        OperatorKindTag::Linear,
        OperatorKindTag::Eikonal,
        OperatorKindTag::Pucci,
    ];

    fn name(&self) -> &'static str {
        match self {
            OperatorKindTag::Linear => "linear_diffusion",
            OperatorKindTag::Eikonal => "eikonal",
            OperatorKindTag::Pucci => "pucci_maximal",
        }
    }

    fn spec(&self) -> Result<OperatorSpec> {
        match self {
            OperatorKindTag::Linear => OperatorSpec::linear_diffusion(
                Coefficient::analytic("a", |x, _| 0.5 + 0.4 * (PI * x[0]).sin()),
                vec![Coefficient::analytic("b", |x, _| (PI * x[0]).cos())],
                Coefficient::analytic("src", |x, _| 0.3 * x[0]),
            ),
            OperatorKindTag::Eikonal => OperatorSpec::eikonal(
                Coefficient::analytic("c", |x, _| 1.0 + 0.5 * (PI * x[0]).cos()),
                Coefficient::Constant(0.2),
            ),
            OperatorKindTag::Pucci => OperatorSpec::pucci_maximal(1.0, 2.0),
        }
    }
}

/// `F(x, t, p, X) ≥ F(x, t, p, Y)` whenever `X ≤ Y`, sampled at random.
fn ellipticity(kind: OperatorKindTag, rng: &mut ChaCha8Rng) -> Result<f64> {
    let spec = kind.spec()?;
    let mut min = f64::INFINITY;
    for _ in 0..200 {
        let dim = rng.gen_range(1..=2);
        let x = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
        let t = rng.gen_range(0.0..1.0);
        let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let x_mat = SymMat::gram(
            dim,
            [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ],
        );
        let base = if dim == 1 {
            SymMat::new_1d(rng.gen_range(-3.0..3.0))
        } else {
            SymMat::new_2d(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            )
        };
        let lower = spec.eval_f(&x[..dim], t, &p[..dim], &base);
        let upper = spec.eval_f(&x[..dim], t, &p[..dim], &base.add(&x_mat));
        min = min.min(lower - upper + 1e-12 * (1.0 + lower.abs()));
    }
    Ok(min)
}

fn random_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng, amplitude: f64) -> Result<GridField> {
    let modes: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1..4) as f64,
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    GridField::from_fn(grid.clone(), |x| {
        amplitude
            * modes
                .iter()
                .map(|(c, k, phase)| c * (PI * k * x[0] + phase).sin())
                .sum::<f64>()
    })
}

/// Raising `u` at one node must not raise `F^h[u]` anywhere else.
fn stencil_monotonicity(kind: OperatorKindTag, rng: &mut ChaCha8Rng) -> Result<f64> {
    let grid = Arc::new(Grid::new_1d(48, 0.0, 2.0, Boundary::Periodic)?);
    let op = kind.spec()?.discretize(grid.clone())?;
    let mut min = f64::INFINITY;
    for _ in 0..30 {
        let u = random_field(&grid, rng, 1.0)?;
        let j = rng.gen_range(0..grid.node_count());
        let bump = rng.gen_range(1e-3..0.5);
        let mut v = u.values().to_vec();
        v[j] += bump;
        let fu = op.apply(&u, 0.5)?;
        let fv = op.apply(&GridField::new(grid.clone(), v)?, 0.5)?;
        for i in (0..grid.node_count()).filter(|&i| i != j) {
            min = min.min(fu.values()[i] - fv.values()[i] + 1e-12);
        }
    }
    Ok(min)
}

/// Ordered initial pairs stay ordered.
fn comparison(kind: OperatorKindTag, rng: &mut ChaCha8Rng) -> Result<f64> {
    let grid = Arc::new(Grid::new_1d(64, 0.0, 2.0, Boundary::Periodic)?);
    let spec = kind.spec()?;
    let params = FractionalParams::new(0.5, 2f64.powi(-5))?;
    let mut min = f64::INFINITY;
    for _ in 0..5 {
        let low = random_field(&grid, rng, 1.0)?;
        let lift = random_field(&grid, rng, 0.5)?;
        let high = GridField::new(
            grid.clone(),
            low.values()
                .iter()
                .zip(lift.values())
                .map(|(l, d)| l + d.abs())
                .collect(),
        )?;
        let (gap, tol) = monotone_gap(&spec, grid.clone(), low, high, params, 16)?;
        min = min.min(gap + ORDER_SLACK_FACTOR * tol);
    }
    Ok(min)
}

fn uniform_bound(name: PresetName) -> Result<f64> {
    let mut min = f64::INFINITY;
    for (dim, boundary) in [(1, BoundaryKind::Periodic), (2, BoundaryKind::Dirichlet)] {
        let preset = ProblemPreset::new(name, 0.5, dim, boundary)?;
        let grid = preset.grid(if dim == 1 { 64 } else { 16 })?;
        let params = FractionalParams::new(preset.alpha, 2f64.powi(-5))?;
        let state = SchemeState::new(
            preset.spec.clone(),
            grid.clone(),
            preset.initial(&grid)?,
            params,
        )?
        .with_bound_check(false);
        let state = crate::stepper::advance(state, 32)?;
        for (m, f) in state.history().iter().enumerate() {
            min = min.min(state.uniform_bound(m) + BOUND_SLACK - f.sup_norm());
        }
    }
    Ok(min)
}

fn constant_preservation() -> Result<f64> {
    let grid = Arc::new(Grid::new_1d(32, 0.0, 2.0, Boundary::Periodic)?);
    let params = FractionalParams::new(0.4, 2f64.powi(-5))?;
    let mut min = f64::INFINITY;
    for kind in OperatorKindTag::ALL {
        let spec = match kind {
            OperatorKindTag::Linear => OperatorSpec::linear_diffusion(
                Coefficient::analytic("a", |x, _| 1.0 + 0.5 * (PI * x[0]).sin()),
                vec![Coefficient::Constant(0.7)],
                Coefficient::Constant(0.0),
            )?,
            OperatorKindTag::Eikonal => {
                OperatorSpec::eikonal(Coefficient::Constant(1.0), Coefficient::Constant(0.0))?
            }
            OperatorKindTag::Pucci => OperatorSpec::pucci_maximal(1.0, 2.0)?,
        };
        let state = run(
            &spec,
            grid.clone(),
            GridField::constant(grid.clone(), 1.25)?,
            params,
            16,
        )?;
        let slack = ORDER_SLACK_FACTOR * state.tol();
        for f in state.history() {
            for v in f.values() {
                min = min.min(slack - (v - 1.25).abs());
            }
        }
    }
    Ok(min)
}

/// `sup |u^h(·, h) − u₀|` for the heat mode stays under the growth bound
/// `Γ(2−α) M₀ h^α / ((1−α)α)` plus `1e−6`, and shrinks with `h`.
fn initial_consistency() -> Result<f64> {
    let preset = ProblemPreset::new(PresetName::FracHeat, 0.5, 1, BoundaryKind::Periodic)?;
    let grid = preset.grid(128)?;
    let u0 = preset.initial(&grid)?;
    let stencil = preset.spec.discretize(grid.clone())?;
    let m0 = stencil.apply(&u0, 0.0)?.sup_norm();
    let a = preset.alpha;
    let mut min = f64::INFINITY;
    let mut prev = f64::INFINITY;
    for e in 6..=12 {
        let h = 2f64.powi(-e);
        let params = FractionalParams::new(a, h)?;
        let state = run(&preset.spec, grid.clone(), u0.clone(), params, 1)?;
        let dist = state.sample(h)?.sup_distance(&u0);
        let bound = gamma(2.0 - a)? * m0 * h.powf(a) / ((1.0 - a) * a) + 1e-6;
        min = min.min(bound - dist);
        if dist > prev {
            min = min.min(prev - dist);
        }
        prev = dist;
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negated_weight_fixture() {
        let rows = NegatedWeight { level: 3, index: 1 }.rows(0.5, 4).unwrap();
        let std = StandardWeights.rows(0.5, 4).unwrap();
        assert_eq!(rows[2].coeffs()[1], -std[2].coeffs()[1]);
        assert_eq!(rows[1], std[1]);
        assert!(weight_positivity(&NegatedWeight { level: 3, index: 1 }).unwrap() < 0.0);
        assert!(weight_positivity(&StandardWeights).unwrap() > 0.0);
    }

    #[test]
    fn individual_checks_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        assert!(barrier().unwrap() >= 0.0);
        assert!(linear_exactness().unwrap() >= 0.0);
        assert!(consistency().unwrap() >= 0.0);
        assert!(initial_consistency().unwrap() >= 0.0);
        for kind in OperatorKindTag::ALL {
            assert!(ellipticity(kind, &mut rng).unwrap() >= 0.0, "{kind:?}");
            assert!(
                stencil_monotonicity(kind, &mut rng).unwrap() >= 0.0,
                "{kind:?}"
            );
        }
    }
}
