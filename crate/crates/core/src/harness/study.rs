use crate::caputo::FractionalParams;
use crate::error::{Error, Result};
use crate::stepper::SchemeState;

use super::presets::{BoundaryKind, PresetName, ProblemPreset};

/// Observed orders below this mark the regime where spatial error dominates.
pub const FLOOR_ORDER: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub alpha: f64,
    pub h: f64,
    pub sup_error: f64,
    pub l2_error: f64,
    /// `log(e_prev / e) / log(h_prev / h)`; `None` in the first row per `α`.
    pub observed_order: Option<f64>,
    /// Set once an observed order drops below [`FLOOR_ORDER`] and kept for
    /// every finer `h`.
    pub spatial_floor: bool,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub preset: PresetName,
    pub alphas: Vec<f64>,
    pub hs: Vec<f64>,
    pub nx: usize,
    pub dim: usize,
    pub boundary: BoundaryKind,
    pub horizon: f64,
    /// Error sample times as fractions of the horizon.
    pub sample_fractions: Vec<f64>,
    pub tol: Option<f64>,
}

impl StudyConfig {
    pub fn new(
        preset: PresetName,
        alphas: Vec<f64>,
        hs: Vec<f64>,
        nx: usize,
        horizon: f64,
    ) -> Self {
        StudyConfig {
            preset,
            alphas,
            hs,
            nx,
            dim: 1,
            boundary: BoundaryKind::Periodic,
            horizon,
            sample_fractions: vec![0.25, 0.5, 1.0],
            tol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.hs.is_empty() {
            return Err(Error::Config(
                "a study needs at least one alpha and one h".into(),
            ));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "tmax must be positive, got {}",
                self.horizon
            )));
        }
        if self.hs.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("h values must be strictly decreasing".into()));
        }
        if self.sample_fractions.is_empty() {
            return Err(Error::Config("no sample times".into()));
        }
        for &h in &self.hs {
            if !(h > 0.0) {
                return Err(Error::Config(format!("h must be positive, got {h}")));
            }
            for &frac in &self.sample_fractions {
                let t = frac * self.horizon;
                let m = (t / h).round();
                if !(frac > 0.0 && frac <= 1.0) || m < 1.0 || (m * h - t).abs() > 1e-12 * t.max(1.0)
                {
                    return Err(Error::Config(format!(
                        "sample time {t} is not a positive multiple of h = {h}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyFailure {
    pub alpha: f64,
    pub h: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub failure: Option<StudyFailure>,
}

/// `h0, h0/2, …` (`levels` entries).
pub fn halving_list(h0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|i| h0 / 2f64.powi(i as i32)).collect()
}

/// Orders from consecutive error pairs.
pub fn observed_orders(hs: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for i in 1..errors.len().min(hs.len()) {
        out.push(Some(
            (errors[i - 1] / errors[i]).ln() / (hs[i - 1] / hs[i]).ln(),
        ));
    }
    out.truncate(errors.len());
    out
}

/// Sup and L² errors of one run against the exact solution, each maximised
/// over the sample times.
pub fn run_errors(preset: &ProblemPreset, cfg: &StudyConfig, h: f64) -> Result<(f64, f64)> {
    let grid = preset.grid(cfg.nx)?;
    let params = FractionalParams::new(preset.alpha, h)?.with_horizon(cfg.horizon)?;
    let mut state = SchemeState::new(
        preset.spec.clone(),
        grid.clone(),
        preset.initial(&grid)?,
        params,
    )?;
    if let Some(tol) = cfg.tol {
        state = state.with_tol(tol)?;
    }
    let mut times: Vec<f64> = cfg
        .sample_fractions
        .iter()
        .map(|f| f * cfg.horizon)
        .collect();
    times.sort_by(f64::total_cmp);
    let mut sup: f64 = 0.0;
    let mut l2: f64 = 0.0;
    for t in times {
        let m = (t / h).round() as usize;
        while state.level() < m {
            state.step()?;
        }
        let exact = preset
            .exact_on(&grid, t)?
            .ok_or_else(|| Error::Config(format!("{} has no exact solution", preset.name)))?;
        let got = state.sample(t)?;
        sup = sup.max(got.sup_distance(&exact));
        let sq: f64 = got
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        l2 = l2.max((sq * grid.cell_volume()).sqrt());
    }
    Ok((sup, l2))
}

/// Runs every `(α, h)` pair and tabulates errors and observed orders.
///
/// A failed run stops the study; rows completed before it are returned
/// together with the failure.
pub fn convergence_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &alpha in &cfg.alphas {
        let preset = ProblemPreset::new(cfg.preset, alpha, cfg.dim, cfg.boundary)?;
        if preset.exact.is_none() {
            return Err(Error::Config(format!(
                "{} has no exact solution; convergence studies need one",
                cfg.preset
            )));
        }
        let mut errors = Vec::new();
        let mut floor = false;
        for (i, &h) in cfg.hs.iter().enumerate() {
            let (sup, l2) = match run_errors(&preset, cfg, h) {
                Ok(e) => e,
                Err(e) => {
                    return Ok(StudyOutcome {
                        rows,
                        failure: Some(StudyFailure {
                            alpha,
                            h,
                            message: e.to_string(),
                        }),
                    })
                }
            };
            errors.push(sup);
            let order = observed_orders(&cfg.hs[..=i], &errors)[i];
            if matches!(order, Some(q) if !(q >= FLOOR_ORDER)) {
                floor = true;
            }
            rows.push(ConvergenceRow {
                alpha,
                h,
                sup_error: sup,
                l2_error: l2,
                observed_order: order,
                spatial_floor: floor,
            });
        }
    }
    Ok(StudyOutcome {
        rows,
        failure: None,
    })
}
