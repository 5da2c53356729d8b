//! Discrete time-fractional machinery.
//!
//! On a uniform time grid `t_k = kh` the Caputo derivative at `t_m` is
//! approximated by replacing `∂_s u` with the difference quotient on each
//! subinterval, which gives
//!
//! ```text
//! ∂_t^{α,h} u(t_m) = μ · ( u_m − Σ_{k<m} C_{m,k} u_k ),   μ = 1 / (Γ(2−α) h^α)
//! C_{m,0} = f(m),  C_{m,k} = f(m−k) − f(m−k+1),  f(r) = r^{1−α} − (r−1)^{1−α}.
//! ```
//!
//! `f` is nonincreasing on `[1, ∞)`, so every `C_{m,k}` is nonnegative and the
//! row telescopes to `f(1) = 1`.

use crate::error::{Error, Result};
use crate::special::gamma_pos;

/// Largest time level for which weights are produced. Beyond this the
/// difference `f(j) − f(j+1)` would need an asymptotic expansion.
pub const MAX_LEVEL: usize = 1_000_000;

fn check_alpha(func: &'static str, alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(
            func,
            format!("alpha must lie in (0, 1), got {alpha}"),
        ))
    }
}

/// Order `α`, step `h` and the derived constants of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalParams {
    alpha: f64,
    h: f64,
    horizon: f64,
    gamma2ma: f64,
    mu: f64,
}

impl FractionalParams {
    pub fn new(alpha: f64, h: f64) -> Result<Self> {
        check_alpha("FractionalParams::new", alpha)?;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {h}"
            )));
        }
        let gamma2ma = gamma_pos(2.0 - alpha);
        Ok(FractionalParams {
            alpha,
            h,
            horizon: f64::INFINITY,
            gamma2ma,
            mu: 1.0 / (gamma2ma * h.powf(alpha)),
        })
    }

    /// Sets the final time `T`; runs refuse to step past it.
    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Γ(2 − α).
    pub fn gamma2ma(&self) -> f64 {
        self.gamma2ma
    }

    /// Resolvent coefficient `1 / (Γ(2−α) h^α)`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Number of whole steps that fit in the horizon (with a 1e-12 relative
    /// allowance for rounding in `T / h`).
    pub fn max_steps(&self) -> usize {
        if self.horizon.is_infinite() {
            return MAX_LEVEL;
        }
        let ratio = self.horizon / self.h;
        (ratio * (1.0 + 1e-12)).floor() as usize
    }
}

/// `f(r) = r^{1−α} − (r−1)^{1−α}` for `r ≥ 1`.
///
/// Evaluated as `−r^{1−α} · expm1((1−α) · ln(1 − 1/r))`, which does not lose
/// digits to cancellation for large `r`.
pub fn weight_f(r: f64, alpha: f64) -> Result<f64> {
    check_alpha("weight_f", alpha)?;
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::domain(
            "weight_f",
            format!("r must be >= 1, got {r}"),
        ));
    }
    Ok(weight_f_unchecked(r, alpha))
}

fn weight_f_unchecked(r: f64, alpha: f64) -> f64 {
    if r == 1.0 {
        return 1.0;
    }
    let beta = 1.0 - alpha;
    -r.powf(beta) * (beta * (-1.0 / r).ln_1p()).exp_m1()
}

/// The coefficients `C_{m,0..m−1}` of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    m: usize,
    c: Vec<f64>,
}

impl WeightRow {
    pub fn level(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Sum in increasing `k`, i.e. from the smallest entries upward.
    pub fn sum(&self) -> f64 {
        self.c.iter().sum()
    }

    /// Builds a row from raw coefficients without any checks. Used to feed
    /// deliberately broken rows to the verification suite.
    pub fn from_raw(c: Vec<f64>) -> Self {
        WeightRow { m: c.len(), c }
    }
}

/// Cached values `f(1), f(2), …` for one `α`, from which weight rows of any
/// level up to the cached length are assembled in `O(m)`.
#[derive(Debug, Clone)]
pub struct WeightTable {
    alpha: f64,
    f: Vec<f64>,
}

impl WeightTable {
    pub fn new(alpha: f64, max_level: usize) -> Result<Self> {
        check_alpha("WeightTable::new", alpha)?;
        let mut table = WeightTable {
            alpha,
            f: Vec::new(),
        };
        table.extend_to(max_level)?;
        Ok(table)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn extend_to(&mut self, max_level: usize) -> Result<()> {
        if max_level > MAX_LEVEL {
            return Err(Error::domain(
                "weights",
                format!("level {max_level} exceeds the supported maximum {MAX_LEVEL}"),
            ));
        }
        let start = self.f.len() + 1;
        self.f
            .extend((start..=max_level).map(|j| weight_f_unchecked(j as f64, self.alpha)));
        Ok(())
    }

    /// `f(j)` for `1 ≤ j ≤ len`.
    pub fn f(&self, j: usize) -> f64 {
        self.f[j - 1]
    }

    /// `f(1..=m)` as a slice.
    pub fn f_values(&self, m: usize) -> &[f64] {
        &self.f[..m]
    }

    pub fn row(&self, m: usize) -> Result<WeightRow> {
        if m == 0 {
            return Err(Error::domain("weights", "level must be >= 1"));
        }
        if m > self.f.len() {
            return Err(Error::domain(
                "weights",
                format!("level {m} exceeds the table length {}", self.f.len()),
            ));
        }
        let mut c = Vec::with_capacity(m);
        c.push(self.f(m));
        c.extend((1..m).map(|k| self.f(m - k) - self.f(m - k + 1)));
        Ok(WeightRow { m, c })
    }
}

/// The weight row `C_{m,·}`.
pub fn weights(m: usize, alpha: f64) -> Result<WeightRow> {
    WeightTable::new(alpha, m)?.row(m)
}

/// Samples `u(t_0), …, u(t_m)` of a scalar quantity on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PointHistory(Vec<f64>);

impl PointHistory {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "a history needs at least one sample".into(),
            ));
        }
        Ok(PointHistory(values))
    }

    /// Samples `g(kh)` for `k = 0..=m`.
    pub fn sampled(g: impl Fn(f64) -> f64, h: f64, m: usize) -> Self {
        PointHistory((0..=m).map(|k| g(k as f64 * h)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Index of the last sample.
    pub fn level(&self) -> usize {
        self.0.len() - 1
    }
}

/// `∂_t^{α,h} u(t_m)` for the history `u_0..u_m`, `m ≥ 1`.
///
/// Computed in the equivalent difference form
/// `μ Σ_{k<m} f(m−k) (u_{k+1} − u_k)`, which is exact (zero) on constants and
/// avoids cancelling two large memory sums.
pub fn discrete_caputo(hist: &PointHistory, params: &FractionalParams) -> Result<f64> {
    let m = hist.level();
    if m == 0 {
        return Err(Error::InvalidParameter(
            "the discrete Caputo operator needs at least two samples".into(),
        ));
    }
    let table = WeightTable::new(params.alpha(), m)?;
    discrete_caputo_with(hist, params, &table)
}

/// As [`discrete_caputo`] with a precomputed table of `f` values.
pub fn discrete_caputo_with(
    hist: &PointHistory,
    params: &FractionalParams,
    table: &WeightTable,
) -> Result<f64> {
    let m = hist.level();
    if m == 0 {
        return Err(Error::InvalidParameter(
            "the discrete Caputo operator needs at least two samples".into(),
        ));
    }
    if table.alpha() != params.alpha() || table.len() < m {
        return Err(Error::InvalidParameter(
            "weight table does not match the history".into(),
        ));
    }
    let u = hist.values();
    let f = table.f_values(m);
    let bracket: f64 = (0..m).map(|k| f[m - k - 1] * (u[k + 1] - u[k])).sum();
    Ok(params.mu() * bracket)
}

const GAUSS4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];

/// The continuous Caputo derivative `∂_t^α ψ(t)` by quadrature, given `ψ'`.
///
/// The substitution `s = t (1 − w^{1/(1−α)})` absorbs the kernel singularity:
///
/// ```text
/// ∂_t^α ψ(t) = t^{1−α} / Γ(2−α) · ∫_0^1 ψ'(t (1 − w^{1/(1−α)})) dw
/// ```
///
/// and the remaining integral is evaluated with `n_quad` panels of 4-point
/// Gauss–Legendre.
pub fn continuous_caputo_quadrature(
    dpsi: impl Fn(f64) -> f64,
    t: f64,
    alpha: f64,
    n_quad: usize,
) -> Result<f64> {
    check_alpha("continuous_caputo_quadrature", alpha)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(
            "continuous_caputo_quadrature",
            format!("t must be positive, got {t}"),
        ));
    }
    if n_quad < 16 {
        return Err(Error::InvalidParameter(format!(
            "n_quad must be >= 16, got {n_quad}"
        )));
    }
    let exponent = 1.0 / (1.0 - alpha);
    let width = 1.0 / n_quad as f64;
    let mut integral = 0.0;
    for panel in 0..n_quad {
        let mid = (panel as f64 + 0.5) * width;
        let panel_sum: f64 = GAUSS4_NODES
            .iter()
            .zip(GAUSS4_WEIGHTS)
            .map(|(&node, weight)| {
                let w = mid + 0.5 * width * node;
                weight * dpsi(t * (1.0 - w.powf(exponent)))
            })
            .sum();
        integral += 0.5 * width * panel_sum;
    }
    Ok(t.powf(1.0 - alpha) / gamma_pos(2.0 - alpha) * integral)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_values() {
        for alpha in [0.1, 0.5, 0.9] {
            assert_eq!(weight_f(1.0, alpha).unwrap(), 1.0);
        }
        assert!((weight_f(2.0, 0.5).unwrap() - 0.414_213_562_4).abs() < 1e-10);
        assert!((weight_f(2.0, 0.5).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!(weight_f(0.5, 0.5).is_err());
        assert!(weight_f(2.0, 1.0).is_err());
        assert!(weight_f(2.0, 0.0).is_err());
    }

    #[test]
    fn f_is_nonincreasing_and_in_unit_interval() {
        for alpha in [0.1, 0.5, 0.9] {
            let mut prev = 1.0;
            for r in 1..=100 {
                let v = weight_f(r as f64, alpha).unwrap();
                assert!(v > 0.0 && v <= 1.0);
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn f_matches_direct_difference() {
        for alpha in [0.2, 0.7] {
            for r in [1.5f64, 3.0, 17.0, 250.0] {
                let beta = 1.0 - alpha;
                let direct = r.powf(beta) - (r - 1.0).powf(beta);
                assert!((weight_f(r, alpha).unwrap() - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn small_rows() {
        assert_eq!(weights(1, 0.5).unwrap().coeffs(), &[1.0]);
        let row = weights(2, 0.5).unwrap();
        assert!((row.coeffs()[0] - 0.414_213_562_4).abs() < 1e-10);
        assert!((row.coeffs()[1] - 0.585_786_437_6).abs() < 1e-10);
        assert!((row.sum() - 1.0).abs() < 1e-15);
        assert!(weights(0, 0.5).is_err());
        assert!(weights(MAX_LEVEL + 1, 0.5).is_err());
    }

    #[test]
    fn rows_sum_to_one_and_increase_after_the_first() {
        for alpha in [0.1, 0.5, 0.9] {
            for m in [1, 10, 1000] {
                let row = weights(m, alpha).unwrap();
                assert!((row.sum() - 1.0).abs() <= 1e-12, "alpha {alpha} m {m}");
                assert!(row.coeffs().iter().all(|&c| c >= 0.0));
                assert!(row.coeffs()[1..].windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn discrete_caputo_of_constant_vanishes() {
        let params = FractionalParams::new(0.4, 0.01).unwrap();
        let hist = PointHistory::new(vec![3.25; 40]).unwrap();
        assert!(discrete_caputo(&hist, &params).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn discrete_caputo_needs_two_samples() {
        let params = FractionalParams::new(0.4, 0.01).unwrap();
        let hist = PointHistory::new(vec![1.0]).unwrap();
        assert!(discrete_caputo(&hist, &params).is_err());
        assert!(PointHistory::new(vec![]).is_err());
    }

    #[test]
    fn params_invariants() {
        for alpha in [0.1, 0.5, 0.9] {
            for h in [1e-3, 0.1, 1.0] {
                let p = FractionalParams::new(alpha, h).unwrap();
                let check = p.mu() * p.gamma2ma() * h.powf(alpha);
                assert!((check - 1.0).abs() < 1e-12);
            }
        }
        assert!(FractionalParams::new(0.5, 0.0).is_err());
        assert!(FractionalParams::new(1.0, 0.1).is_err());
        let p = FractionalParams::new(0.5, 0.1)
            .unwrap()
            .with_horizon(1.0)
            .unwrap();
        assert_eq!(p.max_steps(), 10);
    }

    #[test]
    fn quadrature_closed_forms() {
        let v = continuous_caputo_quadrature(|_| 0.0, 1.0, 0.5, 64).unwrap();
        assert!(v.abs() < 1e-12);
        let v = continuous_caputo_quadrature(|_| 1.0, 1.0, 0.5, 2048).unwrap();
        assert!((v - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-8);
        let v = continuous_caputo_quadrature(|s| 2.0 * s, 1.0, 0.5, 2048).unwrap();
        assert!((v - 1.504_505_556_1).abs() < 1e-8);
        assert!(continuous_caputo_quadrature(|s| s, 0.0, 0.5, 64).is_err());
        assert!(continuous_caputo_quadrature(|s| s, 1.0, 0.5, 8).is_err());
    }
}
