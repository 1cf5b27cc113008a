//! Convex losses of quadratic type.
//!
//! A loss `ℓ(y; u)` is of quadratic type on `[−a, a]` when it is twice
//! differentiable and convex in `u` with
//!
//! ```text
//! Q    = sup_y ℓ(y; 0)
//! L(a) = sup_y sup_{|u|≤a} [ |ℓ'(y; 0)| + ℓ''(y; u)·a ]
//! τ(a) = inf_y inf_{|u|≤a} ℓ''(y; u) > 0
//! ```
//!
//! `L(a)` and `τ(a)` are computed on a grid over `T × [−a, a]`; losses that
//! know their closed forms supply them and the grid is used as a check.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points in `u` (and in `y` for interval domains).
pub const DEFAULT_GRID_SIZE: usize = 10_000;

/// Relative agreement demanded between grid and closed-form constants.
const CLOSED_FORM_REL_TOL: f64 = 1e-6;

/// The set `T` of response values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ResponseDomain {
    /// `T = [−a, a]`, tied to the prediction bound.
    PredictionBound,
    /// A closed interval `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// A finite set of labels.
    Finite(Vec<f64>),
}

impl ResponseDomain {
    /// Points of `T` at which sup/inf are evaluated.
    pub fn grid(&self, a: f64, size: usize) -> Vec<f64> {
        match self {
            ResponseDomain::PredictionBound => linspace(-a, a, size),
            ResponseDomain::Interval { lo, hi } => linspace(*lo, *hi, size),
            ResponseDomain::Finite(values) => values.clone(),
        }
    }

    pub fn contains(&self, y: f64, a: f64) -> bool {
        const SLACK: f64 = 1e-12;
        match self {
            ResponseDomain::PredictionBound => y.abs() <= a + SLACK,
            ResponseDomain::Interval { lo, hi } => y >= lo - SLACK && y <= hi + SLACK,
            ResponseDomain::Finite(values) => values.contains(&y),
        }
    }
}

fn linspace(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    if size <= 1 || lo == hi {
        return vec![lo];
    }
    let step = (hi - lo) / (size - 1) as f64;
    (0..size)
        .map(|k| if k + 1 == size { hi } else { lo + step * k as f64 })
        .collect()
}

/// `L(a)` and `τ(a)` at a given prediction bound `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConstants {
    pub a: f64,
    pub l_a: f64,
    pub tau_a: f64,
}

/// A convex loss `ℓ(y; u)` with derivatives in `u`.
///
/// Implement this to register a custom loss; the built-in ones are
/// [`SquaredLoss`] and [`ExponentialLoss`].
pub trait Loss: Debug + Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, y: f64, u: f64) -> f64;

    /// `∂ℓ/∂u`.
    fn d1(&self, y: f64, u: f64) -> f64;

    /// `∂²ℓ/∂u²`.
    fn d2(&self, y: f64, u: f64) -> f64;

    fn response_domain(&self) -> &ResponseDomain;

    /// `Q = sup_{y∈T} ℓ(y; 0)`. The default evaluates it on the domain grid.
    fn q(&self, a: f64) -> f64 {
        self.response_domain()
            .grid(a, DEFAULT_GRID_SIZE)
            .into_iter()
            .map(|y| self.value(y, 0.0))
            .fold(0.0, f64::max)
    }

    /// `(min, max)` of `ℓ''(y; u)` over `us`. Provided here so the loop is
    /// compiled per loss rather than through dynamic dispatch.
    fn curvature_extremes(&self, y: f64, us: &[f64]) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &u in us {
            let c = self.d2(y, u);
            if c < lo {
                lo = c;
            }
            if c > hi {
                hi = c;
            }
            if c.is_nan() {
                return (f64::NAN, f64::NAN);
            }
        }
        (lo, hi)
    }

    /// Closed-form `(L(a), τ(a))` when known.
    fn closed_form_constants(&self, _a: f64) -> Option<LossConstants> {
        None
    }
}

/// Shared handle to a loss.
pub type LossModel = Arc<dyn Loss>;

/// `ℓ(y; u) = (y − u)²`.
#[derive(Debug, Clone)]
pub struct SquaredLoss {
    domain: ResponseDomain,
}

impl SquaredLoss {
    /// Responses bounded by the prediction bound, `T = [−a, a]`.
    pub fn new() -> Self {
        Self {
            domain: ResponseDomain::PredictionBound,
        }
    }

    /// Responses in `[−bound, bound]`.
    pub fn with_response_bound(bound: f64) -> Self {
        Self {
            domain: ResponseDomain::Interval {
                lo: -bound,
                hi: bound,
            },
        }
    }

    fn response_bound(&self, a: f64) -> f64 {
        match &self.domain {
            ResponseDomain::PredictionBound => a,
            ResponseDomain::Interval { lo, hi } => lo.abs().max(hi.abs()),
            ResponseDomain::Finite(v) => v.iter().fold(0.0, |m, y| m.max(y.abs())),
        }
    }
}

impl Default for SquaredLoss {
    fn default() -> Self {
        Self::new()
    }
}

impl Loss for SquaredLoss {
    fn name(&self) -> &str {
        "squared"
    }

    fn value(&self, y: f64, u: f64) -> f64 {
        (y - u) * (y - u)
    }

    fn d1(&self, y: f64, u: f64) -> f64 {
        -2.0 * (y - u)
    }

    fn d2(&self, _y: f64, _u: f64) -> f64 {
        2.0
    }

    fn response_domain(&self) -> &ResponseDomain {
        &self.domain
    }

    fn q(&self, a: f64) -> f64 {
        let b = self.response_bound(a);
        b * b
    }

    fn closed_form_constants(&self, a: f64) -> Option<LossConstants> {
        // sup_y |−2y| + 2a; with T = [−a, a] this is 4a
        Some(LossConstants {
            a,
            l_a: 2.0 * self.response_bound(a) + 2.0 * a,
            tau_a: 2.0,
        })
    }
}

/// `ℓ(y; u) = e^{−yu}` for labels `y ∈ {−1, 1}`.
#[derive(Debug, Clone)]
pub struct ExponentialLoss {
    domain: ResponseDomain,
}

impl ExponentialLoss {
    pub fn new() -> Self {
        Self {
            domain: ResponseDomain::Finite(vec![-1.0, 1.0]),
        }
    }
}

impl Default for ExponentialLoss {
    fn default() -> Self {
        Self::new()
    }
}

impl Loss for ExponentialLoss {
    fn name(&self) -> &str {
        "exponential"
    }

    fn value(&self, y: f64, u: f64) -> f64 {
        (-y * u).exp()
    }

    fn d1(&self, y: f64, u: f64) -> f64 {
        -y * (-y * u).exp()
    }

    fn d2(&self, y: f64, u: f64) -> f64 {
        y * y * (-y * u).exp()
    }

    fn response_domain(&self) -> &ResponseDomain {
        &self.domain
    }

    fn q(&self, _a: f64) -> f64 {
        1.0
    }

    fn closed_form_constants(&self, a: f64) -> Option<LossConstants> {
        Some(LossConstants {
            a,
            l_a: 1.0 + a * a.exp(),
            tau_a: (-a).exp(),
        })
    }
}

pub fn squared_loss() -> LossModel {
    Arc::new(SquaredLoss::new())
}

pub fn exponential_loss() -> LossModel {
    Arc::new(ExponentialLoss::new())
}

/// Looks up a built-in loss by its config name.
pub fn loss_by_name(name: &str) -> Result<LossModel> {
    match name {
        "squared" => Ok(squared_loss()),
        "exponential" => Ok(exponential_loss()),
        other => Err(Error::Config(format!(
            "unknown loss `{other}` (expected \"squared\" or \"exponential\")"
        ))),
    }
}

/// Grid sup/inf for `L(a)` and `τ(a)`, without closed-form overrides.
pub fn grid_constants(loss: &dyn Loss, a: f64, grid_size: usize) -> Result<LossConstants> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::input("prediction bound a must be finite and nonnegative"));
    }
    if grid_size < 2 {
        return Err(Error::input("grid_size must be at least 2"));
    }
    let ys = loss.response_domain().grid(a, grid_size);
    let us = linspace(-a, a, grid_size);
    let mut l_a = f64::NEG_INFINITY;
    let mut tau_a = f64::INFINITY;
    for &y in &ys {
        let slope0 = loss.d1(y, 0.0).abs();
        let (lo, hi) = loss.curvature_extremes(y, &us);
        if lo.is_nan() {
            return Err(Error::numerical(format!("ℓ'' is NaN at y = {y}")));
        }
        // for fixed y the bracket |ℓ'(y;0)| + ℓ''(y;u)·a peaks at the
        // largest curvature
        l_a = l_a.max(slope0 + hi * a);
        tau_a = tau_a.min(lo);
    }
    Ok(LossConstants { a, l_a, tau_a })
}

/// `L(a)` and `τ(a)` for `loss`, rejecting losses with `τ(a) ≤ 0`.
///
/// The grid is always evaluated; a closed form, when the loss provides one,
/// takes precedence and must agree with the grid to `1e-6` relative.
pub fn loss_constants(loss: &dyn Loss, a: f64, grid_size: usize) -> Result<LossConstants> {
    let grid = grid_constants(loss, a, grid_size)?;
    if !grid.l_a.is_finite() || !grid.tau_a.is_finite() {
        return Err(Error::NotQuadraticType {
            name: loss.name().to_string(),
            reason: "L(a) or τ(a) is not finite".into(),
        });
    }
    let constants = match loss.closed_form_constants(a) {
        Some(closed) => {
            let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
            if rel(closed.l_a, grid.l_a) > CLOSED_FORM_REL_TOL
                || rel(closed.tau_a, grid.tau_a) > CLOSED_FORM_REL_TOL
            {
                return Err(Error::numerical(format!(
                    "closed-form constants for `{}` disagree with grid: ({}, {}) vs ({}, {})",
                    loss.name(),
                    closed.l_a,
                    closed.tau_a,
                    grid.l_a,
                    grid.tau_a
                )));
            }
            closed
        }
        None => grid,
    };
    if !(constants.tau_a > 0.0) {
        return Err(Error::NotQuadraticType {
            name: loss.name().to_string(),
            reason: format!("τ(a) = {} at a = {a}", constants.tau_a),
        });
    }
    Ok(constants)
}

/// Checks a stored `Q` against the grid sup of `ℓ(y; 0)`.
pub fn validate_q(loss: &dyn Loss, a: f64, grid_size: usize) -> Result<f64> {
    let q = loss.q(a);
    let grid_sup = loss
        .response_domain()
        .grid(a, grid_size)
        .into_iter()
        .map(|y| loss.value(y, 0.0))
        .fold(0.0, f64::max);
    if q + 1e-12 * q.max(1.0) < grid_sup {
        return Err(Error::numerical(format!(
            "Q = {q} for `{}` is below the grid sup {grid_sup}",
            loss.name()
        )));
    }
    Ok(q)
}

/// A point `(y, u, v)` at which the second-order lower bound is tested.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureSample {
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

/// Draws `count` samples with `y ∈ T` and `u, v ∈ [−a, a]`.
pub fn curvature_samples(loss: &dyn Loss, a: f64, count: usize, seed: u64) -> Vec<CurvatureSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = loss.response_domain();
    (0..count)
        .map(|_| {
            let y = match domain {
                ResponseDomain::PredictionBound => uniform(&mut rng, -a, a),
                ResponseDomain::Interval { lo, hi } => uniform(&mut rng, *lo, *hi),
                ResponseDomain::Finite(v) => v[rng.random_range(0..v.len())],
            };
            CurvatureSample {
                y,
                u: uniform(&mut rng, -a, a),
                v: uniform(&mut rng, -a, a),
            }
        })
        .collect()
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// True when `ℓ(y;v) ≥ ℓ(y;u) + ℓ'(y;u)(v−u) + ½τ(a)(v−u)²` holds at every
/// sample within `1e-9`.
pub fn second_order_lower_bound_check(
    loss: &dyn Loss,
    a: f64,
    samples: &[CurvatureSample],
) -> Result<bool> {
    let tau = loss_constants(loss, a, DEFAULT_GRID_SIZE)?.tau_a;
    Ok(samples.iter().all(|s| {
        let lower = loss.value(s.y, s.u)
            + loss.d1(s.y, s.u) * (s.v - s.u)
            + 0.5 * tau * (s.v - s.u).powi(2);
        loss.value(s.y, s.v) >= lower - 1e-9
    }))
}
