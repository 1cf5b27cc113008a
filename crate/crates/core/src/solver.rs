//! Nuclear-norm penalized empirical risk minimization
//!
//! ```text
//! Ŝ = argmin_{S ∈ D} n⁻¹ Σ_j ℓ(Y_j; ⟨S, X_j⟩) + ε‖S‖₁
//! ```
//!
//! solved by accelerated proximal gradient with backtracking and adaptive
//! restart. `D` is restricted to spectral sets so that the proximal map of
//! `ε‖·‖₁ + I_D` is an exact eigenvalue-wise map.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::Dataset;
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::matrix::{soft_threshold, spectral_decompose, KktResidual, SymmetricMatrix};

/// Relative width of the band around `‖S‖ = ρ` treated as the boundary.
const BOUNDARY_TOL: f64 = 1e-9;

/// Closed convex spectral set `D ∋ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "radius", rename_all = "kebab-case")]
pub enum ConstraintSet {
    Unconstrained,
    OperatorNormBall(f64),
    FrobeniusBall(f64),
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConstraintSet::Unconstrained => Ok(()),
            ConstraintSet::OperatorNormBall(r) | ConstraintSet::FrobeniusBall(r) => {
                if r > 0.0 && r.is_finite() {
                    Ok(())
                } else {
                    Err(Error::input(format!("constraint radius must be positive, got {r}")))
                }
            }
        }
    }

    /// Amount by which `s` lies outside the set (0 when inside).
    pub fn violation(&self, s: &SymmetricMatrix) -> f64 {
        match *self {
            ConstraintSet::Unconstrained => 0.0,
            ConstraintSet::OperatorNormBall(r) => (s.operator_norm() - r).max(0.0),
            ConstraintSet::FrobeniusBall(r) => (s.frobenius_norm() - r).max(0.0),
        }
    }

    pub fn contains(&self, s: &SymmetricMatrix, tol: f64) -> bool {
        self.violation(s) <= tol
    }
}

/// Tuning for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Regularization `ε ≥ 0`.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Fixed-point residual tolerance; `None` means
    /// `1e-8 · (1 + ‖n⁻¹ Σ Y_j X_j‖₂)`.
    pub grad_tol: Option<f64>,
    /// First step size; `None` means `1/L₀` with
    /// `L₀ = max_j ℓ''(Y_j; 0) · max_j ‖X_j‖₂²`.
    pub initial_step: Option<f64>,
    /// Step multiplier on a failed sufficient-decrease test, in `(0, 1)`.
    pub shrink: f64,
    /// Step multiplier tried at the start of every iteration, `≥ 1`.
    pub growth: f64,
    /// Reset momentum when it stops helping.
    pub restart: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            max_iters: 50_000,
            grad_tol: None,
            initial_step: None,
            shrink: 0.5,
            growth: 1.25,
            restart: true,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::input(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::input("max_iters must be positive"));
        }
        if let Some(tol) = self.grad_tol {
            if !(tol > 0.0) {
                return Err(Error::input("grad_tol must be positive"));
            }
        }
        if let Some(step) = self.initial_step {
            if !(step > 0.0) || !step.is_finite() {
                return Err(Error::input("initial_step must be positive"));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::input("shrink factor must lie in (0, 1)"));
        }
        if !(self.growth >= 1.0) || !self.growth.is_finite() {
            return Err(Error::input("growth factor must be at least 1"));
        }
        Ok(())
    }
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub s_hat: SymmetricMatrix,
    /// Objective after each accepted iterate, starting from `S₀ = 0`.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub kkt: KktResidual,
    pub converged: bool,
    /// Proximal-gradient fixed-point residual at `Ŝ`.
    pub fixed_point_residual: f64,
    /// Tolerance the residual was compared to.
    pub grad_tol: f64,
}

impl SolveResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Empirical risk `n⁻¹ Σ_j ℓ(Y_j; ⟨S, X_j⟩)` with samples grouped by atom
/// so each distinct `X` is touched once per evaluation.
#[derive(Debug, Clone)]
pub struct EmpiricalRisk<'a> {
    data: &'a Dataset,
    loss: &'a dyn Loss,
    groups: Vec<(usize, Vec<f64>)>,
}

impl<'a> EmpiricalRisk<'a> {
    pub fn new(data: &'a Dataset, loss: &'a dyn Loss) -> Self {
        let mut by_atom: Vec<Vec<f64>> = vec![Vec::new(); data.atoms().len()];
        for s in data.samples() {
            by_atom[s.atom].push(s.y);
        }
        let groups = by_atom
            .into_iter()
            .enumerate()
            .filter(|(_, ys)| !ys.is_empty())
            .collect();
        Self { data, loss, groups }
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn value(&self, s: &SymmetricMatrix) -> f64 {
        let atoms = self.data.atoms();
        let total: f64 = self
            .groups
            .iter()
            .map(|(k, ys)| {
                let u = s.inner(&atoms[*k]);
                ys.iter().map(|&y| self.loss.value(y, u)).sum::<f64>()
            })
            .sum();
        total / self.data.n() as f64
    }

    /// Riesz representer of the directional derivative,
    /// `n⁻¹ Σ_j ℓ'(Y_j; ⟨S, X_j⟩) X_j`.
    pub fn gradient(&self, s: &SymmetricMatrix) -> SymmetricMatrix {
        self.value_and_gradient(s).1
    }

    pub fn value_and_gradient(&self, s: &SymmetricMatrix) -> (f64, SymmetricMatrix) {
        let atoms = self.data.atoms();
        let n = self.data.n() as f64;
        let mut grad = SymmetricMatrix::zeros(self.dim());
        let mut total = 0.0;
        for (k, ys) in &self.groups {
            let u = s.inner(&atoms[*k]);
            let mut coef = 0.0;
            for &y in ys {
                total += self.loss.value(y, u);
                coef += self.loss.d1(y, u);
            }
            grad.axpy(coef / n, &atoms[*k]);
        }
        (total / n, grad)
    }

    /// `max_j ℓ''(Y_j; 0) · max_j ‖X_j‖₂²`.
    pub fn curvature_bound(&self) -> f64 {
        let atoms = self.data.atoms();
        let mut d2 = 0.0_f64;
        let mut xnorm = 0.0_f64;
        for (k, ys) in &self.groups {
            xnorm = xnorm.max(atoms[*k].frobenius_norm().powi(2));
            for &y in ys {
                d2 = d2.max(self.loss.d2(y, 0.0));
            }
        }
        d2 * xnorm
    }
}

/// `P_n(ℓ • f_S) + ε‖S‖₁`.
pub fn objective(s: &SymmetricMatrix, data: &Dataset, loss: &dyn Loss, epsilon: f64) -> f64 {
    let risk = EmpiricalRisk::new(data, loss).value(s);
    if epsilon == 0.0 {
        risk
    } else {
        risk + epsilon * s.nuclear_norm()
    }
}

/// Gradient of the empirical risk at `S`.
pub fn gradient(s: &SymmetricMatrix, data: &Dataset, loss: &dyn Loss) -> SymmetricMatrix {
    EmpiricalRisk::new(data, loss).gradient(s)
}

/// Eigenvalue-wise proximal map of `θ|x| + I(x feasible)`.
fn scalar_prox(values: &[f64], theta: f64, constraint: &ConstraintSet) -> Vec<f64> {
    let soft: Vec<f64> = values.iter().map(|&l| soft_threshold(l, theta)).collect();
    match *constraint {
        ConstraintSet::Unconstrained => soft,
        ConstraintSet::OperatorNormBall(rho) => soft.iter().map(|x| x.clamp(-rho, rho)).collect(),
        ConstraintSet::FrobeniusBall(rho) => {
            // KKT of ½‖x−λ‖² + θ‖x‖₁ + μ(‖x‖² − ρ²)/2 gives x = soft(λ,θ)/(1+μ)
            let norm = soft.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= rho {
                soft
            } else {
                let shrink = rho / norm;
                soft.iter().map(|x| x * shrink).collect()
            }
        }
    }
}

fn prox_with_nuclear(
    s: &SymmetricMatrix,
    theta: f64,
    constraint: &ConstraintSet,
) -> Result<(SymmetricMatrix, f64)> {
    let sd = spectral_decompose(s)?;
    let mapped = scalar_prox(&sd.eigenvalues, theta, constraint);
    let nuclear = mapped.iter().map(|x| x.abs()).sum();
    Ok((SymmetricMatrix::from_eigen(&sd.eigenvectors, &mapped), nuclear))
}

/// Exact proximal map of `θ‖·‖₁ + I_D` for spectral `D`.
pub fn composite_prox(
    s: &SymmetricMatrix,
    theta: f64,
    constraint: &ConstraintSet,
) -> Result<SymmetricMatrix> {
    if !(theta >= 0.0) {
        return Err(Error::input("prox threshold must be nonnegative"));
    }
    constraint.validate()?;
    Ok(prox_with_nuclear(s, theta, constraint)?.0)
}

/// First-order optimality residuals for `Ŝ` over `D`.
///
/// With `W = −G/ε` the condition is `W ∈ ∂‖Ŝ‖₁ + N_D(Ŝ)/ε`. Working in the
/// eigenbasis of `Ŝ`, the supported block of `W` must equal `sign(Ŝ)` except
/// on eigenspaces at the boundary of `D`, where the normal cone absorbs a
/// semidefinite (operator ball) or radial (Frobenius ball) excess; the
/// unsupported block must have operator norm at most 1. For `ε = 0` the
/// condition is `−G ∈ N_D(Ŝ)` and the whole matrix is checked.
pub fn kkt_residual(
    gradient: &SymmetricMatrix,
    s_hat: &SymmetricMatrix,
    epsilon: f64,
    constraint: &ConstraintSet,
    zero_tol: f64,
) -> Result<KktResidual> {
    if !(epsilon >= 0.0) {
        return Err(Error::input("epsilon must be nonnegative"));
    }
    if gradient.dim() != s_hat.dim() {
        return Err(Error::Dimension {
            expected: s_hat.dim(),
            actual: gradient.dim(),
        });
    }
    let m = s_hat.dim();
    let sd = spectral_decompose(s_hat)?;
    let phi = &sd.eigenvectors;
    let scale = if epsilon > 0.0 { -1.0 / epsilon } else { -1.0 };
    let w = phi.transpose() * gradient.as_dmatrix() * phi * scale;

    let penalized = epsilon > 0.0;
    let support: Vec<bool> = sd
        .eigenvalues
        .iter()
        .map(|l| !penalized || l.abs() > zero_tol)
        .collect();
    let sign: Vec<f64> = sd
        .eigenvalues
        .iter()
        .map(|&l| if penalized && l.abs() > zero_tol { l.signum() } else { 0.0 })
        .collect();

    // residual of the supported part, in eigen coordinates
    let mut r = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if support[i] || support[j] {
                r[(i, j)] = w[(i, j)] - if i == j { sign[i] } else { 0.0 };
            }
        }
    }

    match *constraint {
        ConstraintSet::Unconstrained => {}
        ConstraintSet::OperatorNormBall(rho) => {
            let band = BOUNDARY_TOL * rho.max(1.0);
            let upper: Vec<usize> = (0..m).filter(|&k| sd.eigenvalues[k] >= rho - band).collect();
            let lower: Vec<usize> = (0..m).filter(|&k| sd.eigenvalues[k] <= -rho + band).collect();
            // normal cone: PSD on the +ρ eigenspace, NSD on the −ρ eigenspace
            keep_semidefinite_violation(&mut r, &upper, true)?;
            keep_semidefinite_violation(&mut r, &lower, false)?;
        }
        ConstraintSet::FrobeniusBall(rho) => {
            let norm = s_hat.frobenius_norm();
            if norm >= rho * (1.0 - BOUNDARY_TOL) && norm > 0.0 {
                // normal cone is the ray through Ŝ, which is diagonal here
                let diag: Vec<f64> = sd.eigenvalues.clone();
                let dot: f64 = (0..m).map(|k| r[(k, k)] * diag[k]).sum();
                let mu = (dot / (norm * norm)).max(0.0);
                for k in 0..m {
                    r[(k, k)] -= mu * diag[k];
                }
            }
        }
    }

    let low_rank_residual = r.norm();
    let spectral_excess = if penalized {
        let idx: Vec<usize> = (0..m).filter(|&k| !support[k]).collect();
        if idx.is_empty() {
            0.0
        } else {
            let block = w.select_rows(idx.iter()).select_columns(idx.iter());
            let block = SymmetricMatrix::symmetrize(block)?;
            (block.operator_norm() - 1.0).max(0.0)
        }
    } else {
        0.0
    };
    Ok(KktResidual {
        low_rank_residual,
        spectral_excess,
    })
}

// Replaces the (idx × idx) block of `r` by the part that violates the
// required semidefiniteness (negative part when `psd`, positive otherwise).
fn keep_semidefinite_violation(r: &mut DMatrix<f64>, idx: &[usize], psd: bool) -> Result<()> {
    if idx.is_empty() {
        return Ok(());
    }
    let block = r.select_rows(idx.iter()).select_columns(idx.iter());
    let block = SymmetricMatrix::symmetrize(block)?;
    let sd = spectral_decompose(&block)?;
    let violating = sd.map_eigenvalues(|l| if psd { l.min(0.0) } else { l.max(0.0) });
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            r[(i, j)] = violating.get(a, b);
        }
    }
    Ok(())
}

/// Default fixed-point tolerance `1e-8 · (1 + ‖n⁻¹ Σ Y_j X_j‖₂)`.
pub fn default_grad_tol(data: &Dataset) -> f64 {
    let scale = data.data_matrix().frobenius_norm() / data.n() as f64;
    1e-8 * (1.0 + scale)
}

/// Accelerated proximal gradient from `S₀ = 0`.
///
/// Each iteration tries a step `growth` times larger than the last accepted
/// one and shrinks it until the quadratic upper model holds. An iterate is
/// accepted only if it does not increase the objective; otherwise (and,
/// with `restart`, whenever the momentum direction opposes the last step)
/// momentum is reset. Stops once the fixed-point residual
/// `‖S − prox(S − γ∇R(S), γε)‖₂ / γ` is at most `grad_tol`.
pub fn solve(
    data: &Dataset,
    loss: &dyn Loss,
    config: &SolverConfig,
    constraint: &ConstraintSet,
) -> Result<SolveResult> {
    config.validate()?;
    constraint.validate()?;
    let risk = EmpiricalRisk::new(data, loss);
    let eps = config.epsilon;
    let grad_tol = config.grad_tol.unwrap_or_else(|| default_grad_tol(data));
    let mut step = match config.initial_step {
        Some(s) => s,
        None => {
            let l0 = risk.curvature_bound();
            if l0 > 0.0 { 1.0 / l0 } else { 1.0 }
        }
    };

    let m = data.dim();
    let mut x = SymmetricMatrix::zeros(m);
    let mut x_obj = risk.value(&x);
    check_finite(x_obj)?;
    let mut trace = vec![x_obj];
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    let (mut fx, mut gx) = risk.value_and_gradient(&x);
    for iter in 1..=config.max_iters {
        iterations = iter;
        let (fy, gy) = if t == 1.0 && y == x {
            (fx, gx.clone())
        } else {
            risk.value_and_gradient(&y)
        };
        check_finite(fy)?;

        let mut trial = (step * config.growth).min(1e12);
        let (z, z_nuclear, fz) = loop {
            let mut forward = y.clone();
            forward.axpy(-trial, &gy);
            let (z, z_nuclear) = prox_with_nuclear(&forward, trial * eps, constraint)?;
            let diff = &z - &y;
            let fz = risk.value(&z);
            let model = fy + gy.inner(&diff) + diff.frobenius_norm().powi(2) / (2.0 * trial);
            let slack = 10.0 * f64::EPSILON * fy.abs();
            if fz.is_finite() && (fz <= model + slack || diff.frobenius_norm() == 0.0) {
                break (z, z_nuclear, fz);
            }
            trial *= config.shrink;
            if trial < 1e-300 {
                return Err(Error::numerical("backtracking step underflowed"));
            }
        };
        step = trial;
        let z_obj = fz + eps * z_nuclear;

        if z_obj <= x_obj {
            let prev = std::mem::replace(&mut x, z);
            x_obj = z_obj;
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            let delta = &x - &prev;
            // gradient-mapping restart: the step y → x points against x − prev
            let stale = config.restart && (&y - &x).inner(&delta) > 0.0;
            if stale {
                t = 1.0;
                y = x.clone();
            } else {
                t = t_next;
                y = x.clone();
                y.axpy(momentum, &delta);
            }
        } else {
            t = 1.0;
            y = x.clone();
        }
        trace.push(x_obj);

        let fg = risk.value_and_gradient(&x);
        fx = fg.0;
        gx = fg.1;
        let mut forward = x.clone();
        forward.axpy(-step, &gx);
        let (p, _) = prox_with_nuclear(&forward, step * eps, constraint)?;
        residual = (&x - &p).frobenius_norm() / step;
        if residual <= grad_tol {
            converged = true;
            break;
        }
    }

    let _ = fx;
    let kkt = kkt_residual(&gx, &x, eps, constraint, x.default_zero_tol())?;
    Ok(SolveResult {
        s_hat: x,
        objective_trace: trace,
        iterations,
        kkt,
        converged,
        fixed_point_residual: residual,
        grad_tol,
    })
}

fn check_finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::numerical(format!("objective is not finite ({v})")))
    }
}

/// True when the first-order residuals at `result.s_hat` and its
/// constraint violation are all within `tol`.
pub fn certify(
    result: &SolveResult,
    data: &Dataset,
    loss: &dyn Loss,
    epsilon: f64,
    constraint: &ConstraintSet,
    tol: f64,
) -> Result<bool> {
    Ok(certificate(&result.s_hat, data, loss, epsilon, constraint)?.passes(tol))
}

/// Residuals and feasibility of an arbitrary candidate `Ŝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kkt: KktResidual,
    pub constraint_violation: f64,
}

impl Certificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.kkt.low_rank_residual <= tol
            && self.kkt.spectral_excess <= tol
            && self.constraint_violation <= tol
    }
}

pub fn certificate(
    s_hat: &SymmetricMatrix,
    data: &Dataset,
    loss: &dyn Loss,
    epsilon: f64,
    constraint: &ConstraintSet,
) -> Result<Certificate> {
    let g = gradient(s_hat, data, loss);
    let kkt = kkt_residual(&g, s_hat, epsilon, constraint, s_hat.default_zero_tol())?;
    Ok(Certificate {
        kkt,
        constraint_violation: constraint.violation(s_hat),
    })
}

/// Convenience wrapper owning its loss handle.
pub fn solve_with(
    data: &Dataset,
    loss: &Arc<dyn Loss>,
    config: &SolverConfig,
    constraint: &ConstraintSet,
) -> Result<SolveResult> {
    solve(data, loss.as_ref(), config, constraint)
}
