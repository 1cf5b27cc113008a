//! Quantities entering the sharp low-rank oracle inequality
//!
//! ```text
//! E(f_Ŝ) ≤ E(f_S) + min( 3/τ(a) · β²(S) · rank(S) · ε² , 2ε‖S‖₁ ) + C(a) · t(S;ε)/n
//! ```
//!
//! valid with probability at least `1 − e^{−t}` whenever
//! `ε ≥ D · L(a) · Δ / √n`. `B`, `C` and `D` are unspecified numerical
//! constants; they are configuration here and the harness calibrates `C`.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{l2_norm_f, DesignDistribution, RiskModel};
use crate::error::{Error, Result};
use crate::loss::LossConstants;
use crate::matrix::{SupportProjector, SymmetricMatrix};
use crate::seed::mix_seed;

/// Monte Carlo estimate of `Δ = E‖n^{−1/2} Σ_j ε_j X_j‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherStats {
    pub delta: f64,
    /// `E‖Ξ‖ = Δ/√n` with `Ξ = n⁻¹ Σ_j ε_j X_j`.
    pub xi_norm_mean: f64,
    pub reps: usize,
    /// Standard error of `delta`.
    pub stderr: f64,
    pub n: usize,
}

impl RademacherStats {
    fn from_draws(draws: &[f64], n: usize) -> Self {
        let reps = draws.len();
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let stderr = if reps > 1 {
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            (var / reps as f64).sqrt()
        } else {
            0.0
        };
        Self {
            delta: mean,
            xi_norm_mean: mean / (n as f64).sqrt(),
            reps,
            stderr,
            n,
        }
    }
}

/// `‖n^{−1/2} Σ_j ε_j X_j‖` for given atoms and signs.
pub fn rademacher_norm(xs: &[&SymmetricMatrix], signs: &[f64]) -> f64 {
    let mut sum = SymmetricMatrix::zeros(xs[0].dim());
    for (x, &s) in xs.iter().zip(signs) {
        sum.axpy(s, x);
    }
    sum.operator_norm() / (xs.len() as f64).sqrt()
}

/// Unconditional estimate: every replicate redraws `X_1..X_n` from the
/// design and the Rademacher signs. Replicate `r` uses seed
/// `mix_seed(seed, r)`, so the result does not depend on the thread count.
pub fn estimate_delta(
    design: &DesignDistribution,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<RademacherStats> {
    if n == 0 || reps == 0 {
        return Err(Error::input("estimate_delta needs n ≥ 1 and reps ≥ 1"));
    }
    let picker = WeightedIndex::new(design.probabilities())
        .map_err(|e| Error::input(format!("invalid design weights: {e}")))?;
    let atoms = design.atoms();
    let draws: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, r as u64));
            let mut coef = vec![0.0; atoms.len()];
            for _ in 0..n {
                let k = picker.sample(&mut rng);
                coef[k] += if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
            let mut sum = SymmetricMatrix::zeros(design.dim());
            for (c, a) in coef.iter().zip(atoms) {
                if *c != 0.0 {
                    sum.axpy(*c, a);
                }
            }
            sum.operator_norm() / (n as f64).sqrt()
        })
        .collect();
    Ok(RademacherStats::from_draws(&draws, n))
}

/// Conditional estimate of `E_ε‖n^{−1/2} Σ_j ε_j X_j‖` for a fixed sample.
pub fn estimate_delta_conditional(
    sample: &[SymmetricMatrix],
    reps: usize,
    seed: u64,
) -> Result<RademacherStats> {
    if sample.is_empty() || reps == 0 {
        return Err(Error::input("conditional Δ needs a nonempty sample and reps ≥ 1"));
    }
    let xs: Vec<&SymmetricMatrix> = sample.iter().collect();
    let n = xs.len();
    let draws: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, r as u64));
            let signs: Vec<f64> = (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            rademacher_norm(&xs, &signs)
        })
        .collect();
    Ok(RademacherStats::from_draws(&draws, n))
}

/// `σ_X = ‖E X²‖^{1/2}` and `U_X = max ‖X‖` for a finite design.
pub fn sigma_and_u(design: &DesignDistribution) -> (f64, f64) {
    let mut second = SymmetricMatrix::zeros(design.dim());
    let mut u = 0.0_f64;
    for (a, p) in design.atoms().iter().zip(design.probabilities()) {
        second.axpy(*p, &a.square());
        u = u.max(a.operator_norm());
    }
    (second.operator_norm().sqrt(), u)
}

/// `4 · max( σ_X √log(2m), U_X log(2m)/√n )`.
pub fn ahlswede_winter_bound(sigma_x: f64, u_x: f64, m: usize, n: usize) -> f64 {
    let log2m = (2.0 * m as f64).ln();
    let a = sigma_x * log2m.sqrt();
    let b = u_x * log2m / (n as f64).sqrt();
    4.0 * a.max(b)
}

/// The unspecified numerical constants `B`, `C`, `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantsConfig {
    /// Inside `t(S;ε)`.
    #[serde(rename = "B")]
    pub b: f64,
    /// Multiplier in `C(a)`.
    #[serde(rename = "C")]
    pub c: f64,
    /// Multiplier in the `ε` threshold.
    #[serde(rename = "D")]
    pub d_thresh: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            b: 2.0,
            c: 1.0,
            d_thresh: 4.0,
        }
    }
}

impl ConstantsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("B", self.b), ("C", self.c), ("D", self.d_thresh)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::input(format!("constant {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `D · L(a) · Δ / √n`.
pub fn epsilon_threshold(constants: &ConstantsConfig, l_a: f64, delta: f64, n: usize) -> f64 {
    constants.d_thresh * l_a * delta / (n as f64).sqrt()
}

/// `β(S) = √d` for uniform sampling from an orthonormal basis of `d`
/// elements, for every `S`.
///
/// Here `‖f_A‖_{L₂(Π)} = ‖A‖₂/√d` and `sup ‖P_L A‖₂/‖A‖₂ = 1` over the cone,
/// attained on the range of `P_L`.
pub fn beta_uniform_basis(design: &DesignDistribution) -> Result<f64> {
    if !design.is_orthonormal_basis() {
        return Err(Error::input(
            "closed-form β requires a uniform orthonormal-basis design",
        ));
    }
    Ok((design.num_atoms() as f64).sqrt())
}

/// Sampled lower bound on `β^{(b)}(L; Π)` with `L = supp(S)`.
///
/// Draws random `A = P_L(G₁) + s·P_L⊥(G₂)` scaled to lie in the cone
/// `‖P_L⊥ A‖₁ ≤ b‖P_L A‖₁` and returns the largest `‖P_L A‖₂ / ‖f_A‖`.
/// A quarter of the draws have `s = 0`, i.e. lie in the range of `P_L`.
/// Returns `+∞` when some cone direction is invisible to the design.
pub fn beta_sample_lower(
    s: &SymmetricMatrix,
    design: &DesignDistribution,
    b: f64,
    num_samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::input("cone parameter b must be positive"));
    }
    if num_samples == 0 {
        return Err(Error::input("num_samples must be positive"));
    }
    let support = SupportProjector::of(s)?;
    if support.rank() == 0 {
        return Err(Error::input("β sampler needs rank(S) ≥ 1"));
    }
    let m = s.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    for k in 0..num_samples {
        let low = support.apply(&gaussian_symmetric(m, &mut rng))?;
        let high = support.apply_complement(&gaussian_symmetric(m, &mut rng))?;
        let low_nuc = low.nuclear_norm();
        let high_nuc = high.nuclear_norm();
        let weight = if k % 4 == 0 || high_nuc == 0.0 {
            0.0
        } else {
            rng.random::<f64>() * b * low_nuc / high_nuc
        };
        let mut a = low.clone();
        a.axpy(weight, &high);
        let f_norm = l2_norm_f(&a, design)?;
        let num = low.frobenius_norm();
        if f_norm == 0.0 {
            if num > 0.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        best = best.max(num / f_norm);
    }
    Ok(best)
}

fn gaussian_symmetric(m: usize, rng: &mut impl Rng) -> SymmetricMatrix {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let g: f64 = rng.sample(rand_distr::StandardNormal);
            v[i * m + j] = g;
            v[j * m + i] = g;
        }
    }
    SymmetricMatrix::new(m, v).expect("symmetric by construction")
}

/// Arguments of `t(S; ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceArgs {
    pub t: f64,
    pub s_nuclear: f64,
    pub n: usize,
    pub epsilon: f64,
    pub q: f64,
    pub a: f64,
    pub l_a: f64,
    pub b: f64,
}

/// `t(S;ε) = t + 3 log( B log₂( ‖S‖₁ ∨ n ∨ ε ∨ Q ∨ a⁻¹ ∨ L(a)⁻¹ ∨ 2 ) )`.
pub fn t_s_eps(args: &ConfidenceArgs) -> Result<f64> {
    let ConfidenceArgs {
        t,
        s_nuclear,
        n,
        epsilon,
        q,
        a,
        l_a,
        b,
    } = *args;
    if !(t >= 0.0) || !(s_nuclear >= 0.0) {
        return Err(Error::input("t and ‖S‖₁ must be nonnegative"));
    }
    if n == 0 || !(epsilon > 0.0) || !(q > 0.0) || !(a > 0.0) || !(l_a > 0.0) || !(b > 0.0) {
        return Err(Error::input(
            "t(S;ε) needs positive n, ε, Q, a, L(a) and B",
        ));
    }
    let inner = [s_nuclear, n as f64, epsilon, q, 1.0 / a, 1.0 / l_a, 2.0]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(t + 3.0 * (b * inner.log2()).ln())
}

/// `C(a) = C · max( L(a)²/τ(a), L(a)·a )`.
pub fn c_of_a(constants: &ConstantsConfig, l_a: f64, tau_a: f64, a: f64) -> f64 {
    constants.c * (l_a * l_a / tau_a).max(l_a * a)
}

/// Every term of the bound at one oracle, with the measured left side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `E(f_Ŝ)`.
    pub lhs: f64,
    /// `E(f_S)`.
    pub oracle_excess: f64,
    pub oracle_rank: usize,
    pub oracle_nuclear: f64,
    pub beta: f64,
    /// `3/τ(a) · β² · rank(S) · ε²`.
    pub rank_term: f64,
    /// `2ε‖S‖₁`.
    pub nuclear_term: f64,
    pub min_term: f64,
    pub t_s_eps: f64,
    pub c_of_a: f64,
    /// `C(a) · t(S;ε)/n`.
    pub residual_term: f64,
    pub rhs: f64,
    pub violated: bool,
}

impl BoundReport {
    /// Smallest `C` for which this report would not be violated (0 when
    /// the bound holds without the residual term).
    pub fn required_c(&self, constants: &ConstantsConfig) -> f64 {
        let per_unit_c = self.residual_term / constants.c;
        let excess = self.lhs - self.oracle_excess - self.min_term;
        if excess <= 0.0 {
            0.0
        } else {
            excess / per_unit_c
        }
    }
}

/// Everything the bound needs besides the oracle and `E(f_Ŝ)`.
#[derive(Debug, Clone)]
pub struct BoundContext<'a> {
    pub risk: &'a RiskModel,
    pub loss_constants: LossConstants,
    pub q: f64,
    pub n: usize,
    pub epsilon: f64,
    pub t: f64,
    pub constants: ConstantsConfig,
    /// `β(S)`; `None` uses the closed form for basis designs.
    pub beta: Option<f64>,
}

impl BoundContext<'_> {
    fn beta(&self) -> Result<f64> {
        match self.beta {
            Some(b) => Ok(b),
            None => beta_uniform_basis(self.risk.design()),
        }
    }

    /// Fills a [`BoundReport`] for oracle `S` given `E(f_Ŝ)`.
    pub fn assemble(&self, oracle: &SymmetricMatrix, s_hat_excess: f64) -> Result<BoundReport> {
        self.constants.validate()?;
        let LossConstants { a, l_a, tau_a } = self.loss_constants;
        let oracle_excess = self.risk.excess_risk(oracle)?;
        let oracle_rank = oracle.rank(oracle.default_zero_tol());
        let oracle_nuclear = oracle.nuclear_norm();
        let beta = self.beta()?;
        let eps = self.epsilon;
        let rank_term = if oracle_rank == 0 {
            0.0
        } else {
            3.0 / tau_a * beta * beta * oracle_rank as f64 * eps * eps
        };
        let nuclear_term = 2.0 * eps * oracle_nuclear;
        let min_term = rank_term.min(nuclear_term);
        let t_s = t_s_eps(&ConfidenceArgs {
            t: self.t,
            s_nuclear: oracle_nuclear,
            n: self.n,
            epsilon: eps,
            q: self.q,
            a,
            l_a,
            b: self.constants.b,
        })?;
        let c_a = c_of_a(&self.constants, l_a, tau_a, a);
        let residual_term = c_a * t_s / self.n as f64;
        let rhs = oracle_excess + min_term + residual_term;
        Ok(BoundReport {
            lhs: s_hat_excess,
            oracle_excess,
            oracle_rank,
            oracle_nuclear,
            beta,
            rank_term,
            nuclear_term,
            min_term,
            t_s_eps: t_s,
            c_of_a: c_a,
            residual_term,
            rhs,
            violated: s_hat_excess > rhs,
        })
    }
}

/// One-shot form of [`BoundContext::assemble`].
pub fn assemble_bound(
    oracle: &SymmetricMatrix,
    s_hat_excess: f64,
    context: &BoundContext<'_>,
) -> Result<BoundReport> {
    context.assemble(oracle, s_hat_excess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{orthonormal_basis_design, TruthModel};
    use crate::loss::squared_loss;

    #[test]
    fn aw_bound_examples() {
        let big_n = ahlswede_winter_bound(1.0, 1.0, 1, usize::MAX);
        assert!((big_n - 4.0 * 2f64.ln().sqrt()).abs() < 1e-9);
        assert!((big_n - 3.3302).abs() < 1e-4);
        let u_dom = ahlswede_winter_bound(0.01, 1.0, 8, 4);
        assert!((u_dom - 2.0 * 16f64.ln()).abs() < 1e-12);
        assert!((u_dom - 5.5452).abs() < 1e-4);
    }

    #[test]
    fn sigma_and_u_examples() {
        let (s, u) = sigma_and_u(&orthonormal_basis_design(2).unwrap());
        assert!((s - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((u - 1.0).abs() < 1e-12);
        let single = DesignDistribution::new(vec![SymmetricMatrix::identity(3)], vec![1.0]).unwrap();
        assert_eq!(sigma_and_u(&single), (1.0, 1.0));
        let scaled = DesignDistribution::new(vec![SymmetricMatrix::identity(3).scale(2.5)], vec![1.0]).unwrap();
        let (s, u) = sigma_and_u(&scaled);
        assert!((s - 2.5).abs() < 1e-12 && (u - 2.5).abs() < 1e-12);
    }

    #[test]
    fn epsilon_threshold_examples() {
        let c = ConstantsConfig { d_thresh: 8.0, ..ConstantsConfig::default() };
        assert!((epsilon_threshold(&c, 4.0, 2.0, 100) - 6.4).abs() < 1e-12);
        assert_eq!(epsilon_threshold(&c, 4.0, 0.0, 100), 0.0);
        let one = epsilon_threshold(&c, 4.0, 1.3, 50);
        assert!((epsilon_threshold(&c, 4.0, 2.6, 50) - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn t_s_eps_examples() {
        let base = ConfidenceArgs { t: 3.0, s_nuclear: 1.0, n: 2, epsilon: 0.5, q: 1.0, a: 1.0, l_a: 1.0, b: 2.0 };
        let v = t_s_eps(&base).unwrap();
        assert!((v - (3.0 + 3.0 * 2f64.ln())).abs() < 1e-12);
        assert!((v - 5.0794).abs() < 1e-4);

        let big_n = ConfidenceArgs { t: 0.0, n: 1024, b: 1.0, ..base };
        let v = t_s_eps(&big_n).unwrap();
        assert!((v - 3.0 * 10f64.ln()).abs() < 1e-12);
        assert!((v - 6.9078).abs() < 1e-4);

        // beyond the max point, growing the dominant argument grows t(S;ε)
        let larger = ConfidenceArgs { n: 4096, ..big_n };
        assert!(t_s_eps(&larger).unwrap() > t_s_eps(&big_n).unwrap());
        let small_a = ConfidenceArgs { a: 1e-6, ..big_n };
        assert!(t_s_eps(&small_a).unwrap() > t_s_eps(&big_n).unwrap());

        assert!(t_s_eps(&ConfidenceArgs { epsilon: 0.0, ..base }).is_err());
        assert!(t_s_eps(&ConfidenceArgs { b: -1.0, ..base }).is_err());
    }

    #[test]
    fn c_of_a_examples() {
        let c = ConstantsConfig::default();
        assert_eq!(c_of_a(&c, 4.0, 2.0, 1.0), 8.0);
        assert_eq!(c_of_a(&c, 16.0, 2.0, 4.0), 128.0);
        assert_eq!(c_of_a(&c, 1.0, 1.0, 1.0), 1.0);
        let c3 = ConstantsConfig { c: 3.0, ..c };
        assert_eq!(c_of_a(&c3, 4.0, 2.0, 1.0), 24.0);
    }

    #[test]
    fn beta_closed_form_and_sampler() {
        let design = orthonormal_basis_design(2).unwrap();
        let beta = beta_uniform_basis(&design).unwrap();
        assert!((beta - 3f64.sqrt()).abs() < 1e-15);
        let s = SymmetricMatrix::diag(&[1.0, 0.0]);
        let lower = beta_sample_lower(&s, &design, 5.0, 200, 1).unwrap();
        assert!(lower >= 0.99 * beta && lower <= beta + 1e-9);
        assert!(beta_sample_lower(&SymmetricMatrix::zeros(2), &design, 5.0, 10, 1).is_err());

        let custom = DesignDistribution::new(vec![SymmetricMatrix::identity(2)], vec![1.0]).unwrap();
        assert!(beta_uniform_basis(&custom).is_err());
        // e₂e₂ᵀ alone vanishes on the range of P_L
        let blind = DesignDistribution::new(vec![SymmetricMatrix::diag(&[0.0, 1.0])], vec![1.0]).unwrap();
        assert_eq!(beta_sample_lower(&s, &blind, 5.0, 20, 2).unwrap(), f64::INFINITY);
    }

    #[test]
    fn range_direction_ratio_is_sqrt_d() {
        let design = orthonormal_basis_design(3).unwrap();
        let s = SymmetricMatrix::diag(&[2.0, -1.0, 0.0]);
        let l = SupportProjector::of(&s).unwrap();
        let a = l.apply(&SymmetricMatrix::from_rows(&[
            vec![0.3, 1.0, -0.2],
            vec![1.0, 0.1, 0.7],
            vec![-0.2, 0.7, 0.5],
        ]).unwrap()).unwrap();
        let ratio = l.apply(&a).unwrap().frobenius_norm() / l2_norm_f(&a, &design).unwrap();
        assert!((ratio - 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn delta_single_sample_is_exact() {
        let design = orthonormal_basis_design(3).unwrap();
        let stats = estimate_delta(&design, 1, 4000, 9).unwrap();
        let exact: f64 = design
            .atoms()
            .iter()
            .zip(design.probabilities())
            .map(|(a, p)| p * a.operator_norm())
            .sum();
        assert!((stats.delta - exact).abs() <= 3.0 * stats.stderr.max(1e-12));
        assert_eq!(stats.delta, stats.xi_norm_mean * 1.0);
    }

    #[test]
    fn delta_consistency_and_determinism() {
        let design = orthonormal_basis_design(4).unwrap();
        let a = estimate_delta(&design, 50, 300, 17).unwrap();
        let b = estimate_delta(&design, 50, 300, 17).unwrap();
        assert_eq!(a, b);
        assert!((a.delta - a.xi_norm_mean * 50f64.sqrt()).abs() <= 1e-12 * a.delta);
        let (s, u) = sigma_and_u(&design);
        assert!(a.delta + 3.0 * a.stderr <= ahlswede_winter_bound(s, u, 4, 50));
    }

    #[test]
    fn degenerate_oracle_report() {
        let design = orthonormal_basis_design(3).unwrap();
        let truth = TruthModel::gaussian(SymmetricMatrix::diag(&[1.0, 0.0, 0.0]), 0.1).unwrap();
        let risk = RiskModel::new(&design, &truth, squared_loss()).unwrap();
        let ctx = BoundContext {
            risk: &risk,
            loss_constants: LossConstants { a: 2.0, l_a: 8.0, tau_a: 2.0 },
            q: 4.0,
            n: 100,
            epsilon: 0.3,
            t: 3.0,
            constants: ConstantsConfig::default(),
            beta: None,
        };
        let zero = SymmetricMatrix::zeros(3);
        let r = ctx.assemble(&zero, 0.01).unwrap();
        assert_eq!(r.rank_term, 0.0);
        assert_eq!(r.nuclear_term, 0.0);
        assert!((r.rhs - (r.oracle_excess + r.residual_term)).abs() < 1e-12);

        let r = ctx.assemble(&truth.s_star, 0.0).unwrap();
        assert!(!r.violated);
        assert!(r.min_term <= r.rank_term && r.min_term <= r.nuclear_term);
        let sum = r.oracle_excess + r.min_term + r.residual_term;
        assert!((r.rhs - sum).abs() <= 1e-12);

        // doubling ε quadruples the rank term
        let ctx2 = BoundContext { epsilon: 0.6, ..ctx.clone() };
        let r2 = ctx2.assemble(&truth.s_star, 0.0).unwrap();
        assert!((r2.rank_term - 4.0 * r.rank_term).abs() < 1e-12);
    }
}
