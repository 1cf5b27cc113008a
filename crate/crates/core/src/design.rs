//! Finite-support design distributions, truth models, data generation and
//! exact population/excess risks.

use std::path::Path;
use std::sync::Arc;

use rand::distr::{Distribution, weighted::WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::matrix::SymmetricMatrix;
use crate::numeric::{convex_argmin, gauss_legendre_on};
use crate::solver::ConstraintSet;

/// Gauss–Legendre nodes used for truncated-Gaussian expectations.
pub const QUADRATURE_NODES: usize = 64;

/// Default truncation of Gaussian noise, in units of `σ`.
pub const DEFAULT_TRUNCATION: f64 = 6.0;

/// Law `Π` of the design matrix `X` with finitely many atoms.
#[derive(Debug, Clone)]
pub struct DesignDistribution {
    dim: usize,
    atoms: Arc<Vec<SymmetricMatrix>>,
    probabilities: Vec<f64>,
    is_orthonormal_basis: bool,
}

impl DesignDistribution {
    /// Builds a design from atoms and probabilities.
    ///
    /// The orthonormal-basis flag is set when the atoms are pairwise
    /// Frobenius-orthonormal, span the symmetric matrices, and carry uniform
    /// weights.
    pub fn new(atoms: Vec<SymmetricMatrix>, probabilities: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::input("design needs at least one atom"));
        }
        if atoms.len() != probabilities.len() {
            return Err(Error::Dimension {
                expected: atoms.len(),
                actual: probabilities.len(),
            });
        }
        let dim = atoms[0].dim();
        if let Some(bad) = atoms.iter().find(|a| a.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: bad.dim(),
            });
        }
        if probabilities.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::input("design probabilities must be finite and nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!(
                "design probabilities sum to {total}, not 1"
            )));
        }
        let k = atoms.len();
        let uniform = probabilities
            .iter()
            .all(|p| (p - 1.0 / k as f64).abs() <= 1e-12);
        let spans = k == dim * (dim + 1) / 2;
        let orthonormal = uniform
            && spans
            && (0..k).all(|i| {
                (i..k).all(|j| {
                    let target = if i == j { 1.0 } else { 0.0 };
                    (atoms[i].inner(&atoms[j]) - target).abs() <= 1e-9
                })
            });
        Ok(Self {
            dim,
            atoms: Arc::new(atoms),
            probabilities,
            is_orthonormal_basis: orthonormal,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[SymmetricMatrix] {
        &self.atoms
    }

    pub fn shared_atoms(&self) -> Arc<Vec<SymmetricMatrix>> {
        Arc::clone(&self.atoms)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_orthonormal_basis(&self) -> bool {
        self.is_orthonormal_basis
    }

    fn check_dim(&self, a: &SymmetricMatrix) -> Result<()> {
        if a.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: a.dim(),
            });
        }
        Ok(())
    }

    /// `f_A(atom_k) = ⟨A, atom_k⟩` for every atom.
    pub fn evaluate(&self, a: &SymmetricMatrix) -> Result<Vec<f64>> {
        self.check_dim(a)?;
        Ok(self.atoms.iter().map(|x| a.inner(x)).collect())
    }
}

/// Uniform sampling from the unit-Frobenius basis of symmetric matrices,
/// `{e_i e_iᵀ} ∪ {(e_i e_jᵀ + e_j e_iᵀ)/√2 : i < j}` (matrix completion).
pub fn orthonormal_basis_design(m: usize) -> Result<DesignDistribution> {
    if m == 0 {
        return Err(Error::input("design dimension must be at least 1"));
    }
    let mut atoms = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        atoms.push(SymmetricMatrix::basis_element(m, i, i));
    }
    for i in 0..m {
        for j in (i + 1)..m {
            atoms.push(SymmetricMatrix::basis_element(m, i, j));
        }
    }
    let d = atoms.len();
    DesignDistribution::new(atoms, vec![1.0 / d as f64; d])
}

/// `‖f_A‖_{L₂(Π)} = (Σ_k p_k ⟨A, atom_k⟩²)^{1/2}`.
pub fn l2_norm_f(a: &SymmetricMatrix, design: &DesignDistribution) -> Result<f64> {
    let values = design.evaluate(a)?;
    Ok(values
        .iter()
        .zip(design.probabilities())
        .map(|(v, p)| p * v * v)
        .sum::<f64>()
        .sqrt())
}

/// `a = max_k sup_{S∈D} |⟨S, atom_k⟩|` for a spectral constraint set.
pub fn sup_bound_a(constraint: &ConstraintSet, design: &DesignDistribution) -> Result<f64> {
    match *constraint {
        ConstraintSet::Unconstrained => Err(Error::input(
            "prediction bound a is undefined for an unconstrained set; supply it explicitly",
        )),
        // dual of the operator norm is the nuclear norm
        ConstraintSet::OperatorNormBall(rho) => Ok(rho
            * design
                .atoms()
                .iter()
                .map(SymmetricMatrix::nuclear_norm)
                .fold(0.0, f64::max)),
        ConstraintSet::FrobeniusBall(rho) => Ok(rho
            * design
                .atoms()
                .iter()
                .map(SymmetricMatrix::frobenius_norm)
                .fold(0.0, f64::max)),
    }
}

/// Conditional law of `Y` given `X = x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `Y = ⟨S★, X⟩ + ξ` with `ξ ~ N(0, σ²)` truncated to `[−c, c]`,
    /// `c = truncation · σ`.
    Gaussian {
        sigma: f64,
        #[serde(default = "default_truncation")]
        truncation: f64,
    },
    /// `Y ∈ {−1, 1}` with `P(Y = 1 | X = x) = link(⟨S★, x⟩)`.
    Classification { link: Link },
}

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION
}

/// Link function for classification truths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Link {
    /// `p(u) = 1/(1 + e^{−2 s u})`; for the exponential loss the Bayes
    /// rule is then `s·u`.
    Logistic { scale: f64 },
    /// `p(u) = p`, independent of `x`.
    Constant { p: f64 },
}

impl Link {
    pub fn probability(&self, u: f64) -> f64 {
        match *self {
            Link::Logistic { scale } => 1.0 / (1.0 + (-2.0 * scale * u).exp()),
            Link::Constant { p } => p,
        }
    }
}

/// Ground truth `S★` and the noise mechanism generating responses.
#[derive(Debug, Clone)]
pub struct TruthModel {
    pub s_star: SymmetricMatrix,
    pub noise: NoiseModel,
}

impl TruthModel {
    pub fn gaussian(s_star: SymmetricMatrix, sigma: f64) -> Result<Self> {
        Self::new(
            s_star,
            NoiseModel::Gaussian {
                sigma,
                truncation: DEFAULT_TRUNCATION,
            },
        )
    }

    pub fn classification(s_star: SymmetricMatrix, link: Link) -> Result<Self> {
        Self::new(s_star, NoiseModel::Classification { link })
    }

    pub fn new(s_star: SymmetricMatrix, noise: NoiseModel) -> Result<Self> {
        match noise {
            NoiseModel::Gaussian { sigma, truncation } => {
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return Err(Error::input("noise sigma must be finite and nonnegative"));
                }
                if !(truncation > 0.0) || !truncation.is_finite() {
                    return Err(Error::input("noise truncation must be finite and positive"));
                }
            }
            NoiseModel::Classification { link } => match link {
                Link::Logistic { scale } if !scale.is_finite() => {
                    return Err(Error::input("logistic scale must be finite"));
                }
                Link::Constant { p } if !(0.0..=1.0).contains(&p) => {
                    return Err(Error::input("link probability must lie in [0, 1]"));
                }
                _ => {}
            },
        }
        Ok(Self { s_star, noise })
    }

    /// Half-width `c` of the noise support (0 for classification).
    pub fn noise_bound(&self) -> f64 {
        match self.noise {
            NoiseModel::Gaussian { sigma, truncation } => sigma * truncation,
            NoiseModel::Classification { .. } => 0.0,
        }
    }

    /// `sup |Y|` over the design's atoms.
    pub fn response_bound(&self, design: &DesignDistribution) -> Result<f64> {
        match self.noise {
            NoiseModel::Gaussian { .. } => {
                let signal = design
                    .evaluate(&self.s_star)?
                    .into_iter()
                    .fold(0.0_f64, |m, v| m.max(v.abs()));
                Ok(signal + self.noise_bound())
            }
            NoiseModel::Classification { .. } => Ok(1.0),
        }
    }
}

/// One observation: the index of the design atom drawn and the response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub atom: usize,
    pub y: f64,
}

/// Training data `(X_1, Y_1), …, (X_n, Y_n)` over a shared atom table.
#[derive(Debug, Clone)]
pub struct Dataset {
    atoms: Arc<Vec<SymmetricMatrix>>,
    samples: Vec<Sample>,
    /// RNG seed that produced the data; 0 for data loaded from disk.
    pub seed: u64,
}

impl Dataset {
    pub fn new(design: &DesignDistribution, samples: Vec<Sample>, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("dataset must contain at least one sample"));
        }
        if let Some(bad) = samples.iter().find(|s| s.atom >= design.num_atoms()) {
            return Err(Error::input(format!(
                "sample references atom {} but the design has {}",
                bad.atom,
                design.num_atoms()
            )));
        }
        if samples.iter().any(|s| !s.y.is_finite()) {
            return Err(Error::input("responses must be finite"));
        }
        Ok(Self {
            atoms: design.shared_atoms(),
            samples,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn atoms(&self) -> &[SymmetricMatrix] {
        &self.atoms
    }

    /// `X_j` (0-based).
    pub fn x(&self, j: usize) -> &SymmetricMatrix {
        &self.atoms[self.samples[j].atom]
    }

    pub fn y(&self, j: usize) -> f64 {
        self.samples[j].y
    }

    /// `Σ_j Y_j X_j`.
    pub fn data_matrix(&self) -> SymmetricMatrix {
        let mut out = SymmetricMatrix::zeros(self.dim());
        for s in &self.samples {
            out.axpy(s.y, &self.atoms[s.atom]);
        }
        out
    }

    /// Writes `j,atom,y` rows with a header.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["j", "atom", "y"])
            .map_err(|e| csv_error(path, e))?;
        for (j, s) in self.samples.iter().enumerate() {
            w.write_record([j.to_string(), s.atom.to_string(), format!("{:?}", s.y)])
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>, design: &DesignDistribution) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut samples = Vec::new();
        for (row, rec) in r.deserialize::<(usize, usize, f64)>().enumerate() {
            let (j, atom, y) = rec.map_err(|e| csv_error(path, e))?;
            if j != row {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {row} has j = {j}"),
                });
            }
            samples.push(Sample { atom, y });
        }
        Dataset::new(design, samples, 0)
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

fn truncated_normal(rng: &mut impl Rng, sigma: f64, bound: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let x = sigma * z;
        if x.abs() <= bound {
            return x;
        }
    }
}

/// Draws `n` i.i.d. pairs; deterministic for a given seed.
pub fn sample_dataset(
    design: &DesignDistribution,
    truth: &TruthModel,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("sample size n must be at least 1"));
    }
    let means = design.evaluate(&truth.s_star)?;
    let picker = WeightedIndex::new(design.probabilities())
        .map_err(|e| Error::input(format!("invalid design weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let atom = picker.sample(&mut rng);
        let y = match truth.noise {
            NoiseModel::Gaussian { sigma, truncation } => {
                means[atom] + truncated_normal(&mut rng, sigma, truncation * sigma)
            }
            NoiseModel::Classification { link } => {
                let p = link.probability(means[atom]);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        samples.push(Sample { atom, y });
    }
    Dataset::new(design, samples, seed)
}

/// Exact conditional risks for a fixed design, truth and loss.
///
/// Each atom's conditional law of `Y` is stored as weighted points (two
/// labels for classification, Gauss–Legendre nodes over the truncated
/// Gaussian for regression), and the Bayes risk `inf_u E[ℓ(Y;u) | X]` is
/// solved once per atom.
#[derive(Debug, Clone)]
pub struct RiskModel {
    design: DesignDistribution,
    loss: Arc<dyn Loss>,
    laws: Vec<Vec<(f64, f64)>>,
    bayes: Vec<f64>,
    bayes_minimizers: Vec<f64>,
}

impl RiskModel {
    pub fn new(design: &DesignDistribution, truth: &TruthModel, loss: Arc<dyn Loss>) -> Result<Self> {
        let means = design.evaluate(&truth.s_star)?;
        let laws = conditional_laws(&means, &truth.noise, QUADRATURE_NODES);
        if let NoiseModel::Gaussian { sigma, .. } = truth.noise {
            if sigma > 0.0 {
                quadrature_self_check(&means, &truth.noise, loss.as_ref(), &laws)?;
            }
        }
        let signal = means.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
        let half = 10.0 * (signal + truth.noise_bound());
        let mut bayes = Vec::with_capacity(laws.len());
        let mut bayes_minimizers = Vec::with_capacity(laws.len());
        for (k, law) in laws.iter().enumerate() {
            let df = |u: f64| law.iter().map(|&(y, w)| w * loss.d1(y, u)).sum::<f64>();
            let u = convex_argmin(df, -half, half, 1e-12).map_err(|e| {
                Error::numerical(format!("Bayes risk for atom {k} failed: {e}"))
            })?;
            bayes.push(conditional_risk(loss.as_ref(), law, u));
            bayes_minimizers.push(u);
        }
        Ok(Self {
            design: design.clone(),
            loss,
            laws,
            bayes,
            bayes_minimizers,
        })
    }

    pub fn design(&self) -> &DesignDistribution {
        &self.design
    }

    /// `inf_g P(ℓ • g)`.
    pub fn bayes_risk(&self) -> f64 {
        self.bayes
            .iter()
            .zip(self.design.probabilities())
            .map(|(b, p)| p * b)
            .sum()
    }

    /// Per-atom minimizers of the conditional risk.
    pub fn bayes_minimizers(&self) -> &[f64] {
        &self.bayes_minimizers
    }

    /// `P(ℓ • f_S)`.
    pub fn population_risk(&self, s: &SymmetricMatrix) -> Result<f64> {
        let values = self.design.evaluate(s)?;
        Ok(values
            .iter()
            .zip(&self.laws)
            .zip(self.design.probabilities())
            .map(|((&u, law), p)| p * conditional_risk(self.loss.as_ref(), law, u))
            .sum())
    }

    /// `E(f_S) = P(ℓ • f_S) − inf_g P(ℓ • g)`, clamped at zero for rounding.
    pub fn excess_risk(&self, s: &SymmetricMatrix) -> Result<f64> {
        let values = self.design.evaluate(s)?;
        let mut total = 0.0;
        for (k, &u) in values.iter().enumerate() {
            let gap = conditional_risk(self.loss.as_ref(), &self.laws[k], u) - self.bayes[k];
            total += self.design.probabilities()[k] * gap;
        }
        if total < -1e-10 {
            return Err(Error::numerical(format!("negative excess risk {total}")));
        }
        Ok(total.max(0.0))
    }
}

fn conditional_risk(loss: &dyn Loss, law: &[(f64, f64)], u: f64) -> f64 {
    law.iter().map(|&(y, w)| w * loss.value(y, u)).sum()
}

fn conditional_laws(means: &[f64], noise: &NoiseModel, nodes: usize) -> Vec<Vec<(f64, f64)>> {
    match *noise {
        NoiseModel::Gaussian { sigma, truncation } => {
            if sigma == 0.0 {
                return means.iter().map(|&m| vec![(m, 1.0)]).collect();
            }
            let c = sigma * truncation;
            let (xs, ws) = gauss_legendre_on(nodes, -c, c);
            let dens: Vec<f64> = xs
                .iter()
                .zip(&ws)
                .map(|(x, w)| w * (-0.5 * (x / sigma).powi(2)).exp())
                .collect();
            let z: f64 = dens.iter().sum();
            means
                .iter()
                .map(|&m| xs.iter().zip(&dens).map(|(x, d)| (m + x, d / z)).collect())
                .collect()
        }
        NoiseModel::Classification { link } => means
            .iter()
            .map(|&m| {
                let p = link.probability(m);
                vec![(1.0, p), (-1.0, 1.0 - p)]
            })
            .collect(),
    }
}

fn quadrature_self_check(
    means: &[f64],
    noise: &NoiseModel,
    loss: &dyn Loss,
    laws: &[Vec<(f64, f64)>],
) -> Result<()> {
    let doubled = conditional_laws(means, noise, 2 * QUADRATURE_NODES);
    let spread = means.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
    for (k, (coarse, fine)) in laws.iter().zip(&doubled).enumerate() {
        for u in [-spread, 0.0, means[k], spread] {
            let a = conditional_risk(loss, coarse, u);
            let b = conditional_risk(loss, fine, u);
            if (a - b).abs() > 1e-10 * a.abs().max(1.0) {
                return Err(Error::numerical(format!(
                    "quadrature self-check failed at atom {k}, u = {u}: {a} vs {b}"
                )));
            }
        }
    }
    Ok(())
}

/// `P(ℓ • f_S)` for one-off use; see [`RiskModel`] for repeated queries.
pub fn population_risk(
    s: &SymmetricMatrix,
    design: &DesignDistribution,
    truth: &TruthModel,
    loss: Arc<dyn Loss>,
) -> Result<f64> {
    RiskModel::new(design, truth, loss)?.population_risk(s)
}

/// `E(f_S)` for one-off use; see [`RiskModel`] for repeated queries.
pub fn excess_risk(
    s: &SymmetricMatrix,
    design: &DesignDistribution,
    truth: &TruthModel,
    loss: Arc<dyn Loss>,
) -> Result<f64> {
    RiskModel::new(design, truth, loss)?.excess_risk(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{exponential_loss, squared_loss};

    #[test]
    fn basis_design_small_cases() {
        let d1 = orthonormal_basis_design(1).unwrap();
        assert_eq!(d1.num_atoms(), 1);
        assert_eq!(d1.atoms()[0], SymmetricMatrix::identity(1));

        let d2 = orthonormal_basis_design(2).unwrap();
        assert_eq!(d2.num_atoms(), 3);
        assert!(d2.is_orthonormal_basis());
        assert_eq!(d2.atoms()[0], SymmetricMatrix::diag(&[1.0, 0.0]));
        assert_eq!(d2.atoms()[1], SymmetricMatrix::diag(&[0.0, 1.0]));
        assert_eq!(d2.atoms()[2].get(0, 1), std::f64::consts::FRAC_1_SQRT_2);

        let d4 = orthonormal_basis_design(4).unwrap();
        assert_eq!(d4.num_atoms(), 10);
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d4.atoms()[i].inner(&d4.atoms()[j]) - want).abs() < 1e-12);
            }
        }
        assert!(orthonormal_basis_design(0).is_err());
    }

    #[test]
    fn custom_design_validation() {
        let atoms = vec![SymmetricMatrix::identity(2), SymmetricMatrix::diag(&[1.0, 0.0])];
        assert!(DesignDistribution::new(atoms.clone(), vec![0.5, 0.4]).is_err());
        assert!(DesignDistribution::new(atoms.clone(), vec![1.5, -0.5]).is_err());
        let d = DesignDistribution::new(atoms, vec![0.5, 0.5]).unwrap();
        assert!(!d.is_orthonormal_basis());
    }

    #[test]
    fn l2_norm_examples() {
        let d2 = orthonormal_basis_design(2).unwrap();
        let v = l2_norm_f(&SymmetricMatrix::diag(&[1.0, 0.0]), &d2).unwrap();
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(l2_norm_f(&SymmetricMatrix::zeros(2), &d2).unwrap(), 0.0);
        assert!(l2_norm_f(&SymmetricMatrix::zeros(3), &d2).is_err());
    }

    #[test]
    fn sup_bound_examples() {
        let d2 = orthonormal_basis_design(2).unwrap();
        let a = sup_bound_a(&ConstraintSet::OperatorNormBall(1.0), &d2).unwrap();
        assert!((a - 2f64.sqrt()).abs() < 1e-12);
        let diag_only = DesignDistribution::new(
            vec![SymmetricMatrix::diag(&[1.0, 0.0]), SymmetricMatrix::diag(&[0.0, 1.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let a = sup_bound_a(&ConstraintSet::OperatorNormBall(2.5), &diag_only).unwrap();
        assert!((a - 2.5).abs() < 1e-12);
        assert_eq!(sup_bound_a(&ConstraintSet::OperatorNormBall(0.0), &d2).unwrap(), 0.0);
        assert!(sup_bound_a(&ConstraintSet::Unconstrained, &d2).is_err());
    }

    #[test]
    fn noiseless_data_is_exact_and_deterministic() {
        let design = orthonormal_basis_design(3).unwrap();
        let s = SymmetricMatrix::diag(&[1.0, -0.5, 0.25]);
        let truth = TruthModel::gaussian(s.clone(), 0.0).unwrap();
        let data = sample_dataset(&design, &truth, 50, 4).unwrap();
        for j in 0..data.n() {
            assert_eq!(data.y(j), s.inner(data.x(j)));
        }
        let noisy = TruthModel::gaussian(s, 0.3).unwrap();
        let a = sample_dataset(&design, &noisy, 40, 8).unwrap();
        let b = sample_dataset(&design, &noisy, 40, 8).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = sample_dataset(&design, &noisy, 40, 9).unwrap();
        assert_ne!(a.samples(), c.samples());
        assert!(a.samples().iter().all(|s| s.y.abs() <= noisy.response_bound(&design).unwrap()));
    }

    #[test]
    fn sample_mean_converges() {
        let design = orthonormal_basis_design(2).unwrap();
        let s = SymmetricMatrix::from_rows(&[vec![0.7, 0.2], vec![0.2, -0.4]]).unwrap();
        let sigma = 0.1;
        let truth = TruthModel::gaussian(s.clone(), sigma).unwrap();
        let n = 100_000;
        let data = sample_dataset(&design, &truth, n, 1234).unwrap();
        let ys: Vec<f64> = data
            .samples()
            .iter()
            .filter(|s| s.atom == 0)
            .map(|s| s.y)
            .collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((mean - 0.7).abs() <= 3.0 * sigma / (n as f64 / 3.0).sqrt());
    }

    #[test]
    fn excess_risk_examples() {
        let design = orthonormal_basis_design(2).unwrap();
        let zero = SymmetricMatrix::zeros(2);
        let truth = TruthModel::gaussian(zero.clone(), 0.0).unwrap();
        let risk = RiskModel::new(&design, &truth, squared_loss()).unwrap();
        assert_eq!(risk.excess_risk(&zero).unwrap(), 0.0);
        let e = risk.excess_risk(&SymmetricMatrix::diag(&[1.0, 0.0])).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-12);

        let coin = TruthModel::classification(zero.clone(), Link::Constant { p: 0.5 }).unwrap();
        let risk = RiskModel::new(&design, &coin, exponential_loss()).unwrap();
        assert!(risk.excess_risk(&zero).unwrap() < 1e-15);
        assert!(risk.bayes_minimizers().iter().all(|u| u.abs() < 1e-8));
    }

    #[test]
    fn squared_excess_equals_l2_distance() {
        let design = orthonormal_basis_design(3).unwrap();
        let s_star = SymmetricMatrix::from_rows(&[
            vec![1.0, 0.3, 0.0],
            vec![0.3, -0.2, 0.5],
            vec![0.0, 0.5, 0.4],
        ])
        .unwrap();
        let truth = TruthModel::gaussian(s_star.clone(), 0.2).unwrap();
        let risk = RiskModel::new(&design, &truth, squared_loss()).unwrap();
        let s = SymmetricMatrix::diag(&[0.5, 0.5, -1.0]);
        let want = l2_norm_f(&(&s - &s_star), &design).unwrap().powi(2);
        assert!((risk.excess_risk(&s).unwrap() - want).abs() < 1e-8);
        assert!(risk.excess_risk(&s_star).unwrap() < 1e-12);
    }

    #[test]
    fn logistic_bayes_rule_for_exponential_loss() {
        let design = orthonormal_basis_design(2).unwrap();
        let s_star = SymmetricMatrix::diag(&[0.8, -0.3]);
        let truth = TruthModel::classification(s_star.clone(), Link::Logistic { scale: 1.0 }).unwrap();
        let risk = RiskModel::new(&design, &truth, exponential_loss()).unwrap();
        let means = design.evaluate(&s_star).unwrap();
        for (u, m) in risk.bayes_minimizers().iter().zip(&means) {
            assert!((u - m).abs() < 1e-8);
        }
        assert!(risk.excess_risk(&s_star).unwrap() < 1e-12);
        assert!(risk.excess_risk(&SymmetricMatrix::zeros(2)).unwrap() > 0.0);
    }

    #[test]
    fn empirical_risk_tracks_population_risk() {
        let design = orthonormal_basis_design(2).unwrap();
        let s_star = SymmetricMatrix::diag(&[0.6, -0.2]);
        let truth = TruthModel::gaussian(s_star, 0.5).unwrap();
        let loss = squared_loss();
        let risk = RiskModel::new(&design, &truth, loss.clone()).unwrap();
        let s = SymmetricMatrix::diag(&[0.1, 0.4]);
        let data = sample_dataset(&design, &truth, 100_000, 77).unwrap();
        let losses: Vec<f64> = (0..data.n())
            .map(|j| loss.value(data.y(j), s.inner(data.x(j))))
            .collect();
        let n = losses.len() as f64;
        let mean = losses.iter().sum::<f64>() / n;
        let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - risk.population_risk(&s).unwrap()).abs() <= 5.0 * se);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let design = orthonormal_basis_design(3).unwrap();
        let truth = TruthModel::gaussian(SymmetricMatrix::identity(3), 0.1).unwrap();
        let data = sample_dataset(&design, &truth, 25, 3).unwrap();
        let path = dir.path().join("data.csv");
        data.write_csv(&path).unwrap();
        let back = Dataset::read_csv(&path, &design).unwrap();
        assert_eq!(back.samples(), data.samples());
        let small = orthonormal_basis_design(1).unwrap();
        assert!(Dataset::read_csv(&path, &small).is_err());
    }
}
