//! Dense real symmetric matrices and the spectral machinery built on them.
//!
//! Everything here works through the eigendecomposition `S = Φ diag(λ) Φᵀ`:
//! the nuclear, Frobenius and operator norms, `sign(S)`, the support
//! subspace `L = supp(S)`, the projectors `P_L` / `P_L⊥`, and the spectral
//! soft-threshold used as the proximal map of the nuclear norm.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative asymmetry accepted when wrapping the result of arithmetic.
const SYMMETRY_TOL: f64 = 1e-12;

/// Relative factor for the default eigenvalue zero tolerance.
pub const DEFAULT_ZERO_TOL_FACTOR: f64 = 1e-10;

/// A dense self-adjoint `m × m` real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    inner: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Builds a matrix from row-major entries. Symmetry is checked exactly.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("matrix dimension must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        let inner = DMatrix::from_row_slice(dim, dim, &entries);
        Self::from_dmatrix(inner)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(dim, entries)
    }

    /// Wraps a nalgebra matrix, requiring exact symmetry and finite entries.
    pub fn from_dmatrix(inner: DMatrix<f64>) -> Result<Self> {
        if !inner.is_square() {
            return Err(Error::input(format!(
                "matrix is {}x{}, not square",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if inner.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("matrix has non-finite entries"));
        }
        let m = inner.nrows();
        for i in 0..m {
            for j in (i + 1)..m {
                if inner[(i, j)] != inner[(j, i)] {
                    return Err(Error::input(format!(
                        "matrix is not symmetric at ({i},{j}): {} vs {}",
                        inner[(i, j)],
                        inner[(j, i)]
                    )));
                }
            }
        }
        Ok(Self { inner })
    }

    /// Wraps the result of arithmetic that is symmetric up to rounding and
    /// averages out the asymmetric part.
    pub fn symmetrize(inner: DMatrix<f64>) -> Result<Self> {
        if !inner.is_square() {
            return Err(Error::input("matrix is not square"));
        }
        if inner.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("matrix has non-finite entries"));
        }
        let scale = inner.amax().max(1.0);
        let m = inner.nrows();
        let mut out = inner;
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (out[(i, j)], out[(j, i)]);
                if (a - b).abs() > 1e-6 * scale {
                    return Err(Error::input(format!(
                        "matrix is far from symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        Ok(Self { inner: out })
    }

    // Internal constructor for values symmetric by construction.
    fn from_trusted(mut inner: DMatrix<f64>) -> Self {
        let m = inner.nrows();
        for i in 0..m {
            for j in (i + 1)..m {
                let avg = 0.5 * (inner[(i, j)] + inner[(j, i)]);
                inner[(i, j)] = avg;
                inner[(j, i)] = avg;
            }
        }
        Self { inner }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let m = values.len();
        let mut inner = DMatrix::zeros(m, m);
        for (i, &v) in values.iter().enumerate() {
            inner[(i, i)] = v;
        }
        Self { inner }
    }

    /// `Φ diag(values) Φᵀ` for a matrix `Φ` with orthonormal columns.
    pub fn from_eigen(vectors: &DMatrix<f64>, values: &[f64]) -> Self {
        assert_eq!(vectors.ncols(), values.len());
        let mut scaled = vectors.clone();
        for (k, &v) in values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(v);
        }
        Self::from_trusted(&scaled * vectors.transpose())
    }

    /// Unit-Frobenius basis element: `e_i e_iᵀ` on the diagonal, otherwise
    /// `(e_i e_jᵀ + e_j e_iᵀ)/√2`.
    pub fn basis_element(dim: usize, i: usize, j: usize) -> Self {
        let mut inner = DMatrix::zeros(dim, dim);
        if i == j {
            inner[(i, i)] = 1.0;
        } else {
            let v = std::f64::consts::FRAC_1_SQRT_2;
            inner[(i, j)] = v;
            inner[(j, i)] = v;
        }
        Self { inner }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.inner
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let m = self.dim();
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }

    /// Trace inner product `⟨A, B⟩ = tr(AB)`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.inner.dot(&other.inner)
    }

    pub fn try_inner(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.inner(other))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            inner: &self.inner * c,
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Self) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        for (dst, src) in self.inner.iter_mut().zip(other.inner.iter()) {
            *dst += c * src;
        }
    }

    /// `A²`, used for `E X²`.
    pub fn square(&self) -> Self {
        Self::from_trusted(&self.inner * &self.inner)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    /// Largest absolute asymmetry `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in (i + 1)..m {
                worst = worst.max((self.inner[(i, j)] - self.inner[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn spectral_decompose(&self) -> Result<SpectralDecomposition> {
        spectral_decompose(self)
    }

    pub fn nuclear_norm(&self) -> f64 {
        nuclear_norm(self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn operator_norm(&self) -> f64 {
        operator_norm(self)
    }

    /// Rank with eigenvalues `|λ| ≤ zero_tol` counted as zero.
    pub fn rank(&self, zero_tol: f64) -> usize {
        match spectral_decompose(self) {
            Ok(sd) => sd.eigenvalues.iter().filter(|l| l.abs() > zero_tol).count(),
            Err(_) => 0,
        }
    }

    /// Default zero tolerance `1e-10 · ‖S‖`.
    pub fn default_zero_tol(&self) -> f64 {
        DEFAULT_ZERO_TOL_FACTOR * self.operator_norm()
    }
}

impl Add for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn add(self, rhs: &SymmetricMatrix) -> SymmetricMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        SymmetricMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Sub for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn sub(self, rhs: &SymmetricMatrix) -> SymmetricMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        SymmetricMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

impl Mul<f64> for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn mul(self, rhs: f64) -> SymmetricMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn neg(self) -> SymmetricMatrix {
        self.scale(-1.0)
    }
}

/// Eigenvalues sorted descending by signed value with matching orthonormal
/// eigenvectors in the columns of `eigenvectors`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_eigen(&self.eigenvectors, &self.eigenvalues)
    }

    /// Applies `f` to every eigenvalue and reassembles.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        SymmetricMatrix::from_eigen(&self.eigenvectors, &mapped)
    }

    /// Columns of the eigenvectors whose eigenvalues satisfy `keep`.
    pub fn select_columns(&self, keep: impl Fn(f64) -> bool) -> DMatrix<f64> {
        let idx: Vec<usize> = (0..self.dim())
            .filter(|&k| keep(self.eigenvalues[k]))
            .collect();
        self.eigenvectors.select_columns(idx.iter())
    }
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
///
/// Ties keep the order produced by the backend, which is deterministic for a
/// fixed input.
pub fn spectral_decompose(s: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    if !s.is_finite() {
        return Err(Error::input("cannot decompose a matrix with non-finite entries"));
    }
    let eig = s.inner.clone().symmetric_eigen();
    let m = s.dim();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = eig.eigenvectors.select_columns(order.iter());
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("eigendecomposition produced non-finite values"));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn eigenvalues_or_zero(s: &SymmetricMatrix) -> Vec<f64> {
    // Construction guarantees finite entries, so this only fails for
    // matrices that overflowed during arithmetic.
    s.inner.clone().symmetric_eigenvalues().iter().copied().collect()
}

/// `‖S‖₁ = Σ|λ_j|`.
pub fn nuclear_norm(s: &SymmetricMatrix) -> f64 {
    eigenvalues_or_zero(s).iter().map(|l| l.abs()).sum()
}

/// `‖S‖₂ = (Σ s_ij²)^{1/2} = (Σ λ_j²)^{1/2}`.
pub fn frobenius_norm(s: &SymmetricMatrix) -> f64 {
    s.inner.norm()
}

/// `‖S‖ = max|λ_j|`.
pub fn operator_norm(s: &SymmetricMatrix) -> f64 {
    eigenvalues_or_zero(s)
        .iter()
        .fold(0.0_f64, |acc, l| acc.max(l.abs()))
}

/// Orthogonal projector structure induced by a subspace `L ⊂ ℝᵐ`.
///
/// `P_L(A) = A − P_{L⊥} A P_{L⊥}` and `P_L⊥(A) = P_{L⊥} A P_{L⊥}`.
#[derive(Debug, Clone)]
pub struct SupportProjector {
    dim: usize,
    basis: DMatrix<f64>,
    complement: DMatrix<f64>,
}

impl SupportProjector {
    /// Builds the projector from a basis with orthonormal columns.
    pub fn from_basis(basis: DMatrix<f64>) -> Result<Self> {
        let dim = basis.nrows();
        if dim == 0 {
            return Err(Error::input("support basis has zero rows"));
        }
        let r = basis.ncols();
        if r > dim {
            return Err(Error::input("support basis has more columns than rows"));
        }
        if r > 0 {
            let gram = basis.transpose() * &basis;
            let err = (gram - DMatrix::<f64>::identity(r, r)).amax();
            if err > 1e-9 {
                return Err(Error::input(format!(
                    "support basis columns are not orthonormal (error {err:e})"
                )));
            }
        }
        let mut complement = DMatrix::<f64>::identity(dim, dim) - &basis * basis.transpose();
        complement = 0.5 * (&complement + complement.transpose());
        Ok(Self {
            dim,
            basis,
            complement,
        })
    }

    /// The zero subspace: `P_L = 0`, `P_L⊥ = id`.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            basis: DMatrix::zeros(dim, 0),
            complement: DMatrix::identity(dim, dim),
        }
    }

    /// Support of `S` under the default zero tolerance.
    pub fn of(s: &SymmetricMatrix) -> Result<Self> {
        Ok(sign_and_support(s, s.default_zero_tol())?.1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projector onto `L⊥` as an `m × m` matrix.
    pub fn complement_projector(&self) -> &DMatrix<f64> {
        &self.complement
    }

    fn check(&self, a: &SymmetricMatrix) -> Result<()> {
        if a.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: a.dim(),
            });
        }
        Ok(())
    }

    /// `P_L(A)`.
    pub fn apply(&self, a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        let comp = self.apply_complement(a)?;
        Ok(a - &comp)
    }

    /// `P_L⊥(A)`.
    pub fn apply_complement(&self, a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        self.check(a)?;
        let inner = &self.complement * a.as_dmatrix() * &self.complement;
        Ok(SymmetricMatrix::from_trusted(inner))
    }
}

/// `P_L(A)`.
pub fn project_support(l: &SupportProjector, a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    l.apply(a)
}

/// `P_L⊥(A)`.
pub fn project_support_complement(
    l: &SupportProjector,
    a: &SymmetricMatrix,
) -> Result<SymmetricMatrix> {
    l.apply_complement(a)
}

/// `sign(S)` and `supp(S)`, treating `|λ| ≤ zero_tol` as zero.
pub fn sign_and_support(
    s: &SymmetricMatrix,
    zero_tol: f64,
) -> Result<(SymmetricMatrix, SupportProjector)> {
    if !(zero_tol >= 0.0) {
        return Err(Error::input("zero_tol must be nonnegative"));
    }
    let sd = spectral_decompose(s)?;
    let signs: Vec<f64> = sd
        .eigenvalues
        .iter()
        .map(|&l| if l.abs() <= zero_tol { 0.0 } else { l.signum() })
        .collect();
    let sign = SymmetricMatrix::from_eigen(&sd.eigenvectors, &signs);
    let basis = sd.select_columns(|l| l.abs() > zero_tol);
    let support = if basis.ncols() == 0 {
        SupportProjector::empty(s.dim())
    } else {
        SupportProjector::from_basis(basis)?
    };
    Ok((sign, support))
}

/// `b·‖P_L(A)‖₁ − ‖P_L⊥(A)‖₁`; nonnegative exactly when `A ∈ K(L; b)`.
pub fn cone_gap(a: &SymmetricMatrix, l: &SupportProjector, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::input("cone parameter b must be positive"));
    }
    let low = l.apply(a)?;
    let high = l.apply_complement(a)?;
    Ok(b * low.nuclear_norm() - high.nuclear_norm())
}

/// Scalar soft threshold `sign(x)·max(|x| − θ, 0)`.
pub fn soft_threshold(x: f64, theta: f64) -> f64 {
    let mag = x.abs() - theta;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

/// Proximal map of `θ‖·‖₁`: spectral soft threshold.
pub fn prox_nuclear(s: &SymmetricMatrix, theta: f64) -> Result<SymmetricMatrix> {
    if !(theta >= 0.0) {
        return Err(Error::input("prox threshold must be nonnegative"));
    }
    if theta == 0.0 {
        return Ok(s.clone());
    }
    let sd = spectral_decompose(s)?;
    Ok(sd.map_eigenvalues(|l| soft_threshold(l, theta)))
}

/// Residuals of the first-order condition `−G/ε ∈ ∂‖Ŝ‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KktResidual {
    /// `‖P_L(W) − sign(Ŝ)‖₂` (after any normal-cone correction).
    pub low_rank_residual: f64,
    /// `max(0, ‖P_L⊥(W)‖ − 1)`.
    pub spectral_excess: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.low_rank_residual.max(self.spectral_excess)
    }
}

/// Unconstrained optimality residuals for `Ŝ` with gradient `G`.
///
/// With `W = −G/ε` and `L = supp(Ŝ)`, `Ŝ` minimizes the penalized risk iff
/// `P_L(W) = sign(Ŝ)` and `‖P_L⊥(W)‖ ≤ 1`.
pub fn subdiff_residual(
    gradient: &SymmetricMatrix,
    s_hat: &SymmetricMatrix,
    epsilon: f64,
    zero_tol: f64,
) -> Result<KktResidual> {
    if !(epsilon > 0.0) {
        return Err(Error::input("epsilon must be positive for the subdifferential residual"));
    }
    if gradient.dim() != s_hat.dim() {
        return Err(Error::Dimension {
            expected: s_hat.dim(),
            actual: gradient.dim(),
        });
    }
    let w = gradient.scale(-1.0 / epsilon);
    let (sign, support) = sign_and_support(s_hat, zero_tol)?;
    let low = support.apply(&w)?;
    let high = support.apply_complement(&w)?;
    Ok(KktResidual {
        low_rank_residual: (&low - &sign).frobenius_norm(),
        spectral_excess: (high.operator_norm() - 1.0).max(0.0),
    })
}

/// Parses the text matrix format: a header line `m <dim>` followed by `dim`
/// rows of `dim` whitespace-separated decimals.
pub fn parse_matrix_text(text: &str) -> std::result::Result<SymmetricMatrix, String> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or("missing header line")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("m") {
        return Err(format!("header must be `m <dim>`, got `{header}`"));
    }
    let dim: usize = parts
        .next()
        .ok_or("header is missing the dimension")?
        .parse()
        .map_err(|e| format!("bad dimension: {e}"))?;
    if dim == 0 {
        return Err("dimension must be positive".into());
    }
    let mut entries = Vec::with_capacity(dim * dim);
    for row in 0..dim {
        let line = lines
            .next()
            .ok_or_else(|| format!("expected {dim} rows, found {row}"))?;
        let vals: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| format!("row {row}: {e}"))?;
        if vals.len() != dim {
            return Err(format!("row {row} has {} entries, expected {dim}", vals.len()));
        }
        entries.extend(vals);
    }
    if lines.next().is_some() {
        return Err("trailing content after matrix rows".into());
    }
    if entries.iter().any(|v| !v.is_finite()) {
        return Err("non-finite entry".into());
    }
    let raw = DMatrix::from_row_slice(dim, dim, &entries);
    let scale = raw.amax().max(1.0);
    for i in 0..dim {
        for j in (i + 1)..dim {
            if (raw[(i, j)] - raw[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(format!(
                    "matrix is not symmetric at ({i},{j}): {} vs {}",
                    raw[(i, j)],
                    raw[(j, i)]
                ));
            }
        }
    }
    Ok(SymmetricMatrix::from_trusted(raw))
}

/// Renders the text matrix format with round-trip exact decimals.
pub fn to_matrix_text(s: &SymmetricMatrix) -> String {
    let m = s.dim();
    let mut out = format!("m {m}\n");
    for i in 0..m {
        for j in 0..m {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:?}", s.get(i, j));
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<SymmetricMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_text(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn write_matrix_file(path: impl AsRef<Path>, s: &SymmetricMatrix) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_matrix_text(s)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(m: usize, rng: &mut impl Rng) -> SymmetricMatrix {
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        SymmetricMatrix::from_dmatrix(a).unwrap()
    }

    fn random_orthonormal(m: usize, r: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(m, r, |_, _| rng.random_range(-1.0..1.0));
        g.qr().q().columns(0, r).into_owned()
    }

    #[test]
    fn decompose_diagonal() {
        let sd = spectral_decompose(&SymmetricMatrix::diag(&[1.0, 3.0])).unwrap();
        assert_eq!(sd.eigenvalues, vec![3.0, 1.0]);
        let phi = sd.eigenvectors.abs();
        assert!((phi[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((phi[(0, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decompose_zero() {
        let sd = spectral_decompose(&SymmetricMatrix::zeros(4)).unwrap();
        assert_eq!(sd.eigenvalues, vec![0.0; 4]);
    }

    #[test]
    fn decompose_random_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_symmetric(5, &mut rng);
        let sd = s.spectral_decompose().unwrap();
        let resid = (&sd.reconstruct() - &s).frobenius_norm();
        assert!(resid <= 1e-9 * (1.0 + s.frobenius_norm()));
        let gram = sd.eigenvectors.transpose() * &sd.eigenvectors;
        assert!((gram - DMatrix::<f64>::identity(5, 5)).norm() <= 1e-9);
        assert!(sd.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        assert!(SymmetricMatrix::new(2, vec![1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(SymmetricMatrix::new(2, vec![1.0, f64::NAN, f64::NAN, 4.0]).is_err());
        assert!(SymmetricMatrix::new(2, vec![1.0]).is_err());
    }

    #[test]
    fn norms_of_small_diagonals() {
        let s = SymmetricMatrix::diag(&[1.0, -2.0, 0.0]);
        assert!((s.nuclear_norm() - 3.0).abs() < 1e-12);
        assert!((s.frobenius_norm() - 5f64.sqrt()).abs() < 1e-12);
        assert!((s.operator_norm() - 2.0).abs() < 1e-12);

        let i = SymmetricMatrix::identity(3);
        assert!((i.nuclear_norm() - 3.0).abs() < 1e-12);
        assert!((i.frobenius_norm() - 3f64.sqrt()).abs() < 1e-12);
        assert!((i.operator_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frobenius_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_symmetric(6, &mut rng);
        let entry_sum: f64 = s.to_row_major().iter().map(|v| v * v).sum();
        let eig_sum: f64 = s
            .spectral_decompose()
            .unwrap()
            .eigenvalues
            .iter()
            .map(|l| l * l)
            .sum();
        assert!((s.frobenius_norm().powi(2) - entry_sum).abs() < 1e-12);
        assert!((entry_sum - eig_sum).abs() < 1e-10);
    }

    #[test]
    fn sign_and_support_diag() {
        let (sign, l) = sign_and_support(&SymmetricMatrix::diag(&[2.0, -3.0, 0.0]), 1e-10).unwrap();
        assert_eq!(l.rank(), 2);
        let expected = SymmetricMatrix::diag(&[1.0, -1.0, 0.0]);
        assert!((&sign - &expected).frobenius_norm() < 1e-12);
        // span(e1, e2): the complement projector is e3 e3ᵀ
        let comp = l.complement_projector();
        assert!((comp[(2, 2)] - 1.0).abs() < 1e-12);
        assert!(comp[(0, 0)].abs() < 1e-12 && comp[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn sign_and_support_zero() {
        let zero = SymmetricMatrix::zeros(3);
        let (sign, l) = sign_and_support(&zero, 0.0).unwrap();
        assert_eq!(l.rank(), 0);
        assert_eq!(sign.frobenius_norm(), 0.0);
        let a = SymmetricMatrix::identity(3);
        assert_eq!(l.apply(&a).unwrap().frobenius_norm(), 0.0);
        assert_eq!(l.apply_complement(&a).unwrap(), a);
    }

    #[test]
    fn sign_times_rank_two_is_absolute_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_orthonormal(6, 2, &mut rng);
        let s = SymmetricMatrix::from_eigen(&u, &[2.5, -0.7]);
        let (sign, l) = sign_and_support(&s, s.default_zero_tol()).unwrap();
        assert_eq!(l.rank(), 2);
        let prod = SymmetricMatrix::symmetrize(sign.as_dmatrix() * s.as_dmatrix()).unwrap();
        let got = prod.spectral_decompose().unwrap().eigenvalues;
        // |S| via its own decomposition
        let abs = s.spectral_decompose().unwrap().map_eigenvalues(f64::abs);
        let want = abs.spectral_decompose().unwrap().eigenvalues;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
        assert!((got[0] - 2.5).abs() < 1e-10 && (got[1] - 0.7).abs() < 1e-10);
    }

    #[test]
    fn projector_on_coordinate_axis() {
        let (a, b, c) = (1.5, -0.25, 4.0);
        let m = SymmetricMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
        let l = SupportProjector::from_basis(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let low = project_support(&l, &m).unwrap();
        let high = project_support_complement(&l, &m).unwrap();
        let want_low = SymmetricMatrix::from_rows(&[vec![a, b], vec![b, 0.0]]).unwrap();
        let want_high = SymmetricMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, c]]).unwrap();
        assert!((&low - &want_low).frobenius_norm() < 1e-15);
        assert!((&high - &want_high).frobenius_norm() < 1e-15);
    }

    #[test]
    fn full_rank_projector_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = SupportProjector::from_basis(random_orthonormal(4, 4, &mut rng)).unwrap();
        let a = random_symmetric(4, &mut rng);
        assert!((&l.apply(&a).unwrap() - &a).frobenius_norm() < 1e-12);
    }

    #[test]
    fn projector_rank_bound_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let l = SupportProjector::from_basis(random_orthonormal(8, 2, &mut rng)).unwrap();
            let a = random_symmetric(8, &mut rng);
            let p = l.apply(&a).unwrap();
            // eigenvalue-count oracle
            let rank = p
                .spectral_decompose()
                .unwrap()
                .eigenvalues
                .iter()
                .filter(|v| v.abs() > 1e-9)
                .count();
            assert!(rank <= 4, "rank {rank}");
            let twice = l.apply(&p).unwrap();
            assert!((&twice - &p).frobenius_norm() < 1e-9);
        }
    }

    #[test]
    fn projector_dimension_mismatch() {
        let l = SupportProjector::empty(3);
        assert!(matches!(
            l.apply(&SymmetricMatrix::zeros(2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn cone_gap_examples() {
        let l = SupportProjector::from_basis(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let g = cone_gap(&SymmetricMatrix::diag(&[1.0, 6.0]), &l, 5.0).unwrap();
        assert!((g + 1.0).abs() < 1e-12);
        let g = cone_gap(&SymmetricMatrix::diag(&[1.0, 5.0]), &l, 5.0).unwrap();
        assert!(g.abs() < 1e-12);
        let a = SymmetricMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let g = cone_gap(&a, &l, 5.0).unwrap();
        assert!((g - 5.0 * a.nuclear_norm()).abs() < 1e-12);
        assert!(cone_gap(&a, &l, 0.0).is_err());
    }

    #[test]
    fn prox_nuclear_examples() {
        let s = SymmetricMatrix::diag(&[3.0, -1.0, 0.5]);
        let p = prox_nuclear(&s, 1.0).unwrap();
        assert!((&p - &SymmetricMatrix::diag(&[2.0, 0.0, 0.0])).frobenius_norm() < 1e-12);
        assert_eq!(prox_nuclear(&s, 0.0).unwrap(), s);
        assert_eq!(prox_nuclear(&s, 3.5).unwrap().frobenius_norm(), 0.0);
        assert!(prox_nuclear(&s, -1.0).is_err());
    }

    #[test]
    fn prox_matches_scalar_grid_search() {
        // per-eigenvalue oracle: minimize ½(x−λ)² + θ|x| on a fine grid
        let theta = 1.0;
        for &lam in &[3.0, -1.0, 0.5] {
            let best = (-40_000..=40_000)
                .map(|k| k as f64 * 1e-4)
                .min_by(|&x, &y| {
                    let fx = 0.5 * (x - lam).powi(2) + theta * x.abs();
                    let fy = 0.5 * (y - lam).powi(2) + theta * y.abs();
                    fx.total_cmp(&fy)
                })
                .unwrap();
            assert!((best - soft_threshold(lam, theta)).abs() < 1e-4);
        }
    }

    #[test]
    fn subdiff_residual_examples() {
        let eps = 0.3;
        // Ŝ = 0 with ‖G‖ ≤ ε
        let g = SymmetricMatrix::diag(&[0.2, -0.1, 0.05]);
        let r = subdiff_residual(&g, &SymmetricMatrix::zeros(3), eps, 0.0).unwrap();
        assert_eq!(r.low_rank_residual, 0.0);
        assert_eq!(r.spectral_excess, 0.0);

        let s_hat = SymmetricMatrix::diag(&[2.0, 0.0, -1.0]);
        let (sign, _) = sign_and_support(&s_hat, 1e-12).unwrap();
        let r = subdiff_residual(&sign.scale(-eps), &s_hat, eps, 1e-12).unwrap();
        assert!(r.max() < 1e-12);

        let rank_one = SymmetricMatrix::diag(&[1.5, 0.0, 0.0]);
        let (sign, _) = sign_and_support(&rank_one, 1e-12).unwrap();
        let r = subdiff_residual(&sign.scale(-2.0 * eps), &rank_one, eps, 1e-12).unwrap();
        assert!((r.low_rank_residual - 1.0).abs() < 1e-12);

        assert!(subdiff_residual(&g, &s_hat, 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_is_optimal_against_perturbed_objectives() {
        // dual-norm condition ‖G‖ ≤ ε ⇒ 0 minimizes ⟨G,S⟩ + ε‖S‖₁ locally
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let eps = 1.0;
        let mut g = random_symmetric(4, &mut rng);
        g = g.scale(0.9 * eps / g.operator_norm());
        let r = subdiff_residual(&g, &SymmetricMatrix::zeros(4), eps, 0.0).unwrap();
        assert_eq!(r.max(), 0.0);
        for _ in 0..200 {
            let h = random_symmetric(4, &mut rng).scale(1e-3);
            assert!(g.inner(&h) + eps * h.nuclear_norm() >= 0.0);
        }
    }

    #[test]
    fn matrix_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let s = random_symmetric(4, &mut rng);
        let parsed = parse_matrix_text(&to_matrix_text(&s)).unwrap();
        assert_eq!(parsed, s);
        assert!(parse_matrix_text("m 2\n1 2\n3 4\n").is_err());
        assert!(parse_matrix_text("m 2\n1 2\n").is_err());
        assert!(parse_matrix_text("n 1\n1\n").is_err());
    }
}
