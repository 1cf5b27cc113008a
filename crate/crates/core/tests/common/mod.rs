//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use lowrank_oracle::matrix::SymmetricMatrix;
use lowrank_oracle::solver::ConstraintSet;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_symmetric(m: usize, scale: f64, rng: &mut impl Rng) -> SymmetricMatrix {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let g: f64 = rng.sample(StandardNormal);
            v[i * m + j] = scale * g;
            v[j * m + i] = scale * g;
        }
    }
    SymmetricMatrix::new(m, v).unwrap()
}

/// Random symmetric matrix of the given rank with eigenvalues of random
/// sign and magnitude in `[0.5, 2]`.
pub fn random_low_rank(m: usize, rank: usize, rng: &mut impl Rng) -> SymmetricMatrix {
    let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let mut s = DMatrix::zeros(m, m);
    for k in 0..rank {
        let lam = rng.random_range(0.5..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let v = q.column(k);
        s += lam * v * v.transpose();
    }
    SymmetricMatrix::symmetrize(s).unwrap()
}

/// `E_ε ‖n^{−1/2} Σ ε_j X_j‖` by summing over all `2ⁿ` sign patterns
/// (half of them, using the symmetry `ε ↦ −ε`).
pub fn conditional_delta_exact(xs: &[SymmetricMatrix]) -> f64 {
    let n = xs.len();
    assert!(n >= 1 && n <= 20);
    let m = xs[0].dim();
    let mats: Vec<DMatrix<f64>> = xs.iter().map(|x| x.as_dmatrix().clone()).collect();
    let patterns = 1u64 << (n - 1);
    let mut total = 0.0;
    for mask in 0..patterns {
        let mut sum = mats[0].clone();
        for (j, x) in mats.iter().enumerate().skip(1) {
            if mask >> (j - 1) & 1 == 1 {
                sum -= x;
            } else {
                sum += x;
            }
        }
        let eig = nalgebra::SymmetricEigen::new(sum);
        total += eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    }
    let _ = m;
    total / patterns as f64 / (n as f64).sqrt()
}

/// Spectral soft-threshold computed directly with nalgebra.
pub fn soft_threshold_oracle(m: &SymmetricMatrix, theta: f64) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.as_dmatrix().clone());
    let mut out = DMatrix::zeros(m.dim(), m.dim());
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let shrunk = lam.signum() * (lam.abs() - theta).max(0.0);
        let v = eig.eigenvectors.column(k);
        out += shrunk * v * v.transpose();
    }
    out
}

/// Grid minimizer of `½(x − λ)² + θ|x| + ½μx²` on `[lo, hi]`: a step-1e-3
/// pass, then a step-1e-6 pass on the bracket around the coarse minimum.
/// The objective is convex so the coarse pass cannot miss the basin.
pub fn grid_argmin_1d(lambda: f64, theta: f64, mu: f64, lo: f64, hi: f64) -> f64 {
    let f = |x: f64| 0.5 * (x - lambda).powi(2) + theta * x.abs() + 0.5 * mu * x * x;
    let scan = |a: f64, b: f64, step: f64| {
        let k = ((b - a) / step).ceil() as usize;
        let mut best = (f(a), a);
        for i in 0..=k {
            let x = (a + i as f64 * step).min(b);
            let v = f(x);
            if v < best.0 {
                best = (v, x);
            }
        }
        best.1
    };
    let coarse = scan(lo, hi, 1e-3);
    scan((coarse - 2e-3).max(lo), (coarse + 2e-3).min(hi), 1e-6)
}

/// Per-eigenvalue grid oracle for the prox of `θ‖·‖₁ + I_D` at a diagonal
/// matrix. The Frobenius ball couples the eigenvalues only through a
/// multiplier `μ`, found by bisection on `Σ x_i(μ)² = ρ²`.
pub fn prox_grid_oracle(diag: &[f64], theta: f64, constraint: &ConstraintSet) -> Vec<f64> {
    let span = diag.iter().fold(0.0_f64, |a, v| a.max(v.abs())) + 1.0;
    match *constraint {
        ConstraintSet::Unconstrained => diag
            .iter()
            .map(|&l| grid_argmin_1d(l, theta, 0.0, -span, span))
            .collect(),
        ConstraintSet::OperatorNormBall(r) => diag
            .iter()
            .map(|&l| grid_argmin_1d(l, theta, 0.0, -r, r))
            .collect(),
        ConstraintSet::FrobeniusBall(r) => {
            let at = |mu: f64| -> Vec<f64> {
                diag.iter()
                    .map(|&l| grid_argmin_1d(l, theta, mu, -span, span))
                    .collect()
            };
            let sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
            let free = at(0.0);
            if sq(&free) <= r * r {
                return free;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            while sq(&at(hi)) > r * r {
                hi *= 2.0;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if sq(&at(mid)) > r * r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            at(hi)
        }
    }
}
