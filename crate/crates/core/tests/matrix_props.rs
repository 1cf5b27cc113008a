mod common;

use lowrank_oracle::matrix::{
    cone_gap, parse_matrix_text, prox_nuclear, sign_and_support, to_matrix_text,
    SupportProjector, SymmetricMatrix,
};
use lowrank_oracle::solver::{composite_prox, ConstraintSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sym(m: usize) -> impl Strategy<Value = SymmetricMatrix> {
    prop::collection::vec(-3.0f64..3.0, m * (m + 1) / 2).prop_map(move |v| {
        let mut e = vec![0.0; m * m];
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                e[i * m + j] = v[k];
                e[j * m + i] = v[k];
                k += 1;
            }
        }
        SymmetricMatrix::new(m, e).unwrap()
    })
}

fn pair() -> impl Strategy<Value = (SymmetricMatrix, SymmetricMatrix)> {
    (1usize..7).prop_flat_map(|m| (sym(m), sym(m)))
}

fn low_rank(m: usize, seed: u64) -> SymmetricMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_low_rank(m, 1 + (seed as usize) % m.min(3), &mut rng)
}

proptest! {
    #[test]
    fn norm_ordering_and_duality((a, b) in pair()) {
        let (op, fro, nuc) = (a.operator_norm(), a.frobenius_norm(), a.nuclear_norm());
        let tol = 1e-10 * (1.0 + nuc);
        prop_assert!(op <= fro + tol && fro <= nuc + tol);
        let r = a.rank(a.default_zero_tol()) as f64;
        prop_assert!(nuc <= r.sqrt() * fro + tol);
        prop_assert!(a.inner(&b).abs() <= nuc * b.operator_norm() + 1e-9 * (1.0 + nuc));
    }

    #[test]
    fn sign_is_dual_certificate(a in (1usize..7).prop_flat_map(sym)) {
        let (sign, l) = sign_and_support(&a, a.default_zero_tol()).unwrap();
        prop_assert!((sign.inner(&a) - a.nuclear_norm()).abs() <= 1e-9 * (1.0 + a.nuclear_norm()));
        prop_assert!(sign.operator_norm() <= 1.0 + 1e-12);
        prop_assert_eq!(l.rank(), a.rank(a.default_zero_tol()));
    }

    #[test]
    fn projector_decomposition((m, b) in (2usize..8).prop_flat_map(|m| (Just(m), sym(m))), seed in 0u64..1000) {
        let s = low_rank(m, seed);
        let l = SupportProjector::of(&s).unwrap();
        let low = l.apply(&b).unwrap();
        let high = l.apply_complement(&b).unwrap();
        let back = &low + &high;
        prop_assert!((&back - &b).frobenius_norm() <= 1e-10 * (1.0 + b.frobenius_norm()));
        // P_L⊥ maps into the complement, so it annihilates S
        prop_assert!(l.apply_complement(&s).unwrap().frobenius_norm() <= 1e-9);
        prop_assert!(low.rank(1e-9 * (1.0 + b.operator_norm())) <= 2 * l.rank());
        // idempotent
        let twice = l.apply(&low).unwrap();
        prop_assert!((&twice - &low).frobenius_norm() <= 1e-9 * (1.0 + low.frobenius_norm()));
        // the supported part itself lies in every cone
        prop_assert!(cone_gap(&low, &l, 5.0).unwrap() >= -1e-9);
    }

    #[test]
    fn prox_is_nonexpansive((a, b) in pair(), theta in 0.0f64..2.0, rho in 0.1f64..3.0, which in 0usize..3) {
        let c = [
            ConstraintSet::Unconstrained,
            ConstraintSet::OperatorNormBall(rho),
            ConstraintSet::FrobeniusBall(rho),
        ][which];
        let pa = composite_prox(&a, theta, &c).unwrap();
        let pb = composite_prox(&b, theta, &c).unwrap();
        let d_out = (&pa - &pb).frobenius_norm();
        let d_in = (&a - &b).frobenius_norm();
        prop_assert!(d_out <= d_in + 1e-9 * (1.0 + d_in));
        prop_assert!(c.contains(&pa, 1e-9));
        if which == 0 {
            let plain = prox_nuclear(&a, theta).unwrap();
            prop_assert!((&plain - &pa).frobenius_norm() <= 1e-10 * (1.0 + a.frobenius_norm()));
        }
    }

    #[test]
    fn text_format_round_trips(a in (1usize..6).prop_flat_map(sym)) {
        let back = parse_matrix_text(&to_matrix_text(&a)).unwrap();
        prop_assert_eq!(back, a);
    }
}
