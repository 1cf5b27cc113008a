// Spectral building blocks: norms, sign/support, the P_L split, and the
// nuclear-norm prox.
//
//     cargo run --example spectral_tools

use lowrank_oracle::matrix::{
    cone_gap, prox_nuclear, sign_and_support, to_matrix_text, SymmetricMatrix,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let s = SymmetricMatrix::from_rows(&[
        vec![2.0, 1.0, 0.0],
        vec![1.0, 2.0, 0.0],
        vec![0.0, 0.0, 0.0],
    ])?;
    let eig = s.spectral_decompose()?;
    println!("eigenvalues      {:?}", eig.eigenvalues);
    println!(
        "‖S‖ = {:.4}  ‖S‖₂ = {:.4}  ‖S‖₁ = {:.4}  rank = {}",
        s.operator_norm(),
        s.frobenius_norm(),
        s.nuclear_norm(),
        s.rank(s.default_zero_tol())
    );

    let (sign, support) = sign_and_support(&s, s.default_zero_tol())?;
    println!("sign(S):\n{}", to_matrix_text(&sign));
    println!("⟨sign(S), S⟩ = {:.4} (= ‖S‖₁)", sign.inner(&s));

    let a = SymmetricMatrix::identity(3);
    let low = support.apply(&a)?;
    let high = support.apply_complement(&a)?;
    println!(
        "P_L(I) has rank {}, P_L⊥(I) has rank {}, cone gap at b=5: {:.4}",
        low.rank(1e-12),
        high.rank(1e-12),
        cone_gap(&a, &support, 5.0)?
    );

    for theta in [0.5, 1.5, 3.5] {
        let p = prox_nuclear(&s, theta)?;
        println!(
            "prox θ={theta}: eigenvalues {:?}",
            p.spectral_decompose()?.eigenvalues
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
