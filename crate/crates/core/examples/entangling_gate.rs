//! The diagonal two-qutrit gate V = −exp(−iπ H_ent) on two 1-JC(4,2,3) registers.

use jumpcode::codes::{jump_code, product_code_basis};
use jumpcode::gates::{is_primitive_diagonal, logical_matrix, schmidt_rank, v_gate, ThetaMatrix};
use jumpcode::linalg::C64;

fn main() -> jumpcode::Result<()> {
    let c4 = jump_code(4, 0.0)?;
    let basis = product_code_basis(&c4, &c4)?;
    let v = v_gate();
    let logical = logical_matrix(&v, &basis, 1e-12)?;
    let theta = ThetaMatrix::from_logical(logical.matrix(), 3, 1e-10)?;
    println!("θ = {}", serde_json::to_string(&theta).expect("θ serializes"));

    let (primitive, witness) = is_primitive_diagonal(&theta, 1e-9);
    println!("primitive: {primitive}");
    if let Some(w) = witness {
        println!("witness (j,k,p,q) = ({},{},{},{}): {:.4} vs {:.4}", w.j, w.k, w.p, w.q, w.direct, w.crossed);
    }

    let mut uniform = basis[0].clone();
    for b in &basis[1..] {
        uniform = uniform.add(b)?;
    }
    let input = uniform.scaled(C64::from(1.0 / 3.0));
    println!(
        "Schmidt rank of the uniform product state: {} before, {} after V",
        schmidt_rank(&input, 4, 1e-10),
        schmidt_rank(&v.apply(&input)?, 4, 1e-10)
    );
    Ok(())
}
