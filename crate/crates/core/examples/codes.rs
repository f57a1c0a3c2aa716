//! Build jump codes, list their codewords and compare the rate with N − log₂√N.

use jumpcode::codes::{affine_plane_4, codeword_count, dfs_basis, jump_code, logical_qubits, parallelism_to_code};

fn main() -> jumpcode::Result<()> {
    let code = jump_code(4, 0.0)?;
    println!("{}", code.to_json()?);
    for (i, c) in code.codewords().iter().enumerate() {
        let terms: Vec<String> = c.support(1e-12).into_iter().map(|(label, a)| format!("{:+.3}|{label}⟩", a.re)).collect();
        println!("c{i} = {}", terms.join(" "));
    }

    println!("\n   N  dim DFS  codewords  logical qubits  N − log₂√N");
    for n in (2..=12).step_by(2) {
        let approx = n as f64 - (n as f64).sqrt().log2();
        println!(
            "{n:>4} {:>8} {:>10} {:>15.3} {:>11.3}",
            dfs_basis(n, n / 2)?.dimension(),
            codeword_count(n)?,
            logical_qubits(n)?,
            approx
        );
    }

    // The three parallel classes of the affine plane of order 2 give the same code.
    let plane = affine_plane_4();
    plane.check_axioms().expect("affine plane axioms");
    let from_plane = parallelism_to_code(&plane, 0.0)?;
    println!("\naffine-plane code equals 1-JC(4,2,3): {}", from_plane.same_codewords(&code));
    Ok(())
}
