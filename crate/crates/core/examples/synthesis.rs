//! Compile a random SU(3) logical gate into exchange-Hamiltonian segments.
//! Pass a seed as the first argument; the program JSON goes to stdout.

use jumpcode::codes::jump_code;
use jumpcode::gates::{haar_special_unitary, synthesize_qutrit};
use rand::SeedableRng;

fn main() -> jumpcode::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5u64);
    let target = haar_special_unitary(3, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let code = jump_code(4, 0.0)?;
    for eps in [1e-1, 3e-2, 1e-2] {
        let s = synthesize_qutrit(&target, &code, eps)?;
        eprintln!(
            "ε = {eps:.0e}: error {:.2e}, leakage {:.1e}, {} steps, {} segments",
            s.error,
            s.leakage,
            s.outer_steps,
            s.program.len()
        );
        if eps == 1e-1 {
            println!("{}", s.program.to_json()?);
        }
    }
    Ok(())
}
