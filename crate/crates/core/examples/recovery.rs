//! Protected memory: encode a qutrit in 1-JC(4,2,3), let it decay and correct each
//! detected jump. Compares ideal correction with delayed, missed and mismatched cases.

use jumpcode::codes::jump_code;
use jumpcode::dynamics::{trajectory_rng, LindbladModel};
use jumpcode::linalg::{CVector, C64};
use jumpcode::qec::{run_corrected, RecoveryPolicy};

fn mean_fidelity(model: &LindbladModel, delay: f64, p_miss: f64) -> jumpcode::Result<f64> {
    let code = jump_code(4, 0.0)?;
    let logical = CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.48), C64::new(0.64, 0.0)]);
    let mut policy = RecoveryPolicy::new(&code, delay, p_miss)?;
    let count = 500;
    let mut total = 0.0;
    for i in 0..count {
        total += run_corrected(model, &code, &logical, 3.0, &mut policy, &mut trajectory_rng(3, i))?.fidelity;
    }
    Ok(total / count as f64)
}

fn main() -> jumpcode::Result<()> {
    // With equal rates every trajectory either returns to the encoded state or ends in
    // another excitation sector, so the means below are fractions of successful runs.
    let ideal = LindbladModel::uniform_memory(4, 1.0)?;
    let skewed = LindbladModel::memory(&[1.0, 1.1, 0.9, 1.2])?;
    println!("ideal                 {:.6}", mean_fidelity(&ideal, 0.0, 0.0)?);
    println!("delay 0.05            {:.6}", mean_fidelity(&ideal, 0.05, 0.0)?);
    println!("10% missed jumps      {:.6}", mean_fidelity(&ideal, 0.0, 0.1)?);
    println!("unequal decay rates   {:.6}", mean_fidelity(&skewed, 0.0, 0.0)?);
    Ok(())
}
