//! Knill-Laflamme and decoherence-free checks for the 4-qubit memory.

use jumpcode::codes::{dfs_basis, dfs_projector, jump_code, projector};
use jumpcode::dynamics::{memory_channel, no_jump_kraus, LindbladModel};
use jumpcode::qec::{self, kl_check, KrausSet};

fn main() -> jumpcode::Result<()> {
    let kappa = 1.0;
    let code = jump_code(4, 0.0)?;
    let p = projector(&code);
    let model = LindbladModel::uniform_memory(4, kappa)?;
    let jumps = model.jump_operators();

    // A detected jump on a known qubit can be undone.
    let known = kl_check(&KrausSet::from_local(4, &jumps[..1])?, &p, qec::DEFAULT_TOL)?;
    println!("known position: {}", known.to_json()?);

    // Without the position the same code is not correctable.
    let unknown = kl_check(&KrausSet::from_local(4, &jumps[..2])?, &p, qec::DEFAULT_TOL)?;
    println!("unknown position: {}", unknown.to_json()?);

    // Between jumps the evolution is a scalar on the whole DFS.
    let dfs = dfs_projector(&dfs_basis(4, 2)?);
    for t in [0.5, 1.0, 2.0] {
        let report = qec::dfs_check(&KrausSet::new(vec![no_jump_kraus(&model, t)?])?, &dfs, qec::DEFAULT_TOL)?;
        println!("t = {t}: λ = {:.6}, e^(−κt) = {:.6}, passed = {}", report.lambdas[0].re, (-kappa * t).exp(), report.passed);
    }

    let channel = memory_channel(&model, 1.0)?;
    println!("memory channel: {} Kraus operators, completeness residual {:.1e}", channel.operators().len(), channel.completeness_residual());
    Ok(())
}
