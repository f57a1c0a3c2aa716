//! Quantum-jump trajectories of a driven two-qubit model against the master equation.
//! The jump log of the first few trajectories is written to stdout as CSV.

use jumpcode::dynamics::{average_trajectories, integrate_master, run_trajectory, trajectory_rng, write_jump_csv, DecayChannel, DensityMatrix, LindbladModel};
use jumpcode::linalg::C64;
use jumpcode::qstate::{pauli, Ket, LocalOperator, OperatorSum};

fn main() -> jumpcode::Result<()> {
    let drive = OperatorSum::from_terms(
        2,
        vec![
            LocalOperator::single(1, pauli::x() * C64::from(0.5))?,
            LocalOperator::new(vec![1, 2], pauli::pair(&pauli::z(), &pauli::z()) * C64::from(0.3))?,
        ],
    )?;
    let model = LindbladModel::new(drive, vec![DecayChannel { qubit: 1, rate: 0.8 }, DecayChannel { qubit: 2, rate: 0.4 }])?;
    let psi0 = Ket::basis("11")?;
    let t = 2.0;

    let records = (0..5u64)
        .map(|i| run_trajectory(&model, &psi0, t, &mut trajectory_rng(1, i)))
        .collect::<jumpcode::Result<Vec<_>>>()?;
    write_jump_csv(std::io::stdout(), records.iter().enumerate().map(|(i, r)| (i, &r.jumps[..])))?;

    let exact = integrate_master(&model, &DensityMatrix::from_ket(&psi0), t, 1e-3)?;
    for count in [1_000, 10_000, 50_000] {
        let avg = average_trajectories(&model, &psi0, t, count, 1)?;
        eprintln!("{count:>6} trajectories: trace distance {:.2e}", avg.trace_distance(&exact));
    }
    eprintln!("excitations at t = {t}: q1 {:.4}, q2 {:.4}", exact.excitation(1), exact.excitation(2));
    Ok(())
}
