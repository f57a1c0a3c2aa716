//! Logical action of the exchange Hamiltonians on 1-JC(4,2,3) and the Lie algebra they generate.

use jumpcode::codes::jump_code;
use jumpcode::gates::{lie_closure, logical_gate_matrix, su3_generators, GateHamiltonian, Realization, TermKind, LEAKAGE_TOL};

fn main() -> jumpcode::Result<()> {
    let code = jump_code(4, 0.0)?;
    for kind in [TermKind::E, TermKind::F] {
        for (a, b) in [(1, 2), (2, 3), (1, 3)] {
            let m = logical_gate_matrix(&GateHamiltonian::single(kind, a, b, 1.0)?, &code, LEAKAGE_TOL)?;
            let rows: Vec<String> = m.row_iter().map(|r| r.iter().map(|z| format!("{:.0}", z.re)).collect::<Vec<_>>().join(" ")).collect();
            println!("{kind:?}{a}{b}: [{}]", rows.join("; "));
        }
    }

    let generators = su3_generators();
    for g in &generators {
        let json = |h: &GateHamiltonian| serde_json::to_string(h).expect("terms serialize");
        match &g.realization {
            Realization::Linear(h) => println!("{:<5} = {}", g.name, json(h)),
            Realization::Commutator(a, b) => println!("{:<5} = i[{}, {}]", g.name, json(a), json(b)),
        }
    }
    let closure = lie_closure(&generators.iter().map(|g| g.logical.clone()).collect::<Vec<_>>());
    println!("closure dimension {}, traceless part {}", closure.dimension, closure.traceless_dimension);
    Ok(())
}
