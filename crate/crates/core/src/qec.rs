//! Correctability checks and recovery operations for detected jumps.

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::codes::{projector, JumpCode};
use crate::dynamics::{self, Intervention, Jump, JumpResponse, LindbladModel, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::{self, complete_orthonormal, spectral_norm, CMatrix, CVector, C64};
use crate::qstate::{pauli, DenseOperator, Ket, LocalOperator};

/// Default tolerance of the algebraic checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    operators: Vec<DenseOperator>,
}

impl KrausSet {
    pub fn new(operators: Vec<DenseOperator>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::InvalidArgument("empty Kraus set".into()));
        };
        let dim = first.matrix().nrows();
        if let Some(bad) = operators.iter().find(|k| k.matrix().nrows() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.matrix().nrows(),
            });
        }
        Ok(KrausSet { operators })
    }

    pub fn identity(dim: usize) -> Self {
        KrausSet {
            operators: vec![DenseOperator::identity(dim)],
        }
    }

    /// Local operators lifted to an `n_qubits` register.
    pub fn from_local(n_qubits: usize, ops: &[LocalOperator]) -> Result<Self> {
        KrausSet::new(ops.iter().map(|op| op.to_dense(n_qubits)).collect::<Result<_>>()?)
    }

    pub fn operators(&self) -> &[DenseOperator] {
        &self.operators
    }

    pub fn dim(&self) -> usize {
        self.operators[0].matrix().nrows()
    }

    /// `‖Σ K†K − 1‖`
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dim();
        let mut sum = CMatrix::zeros(d, d);
        for k in &self.operators {
            sum += k.matrix().adjoint() * k.matrix();
        }
        spectral_norm(&(sum - CMatrix::identity(d, d)))
    }

    pub fn is_complete(&self, tol: f64) -> bool {
        self.completeness_residual() <= tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KlReport {
    #[serde(with = "linalg::complex_matrix")]
    pub lambda: CMatrix,
    /// `max_{l,l'} ‖P K_l† K_l' P − Λ_{ll'} P‖`
    pub residual: f64,
    /// Operator pair attaining the residual.
    pub worst_pair: (usize, usize),
    pub psd_ok: bool,
    #[serde(rename = "verdict", serialize_with = "verdict_string")]
    pub reversible: bool,
    #[serde(skip)]
    pub tol: f64,
}

fn verdict_string<S: serde::Serializer>(reversible: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(if *reversible { "reversible" } else { "not reversible" })
}

impl KlReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn projector_rank(p: &DenseOperator) -> Result<f64> {
    let rank = p.matrix().trace().re.round();
    if rank < 1.0 {
        return Err(Error::ZeroRank);
    }
    Ok(rank)
}

/// Reversibility of a quantum operation on the range of `p`:
/// `P K_l† K_l' P = Λ_{ll'} P` with `Λ ≥ 0`, `Λ_{ll'} = Tr(P K_l† K_l' P) / rank P`.
pub fn kl_check(ks: &KrausSet, p: &DenseOperator, tol: f64) -> Result<KlReport> {
    let rank = projector_rank(p)?;
    if p.matrix().nrows() != ks.dim() {
        return Err(Error::DimensionMismatch {
            expected: ks.dim(),
            found: p.matrix().nrows(),
        });
    }
    let pm = p.matrix();
    let projected: Vec<CMatrix> = ks.operators.iter().map(|k| k.matrix() * pm).collect();
    let n = projected.len();
    let mut lambda = CMatrix::zeros(n, n);
    let mut residual = 0.0;
    let mut worst_pair = (0, 0);
    for l in 0..n {
        for m in 0..n {
            let block = projected[l].adjoint() * &projected[m];
            let value = block.trace() / C64::from(rank);
            lambda[(l, m)] = value;
            let r = spectral_norm(&(block - pm * value));
            if r > residual {
                residual = r;
                worst_pair = (l, m);
            }
        }
    }
    let herm = (&lambda + lambda.adjoint()).unscale(2.0);
    let min_eig = herm.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let psd_ok = min_eig >= -1e-9 && linalg::hermiticity_residual(&lambda) <= 1e-10;
    Ok(KlReport {
        lambda,
        residual,
        worst_pair,
        psd_ok,
        reversible: residual <= tol && psd_ok,
        tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DfsReport {
    #[serde(with = "linalg::complex_pairs")]
    pub lambdas: Vec<C64>,
    /// `‖K_l P − λ_l P‖` per operator.
    pub residuals: Vec<f64>,
    pub passed: bool,
    /// `max |Λ_{ll'} − λ_l* λ_l'|` against the Knill-Laflamme matrix, when all residuals pass.
    pub factorization_residual: Option<f64>,
}

/// The stricter decoherence-free condition `K_l P = λ_l P`.
pub fn dfs_check(ks: &KrausSet, p: &DenseOperator, tol: f64) -> Result<DfsReport> {
    let rank = projector_rank(p)?;
    let pm = p.matrix();
    let mut lambdas = Vec::new();
    let mut residuals = Vec::new();
    for k in &ks.operators {
        let kp = k.matrix() * pm;
        let lam = (pm * &kp).trace() / C64::from(rank);
        residuals.push(spectral_norm(&(kp - pm * lam)));
        lambdas.push(lam);
    }
    let passed = residuals.iter().all(|&r| r <= tol);
    let factorization_residual = if passed {
        let kl = kl_check(ks, p, tol)?;
        let mut worst: f64 = 0.0;
        for (l, a) in lambdas.iter().enumerate() {
            for (m, b) in lambdas.iter().enumerate() {
                worst = worst.max((kl.lambda[(l, m)] - a.conj() * b).norm());
            }
        }
        Some(worst)
    } else {
        None
    };
    Ok(DfsReport {
        lambdas,
        residuals,
        passed,
        factorization_residual,
    })
}

/// Choi matrix `Σ_k vec(K_k) vec(K_k)†` with column-stacked `vec`.
pub fn choi_matrix(ks: &KrausSet) -> CMatrix {
    let d = ks.dim();
    let mut j = CMatrix::zeros(d * d, d * d);
    for k in &ks.operators {
        let v = CVector::from_column_slice(k.matrix().as_slice());
        j += &v * v.adjoint();
    }
    j
}

/// Two Kraus sets describe the same channel iff their Choi matrices agree; this is
/// equivalent to the two sets being related by a unitary mixing.
pub fn kraus_equivalent(a: &KrausSet, b: &KrausSet, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(linalg::max_abs(&(choi_matrix(a) - choi_matrix(b))) <= tol)
}

/// Unitary `U` with `U (E|b_i⟩/‖E|b_i⟩‖) = |b_i⟩` for every basis vector.
///
/// The images must be orthogonal with equal norms. The map is completed on both
/// sides by Gram-Schmidt over the computational basis in index order, so the
/// result is deterministic.
pub fn recovery_for_basis(basis: &[Ket], error: &DenseOperator, tol: f64) -> Result<DenseOperator> {
    let Some(first) = basis.first() else {
        return Err(Error::ZeroRank);
    };
    let dim = first.dim();
    let images: Vec<Ket> = basis.iter().map(|b| error.apply(b)).collect::<Result<_>>()?;
    let norms: Vec<f64> = images.iter().map(Ket::norm).collect();
    for (i, &n) in norms.iter().enumerate() {
        if n < 1e-12 {
            return Err(Error::DegenerateImage(i));
        }
    }
    // Equal norms and orthogonality are the single-operator KL condition.
    let mut residual: f64 = 0.0;
    for (i, a) in images.iter().enumerate() {
        for (j, b) in images.iter().enumerate() {
            let expect = if i == j { norms[0] * norms[0] } else { 0.0 };
            residual = residual.max((a.inner(b) - C64::from(expect)).norm());
        }
    }
    if residual > tol {
        return Err(Error::NotCorrectable { residual });
    }
    let domain: Vec<CVector> = images.iter().map(|k| k.normalized().into_amplitudes()).collect();
    let range: Vec<CVector> = basis.iter().map(|k| k.amplitudes().clone()).collect();
    let domain = complete_orthonormal(&domain, dim);
    let range = complete_orthonormal(&range, dim);
    let mut u = CMatrix::zeros(dim, dim);
    for (r, d) in range.iter().zip(&domain) {
        u += r * d.adjoint();
    }
    Ok(DenseOperator::new(u))
}

/// Recovery after a detected decay of qubit `qubit` on a jump code.
pub fn recovery_unitary(code: &JumpCode, qubit: usize) -> Result<DenseOperator> {
    let n = code.n_qubits();
    if qubit == 0 || qubit > n {
        return Err(Error::QubitOutOfRange { qubit, n_qubits: n });
    }
    let jump = LocalOperator::single(qubit, pauli::lowering())?.to_dense(n)?;
    let kl = kl_check(&KrausSet::new(vec![jump.clone()])?, &projector(code), DEFAULT_TOL)?;
    if !kl.reversible {
        return Err(Error::NotCorrectable { residual: kl.residual });
    }
    recovery_for_basis(&code.codewords(), &jump, DEFAULT_TOL)
}

/// Response that schedules the recovery of each detected jump.
#[derive(Clone, Debug)]
pub struct RecoveryPolicy {
    /// Indexed by qubit − 1.
    recoveries: Vec<DenseOperator>,
    /// Time between detection and recovery.
    pub delay: f64,
    /// Probability that a jump goes undetected and is not corrected.
    pub p_miss: f64,
}

impl RecoveryPolicy {
    pub fn new(code: &JumpCode, delay: f64, p_miss: f64) -> Result<Self> {
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(Error::InvalidArgument(format!("delay {delay} must be non-negative")));
        }
        if !(0.0..=1.0).contains(&p_miss) {
            return Err(Error::InvalidArgument(format!("p_miss {p_miss} outside [0, 1]")));
        }
        let recoveries = (1..=code.n_qubits())
            .map(|q| recovery_unitary(code, q))
            .collect::<Result<_>>()?;
        Ok(RecoveryPolicy {
            recoveries,
            delay,
            p_miss,
        })
    }

    pub fn ideal(code: &JumpCode) -> Result<Self> {
        RecoveryPolicy::new(code, 0.0, 0.0)
    }

    pub fn recovery(&self, qubit: usize) -> &DenseOperator {
        &self.recoveries[qubit - 1]
    }
}

impl JumpResponse for RecoveryPolicy {
    fn on_jump(&mut self, jump: &Jump, rng: &mut dyn RngCore) -> Option<Intervention> {
        let missed = if self.p_miss <= 0.0 {
            false
        } else if self.p_miss >= 1.0 {
            true
        } else {
            rng.random::<f64>() < self.p_miss
        };
        if missed {
            return None;
        }
        Some(Intervention {
            delay: self.delay,
            operator: self.recoveries[jump.qubit - 1].clone(),
        })
    }
}

fn check_model(code: &JumpCode, model: &LindbladModel) -> Result<()> {
    if model.n_qubits() != code.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: code.n_qubits(),
            found: model.n_qubits(),
        });
    }
    Ok(())
}

/// Replay a jump record from the encoded logical state, recovering after every
/// jump `delay` later, and return the final state with its logical fidelity.
pub fn correct_trajectory(
    record: &TrajectoryRecord,
    code: &JumpCode,
    model: &LindbladModel,
    logical: &CVector,
    delay: f64,
) -> Result<(Ket, f64)> {
    check_model(code, model)?;
    let encoded = code.encode(&logical.normalize())?;
    let mut policy = RecoveryPolicy::new(code, delay, 0.0)?;
    // Replay draws nothing from the generator when p_miss = 0.
    let mut rng = dynamics::trajectory_rng(0, 0);
    let out = dynamics::replay(model, &encoded, &record.jumps, record.t_final, &mut rng, &mut policy)?;
    let fidelity = encoded.fidelity(&out.final_state);
    Ok((out.final_state, fidelity))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedRun {
    pub record: TrajectoryRecord,
    pub fidelity: f64,
}

/// Simulate decay of an encoded state with recoveries inserted by `policy`.
pub fn run_corrected<R: Rng>(
    model: &LindbladModel,
    code: &JumpCode,
    logical: &CVector,
    t_final: f64,
    policy: &mut RecoveryPolicy,
    rng: &mut R,
) -> Result<CorrectedRun> {
    check_model(code, model)?;
    let encoded = code.encode(&logical.normalize())?;
    let record = dynamics::simulate(model, &encoded, t_final, rng, policy)?;
    let fidelity = if record.absorbed {
        0.0
    } else {
        encoded.fidelity(&record.final_state)
    };
    Ok(CorrectedRun { record, fidelity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{dfs_basis, dfs_projector, jump_code};
    use crate::dynamics::{memory_channel, no_jump_kraus, run_trajectory, trajectory_rng};
    use crate::linalg::c;
    use rand::SeedableRng;

    fn jump(n: usize, q: usize, kappa: f64) -> DenseOperator {
        LocalOperator::single(q, pauli::lowering() * C64::from(kappa.sqrt()))
            .unwrap()
            .to_dense(n)
            .unwrap()
    }

    fn random_logical(rng: &mut impl Rng, d: usize) -> CVector {
        CVector::from_fn(d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).normalize()
    }

    #[test]
    fn known_position_jump_is_reversible() {
        let kappa = 1.0;
        let code = jump_code(4, 0.0).unwrap();
        let p = projector(&code);
        for q in 1..=4 {
            let report = kl_check(&KrausSet::new(vec![jump(4, q, kappa)]).unwrap(), &p, DEFAULT_TOL).unwrap();
            assert!(report.reversible);
            assert!(report.residual < 1e-12);
            assert!((report.lambda[(0, 0)] - C64::from(kappa / 2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn unknown_position_pair_is_not_reversible() {
        let code = jump_code(4, 0.0).unwrap();
        let ks = KrausSet::new(vec![jump(4, 1, 1.0), jump(4, 2, 1.0)]).unwrap();
        let report = kl_check(&ks, &projector(&code), DEFAULT_TOL).unwrap();
        assert!(!report.reversible);
        assert!(report.worst_pair.0 != report.worst_pair.1);
        assert!((report.residual - 0.5).abs() < 1e-12);
        // L₁†L₂ carries the 1010 branch of c₁ onto the 1001 branch of c₂.
        let m = jump(4, 1, 1.0).matrix().adjoint() * jump(4, 2, 1.0).matrix();
        let c1 = code.codeword(1).unwrap();
        let c2 = code.codeword(2).unwrap();
        let elem = c2.amplitudes().dotc(&(m * c1.amplitudes()));
        assert!((elem - C64::from(0.5)).norm() < 1e-12);
        assert!(report.to_json().unwrap().contains("\"not reversible\""));
    }

    #[test]
    fn identity_is_always_reversible() {
        let p = dfs_projector(&dfs_basis(3, 1).unwrap());
        let report = kl_check(&KrausSet::identity(8), &p, DEFAULT_TOL).unwrap();
        assert!(report.reversible);
        assert!((report.lambda[(0, 0)] - C64::from(1.0)).norm() < 1e-15);
        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(json["verdict"], "reversible");
        assert_eq!(json["lambda"][0][0][0], 1.0);
    }

    #[test]
    fn zero_rank_projector_is_rejected() {
        assert!(matches!(
            kl_check(&KrausSet::identity(4), &DenseOperator::new(CMatrix::zeros(4, 4)), DEFAULT_TOL),
            Err(Error::ZeroRank)
        ));
    }

    #[test]
    fn dfs_condition_examples() {
        let kappa = 0.7;
        let t = 1.3;
        let model = LindbladModel::uniform_memory(4, kappa).unwrap();
        let p = dfs_projector(&dfs_basis(4, 2).unwrap());
        let k0 = KrausSet::new(vec![no_jump_kraus(&model, t).unwrap()]).unwrap();
        let report = dfs_check(&k0, &p, DEFAULT_TOL).unwrap();
        assert!(report.passed);
        assert!((report.lambdas[0] - C64::from((-kappa * t).exp())).norm() < 1e-12);
        assert!(report.residuals[0] < 1e-12);
        assert!(report.factorization_residual.unwrap() < 1e-9);

        let l1 = KrausSet::new(vec![jump(4, 1, kappa)]).unwrap();
        assert!(!dfs_check(&l1, &p, DEFAULT_TOL).unwrap().passed);
        let id = dfs_check(&KrausSet::identity(16), &p, DEFAULT_TOL).unwrap();
        assert!((id.lambdas[0] - C64::from(1.0)).norm() < 1e-15);
    }

    #[test]
    fn dfs_pass_implies_kl_pass() {
        let model = LindbladModel::uniform_memory(4, 1.1).unwrap();
        for k in 0..=4 {
            let p = dfs_projector(&dfs_basis(4, k).unwrap());
            let ops = vec![no_jump_kraus(&model, 0.3).unwrap(), no_jump_kraus(&model, 1.7).unwrap()];
            let ks = KrausSet::new(ops).unwrap();
            let d = dfs_check(&ks, &p, DEFAULT_TOL).unwrap();
            assert!(d.passed);
            let kl = kl_check(&ks, &p, DEFAULT_TOL).unwrap();
            assert!(kl.reversible);
            assert!(d.factorization_residual.unwrap() <= 1e-9);
        }
    }

    #[test]
    fn kraus_equivalence() {
        let model = LindbladModel::memory(&[0.8, 1.3]).unwrap();
        let a = memory_channel(&model, 0.9).unwrap();
        assert!(kraus_equivalent(&a, &a, 1e-12).unwrap());

        // Mix the first two operators with a random 2×2 unitary.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let g = CMatrix::from_fn(2, 2, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let u = g.qr().q();
        let ops = a.operators();
        let mut mixed = Vec::new();
        for row in 0..2 {
            mixed.push(DenseOperator::new(ops[0].matrix() * u[(row, 0)] + ops[1].matrix() * u[(row, 1)]));
        }
        mixed.extend(ops[2..].iter().cloned());
        let b = KrausSet::new(mixed).unwrap();
        assert!(b.is_complete(1e-12));
        assert!(kraus_equivalent(&a, &b, 1e-12).unwrap());
        assert!(!kraus_equivalent(&a, &KrausSet::identity(4), 1e-6).unwrap());
        assert!(kraus_equivalent(&a, &KrausSet::identity(2), 1e-6).is_err());
    }

    #[test]
    fn recovery_restores_codewords() {
        for phase in [0.0, 0.9] {
            let code = jump_code(4, phase).unwrap();
            for q in 1..=4 {
                let u = recovery_unitary(&code, q).unwrap();
                assert!(u.unitarity_residual() <= 1e-10);
                let l = jump(4, q, 1.0);
                for c in code.codewords() {
                    let back = u.apply(&l.apply(&c).unwrap().normalized()).unwrap();
                    assert!((back.fidelity(&c) - 1.0).abs() < 1e-10);
                    assert!(back.distance(&c) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn recovery_preserves_logical_superpositions() {
        let code = jump_code(4, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let logical = random_logical(&mut rng, 3);
            let psi = code.encode(&logical).unwrap();
            for q in 1..=4 {
                let after = jump(4, q, 1.0).apply(&psi).unwrap().normalized();
                let back = recovery_unitary(&code, q).unwrap().apply(&after).unwrap();
                assert!(back.fidelity(&psi) >= 1.0 - 1e-10);
            }
        }
    }

    #[test]
    fn recovery_fails_without_kl() {
        let dfs = dfs_basis(4, 2).unwrap().kets();
        let l1 = jump(4, 1, 1.0);
        assert!(recovery_for_basis(&dfs, &l1, DEFAULT_TOL).is_err());
        assert!(matches!(recovery_unitary(&jump_code(4, 0.0).unwrap(), 5), Err(Error::QubitOutOfRange { .. })));
    }

    /// Brute force: a recovery exists exactly when the KL verdict is positive, over
    /// every subset of DFS basis states and every pairing code with N ≤ 6.
    #[test]
    fn kl_verdict_matches_recovery_search() {
        let mut checked = 0;
        for n in [2usize, 4, 6] {
            let mut spaces: Vec<Vec<Ket>> = Vec::new();
            for phase in [0.0, 1.1] {
                let code = jump_code(n, phase).unwrap();
                spaces.push(code.codewords());
                if code.len() > 1 {
                    spaces.push(code.codewords()[..code.len() - 1].to_vec());
                }
            }
            let weight = dfs_basis(n, n / 2).unwrap().kets();
            for mask in 1usize..(1 << weight.len().min(6)) {
                spaces.push(weight.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, k)| k.clone()).collect());
            }
            for basis in &spaces {
                let dim = basis[0].dim();
                let mut pm = CMatrix::zeros(dim, dim);
                for b in basis {
                    pm += b.amplitudes() * b.amplitudes().adjoint();
                }
                let p = DenseOperator::new(pm);
                for q in 1..=n {
                    let l = jump(n, q, 1.0);
                    let verdict = kl_check(&KrausSet::new(vec![l.clone()]).unwrap(), &p, DEFAULT_TOL).unwrap().reversible;
                    let constructed = recovery_for_basis(basis, &l, DEFAULT_TOL).is_ok();
                    // KL with Λ = 0 means every image vanishes: reversible but nothing to recover.
                    let all_zero = basis.iter().all(|b| l.apply(b).unwrap().norm() < 1e-12);
                    assert_eq!(verdict, constructed || all_zero, "n={n} q={q}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn zero_jump_and_single_jump_records_correct_perfectly() {
        let model = LindbladModel::uniform_memory(4, 1.0).unwrap();
        let code = jump_code(4, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let logical = random_logical(&mut rng, 3);
        let encoded = code.encode(&logical).unwrap();

        let empty = TrajectoryRecord {
            jumps: vec![],
            final_state: encoded.clone(),
            weight: 1.0,
            absorbed: false,
            t_final: 2.0,
        };
        let (_, f) = correct_trajectory(&empty, &code, &model, &logical, 0.0).unwrap();
        assert!((f - 1.0).abs() < 1e-12);

        let mut seen_single = 0;
        for i in 0..400 {
            let rec = run_trajectory(&model, &encoded, 1.0, &mut trajectory_rng(77, i)).unwrap();
            if rec.jumps.len() == 1 {
                seen_single += 1;
                let (_, f) = correct_trajectory(&rec, &code, &model, &logical, 0.0).unwrap();
                assert!(f >= 1.0 - 1e-9);
                let (_, delayed) = correct_trajectory(&rec, &code, &model, &logical, 0.3 * (1.0 - rec.jumps[0].time)).unwrap();
                assert!(delayed >= 1.0 - 1e-9);
            }
        }
        assert!(seen_single > 50);
    }

    #[test]
    fn record_code_mismatch_is_an_error() {
        let model = LindbladModel::uniform_memory(6, 1.0).unwrap();
        let code = jump_code(4, 0.0).unwrap();
        let rec = TrajectoryRecord {
            jumps: vec![],
            final_state: Ket::zero(6),
            weight: 1.0,
            absorbed: false,
            t_final: 1.0,
        };
        assert!(correct_trajectory(&rec, &code, &model, &CVector::from_element(3, C64::from(1.0)), 0.0).is_err());
    }

    #[test]
    fn corrected_simulation_is_exact_for_equal_rates() {
        let model = LindbladModel::uniform_memory(4, 1.0).unwrap();
        let code = jump_code(4, 0.0).unwrap();
        let mut policy = RecoveryPolicy::ideal(&code).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let logical = random_logical(&mut rng, 3);
        let mut jumps = 0;
        for i in 0..200 {
            let run = run_corrected(&model, &code, &logical, 3.0, &mut policy, &mut trajectory_rng(9, i)).unwrap();
            jumps += run.record.jumps.len();
            assert!(run.fidelity >= 1.0 - 1e-9);
        }
        assert!(jumps > 200);
    }

    #[test]
    fn missed_detections_degrade_fidelity() {
        let model = LindbladModel::uniform_memory(4, 1.0).unwrap();
        let code = jump_code(4, 0.0).unwrap();
        let mut policy = RecoveryPolicy::new(&code, 0.0, 1.0).unwrap();
        let logical = CVector::from_element(3, C64::from(1.0)).normalize();
        let mean = |t: f64, policy: &mut RecoveryPolicy| {
            (0..300)
                .map(|i| run_corrected(&model, &code, &logical, t, policy, &mut trajectory_rng(5, i)).unwrap().fidelity)
                .sum::<f64>()
                / 300.0
        };
        let short = mean(0.2, &mut policy);
        let long = mean(2.0, &mut policy);
        assert!(short < 1.0 && long < short);
        assert!(RecoveryPolicy::new(&code, 0.0, 1.5).is_err());
        assert!(RecoveryPolicy::new(&code, -1.0, 0.0).is_err());
    }
}
