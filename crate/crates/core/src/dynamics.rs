//! Spontaneous-decay dynamics: master equation, no-jump evolution and
//! Monte-Carlo quantum trajectories with detected jump records.
//!
//! The dissipator is taken in GKSL normalization,
//! `dρ/dt = −i[H,ρ] + Σ_α (L_α ρ L_α† − ½{L_α†L_α, ρ})` with
//! `L_α = √κ_α |0_α⟩⟨1_α|`, so that the no-jump generator is
//! `H_eff = H − (i/2) Σ_α L_α†L_α` and an isolated excitation decays as `e^{−κt}`.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ONE, ZERO};
use crate::qec::KrausSet;
use crate::qstate::{expm_apply, is_excited, pauli, DenseOperator, Ket, LocalOperator, OperatorSum};

/// Largest register the dense master-equation integrator accepts.
pub const MASTER_QUBIT_LIMIT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayChannel {
    pub qubit: usize,
    pub rate: f64,
}

impl DecayChannel {
    /// `√κ |0⟩⟨1|` on the channel's qubit.
    pub fn jump_operator(&self) -> LocalOperator {
        LocalOperator::single(self.qubit, pauli::lowering() * C64::from(self.rate.sqrt()))
            .expect("single-qubit block")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    n_qubits: usize,
    hamiltonian: OperatorSum,
    channels: Vec<DecayChannel>,
}

impl LindbladModel {
    pub fn new(hamiltonian: OperatorSum, channels: Vec<DecayChannel>) -> Result<Self> {
        let n_qubits = hamiltonian.n_qubits();
        let mut seen = vec![false; n_qubits + 1];
        for ch in &channels {
            if ch.qubit == 0 || ch.qubit > n_qubits {
                return Err(Error::QubitOutOfRange {
                    qubit: ch.qubit,
                    n_qubits,
                });
            }
            if seen[ch.qubit] {
                return Err(Error::RepeatedQubit(channels.iter().map(|c| c.qubit).collect()));
            }
            seen[ch.qubit] = true;
            if !(ch.rate >= 0.0 && ch.rate.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "decay rate {} of qubit {} must be finite and non-negative",
                    ch.rate, ch.qubit
                )));
            }
        }
        Ok(LindbladModel {
            n_qubits,
            hamiltonian,
            channels,
        })
    }

    /// Quantum memory: no coherent dynamics, qubit `α` decays with `rates[α-1]`.
    pub fn memory(rates: &[f64]) -> Result<Self> {
        let channels = rates
            .iter()
            .enumerate()
            .map(|(i, &rate)| DecayChannel { qubit: i + 1, rate })
            .collect();
        LindbladModel::new(OperatorSum::new(rates.len()), channels)
    }

    pub fn uniform_memory(n_qubits: usize, rate: f64) -> Result<Self> {
        LindbladModel::memory(&vec![rate; n_qubits])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn hamiltonian(&self) -> &OperatorSum {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[DecayChannel] {
        &self.channels
    }

    pub fn jump_operators(&self) -> Vec<LocalOperator> {
        self.channels.iter().map(DecayChannel::jump_operator).collect()
    }

    fn channel_index(&self, qubit: usize) -> Option<usize> {
        self.channels.iter().position(|c| c.qubit == qubit)
    }
}

/// `H − (i/2) Σ_α κ_α |1_α⟩⟨1_α|`
pub fn effective_hamiltonian(model: &LindbladModel) -> OperatorSum {
    let mut h = model.hamiltonian.clone();
    for ch in &model.channels {
        let term = LocalOperator::single(ch.qubit, pauli::excited() * C64::new(0.0, -ch.rate / 2.0))
            .expect("single-qubit block");
        h.push(term).expect("channel qubits validated");
    }
    h
}

fn excitation_decay_exponent(model: &LindbladModel, index: usize) -> f64 {
    model
        .channels
        .iter()
        .filter(|ch| is_excited(index, ch.qubit))
        .map(|ch| ch.rate)
        .sum()
}

/// `K₀(t) = exp(−Σ_α L_α†L_α t/2)` for a memory model (vanishing coherent part).
pub fn no_jump_kraus(model: &LindbladModel, t: f64) -> Result<DenseOperator> {
    if !model.hamiltonian.is_zero() {
        return Err(Error::CoherentDynamics);
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time {t} must be non-negative")));
    }
    dense_limit(model.n_qubits, crate::qstate::DENSE_QUBIT_LIMIT)?;
    let diag: Vec<C64> = (0..1usize << model.n_qubits)
        .map(|i| C64::from((-excitation_decay_exponent(model, i) * t / 2.0).exp()))
        .collect();
    Ok(DenseOperator::from_diagonal(&diag))
}

/// Kraus decomposition of the memory channel over a finite time `t`: one operator per
/// subset `J` of decayed qubits, `K_J = Π_{α∈J} √(1−e^{−κ_α t}) |0⟩⟨1|_α · Π_{α∉J} diag(1, e^{−κ_α t/2})_α`.
/// `K_∅` equals `no_jump_kraus(model, t)`.
pub fn memory_channel(model: &LindbladModel, t: f64) -> Result<KrausSet> {
    if !model.hamiltonian.is_zero() {
        return Err(Error::CoherentDynamics);
    }
    dense_limit(model.n_qubits, 6)?;
    let n = model.n_qubits;
    let dim = 1usize << n;
    let channels = &model.channels;
    let mut ops = Vec::with_capacity(1 << channels.len());
    for subset in 0..1usize << channels.len() {
        let mut m = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut row = col;
            let mut amp = 1.0;
            for (j, ch) in channels.iter().enumerate() {
                let excited = is_excited(col, ch.qubit);
                if subset >> j & 1 == 1 {
                    if !excited {
                        amp = 0.0;
                        break;
                    }
                    amp *= (1.0 - (-ch.rate * t).exp()).sqrt();
                    row &= !(1 << (ch.qubit - 1));
                } else if excited {
                    amp *= (-ch.rate * t / 2.0).exp();
                }
            }
            if amp != 0.0 {
                m[(row, col)] = C64::from(amp);
            }
        }
        ops.push(DenseOperator::new(m));
    }
    KrausSet::new(ops)
}

fn dense_limit(n_qubits: usize, limit: usize) -> Result<()> {
    if n_qubits > limit {
        return Err(Error::TooManyQubits { n_qubits, limit });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    n_qubits: usize,
    #[serde(with = "linalg::complex_matrix")]
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validated constructor: unit trace, hermitian, no eigenvalue below −1e−8.
    pub fn new(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        let rho = DensityMatrix::unchecked(n_qubits, matrix)?;
        if (rho.trace() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("trace {} is not 1", rho.trace())));
        }
        if rho.hermiticity_residual() > 1e-10 {
            return Err(Error::InvalidArgument("density matrix is not hermitian".into()));
        }
        if rho.min_eigenvalue() < -1e-8 {
            return Err(Error::InvalidArgument("density matrix is not positive".into()));
        }
        Ok(rho)
    }

    fn unchecked(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        Ok(DensityMatrix { n_qubits, matrix })
    }

    pub fn from_ket(psi: &Ket) -> Self {
        let v = psi.normalized().into_amplitudes();
        DensityMatrix {
            n_qubits: psi.n_qubits(),
            matrix: &v * v.adjoint(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.matrix)
    }

    fn hermitian_part(&self) -> CMatrix {
        (&self.matrix + self.matrix.adjoint()).unscale(2.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.hermitian_part().symmetric_eigen().eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&e| e > tol).count()
    }

    /// `½ Σ |eig(ρ − σ)|`
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.matrix - &other.matrix;
        let herm = (&diff + diff.adjoint()).unscale(2.0);
        herm.symmetric_eigen().eigenvalues.iter().map(|e| e.abs()).sum::<f64>() / 2.0
    }

    /// Population of a computational basis index.
    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    /// Excited-state population of qubit `q`.
    pub fn excitation(&self, q: usize) -> f64 {
        (0..self.matrix.nrows())
            .filter(|&i| is_excited(i, q))
            .map(|i| self.population(i))
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Apply every local term of `op` to each column of `x`.
fn left_apply(op: &OperatorSum, x: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j).clone_owned();
        let mut acc = vec![ZERO; x.nrows()];
        for t in op.terms() {
            t.accumulate(col.as_slice(), &mut acc, ONE);
        }
        out.set_column(j, &CVector::from_vec(acc));
    }
    out
}

fn left_apply_local(op: &LocalOperator, x: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j).clone_owned();
        let mut acc = vec![ZERO; x.nrows()];
        op.accumulate(col.as_slice(), &mut acc, ONE);
        out.set_column(j, &CVector::from_vec(acc));
    }
    out
}

/// Right-hand side of the master equation.
fn lindbladian(h_eff: &OperatorSum, jumps: &[LocalOperator], rho: &CMatrix) -> CMatrix {
    // −i H_eff ρ + i ρ H_eff† = −i (H_eff ρ) + (−i H_eff ρ†)†
    let a = left_apply(h_eff, rho) * C64::new(0.0, -1.0);
    let b = (left_apply(h_eff, &rho.adjoint()) * C64::new(0.0, -1.0)).adjoint();
    let mut out = a + b;
    for l in jumps {
        // L ρ L† = L (L ρ†)†
        let l_rho_dag = left_apply_local(l, &rho.adjoint());
        out += left_apply_local(l, &l_rho_dag.adjoint());
    }
    out
}

/// Fixed-step RK4 solution of the master equation up to `t_final`.
///
/// The step is shrunk so that an integer number of steps lands exactly on `t_final`.
pub fn integrate_master(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    dense_limit(model.n_qubits, MASTER_QUBIT_LIMIT)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step {dt} must be positive")));
    }
    if !(t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!("horizon {t_final} must be non-negative")));
    }
    if rho0.n_qubits != model.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: model.n_qubits,
            found: rho0.n_qubits,
        });
    }
    let h_eff = effective_hamiltonian(model);
    let jumps = model.jump_operators();
    let steps = (t_final / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let half = C64::from(h / 2.0);
    let full = C64::from(h);
    let sixth = C64::from(h / 6.0);
    let mut rho = rho0.matrix.clone();
    for _ in 0..steps {
        let k1 = lindbladian(&h_eff, &jumps, &rho);
        let k2 = lindbladian(&h_eff, &jumps, &(&rho + &k1 * half));
        let k3 = lindbladian(&h_eff, &jumps, &(&rho + &k2 * half));
        let k4 = lindbladian(&h_eff, &jumps, &(&rho + &k3 * full));
        rho += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * sixth;
    }
    DensityMatrix::unchecked(model.n_qubits, rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub qubit: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    /// Detected emissions in time order.
    pub jumps: Vec<Jump>,
    /// Normalized conditional state at the horizon.
    pub final_state: Ket,
    /// Squared norm of the unnormalized conditional state, i.e. the probability
    /// density of this jump record.
    pub weight: f64,
    /// The conditional state's norm underflowed; `final_state` is then meaningless.
    pub absorbed: bool,
    pub t_final: f64,
}

/// Operator applied some time after a detected jump. Must be unitary.
#[derive(Clone, Debug)]
pub struct Intervention {
    pub delay: f64,
    pub operator: DenseOperator,
}

/// Hook invoked after every detected jump.
pub trait JumpResponse {
    fn on_jump(&mut self, jump: &Jump, rng: &mut dyn RngCore) -> Option<Intervention>;
}

/// Never intervenes.
pub struct Unmonitored;

impl JumpResponse for Unmonitored {
    fn on_jump(&mut self, _: &Jump, _: &mut dyn RngCore) -> Option<Intervention> {
        None
    }
}

/// Independent stream for trajectory `index` under master seed `seed`.
///
/// ChaCha's 64-bit stream id selects the trajectory, so every trajectory's random
/// numbers depend only on `(seed, index)`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

const UNDERFLOW: f64 = 1e-280;

struct NoJumpFlow {
    h_eff: OperatorSum,
    /// Per-basis-state decay exponents when the coherent part vanishes, so that
    /// the flow is diagonal and can be applied exactly.
    diagonal: Option<Vec<f64>>,
}

impl NoJumpFlow {
    fn new(model: &LindbladModel) -> Self {
        let diagonal = model.hamiltonian.is_zero().then(|| {
            (0..1usize << model.n_qubits)
                .map(|k| excitation_decay_exponent(model, k))
                .collect()
        });
        NoJumpFlow {
            h_eff: effective_hamiltonian(model),
            diagonal,
        }
    }

    fn evolve(&self, psi: &Ket, dt: f64) -> Ket {
        if dt == 0.0 {
            return psi.clone();
        }
        match &self.diagonal {
            Some(rates) => {
                let amps = psi
                    .amplitudes()
                    .iter()
                    .zip(rates)
                    .map(|(a, r)| a * (-0.5 * r * dt).exp())
                    .collect();
                Ket::from_amplitudes(amps).expect("same dimension")
            }
            None => expm_apply(&self.h_eff, dt, psi).expect("dimensions checked"),
        }
    }

    /// Earliest time in `(0, span]` at which the squared norm of `psi` evolved for that
    /// long falls to `threshold`, or `None` if it stays above.
    ///
    /// Bisection advances from the last point known to lie above the threshold, so
    /// the total propagation time is about twice the span.
    fn crossing(&self, psi: &Ket, span: f64, threshold: f64) -> Option<(f64, Ket)> {
        let end = self.evolve(psi, span);
        if end.norm_sqr() > threshold {
            return None;
        }
        let (mut lo, mut hi) = (0.0, span);
        let mut at_lo = psi.clone();
        let mut at_hi = end;
        while hi - lo > 1e-10 * hi.max(1e-4) {
            let mid = 0.5 * (lo + hi);
            let at_mid = self.evolve(&at_lo, mid - lo);
            if at_mid.norm_sqr() > threshold {
                lo = mid;
                at_lo = at_mid;
            } else {
                hi = mid;
                at_hi = at_mid;
            }
        }
        Some((hi, at_hi))
    }
}

fn validate_start(model: &LindbladModel, psi0: &Ket, t_final: f64) -> Result<()> {
    if psi0.n_qubits() != model.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: model.n_qubits,
            found: psi0.n_qubits(),
        });
    }
    if (psi0.norm_sqr() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("initial state must be normalized".into()));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {t_final} must be non-negative")));
    }
    Ok(())
}

/// One Monte-Carlo wave-function trajectory without interventions.
pub fn run_trajectory<R: Rng>(
    model: &LindbladModel,
    psi0: &Ket,
    t_final: f64,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    simulate(model, psi0, t_final, rng, &mut Unmonitored)
}

/// Trajectory unraveling with a response hook.
///
/// Between events the state follows `exp(−i H_eff t)`; a jump happens when the
/// squared norm reaches a uniform threshold, the channel is drawn with weights
/// `‖L_α ψ‖²`, and the state becomes `L_α ψ` renormalized. Interventions returned
/// by `response` are applied at their due time; since they are unitary the
/// running threshold is unaffected.
pub fn simulate<R: Rng>(
    model: &LindbladModel,
    psi0: &Ket,
    t_final: f64,
    rng: &mut R,
    response: &mut dyn JumpResponse,
) -> Result<TrajectoryRecord> {
    validate_start(model, psi0, t_final)?;
    let flow = NoJumpFlow::new(model);
    let jump_ops = model.jump_operators();

    let mut psi = psi0.clone();
    let mut t = 0.0;
    let mut weight = 1.0;
    let mut jumps = Vec::new();
    let mut pending: Vec<(f64, DenseOperator)> = Vec::new();
    let mut threshold = draw_threshold(rng);

    loop {
        let next_due = pending.iter().map(|(due, _)| *due).fold(f64::INFINITY, f64::min);
        let stop = next_due.min(t_final);
        match flow.crossing(&psi, stop - t, threshold) {
            None => {
                psi = flow.evolve(&psi, stop - t);
                t = stop;
                if psi.norm_sqr() < UNDERFLOW {
                    return Ok(absorbed(jumps, psi, weight, t_final));
                }
                if t >= t_final && next_due > t_final {
                    break;
                }
                // Fire every intervention that is due now, in scheduling order.
                let mut k = 0;
                while k < pending.len() {
                    if pending[k].0 <= t {
                        let (_, op) = pending.remove(k);
                        psi = op.apply(&psi)?;
                    } else {
                        k += 1;
                    }
                }
                if t >= t_final {
                    break;
                }
            }
            Some((dt, state)) => {
                t += dt;
                let norm_sqr = state.norm_sqr();
                let branch: Vec<Ket> = jump_ops.iter().map(|l| state.apply(l).expect("in range")).collect();
                let weights: Vec<f64> = branch.iter().map(Ket::norm_sqr).collect();
                let total: f64 = weights.iter().sum();
                if norm_sqr < UNDERFLOW || total <= 0.0 {
                    return Ok(absorbed(jumps, state, weight, t_final));
                }
                let mut pick = rng.random::<f64>() * total;
                let mut chosen = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if pick < *w {
                        chosen = i;
                        break;
                    }
                    pick -= w;
                }
                while weights[chosen] == 0.0 {
                    chosen -= 1;
                }
                let jump = Jump {
                    time: t,
                    qubit: model.channels[chosen].qubit,
                };
                // weight tracks the squared norm of the unnormalized conditional state.
                weight *= weights[chosen];
                psi = branch[chosen].normalized();
                jumps.push(jump);
                if let Some(iv) = response.on_jump(&jump, rng) {
                    pending.push((t + iv.delay.max(0.0), iv.operator));
                }
                threshold = draw_threshold(rng);
            }
        }
    }
    weight *= psi.norm_sqr();
    Ok(TrajectoryRecord {
        jumps,
        final_state: psi.normalized(),
        weight,
        absorbed: false,
        t_final,
    })
}

fn draw_threshold<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1]: a zero threshold would never be reached.
    1.0 - rng.random::<f64>()
}

fn absorbed(jumps: Vec<Jump>, state: Ket, weight: f64, t_final: f64) -> TrajectoryRecord {
    TrajectoryRecord {
        jumps,
        weight: weight * state.norm_sqr(),
        final_state: state,
        absorbed: true,
        t_final,
    }
}

/// Re-run a given jump record deterministically, calling `response` after each jump.
///
/// Times must be strictly increasing inside `[0, t_final]`; each jump must hit a
/// decaying qubit that is excited in the current state.
pub fn replay<R: Rng>(
    model: &LindbladModel,
    psi0: &Ket,
    jumps: &[Jump],
    t_final: f64,
    rng: &mut R,
    response: &mut dyn JumpResponse,
) -> Result<TrajectoryRecord> {
    validate_start(model, psi0, t_final)?;
    let mut last = 0.0;
    for (i, j) in jumps.iter().enumerate() {
        let ordered = if i == 0 { j.time >= 0.0 } else { j.time > last };
        if !ordered || j.time > t_final {
            return Err(Error::InvalidArgument(format!(
                "jump times must increase strictly within [0, {t_final}]"
            )));
        }
        last = j.time;
    }
    let flow = NoJumpFlow::new(model);
    let mut psi = psi0.clone();
    let mut t = 0.0;
    let mut weight = 1.0;
    let mut pending: Vec<(f64, DenseOperator)> = Vec::new();

    let fire_until = |psi: &mut Ket, t: &mut f64, until: f64, pending: &mut Vec<(f64, DenseOperator)>| -> Result<()> {
        loop {
            let next = pending
                .iter()
                .enumerate()
                .filter(|(_, (due, _))| *due <= until)
                .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                .map(|(k, _)| k);
            let Some(k) = next else { break };
            let (due, op) = pending.remove(k);
            *psi = op.apply(&flow.evolve(psi, due - *t))?;
            *t = due;
        }
        Ok(())
    };

    for jump in jumps {
        fire_until(&mut psi, &mut t, jump.time, &mut pending)?;
        let state = flow.evolve(&psi, jump.time - t);
        let idx = model
            .channel_index(jump.qubit)
            .ok_or(Error::QubitOutOfRange {
                qubit: jump.qubit,
                n_qubits: model.n_qubits,
            })?;
        let branch = state.apply(&model.channels[idx].jump_operator())?;
        let w = branch.norm_sqr();
        if w < UNDERFLOW {
            return Err(Error::InvalidArgument(format!(
                "jump on qubit {} at t = {} has vanishing amplitude",
                jump.qubit, jump.time
            )));
        }
        weight *= w;
        psi = branch.normalized();
        t = jump.time;
        if let Some(iv) = response.on_jump(jump, rng) {
            pending.push((t + iv.delay.max(0.0), iv.operator));
        }
    }
    fire_until(&mut psi, &mut t, t_final, &mut pending)?;
    psi = flow.evolve(&psi, t_final - t);
    weight *= psi.norm_sqr();
    Ok(TrajectoryRecord {
        jumps: jumps.to_vec(),
        final_state: psi.normalized(),
        weight,
        absorbed: false,
        t_final,
    })
}

/// Trajectories are reduced in fixed-size chunks; chunk sums are then combined
/// pairwise in index order, so the result does not depend on the thread count.
pub const REDUCTION_CHUNK: usize = 256;

pub(crate) fn deterministic_sum<T, F, A>(count: usize, item: F, add: A) -> Option<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
    A: Fn(T, T) -> T + Sync,
{
    let chunks = count.div_ceil(REDUCTION_CHUNK);
    let mut level: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * REDUCTION_CHUNK;
            let end = (start + REDUCTION_CHUNK).min(count);
            (start + 1..end).fold(item(start), |acc, i| add(acc, item(i)))
        })
        .collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(add(a, b)),
                None => next.push(a),
            }
        }
        level = next;
    }
    level.pop()
}

/// Mean of `|ψ_T⟩⟨ψ_T|` over `count` trajectories; trajectory `i` uses
/// `trajectory_rng(seed, i)`. Absorbed trajectories contribute nothing.
pub fn average_trajectories(
    model: &LindbladModel,
    psi0: &Ket,
    t_final: f64,
    count: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    if count == 0 {
        return Err(Error::InvalidArgument("trajectory count must be at least 1".into()));
    }
    validate_start(model, psi0, t_final)?;
    let dim = psi0.dim();
    let sum = deterministic_sum(
        count,
        |i| {
            let mut rng = trajectory_rng(seed, i as u64);
            let rec = run_trajectory(model, psi0, t_final, &mut rng).expect("validated inputs");
            if rec.absorbed {
                CMatrix::zeros(dim, dim)
            } else {
                let v = rec.final_state.amplitudes();
                v * v.adjoint()
            }
        },
        |a, b| a + b,
    )
    .expect("count >= 1");
    DensityMatrix::unchecked(model.n_qubits, sum.unscale(count as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub probability: f64,
    pub state: DensityMatrix,
}

/// Outcomes of a quantum operation with one measurement result per Kraus operator:
/// `p_l = Tr(K_l ρ K_l†)`, `ρ_l = K_l ρ K_l† / p_l`. Outcomes with `p_l < 1e−14`
/// are dropped.
pub fn apply_operation(kraus: &KrausSet, rho: &DensityMatrix) -> Result<Vec<Outcome>> {
    let groups: Vec<KrausSet> = kraus
        .operators()
        .iter()
        .map(|k| KrausSet::new(vec![k.clone()]))
        .collect::<Result<_>>()?;
    apply_grouped_operation(&groups, rho)
}

/// Outcome `l` is produced by all operators of `groups[l]`:
/// `p_l = Tr(Σ_m K_lm† K_lm ρ)`.
pub fn apply_grouped_operation(groups: &[KrausSet], rho: &DensityMatrix) -> Result<Vec<Outcome>> {
    let dim = rho.matrix.nrows();
    let mut out = Vec::new();
    for group in groups {
        let mut acc = CMatrix::zeros(dim, dim);
        for k in group.operators() {
            if k.matrix().nrows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: k.matrix().nrows(),
                });
            }
            acc += k.matrix() * &rho.matrix * k.matrix().adjoint();
        }
        let p = acc.trace().re;
        if p < 1e-14 {
            continue;
        }
        out.push(Outcome {
            probability: p,
            state: DensityMatrix::unchecked(rho.n_qubits, acc.unscale(p))?,
        });
    }
    Ok(out)
}

/// Jump log as CSV with header `trajectory_id,t,alpha`.
pub fn write_jump_csv<'a, W, I>(writer: W, records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (usize, &'a [Jump])>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["trajectory_id", "t", "alpha"])?;
    for (id, jumps) in records {
        for j in jumps {
            w.write_record([id.to_string(), j.time.to_string(), j.qubit.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
