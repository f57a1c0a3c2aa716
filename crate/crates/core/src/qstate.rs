//! Pure states and operators over N distinguishable qubits.
//!
//! Qubits are numbered `1..=N`. Qubit `α` carries bit weight `2^(α-1)` in the
//! amplitude index, and basis labels are printed most significant qubit first,
//! `b_N … b_1`. The label `"0011"` therefore has qubits 1 and 2 excited and
//! lives at index 3.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ONE, ZERO};

/// Largest register for which full `2^N × 2^N` matrices are built.
pub const DENSE_QUBIT_LIMIT: usize = 12;

/// Parse a printed label `b_N … b_1` into `(N, index)`.
pub fn label_to_index(label: &str) -> Result<(usize, usize)> {
    if label.is_empty() || label.len() > 63 {
        return Err(Error::InvalidLabel(label.to_string()));
    }
    let mut index = 0usize;
    for ch in label.chars() {
        let bit = match ch {
            '0' => 0,
            '1' => 1,
            _ => return Err(Error::InvalidLabel(label.to_string())),
        };
        index = (index << 1) | bit;
    }
    Ok((label.len(), index))
}

pub fn index_to_label(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .rev()
        .map(|bit| if index >> bit & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Whether qubit `q` (1-based) is excited in basis index `index`.
#[inline]
pub fn is_excited(index: usize, q: usize) -> bool {
    index >> (q - 1) & 1 == 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    n_qubits: usize,
    amplitudes: CVector,
}

impl Ket {
    pub fn new(n_qubits: usize, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != 1usize << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_qubits,
                found: amplitudes.len(),
            });
        }
        Ok(Ket { n_qubits, amplitudes })
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        Ket::new(len.trailing_zeros() as usize, CVector::from_vec(amplitudes))
    }

    pub fn zero(n_qubits: usize) -> Self {
        Ket {
            n_qubits,
            amplitudes: CVector::zeros(1 << n_qubits),
        }
    }

    pub fn basis_index(n_qubits: usize, index: usize) -> Self {
        let mut k = Ket::zero(n_qubits);
        k.amplitudes[index] = ONE;
        k
    }

    /// Computational basis ket for a printed label such as `"0011"`.
    pub fn basis(label: &str) -> Result<Self> {
        let (n, index) = label_to_index(label)?;
        Ok(Ket::basis_index(n, index))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn amplitude(&self, label: &str) -> Result<C64> {
        let (n, index) = label_to_index(label)?;
        if n != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: n,
            });
        }
        Ok(self.amplitudes[index])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= 1e-12
    }

    pub fn normalized(&self) -> Self {
        Ket {
            n_qubits: self.n_qubits,
            amplitudes: self.amplitudes.unscale(self.norm()),
        }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Ket {
            n_qubits: self.n_qubits,
            amplitudes: &self.amplitudes * factor,
        }
    }

    pub fn add(&self, other: &Ket) -> Result<Self> {
        self.check_same(other)?;
        Ok(Ket {
            n_qubits: self.n_qubits,
            amplitudes: &self.amplitudes + &other.amplitudes,
        })
    }

    pub fn distance(&self, other: &Ket) -> f64 {
        (&self.amplitudes - &other.amplitudes).norm()
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &Ket) -> f64 {
        self.inner(other).norm_sqr()
    }

    fn check_same(&self, other: &Ket) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(())
    }

    /// Labels carrying non-negligible amplitude, in index order.
    pub fn support(&self, tol: f64) -> Vec<(String, C64)> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > tol)
            .map(|(i, a)| (index_to_label(i, self.n_qubits), *a))
            .collect()
    }

    pub fn apply(&self, op: &LocalOperator) -> Result<Ket> {
        apply_local(op, self)
    }
}

/// Product state with `low` on qubits `1..=n_low` and `high` above it; the printed
/// label of a product of basis kets is `(high label)(low label)`.
pub fn tensor(high: &Ket, low: &Ket) -> Ket {
    let amplitudes = high.amplitudes.kronecker(&low.amplitudes);
    Ket {
        n_qubits: high.n_qubits + low.n_qubits,
        amplitudes,
    }
}

impl Serialize for Ket {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        linalg::complex_pairs::serialize(self.amplitudes.as_slice(), s)
    }
}

impl<'de> Deserialize<'de> for Ket {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let amps = linalg::complex_pairs::deserialize(d)?;
        Ket::from_amplitudes(amps).map_err(serde::de::Error::custom)
    }
}

/// A block acting on a few qubits, identity elsewhere.
///
/// Block row/column index `j` encodes the support qubits little-endian in list
/// order: bit `m` of `j` is the state of `support[m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    support: Vec<usize>,
    block: CMatrix,
}

impl LocalOperator {
    pub fn new(support: Vec<usize>, block: CMatrix) -> Result<Self> {
        let mut sorted = support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != support.len() {
            return Err(Error::RepeatedQubit(support));
        }
        if support.contains(&0) {
            return Err(Error::QubitOutOfRange {
                qubit: 0,
                n_qubits: support.iter().copied().max().unwrap_or(0),
            });
        }
        let dim = 1usize << support.len();
        if block.nrows() != dim || block.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: block.nrows(),
            });
        }
        Ok(LocalOperator { support, block })
    }

    pub fn single(qubit: usize, block: CMatrix) -> Result<Self> {
        LocalOperator::new(vec![qubit], block)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn block(&self) -> &CMatrix {
        &self.block
    }

    pub fn max_qubit(&self) -> usize {
        self.support.iter().copied().max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        LocalOperator {
            support: self.support.clone(),
            block: &self.block * factor,
        }
    }

    pub fn adjoint(&self) -> Self {
        LocalOperator {
            support: self.support.clone(),
            block: self.block.adjoint(),
        }
    }

    fn check_range(&self, n_qubits: usize) -> Result<()> {
        match self.support.iter().find(|&&q| q > n_qubits) {
            Some(&qubit) => Err(Error::QubitOutOfRange { qubit, n_qubits }),
            None => Ok(()),
        }
    }

    /// Apply to a raw amplitude vector of an `n_qubits` register.
    pub fn apply_vec(&self, n_qubits: usize, v: &CVector) -> Result<CVector> {
        self.check_range(n_qubits)?;
        if v.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_qubits,
                found: v.len(),
            });
        }
        let mut out = CVector::zeros(v.len());
        self.accumulate(v.as_slice(), out.as_mut_slice(), ONE);
        Ok(out)
    }

    /// `out += factor · (op ⊗ 1) v`, strided over the non-support bits.
    pub(crate) fn accumulate(&self, v: &[C64], out: &mut [C64], factor: C64) {
        let k = self.support.len();
        let bdim = 1usize << k;
        let masks: Vec<usize> = self.support.iter().map(|&q| 1usize << (q - 1)).collect();
        let support_mask: usize = masks.iter().sum();
        let offsets: Vec<usize> = (0..bdim)
            .map(|j| {
                masks
                    .iter()
                    .enumerate()
                    .filter(|(m, _)| j >> m & 1 == 1)
                    .map(|(_, mask)| mask)
                    .sum()
            })
            .collect();
        let mut gathered = vec![ZERO; bdim];
        for base in 0..v.len() {
            if base & support_mask != 0 {
                continue;
            }
            for (g, off) in gathered.iter_mut().zip(&offsets) {
                *g = v[base | off];
            }
            for (row, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (col, g) in gathered.iter().enumerate() {
                    acc += self.block[(row, col)] * g;
                }
                out[base | off] += factor * acc;
            }
        }
    }

    /// Full `2^N × 2^N` matrix; refused above the dense limit.
    pub fn to_dense(&self, n_qubits: usize) -> Result<DenseOperator> {
        self.check_range(n_qubits)?;
        dense_guard(n_qubits)?;
        let dim = 1 << n_qubits;
        let mut m = CMatrix::zeros(dim, dim);
        let mut out = vec![ZERO; dim];
        let mut e = vec![ZERO; dim];
        for col in 0..dim {
            e[col] = ONE;
            out.iter_mut().for_each(|z| *z = ZERO);
            self.accumulate(&e, &mut out, ONE);
            for (row, z) in out.iter().enumerate() {
                m[(row, col)] = *z;
            }
            e[col] = ZERO;
        }
        Ok(DenseOperator::new(m))
    }
}

fn dense_guard(n_qubits: usize) -> Result<()> {
    if n_qubits > DENSE_QUBIT_LIMIT {
        return Err(Error::TooManyQubits {
            n_qubits,
            limit: DENSE_QUBIT_LIMIT,
        });
    }
    Ok(())
}

/// `(op ⊗ identity) ψ` without materializing the full matrix.
pub fn apply_local(op: &LocalOperator, psi: &Ket) -> Result<Ket> {
    let amplitudes = op.apply_vec(psi.n_qubits, &psi.amplitudes)?;
    Ok(Ket {
        n_qubits: psi.n_qubits,
        amplitudes,
    })
}

pub mod pauli {
    use super::*;
    use crate::linalg::{c, I};

    pub fn identity() -> CMatrix {
        CMatrix::identity(2, 2)
    }
    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }
    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }
    /// `σz|0⟩ = |0⟩`, `σz|1⟩ = −|1⟩`.
    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0, 0.0)])
    }
    /// `|0⟩⟨1|`
    pub fn lowering() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
    }
    /// `|1⟩⟨1|`
    pub fn excited() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE])
    }

    /// Two-qubit block `a_α ⊗ b_β` for support `[α, β]` (α is the low bit of the block).
    pub fn pair(a: &CMatrix, b: &CMatrix) -> CMatrix {
        b.kronecker(a)
    }
}

/// Something that acts linearly on amplitude vectors of a fixed dimension.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply_to(&self, v: &CVector) -> CVector;
    /// Upper bound on the induced 1-norm.
    fn norm_bound(&self) -> f64;

    /// `exp(-i H t) v` by a truncated Taylor series with time stepping.
    fn propagate(&self, t: f64, v: &CVector) -> CVector {
        taylor_action(self, t, v)
    }
}

fn taylor_action<H: LinearOperator + ?Sized>(h: &H, t: f64, v: &CVector) -> CVector {
    let bound = h.norm_bound() * t.abs();
    if bound == 0.0 {
        return v.clone();
    }
    let steps = bound.ceil().max(1.0) as usize;
    let tau = C64::new(0.0, -t / steps as f64);
    let mut state = v.clone();
    for _ in 0..steps {
        let mut term = state.clone();
        let mut sum = state.clone();
        for k in 1..60 {
            term = h.apply_to(&term) * (tau / k as f64);
            sum += &term;
            if term.norm() <= 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        state = sum;
    }
    state
}

/// Sum of local terms on an `n_qubits` register.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorSum {
    n_qubits: usize,
    terms: Vec<LocalOperator>,
}

impl OperatorSum {
    pub fn new(n_qubits: usize) -> Self {
        OperatorSum {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(n_qubits: usize, terms: Vec<LocalOperator>) -> Result<Self> {
        let mut s = OperatorSum::new(n_qubits);
        for t in terms {
            s.push(t)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, term: LocalOperator) -> Result<()> {
        term.check_range(self.n_qubits)?;
        self.terms.push(term);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[LocalOperator] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.block.iter().all(|z| *z == ZERO))
    }

    pub fn apply(&self, psi: &Ket) -> Result<Ket> {
        if psi.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: psi.n_qubits,
            });
        }
        Ok(Ket {
            n_qubits: self.n_qubits,
            amplitudes: self.apply_to(&psi.amplitudes),
        })
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        dense_guard(self.n_qubits)?;
        let dim = 1 << self.n_qubits;
        let mut m = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            m += t.to_dense(self.n_qubits)?.matrix();
        }
        Ok(DenseOperator::new(m))
    }
}

impl LinearOperator for OperatorSum {
    fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    fn apply_to(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(v.len());
        for t in &self.terms {
            t.accumulate(v.as_slice(), out.as_mut_slice(), ONE);
        }
        out
    }

    fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| linalg::one_norm(&t.block)).sum()
    }
}

/// Explicit square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    matrix: CMatrix,
}

impl DenseOperator {
    pub fn new(matrix: CMatrix) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "operator must be square");
        DenseOperator { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        DenseOperator::new(CMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        DenseOperator::new(CMatrix::from_diagonal(&CVector::from_column_slice(diag)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        DenseOperator::new(self.matrix.adjoint())
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.matrix)
    }

    pub fn unitarity_residual(&self) -> f64 {
        linalg::unitarity_residual(&self.matrix)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_residual() <= 1e-10
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_residual() <= 1e-10
    }

    pub fn apply(&self, psi: &Ket) -> Result<Ket> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        Ok(Ket {
            n_qubits: psi.n_qubits,
            amplitudes: &self.matrix * &psi.amplitudes,
        })
    }
}

impl From<CMatrix> for DenseOperator {
    fn from(m: CMatrix) -> Self {
        DenseOperator::new(m)
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply_to(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    fn norm_bound(&self) -> f64 {
        linalg::one_norm(&self.matrix)
    }

    fn propagate(&self, t: f64, v: &CVector) -> CVector {
        linalg::propagator(&self.matrix, t) * v
    }
}

/// `exp(-i H t) ψ` with ħ = 1. `H` need not be hermitian.
pub fn expm_apply<H: LinearOperator + ?Sized>(h: &H, t: f64, psi: &Ket) -> Result<Ket> {
    if h.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi.dim(),
        });
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite time {t}")));
    }
    Ok(Ket {
        n_qubits: psi.n_qubits,
        amplitudes: h.propagate(t, &psi.amplitudes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_block(k: usize, rng: &mut impl Rng) -> CMatrix {
        let d = 1 << k;
        CMatrix::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_ket(n: usize, rng: &mut impl Rng) -> Ket {
        let v = CVector::from_fn(1 << n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        Ket::new(n, v).unwrap().normalized()
    }

    /// Full matrix built by Kronecker products over all qubits, highest qubit leftmost.
    fn kron_oracle(n: usize, op: &LocalOperator) -> CMatrix {
        // Expand the block by explicit summation over its matrix units.
        let k = op.support.len();
        let mut total = CMatrix::zeros(1 << n, 1 << n);
        for row in 0..1 << k {
            for col in 0..1 << k {
                let coeff = op.block[(row, col)];
                if coeff == ZERO {
                    continue;
                }
                let mut full = CMatrix::identity(1, 1);
                for q in (1..=n).rev() {
                    let factor = match op.support.iter().position(|&s| s == q) {
                        Some(m) => {
                            let mut unit = CMatrix::zeros(2, 2);
                            unit[(row >> m & 1, col >> m & 1)] = ONE;
                            unit
                        }
                        None => CMatrix::identity(2, 2),
                    };
                    full = full.kronecker(&factor);
                }
                total += full * coeff;
            }
        }
        total
    }

    #[test]
    fn basis_ket_examples() {
        assert_eq!(Ket::basis("0").unwrap().amplitudes().as_slice(), &[ONE, ZERO]);
        let k = Ket::basis("0011").unwrap();
        assert_eq!(k.n_qubits(), 4);
        assert_eq!(k.amplitudes()[3], ONE);
        assert_eq!(Ket::basis("1100").unwrap().amplitudes()[12], ONE);
    }

    #[test]
    fn basis_ket_rejects_bad_labels() {
        assert!(matches!(Ket::basis(""), Err(Error::InvalidLabel(_))));
        assert!(matches!(Ket::basis("01a1"), Err(Error::InvalidLabel(_))));
        assert!(matches!(Ket::basis("0 1"), Err(Error::InvalidLabel(_))));
    }

    #[test]
    fn label_round_trip_up_to_ten_qubits() {
        for n in 1..=10 {
            for idx in 0..1usize << n {
                let label = index_to_label(idx, n);
                assert_eq!(label_to_index(&label).unwrap(), (n, idx));
            }
        }
    }

    #[test]
    fn tensor_examples() {
        let t = tensor(&Ket::basis("0011").unwrap(), &Ket::basis("0101").unwrap());
        assert_eq!(t, Ket::basis("00110101").unwrap());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = random_ket(2, &mut rng);
        let y = tensor(&x, &Ket::basis("000").unwrap());
        for (i, a) in x.amplitudes().iter().enumerate() {
            assert_eq!(y.amplitudes()[i << 3], *a);
        }
        assert!((y.norm_sqr() - 1.0).abs() < 1e-12);
        let z = tensor(&x, &random_ket(3, &mut rng));
        assert!(z.is_normalized());
    }

    #[test]
    fn apply_local_examples() {
        let psi = Ket::basis("0011").unwrap();
        let id = LocalOperator::single(3, pauli::identity()).unwrap();
        assert_eq!(apply_local(&id, &psi).unwrap(), psi);

        let z1 = LocalOperator::single(1, pauli::z()).unwrap();
        assert_eq!(apply_local(&z1, &psi).unwrap(), psi.scaled(c(-1.0, 0.0)));
        let z3 = LocalOperator::single(3, pauli::z()).unwrap();
        assert_eq!(apply_local(&z3, &psi).unwrap(), psi);

        let lower = LocalOperator::single(1, pauli::lowering()).unwrap();
        let out = apply_local(&lower, &Ket::basis("1100").unwrap()).unwrap();
        assert_eq!(out.norm(), 0.0);
        let out = apply_local(&lower, &psi).unwrap();
        assert_eq!(out, Ket::basis("0010").unwrap());
    }

    #[test]
    fn apply_local_rejects_out_of_range() {
        let op = LocalOperator::single(5, pauli::x()).unwrap();
        assert!(matches!(
            apply_local(&op, &Ket::basis("0011").unwrap()),
            Err(Error::QubitOutOfRange { qubit: 5, .. })
        ));
        assert!(LocalOperator::new(vec![2, 2], CMatrix::identity(4, 4)).is_err());
        assert!(LocalOperator::new(vec![1, 2], CMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn apply_local_matches_kronecker_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6 {
            for _ in 0..6 {
                let k = rng.random_range(1..=n.min(3));
                let mut support: Vec<usize> = (1..=n).collect();
                for i in (1..support.len()).rev() {
                    support.swap(i, rng.random_range(0..=i));
                }
                support.truncate(k);
                let op = LocalOperator::new(support, random_block(k, &mut rng)).unwrap();
                let psi = random_ket(n, &mut rng);
                let fast = apply_local(&op, &psi).unwrap();
                let slow = kron_oracle(n, &op) * psi.amplitudes();
                assert!((fast.amplitudes() - slow).norm() <= 1e-12);
                let dense = op.to_dense(n).unwrap();
                assert!((dense.matrix() - kron_oracle(n, &op)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn expm_apply_examples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let psi = random_ket(3, &mut rng);
        let a = random_block(3, &mut rng);
        let h = DenseOperator::new((&a + a.adjoint()).unscale(2.0));
        assert_eq!(expm_apply(&h, 0.0, &psi).unwrap(), psi);
        let out = expm_apply(&h, 2.7, &psi).unwrap();
        assert!((out.norm() - 1.0).abs() <= 1e-10);

        let kappa = 0.8;
        let t = 1.7;
        let decay = LocalOperator::single(1, pauli::excited().scale(1.0) * c(0.0, -kappa / 2.0)).unwrap();
        let sum = OperatorSum::from_terms(1, vec![decay]).unwrap();
        let out = expm_apply(&sum, t, &Ket::basis("1").unwrap()).unwrap();
        assert!((out.amplitudes()[1] - c((-kappa * t / 2.0).exp(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn expm_apply_taylor_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for n in [2, 4, 6, 8] {
            let mut sum = OperatorSum::new(n);
            for q in 1..n {
                sum.push(LocalOperator::new(vec![q, q + 1], random_block(2, &mut rng)).unwrap())
                    .unwrap();
            }
            let psi = random_ket(n, &mut rng);
            let t = 0.9;
            let action = expm_apply(&sum, t, &psi).unwrap();
            let dense = expm_apply(&sum.to_dense().unwrap(), t, &psi).unwrap();
            let rel = action.distance(&dense) / dense.norm();
            assert!(rel <= 1e-10, "n = {n}: relative error {rel:e}");
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = DenseOperator::identity(4);
        assert!(matches!(
            expm_apply(&h, 1.0, &Ket::basis("000").unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ket_json_is_pair_array() {
        let k = Ket::basis("01").unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, "[[0.0,0.0],[1.0,0.0],[0.0,0.0],[0.0,0.0]]");
        let back: Ket = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);
        assert!(serde_json::from_str::<Ket>("[[1.0,0.0],[0.0,0.0],[0.0,0.0]]").is_err());
    }

    proptest! {
        #[test]
        fn flow_property(seed in 0u64..1000, t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut sum = OperatorSum::new(3);
            sum.push(LocalOperator::new(vec![1, 3], random_block(2, &mut rng)).unwrap()).unwrap();
            sum.push(LocalOperator::new(vec![2], random_block(1, &mut rng)).unwrap()).unwrap();
            let psi = random_ket(3, &mut rng);
            let two_step = expm_apply(&sum, t1, &expm_apply(&sum, t2, &psi).unwrap()).unwrap();
            let one_step = expm_apply(&sum, t1 + t2, &psi).unwrap();
            prop_assert!(two_step.distance(&one_step) <= 1e-9 * one_step.norm().max(1.0));
        }
    }
}
