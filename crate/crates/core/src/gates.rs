//! Logical gates on jump codes built from exchange (`E`) and Ising-type (`F`)
//! two-qubit Hamiltonians, Trotter programs, and the two-register phase gate.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codes::{jump_code, projector, JumpCode};
use crate::error::{Error, Result};
use crate::linalg::{self, c, propagator, spectral_norm, unitary_generator, CMatrix, C64, I, ONE};
use crate::qstate::{pauli, DenseOperator, Ket, LocalOperator, OperatorSum};

/// Invariance tolerance for the exact E/F constructions.
pub const LEAKAGE_TOL: f64 = 1e-12;
/// Cap of the doubling search over Trotter step counts.
pub const MAX_TROTTER_STEPS: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermKind {
    E,
    F,
}

/// `coefficient · kind_{αβ}` with `α < β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateTerm {
    pub kind: TermKind,
    pub pair: (usize, usize),
    pub coefficient: f64,
}

impl GateTerm {
    pub fn new(kind: TermKind, a: usize, b: usize, coefficient: f64) -> Result<Self> {
        if a == b {
            return Err(Error::RepeatedQubit(vec![a, b]));
        }
        if a == 0 || b == 0 {
            return Err(Error::QubitOutOfRange {
                qubit: 0,
                n_qubits: a.max(b),
            });
        }
        if !coefficient.is_finite() {
            return Err(Error::InvalidArgument(format!("coefficient {coefficient}")));
        }
        Ok(GateTerm {
            kind,
            pair: (a.min(b), a.max(b)),
            coefficient,
        })
    }

    pub fn local_operator(&self) -> LocalOperator {
        let op = match self.kind {
            TermKind::E => e_op(self.pair.0, self.pair.1),
            TermKind::F => f_op(self.pair.0, self.pair.1),
        }
        .expect("validated pair");
        op.scaled(C64::from(self.coefficient))
    }
}

impl Serialize for GateTerm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.kind, self.pair.0, self.pair.1, self.coefficient).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GateTerm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (kind, a, b, coefficient) = <(TermKind, usize, usize, f64)>::deserialize(d)?;
        GateTerm::new(kind, a, b, coefficient).map_err(D::Error::custom)
    }
}

fn two_qubit(a: usize, b: usize, block: CMatrix) -> Result<LocalOperator> {
    if a == b {
        return Err(Error::RepeatedQubit(vec![a, b]));
    }
    LocalOperator::new(vec![a, b], block)
}

/// `E_{αβ} = ½(1 + σˣσˣ + σʸσʸ + σᶻσᶻ)`, the swap of qubits α and β.
pub fn e_op(a: usize, b: usize) -> Result<LocalOperator> {
    let block = (CMatrix::identity(4, 4)
        + pauli::pair(&pauli::x(), &pauli::x())
        + pauli::pair(&pauli::y(), &pauli::y())
        + pauli::pair(&pauli::z(), &pauli::z()))
    .unscale(2.0);
    two_qubit(a, b, block)
}

/// `F_{αβ} = ½(1 + σᶻσᶻ)`, the projector onto equal bits of α and β.
pub fn f_op(a: usize, b: usize) -> Result<LocalOperator> {
    let block = (CMatrix::identity(4, 4) + pauli::pair(&pauli::z(), &pauli::z())).unscale(2.0);
    two_qubit(a, b, block)
}

/// Real combination of `E` and `F` terms. Like terms are merged.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GateHamiltonian {
    terms: Vec<GateTerm>,
}

impl GateHamiltonian {
    pub fn new(terms: Vec<GateTerm>) -> Self {
        let mut merged: BTreeMap<(TermKind, (usize, usize)), f64> = BTreeMap::new();
        for t in terms {
            *merged.entry((t.kind, t.pair)).or_default() += t.coefficient;
        }
        GateHamiltonian {
            terms: merged
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|((kind, pair), coefficient)| GateTerm { kind, pair, coefficient })
                .collect(),
        }
    }

    pub fn single(kind: TermKind, a: usize, b: usize, coefficient: f64) -> Result<Self> {
        Ok(GateHamiltonian::new(vec![GateTerm::new(kind, a, b, coefficient)?]))
    }

    pub fn terms(&self) -> &[GateTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_qubit(&self) -> usize {
        self.terms.iter().map(|t| t.pair.1).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        GateHamiltonian::new(
            self.terms
                .iter()
                .map(|t| GateTerm {
                    coefficient: t.coefficient * factor,
                    ..*t
                })
                .collect(),
        )
    }

    pub fn plus(&self, other: &GateHamiltonian) -> Self {
        GateHamiltonian::new(self.terms.iter().chain(&other.terms).copied().collect())
    }

    /// Drop terms whose coefficient is at most `tol` in magnitude.
    pub fn pruned(&self, tol: f64) -> Self {
        GateHamiltonian {
            terms: self.terms.iter().filter(|t| t.coefficient.abs() > tol).copied().collect(),
        }
    }

    pub fn to_operator_sum(&self, n_qubits: usize) -> Result<OperatorSum> {
        OperatorSum::from_terms(n_qubits, self.terms.iter().map(GateTerm::local_operator).collect())
    }

    pub fn to_dense(&self, n_qubits: usize) -> Result<DenseOperator> {
        if self.is_zero() {
            let dim = 1usize << n_qubits;
            return Ok(DenseOperator::new(CMatrix::zeros(dim, dim)));
        }
        self.to_operator_sum(n_qubits)?.to_dense()
    }
}

/// Negation of a generator, used to realize `exp(+iHt)` as a forward segment.
pub trait Generator: Clone {
    fn negated(&self) -> Self;
}

impl Generator for GateHamiltonian {
    fn negated(&self) -> Self {
        self.scaled(-1.0)
    }
}

impl Generator for CMatrix {
    fn negated(&self) -> Self {
        -self.clone()
    }
}

/// `exp(−i H duration)` with `duration ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment<H> {
    pub hamiltonian: H,
    pub duration: f64,
}

impl<H: Generator> Segment<H> {
    /// The factor `exp(iτH)` as a forward segment.
    pub fn forward(h: &H, tau: f64) -> Self {
        if tau >= 0.0 {
            Segment {
                hamiltonian: h.negated(),
                duration: tau,
            }
        } else {
            Segment {
                hamiltonian: h.clone(),
                duration: -tau,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Block<H> {
    Segment(Segment<H>),
    Repeat { count: usize, body: Vec<Block<H>> },
}

/// Timed sequence of Hamiltonians, listed in the order they act.
#[derive(Clone, Debug, PartialEq)]
pub struct Program<H> {
    pub blocks: Vec<Block<H>>,
    pub target_error: Option<f64>,
    /// Step count per product formula.
    pub trotter_steps: BTreeMap<String, usize>,
}

pub type HamiltonianProgram = Program<GateHamiltonian>;

impl<H> Default for Program<H> {
    fn default() -> Self {
        Program {
            blocks: Vec::new(),
            target_error: None,
            trotter_steps: BTreeMap::new(),
        }
    }
}

fn count_segments<H>(blocks: &[Block<H>]) -> usize {
    blocks
        .iter()
        .map(|b| match b {
            Block::Segment(_) => 1,
            Block::Repeat { count, body } => count * count_segments(body),
        })
        .sum()
}

fn compile<H, F>(blocks: &[Block<H>], leaf: &mut F) -> Result<Vec<Block<CMatrix>>>
where
    F: FnMut(&Segment<H>) -> Result<CMatrix>,
{
    blocks
        .iter()
        .map(|b| {
            Ok(match b {
                Block::Segment(s) => Block::Segment(Segment {
                    hamiltonian: leaf(s)?,
                    duration: s.duration,
                }),
                Block::Repeat { count, body } => Block::Repeat {
                    count: *count,
                    body: compile(body, leaf)?,
                },
            })
        })
        .collect()
}

fn matrix_power(m: &CMatrix, mut k: usize) -> CMatrix {
    let mut result = CMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &base * &result;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

/// Product of compiled blocks, where each leaf already holds its unitary.
fn product(blocks: &[Block<CMatrix>], dim: usize) -> CMatrix {
    let mut u = CMatrix::identity(dim, dim);
    for b in blocks {
        u = match b {
            Block::Segment(s) => &s.hamiltonian * u,
            Block::Repeat { count, body } => matrix_power(&product(body, dim), *count) * u,
        };
    }
    u
}

impl<H> Program<H> {
    pub fn new(blocks: Vec<Block<H>>) -> Self {
        Program {
            blocks,
            ..Program::default()
        }
    }

    pub fn from_segments(segments: Vec<Segment<H>>) -> Self {
        Program::new(segments.into_iter().map(Block::Segment).collect())
    }

    /// Number of segments after unrolling repeats.
    pub fn len(&self) -> usize {
        count_segments(&self.blocks)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segments(&self) -> SegmentIter<'_, H> {
        SegmentIter {
            stack: vec![(&self.blocks[..], 0, 1)],
        }
    }

    /// Time-ordered product `… U₂ U₁` with `U_k = exp(−i H_k d_k)` and `H_k = dense(·)`.
    ///
    /// Each distinct block is exponentiated once and repeats are raised by squaring.
    pub fn unitary<F>(&self, dim: usize, mut dense: F) -> Result<CMatrix>
    where
        F: FnMut(&H) -> Result<CMatrix>,
    {
        let compiled = compile(&self.blocks, &mut |s: &Segment<H>| Ok(propagator(&dense(&s.hamiltonian)?, s.duration)))?;
        Ok(product(&compiled, dim))
    }
}

/// Depth-first walk through a program with repeats unrolled.
pub struct SegmentIter<'a, H> {
    stack: Vec<(&'a [Block<H>], usize, usize)>,
}

impl<'a, H> Iterator for SegmentIter<'a, H> {
    type Item = &'a Segment<H>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let top = self.stack.last_mut()?;
            if top.1 < top.0.len() {
                let block = &top.0[top.1];
                top.1 += 1;
                match block {
                    Block::Segment(s) => return Some(s),
                    Block::Repeat { count, body } => {
                        if *count > 0 && !body.is_empty() {
                            self.stack.push((&body[..], 0, *count));
                        }
                    }
                }
            } else {
                top.2 -= 1;
                if top.2 > 0 {
                    top.1 = 0;
                } else {
                    self.stack.pop();
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SegmentWire {
    terms: Vec<GateTerm>,
    duration: f64,
}

struct FlatSegments<'a>(&'a HamiltonianProgram);

impl Serialize for FlatSegments<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for seg in self.0.segments() {
            seq.serialize_element(&SegmentWire {
                terms: seg.hamiltonian.terms.clone(),
                duration: seg.duration,
            })?;
        }
        seq.end()
    }
}

impl Serialize for HamiltonianProgram {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("HamiltonianProgram", 3)?;
        st.serialize_field("target_error", &self.target_error)?;
        st.serialize_field("trotter_steps", &self.trotter_steps)?;
        st.serialize_field("segments", &FlatSegments(self))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for HamiltonianProgram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            #[serde(default)]
            target_error: Option<f64>,
            #[serde(default)]
            trotter_steps: BTreeMap<String, usize>,
            segments: Vec<SegmentWire>,
        }
        let w = Wire::deserialize(d)?;
        let mut blocks = Vec::with_capacity(w.segments.len());
        for s in w.segments {
            if !(s.duration >= 0.0 && s.duration.is_finite()) {
                return Err(D::Error::custom(format!("segment duration {} must be non-negative", s.duration)));
            }
            blocks.push(Block::Segment(Segment {
                hamiltonian: GateHamiltonian::new(s.terms),
                duration: s.duration,
            }));
        }
        Ok(Program {
            blocks,
            target_error: w.target_error,
            trotter_steps: w.trotter_steps,
        })
    }
}

impl HamiltonianProgram {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `e^{i(t₁H₁+t₂H₂)} ≈ (e^{i t₁/n H₁} e^{i t₂/n H₂})ⁿ`
pub fn trotter_sum<H: Generator>(h1: &H, h2: &H, t1: f64, t2: f64, n: usize) -> Result<Program<H>> {
    if n == 0 {
        return Err(Error::InvalidArgument("Trotter step count must be at least 1".into()));
    }
    let nf = n as f64;
    let body = vec![
        Block::Segment(Segment::forward(h2, t2 / nf)),
        Block::Segment(Segment::forward(h1, t1 / nf)),
    ];
    let mut p = Program::new(vec![Block::Repeat { count: n, body }]);
    p.trotter_steps.insert("sum".into(), n);
    Ok(p)
}

/// `e^{−t₁t₂[H₁,H₂]} ≈ (e^{iaH₁} e^{ibH₂} e^{−iaH₁} e^{−ibH₂})ⁿ` with `a = t₁/√n`, `b = t₂/√n`.
pub fn trotter_commutator<H: Generator>(h1: &H, h2: &H, t1: f64, t2: f64, n: usize) -> Result<Program<H>> {
    if n == 0 {
        return Err(Error::InvalidArgument("Trotter step count must be at least 1".into()));
    }
    let root = (n as f64).sqrt();
    let (a, b) = (t1 / root, t2 / root);
    let body = vec![
        Block::Segment(Segment::forward(h2, -b)),
        Block::Segment(Segment::forward(h1, -a)),
        Block::Segment(Segment::forward(h2, b)),
        Block::Segment(Segment::forward(h1, a)),
    ];
    let mut p = Program::new(vec![Block::Repeat { count: n, body }]);
    p.trotter_steps.insert("commutator".into(), n);
    Ok(p)
}

/// Matrix of `op` in an orthonormal `basis`, after checking `‖(1−P) op P‖ ≤ tol`.
pub fn logical_matrix(op: &DenseOperator, basis: &[Ket], tol: f64) -> Result<DenseOperator> {
    let Some(first) = basis.first() else {
        return Err(Error::ZeroRank);
    };
    let dim = first.dim();
    if op.matrix().nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: op.matrix().nrows(),
        });
    }
    let q = CMatrix::from_columns(&basis.iter().map(|k| k.amplitudes().clone()).collect::<Vec<_>>());
    let image = op.matrix() * &q;
    let m = q.adjoint() * &image;
    let residual = spectral_norm(&(image - &q * &m));
    if residual > tol {
        return Err(Error::Leakage { residual, tol });
    }
    Ok(DenseOperator::new(m))
}

/// Logical matrix of a gate Hamiltonian on the codewords of `code`.
pub fn logical_gate_matrix(h: &GateHamiltonian, code: &JumpCode, tol: f64) -> Result<CMatrix> {
    if h.max_qubit() > code.n_qubits() {
        return Err(Error::QubitOutOfRange {
            qubit: h.max_qubit(),
            n_qubits: code.n_qubits(),
        });
    }
    Ok(logical_matrix(&h.to_dense(code.n_qubits())?, &code.codewords(), tol)?.into_matrix())
}

/// Physical construction of a logical generator.
#[derive(Clone, Debug, PartialEq)]
pub enum Realization {
    Linear(GateHamiltonian),
    /// `i[H₁, H₂]`
    Commutator(GateHamiltonian, GateHamiltonian),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Su3Generator {
    pub name: &'static str,
    pub logical: CMatrix,
    pub realization: Realization,
}

fn e_minus_f(a: usize, b: usize) -> GateHamiltonian {
    GateHamiltonian::new(vec![
        GateTerm::new(TermKind::E, a, b, 1.0).expect("distinct"),
        GateTerm::new(TermKind::F, a, b, -1.0).expect("distinct"),
    ])
}

/// The eight generators `C⁺₁₂, C⁺₁₃, C⁺₂₃, C⁻₁₂, C⁻₁₃, C⁻₂₃, F₁₂, F₁₃` on 1-JC(4,2,3).
pub fn su3_generators() -> Vec<Su3Generator> {
    let code = jump_code(4, 0.0).expect("N = 4 is even");
    let c12 = e_minus_f(2, 3);
    let c13 = e_minus_f(1, 3);
    let c23 = e_minus_f(1, 2);
    let logical = |h: &GateHamiltonian| logical_gate_matrix(h, &code, LEAKAGE_TOL).expect("E/F preserve the code");
    let commutator = |a: &GateHamiltonian, b: &GateHamiltonian| linalg::commutator(&logical(a), &logical(b)) * I;
    let f12 = GateHamiltonian::single(TermKind::F, 1, 2, 1.0).expect("distinct");
    let f13 = GateHamiltonian::single(TermKind::F, 1, 3, 1.0).expect("distinct");
    vec![
        Su3Generator { name: "C12+", logical: logical(&c12), realization: Realization::Linear(c12.clone()) },
        Su3Generator { name: "C13+", logical: logical(&c13), realization: Realization::Linear(c13.clone()) },
        Su3Generator { name: "C23+", logical: logical(&c23), realization: Realization::Linear(c23.clone()) },
        Su3Generator {
            name: "C12-",
            logical: commutator(&c13, &c23),
            realization: Realization::Commutator(c13.clone(), c23.clone()),
        },
        Su3Generator {
            name: "C13-",
            logical: commutator(&c12, &c23),
            realization: Realization::Commutator(c12.clone(), c23.clone()),
        },
        Su3Generator {
            name: "C23-",
            logical: commutator(&c12, &c13),
            realization: Realization::Commutator(c12, c13),
        },
        Su3Generator { name: "F12", logical: logical(&f12), realization: Realization::Linear(f12) },
        Su3Generator { name: "F13", logical: logical(&f13), realization: Realization::Linear(f13) },
    ]
}

/// The eight Gell-Mann matrices.
pub fn gell_mann() -> Vec<CMatrix> {
    let r = |e: &[(usize, usize, C64)]| {
        let mut m = CMatrix::zeros(3, 3);
        for &(i, j, v) in e {
            m[(i, j)] = v;
        }
        m
    };
    let s3 = 1.0 / 3f64.sqrt();
    vec![
        r(&[(0, 1, ONE), (1, 0, ONE)]),
        r(&[(0, 1, -I), (1, 0, I)]),
        r(&[(0, 0, ONE), (1, 1, -ONE)]),
        r(&[(0, 2, ONE), (2, 0, ONE)]),
        r(&[(0, 2, -I), (2, 0, I)]),
        r(&[(1, 2, ONE), (2, 1, ONE)]),
        r(&[(1, 2, -I), (2, 1, I)]),
        r(&[(0, 0, c(s3, 0.0)), (1, 1, c(s3, 0.0)), (2, 2, c(-2.0 * s3, 0.0))]),
    ]
}

fn real_vector(m: &CMatrix) -> DVector<f64> {
    DVector::from_iterator(2 * m.len(), m.iter().map(|z| z.re).chain(m.iter().map(|z| z.im)))
}

fn from_real_vector(v: &DVector<f64>, rows: usize, cols: usize) -> CMatrix {
    let n = rows * cols;
    CMatrix::from_iterator(rows, cols, (0..n).map(|k| c(v[k], v[n + k])))
}

/// Orthonormal basis of a real span, grown one candidate at a time.
#[derive(Default)]
struct RealSpan {
    basis: Vec<DVector<f64>>,
}

impl RealSpan {
    const TOL: f64 = 1e-9;

    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &self.basis {
                let p = b.dot(&r);
                r -= b * p;
            }
        }
        r
    }

    fn insert(&mut self, v: &DVector<f64>) -> bool {
        let scale = v.norm();
        if scale == 0.0 {
            return false;
        }
        let r = self.residual(v);
        if r.norm() <= Self::TOL * scale {
            return false;
        }
        self.basis.push(r.normalize());
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureReport {
    pub dimension: usize,
    pub traceless_dimension: usize,
    /// Orthonormal (Hilbert-Schmidt) hermitian basis of the closure.
    pub basis: Vec<CMatrix>,
}

/// Real Lie algebra generated by hermitian matrices under `(A, B) ↦ i[A, B]`.
pub fn lie_closure(generators: &[CMatrix]) -> ClosureReport {
    let Some(first) = generators.first() else {
        return ClosureReport {
            dimension: 0,
            traceless_dimension: 0,
            basis: vec![],
        };
    };
    let (rows, cols) = first.shape();
    let mut span = RealSpan::default();
    for g in generators {
        span.insert(&real_vector(g));
    }
    let mut done = 0;
    loop {
        let mats: Vec<CMatrix> = span.basis.iter().map(|v| from_real_vector(v, rows, cols)).collect();
        let before = mats.len();
        for a in 0..before {
            for b in (a + 1).max(done)..before {
                span.insert(&real_vector(&(linalg::commutator(&mats[a], &mats[b]) * I)));
            }
        }
        if span.basis.len() == before {
            break;
        }
        done = before;
    }
    let basis: Vec<CMatrix> = span.basis.iter().map(|v| from_real_vector(v, rows, cols)).collect();
    let mut traceless = RealSpan::default();
    for m in &basis {
        let shift = m.trace() / C64::from(rows as f64);
        traceless.insert(&real_vector(&(m - CMatrix::identity(rows, cols) * shift)));
    }
    ClosureReport {
        dimension: basis.len(),
        traceless_dimension: traceless.basis.len(),
        basis,
    }
}

pub fn lie_closure_dimension(generators: &[CMatrix]) -> (usize, usize) {
    let r = lie_closure(generators);
    (r.dimension, r.traceless_dimension)
}

/// `max_v ‖v − Π v‖ / ‖v‖` with `Π` the orthogonal projector onto the real span of `span`.
pub fn span_inclusion_residual(span: &[CMatrix], vectors: &[CMatrix]) -> f64 {
    let mut s = RealSpan::default();
    for m in span {
        s.insert(&real_vector(m));
    }
    vectors
        .iter()
        .map(|v| {
            let rv = real_vector(v);
            let n = rv.norm();
            if n == 0.0 {
                0.0
            } else {
                s.residual(&rv).norm() / n
            }
        })
        .fold(0.0, f64::max)
}

/// Haar-random `d × d` unitary (QR of a complex Ginibre matrix with fixed phases).
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let g = CMatrix::from_fn(d, d, |_, _| c(normal(), normal()) * std::f64::consts::FRAC_1_SQRT_2);
    let (mut q, r) = g.qr().unpack();
    for j in 0..d {
        let p = r[(j, j)];
        let phase = if p.norm() > 0.0 { p / p.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random element of SU(d).
pub fn haar_special_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let u = haar_unitary(d, rng);
    let det = u.determinant();
    u * C64::from_polar(1.0, -det.arg() / d as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Synthesis {
    pub program: HamiltonianProgram,
    /// Phase-aligned operator-norm distance of the realized logical gate to the target.
    pub error: f64,
    /// Largest Frobenius-norm leakage `‖(1−P) U_k Q‖` over all segment boundaries.
    pub leakage: f64,
    pub outer_steps: usize,
    pub commutator_steps: usize,
}

const COEFFICIENT_CUTOFF: f64 = 1e-13;

struct Expansion {
    linear: GateHamiltonian,
    commutators: Vec<(f64, GateHamiltonian, GateHamiltonian)>,
}

/// Write the traceless part of a hermitian 3×3 `h` over the eight generators.
fn expand(h: &CMatrix, generators: &[Su3Generator]) -> Result<Expansion> {
    let mut cols: Vec<DVector<f64>> = generators.iter().map(|g| real_vector(&g.logical)).collect();
    cols.push(real_vector(&CMatrix::identity(3, 3)));
    let a = nalgebra::DMatrix::from_columns(&cols);
    let rhs = real_vector(h);
    let x = a.clone().svd(true, true).solve(&rhs, 1e-12).map_err(|e| Error::InvalidArgument(e.into()))?;
    let fit = (&a * &x - &rhs).norm();
    if fit > 1e-9 * (1.0 + rhs.norm()) {
        return Err(Error::InvalidArgument(format!("generator expansion residual {fit}")));
    }
    let mut linear = GateHamiltonian::default();
    let mut commutators = Vec::new();
    for (g, &coef) in generators.iter().zip(x.iter()) {
        if coef.abs() <= COEFFICIENT_CUTOFF {
            continue;
        }
        match &g.realization {
            Realization::Linear(op) => linear = linear.plus(&op.scaled(coef)),
            Realization::Commutator(h1, h2) => commutators.push((coef, h1.clone(), h2.clone())),
        }
    }
    Ok(Expansion {
        linear: linear.pruned(COEFFICIENT_CUTOFF),
        commutators,
    })
}

/// One outer step: `exp(−iA/m)` followed by `exp(−i b_k C⁻_k / m)` for each commutator term,
/// the latter via the commutator formula with `n` steps.
fn synthesis_program(ex: &Expansion, m: usize, n: usize) -> Result<HamiltonianProgram> {
    let mut body = Vec::new();
    if !ex.linear.is_zero() {
        body.push(Block::Segment(Segment {
            hamiltonian: ex.linear.clone(),
            duration: 1.0 / m as f64,
        }));
    }
    for (b, h1, h2) in &ex.commutators {
        // exp(−i b i[H₁,H₂]) = exp(b[H₁,H₂]) = exp(−t₁t₂[H₁,H₂]) with t₁t₂ = −b.
        let step = b / m as f64;
        let t1 = step.abs().sqrt();
        let t2 = -step.signum() * step.abs().sqrt();
        body.extend(trotter_commutator(h1, h2, t1, t2, n)?.blocks);
    }
    let mut program = if ex.commutators.is_empty() {
        Program::new(body)
    } else {
        let mut p = Program::new(vec![Block::Repeat { count: m, body }]);
        p.trotter_steps.insert("outer".into(), m);
        p.trotter_steps.insert("commutator".into(), n);
        p
    };
    program.blocks.retain(|b| !matches!(b, Block::Segment(s) if s.duration == 0.0));
    Ok(program)
}

/// Realized logical gate and boundary leakage of a program on `code`, propagating the
/// physical image of the code space segment by segment.
pub fn certify_program(program: &HamiltonianProgram, code: &JumpCode) -> Result<(CMatrix, f64)> {
    let n = code.n_qubits();
    let q = CMatrix::from_columns(&code.codewords().iter().map(|k| k.amplitudes().clone()).collect::<Vec<_>>());
    let compiled = compile(&program.blocks, &mut |s: &Segment<GateHamiltonian>| {
        let h = s.hamiltonian.to_dense(n)?;
        logical_matrix(&h, &code.codewords(), LEAKAGE_TOL)?;
        Ok(propagator(h.matrix(), s.duration))
    })?;
    let qa = q.adjoint();
    let mut state = q.clone();
    let mut leakage: f64 = 0.0;
    let walk = SegmentIter {
        stack: vec![(&compiled[..], 0, 1)],
    };
    for seg in walk {
        state = &seg.hamiltonian * &state;
        let inside = &q * (&qa * &state);
        leakage = leakage.max((&state - inside).norm());
    }
    Ok((qa * state, leakage))
}

fn logical_program_unitary(program: &HamiltonianProgram, code: &JumpCode) -> Result<CMatrix> {
    program.unitary(3, |h| logical_gate_matrix(h, code, LEAKAGE_TOL))
}

/// Approximate a 3×3 logical unitary on 1-JC(4,2,3) by a program of E/F segments.
///
/// The generator `H_L` with `exp(−iH_L) = U` is expanded over the eight generators;
/// the `C⁺` and `F` part forms one segment and each `C⁻` term is produced by the
/// commutator formula. Outer and inner step counts double together until the
/// phase-aligned error is at most `eps`.
pub fn synthesize_qutrit(u: &CMatrix, code: &JumpCode, eps: f64) -> Result<Synthesis> {
    if u.shape() != (3, 3) || code.len() != 3 {
        return Err(Error::InvalidArgument("qutrit synthesis needs a 3×3 target and a 3-codeword code".into()));
    }
    let residual = linalg::unitarity_residual(u);
    if residual > 1e-10 {
        return Err(Error::InvalidArgument(format!("target is not unitary (residual {residual:.3e})")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("target error {eps} must be positive")));
    }
    let generators = su3_generators();
    let expansion = expand(&unitary_generator(u), &generators)?;
    let mut steps = 1;
    let (program, error) = loop {
        let program = synthesis_program(&expansion, steps, steps)?;
        let error = linalg::phase_aligned_distance(&logical_program_unitary(&program, code)?, u);
        if error <= eps || expansion.commutators.is_empty() {
            break (program, error);
        }
        if steps >= MAX_TROTTER_STEPS {
            return Err(Error::Unreachable {
                target: eps,
                achieved: error,
            });
        }
        steps *= 2;
    };
    let (realized, leakage) = certify_program(&program, code)?;
    let certified = linalg::phase_aligned_distance(&realized, u);
    if certified > eps {
        return Err(Error::Unreachable {
            target: eps,
            achieved: certified,
        });
    }
    let mut program = program;
    program.target_error = Some(eps);
    let used = if expansion.commutators.is_empty() { 0 } else { steps };
    Ok(Synthesis {
        program,
        error: certified.max(error),
        leakage,
        outer_steps: used,
        commutator_steps: used,
    })
}

/// `H_ent = ½(F₂₆ + F₃₆ + F₂₇ + F₃₇)` on two 4-qubit registers.
pub fn h_ent() -> GateHamiltonian {
    GateHamiltonian::new(
        [(2, 6), (3, 6), (2, 7), (3, 7)]
            .into_iter()
            .map(|(a, b)| GateTerm::new(TermKind::F, a, b, 0.5).expect("distinct"))
            .collect(),
    )
}

/// `U(τ) = exp(−iτ H_ent)` on 8 qubits. `H_ent` is diagonal, so this is exact.
pub fn ent_unitary(tau: f64) -> DenseOperator {
    let h = h_ent().to_dense(8).expect("8 qubits");
    let diag: Vec<C64> = (0..256).map(|k| C64::from_polar(1.0, -tau * h.matrix()[(k, k)].re)).collect();
    DenseOperator::from_diagonal(&diag)
}

/// Conditional phase gate `V = −U(π)`.
pub fn v_gate() -> DenseOperator {
    DenseOperator::new(-ent_unitary(PI).into_matrix())
}

/// `‖(1 − P_code) op P_basis‖` for an operator on the register of `code`.
pub fn leakage(op: &DenseOperator, basis: &[Ket], code: &JumpCode) -> f64 {
    let q = CMatrix::from_columns(&basis.iter().map(|k| k.amplitudes().clone()).collect::<Vec<_>>());
    let p = projector(code);
    let image = op.matrix() * q;
    spectral_norm(&(&image - p.matrix() * &image))
}

/// Phases `θ_{jk}` of a diagonal two-qudit gate, canonicalized to `[0, 2π)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaMatrix {
    theta: Vec<Vec<f64>>,
}

fn canonical(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a >= 2.0 * PI - 1e-12 {
        0.0
    } else {
        a
    }
}

impl ThetaMatrix {
    pub fn new(theta: Vec<Vec<f64>>) -> Result<Self> {
        let d = theta.len();
        if theta.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("phase matrix must be square".into()));
        }
        Ok(ThetaMatrix {
            theta: theta.into_iter().map(|r| r.into_iter().map(canonical).collect()).collect(),
        })
    }

    /// Phases of a `d² × d²` logical matrix in the `|j⟩|k⟩ ↦ d·j + k` ordering.
    pub fn from_logical(m: &CMatrix, d: usize, tol: f64) -> Result<Self> {
        if m.shape() != (d * d, d * d) {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: m.nrows(),
            });
        }
        let mut off: f64 = 0.0;
        for i in 0..d * d {
            for j in 0..d * d {
                if i == j {
                    off = off.max((m[(i, i)].norm() - 1.0).abs());
                } else {
                    off = off.max(m[(i, j)].norm());
                }
            }
        }
        if off > tol {
            return Err(Error::InvalidArgument(format!("gate is not a diagonal phase gate (residual {off:.3e})")));
        }
        ThetaMatrix::new((0..d).map(|j| (0..d).map(|k| m[(d * j + k, d * j + k)].arg()).collect()).collect())
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.theta[j][k]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrimitivityWitness {
    pub j: usize,
    pub k: usize,
    pub p: usize,
    pub q: usize,
    /// `θ_{jk} + θ_{pq}` mod 2π
    pub direct: f64,
    /// `θ_{jq} + θ_{pk}` mod 2π
    pub crossed: f64,
}

/// A diagonal gate maps product states to product states iff
/// `θ_{jk} + θ_{pq} ≡ θ_{jq} + θ_{pk} (mod 2π)` for all indices.
///
/// Only `j < p`, `q < k` need checking; the search runs `j` downward so that small
/// violations near the top corner are reported first.
pub fn is_primitive_diagonal(theta: &ThetaMatrix, tol: f64) -> (bool, Option<PrimitivityWitness>) {
    let d = theta.dim();
    for j in (0..d).rev() {
        for p in j + 1..d {
            for k in (0..d).rev() {
                for q in (0..k).rev() {
                    let direct = canonical(theta.get(j, k) + theta.get(p, q));
                    let crossed = canonical(theta.get(j, q) + theta.get(p, k));
                    let gap = (direct - crossed).rem_euclid(2.0 * PI);
                    if gap.min(2.0 * PI - gap) > tol {
                        return (false, Some(PrimitivityWitness { j, k, p, q, direct, crossed }));
                    }
                }
            }
        }
    }
    (true, None)
}

/// Schmidt rank of `psi` across the cut between its `low_qubits` lowest qubits and the rest.
pub fn schmidt_rank(psi: &Ket, low_qubits: usize, tol: f64) -> usize {
    let low = 1usize << low_qubits;
    let high = psi.dim() / low;
    let m = CMatrix::from_fn(high, low, |h, l| psi.amplitudes()[h * low + l]);
    m.svd(false, false).singular_values.iter().filter(|&&s| s > tol).count()
}
