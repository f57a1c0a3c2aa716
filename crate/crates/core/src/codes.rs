//! Decoherence-free subspaces and one-error-correcting jump codes.
//!
//! A DFS-(N,k) is spanned by the N-qubit basis states with exactly `k` excited
//! qubits. The jump code 1-JC(N, N/2, ·) pairs every half-excited string `s` with
//! its complement and uses `|s⟩ + e^{iφ}|s̄⟩` as a codeword.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64, ONE};
use crate::qstate::{index_to_label, label_to_index, tensor, DenseOperator, Ket, DENSE_QUBIT_LIMIT};

/// Exact binomial coefficient; `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DfsBasis {
    n_qubits: usize,
    excitations: usize,
    indices: Vec<usize>,
}

impl DfsBasis {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn excitations(&self) -> usize {
        self.excitations
    }

    pub fn dimension(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn labels(&self) -> Vec<String> {
        self.indices.iter().map(|&i| index_to_label(i, self.n_qubits)).collect()
    }

    pub fn kets(&self) -> Vec<Ket> {
        self.indices.iter().map(|&i| Ket::basis_index(self.n_qubits, i)).collect()
    }
}

/// Weight-`k` basis strings of `N` qubits in lexicographic order of their labels.
pub fn dfs_basis(n_qubits: usize, excitations: usize) -> Result<DfsBasis> {
    if n_qubits == 0 || n_qubits > DENSE_QUBIT_LIMIT || excitations > n_qubits {
        return Err(Error::InvalidArgument(format!(
            "DFS-({n_qubits},{excitations}) needs 0 <= k <= N <= {DENSE_QUBIT_LIMIT}"
        )));
    }
    let indices = (0..1usize << n_qubits)
        .filter(|i| i.count_ones() as usize == excitations)
        .collect();
    Ok(DfsBasis {
        n_qubits,
        excitations,
        indices,
    })
}

/// Orthogonal projector onto a DFS.
pub fn dfs_projector(basis: &DfsBasis) -> DenseOperator {
    let dim = 1usize << basis.n_qubits;
    let mut m = CMatrix::zeros(dim, dim);
    for &i in &basis.indices {
        m[(i, i)] = ONE;
    }
    DenseOperator::new(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpCode {
    n_qubits: usize,
    phase: f64,
    /// Complementary pairs `(s, s̄)` as basis indices, `s` having qubit N unexcited.
    pairs: Vec<(usize, usize)>,
}

/// Wire format: `{"N":4,"k":2,"phase":0.0,"pairs":[["0011","1100"],...]}`.
#[derive(Serialize, Deserialize)]
struct JumpCodeJson {
    #[serde(rename = "N")]
    n: usize,
    k: usize,
    phase: f64,
    pairs: Vec<[String; 2]>,
}

impl JumpCode {
    /// Build from explicit pairs, checking the jump-code invariants.
    pub fn from_pairs(n_qubits: usize, phase: f64, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if n_qubits == 0 || n_qubits % 2 == 1 {
            return Err(Error::OddQubitCount(n_qubits));
        }
        if n_qubits > DENSE_QUBIT_LIMIT {
            return Err(Error::TooManyQubits {
                n_qubits,
                limit: DENSE_QUBIT_LIMIT,
            });
        }
        let full = (1usize << n_qubits) - 1;
        let mut seen = std::collections::HashSet::new();
        for &(s, sbar) in &pairs {
            if s > full || sbar != full ^ s {
                return Err(Error::InvalidArgument(format!(
                    "{} and {} are not complementary",
                    index_to_label(s, n_qubits),
                    index_to_label(sbar, n_qubits)
                )));
            }
            if s.count_ones() as usize != n_qubits / 2 {
                return Err(Error::InvalidArgument(format!(
                    "{} is not half excited",
                    index_to_label(s, n_qubits)
                )));
            }
            if !seen.insert(s) || !seen.insert(sbar) {
                return Err(Error::InvalidArgument("pairs overlap".into()));
            }
        }
        Ok(JumpCode {
            n_qubits,
            phase,
            pairs,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn excitations(&self) -> usize {
        self.n_qubits / 2
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair_labels(&self) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .map(|&(a, b)| (index_to_label(a, self.n_qubits), index_to_label(b, self.n_qubits)))
            .collect()
    }

    /// Number of codewords, the code dimension.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `2^N − dimension`
    pub fn redundancy(&self) -> u128 {
        (1u128 << self.n_qubits) - self.pairs.len() as u128
    }

    /// `(|s⟩ + e^{iφ}|s̄⟩)/√2`
    pub fn codeword(&self, i: usize) -> Result<Ket> {
        let &(s, sbar) = self.pairs.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.pairs.len(),
        })?;
        let mut v = CVector::zeros(1 << self.n_qubits);
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        v[s] = C64::from(amp);
        v[sbar] = C64::from_polar(amp, self.phase);
        Ket::new(self.n_qubits, v)
    }

    pub fn codewords(&self) -> Vec<Ket> {
        (0..self.len()).map(|i| self.codeword(i).expect("in range")).collect()
    }

    /// `Σ_i a_i |c_i⟩` for logical amplitudes `a`.
    pub fn encode(&self, logical: &CVector) -> Result<Ket> {
        if logical.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: logical.len(),
            });
        }
        let mut v = CVector::zeros(1 << self.n_qubits);
        for (i, a) in logical.iter().enumerate() {
            v += self.codeword(i)?.amplitudes() * *a;
        }
        Ket::new(self.n_qubits, v)
    }

    /// Logical amplitudes `⟨c_i|ψ⟩`.
    pub fn decode(&self, psi: &Ket) -> CVector {
        CVector::from_iterator(self.len(), self.codewords().iter().map(|c| c.inner(psi)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_wire())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: JumpCodeJson = serde_json::from_str(s)?;
        if wire.k * 2 != wire.n {
            return Err(Error::InvalidArgument(format!("k = {} must be N/2", wire.k)));
        }
        let mut pairs = Vec::with_capacity(wire.pairs.len());
        for [a, b] in &wire.pairs {
            let (na, ia) = label_to_index(a)?;
            let (nb, ib) = label_to_index(b)?;
            if na != wire.n || nb != wire.n {
                return Err(Error::DimensionMismatch {
                    expected: wire.n,
                    found: na.max(nb),
                });
            }
            pairs.push((ia, ib));
        }
        JumpCode::from_pairs(wire.n, wire.phase, pairs)
    }

    fn to_wire(&self) -> JumpCodeJson {
        JumpCodeJson {
            n: self.n_qubits,
            k: self.n_qubits / 2,
            phase: self.phase,
            pairs: self.pair_labels().into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }

    /// Same codewords regardless of pair order.
    pub fn same_codewords(&self, other: &JumpCode) -> bool {
        let mut a = self.pairs.clone();
        let mut b = other.pairs.clone();
        a.sort_unstable();
        b.sort_unstable();
        self.n_qubits == other.n_qubits && self.phase == other.phase && a == b
    }
}

impl Serialize for JumpCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_wire().serialize(s)
    }
}

/// 1-JC(N, N/2, C(N−1, N/2−1)): one codeword per complementary pair of
/// half-excited strings, ordered by the representative with qubit N unexcited.
pub fn jump_code(n_qubits: usize, phase: f64) -> Result<JumpCode> {
    if n_qubits == 0 || n_qubits % 2 == 1 {
        return Err(Error::OddQubitCount(n_qubits));
    }
    let basis = dfs_basis(n_qubits, n_qubits / 2)?;
    let full = (1usize << n_qubits) - 1;
    let top = 1usize << (n_qubits - 1);
    let pairs = basis
        .indices
        .iter()
        .filter(|&&s| s & top == 0)
        .map(|&s| (s, full ^ s))
        .collect();
    JumpCode::from_pairs(n_qubits, phase, pairs)
}

/// Codeword count `C(N−1, N/2−1)` of the 1-JC(N, N/2, ·) family.
pub fn codeword_count(n_qubits: usize) -> Result<u128> {
    if n_qubits == 0 || n_qubits % 2 == 1 {
        return Err(Error::OddQubitCount(n_qubits));
    }
    let n = n_qubits as u64;
    binomial(n - 1, n / 2 - 1).ok_or(Error::InvalidArgument(format!("C({}, {}) overflows", n - 1, n / 2 - 1)))
}

/// Effective number of logical qubits `log₂ C(N−1, N/2−1)`.
pub fn logical_qubits(n_qubits: usize) -> Result<f64> {
    if n_qubits == 0 || n_qubits % 2 == 1 {
        return Err(Error::OddQubitCount(n_qubits));
    }
    match codeword_count(n_qubits) {
        Ok(count) => Ok((count as f64).log2()),
        // Beyond u128 fall back to a sum of logarithms.
        Err(_) => {
            let n = n_qubits as u64;
            let k = n / 2 - 1;
            Ok((0..k).map(|i| ((n - 1 - i) as f64).log2() - ((i + 1) as f64).log2()).sum())
        }
    }
}

/// Orthogonal projector onto the code space.
pub fn projector(code: &JumpCode) -> DenseOperator {
    let dim = 1usize << code.n_qubits;
    let mut m = CMatrix::zeros(dim, dim);
    for c in code.codewords() {
        let v = c.amplitudes();
        m += v * v.adjoint();
    }
    DenseOperator::new(m)
}

/// Four points, six lines and three parallel classes of the affine plane over GF(2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DesignPlane {
    pub points: Vec<usize>,
    pub lines: Vec<(usize, usize)>,
    pub parallel_classes: Vec<[(usize, usize); 2]>,
}

impl DesignPlane {
    pub fn lines_through(&self, p: usize) -> usize {
        self.lines.iter().filter(|(a, b)| *a == p || *b == p).count()
    }

    /// Checks the four incidence axioms and that every class partitions the points.
    pub fn check_axioms(&self) -> std::result::Result<(), String> {
        let on = |l: &(usize, usize), p: usize| l.0 == p || l.1 == p;
        // (1) two points define a unique line
        for (i, &p) in self.points.iter().enumerate() {
            for &q in &self.points[i + 1..] {
                let n = self.lines.iter().filter(|l| on(l, p) && on(l, q)).count();
                if n != 1 {
                    return Err(format!("points {p},{q} lie on {n} common lines"));
                }
            }
        }
        // (2) at least two points per line
        if self.lines.iter().any(|l| l.0 == l.1) {
            return Err("degenerate line".into());
        }
        // (3) three non-collinear points
        let non_collinear = self.points.iter().enumerate().any(|(i, &a)| {
            self.points[i + 1..].iter().enumerate().any(|(j, &b)| {
                self.points[i + j + 2..]
                    .iter()
                    .any(|&c| !self.lines.iter().any(|l| [a, b, c].iter().filter(|&&p| on(l, p)).count() >= 3))
            })
        });
        if !non_collinear {
            return Err("all points collinear".into());
        }
        // (4) unique parallel through each outside point
        for g in &self.lines {
            for &p in self.points.iter().filter(|&&p| !on(g, p)) {
                let n = self
                    .lines
                    .iter()
                    .filter(|h| on(h, p) && !on(h, g.0) && !on(h, g.1))
                    .count();
                if n != 1 {
                    return Err(format!("{n} parallels to {g:?} through {p}"));
                }
            }
        }
        for class in &self.parallel_classes {
            let mut covered: Vec<usize> = class.iter().flat_map(|l| [l.0, l.1]).collect();
            covered.sort_unstable();
            if covered != self.points {
                return Err(format!("class {class:?} does not partition the points"));
            }
        }
        Ok(())
    }
}

pub fn affine_plane_4() -> DesignPlane {
    let points = vec![1, 2, 3, 4];
    let mut lines = Vec::new();
    for a in 1..=4 {
        for b in a + 1..=4 {
            lines.push((a, b));
        }
    }
    let mut parallel_classes = Vec::new();
    for &g in &lines {
        if g.0 != 1 {
            continue;
        }
        let rest: Vec<usize> = points.iter().copied().filter(|&p| p != g.0 && p != g.1).collect();
        parallel_classes.push([g, (rest[0], rest[1])]);
    }
    DesignPlane {
        points,
        lines,
        parallel_classes,
    }
}

/// Each parallel class `{g, h}` becomes the codeword pairing the string exciting
/// the points of `g` with the one exciting the points of `h`.
pub fn parallelism_to_code(plane: &DesignPlane, phase: f64) -> Result<JumpCode> {
    let excite = |l: &(usize, usize)| (1usize << (l.0 - 1)) | (1usize << (l.1 - 1));
    let top = 1usize << (plane.points.len() - 1);
    let mut pairs: Vec<(usize, usize)> = plane
        .parallel_classes
        .iter()
        .map(|[g, h]| {
            let (a, b) = (excite(g), excite(h));
            if a & top == 0 {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    pairs.sort_unstable();
    JumpCode::from_pairs(plane.points.len(), phase, pairs)
}

/// `|ij⟩_L = |c_i⟩_A ⊗ |c_j⟩_B` with register A on the high qubits; index `3i + j`.
pub fn product_code_basis(high: &JumpCode, low: &JumpCode) -> Result<Vec<Ket>> {
    if high.phase != low.phase {
        return Err(Error::InvalidArgument(format!(
            "register phases differ: {} vs {}",
            high.phase, low.phase
        )));
    }
    let hi = high.codewords();
    let lo = low.codewords();
    Ok(hi.iter().flat_map(|a| lo.iter().map(move |b| tensor(a, b))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn dfs_examples() {
        let b = dfs_basis(4, 2).unwrap();
        assert_eq!(b.labels(), vec!["0011", "0101", "0110", "1001", "1010", "1100"]);
        assert_eq!(dfs_basis(5, 0).unwrap().labels(), vec!["00000"]);
        assert_eq!(dfs_basis(8, 4).unwrap().dimension(), 70);
        assert!(dfs_basis(3, 4).is_err());
        for n in 1..=12 {
            for k in 0..=n {
                let b = dfs_basis(n, k).unwrap();
                assert_eq!(b.dimension() as u128, binomial(n as u64, k as u64).unwrap());
                assert!(b.labels().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn jump_code_examples() {
        let c = jump_code(4, 0.0).unwrap();
        assert_eq!(
            c.pair_labels(),
            vec![
                ("0011".to_string(), "1100".to_string()),
                ("0101".to_string(), "1010".to_string()),
                ("0110".to_string(), "1001".to_string())
            ]
        );
        assert_eq!(jump_code(8, 0.0).unwrap().len(), 35);
        let two = jump_code(2, 0.4).unwrap();
        assert_eq!(two.pair_labels(), vec![("01".to_string(), "10".to_string())]);
        let w = two.codeword(0).unwrap();
        assert!((w.amplitude("10").unwrap() - C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, 0.4)).norm() < 1e-15);
        assert!(matches!(jump_code(5, 0.0), Err(Error::OddQubitCount(5))));
    }

    #[test]
    fn codeword_examples() {
        let c = jump_code(4, 0.0).unwrap();
        let c0 = c.codeword(0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(c0.support(1e-12), vec![("0011".into(), C64::from(s)), ("1100".into(), C64::from(s))]);
        for (i, a) in c.codewords().iter().enumerate() {
            for (j, b) in c.codewords().iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b) - C64::from(expect)).norm() < 1e-15);
            }
        }
        let flipped = jump_code(4, std::f64::consts::PI).unwrap();
        let f0 = flipped.codeword(0).unwrap();
        assert!((f0.amplitude("1100").unwrap() + C64::from(s)).norm() < 1e-15);
        assert!(matches!(c.codeword(3), Err(Error::IndexOutOfRange { index: 3, len: 3 })));
    }

    #[test]
    fn count_identity_and_asymptotics() {
        for n in (2..=24).step_by(2) {
            let n64 = n as u64;
            let pairs = binomial(n64, n64 / 2).unwrap() / 2;
            assert_eq!(pairs, codeword_count(n).unwrap());
            let lq = logical_qubits(n).unwrap();
            if n >= 4 {
                assert!((lq - (n as f64 - (n as f64).sqrt().log2())).abs() <= 2.0);
            }
        }
        assert!((logical_qubits(4).unwrap() - 3f64.log2()).abs() < 1e-15);
        assert!((logical_qubits(8).unwrap() - 35f64.log2()).abs() < 1e-15);
        assert_eq!(logical_qubits(2).unwrap(), 0.0);
        // The log-sum fallback agrees where the exact count still fits.
        let n = 100u64;
        let exact = (binomial(n - 1, n / 2 - 1).unwrap() as f64).log2();
        let approx: f64 = (0..n / 2 - 1).map(|i| ((n - 1 - i) as f64).log2() - ((i + 1) as f64).log2()).sum();
        assert!((exact - approx).abs() < 1e-9);
        assert!(logical_qubits(400).unwrap() > 390.0);
    }

    #[test]
    fn projector_properties() {
        let code = jump_code(4, 0.3).unwrap();
        let p = projector(&code);
        assert!((p.matrix().trace().re - 3.0).abs() < 1e-12);
        assert!(max_abs(&(p.matrix() * p.matrix() - p.matrix())) < 1e-12);
        assert!(p.hermiticity_residual() < 1e-12);
        let number = CMatrix::from_diagonal(&CVector::from_fn(16, |i, _| C64::from(i.count_ones() as f64)));
        assert!(max_abs(&(p.matrix() * &number - &number * p.matrix())) < 1e-12);

        let dfs = dfs_projector(&dfs_basis(4, 2).unwrap());
        for c in code.codewords() {
            assert!(dfs.apply(&c).unwrap().distance(&c) < 1e-15);
        }
    }

    #[test]
    fn equal_rate_decay_is_scalar_on_every_dfs() {
        let kappa = 0.7;
        for n in 1..=6 {
            let number = CMatrix::from_diagonal(&CVector::from_fn(1 << n, |i, _| C64::from(kappa * i.count_ones() as f64)));
            for k in 0..=n {
                let p = dfs_projector(&dfs_basis(n, k).unwrap());
                let restricted = p.matrix() * &number * p.matrix();
                assert!(max_abs(&(restricted - p.matrix() * C64::from(kappa * k as f64))) < 1e-12);
            }
        }
    }

    #[test]
    fn affine_plane() {
        let plane = affine_plane_4();
        assert_eq!(plane.lines.len(), 6);
        assert_eq!(plane.parallel_classes.len(), 3);
        assert!(plane.points.iter().all(|&p| plane.lines_through(p) == 3));
        plane.check_axioms().unwrap();
        let code = parallelism_to_code(&plane, 0.0).unwrap();
        assert!(code.same_codewords(&jump_code(4, 0.0).unwrap()));

        let mut broken = plane.clone();
        broken.lines.pop();
        assert!(broken.check_axioms().is_err());
    }

    #[test]
    fn product_basis_matches_listed_strings() {
        let code = jump_code(4, 0.0).unwrap();
        let basis = product_code_basis(&code, &code).unwrap();
        assert_eq!(basis.len(), 9);
        let labels: Vec<String> = basis[0].support(1e-12).into_iter().map(|(l, _)| l).collect();
        let mut expect = vec!["00110011", "11001100", "00111100", "11000011"];
        expect.sort();
        assert_eq!(labels, expect);
        assert!(basis[0].support(1e-12).iter().all(|(_, a)| (a - C64::from(0.5)).norm() < 1e-15));
        let l01: Vec<String> = basis[1].support(1e-12).into_iter().map(|(l, _)| l).collect();
        assert!(l01.contains(&"00110101".to_string()));

        let p35 = projector(&jump_code(8, 0.0).unwrap());
        for (i, a) in basis.iter().enumerate() {
            assert!(p35.apply(a).unwrap().distance(a) < 1e-12);
            for (j, b) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b) - C64::from(expect)).norm() < 1e-14);
            }
        }
        assert!(product_code_basis(&code, &jump_code(4, 1.0).unwrap()).is_err());
    }

    #[test]
    fn code_json_wire_format() {
        let code = jump_code(4, 0.0).unwrap();
        assert_eq!(
            code.to_json().unwrap(),
            r#"{"N":4,"k":2,"phase":0.0,"pairs":[["0011","1100"],["0101","1010"],["0110","1001"]]}"#
        );
        assert_eq!(JumpCode::from_json(&code.to_json().unwrap()).unwrap(), code);
        assert!(JumpCode::from_json(r#"{"N":4,"k":2,"phase":0.0,"pairs":[["0011","1101"]]}"#).is_err());
        assert!(JumpCode::from_json(r#"{"N":3,"k":1,"phase":0.0,"pairs":[]}"#).is_err());
        assert!(JumpCode::from_json("{").is_err());
    }
}
