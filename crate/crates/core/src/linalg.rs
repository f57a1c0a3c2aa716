//! Small dense linear-algebra toolbox on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Maximum absolute column sum.
pub fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    max_abs(&(a - a.adjoint()))
}

pub fn unitarity_residual(a: &CMatrix) -> f64 {
    let n = a.nrows();
    spectral_norm(&(a.adjoint() * a - CMatrix::identity(n, n)))
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// The argument is scaled by 2^-s until its 1-norm is at most 1/2; the series is
/// then summed until the next term is below machine precision relative to the sum.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.unscale(2f64.powi(squarings));
    let mut sum = CMatrix::identity(n, n);
    let mut term = CMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled / C64::from(k as f64);
        sum += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&sum).max(1.0) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(-i h t)` for a dense generator.
pub fn propagator(h: &CMatrix, t: f64) -> CMatrix {
    expm(&(h * C64::new(0.0, -t)))
}

/// Hermitian `H` with `exp(-i H) = u`, eigenphases taken on the principal branch (-pi, pi].
///
/// Uses the complex Schur form; for a normal matrix the triangular factor is diagonal.
pub fn unitary_generator(u: &CMatrix) -> CMatrix {
    let (q, t) = u.clone().schur().unpack();
    let n = u.nrows();
    let mut d = CMatrix::zeros(n, n);
    for k in 0..n {
        let mut phase = t[(k, k)].arg();
        if phase <= -std::f64::consts::PI {
            phase += 2.0 * std::f64::consts::PI;
        }
        // exp(-i h) = e^{i phase}  =>  h = -phase
        d[(k, k)] = C64::from(-phase);
    }
    let h = &q * d * q.adjoint();
    (&h + h.adjoint()).unscale(2.0)
}

/// `min_γ ‖a − e^{iγ} b‖` in operator norm, with γ fixed by aligning the trace overlap.
pub fn phase_aligned_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    spectral_norm(&(a - b * phase))
}

/// Complete the orthonormal columns `seed` to an orthonormal basis of C^dim, drawing
/// candidates from the standard basis in index order (modified Gram-Schmidt, two passes).
pub fn complete_orthonormal(seed: &[CVector], dim: usize) -> Vec<CVector> {
    let mut basis: Vec<CVector> = seed.to_vec();
    for idx in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = CVector::zeros(dim);
        v[idx] = ONE;
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v.unscale(norm));
        }
    }
    basis
}

/// Serialize complex numbers as `[re, im]` pairs.
pub(crate) mod complex_pairs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

/// Serialize a complex matrix as nested rows of `[re, im]` pairs.
pub(crate) mod complex_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        matrix_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err("ragged matrix rows".into());
    }
    Ok(CMatrix::from_fn(n, m, |i, j| {
        let [re, im] = rows[i][j];
        C64::new(re, im)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn expm_matches_nalgebra() {
        for seed in 0..5 {
            let a = random_matrix(6, seed) * C64::from(3.0);
            let ours = expm(&a);
            let theirs = a.clone().exp();
            assert!(spectral_norm(&(&ours - &theirs)) <= 1e-11 * spectral_norm(&theirs));
        }
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = CMatrix::zeros(4, 4);
        assert_eq!(expm(&z), CMatrix::identity(4, 4));
    }

    #[test]
    fn generator_round_trip() {
        let a = random_matrix(3, 11);
        let h = (&a + a.adjoint()).unscale(2.0);
        let u = propagator(&h, 1.3);
        let g = unitary_generator(&u);
        assert!(hermiticity_residual(&g) < 1e-12);
        assert!(spectral_norm(&(propagator(&g, 1.0) - &u)) < 1e-10);
    }

    #[test]
    fn completion_is_orthonormal() {
        let mut v = CVector::zeros(4);
        v[0] = c(0.6, 0.0);
        v[3] = c(0.0, 0.8);
        let basis = complete_orthonormal(&[v], 4);
        assert_eq!(basis.len(), 4);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a.dotc(b) - C64::from(expect)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_alignment_removes_global_phase() {
        let a = random_matrix(3, 4);
        let b = &a * C64::from_polar(1.0, 0.77);
        assert!(phase_aligned_distance(&a, &b) < 1e-12);
    }
}
