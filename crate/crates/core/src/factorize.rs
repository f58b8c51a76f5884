//! Signed symmetric factorization of the shifted-PMI matrix and reconstruction noise.

use nalgebra::{DMatrix, RealField, SymmetricEigen};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::CooccurrenceTable;
use crate::embedding::{EmbeddingSpace, Provenance};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stats::SparseMatrix;

/// Eigenvalues with `|λ| < EIGEN_CUTOFF · max|λ|` are treated as zero.
pub const EIGEN_CUTOFF: f64 = 1e-10;

/// Largest vocabulary accepted by the dense eigensolver.
pub const DEFAULT_DENSE_CAP: usize = 5_000;

/// Dense symmetric matrix with a mask of entries that were imputed rather than observed.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedMatrix<T: Real> {
    pub values: DMatrix<T>,
    /// `observed[x * n + y]` is false where the value was imputed as zero.
    pub observed: Vec<bool>,
    pub shift_k: u32,
    pub vocab_ref: String,
}

impl<T: Real> CompletedMatrix<T> {
    /// Wraps a fully observed matrix.
    pub fn full(values: DMatrix<T>) -> Self {
        let n = values.nrows();
        CompletedMatrix {
            values,
            observed: vec![true; n * n],
            shift_k: 1,
            vocab_ref: String::new(),
        }
    }

    /// Densifies a sparse shifted-PMI matrix, imputing 0 for missing entries.
    pub fn from_sparse(m: &SparseMatrix, shift_k: u32, vocab_ref: impl Into<String>) -> Self {
        let n = m.n();
        let mut values = DMatrix::zeros(n, n);
        let mut observed = vec![false; n * n];
        for (x, y, v) in m.iter() {
            values[(x as usize, y as usize)] = T::from_f64_lossy(v);
            observed[x as usize * n + y as usize] = true;
        }
        CompletedMatrix {
            values,
            observed,
            shift_k,
            vocab_ref: vocab_ref.into(),
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_observed(&self, x: usize, y: usize) -> bool {
        self.observed[x * self.n() + y]
    }

    /// Max `|M − W·Cᵀ|` over observed entries.
    pub fn max_reconstruction_error(&self, space: &EmbeddingSpace<T>) -> T {
        let n = self.n();
        let mut worst = T::zero();
        for x in 0..n {
            for y in 0..n {
                if self.is_observed(x, y) {
                    let e = num_traits::Float::abs(
                        self.values[(x, y)] - space.mixed(x as u32, y as u32),
                    );
                    worst = num_traits::Float::max(worst, e);
                }
            }
        }
        worst
    }

    /// Frobenius norm of `M − W·Cᵀ` over observed entries.
    pub fn frobenius_error(&self, space: &EmbeddingSpace<T>) -> T {
        let n = self.n();
        let mut acc = T::zero();
        for x in 0..n {
            for y in 0..n {
                if self.is_observed(x, y) {
                    let e = self.values[(x, y)] - space.mixed(x as u32, y as u32);
                    acc += e * e;
                }
            }
        }
        num_traits::Float::sqrt(acc)
    }

    fn hash(&self) -> String {
        let mut h = Sha256::new();
        for v in self.values.iter() {
            h.update(v.as_f64().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Full-rank signed split `W = Q|Λ|^½`, `C = Q|Λ|^½·sign(Λ)`, so `W·Cᵀ = M`.
pub fn exact_factorize<T: Real + RealField>(m: &CompletedMatrix<T>) -> Result<EmbeddingSpace<T>> {
    exact_factorize_capped(m, DEFAULT_DENSE_CAP)
}

pub fn exact_factorize_capped<T: Real + RealField>(
    m: &CompletedMatrix<T>,
    cap: usize,
) -> Result<EmbeddingSpace<T>> {
    check_dense_order(m.n(), cap)?;
    signed_split(m, m.n(), Provenance::Exact)
}

/// Rejects matrices too large for a dense eigendecomposition.
pub fn check_dense_order(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::InvalidArgument(format!(
            "matrix of order {n} exceeds the dense factorization cap {cap}"
        )));
    }
    Ok(())
}

/// Rank-`d` signed split keeping the eigenvalues of largest magnitude.
pub fn truncated_factorize<T: Real + RealField>(m: &CompletedMatrix<T>, d: usize) -> Result<EmbeddingSpace<T>> {
    if d < 1 || d > m.n() {
        return Err(Error::InvalidArgument(format!(
            "rank {d} outside 1..={}",
            m.n()
        )));
    }
    check_dense_order(m.n(), DEFAULT_DENSE_CAP)?;
    signed_split(m, d, Provenance::Truncated)
}

fn signed_split<T: Real + RealField>(
    m: &CompletedMatrix<T>,
    d: usize,
    provenance: Provenance,
) -> Result<EmbeddingSpace<T>> {
    let n = m.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let mut asym = T::zero();
    for x in 0..n {
        for y in 0..x {
            asym = num_traits::Float::max(asym, num_traits::Float::abs(m.values[(x, y)] - m.values[(y, x)]));
        }
    }
    let scale = m.values.iter().fold(T::zero(), |a, v| num_traits::Float::max(a, num_traits::Float::abs(*v)));
    if asym > T::from_f64_lossy(1e-12) * num_traits::Float::max(scale, T::one()) {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric (max asymmetry {asym})"
        )));
    }

    let eig = SymmetricEigen::try_new(m.values.clone(), T::default_epsilon(), 0)
        .ok_or_else(|| Error::Eigen { hash: m.hash() })?;
    if eig.eigenvalues.iter().any(|v| !num_traits::Float::is_finite(*v)) {
        return Err(Error::Eigen { hash: m.hash() });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (num_traits::Float::abs(eig.eigenvalues[a]), num_traits::Float::abs(eig.eigenvalues[b]));
        lb.partial_cmp(&la).unwrap().then(a.cmp(&b))
    });
    let max_abs = num_traits::Float::abs(eig.eigenvalues[order[0]]);
    let cutoff = T::from_f64_lossy(EIGEN_CUTOFF) * max_abs;

    let mut words = vec![T::zero(); n * d];
    let mut contexts = vec![T::zero(); n * d];
    for (col, &k) in order.iter().take(d).enumerate() {
        let lambda = eig.eigenvalues[k];
        if num_traits::Float::abs(lambda) < cutoff || lambda == T::zero() {
            continue;
        }
        let root = num_traits::Float::sqrt(num_traits::Float::abs(lambda));
        let sign = if lambda < T::zero() { -T::one() } else { T::one() };
        for row in 0..n {
            let w = eig.eigenvectors[(row, k)] * root;
            words[row * d + col] = w;
            contexts[row * d + col] = w * sign;
        }
    }
    EmbeddingSpace::new(words, contexts, d, m.shift_k, provenance, m.vocab_ref.clone())
}

/// One frequency bin of reconstruction residuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseBin {
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub low_sample: bool,
}

/// Residuals `ε(x, y) = M[x][y] − ⟨W[x], C[y]⟩` grouped by pair frequency `X[x][y]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseReport {
    pub bins: Vec<NoiseBin>,
    /// Raw `(frequency, residual)` samples.
    #[serde(skip)]
    pub samples: Vec<(u64, f64)>,
    pub max_abs_residual: f64,
}

/// Bins with fewer pairs than this are flagged as low-sample.
pub const MIN_BIN_PAIRS: usize = 30;

pub fn noise_by_frequency<T: Real>(
    space: &EmbeddingSpace<T>,
    m: &SparseMatrix,
    table: &CooccurrenceTable,
    bins: usize,
) -> Result<NoiseReport> {
    space.check_vocab(table.vocab_ref())?;
    if bins < 1 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    if m.n() != space.n_words() || table.n_words() != space.n_words() {
        return Err(Error::InvalidArgument("matrix, table and space sizes differ".into()));
    }
    let samples: Vec<(u64, f64)> = m
        .iter()
        .map(|(x, y, v)| (table.get(x, y), v - space.mixed(x, y).as_f64()))
        .collect();
    let max_abs_residual = samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);

    let (lo, hi) = samples.iter().fold((u64::MAX, 0u64), |(lo, hi), s| {
        (lo.min(s.0), hi.max(s.0))
    });
    let mut out = Vec::with_capacity(bins);
    if samples.is_empty() {
        return Ok(NoiseReport {
            bins: out,
            samples,
            max_abs_residual,
        });
    }
    let (llo, lhi) = ((lo as f64).ln(), (hi as f64).ln());
    let edges: Vec<f64> = (0..=bins)
        .map(|i| {
            if i == bins {
                hi as f64
            } else {
                (llo + (lhi - llo) * i as f64 / bins as f64).exp()
            }
        })
        .collect();
    let mut grouped: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for &(f, r) in &samples {
        let lf = (f as f64).ln();
        let idx = if lhi > llo {
            (((lf - llo) / (lhi - llo)) * bins as f64).floor() as usize
        } else {
            0
        };
        grouped[idx.min(bins - 1)].push(r);
    }
    for (i, g) in grouped.into_iter().enumerate() {
        let n = g.len();
        let mean = crate::stats::mean(&g).unwrap_or(f64::NAN);
        let variance = crate::stats::variance(&g).unwrap_or(f64::NAN);
        out.push(NoiseBin {
            lower: edges[i],
            upper: edges[i + 1],
            n,
            mean,
            variance,
            low_sample: n < MIN_BIN_PAIRS,
        });
    }
    Ok(NoiseReport {
        bins: out,
        samples,
        max_abs_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn max_err(m: &CompletedMatrix<f64>, s: &EmbeddingSpace<f64>) -> f64 {
        m.max_reconstruction_error(s)
    }

    #[test]
    fn identity_factorizes_to_identity() {
        let m = CompletedMatrix::full(DMatrix::<f64>::identity(2, 2));
        let s = exact_factorize(&m).unwrap();
        assert!(max_err(&m, &s) < 1e-12);
        assert_eq!(s.word_matrix(), s.context_matrix());
        for i in 0..2u32 {
            assert_abs_diff_eq!(s.word_sq_norm(i), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.word_dot(0, 1), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn indefinite_two_by_two() {
        // eigenvalues ±1
        let m = CompletedMatrix::full(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let s = exact_factorize(&m).unwrap();
        assert!(max_err(&m, &s) < 1e-12);
        assert_ne!(s.word_matrix(), s.context_matrix());
        let mut signs = Vec::new();
        for col in 0..2 {
            let (w, c) = (s.word(0)[col], s.context(0)[col]);
            signs.push((c / w).round());
            for row in 0..2u32 {
                assert_abs_diff_eq!(s.context(row)[col], s.word(row)[col] * (c / w).round(), epsilon = 1e-12);
            }
        }
        signs.sort_by(f64::total_cmp);
        assert_eq!(signs, vec![-1.0, 1.0]);
    }

    #[test]
    fn truncation_keeps_top_eigenpair() {
        let m = CompletedMatrix::full(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            5.0f64, 1.0,
        ])));
        let s = truncated_factorize(&m, 1).unwrap();
        assert_eq!(s.provenance, Provenance::Truncated);
        assert_abs_diff_eq!(s.mixed(0, 0), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mixed(1, 1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mixed(0, 1), 0.0, epsilon = 1e-12);
        assert!(truncated_factorize(&m, 0).is_err());
        assert!(truncated_factorize(&m, 3).is_err());
    }

    #[test]
    fn truncation_ranks_by_magnitude() {
        let m = CompletedMatrix::full(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0f64, -7.0, 2.0,
        ])));
        let s = truncated_factorize(&m, 1).unwrap();
        assert_abs_diff_eq!(s.mixed(1, 1), -7.0, epsilon = 1e-12);
    }

    #[test]
    fn full_rank_truncation_is_exact() {
        let m = CompletedMatrix::full(DMatrix::from_row_slice(
            3,
            3,
            &[2.0f64, -1.0, 0.5, -1.0, 0.0, 3.0, 0.5, 3.0, -2.0],
        ));
        let s = truncated_factorize(&m, 3).unwrap();
        assert!(max_err(&m, &s) < 1e-8);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = CompletedMatrix::full(DMatrix::from_row_slice(2, 2, &[0.0f64, 1.0, 2.0, 0.0]));
        assert!(exact_factorize(&m).is_err());
    }

    #[test]
    fn cap_enforced() {
        let m = CompletedMatrix::full(DMatrix::<f64>::identity(3, 3));
        assert!(exact_factorize_capped(&m, 2).is_err());
    }

    #[test]
    fn f32_factorization() {
        let m = CompletedMatrix::full(DMatrix::from_row_slice(2, 2, &[2.0f32, 1.0, 1.0, -1.0]));
        let s = exact_factorize(&m).unwrap();
        assert!(m.max_reconstruction_error(&s) < 1e-5);
    }
}
