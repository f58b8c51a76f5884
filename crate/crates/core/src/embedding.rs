//! Word and context matrices produced by factorization, training or planting.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, sq_norm, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Truncated,
    Sgns,
    Planted,
}

impl Provenance {
    /// Spaces whose mixed products reproduce the factorized matrix without error.
    pub fn is_zero_error(self) -> bool {
        matches!(self, Provenance::Exact | Provenance::Planted)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Exact => "exact",
            Provenance::Truncated => "truncated",
            Provenance::Sgns => "sgns",
            Provenance::Planted => "planted",
        };
        f.write_str(s)
    }
}

/// Word matrix `W` and context matrix `C`, both `n × dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace<T: Real> {
    words: Vec<T>,
    contexts: Vec<T>,
    n: usize,
    dim: usize,
    /// Negative-sample shift `k` of the factorized matrix `PMI − log k`.
    pub shift_k: u32,
    pub provenance: Provenance,
    pub vocab_ref: String,
}

impl<T: Real> EmbeddingSpace<T> {
    pub fn new(
        words: Vec<T>,
        contexts: Vec<T>,
        dim: usize,
        shift_k: u32,
        provenance: Provenance,
        vocab_ref: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || !words.len().is_multiple_of(dim) || words.len() != contexts.len() {
            return Err(Error::InvalidArgument(format!(
                "word/context matrices of length {} and {} do not share an n × {dim} shape",
                words.len(),
                contexts.len()
            )));
        }
        Ok(EmbeddingSpace {
            n: words.len() / dim,
            words,
            contexts,
            dim,
            shift_k,
            provenance,
            vocab_ref: vocab_ref.into(),
        })
    }

    pub fn n_words(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn word(&self, i: u32) -> &[T] {
        let i = i as usize;
        &self.words[i * self.dim..(i + 1) * self.dim]
    }

    pub fn context(&self, i: u32) -> &[T] {
        let i = i as usize;
        &self.contexts[i * self.dim..(i + 1) * self.dim]
    }

    pub fn word_matrix(&self) -> &[T] {
        &self.words
    }

    pub fn context_matrix(&self) -> &[T] {
        &self.contexts
    }

    /// `⟨W[x], C[y]⟩`, the reconstructed matrix entry.
    pub fn mixed(&self, x: u32, y: u32) -> T {
        dot(self.word(x), self.context(y))
    }

    /// `⟨W[x], W[y]⟩`.
    pub fn word_dot(&self, x: u32, y: u32) -> T {
        dot(self.word(x), self.word(y))
    }

    pub fn word_sq_norm(&self, x: u32) -> T {
        sq_norm(self.word(x))
    }

    /// Copy with every word vector scaled to unit length (zero vectors untouched).
    /// Context vectors are left as they are.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.words.chunks_mut(self.dim) {
            let norm = sq_norm(row).sqrt();
            if norm > T::zero() {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        out
    }

    /// Converts between scalar types.
    pub fn cast<U: Real>(&self) -> EmbeddingSpace<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64_lossy(x.as_f64())).collect();
        EmbeddingSpace {
            words: conv(&self.words),
            contexts: conv(&self.contexts),
            n: self.n,
            dim: self.dim,
            shift_k: self.shift_k,
            provenance: self.provenance,
            vocab_ref: self.vocab_ref.clone(),
        }
    }

    pub fn check_vocab(&self, vocab_ref: &str) -> Result<()> {
        if self.vocab_ref != vocab_ref {
            return Err(Error::VocabMismatch {
                expected: self.vocab_ref.clone(),
                found: vocab_ref.to_string(),
            });
        }
        Ok(())
    }
}
