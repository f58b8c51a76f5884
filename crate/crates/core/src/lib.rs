//! Word co-occurrence statistics, embeddings and the csPMI identities.
//!
//! The crate covers the path from raw text to verified claims: counting
//! ([`corpus`]), probabilities and PMI ([`stats`]), exact and truncated
//! factorization ([`factorize`]), skip-gram training ([`sgns`]), analogy
//! solving ([`analogy`]), ground-truth generators ([`synthetic`]) and the
//! checks themselves ([`theorem`]).
//!
//! Vector math is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common choices.

pub mod analogy;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod factorize;
pub mod io;
pub mod scalar;
pub mod sgns;
pub mod stats;
pub mod synthetic;
pub mod theorem;

pub use analogy::{AnalogySet, Category, Metric, SolveResult};
pub use corpus::{CooccurrenceTable, Corpus, Vocabulary};
pub use embedding::{EmbeddingSpace, Provenance};
pub use error::{Error, Result};
pub use factorize::{CompletedMatrix, NoiseReport};
pub use scalar::Real;
pub use sgns::SgnsConfig;
pub use stats::{CorpusStats, PairStatistics, SparseMatrix, Unobserved};
pub use synthetic::PlantedSpace;
pub use theorem::{CheckReport, Thresholds};

/// Double-precision embedding space, used for exact factorizations and planted spaces.
pub type Space = EmbeddingSpace<f64>;
/// Single-precision embedding space, the usual choice for trained models.
pub type SpaceF32 = EmbeddingSpace<f32>;
pub type Matrix = CompletedMatrix<f64>;
pub type MatrixF32 = CompletedMatrix<f32>;
