//! Corpora and spaces with known ground truth.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analogy::{AnalogySet, Category};
use crate::corpus::Vocabulary;
use crate::embedding::{EmbeddingSpace, Provenance};
use crate::error::{Error, Result};
use crate::factorize::CompletedMatrix;
use crate::scalar::dot;
use crate::stats::{Observed, PairStatistics};

/// Surface form of the Zipf word with 0-based rank `id`.
pub fn zipf_word(id: u32) -> String {
    format!("w{id}")
}

/// I.i.d. tokens with `p(rank) ∝ rank^−exponent`; id 0 is rank 1.
pub fn generate_zipf_corpus(
    vocab_size: usize,
    n_tokens: usize,
    exponent: f64,
    seed: u64,
) -> Result<Vec<u32>> {
    if vocab_size < 2 {
        return Err(Error::InvalidArgument("vocab_size must be at least 2".into()));
    }
    if n_tokens < vocab_size {
        return Err(Error::InvalidArgument("n_tokens must be at least vocab_size".into()));
    }
    if !(exponent >= 0.0 && exponent.is_finite()) {
        return Err(Error::InvalidArgument("zipf exponent must be finite and non-negative".into()));
    }
    let alias = zipf_alias(vocab_size, exponent)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_tokens).map(|_| alias.sample(&mut rng) as u32).collect())
}

fn zipf_alias(n: usize, exponent: f64) -> Result<WeightedAliasIndex<f64>> {
    let weights = (1..=n).map(|r| (r as f64).powf(-exponent)).collect();
    WeightedAliasIndex::new(weights).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Knobs for the templated analogy corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalogyCorpusConfig {
    pub n_relations: usize,
    pub n_pairs_per_relation: usize,
    /// Mean segments per word, one entry per relation (a single entry applies to all).
    pub repetitions: Vec<usize>,
    /// Private context words shared by the two members of a pair.
    pub pair_contexts: usize,
    /// Role words marking the first or second member of a relation.
    pub role_contexts: usize,
    /// Probability that a repetition also emits the adjacent pair `x y`.
    pub link_rate: f64,
    pub filler_vocab: usize,
    pub filler_exponent: f64,
    /// Filler tokens between segments; keep above the counting window.
    pub gap: usize,
    pub seed: u64,
}

impl Default for AnalogyCorpusConfig {
    fn default() -> Self {
        AnalogyCorpusConfig {
            n_relations: 3,
            n_pairs_per_relation: 8,
            repetitions: vec![50],
            pair_contexts: 4,
            role_contexts: 4,
            link_rate: 0.5,
            filler_vocab: 300,
            filler_exponent: 1.0,
            gap: 6,
            seed: 1,
        }
    }
}

/// Relation word names: `r{rel}p{pair}x` / `r{rel}p{pair}y`.
fn member(rel: usize, pair: usize, side: char) -> String {
    format!("r{rel}p{pair}{side}")
}

/// Emits sentences in which the two members of every pair share private
/// context words while each side carries its relation's role words, so every
/// pair of a relation differs by the same context offset.
pub fn generate_analogy_corpus(cfg: &AnalogyCorpusConfig) -> Result<(Vec<String>, AnalogySet)> {
    if cfg.n_relations < 1 || cfg.pair_contexts < 1 || cfg.role_contexts < 1 || cfg.filler_vocab < 1 {
        return Err(Error::InvalidArgument("all counts must be at least 1".into()));
    }
    if cfg.n_pairs_per_relation < 2 {
        return Err(Error::InvalidArgument(
            "a category needs at least 2 pairs per relation".into(),
        ));
    }
    let reps: Vec<usize> = match cfg.repetitions.len() {
        1 => vec![cfg.repetitions[0]; cfg.n_relations],
        n if n == cfg.n_relations => cfg.repetitions.clone(),
        n => {
            return Err(Error::InvalidArgument(format!(
                "{n} repetition values for {} relations",
                cfg.n_relations
            )))
        }
    };
    if reps.contains(&0) {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.link_rate) {
        return Err(Error::InvalidArgument("link_rate must lie in [0, 1]".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut segments: Vec<Vec<String>> = Vec::new();
    let mut categories = Vec::with_capacity(cfg.n_relations);
    for (rel, &rep) in reps.iter().enumerate() {
        let role = |side: char, j: usize| format!("r{rel}{side}role{j}");
        let mut pairs = Vec::with_capacity(cfg.n_pairs_per_relation);
        for p in 0..cfg.n_pairs_per_relation {
            let (x, y) = (member(rel, p, 'x'), member(rel, p, 'y'));
            let ctx = |j: usize| format!("r{rel}p{p}c{j}");
            for _ in 0..rep {
                for (word, side) in [(&x, 'x'), (&y, 'y')] {
                    segments.push(vec![
                        ctx(rng.random_range(0..cfg.pair_contexts)),
                        word.clone(),
                        role(side, rng.random_range(0..cfg.role_contexts)),
                        ctx(rng.random_range(0..cfg.pair_contexts)),
                    ]);
                }
                if rng.random_bool(cfg.link_rate) {
                    segments.push(vec![x.clone(), y.clone()]);
                }
            }
            pairs.push((x, y));
        }
        categories.push(Category {
            name: format!("relation-{rel}"),
            pairs,
        });
    }
    segments.shuffle(&mut rng);

    let filler = zipf_alias(cfg.filler_vocab, cfg.filler_exponent)?;
    let mut tokens = Vec::new();
    for seg in segments {
        for _ in 0..cfg.gap {
            tokens.push(format!("f{}", filler.sample(&mut rng)));
        }
        tokens.extend(seg);
    }
    let set = AnalogySet::new(categories, format!("analogy-template seed={}", cfg.seed))?;
    Ok((tokens, set))
}

/// Zero-error space with exact parallelogram quadruples, `C = W` and `M = W·Wᵀ`.
///
/// Probabilities are assigned analytically: `PMI(x, y) = M[x][y] + log k` and
/// `log p(w) = log ρ − log k − ‖w‖²`, with `ρ` normalizing the marginals. This
/// makes `p(w, w) = ρ·p(w)` hold exactly for every word.
#[derive(Debug, Clone)]
pub struct PlantedSpace {
    pub space: EmbeddingSpace<f64>,
    pub vocab: Vocabulary,
    /// `(x1, y1, x2, y2)` with `y1 − x1 = y2 − x2`.
    pub quadruples: Vec<[u32; 4]>,
    pub null_word: Option<u32>,
    pub rho: f64,
    log_p: Vec<f64>,
}

/// Name of the zero-vector word in planted spaces.
pub const NULL_WORD: &str = "<null>";

pub fn plant_parallelogram_space(
    d: usize,
    n_quadruples: usize,
    n_filler_words: usize,
    include_null: bool,
    seed: u64,
) -> Result<PlantedSpace> {
    plant_parallelogram_space_with_shift(d, n_quadruples, n_filler_words, include_null, 5, seed)
}

pub fn plant_parallelogram_space_with_shift(
    d: usize,
    n_quadruples: usize,
    n_filler_words: usize,
    include_null: bool,
    shift_k: u32,
    seed: u64,
) -> Result<PlantedSpace> {
    if d < 3 {
        return Err(Error::InvalidArgument("planted spaces need d >= 3".into()));
    }
    if shift_k < 1 {
        return Err(Error::InvalidArgument("shift k must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let mut gaussian = || -> Vec<f64> {
        (0..d)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };

    let mut named: Vec<(String, Vec<f64>)> = Vec::new();
    for q in 0..n_quadruples {
        let x1 = gaussian();
        let r = gaussian();
        let s = gaussian();
        let y1: Vec<f64> = x1.iter().zip(&r).map(|(a, b)| a + b).collect();
        let x2: Vec<f64> = x1.iter().zip(&s).map(|(a, b)| a + b).collect();
        // y2 = x2 + r, so y1 − x1 = y2 − x2 bit-for-bit up to one rounding each
        let y2: Vec<f64> = x2.iter().zip(&r).map(|(a, b)| a + b).collect();
        for (tag, v) in [("x1", x1), ("y1", y1), ("x2", x2), ("y2", y2)] {
            named.push((format!("q{q}{tag}"), v));
        }
    }
    for f in 0..n_filler_words {
        named.push((format!("filler{f}"), gaussian()));
    }
    if include_null {
        named.push((NULL_WORD.to_string(), vec![0.0; d]));
    }

    let k = f64::from(shift_k);
    let partition: f64 = named.iter().map(|(_, v)| (-dot(v, v)).exp()).sum();
    let rho = k / partition;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "planted marginals need rho in (0, 1); got {rho} (add words or lower k)"
        )));
    }
    let log_p_of = |v: &[f64]| rho.ln() - k.ln() - dot(v, v);
    // counts only order the vocabulary by planted frequency
    let vocab = Vocabulary::from_counts(
        named
            .iter()
            .map(|(w, v)| (w.clone(), (log_p_of(v).exp() * 1e12).round().max(1.0) as u64)),
        1,
    )?;
    let n = vocab.len();
    let mut words = vec![0.0; n * d];
    let mut log_p = vec![0.0; n];
    for (w, v) in &named {
        let id = vocab.id(w).expect("planted word in vocabulary") as usize;
        words[id * d..(id + 1) * d].copy_from_slice(v);
        log_p[id] = log_p_of(v);
    }
    let quadruples = (0..n_quadruples)
        .map(|q| {
            ["x1", "y1", "x2", "y2"].map(|t| vocab.id(&format!("q{q}{t}")).expect("planted word"))
        })
        .collect();
    let null_word = include_null.then(|| vocab.id(NULL_WORD).expect("null word"));
    let space = EmbeddingSpace::new(
        words.clone(),
        words,
        d,
        shift_k,
        Provenance::Planted,
        vocab.checksum(),
    )?;
    Ok(PlantedSpace {
        space,
        vocab,
        quadruples,
        null_word,
        rho,
        log_p,
    })
}

impl PlantedSpace {
    /// `M = W·Wᵀ`, fully observed.
    pub fn matrix(&self) -> CompletedMatrix<f64> {
        let n = self.space.n_words();
        let m = nalgebra::DMatrix::from_fn(n, n, |x, y| self.space.word_dot(x as u32, y as u32));
        let mut c = CompletedMatrix::full(m);
        c.shift_k = self.space.shift_k;
        c.vocab_ref = self.space.vocab_ref.clone();
        c
    }

    /// `log p(v)` for an arbitrary vector under the planted assignment.
    pub fn log_p_of_vector(&self, v: &[f64]) -> f64 {
        self.rho.ln() - f64::from(self.space.shift_k).ln() - dot(v, v)
    }

    /// Each quadruple as its own category of two pairs.
    pub fn analogy_set(&self) -> AnalogySet {
        let cats = self
            .quadruples
            .iter()
            .enumerate()
            .map(|(i, q)| Category {
                name: format!("planted-{i}"),
                pairs: vec![
                    (self.vocab.word(q[0]).into(), self.vocab.word(q[1]).into()),
                    (self.vocab.word(q[2]).into(), self.vocab.word(q[3]).into()),
                ],
            })
            .collect();
        AnalogySet::new(cats, "planted").expect("two pairs per planted category")
    }
}

impl PairStatistics for PlantedSpace {
    fn n_words(&self) -> usize {
        self.space.n_words()
    }

    fn log_marginal(&self, x: u32) -> f64 {
        self.log_p[x as usize]
    }

    fn log_joint(&self, x: u32, y: u32) -> Observed<f64> {
        Ok(self.pmi(x, y)? + self.log_p[x as usize] + self.log_p[y as usize])
    }

    fn pmi(&self, x: u32, y: u32) -> Observed<f64> {
        Ok(self.space.word_dot(x, y) + f64::from(self.space.shift_k).ln())
    }
}
