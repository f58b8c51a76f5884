//! Skip-gram with negative sampling.
//!
//! The per-pair objective is `log σ(w·c) + Σ_i log σ(−w·c′_i)` with negatives
//! `c′_i` drawn from the unigram distribution raised to `ns_exponent`.
//! Both the word and the context matrices are returned.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::corpus::{count_cooccurrences, CooccurrenceTable, Vocabulary};
use crate::embedding::{EmbeddingSpace, Provenance};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, sq_norm, Real};

/// Any word or context vector norm above this aborts training.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgnsConfig {
    pub dim: usize,
    /// Negative samples per positive pair; also the PMI shift `k`.
    pub negatives: u32,
    pub window: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub ns_exponent: f64,
    pub seed: u64,
    /// 1 trains deterministically; more runs lock-free parallel updates.
    pub workers: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 50,
            negatives: 5,
            window: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            ns_exponent: 0.75,
            seed: 1,
            workers: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.dim < 1 {
            return fail("dim must be at least 1");
        }
        if self.negatives < 1 {
            return fail("negatives must be at least 1");
        }
        if self.window < 1 {
            return fail("window must be at least 1");
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.ns_exponent) {
            return fail("ns_exponent must lie in [0, 1]");
        }
        if !(self.lr_start > self.lr_end && self.lr_end > 0.0) {
            return fail("learning rates must satisfy start > end > 0");
        }
        if self.workers < 1 {
            return fail("workers must be at least 1");
        }
        Ok(())
    }
}

/// Mean loss per epoch, for the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Online average of the sampled loss over the epoch's updates.
    pub mean_loss: f64,
    /// Expected loss per positive pair at the end of the epoch, averaging the
    /// negative term over the sampling distribution. Computed for vocabularies
    /// up to [`EXPECTED_LOSS_MAX_VOCAB`] words.
    pub expected_loss: Option<f64>,
    pub learning_rate: f64,
}

/// Largest vocabulary for which [`EpochLog::expected_loss`] is evaluated.
pub const EXPECTED_LOSS_MAX_VOCAB: usize = 5_000;

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Real> {
    pub space: EmbeddingSpace<T>,
    pub log: Vec<EpochLog>,
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log σ(x)`, computed without overflow.
pub fn log_sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Pair objective `log σ(w·c) + Σ log σ(−w·c′)`.
pub fn pair_objective<T: Real>(w: &[T], c: &[T], negatives: &[&[T]]) -> T {
    let mut obj = log_sigmoid(dot(w, c));
    for n in negatives {
        obj += log_sigmoid(-dot(w, n));
    }
    obj
}

/// Analytic gradient of [`pair_objective`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient<T> {
    pub word: Vec<T>,
    pub context: Vec<T>,
    pub negatives: Vec<Vec<T>>,
}

/// Coefficient `label − σ(w·t)` shared by the word and target gradients.
fn target_coefficient<T: Real>(score: T, positive: bool) -> T {
    let label = if positive { T::one() } else { T::zero() };
    label - sigmoid(score)
}

pub fn pair_gradient<T: Real>(w: &[T], c: &[T], negatives: &[&[T]]) -> PairGradient<T> {
    let g = target_coefficient(dot(w, c), true);
    let mut word: Vec<T> = c.iter().map(|&v| g * v).collect();
    let context = w.iter().map(|&v| g * v).collect();
    let negatives = negatives
        .iter()
        .map(|n| {
            let g = target_coefficient(dot(w, n), false);
            axpy(g, n, &mut word);
            w.iter().map(|&v| g * v).collect()
        })
        .collect();
    PairGradient {
        word,
        context,
        negatives,
    }
}

/// Unigram^exponent sampler over word ids.
pub struct NegativeSampler {
    alias: WeightedAliasIndex<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64], exponent: f64) -> Result<Self> {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(exponent)).collect();
        let alias = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::InvalidArgument(format!("negative distribution: {e}")))?;
        Ok(NegativeSampler { alias })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.alias.sample(rng) as u32
    }
}

struct Params<T> {
    words: UnsafeCell<Vec<T>>,
    contexts: UnsafeCell<Vec<T>>,
    dim: usize,
}

// SAFETY: workers read and write rows without synchronization (Hogwild!).
// Torn or lost float updates are accepted in parallel mode; single-threaded
// training never shares the cell.
unsafe impl<T: Send> Sync for Params<T> {}

impl<T: Real> Params<T> {
    #[allow(clippy::mut_from_ref)]
    unsafe fn word_mut(&self, i: u32) -> &mut [T] {
        let v = &mut *self.words.get();
        &mut v[i as usize * self.dim..(i as usize + 1) * self.dim]
    }

    #[allow(clippy::mut_from_ref)]
    unsafe fn context_mut(&self, i: u32) -> &mut [T] {
        let v = &mut *self.contexts.get();
        &mut v[i as usize * self.dim..(i as usize + 1) * self.dim]
    }
}

struct Trainer<'a, T> {
    params: &'a Params<T>,
    sampler: &'a NegativeSampler,
    cfg: &'a SgnsConfig,
    tokens: &'a [u32],
    progress: &'a AtomicUsize,
    total_steps: usize,
}

impl<T: Real> Trainer<'_, T> {
    fn learning_rate(&self, step: usize) -> f64 {
        let frac = (step as f64 / self.total_steps as f64).min(1.0);
        self.cfg.lr_start + (self.cfg.lr_end - self.cfg.lr_start) * frac
    }

    /// Trains positions `range` once. Returns (summed loss, number of pairs).
    fn run_range(&self, range: std::ops::Range<usize>, rng: &mut ChaCha8Rng) -> (f64, usize) {
        let dim = self.cfg.dim;
        let window = self.cfg.window;
        let mut grad = vec![T::zero(); dim];
        let mut targets = Vec::with_capacity(self.cfg.negatives as usize + 1);
        let (mut loss, mut pairs) = (0.0f64, 0usize);
        for i in range {
            let step = self.progress.fetch_add(1, Ordering::Relaxed);
            let lr = T::from_f64_lossy(self.learning_rate(step));
            let w = self.tokens[i];
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(self.tokens.len() - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                targets.clear();
                targets.push((self.tokens[j], true));
                for _ in 0..self.cfg.negatives {
                    targets.push((self.sampler.sample(rng), false));
                }
                grad.iter_mut().for_each(|g| *g = T::zero());
                // SAFETY: see `Params`.
                let wv = unsafe { self.params.word_mut(w) };
                for &(t, positive) in &targets {
                    let cv = unsafe { self.params.context_mut(t) };
                    let score = dot(wv, cv);
                    loss -= if positive {
                        log_sigmoid(score)
                    } else {
                        log_sigmoid(-score)
                    }
                    .as_f64();
                    let g = target_coefficient(score, positive) * lr;
                    axpy(g, cv, &mut grad);
                    axpy(g, wv, cv);
                }
                axpy(T::one(), &grad, wv);
                pairs += 1;
            }
        }
        (loss, pairs)
    }
}

/// `Σ X[w][c]·(−log σ(w·c)) + k·Σ_w X[w]·Σ_n P(n)·(−log σ(−w·n))`, per positive pair.
fn expected_loss<T: Real>(
    params: &Params<T>,
    table: &CooccurrenceTable,
    neg_probs: &[f64],
    k: u32,
) -> f64 {
    // SAFETY: called between epochs while no worker is running.
    let (words, contexts) = unsafe { (&*params.words.get(), &*params.contexts.get()) };
    let d = params.dim;
    let row = |m: &[T], i: u32| -> Vec<T> { m[i as usize * d..(i as usize + 1) * d].to_vec() };
    let mut total = 0.0;
    for x in 0..table.n_words() as u32 {
        let row_sum = table.row_sum(x);
        if row_sum == 0 {
            continue;
        }
        let w = row(words, x);
        for (y, c) in table.row(x) {
            total -= c as f64 * log_sigmoid(dot(&w, &row(contexts, y))).as_f64();
        }
        let neg: f64 = neg_probs
            .iter()
            .enumerate()
            .map(|(n, p)| -p * log_sigmoid(-dot(&w, &row(contexts, n as u32))).as_f64())
            .sum();
        total += f64::from(k) * row_sum as f64 * neg;
    }
    total / table.total().max(1) as f64
}

fn check_divergence<T: Real>(params: &Params<T>, epoch: usize, lr: f64) -> Result<()> {
    // SAFETY: called between epochs while no worker is running.
    let (words, contexts) = unsafe { (&*params.words.get(), &*params.contexts.get()) };
    for (name, m) in [("word", words), ("context", contexts)] {
        for (row, v) in m.chunks(params.dim).enumerate() {
            let norm = sq_norm(v).as_f64().sqrt();
            if !norm.is_finite() || norm > DIVERGENCE_NORM {
                return Err(Error::Divergence {
                    epoch,
                    diagnostics: format!(
                        "{name} vector {row} has norm {norm:e} (limit {DIVERGENCE_NORM:e}), learning rate {lr}"
                    ),
                });
            }
        }
    }
    Ok(())
}

pub fn train_sgns<T: Real>(
    tokens: &[u32],
    vocab: &Vocabulary,
    cfg: &SgnsConfig,
) -> Result<EmbeddingSpace<T>> {
    train_sgns_with_log(tokens, vocab, cfg).map(|o| o.space)
}

pub fn train_sgns_with_log<T: Real>(
    tokens: &[u32],
    vocab: &Vocabulary,
    cfg: &SgnsConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if tokens.len() < 2 {
        return Err(Error::InvalidArgument("corpus needs at least two tokens".into()));
    }
    let n = vocab.len();
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= n) {
        return Err(Error::InvalidArgument(format!(
            "token id {bad} outside vocabulary of size {n}"
        )));
    }
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / dim as f64;
    let words: Vec<T> = (0..n * dim)
        .map(|_| T::from_f64_lossy(rng.random_range(-bound..bound)))
        .collect();
    let params = Params {
        words: UnsafeCell::new(words),
        contexts: UnsafeCell::new(vec![T::zero(); n * dim]),
        dim,
    };
    let sampler = NegativeSampler::new(vocab.counts(), cfg.ns_exponent)?;
    let progress = AtomicUsize::new(0);
    let pair_counts = (n <= EXPECTED_LOSS_MAX_VOCAB)
        .then(|| count_cooccurrences(tokens, vocab, cfg.window))
        .transpose()?;
    let neg_probs: Vec<f64> = {
        let w: Vec<f64> = vocab.counts().iter().map(|&c| (c as f64).powf(cfg.ns_exponent)).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    };
    let trainer = Trainer {
        params: &params,
        sampler: &sampler,
        cfg,
        tokens,
        progress: &progress,
        total_steps: cfg.epochs * tokens.len(),
    };

    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, pairs) = if cfg.workers == 1 {
            trainer.run_range(0..tokens.len(), &mut rng)
        } else {
            let chunk = tokens.len().div_ceil(cfg.workers);
            let seeds: Vec<u64> = (0..cfg.workers).map(|_| rng.random()).collect();
            std::thread::scope(|s| {
                let handles: Vec<_> = seeds
                    .iter()
                    .enumerate()
                    .map(|(wi, &seed)| {
                        let trainer = &trainer;
                        let range = (wi * chunk).min(tokens.len())..((wi + 1) * chunk).min(tokens.len());
                        s.spawn(move || trainer.run_range(range, &mut ChaCha8Rng::seed_from_u64(seed)))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("sgns worker panicked"))
                    .fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            })
        };
        let lr = trainer.learning_rate(progress.load(Ordering::Relaxed));
        check_divergence(&params, epoch, lr)?;
        let expected_loss = pair_counts
            .as_ref()
            .map(|pc| expected_loss(&params, pc, &neg_probs, cfg.negatives));
        log.push(EpochLog {
            epoch: epoch + 1,
            mean_loss: loss / pairs.max(1) as f64,
            expected_loss,
            learning_rate: lr,
        });
    }

    let space = EmbeddingSpace::new(
        params.words.into_inner(),
        params.contexts.into_inner(),
        dim,
        cfg.negatives,
        Provenance::Sgns,
        vocab.checksum(),
    )?;
    Ok(TrainOutcome { space, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;

    fn two_word_corpus(n: usize) -> Corpus {
        let text = vec!["a b"; n / 2].join(" ");
        Corpus::from_text(&text, 1, true).unwrap()
    }

    fn small_cfg() -> SgnsConfig {
        SgnsConfig {
            dim: 4,
            negatives: 2,
            window: 1,
            epochs: 5,
            seed: 7,
            ..SgnsConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SgnsConfig::default().validate().is_ok());
        for bad in [
            SgnsConfig { epochs: 0, ..Default::default() },
            SgnsConfig { dim: 0, ..Default::default() },
            SgnsConfig { negatives: 0, ..Default::default() },
            SgnsConfig { ns_exponent: 1.5, ..Default::default() },
            SgnsConfig { lr_start: 0.001, lr_end: 0.01, ..Default::default() },
            SgnsConfig { lr_end: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn epochs_zero_rejected_by_trainer() {
        let c = two_word_corpus(100);
        let cfg = SgnsConfig { epochs: 0, ..small_cfg() };
        assert!(train_sgns::<f32>(&c.tokens, &c.vocab, &cfg).is_err());
    }

    #[test]
    fn observed_pair_outscores_self_pair() {
        let c = two_word_corpus(10_000);
        let space = train_sgns::<f64>(&c.tokens, &c.vocab, &small_cfg()).unwrap();
        let (a, b) = (c.vocab.id("a").unwrap(), c.vocab.id("b").unwrap());
        assert!(space.mixed(a, b) > space.mixed(a, a));
        assert_eq!(space.provenance, Provenance::Sgns);
        assert_eq!(space.shift_k, 2);
    }

    #[test]
    fn loss_non_increasing_early() {
        // at the default rate this corpus equilibrates inside epoch 1
        let c = two_word_corpus(10_000);
        let cfg = SgnsConfig { lr_start: 1e-3, lr_end: 1e-5, ..small_cfg() };
        let out = train_sgns_with_log::<f64>(&c.tokens, &c.vocab, &cfg).unwrap();
        let losses: Vec<f64> = out.log.iter().map(|l| l.expected_loss.unwrap()).collect();
        assert!(losses[1] <= losses[0] && losses[2] <= losses[1], "{losses:?}");
    }

    #[test]
    fn deterministic_single_threaded() {
        let c = two_word_corpus(2_000);
        let a = train_sgns::<f32>(&c.tokens, &c.vocab, &small_cfg()).unwrap();
        let b = train_sgns::<f32>(&c.tokens, &c.vocab, &small_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_mode_runs() {
        let c = two_word_corpus(4_000);
        let cfg = SgnsConfig { workers: 3, ..small_cfg() };
        let s = train_sgns::<f32>(&c.tokens, &c.vocab, &cfg).unwrap();
        assert!(s.word_matrix().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn divergence_detected() {
        let c = two_word_corpus(2_000);
        let cfg = SgnsConfig { lr_start: 1e12, lr_end: 1e11, ..small_cfg() };
        assert!(matches!(
            train_sgns::<f64>(&c.tokens, &c.vocab, &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn stable_log_sigmoid() {
        assert!((log_sigmoid(0.0f64) + 2f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(-800.0f64).is_finite());
        assert_eq!(log_sigmoid(800.0f64), 0.0);
        assert!((sigmoid(-800.0f64)).abs() < 1e-300);
    }
}
