//! Tokenization, vocabulary construction and windowed co-occurrence counting.

use std::collections::HashMap;
use std::io::Read;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Word index with unigram counts.
///
/// Ids are dense, assigned by descending count with ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
    counts: Vec<u64>,
    total_tokens: u64,
    checksum: String,
}

impl Vocabulary {
    /// Builds a vocabulary from `(word, count)` entries, dropping entries below `min_count`.
    pub fn from_counts<I, S>(entries: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (w, c) in entries {
            *merged.entry(w.into()).or_default() += c;
        }
        let mut entries: Vec<(String, u64)> = merged
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .collect();
        if entries.is_empty() {
            return Err(Error::EmptyCorpus {
                min_count: min_count as usize,
            });
        }
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut hasher = Sha256::new();
        for (w, c) in &entries {
            hasher.update(w.as_bytes());
            hasher.update(b"\t");
            hasher.update(c.to_string().as_bytes());
            hasher.update(b"\n");
        }
        let checksum = hex::encode(hasher.finalize());

        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i as u32))
            .collect();
        let total_tokens = entries.iter().map(|(_, c)| c).sum();
        let (words, counts) = entries.into_iter().unzip();
        Ok(Vocabulary {
            words,
            index,
            counts,
            total_tokens,
            checksum,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    /// Like [`Vocabulary::id`] but reports the missing word as an error.
    pub fn require(&self, word: &str) -> Result<u32> {
        self.id(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// SHA-256 over the `word\tcount` listing; identifies the vocabulary in derived files.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Maps tokens to ids, dropping out-of-vocabulary tokens so positions close up.
    pub fn encode<'a, I>(&self, tokens: I) -> Vec<u32>
    where
        I: IntoIterator<Item = &'a str>,
    {
        tokens.into_iter().filter_map(|t| self.id(t)).collect()
    }
}

/// A filtered token stream together with its vocabulary.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub tokens: Vec<u32>,
}

impl Corpus {
    pub fn from_tokens<'a, I>(tokens: I, min_count: u64, lowercase: bool) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let raw: Vec<String> = tokens
            .into_iter()
            .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
            .collect();
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for t in &raw {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        let vocab = Vocabulary::from_counts(counts, min_count)?;
        let tokens = vocab.encode(raw.iter().map(String::as_str));
        Ok(Corpus { vocab, tokens })
    }

    pub fn from_text(text: &str, min_count: u64, lowercase: bool) -> Result<Self> {
        Self::from_tokens(text.split_whitespace(), min_count, lowercase)
    }

    pub fn from_reader<R: Read>(mut reader: R, min_count: u64, lowercase: bool) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text).map_err(|e| {
            if e.kind() == std::io::ErrorKind::InvalidData {
                Error::InvalidArgument("corpus is not valid UTF-8".into())
            } else {
                Error::Io(e)
            }
        })?;
        Self::from_text(&text, min_count, lowercase)
    }
}

/// Reads whitespace-delimited text and returns the vocabulary surviving `min_count`.
pub fn ingest_corpus<R: Read>(text_source: R, min_count: u64, lowercase: bool) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    Corpus::from_reader(text_source, min_count, lowercase).map(|c| c.vocab)
}

/// Sparse symmetric table of ordered co-occurrence counts in row-compressed form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceTable {
    window: usize,
    total: u64,
    vocab_ref: String,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    counts: Vec<u64>,
}

impl CooccurrenceTable {
    /// Builds a table from `(x, y, count)` triplets. Duplicates are summed and zeros dropped.
    pub fn from_triplets(
        n_words: usize,
        window: usize,
        vocab_ref: impl Into<String>,
        mut triplets: Vec<(u32, u32, u64)>,
    ) -> Result<Self> {
        triplets.sort_unstable_by_key(|&(x, y, _)| (x, y));
        let mut row_ptr = vec![0usize; n_words + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut counts: Vec<u64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for (x, y, c) in triplets {
            if x as usize >= n_words || y as usize >= n_words {
                return Err(Error::InvalidArgument(format!(
                    "pair ({x}, {y}) outside vocabulary of size {n_words}"
                )));
            }
            if c == 0 {
                continue;
            }
            if last == Some((x, y)) {
                *counts.last_mut().unwrap() += c;
            } else {
                cols.push(y);
                counts.push(c);
                row_ptr[x as usize + 1] += 1;
                last = Some((x, y));
            }
        }
        for i in 0..n_words {
            row_ptr[i + 1] += row_ptr[i];
        }
        let total = counts.iter().sum();
        Ok(CooccurrenceTable {
            window,
            total,
            vocab_ref: vocab_ref.into(),
            row_ptr,
            cols,
            counts,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Grand total of ordered pair events.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn vocab_ref(&self) -> &str {
        &self.vocab_ref
    }

    pub fn n_words(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Number of stored (nonzero) ordered pairs.
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, x: u32, y: u32) -> u64 {
        let (cols, counts) = self.row_slices(x);
        match cols.binary_search(&y) {
            Ok(i) => counts[i],
            Err(_) => 0,
        }
    }

    pub fn row(&self, x: u32) -> impl Iterator<Item = (u32, u64)> + '_ {
        let (cols, counts) = self.row_slices(x);
        cols.iter().copied().zip(counts.iter().copied())
    }

    pub fn row_sum(&self, x: u32) -> u64 {
        self.row_slices(x).1.iter().sum()
    }

    /// All stored `(x, y, count)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, u64)> + '_ {
        (0..self.n_words() as u32).flat_map(move |x| self.row(x).map(move |(y, c)| (x, y, c)))
    }

    fn row_slices(&self, x: u32) -> (&[u32], &[u64]) {
        let (a, b) = (self.row_ptr[x as usize], self.row_ptr[x as usize + 1]);
        (&self.cols[a..b], &self.counts[a..b])
    }
}

/// Counts ordered window events with a flat window of half-width `window`.
pub fn count_cooccurrences(
    tokens: &[u32],
    vocab: &Vocabulary,
    window: usize,
) -> Result<CooccurrenceTable> {
    count_cooccurrences_parallel(tokens, vocab, window, 1)
}

/// Sharded variant of [`count_cooccurrences`]. Each shard owns a range of
/// center positions and reads neighbors across shard boundaries, so the
/// summed result is identical to the single-threaded table.
pub fn count_cooccurrences_parallel(
    tokens: &[u32],
    vocab: &Vocabulary,
    window: usize,
    workers: usize,
) -> Result<CooccurrenceTable> {
    if window < 1 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let n_words = vocab.len();
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= n_words) {
        return Err(Error::InvalidArgument(format!(
            "token id {bad} outside vocabulary of size {n_words}"
        )));
    }

    let count_range = |start: usize, end: usize| -> HashMap<u64, u64> {
        let mut acc: HashMap<u64, u64> = HashMap::new();
        for i in start..end {
            let center = (tokens[i] as u64) << 32;
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(tokens.len() - 1);
            for (j, &ctx) in tokens.iter().enumerate().take(hi + 1).skip(lo) {
                if j != i {
                    *acc.entry(center | ctx as u64).or_default() += 1;
                }
            }
        }
        acc
    };

    let workers = workers.max(1);
    let shards: Vec<HashMap<u64, u64>> = if workers == 1 || tokens.len() < 2 * workers {
        vec![count_range(0, tokens.len())]
    } else {
        let chunk = tokens.len().div_ceil(workers);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| {
            (0..workers)
                .into_par_iter()
                .map(|s| count_range(s * chunk, ((s + 1) * chunk).min(tokens.len())))
                .collect()
        })
    };

    let mut triplets = Vec::with_capacity(shards.iter().map(HashMap::len).sum());
    for shard in shards {
        triplets.extend(
            shard
                .into_iter()
                .map(|(k, c)| ((k >> 32) as u32, (k & 0xffff_ffff) as u32, c)),
        );
    }
    CooccurrenceTable::from_triplets(n_words, window, vocab.checksum(), triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(text: &str, min_count: u64) -> Corpus {
        Corpus::from_text(text, min_count, true).unwrap()
    }

    #[test]
    fn vocabulary_counts_and_order() {
        let c = corpus("a b a b a c", 1);
        assert_eq!(c.vocab.words(), &["a", "b", "c"]);
        assert_eq!(c.vocab.counts(), &[3, 2, 1]);
        assert_eq!(c.vocab.total_tokens(), 6);
    }

    #[test]
    fn min_count_closes_positions() {
        let c = corpus("a b a b a c", 2);
        assert_eq!(c.vocab.words(), &["a", "b"]);
        assert_eq!(c.vocab.total_tokens(), 5);
        assert_eq!(c.tokens, vec![0, 1, 0, 1, 0]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            ingest_corpus("".as_bytes(), 1, true),
            Err(Error::EmptyCorpus { .. })
        ));
        assert!(matches!(
            ingest_corpus("a b c".as_bytes(), 2, true),
            Err(Error::EmptyCorpus { .. })
        ));
    }

    #[test]
    fn ties_break_lexicographically() {
        let c = corpus("z y x y z x", 1);
        assert_eq!(c.vocab.words(), &["x", "y", "z"]);
    }

    #[test]
    fn lowercase_flag() {
        let v = ingest_corpus("A a B".as_bytes(), 1, true).unwrap();
        assert_eq!(v.count(v.id("a").unwrap()), 2);
        let v = ingest_corpus("A a B".as_bytes(), 1, false).unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn invalid_utf8_rejected() {
        let bytes: &[u8] = &[0x61, 0x20, 0xff, 0xfe];
        assert!(ingest_corpus(bytes, 1, true).is_err());
    }

    #[test]
    fn window_one_counts() {
        let c = corpus("a b a b a c", 1);
        let t = count_cooccurrences(&c.tokens, &c.vocab, 1).unwrap();
        let (a, b, cc) = (0, 1, 2);
        assert_eq!(t.get(a, b), 4);
        assert_eq!(t.get(b, a), 4);
        assert_eq!(t.get(a, cc), 1);
        assert_eq!(t.get(cc, a), 1);
        assert_eq!(t.get(a, a), 0);
        assert_eq!(t.total(), 10);
        assert_eq!(t.nnz(), 4);
    }

    #[test]
    fn adjacent_self_pair() {
        let c = corpus("a a", 1);
        let t = count_cooccurrences(&c.tokens, &c.vocab, 1).unwrap();
        assert_eq!(t.get(0, 0), 2);
        assert_eq!(t.total(), 2);
    }

    #[test]
    fn zero_window_rejected() {
        let c = corpus("a b", 1);
        assert!(count_cooccurrences(&c.tokens, &c.vocab, 0).is_err());
    }

    #[test]
    fn out_of_range_token_rejected() {
        let c = corpus("a b", 1);
        assert!(count_cooccurrences(&[0, 7], &c.vocab, 1).is_err());
    }

    #[test]
    fn vocab_ref_tracks_checksum() {
        let c = corpus("a b a", 1);
        let t = count_cooccurrences(&c.tokens, &c.vocab, 2).unwrap();
        assert_eq!(t.vocab_ref(), c.vocab.checksum());
        assert_ne!(corpus("a b b", 1).vocab.checksum(), c.vocab.checksum());
    }
}
