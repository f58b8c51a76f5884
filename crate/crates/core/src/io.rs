//! Text file formats: vocabulary TSV, co-occurrence triplets, word2vec text
//! embeddings, questions-words analogy sets and CSV exports.

use std::io::{BufRead, Write};

use crate::analogy::{AnalogySet, Category, CategoryResult};
use crate::corpus::{CooccurrenceTable, Vocabulary};
use crate::embedding::{EmbeddingSpace, Provenance};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sgns::EpochLog;
use crate::stats::{CorpusStats, PairStatistics};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// `word<TAB>count` lines in id order (descending count).
pub fn write_vocab<W: Write>(vocab: &Vocabulary, mut out: W) -> Result<()> {
    for (w, c) in vocab.words().iter().zip(vocab.counts()) {
        writeln!(out, "{w}\t{c}")?;
    }
    Ok(())
}

pub fn read_vocab<R: BufRead>(input: R) -> Result<Vocabulary> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (w, c) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(i + 1, "expected word<TAB>count"))?;
        let c: u64 = c.trim().parse().map_err(|_| parse_err(i + 1, "bad count"))?;
        entries.push((w.to_string(), c));
    }
    Vocabulary::from_counts(entries, 1)
}

/// Header `# window=L total=T vocab=<sha256>` followed by `x y count` lines.
pub fn write_cooccurrences<W: Write>(table: &CooccurrenceTable, mut out: W) -> Result<()> {
    writeln!(
        out,
        "# window={} total={} vocab={} words={}",
        table.window(),
        table.total(),
        table.vocab_ref(),
        table.n_words()
    )?;
    for (x, y, c) in table.iter() {
        writeln!(out, "{x} {y} {c}")?;
    }
    Ok(())
}

pub fn read_cooccurrences<R: BufRead>(input: R) -> Result<CooccurrenceTable> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header"))??;
    let mut window = None;
    let mut total = None;
    let mut vocab = None;
    let mut words = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("window", v)) => window = v.parse::<usize>().ok(),
            Some(("total", v)) => total = v.parse::<u64>().ok(),
            Some(("vocab", v)) => vocab = Some(v.to_string()),
            Some(("words", v)) => words = v.parse::<usize>().ok(),
            _ => return Err(parse_err(1, format!("unknown header field '{field}'"))),
        }
    }
    let (Some(window), Some(total), Some(vocab), Some(words)) = (window, total, vocab, words) else {
        return Err(parse_err(1, "header needs window, total, vocab and words"));
    };
    let mut triplets = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        let mut next = |what: &str| -> Result<u64> {
            it.next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(i + 2, format!("bad {what}")))
        };
        let (x, y, c) = (next("x")?, next("y")?, next("count")?);
        triplets.push((x as u32, y as u32, c));
    }
    let table = CooccurrenceTable::from_triplets(words, window, vocab, triplets)?;
    if table.total() != total {
        return Err(parse_err(
            1,
            format!("header total {total} disagrees with summed counts {}", table.total()),
        ));
    }
    Ok(table)
}

/// word2vec text format: `n d` header then `word v1 ... vd`. Floats are written
/// in shortest round-trip form, so reading back is lossless.
pub fn write_word2vec<T: Real, W: Write>(
    vocab: &Vocabulary,
    rows: &[T],
    dim: usize,
    mut out: W,
) -> Result<()> {
    writeln!(out, "{} {dim}", vocab.len())?;
    for (i, w) in vocab.words().iter().enumerate() {
        write!(out, "{w}")?;
        for v in &rows[i * dim..(i + 1) * dim] {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a word2vec text file. Returns the word list in file order and the rows.
pub fn read_word2vec<T: Real, R: BufRead>(input: R) -> Result<(Vec<String>, Vec<T>, usize)> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header"))??;
    let mut h = header.split_whitespace();
    let n: usize = h
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(1, "bad row count"))?;
    let dim: usize = h
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(1, "bad dimension"))?;
    let mut words = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n * dim);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(' ');
        let w = it.next().ok_or_else(|| parse_err(i + 2, "missing word"))?;
        words.push(w.to_string());
        let before = rows.len();
        for v in it.filter(|v| !v.is_empty()) {
            rows.push(
                v.parse::<T>()
                    .map_err(|_| parse_err(i + 2, format!("bad value '{v}'")))?,
            );
        }
        if rows.len() - before != dim {
            return Err(parse_err(i + 2, format!("expected {dim} values")));
        }
    }
    if words.len() != n {
        return Err(parse_err(1, format!("header says {n} rows, found {}", words.len())));
    }
    Ok((words, rows, dim))
}

/// Writes `W` and `C` of a space to two word2vec files.
pub fn write_space<T: Real, W1: Write, W2: Write>(
    space: &EmbeddingSpace<T>,
    vocab: &Vocabulary,
    words_out: W1,
    contexts_out: W2,
) -> Result<()> {
    space.check_vocab(vocab.checksum())?;
    write_word2vec(vocab, space.word_matrix(), space.dim(), words_out)?;
    write_word2vec(vocab, space.context_matrix(), space.dim(), contexts_out)
}

/// Reassembles a space from word and context files written against `vocab`.
pub fn read_space<T: Real, R1: BufRead, R2: BufRead>(
    vocab: &Vocabulary,
    words_in: R1,
    contexts_in: R2,
    shift_k: u32,
    provenance: Provenance,
) -> Result<EmbeddingSpace<T>> {
    let (wn, w, d) = read_word2vec::<T, _>(words_in)?;
    let (cn, c, dc) = read_word2vec::<T, _>(contexts_in)?;
    if d != dc || wn != cn || wn.as_slice() != vocab.words() {
        return Err(Error::VocabMismatch {
            expected: vocab.checksum().to_string(),
            found: "embedding files with a different word list".into(),
        });
    }
    EmbeddingSpace::new(w, c, d, shift_k, provenance, vocab.checksum())
}

/// Parses the questions-words layout: `: category` headers and `a b x y` lines
/// meaning `(a, b)::(x, y)`. Pairs are collected per category in order of first appearance.
pub fn read_questions<R: BufRead>(input: R, source: &str, lowercase: bool) -> Result<AnalogySet> {
    let mut cats: Vec<Category> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix(':') {
            cats.push(Category {
                name: name.trim().to_string(),
                pairs: Vec::new(),
            });
            continue;
        }
        let words: Vec<String> = line
            .split_whitespace()
            .map(|w| if lowercase { w.to_lowercase() } else { w.to_string() })
            .collect();
        if words.len() != 4 {
            return Err(parse_err(i + 1, "expected four words"));
        }
        let cat = cats
            .last_mut()
            .ok_or_else(|| parse_err(i + 1, "question before any ': category' line"))?;
        for pair in [(&words[0], &words[1]), (&words[2], &words[3])] {
            let pair = (pair.0.clone(), pair.1.clone());
            if !cat.pairs.contains(&pair) {
                cat.pairs.push(pair);
            }
        }
    }
    AnalogySet::new(cats, source)
}

/// Writes every ordered pair-of-pairs of each category as a question line.
pub fn write_questions<W: Write>(set: &AnalogySet, mut out: W) -> Result<()> {
    for cat in &set.categories {
        writeln!(out, ": {}", cat.name)?;
        for (i, (a, b)) in cat.pairs.iter().enumerate() {
            for (j, (x, y)) in cat.pairs.iter().enumerate() {
                if i != j {
                    writeln!(out, "{a} {b} {x} {y}")?;
                }
            }
        }
    }
    Ok(())
}

/// `word_x,word_y,count,pmi,cspmi` for every stored pair.
pub fn write_stats_csv<W: Write>(stats: &CorpusStats, vocab: &Vocabulary, mut out: W) -> Result<()> {
    writeln!(out, "word_x,word_y,count,pmi,cspmi")?;
    for (x, y, c) in stats.table().iter() {
        let pmi = stats.pmi(x, y).expect("stored pair");
        let cs = stats.cspmi(x, y).expect("stored pair");
        writeln!(
            out,
            "{},{},{c},{pmi},{cs}",
            csv_field(vocab.word(x)),
            csv_field(vocab.word(y))
        )?;
    }
    Ok(())
}

pub fn write_analogy_csv<W: Write>(results: &[CategoryResult], mut out: W) -> Result<()> {
    writeln!(out, "category,accuracy,coverage,attempted")?;
    for r in results {
        let acc = r.accuracy.map_or(String::new(), |a| a.to_string());
        writeln!(out, "{},{acc},{},{}", csv_field(&r.category), r.coverage, r.attempted)?;
    }
    Ok(())
}

pub fn write_training_log<W: Write>(log: &[EpochLog], mut out: W) -> Result<()> {
    writeln!(out, "epoch,mean_loss,learning_rate")?;
    for l in log {
        writeln!(out, "{},{},{}", l.epoch, l.mean_loss, l.learning_rate)?;
    }
    Ok(())
}

pub fn write_samples_csv<W: Write>(samples: &[(f64, f64)], header: (&str, &str), mut out: W) -> Result<()> {
    writeln!(out, "{},{}", header.0, header.1)?;
    for (a, b) in samples {
        writeln!(out, "{a},{b}")?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{count_cooccurrences, Corpus};

    fn corpus() -> Corpus {
        Corpus::from_text("the cat sat on the mat the end", 1, true).unwrap()
    }

    #[test]
    fn vocab_round_trip() {
        let c = corpus();
        let mut buf = Vec::new();
        write_vocab(&c.vocab, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("the\t3\n"));
        assert_eq!(read_vocab(buf.as_slice()).unwrap(), c.vocab);
    }

    #[test]
    fn cooccurrence_round_trip() {
        let c = corpus();
        let t = count_cooccurrences(&c.tokens, &c.vocab, 2).unwrap();
        let mut buf = Vec::new();
        write_cooccurrences(&t, &mut buf).unwrap();
        assert_eq!(read_cooccurrences(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn cooccurrence_header_total_checked() {
        let bad = "# window=1 total=5 vocab=abc words=2\n0 1 2\n1 0 2\n";
        assert!(read_cooccurrences(bad.as_bytes()).is_err());
    }

    #[test]
    fn word2vec_round_trip_is_lossless() {
        let c = corpus();
        let n = c.vocab.len();
        let w: Vec<f64> = (0..n * 3).map(|i| (i as f64).sin() / 7.0).collect();
        let cm: Vec<f64> = w.iter().map(|v| v * -1.5).collect();
        let s = EmbeddingSpace::new(w, cm, 3, 5, Provenance::Sgns, c.vocab.checksum()).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_space(&s, &c.vocab, &mut a, &mut b).unwrap();
        let back: EmbeddingSpace<f64> =
            read_space(&c.vocab, a.as_slice(), b.as_slice(), 5, Provenance::Sgns).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn questions_parse() {
        let text = ": capital\nathens greece baghdad iraq\nbaghdad iraq athens greece\n: plural\ncat cats dog dogs\n";
        let set = read_questions(text.as_bytes(), "q", true).unwrap();
        assert_eq!(set.categories.len(), 2);
        assert_eq!(set.categories[0].pairs.len(), 2);
        let mut out = Vec::new();
        write_questions(&set, &mut out).unwrap();
        let again = read_questions(out.as_slice(), "q", true).unwrap();
        assert_eq!(again.categories, set.categories);
        assert!(read_questions("a b c d\n".as_bytes(), "q", true).is_err());
        assert!(read_questions(": x\na b c\n".as_bytes(), "q", true).is_err());
    }

    #[test]
    fn stats_csv_has_all_pairs() {
        let c = corpus();
        let t = count_cooccurrences(&c.tokens, &c.vocab, 1).unwrap();
        let nnz = t.nnz();
        let s = CorpusStats::new(t);
        let mut out = Vec::new();
        write_stats_csv(&s, &c.vocab, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), nnz + 1);
    }
}
