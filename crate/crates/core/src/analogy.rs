//! Analogy solving by vector offset, evaluation over analogy sets, and the
//! geometric conditions (parallelogram sides, coplanarity) behind them.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::scalar::{dot, sq_norm, Real};
use crate::stats::SparseMatrix;

/// Default relative singular-value cutoff for [`coplanarity_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    #[default]
    Cosine,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::InvalidArgument(format!("unknown metric '{other}'"))),
        }
    }
}

/// Named categories of ordered word pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalogySet {
    pub categories: Vec<Category>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Category {
    pub name: String,
    pub pairs: Vec<(String, String)>,
}

impl AnalogySet {
    pub fn new(categories: Vec<Category>, source: impl Into<String>) -> Result<Self> {
        for c in &categories {
            if c.pairs.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "category '{}' has {} pair(s); at least 2 are required",
                    c.name,
                    c.pairs.len()
                )));
            }
        }
        Ok(AnalogySet {
            categories,
            source: source.into(),
        })
    }

    pub fn category(&self, name: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.name == name)
    }
}

impl Category {
    /// All ordered questions `(x1, x2, y2) → y1` over distinct pairs with `x1 ≠ x2`.
    pub fn questions(&self) -> impl Iterator<Item = [&str; 4]> + '_ {
        self.pairs.iter().enumerate().flat_map(move |(i, (x1, y1))| {
            self.pairs
                .iter()
                .enumerate()
                .filter(move |&(j, (x2, _))| j != i && x2 != x1)
                .map(move |(_, (x2, y2))| [x1.as_str(), x2.as_str(), y2.as_str(), y1.as_str()])
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    /// `(a, x, y)` as word ids.
    pub query: (u32, u32, u32),
    pub predicted: u32,
    /// 1-based rank of the gold answer among candidates, when one was given.
    pub gold_rank: Option<usize>,
    pub metric: Metric,
    /// Best candidates with their distances, ascending.
    pub top: Vec<(u32, f64)>,
}

/// Precomputed state for repeated queries against one space.
pub struct Solver<'a, T: Real> {
    space: &'a EmbeddingSpace<T>,
    metric: Metric,
    /// Row-major copy of the word matrix, unit-normalized for cosine.
    rows: Vec<T>,
    pool: usize,
    top_n: usize,
}

impl<'a, T: Real> Solver<'a, T> {
    pub fn new(space: &'a EmbeddingSpace<T>, metric: Metric) -> Self {
        let rows = match metric {
            Metric::Euclidean => space.word_matrix().to_vec(),
            Metric::Cosine => space.normalized().word_matrix().to_vec(),
        };
        Solver {
            space,
            metric,
            rows,
            pool: space.n_words(),
            top_n: 10,
        }
    }

    /// Restricts candidates to the `n` most frequent words (the lowest ids).
    pub fn with_pool(mut self, n: usize) -> Self {
        self.pool = n.min(self.space.n_words());
        self
    }

    pub fn with_top_n(mut self, n: usize) -> Self {
        self.top_n = n;
        self
    }

    fn row(&self, i: u32) -> &[T] {
        let d = self.space.dim();
        &self.rows[i as usize * d..(i as usize + 1) * d]
    }

    fn distance(&self, target: &[T], target_norm: T, cand: u32) -> f64 {
        let v = self.row(cand);
        match self.metric {
            Metric::Euclidean => v
                .iter()
                .zip(target)
                .map(|(a, b)| (*a - *b) * (*a - *b))
                .sum::<T>()
                .as_f64(),
            Metric::Cosine => {
                let n = sq_norm(v).sqrt();
                if n == T::zero() || target_norm == T::zero() {
                    1.0
                } else {
                    1.0 - (dot(v, target) / (n * target_norm)).as_f64()
                }
            }
        }
    }

    /// Solves `(a, ?)::(x, y)` by the word nearest `a + (y − x)` outside `{a, x, y}`.
    pub fn solve_ids(&self, a: u32, x: u32, y: u32, gold: Option<u32>) -> Result<SolveResult> {
        let target: Vec<T> = self
            .row(a)
            .iter()
            .zip(self.row(x))
            .zip(self.row(y))
            .map(|((&a, &x), &y)| a + (y - x))
            .collect();
        let tn = sq_norm(&target).sqrt();
        let mut best: Option<(u32, f64)> = None;
        let mut scored: Vec<(u32, f64)> = Vec::with_capacity(self.pool);
        for c in 0..self.pool as u32 {
            if c == a || c == x || c == y {
                continue;
            }
            let d = self.distance(&target, tn, c);
            // strict comparison keeps the lowest id on ties
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((c, d));
            }
            scored.push((c, d));
        }
        let (predicted, _) = best.ok_or_else(|| {
            Error::InvalidArgument("no candidates remain after excluding the query words".into())
        })?;
        let gold_rank = gold.and_then(|g| {
            let gd = scored.iter().find(|s| s.0 == g)?.1;
            Some(
                1 + scored
                    .iter()
                    .filter(|&&(c, d)| d < gd || (d == gd && c < g))
                    .count(),
            )
        });
        let top_n = self.top_n.min(scored.len());
        if top_n > 0 && top_n < scored.len() {
            scored.select_nth_unstable_by(top_n - 1, |p, q| p.1.total_cmp(&q.1).then(p.0.cmp(&q.0)));
        }
        scored.truncate(top_n);
        scored.sort_by(|p, q| p.1.total_cmp(&q.1).then(p.0.cmp(&q.0)));
        Ok(SolveResult {
            query: (a, x, y),
            predicted,
            gold_rank,
            metric: self.metric,
            top: scored,
        })
    }
}

/// Answers `(a, ?)::(x, y)` with the nearest word to `a + (y − x)`, excluding the query words.
pub fn solve_analogy<T: Real>(
    space: &EmbeddingSpace<T>,
    vocab: &Vocabulary,
    a: &str,
    x: &str,
    y: &str,
    metric: Metric,
) -> Result<SolveResult> {
    space.check_vocab(vocab.checksum())?;
    let (a, x, y) = (vocab.require(a)?, vocab.require(x)?, vocab.require(y)?);
    Solver::new(space, metric).solve_ids(a, x, y, None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryResult {
    pub category: String,
    pub correct: usize,
    pub attempted: usize,
    pub total: usize,
    /// `None` when no question could be attempted.
    pub accuracy: Option<f64>,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub metric: Metric,
    /// Candidate pool limited to the most frequent words, when set.
    pub pool: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            metric: Metric::Cosine,
            pool: None,
        }
    }
}

/// Accuracy and coverage per category; questions touching OOV words are skipped.
pub fn evaluate_analogy_set<T: Real>(
    space: &EmbeddingSpace<T>,
    vocab: &Vocabulary,
    set: &AnalogySet,
    opts: EvalOptions,
) -> Result<Vec<CategoryResult>> {
    space.check_vocab(vocab.checksum())?;
    let mut solver = Solver::new(space, opts.metric).with_top_n(1);
    if let Some(p) = opts.pool {
        solver = solver.with_pool(p);
    }
    set.categories
        .iter()
        .map(|cat| {
            let questions: Vec<[&str; 4]> = cat.questions().collect();
            let ids: Vec<[u32; 4]> = questions
                .iter()
                .filter_map(|q| {
                    let mut out = [0u32; 4];
                    for (o, w) in out.iter_mut().zip(q) {
                        *o = vocab.id(w)?;
                    }
                    Some(out)
                })
                .collect();
            let correct = ids
                .par_iter()
                .map(|&[x1, x2, y2, y1]| {
                    solver
                        .solve_ids(x1, x2, y2, None)
                        .map(|r| usize::from(r.predicted == y1))
                })
                .collect::<Result<Vec<usize>>>()?
                .into_iter()
                .sum();
            let (attempted, total) = (ids.len(), questions.len());
            Ok(CategoryResult {
                category: cat.name.clone(),
                correct,
                attempted,
                total,
                accuracy: (attempted > 0).then(|| correct as f64 / attempted as f64),
                coverage: if total == 0 {
                    0.0
                } else {
                    attempted as f64 / total as f64
                },
            })
        })
        .collect()
}

/// `(‖(y1−x1) − (y2−x2)‖, |‖x1−x2‖² − ‖y1−y2‖²|)`; both vanish for a parallelogram.
pub fn parallelogram_residual<T: Real>(
    space: &EmbeddingSpace<T>,
    x1: u32,
    y1: u32,
    x2: u32,
    y2: u32,
) -> (f64, f64) {
    let (vx1, vy1, vx2, vy2) = (space.word(x1), space.word(y1), space.word(x2), space.word(y2));
    let mut side = T::zero();
    let (mut dx, mut dy) = (T::zero(), T::zero());
    for i in 0..space.dim() {
        let s = (vy1[i] - vx1[i]) - (vy2[i] - vx2[i]);
        side += s * s;
        dx += (vx1[i] - vx2[i]) * (vx1[i] - vx2[i]);
        dy += (vy1[i] - vy2[i]) * (vy1[i] - vy2[i]);
    }
    (side.sqrt().as_f64(), (dx - dy).abs().as_f64())
}

/// `γ′ = 2⟨x, y⟩ − ‖x‖² − ‖y‖²`, i.e. `−‖x − y‖²`.
pub fn gamma_prime<T: Real>(space: &EmbeddingSpace<T>, x: u32, y: u32) -> f64 {
    (T::from_f64_lossy(2.0) * space.word_dot(x, y) - space.word_sq_norm(x) - space.word_sq_norm(y))
        .as_f64()
}

/// Numerical rank of a small dense matrix: singular values above `tol · σ_max`.
pub fn numerical_rank(rows: &DMatrix<f64>, tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let sv = rows.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Rank of `[a − y; b − y; x − y]` over word vectors.
pub fn coplanarity_rank<T: Real>(
    space: &EmbeddingSpace<T>,
    [a, b, x, y]: [u32; 4],
    tol: f64,
) -> usize {
    let d = space.dim();
    let vy = space.word(y);
    let rows = DMatrix::from_fn(3, d, |r, c| {
        let v = space.word([a, b, x][r]);
        (v[c] - vy[c]).as_f64()
    });
    numerical_rank(&rows, tol)
}

/// Rank of `[M_a − M_y; M_b − M_y; M_x − M_y]` over the columns observed in all four rows.
pub fn coplanarity_rank_rows(m: &SparseMatrix, [a, b, x, y]: [u32; 4], tol: f64) -> usize {
    let cols: Vec<u32> = (0..m.n() as u32)
        .filter(|&c| [a, b, x, y].iter().all(|&r| m.get(r, c).is_some()))
        .collect();
    if cols.is_empty() {
        return 0;
    }
    let rows = DMatrix::from_fn(3, cols.len(), |r, j| {
        let c = cols[j];
        m.get([a, b, x][r], c).unwrap() - m.get(y, c).unwrap()
    });
    numerical_rank(&rows, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::embedding::Provenance;

    fn space(rows: &[[f64; 3]]) -> (EmbeddingSpace<f64>, Vocabulary) {
        let vocab = Vocabulary::from_counts(
            rows.iter().enumerate().map(|(i, _)| (format!("w{i:02}"), 100 - i as u64)),
            1,
        )
        .unwrap();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let s = EmbeddingSpace::new(flat.clone(), flat, 3, 1, Provenance::Planted, vocab.checksum()).unwrap();
        (s, vocab)
    }

    #[test]
    fn parallelogram_solved_exactly() {
        // w00 + (w03 − w02) = w01
        let (s, v) = space(&[
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.5],
            [3.0, 2.0, 0.0],
            [3.0, 3.0, 0.5],
            [0.0, 0.0, 3.0],
        ]);
        let r = solve_analogy(&s, &v, "w00", "w02", "w03", Metric::Euclidean).unwrap();
        assert_eq!(r.predicted, 1);
        assert!(r.top[0].1 <= 1e-6);
        let r = solve_analogy(&s, &v, "w00", "w02", "w03", Metric::Cosine).unwrap();
        assert_eq!(r.predicted, 1);
        let (side, cross) = parallelogram_residual(&s, 0, 1, 2, 3);
        assert!(side < 1e-12 && cross < 1e-12);
        assert!(coplanarity_rank(&s, [0, 1, 2, 3], DEFAULT_RANK_TOL) <= 2);
    }

    #[test]
    fn zero_displacement_returns_nearest_neighbor() {
        let (s, v) = space(&[[0.0, 0.0, 0.0], [5.0, 5.0, 5.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]);
        let r = solve_analogy(&s, &v, "w00", "w01", "w01", Metric::Euclidean).unwrap();
        assert_eq!(r.predicted, 2);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let (s, v) = space(&[[0.0, 0.0, 0.0], [9.0, 9.0, 9.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let r = solve_analogy(&s, &v, "w00", "w01", "w01", Metric::Euclidean).unwrap();
        assert_eq!(r.predicted, 2);
        let r = Solver::new(&s, Metric::Euclidean).solve_ids(0, 1, 1, Some(3)).unwrap();
        assert_eq!(r.gold_rank, Some(2));
    }

    #[test]
    fn oov_names_the_word() {
        let (s, v) = space(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]);
        match solve_analogy(&s, &v, "w00", "queen", "w01", Metric::Cosine) {
            Err(Error::OutOfVocabulary(w)) => assert_eq!(w, "queen"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_identical_pairs() {
        let (s, _) = space(&[[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]]);
        assert_eq!(parallelogram_residual(&s, 0, 0, 1, 1), (0.0, 0.0));
        assert_eq!(coplanarity_rank(&s, [0, 0, 0, 0], DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn residuals_match_direct_arithmetic() {
        let p = [[0.3, -1.2, 2.0], [1.1, 0.4, -0.7], [-2.0, 0.9, 0.1], [0.5, 0.5, 1.5]];
        let (s, _) = space(&p);
        let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        let nrm2 = |a: [f64; 3]| a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        let side = nrm2(sub(sub(p[1], p[0]), sub(p[3], p[2]))).sqrt();
        let cross = (nrm2(sub(p[0], p[2])) - nrm2(sub(p[1], p[3]))).abs();
        let (rs, rc) = parallelogram_residual(&s, 0, 1, 2, 3);
        assert!((rs - side).abs() < 1e-12 && (rc - cross).abs() < 1e-12);
        assert_eq!(coplanarity_rank(&s, [0, 1, 2, 3], DEFAULT_RANK_TOL), 3);
    }

    #[test]
    fn equal_lengths_without_coplanarity_caught_by_rank() {
        // regular tetrahedron: every side length equal, yet no parallelogram
        let (s, _) = space(&[
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]);
        let (x1, y1, x2, y2) = (0, 1, 2, 3);
        assert!((gamma_prime(&s, x1, y1) - gamma_prime(&s, x2, y2)).abs() < 1e-12);
        let (_, cross) = parallelogram_residual(&s, x1, y1, x2, y2);
        assert!(cross < 1e-12);
        assert_eq!(coplanarity_rank(&s, [x1, y1, x2, y2], DEFAULT_RANK_TOL), 3);
    }

    #[test]
    fn set_validation_and_questions() {
        let cat = Category {
            name: "c".into(),
            pairs: vec![("a".into(), "b".into()), ("c".into(), "d".into()), ("e".into(), "f".into())],
        };
        assert_eq!(cat.questions().count(), 6);
        assert_eq!(cat.questions().next().unwrap(), ["a", "c", "d", "b"]);
        let one = Category {
            name: "one".into(),
            pairs: vec![("a".into(), "b".into())],
        };
        assert!(AnalogySet::new(vec![one], "x").is_err());
    }

    #[test]
    fn all_oov_category_has_undefined_accuracy() {
        let (s, v) = space(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]);
        let set = AnalogySet::new(
            vec![Category {
                name: "missing".into(),
                pairs: vec![("p".into(), "q".into()), ("r".into(), "s".into())],
            }],
            "x",
        )
        .unwrap();
        let res = evaluate_analogy_set(&s, &v, &set, EvalOptions::default()).unwrap();
        assert_eq!(res[0].attempted, 0);
        assert_eq!(res[0].coverage, 0.0);
        assert_eq!(res[0].accuracy, None);
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("cosine".parse::<Metric>().unwrap(), Metric::Cosine);
        assert!("manhattan".parse::<Metric>().is_err());
    }
}
