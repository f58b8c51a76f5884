//! Quantitative checks of the csPMI identities.
//!
//! Zero-error spaces (exact factorizations, planted spaces) are held to
//! residual tolerances. Trained spaces are judged by correlations against
//! configurable thresholds.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analogy::{evaluate_analogy_set, AnalogySet, EvalOptions, Solver, Metric};
use crate::corpus::Vocabulary;
use crate::embedding::{EmbeddingSpace, Provenance};
use crate::error::{Error, Result};
use crate::factorize::{NoiseReport, MIN_BIN_PAIRS};
use crate::scalar::{dot, sq_norm, Real};
use crate::stats::{
    conditional_ratio_profile, fit_through_origin, linear_fit, mean, median, pearson_r, variance,
    CorpusStats, PairStatistics,
};
use crate::synthetic::PlantedSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Exact,
    Statistical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Computed for inspection; no threshold applies.
    Reported,
    /// Could not be evaluated (e.g. insufficient sample).
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

impl Comparison {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::Below => value < threshold,
            Comparison::Above => value > threshold,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Below => "<",
            Comparison::Above => ">",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub statistic: String,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub scope: Scope,
    pub status: Status,
    pub statistics: BTreeMap<String, Statistic>,
    pub criteria: Vec<Criterion>,
    pub notes: Vec<String>,
    /// Raw `(x, y)` samples behind the statistics, for plotting.
    #[serde(skip)]
    pub samples: Vec<(f64, f64)>,
}

impl CheckReport {
    fn new(name: &str, scope: Scope) -> Self {
        CheckReport {
            name: name.to_string(),
            scope,
            status: Status::Reported,
            statistics: BTreeMap::new(),
            criteria: Vec::new(),
            notes: Vec::new(),
            samples: Vec::new(),
        }
    }

    fn stat(&mut self, name: &str, value: f64, n: usize) {
        self.statistics.insert(name.to_string(), Statistic { value, n });
    }

    /// Adds a criterion on an already-recorded statistic.
    fn require(&mut self, statistic: &str, comparison: Comparison, threshold: f64) {
        let value = self.statistics.get(statistic).map_or(f64::NAN, |s| s.value);
        self.criteria.push(Criterion {
            statistic: statistic.to_string(),
            comparison,
            threshold,
            passed: comparison.holds(value, threshold),
        });
    }

    fn flag(&mut self, note: impl Into<String>) {
        self.status = Status::Flagged;
        self.notes.push(note.into());
    }

    fn finish(mut self) -> Self {
        if self.status != Status::Flagged && !self.criteria.is_empty() {
            self.status = if self.criteria.iter().all(|c| c.passed) {
                Status::Pass
            } else {
                Status::Fail
            };
        }
        self
    }

    pub fn value(&self, statistic: &str) -> Option<f64> {
        self.statistics.get(statistic).map(|s| s.value)
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Thresholds applied by the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Residual tolerance for identities on zero-error spaces.
    pub exact_tol: f64,
    pub cspmi_min_r: f64,
    pub euclid_min_r: f64,
    pub shifted_pmi_min_r: f64,
    /// Minimum pair count for the shifted-PMI correlation.
    pub shifted_pmi_min_count: u64,
    pub self_cooccurrence_min_r: f64,
    pub self_cooccurrence_min_words: usize,
    pub noise_min_bins: usize,
    pub lambda_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            exact_tol: 1e-9,
            cspmi_min_r: 0.5,
            euclid_min_r: 0.3,
            shifted_pmi_min_r: 0.5,
            shifted_pmi_min_count: 50,
            self_cooccurrence_min_r: 0.7,
            self_cooccurrence_min_words: 30,
            noise_min_bins: 5,
            lambda_tol: 1e-8,
        }
    }
}

/// Uniformly samples up to `n` distinct observed pairs `x < y`.
pub fn sample_observed_pairs(stats: &CorpusStats, n: usize, seed: u64) -> Vec<(u32, u32)> {
    let all: Vec<(u32, u32)> = stats
        .table()
        .iter()
        .filter(|&(x, y, _)| x < y)
        .map(|(x, y, _)| (x, y))
        .collect();
    if all.len() <= n {
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, all.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| all[i]).collect()
}

/// Uniformly samples up to `n` distinct pairs `x < y` over `0..n_words`.
pub fn sample_pairs(n_words: usize, n: usize, exclude: &[u32], seed: u64) -> Vec<(u32, u32)> {
    let words: Vec<u32> = (0..n_words as u32).filter(|w| !exclude.contains(w)).collect();
    let m = words.len();
    let total = m * m.saturating_sub(1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, total, n.min(total)).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|mut k| {
            // unrank k into (i, j), i < j
            let mut i = 0;
            while k >= m - 1 - i {
                k -= m - 1 - i;
                i += 1;
            }
            (words[i], words[i + 1 + k])
        })
        .collect()
}

/// Regresses csPMI on `γ′ = 2⟨x, y⟩ − ‖x‖² − ‖y‖²`. On zero-error spaces also
/// checks the mixed-product identity
/// `⟨x − y, y_c − x_c⟩ = csPMI(x, y) − log p(x|x)p(y|y)` to `exact_tol`.
pub fn cspmi_identity_check<T: Real>(
    space: &EmbeddingSpace<T>,
    stats: &impl PairStatistics,
    pairs: &[(u32, u32)],
    th: &Thresholds,
) -> CheckReport {
    let zero_error = space.provenance.is_zero_error();
    let scope = if zero_error { Scope::Exact } else { Scope::Statistical };
    let mut rep = CheckReport::new("cspmi_identity", scope);

    let (mut gammas, mut cspmis) = (Vec::new(), Vec::new());
    let mut residual_max = 0.0f64;
    let (mut n_identity, mut no_self, mut unobserved) = (0usize, 0usize, 0usize);
    for &(x, y) in pairs {
        if x == y {
            continue;
        }
        let Ok(cs) = stats.cspmi(x, y) else {
            unobserved += 1;
            continue;
        };
        let g = crate::analogy::gamma_prime(space, x, y);
        gammas.push(g);
        cspmis.push(cs);
        rep.samples.push((g, cs));
        if zero_error {
            match (stats.log_self_conditional(x), stats.log_self_conditional(y)) {
                (Ok(sx), Ok(sy)) => {
                    let mixed = mixed_difference(space, x, y);
                    residual_max = residual_max.max((mixed - (cs - sx - sy)).abs());
                    n_identity += 1;
                }
                _ => no_self += 1,
            }
        }
    }
    rep.stat("excluded_unobserved", unobserved as f64, pairs.len());
    match linear_fit(&gammas, &cspmis) {
        Ok(fit) => {
            rep.stat("pearson_r", fit.r, fit.n);
            rep.stat("lambda", fit.slope, fit.n);
            rep.stat("alpha", fit.intercept, fit.n);
        }
        Err(e) => rep.notes.push(format!("regression unavailable: {e}")),
    }
    if zero_error {
        rep.stat("excluded_no_self_cooccurrence", no_self as f64, pairs.len());
        if n_identity == 0 {
            rep.flag("no pair has observed self-co-occurrence for both words");
        } else {
            rep.stat("mixed_product_residual_max", residual_max, n_identity);
            rep.require("mixed_product_residual_max", Comparison::AtMost, th.exact_tol);
        }
    } else if gammas.len() < 2 {
        rep.flag("fewer than two observed pairs");
    } else {
        rep.require("pearson_r", Comparison::Above, th.cspmi_min_r);
    }
    rep.finish()
}

/// `⟨x − y, y_c − x_c⟩ = M[x][y] + M[y][x] − M[x][x] − M[y][y]` from the embeddings.
fn mixed_difference<T: Real>(space: &EmbeddingSpace<T>, x: u32, y: u32) -> f64 {
    (space.mixed(x, y) + space.mixed(y, x) - space.mixed(x, x) - space.mixed(y, y)).as_f64()
}

/// Correlates `−csPMI(x, y)` with `‖x − y‖²`. Planted spaces satisfy the
/// distance law exactly and are held to `exact_tol` on the fit residual.
pub fn euclid_cspmi_correlation<T: Real>(
    space: &EmbeddingSpace<T>,
    stats: &impl PairStatistics,
    pairs: &[(u32, u32)],
    normalized: bool,
    th: &Thresholds,
) -> CheckReport {
    let exact = space.provenance == Provenance::Planted && !normalized;
    let name = if normalized {
        "euclid_cspmi_normalized"
    } else {
        "euclid_cspmi_raw"
    };
    let mut rep = CheckReport::new(name, if exact { Scope::Exact } else { Scope::Statistical });
    let owned;
    let space = if normalized {
        owned = space.normalized();
        &owned
    } else {
        space
    };
    let (mut dist, mut neg) = (Vec::new(), Vec::new());
    for &(x, y) in pairs {
        if x == y {
            continue;
        }
        if let Ok(cs) = stats.cspmi(x, y) {
            let d2: T = space
                .word(x)
                .iter()
                .zip(space.word(y))
                .map(|(a, b)| (*a - *b) * (*a - *b))
                .sum();
            dist.push(d2.as_f64());
            neg.push(-cs);
            rep.samples.push((d2.as_f64(), -cs));
        }
    }
    match linear_fit(&dist, &neg) {
        Ok(fit) => {
            rep.stat("pearson_r", fit.r, fit.n);
            rep.stat("slope", fit.slope, fit.n);
            rep.stat("intercept", fit.intercept, fit.n);
            rep.stat("fit_residual_max", fit.max_abs_residual, fit.n);
            if exact {
                rep.require("fit_residual_max", Comparison::AtMost, th.exact_tol);
            } else {
                rep.require("pearson_r", Comparison::AtLeast, th.euclid_min_r);
            }
        }
        Err(e) => rep.flag(format!("fit unavailable: {e}")),
    }
    rep.finish()
}

/// Pearson r between `⟨W[x], C[y]⟩` and `PMI(x, y) − log k` over pairs with `X ≥ min_count`.
pub fn shifted_pmi_correlation<T: Real>(
    space: &EmbeddingSpace<T>,
    stats: &CorpusStats,
    th: &Thresholds,
) -> CheckReport {
    let mut rep = CheckReport::new("shifted_pmi_correlation", Scope::Statistical);
    let shift = f64::from(space.shift_k).ln();
    let (mut dots, mut targets) = (Vec::new(), Vec::new());
    for (x, y, c) in stats.table().iter() {
        if c >= th.shifted_pmi_min_count {
            let pmi = stats.pmi(x, y).expect("stored pair");
            dots.push(space.mixed(x, y).as_f64());
            targets.push(pmi - shift);
        }
    }
    rep.samples = targets.iter().copied().zip(dots.iter().copied()).collect();
    match pearson_r(&dots, &targets) {
        Ok(r) => {
            rep.stat("pearson_r", r, dots.len());
            rep.require("pearson_r", Comparison::AtLeast, th.shifted_pmi_min_r);
        }
        Err(e) => rep.flag(format!("correlation unavailable: {e}")),
    }
    rep.stat("min_count", th.shifted_pmi_min_count as f64, dots.len());
    rep.finish()
}

/// Checks that residual variance in the most frequent bin is below that of the
/// least frequent bin, over bins with at least [`MIN_BIN_PAIRS`] pairs.
pub fn noise_monotonicity_check(noise: &NoiseReport, th: &Thresholds) -> CheckReport {
    let mut rep = CheckReport::new("noise_variance_by_frequency", Scope::Statistical);
    let usable: Vec<_> = noise.bins.iter().filter(|b| !b.low_sample).collect();
    rep.stat("usable_bins", usable.len() as f64, noise.bins.len());
    rep.stat("max_abs_residual", noise.max_abs_residual, noise.samples.len());
    rep.samples = noise.samples.iter().map(|&(f, r)| (f as f64, r)).collect();
    for (i, b) in noise.bins.iter().enumerate() {
        rep.stat(&format!("bin{i:02}_variance"), b.variance, b.n);
        rep.stat(&format!("bin{i:02}_mean"), b.mean, b.n);
    }
    if usable.len() < th.noise_min_bins {
        rep.flag(format!(
            "only {} bins have at least {MIN_BIN_PAIRS} pairs; {} required",
            usable.len(),
            th.noise_min_bins
        ));
        return rep.finish();
    }
    let (bottom, top) = (usable[0], usable[usable.len() - 1]);
    rep.stat("bottom_bin_variance", bottom.variance, bottom.n);
    rep.stat("top_bin_variance", top.variance, top.n);
    rep.stat("top_minus_bottom_variance", top.variance - bottom.variance, top.n + bottom.n);
    rep.require("top_minus_bottom_variance", Comparison::Below, 0.0);
    rep.finish()
}

/// Per-quadruple deviation between conditional ratio profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenningtonRow {
    pub quadruple: [u32; 4],
    pub support: usize,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub solved: Option<bool>,
}

/// Compares `log[p(w|x1)/p(w|y1)]` against `log[p(w|x2)/p(w|y2)]` over the
/// words `w` where all four conditionals are positive.
pub fn pennington_rows(
    stats: &CorpusStats,
    quadruples: &[[u32; 4]],
    solved: Option<&[bool]>,
) -> (Vec<PenningtonRow>, usize) {
    let mut rows = Vec::new();
    let mut excluded = 0;
    for (i, &[x1, y1, x2, y2]) in quadruples.iter().enumerate() {
        let p1 = conditional_ratio_profile(stats, x1, y1);
        let p2 = conditional_ratio_profile(stats, x2, y2);
        let devs: Vec<f64> = p1
            .support
            .iter()
            .zip(&p1.values)
            .filter_map(|(&w, &v)| p2.get(w).map(|u| (v - u).abs()))
            .collect();
        if devs.is_empty() {
            excluded += 1;
            continue;
        }
        rows.push(PenningtonRow {
            quadruple: [x1, y1, x2, y2],
            support: devs.len(),
            max_deviation: devs.iter().copied().fold(0.0, f64::max),
            mean_deviation: mean(&devs).unwrap(),
            solved: solved.map(|s| s[i]),
        });
    }
    (rows, excluded)
}

pub fn pennington_check(
    stats: &CorpusStats,
    quadruples: &[[u32; 4]],
    solved: Option<&[bool]>,
) -> CheckReport {
    let mut rep = CheckReport::new("pennington_ratio", Scope::Statistical);
    let (rows, excluded) = pennington_rows(stats, quadruples, solved);
    rep.stat("excluded_empty_support", excluded as f64, quadruples.len());
    if rows.is_empty() {
        rep.flag("no quadruple has a common conditional support");
        return rep.finish();
    }
    let means: Vec<f64> = rows.iter().map(|r| r.mean_deviation).collect();
    let maxes: Vec<f64> = rows.iter().map(|r| r.max_deviation).collect();
    rep.stat("mean_deviation", mean(&means).unwrap(), rows.len());
    rep.stat("mean_max_deviation", mean(&maxes).unwrap(), rows.len());
    let solved_rows: Vec<&PenningtonRow> = rows.iter().filter(|r| r.solved == Some(true)).collect();
    let unsolved_rows: Vec<&PenningtonRow> = rows.iter().filter(|r| r.solved == Some(false)).collect();
    for (label, group) in [("solved", &solved_rows), ("unsolved", &unsolved_rows)] {
        if !group.is_empty() {
            let m: Vec<f64> = group.iter().map(|r| r.mean_deviation).collect();
            rep.stat(&format!("mean_deviation_{label}"), mean(&m).unwrap(), m.len());
        }
    }
    rep.samples = rows
        .iter()
        .map(|r| (r.mean_deviation, r.solved.map_or(f64::NAN, |s| f64::from(u8::from(s)))))
        .collect();
    rep.finish()
}

/// `(csPMI(z, x), csPMI(z, y))` for `z = x + y`, evaluated through mixed
/// products and the planted probability assignment.
pub fn sum_commonality(planted: &PlantedSpace, x: u32, y: u32) -> (f64, f64) {
    let space = &planted.space;
    let z: Vec<f64> = space.word(x).iter().zip(space.word(y)).map(|(a, b)| a + b).collect();
    let zc: Vec<f64> = space.context(x).iter().zip(space.context(y)).map(|(a, b)| a + b).collect();
    let log_k = f64::from(space.shift_k).ln();
    let log_pz = planted.log_p_of_vector(&z);
    let cs = |w: u32| {
        let pmi = dot(space.word(w), &zc) + log_k;
        2.0 * pmi + planted.log_marginal(w) + log_pz
    };
    (cs(x), cs(y))
}

/// Vector addition as an analogy over `{(x, z), (∅, y)}`: checks
/// `csPMI(x, z) = log p(y) + δ` with `δ = 2 log k + log p(∅)`, and that the sum
/// shares more with the rarer word.
pub fn null_word_addition_check(
    planted: &PlantedSpace,
    pairs: &[(u32, u32)],
    th: &Thresholds,
) -> Result<CheckReport> {
    let null = planted
        .null_word
        .ok_or_else(|| Error::InvalidArgument("planted space has no null word".into()))?;
    let mut rep = CheckReport::new("null_word_addition", Scope::Exact);
    let log_k = f64::from(planted.space.shift_k).ln();
    let delta = 2.0 * log_k + planted.log_marginal(null);
    rep.stat("delta", delta, 1);

    let (mut residual_max, mut n) = (0.0f64, 0usize);
    let (mut ordered, mut violations) = (0usize, 0usize);
    for &(x, y) in pairs {
        if x == null || y == null {
            continue;
        }
        let (c_zx, c_zy) = sum_commonality(planted, x, y);
        // csPMI(x, z) equals csPMI(z, x) and should equal log p(y) + δ
        residual_max = residual_max.max((c_zx - (planted.log_marginal(y) + delta)).abs());
        residual_max = residual_max.max((c_zy - (planted.log_marginal(x) + delta)).abs());
        n += 1;
        let (lx, ly) = (planted.log_marginal(x), planted.log_marginal(y));
        if lx != ly {
            ordered += 1;
            let rarer_wins = if lx > ly { c_zy > c_zx } else { c_zx > c_zy };
            if !rarer_wins {
                violations += 1;
            }
        }
        rep.samples.push((lx - ly, c_zy - c_zx));
    }
    if n == 0 {
        rep.flag("no usable pairs");
        return Ok(rep.finish());
    }
    rep.stat("addition_identity_residual_max", residual_max, n);
    rep.stat("rarer_word_violations", violations as f64, ordered);
    rep.require("addition_identity_residual_max", Comparison::AtMost, th.exact_tol);
    rep.require("rarer_word_violations", Comparison::AtMost, 0.0);
    Ok(rep.finish())
}

/// One row of the per-category analogy statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyStatsRow {
    pub category: String,
    pub observed_pairs: usize,
    pub total_pairs: usize,
    pub mean_cspmi: Option<f64>,
    pub mean_pmi: Option<f64>,
    pub median_frequency: Option<f64>,
    pub cspmi_variance: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyReport {
    pub rows: Vec<AnalogyStatsRow>,
    /// Pearson r between accuracy and csPMI variance across categories.
    pub accuracy_variance_r: Option<f64>,
    pub flagged: Vec<String>,
}

pub fn analogy_report<T: Real>(
    space: &EmbeddingSpace<T>,
    vocab: &Vocabulary,
    stats: &CorpusStats,
    set: &AnalogySet,
    opts: EvalOptions,
) -> Result<AnalogyReport> {
    let results = evaluate_analogy_set(space, vocab, set, opts)?;
    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for (cat, res) in set.categories.iter().zip(results) {
        let (mut cs, mut pm, mut freq) = (Vec::new(), Vec::new(), Vec::new());
        for (x, y) in &cat.pairs {
            let (Some(x), Some(y)) = (vocab.id(x), vocab.id(y)) else {
                continue;
            };
            if let (Ok(c), Ok(p)) = (stats.cspmi(x, y), stats.pmi(x, y)) {
                cs.push(c);
                pm.push(p);
                freq.push(stats.count(x, y) as f64);
            }
        }
        if cs.is_empty() {
            flagged.push(cat.name.clone());
        }
        rows.push(AnalogyStatsRow {
            category: cat.name.clone(),
            observed_pairs: cs.len(),
            total_pairs: cat.pairs.len(),
            mean_cspmi: mean(&cs),
            mean_pmi: mean(&pm),
            median_frequency: median(&freq),
            cspmi_variance: variance(&cs),
            accuracy: res.accuracy,
        });
    }
    let (acc, var): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| Some((r.accuracy?, r.cspmi_variance?)))
        .unzip();
    let accuracy_variance_r = pearson_r(&acc, &var).ok();
    Ok(AnalogyReport {
        rows,
        accuracy_variance_r,
        flagged,
    })
}

/// Wraps an [`AnalogyReport`] as a check for the suite output.
pub fn analogy_report_check(report: &AnalogyReport) -> CheckReport {
    let mut rep = CheckReport::new("analogy_report", Scope::Statistical);
    let n = report.rows.len();
    if let Some(r) = report.accuracy_variance_r {
        rep.stat("accuracy_variance_r", r, n);
    }
    for row in &report.rows {
        let put = |rep: &mut CheckReport, key: &str, v: Option<f64>| {
            if let Some(v) = v {
                rep.stat(&format!("{}.{key}", row.category), v, row.observed_pairs);
            }
        };
        put(&mut rep, "mean_cspmi", row.mean_cspmi);
        put(&mut rep, "mean_pmi", row.mean_pmi);
        put(&mut rep, "median_frequency", row.median_frequency);
        put(&mut rep, "cspmi_variance", row.cspmi_variance);
        put(&mut rep, "accuracy", row.accuracy);
    }
    for f in &report.flagged {
        rep.notes.push(format!("category '{f}' has no observed pairs"));
    }
    rep.samples = report
        .rows
        .iter()
        .filter_map(|r| Some((r.cspmi_variance?, r.accuracy?)))
        .collect();
    rep.finish()
}

/// Pearson r between `p(w)` and nonzero `p(w, w)`, plus the through-origin scale `ρ`.
pub fn zipf_self_cooccurrence_check(stats: &CorpusStats, th: &Thresholds) -> CheckReport {
    let mut rep = CheckReport::new("self_cooccurrence", Scope::Statistical);
    let (mut pw, mut pww) = (Vec::new(), Vec::new());
    for w in 0..stats.n_words() as u32 {
        if stats.count(w, w) > 0 {
            pw.push(stats.p_marginal(w));
            pww.push(stats.p_joint(w, w));
        }
    }
    rep.samples = pw.iter().copied().zip(pww.iter().copied()).collect();
    rep.stat("words_with_self_cooccurrence", pw.len() as f64, stats.n_words());
    if pw.len() < th.self_cooccurrence_min_words {
        rep.flag(format!(
            "insufficient sample: {} words with self-co-occurrence, {} required",
            pw.len(),
            th.self_cooccurrence_min_words
        ));
        return rep.finish();
    }
    match pearson_r(&pw, &pww) {
        Ok(r) => {
            rep.stat("pearson_r", r, pw.len());
            rep.require("pearson_r", Comparison::AtLeast, th.self_cooccurrence_min_r);
        }
        Err(e) => rep.flag(format!("correlation unavailable: {e}")),
    }
    if let Ok(rho) = fit_through_origin(&pw, &pww) {
        rep.stat("rho", rho, pw.len());
    }
    rep.finish()
}

/// Fits `C[w] ≈ λ_w W[w]` per word and one global `λ`.
pub fn lambda_estimate<T: Real>(space: &EmbeddingSpace<T>, th: &Thresholds) -> CheckReport {
    let planted = space.provenance == Provenance::Planted;
    let mut rep = CheckReport::new(
        "lambda_estimate",
        if planted { Scope::Exact } else { Scope::Statistical },
    );
    let mut per_word = Vec::new();
    let (mut cw, mut ww) = (0.0f64, 0.0f64);
    let mut excluded = 0usize;
    for w in 0..space.n_words() as u32 {
        let nw = sq_norm(space.word(w)).as_f64();
        if nw == 0.0 {
            excluded += 1;
            continue;
        }
        let c = dot(space.context(w), space.word(w)).as_f64();
        per_word.push(c / nw);
        cw += c;
        ww += nw;
    }
    rep.stat("excluded_zero_norm", excluded as f64, space.n_words());
    if per_word.is_empty() {
        rep.flag("every word vector has zero norm");
        return rep.finish();
    }
    let lambda = cw / ww;
    let mut resid = 0.0f64;
    for w in 0..space.n_words() as u32 {
        for (c, v) in space.context(w).iter().zip(space.word(w)) {
            let e = c.as_f64() - lambda * v.as_f64();
            resid += e * e;
        }
    }
    let rel = resid.sqrt() / ww.sqrt();
    let n = per_word.len();
    rep.stat("lambda", lambda, n);
    rep.stat("lambda_word_mean", mean(&per_word).unwrap(), n);
    rep.stat("lambda_word_std", variance(&per_word).unwrap().sqrt(), n);
    rep.stat("relative_residual", rel, n);
    rep.samples = per_word.iter().enumerate().map(|(i, &l)| (i as f64, l)).collect();
    if planted {
        rep.require("relative_residual", Comparison::AtMost, th.lambda_tol);
    } else if rel > th.lambda_tol {
        rep.notes
            .push("context vectors are not a single scalar multiple of word vectors".into());
    }
    rep.finish()
}

/// Parallelogram and coplanarity conditions on planted quadruples and on
/// random negative-control quadruples drawn from filler words.
pub fn planted_geometry_check(
    planted: &PlantedSpace,
    n_controls: usize,
    seed: u64,
) -> CheckReport {
    use crate::analogy::{coplanarity_rank, parallelogram_residual, DEFAULT_RANK_TOL};
    let mut rep = CheckReport::new("planted_geometry", Scope::Exact);
    let space = &planted.space;
    let solver = Solver::new(space, Metric::Euclidean).with_top_n(1);
    let (mut side_max, mut cross_max) = (0.0f64, 0.0f64);
    let (mut rank_max, mut solved, mut attempted) = (0usize, 0usize, 0usize);
    for &[x1, y1, x2, y2] in &planted.quadruples {
        let (s, c) = parallelogram_residual(space, x1, y1, x2, y2);
        side_max = side_max.max(s);
        cross_max = cross_max.max(c);
        rank_max = rank_max.max(coplanarity_rank(space, [x1, y1, x2, y2], DEFAULT_RANK_TOL));
        for [a, x, y, gold] in [[x1, x2, y2, y1], [x2, x1, y1, y2], [y1, y2, x2, x1], [y2, y1, x1, x2]] {
            attempted += 1;
            if solver.solve_ids(a, x, y, None).map(|r| r.predicted == gold).unwrap_or(false) {
                solved += 1;
            }
        }
    }
    let nq = planted.quadruples.len();
    rep.stat("side_residual_max", side_max, nq);
    rep.stat("cross_residual_max", cross_max, nq);
    rep.stat("planted_rank_max", rank_max as f64, nq);
    rep.stat("rotation_accuracy", solved as f64 / attempted.max(1) as f64, attempted);

    let planted_words: Vec<u32> = planted.quadruples.iter().flatten().copied().collect();
    let controls: Vec<u32> = (0..space.n_words() as u32)
        .filter(|w| !planted_words.contains(w) && Some(*w) != planted.null_word)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut full_rank, mut n_ctrl) = (0usize, 0usize);
    if controls.len() >= 4 {
        for _ in 0..n_controls {
            let pick = index::sample(&mut rng, controls.len(), 4).into_vec();
            let q = [controls[pick[0]], controls[pick[1]], controls[pick[2]], controls[pick[3]]];
            n_ctrl += 1;
            if coplanarity_rank(space, q, DEFAULT_RANK_TOL) == 3 {
                full_rank += 1;
            }
        }
    }
    let frac = if n_ctrl == 0 { f64::NAN } else { full_rank as f64 / n_ctrl as f64 };
    rep.stat("control_rank3_fraction", frac, n_ctrl);

    rep.require("side_residual_max", Comparison::AtMost, 1e-6);
    rep.require("cross_residual_max", Comparison::AtMost, 1e-6);
    rep.require("planted_rank_max", Comparison::AtMost, 2.0);
    rep.require("rotation_accuracy", Comparison::AtLeast, 1.0);
    rep.require("control_rank3_fraction", Comparison::AtLeast, 0.95);
    rep.finish()
}

/// Orders reports by check name for deterministic output.
pub fn sort_reports(reports: &mut [CheckReport]) {
    reports.sort_by(|a, b| a.name.cmp(&b.name));
}
