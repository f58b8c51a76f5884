//! Probabilities, PMI, csPMI and the regression helpers used by the checks.
//!
//! Probabilities are normalized per ordered window event: `p(x, y) = X[x][y] / T`
//! and `p(x) = Σ_y X[x][y] / T`. All logarithms are natural.

use std::fmt;

use crate::corpus::CooccurrenceTable;
use crate::error::{Error, Result};

/// A pair with zero co-occurrence count. Returned instead of a numeric sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unobserved {
    pub x: u32,
    pub y: u32,
}

impl fmt::Display for Unobserved {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pair ({}, {}) was never observed", self.x, self.y)
    }
}

impl std::error::Error for Unobserved {}

pub type Observed<T> = std::result::Result<T, Unobserved>;

/// Source of log-probabilities and PMI values for word pairs.
///
/// Implemented by [`CorpusStats`] for counted corpora and by planted spaces,
/// whose probabilities are assigned analytically.
pub trait PairStatistics {
    fn n_words(&self) -> usize;

    /// `log p(x)`.
    fn log_marginal(&self, x: u32) -> f64;

    /// `log p(x, y)`.
    fn log_joint(&self, x: u32, y: u32) -> Observed<f64>;

    fn pmi(&self, x: u32, y: u32) -> Observed<f64> {
        Ok(self.log_joint(x, y)? - self.log_marginal(x) - self.log_marginal(y))
    }

    /// `PMI(x, y) + log p(x, y)`.
    fn cspmi(&self, x: u32, y: u32) -> Observed<f64> {
        Ok(self.pmi(x, y)? + self.log_joint(x, y)?)
    }

    /// `log p(x | x)`, the log-probability of a word appearing in its own context.
    fn log_self_conditional(&self, x: u32) -> Observed<f64> {
        Ok(self.log_joint(x, x)? - self.log_marginal(x))
    }

    /// Whether the pair has a nonzero count (always true for analytic sources).
    fn is_observed(&self, x: u32, y: u32) -> bool {
        self.log_joint(x, y).is_ok()
    }
}

/// Immutable view of a co-occurrence table as probabilities.
#[derive(Debug, Clone)]
pub struct CorpusStats {
    table: CooccurrenceTable,
    row_sums: Vec<u64>,
    log_total: f64,
}

impl CorpusStats {
    pub fn new(table: CooccurrenceTable) -> Self {
        let row_sums = (0..table.n_words() as u32).map(|x| table.row_sum(x)).collect();
        let log_total = (table.total() as f64).ln();
        CorpusStats {
            table,
            row_sums,
            log_total,
        }
    }

    pub fn table(&self) -> &CooccurrenceTable {
        &self.table
    }

    pub fn count(&self, x: u32, y: u32) -> u64 {
        self.table.get(x, y)
    }

    pub fn p_joint(&self, x: u32, y: u32) -> f64 {
        self.table.get(x, y) as f64 / self.table.total() as f64
    }

    pub fn p_marginal(&self, x: u32) -> f64 {
        self.row_sums[x as usize] as f64 / self.table.total() as f64
    }

    /// `p(w | x)`: row-normalized co-occurrence.
    pub fn p_conditional(&self, w: u32, x: u32) -> f64 {
        match self.row_sums[x as usize] {
            0 => 0.0,
            s => self.table.get(x, w) as f64 / s as f64,
        }
    }
}

impl PairStatistics for CorpusStats {
    fn n_words(&self) -> usize {
        self.table.n_words()
    }

    fn log_marginal(&self, x: u32) -> f64 {
        (self.row_sums[x as usize] as f64).ln() - self.log_total
    }

    fn log_joint(&self, x: u32, y: u32) -> Observed<f64> {
        match self.table.get(x, y) {
            0 => Err(Unobserved { x, y }),
            c => Ok((c as f64).ln() - self.log_total),
        }
    }

    fn is_observed(&self, x: u32, y: u32) -> bool {
        self.table.get(x, y) > 0
    }
}

pub fn pmi(stats: &impl PairStatistics, x: u32, y: u32) -> Observed<f64> {
    stats.pmi(x, y)
}

pub fn cspmi(stats: &impl PairStatistics, x: u32, y: u32) -> Observed<f64> {
    stats.cspmi(x, y)
}

/// Sparse symmetric matrix in row-compressed form. Absent entries are structurally missing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, x: u32, y: u32) -> Option<f64> {
        let (a, b) = (self.row_ptr[x as usize], self.row_ptr[x as usize + 1]);
        self.cols[a..b]
            .binary_search(&y)
            .ok()
            .map(|i| self.values[a + i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.n).flat_map(move |x| {
            (self.row_ptr[x]..self.row_ptr[x + 1]).map(move |i| (x as u32, self.cols[i], self.values[i]))
        })
    }
}

/// `M[x][y] = PMI(x, y) − log k` on every observed pair.
pub fn shifted_pmi_matrix(stats: &CorpusStats, k: u32) -> Result<SparseMatrix> {
    if k < 1 {
        return Err(Error::InvalidArgument("shift k must be at least 1".into()));
    }
    let shift = f64::from(k).ln();
    let table = stats.table();
    let n = table.n_words();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(table.nnz());
    let mut values = Vec::with_capacity(table.nnz());
    row_ptr.push(0);
    for x in 0..n as u32 {
        for (y, _) in table.row(x) {
            cols.push(y);
            values.push(stats.pmi(x, y).expect("stored pairs are observed") - shift);
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseMatrix {
        n,
        row_ptr,
        cols,
        values,
    })
}

/// Values of `log[p(w|x) / p(w|y)]` over the words where both conditionals are positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatioProfile {
    pub support: Vec<u32>,
    pub values: Vec<f64>,
}

impl RatioProfile {
    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn get(&self, w: u32) -> Option<f64> {
        self.support.binary_search(&w).ok().map(|i| self.values[i])
    }
}

pub fn conditional_ratio_profile(stats: &CorpusStats, x: u32, y: u32) -> RatioProfile {
    let table = stats.table();
    let (sx, sy) = (
        stats.row_sums[x as usize] as f64,
        stats.row_sums[y as usize] as f64,
    );
    let mut out = RatioProfile::default();
    if sx == 0.0 || sy == 0.0 {
        return out;
    }
    let mut rx = table.row(x).peekable();
    let mut ry = table.row(y).peekable();
    while let (Some(&(wx, cx)), Some(&(wy, cy))) = (rx.peek(), ry.peek()) {
        match wx.cmp(&wy) {
            std::cmp::Ordering::Less => {
                rx.next();
            }
            std::cmp::Ordering::Greater => {
                ry.next();
            }
            std::cmp::Ordering::Equal => {
                out.support.push(wx);
                out.values
                    .push(((cx as f64) / sx).ln() - ((cy as f64) / sy).ln());
                rx.next();
                ry.next();
            }
        }
    }
    out
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance in pearson_r input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ordinary least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub max_abs_residual: f64,
    pub n: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let r = pearson_r(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_abs_residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    Ok(LinearFit {
        slope,
        intercept,
        r,
        max_abs_residual,
        n: xs.len(),
    })
}

/// Least-squares slope of `y ≈ c·x` through the origin.
pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if xs.len() != ys.len() || sxx == 0.0 {
        return Err(Error::Degenerate("cannot fit through origin".into()));
    }
    Ok(xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sxx)
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population variance.
pub fn variance(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}
