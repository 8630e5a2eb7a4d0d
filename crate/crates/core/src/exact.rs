//! Exact laws of linear rank statistics under the null hypothesis and under
//! Lehmann alternatives `(F, F^a)`, exact-size randomized tests, and most
//! powerful / locally most powerful rank tests.
//!
//! Under `(F, F^a)` the law of the ranks is the same for every continuous
//! `F`, so all probabilities here are computed for `(U, U^a)`. The probability
//! of a rank set `r` is
//!
//! ```text
//! P_a(r) = m! n! / N! · a^n · Π_{k=1}^{N} k / (k + (a - 1) e_k(r)),
//! ```
//!
//! with `e_k(r) = #{j : r_j ≤ k}`.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ranks::{
    choose, score_vector, statistic_unchecked, RankSet, RankSetEnumerator, SampleSizes, ScoreKind,
    ScoreVector, DEFAULT_ENUMERATION_CAP,
};
use crate::special::ln_gamma;

/// Absolute tolerance used to identify equal statistic values.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Integer-score dynamic programs are refused beyond this many cell updates.
const DP_WORK_LIMIT: f64 = 2e10;

/// Wilcoxon null laws beyond this pooled size use the q-binomial recursion.
const WILCOXON_DP_MAX_N: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactConfig {
    /// Maximum number of rank sets any enumeration may visit.
    pub cap: u64,
    /// Subsets per parallel work unit. Results are bit-stable for a fixed
    /// chunk size regardless of the number of threads.
    pub chunk_size: u64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig { cap: DEFAULT_ENUMERATION_CAP, chunk_size: 1 << 16 }
    }
}

/// Integer counts behind a probability mass function: `probs[i] = counts[i] / total`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCounts {
    pub counts: Vec<u128>,
    pub total: u128,
}

/// Finite probability mass function on ascending, distinct support points.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    support: Vec<f64>,
    probs: Vec<f64>,
    exact: Option<ExactCounts>,
}

impl Pmf {
    fn from_pairs(pairs: Vec<(f64, f64)>) -> Pmf {
        let (support, probs) = pairs.into_iter().filter(|&(_, p)| p > 0.0).unzip();
        Pmf { support, probs, exact: None }
    }

    fn from_counts(pairs: Vec<(f64, u128)>, total: u128) -> Pmf {
        let pairs: Vec<_> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        let support = pairs.iter().map(|p| p.0).collect();
        let probs = pairs.iter().map(|p| (p.1 as f64) / (total as f64)).collect();
        let counts = pairs.iter().map(|p| p.1).collect();
        Pmf { support, probs, exact: Some(ExactCounts { counts, total }) }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Integer counts, when the law was computed in integer arithmetic.
    pub fn exact(&self) -> Option<&ExactCounts> {
        self.exact.as_ref()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.probs)
    }

    /// `P(T = t)` with `t` matched to the support within tolerance.
    pub fn prob_eq(&self, t: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|(s, _)| same_value(**s, t))
            .map(|(_, p)| *p)
            .sum()
    }

    /// `P(T > t)`, excluding support points equal to `t` within tolerance.
    pub fn prob_gt(&self, t: f64) -> f64 {
        let tail: Vec<f64> = self
            .support
            .iter()
            .zip(&self.probs)
            .filter(|(s, _)| **s > t && !same_value(**s, t))
            .map(|(_, p)| *p)
            .collect();
        pairwise_sum(&tail)
    }

    /// `E[φ(T)]` for a rejection function given by a randomized test.
    pub fn rejection_probability(&self, test: &RandomizedTest) -> f64 {
        let parts: Vec<f64> =
            self.support.iter().zip(&self.probs).map(|(&s, &p)| p * test.decision(s)).collect();
        pairwise_sum(&parts)
    }
}

#[inline]
fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= SUPPORT_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Pairwise (cascade) summation.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Probability of the Y-rank set `r` under `(U, U^a)`.
///
/// Evaluated directly for `N ≤ 50` and in log space above that.
pub fn rankset_prob_lehmann(r: &RankSet, a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("Lehmann exponent must be positive, got {a}")));
    }
    Ok(lehmann_prob(r.ranks(), r.sizes(), a))
}

pub(crate) fn lehmann_prob(ranks: &[u32], sizes: SampleSizes, a: f64) -> f64 {
    let (m, n, big_n) = (sizes.m(), sizes.n(), sizes.total());
    if big_n <= 50 {
        let mut p = 1.0;
        // m! n! / N! as a running product of ratios.
        for i in 1..=n {
            p *= i as f64 / (m + i) as f64;
        }
        p *= a.powi(n as i32);
        let mut e = 0usize;
        let mut next = 0usize;
        for k in 1..=big_n {
            if next < n && ranks[next] as usize == k {
                e += 1;
                next += 1;
            }
            p *= k as f64 / (k as f64 + (a - 1.0) * e as f64);
        }
        p
    } else {
        let mut lp = ln_gamma(m as f64 + 1.0) + ln_gamma(n as f64 + 1.0)
            - ln_gamma(big_n as f64 + 1.0)
            + n as f64 * a.ln();
        let mut e = 0usize;
        let mut next = 0usize;
        for k in 1..=big_n {
            if next < n && ranks[next] as usize == k {
                e += 1;
                next += 1;
            }
            lp += (k as f64).ln() - (k as f64 + (a - 1.0) * e as f64).ln();
        }
        lp.exp()
    }
}

fn check_scores(scores: &ScoreVector, sizes: SampleSizes) -> Result<()> {
    if scores.len() != sizes.total() {
        return Err(Error::LengthMismatch { expected: sizes.total(), actual: scores.len() });
    }
    Ok(())
}

/// Runs `per_chunk` over consecutive index ranges of the enumeration in
/// parallel and returns the per-chunk results in chunk order.
fn map_chunks<T, F>(en: &RankSetEnumerator, chunk_size: u64, per_chunk: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    let chunk = chunk_size.max(1);
    let chunks = en.count().div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|c| per_chunk(c * chunk, ((c + 1) * chunk).min(en.count())))
        .collect()
}

/// Aggregates `weight(r)` by statistic value over all rank sets, merging
/// values that agree within [`SUPPORT_TOL`].
fn aggregate_by_statistic<W>(
    scores: &ScoreVector,
    sizes: SampleSizes,
    cfg: &ExactConfig,
    weight: W,
) -> Result<Vec<(f64, f64)>>
where
    W: Fn(&[u32]) -> f64 + Sync,
{
    let en = RankSetEnumerator::new(sizes, cfg.cap)?;
    let values = scores.values();
    let chunk_lists = map_chunks(&en, cfg.chunk_size, |start, end| {
        let mut local: Vec<(f64, f64)> = Vec::with_capacity((end - start) as usize);
        en.for_each_in_range(start, end, |r| {
            local.push((statistic_unchecked(values, r), weight(r)));
        });
        local.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (v, w) in local {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        merged
    });
    let mut all: Vec<(f64, f64)> = chunk_lists.into_iter().flatten().collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (v, w) in all {
        match out.last_mut() {
            Some(last) if same_value(last.0, v) => last.1 += w,
            _ => out.push((v, w)),
        }
    }
    Ok(out)
}

/// Null law by enumerating every rank set.
pub fn null_pmf_enumerated(scores: &ScoreVector, sizes: SampleSizes, cfg: &ExactConfig) -> Result<Pmf> {
    check_scores(scores, sizes)?;
    let total = sizes.subset_count().expect("within cap implies representable");
    if scores.as_integers().is_some() {
        // Integer statistics are exact in f64; count occurrences directly.
        let pairs = aggregate_by_statistic(scores, sizes, cfg, |_| 1.0)?;
        let pairs = pairs.into_iter().map(|(v, c)| (v, c as u128)).collect();
        return Ok(Pmf::from_counts(pairs, total));
    }
    let p = 1.0 / total as f64;
    let pairs = aggregate_by_statistic(scores, sizes, cfg, |_| p)?;
    Ok(Pmf::from_pairs(pairs))
}

/// Null law of integer scores by dynamic programming over
/// (items taken, score sum).
pub fn null_pmf_dp(scores: &ScoreVector, sizes: SampleSizes) -> Result<Pmf> {
    check_scores(scores, sizes)?;
    let ints = scores
        .as_integers()
        .ok_or_else(|| Error::InvalidParameter("dynamic programming needs integer scores".into()))?;
    let table = IntTable::new(&ints, sizes)?;
    let big_n = sizes.total() as u64;
    if choose(big_n, big_n / 2).is_some() {
        let rows = table.count_subsets::<u128>(&ints, sizes.n());
        let total = sizes.subset_count().expect("checked above");
        let pairs = rows
            .into_iter()
            .enumerate()
            .map(|(s, c)| (table.value_of(s), c))
            .collect();
        Ok(Pmf::from_counts(pairs, total))
    } else {
        let rows = table.count_subsets::<f64>(&ints, sizes.n());
        let total: f64 = pairwise_sum(&rows);
        let pairs = rows
            .into_iter()
            .enumerate()
            .map(|(s, c)| (table.value_of(s), c / total))
            .collect();
        Ok(Pmf::from_pairs(pairs))
    }
}

/// Layout of a (count, shifted sum) table for integer scores.
struct IntTable {
    min: i64,
    n: usize,
    width: usize,
}

trait Count: Copy + Default + std::ops::AddAssign + Send {}
impl Count for u128 {}
impl Count for f64 {}

impl IntTable {
    fn new(ints: &[i64], sizes: SampleSizes) -> Result<Self> {
        let n = sizes.n();
        let min = *ints.iter().min().expect("N >= 2");
        let mut sorted: Vec<i64> = ints.iter().map(|v| v - min).collect();
        sorted.sort_unstable();
        let max_sum: i64 = sorted.iter().rev().take(n).sum();
        let width = max_sum as usize + 1;
        let work = sizes.total() as f64 * (n as f64 + 1.0) * width as f64;
        if work > DP_WORK_LIMIT {
            return Err(Error::CapExceeded {
                count: format!("{work:.3e} table updates"),
                cap: DP_WORK_LIMIT as u64,
            });
        }
        Ok(IntTable { min, n, width })
    }

    fn value_of(&self, shifted: usize) -> f64 {
        (shifted as i64 + self.n as i64 * self.min) as f64
    }

    /// Number of `n`-subsets with each shifted score sum.
    fn count_subsets<C: Count>(&self, ints: &[i64], n: usize) -> Vec<C>
    where
        C: From<u8>,
    {
        let w = self.width;
        let mut table = vec![C::default(); (n + 1) * w];
        table[0] = C::from(1u8);
        for (k, &v) in ints.iter().enumerate() {
            let v = (v - self.min) as usize;
            let top = n.min(k + 1);
            for j in (1..=top).rev() {
                let (lower, upper) = table.split_at_mut(j * w);
                let src = &lower[(j - 1) * w..j * w];
                let dst = &mut upper[..w];
                for s in 0..w - v {
                    let c = src[s];
                    dst[s + v] += c;
                }
            }
        }
        table.split_off(n * w)
    }
}

/// Null law of the Wilcoxon rank sum via the Gaussian binomial
/// coefficient `[N choose n]_q`, in normalized floating point. Only the
/// lower half is computed; the law is symmetric.
pub fn wilcoxon_null_qbinomial(sizes: SampleSizes) -> Pmf {
    let (m, n) = (sizes.m(), sizes.n());
    let top = m * n;
    let half = top / 2;
    let mut c = vec![0.0f64; half + 1];
    c[0] = 1.0;
    for i in 1..=n {
        let up = m + i;
        // multiply by (1 - q^{m+i})
        for s in (up..=half).rev() {
            c[s] -= c[s - up];
        }
        // divide by (1 - q^i)
        for s in i..=half {
            c[s] += c[s - i];
        }
        let scale = i as f64 / up as f64;
        for v in c.iter_mut() {
            *v *= scale;
        }
    }
    let mut probs = vec![0.0; top + 1];
    for u in 0..=top {
        probs[u] = c[u.min(top - u)].max(0.0);
    }
    let offset = (n * (n + 1) / 2) as f64;
    let pairs = probs.into_iter().enumerate().map(|(u, p)| (u as f64 + offset, p)).collect();
    Pmf::from_pairs(pairs)
}

/// Exact null law of `T = Σ k(R_j)`.
///
/// Integer scores use dynamic programming (no enumeration cap); other scores
/// are enumerated subject to the cap in `cfg`.
pub fn null_pmf_with(scores: &ScoreVector, sizes: SampleSizes, cfg: &ExactConfig) -> Result<Pmf> {
    check_scores(scores, sizes)?;
    if scores.kind() == ScoreKind::Wilcoxon && sizes.total() > WILCOXON_DP_MAX_N {
        return Ok(wilcoxon_null_qbinomial(sizes));
    }
    if scores.as_integers().is_some() {
        return null_pmf_dp(scores, sizes);
    }
    null_pmf_enumerated(scores, sizes, cfg)
}

pub fn null_pmf(scores: &ScoreVector, sizes: SampleSizes) -> Result<Pmf> {
    null_pmf_with(scores, sizes, &ExactConfig::default())
}

/// Law of `T` under `(U, U^a)` by enumeration.
pub fn alt_pmf_enumerated(
    scores: &ScoreVector,
    sizes: SampleSizes,
    a: f64,
    cfg: &ExactConfig,
) -> Result<Pmf> {
    check_scores(scores, sizes)?;
    check_exponent(a)?;
    let pairs = aggregate_by_statistic(scores, sizes, cfg, |r| lehmann_prob(r, sizes, a))?;
    Ok(Pmf::from_pairs(pairs))
}

/// Law of integer-score `T` under `(U, U^a)` by dynamic programming.
///
/// Walks the pooled order from the largest observation down: with `i` X's
/// and `j` Y's left among the lowest `k` positions, position `k` holds a Y
/// with probability `a j / (i + a j)`.
pub fn alt_pmf_dp(scores: &ScoreVector, sizes: SampleSizes, a: f64) -> Result<Pmf> {
    check_scores(scores, sizes)?;
    check_exponent(a)?;
    let ints = scores
        .as_integers()
        .ok_or_else(|| Error::InvalidParameter("dynamic programming needs integer scores".into()))?;
    let table = IntTable::new(&ints, sizes)?;
    let (n, w) = (sizes.n(), table.width);
    let mut cur = vec![0.0f64; (n + 1) * w];
    let mut next = vec![0.0f64; (n + 1) * w];
    cur[n * w] = 1.0;
    for k in (1..=sizes.total()).rev() {
        let v = (ints[k - 1] - table.min) as usize;
        next.iter_mut().for_each(|x| *x = 0.0);
        let j_lo = n.saturating_sub(sizes.total() - k);
        for j in j_lo..=n.min(k) {
            let i = k - j;
            let denom = i as f64 + a * j as f64;
            let p_y = a * j as f64 / denom;
            let p_x = i as f64 / denom;
            let row = &cur[j * w..(j + 1) * w];
            if p_x > 0.0 {
                let dst = &mut next[j * w..(j + 1) * w];
                for (d, s) in dst.iter_mut().zip(row) {
                    *d += p_x * s;
                }
            }
            if p_y > 0.0 {
                let dst = &mut next[(j - 1) * w..j * w];
                for s in 0..w - v {
                    dst[s + v] += p_y * row[s];
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let pairs = cur[..w].iter().enumerate().map(|(s, &p)| (table.value_of(s), p)).collect();
    Ok(Pmf::from_pairs(pairs))
}

pub fn alt_pmf_with(scores: &ScoreVector, sizes: SampleSizes, a: f64, cfg: &ExactConfig) -> Result<Pmf> {
    check_scores(scores, sizes)?;
    if scores.as_integers().is_some() {
        return alt_pmf_dp(scores, sizes, a);
    }
    alt_pmf_enumerated(scores, sizes, a, cfg)
}

/// Exact law of `T` under the Lehmann alternative `(F, F^a)`.
pub fn alt_pmf(scores: &ScoreVector, sizes: SampleSizes, a: f64) -> Result<Pmf> {
    alt_pmf_with(scores, sizes, a, &ExactConfig::default())
}

fn check_exponent(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("Lehmann exponent must be positive, got {a}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Test rejecting for large `T`: always when `T > threshold`, with
/// probability `gamma` when `T = threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedTest {
    pub threshold: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub scores: ScoreVector,
    pub sizes: SampleSizes,
    pub conservative: bool,
    /// Null probability of the rejection region, including the boundary weight.
    pub size: f64,
}

impl RandomizedTest {
    /// Rejection probability for an observed statistic.
    #[inline]
    pub fn decision(&self, t: f64) -> f64 {
        if same_value(t, self.threshold) {
            self.gamma
        } else if t > self.threshold {
            1.0
        } else {
            0.0
        }
    }
}

/// Exact size-`alpha` randomized test based on the null law of `T`.
///
/// `threshold` is the smallest support point with `P₀(T > t) ≤ alpha`. In
/// conservative mode `gamma` is forced to zero and the size may fall below
/// `alpha`.
pub fn critical_value_with(
    scores: &ScoreVector,
    sizes: SampleSizes,
    alpha: f64,
    conservative: bool,
    cfg: &ExactConfig,
) -> Result<RandomizedTest> {
    check_alpha(alpha)?;
    let pmf = null_pmf_with(scores, sizes, cfg)?;
    Ok(test_from_null(&pmf, scores.clone(), sizes, alpha, conservative))
}

pub fn critical_value(scores: &ScoreVector, sizes: SampleSizes, alpha: f64) -> Result<RandomizedTest> {
    critical_value_with(scores, sizes, alpha, false, &ExactConfig::default())
}

pub(crate) fn test_from_null(
    pmf: &Pmf,
    scores: ScoreVector,
    sizes: SampleSizes,
    alpha: f64,
    conservative: bool,
) -> RandomizedTest {
    let len = pmf.len();
    // Upper tail probabilities P(T > support[i]), accumulated from the top.
    let mut tail_above = vec![0.0; len];
    let mut exact_above = vec![0u128; len];
    let mut acc = 0.0;
    let mut acc_exact = 0u128;
    for i in (0..len).rev() {
        tail_above[i] = acc;
        exact_above[i] = acc_exact;
        acc += pmf.probs[i];
        if let Some(ex) = &pmf.exact {
            acc_exact += ex.counts[i];
        }
    }
    let within = |i: usize| -> bool {
        match &pmf.exact {
            Some(ex) => {
                let lhs = exact_above[i] as f64;
                let rhs = alpha * ex.total as f64;
                lhs <= rhs * (1.0 + 1e-12)
            }
            None => tail_above[i] <= alpha * (1.0 + 1e-12) + 1e-15,
        }
    };
    let idx = (0..len).find(|&i| within(i)).unwrap_or(len - 1);
    let (p_gt, p_eq) = match &pmf.exact {
        Some(ex) => (
            exact_above[idx] as f64 / ex.total as f64,
            ex.counts[idx] as f64 / ex.total as f64,
        ),
        None => (tail_above[idx], pmf.probs[idx]),
    };
    let gamma = if conservative || p_eq <= 0.0 {
        0.0
    } else {
        ((alpha - p_gt) / p_eq).clamp(0.0, 1.0)
    };
    RandomizedTest {
        threshold: pmf.support[idx],
        gamma,
        alpha,
        scores,
        sizes,
        conservative,
        size: p_gt + gamma * p_eq,
    }
}

/// Exact power `P_a(T > t) + gamma · P_a(T = t)` of a randomized rank test.
pub fn exact_power_with(test: &RandomizedTest, a: f64, cfg: &ExactConfig) -> Result<f64> {
    check_exponent(a)?;
    let sizes = test.sizes;
    if test.scores.as_integers().is_some() {
        return Ok(alt_pmf_dp(&test.scores, sizes, a)?.rejection_probability(test));
    }
    let en = RankSetEnumerator::new(sizes, cfg.cap)?;
    let values = test.scores.values();
    let parts = map_chunks(&en, cfg.chunk_size, |start, end| {
        let mut terms = Vec::with_capacity((end - start) as usize);
        en.for_each_in_range(start, end, |r| {
            let phi = test.decision(statistic_unchecked(values, r));
            if phi > 0.0 {
                terms.push(phi * lehmann_prob(r, sizes, a));
            }
        });
        pairwise_sum(&terms)
    });
    Ok(pairwise_sum(&parts))
}

pub fn exact_power(test: &RandomizedTest, a: f64) -> Result<f64> {
    exact_power_with(test, a, &ExactConfig::default())
}

/// Most powerful rank test of size `alpha` against `(F, F^a)` for one fixed `a`.
///
/// Rank sets are ranked by `P_a(r)`, which is the likelihood ratio up to a
/// constant because the null law is uniform. The boundary class collects all
/// rank sets sharing one `P_a` value and is randomized as a whole.
#[derive(Debug, Clone)]
pub struct MpTest {
    pub a: f64,
    pub alpha: f64,
    pub sizes: SampleSizes,
    pub reject_set: Vec<RankSet>,
    pub boundary_set: Vec<RankSet>,
    pub gamma: f64,
    reject_lookup: HashSet<Vec<u32>>,
    boundary_lookup: HashSet<Vec<u32>>,
}

impl MpTest {
    /// Rejection probability for observed Y-ranks (sorted).
    pub fn decision(&self, ranks: &[u32]) -> f64 {
        if self.reject_lookup.contains(ranks) {
            1.0
        } else if self.boundary_lookup.contains(ranks) {
            self.gamma
        } else {
            0.0
        }
    }

    /// Null size `P₀(reject) + gamma · P₀(boundary)`.
    pub fn size(&self) -> f64 {
        let total = self.sizes.subset_count().expect("enumerated") as f64;
        (self.reject_set.len() as f64 + self.gamma * self.boundary_set.len() as f64) / total
    }

    /// Exact power against `(F, F^b)` for any exponent `b`.
    pub fn power(&self, b: f64) -> Result<f64> {
        check_exponent(b)?;
        let rej: Vec<f64> =
            self.reject_set.iter().map(|r| lehmann_prob(r.ranks(), self.sizes, b)).collect();
        let bnd: Vec<f64> =
            self.boundary_set.iter().map(|r| lehmann_prob(r.ranks(), self.sizes, b)).collect();
        Ok(pairwise_sum(&rej) + self.gamma * pairwise_sum(&bnd))
    }
}

pub fn mp_test_with(sizes: SampleSizes, a: f64, alpha: f64, cfg: &ExactConfig) -> Result<MpTest> {
    check_exponent(a)?;
    check_alpha(alpha)?;
    if a == 1.0 {
        return Err(Error::InvalidParameter("most powerful test needs a != 1".into()));
    }
    let en = RankSetEnumerator::new(sizes, cfg.cap)?;
    let lists = map_chunks(&en, cfg.chunk_size, |start, end| {
        let mut v = Vec::with_capacity((end - start) as usize);
        en.for_each_in_range(start, end, |r| v.push((lehmann_prob(r, sizes, a), r.to_vec())));
        v
    });
    let mut all: Vec<(f64, Vec<u32>)> = lists.into_iter().flatten().collect();
    // Descending probability; lexicographic order inside ties.
    all.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(&y.1)));

    let total = en.count() as f64;
    let target = alpha * total;
    let mut reject_set = Vec::new();
    let mut boundary_set = Vec::new();
    let mut gamma = 0.0;
    let mut start = 0;
    while start < all.len() {
        let head = all[start].0;
        let mut end = start + 1;
        while end < all.len() && (head - all[end].0).abs() <= 1e-12 * head {
            end += 1;
        }
        let class = (end - start) as f64;
        let taken = reject_set.len() as f64;
        if taken + class <= target * (1.0 + 1e-12) {
            reject_set.extend(all[start..end].iter().map(|(_, r)| r.clone()));
            start = end;
            continue;
        }
        let remaining = target - taken;
        if remaining > 1e-9 * target {
            gamma = (remaining / class).clamp(0.0, 1.0);
            boundary_set.extend(all[start..end].iter().map(|(_, r)| r.clone()));
        }
        break;
    }
    let reject_lookup = reject_set.iter().cloned().collect();
    let boundary_lookup = boundary_set.iter().cloned().collect();
    let wrap = |v: Vec<Vec<u32>>| -> Vec<RankSet> {
        v.into_iter().map(|r| RankSet::from_sorted_unchecked(r, sizes)).collect()
    };
    Ok(MpTest {
        a,
        alpha,
        sizes,
        reject_set: wrap(reject_set),
        boundary_set: wrap(boundary_set),
        gamma,
        reject_lookup,
        boundary_lookup,
    })
}

pub fn mp_test(sizes: SampleSizes, a: f64, alpha: f64) -> Result<MpTest> {
    mp_test_with(sizes, a, alpha, &ExactConfig::default())
}

/// Scores of the locally most powerful rank test against `(F, F^a)` at `a = 1`:
/// the Savage scores.
pub fn lmp_scores(big_n: usize) -> Result<ScoreVector> {
    score_vector(ScoreKind::Savage, big_n, 1.0)
}
