//! Sample sizes, rank sets, score functions and linear rank statistics.
//!
//! A linear rank statistic is `T = Σ_j k(R_j)` where `R_1 < … < R_n` are the
//! ranks of the second sample within the pooled sample of size `N = m + n`
//! and `k` is a nondecreasing score function on `1..=N`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::family::DistributionFamily;
use crate::quad;
use crate::special::{ln_gamma, ln_norm_cdf, norm_pdf, norm_quantile};

/// Default cap on the number of subsets any enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 100_000_000;

/// Default absolute tolerance for quadrature-based normal scores.
pub const DEFAULT_SCORE_TOLERANCE: f64 = 1e-9;

/// Group sizes of a two-sample problem: `m` observations of X, `n` of Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleSizes {
    m: usize,
    n: usize,
}

impl SampleSizes {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "sample sizes must be positive (m={m}, n={n})"
            )));
        }
        Ok(SampleSizes { m, n })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Pooled sample size `m + n`.
    pub fn total(&self) -> usize {
        self.m + self.n
    }

    /// `C(N, n)` if it fits in a `u128`.
    pub fn subset_count(&self) -> Option<u128> {
        choose(self.total() as u64, self.n as u64)
    }
}

impl fmt::Display for SampleSizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(m={}, n={})", self.m, self.n)
    }
}

/// Binomial coefficient with overflow detection.
pub fn choose(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        let num = (n - i) as u128;
        let g = gcd(acc, (i + 1) as u128);
        let (a, d) = (acc / g, (i + 1) as u128 / g);
        acc = a.checked_mul(num / d)?;
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// The sorted ranks `r_1 < … < r_n` of the second sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RankSet {
    ranks: Vec<u32>,
    sizes: SampleSizes,
}

impl RankSet {
    /// Builds a rank set, sorting the input. Rejects out-of-range or repeated
    /// ranks and a length different from `n`.
    pub fn new(mut ranks: Vec<u32>, sizes: SampleSizes) -> Result<Self> {
        if ranks.len() != sizes.n() {
            return Err(Error::LengthMismatch { expected: sizes.n(), actual: ranks.len() });
        }
        ranks.sort_unstable();
        let big_n = sizes.total() as u32;
        for w in ranks.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidParameter(format!("rank {} repeated", w[0])));
            }
        }
        if ranks.first().is_some_and(|&r| r < 1) || ranks.last().is_some_and(|&r| r > big_n) {
            return Err(Error::InvalidParameter(format!("ranks must lie in 1..={big_n}")));
        }
        Ok(RankSet { ranks, sizes })
    }

    pub(crate) fn from_sorted_unchecked(ranks: Vec<u32>, sizes: SampleSizes) -> Self {
        RankSet { ranks, sizes }
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn sizes(&self) -> SampleSizes {
        self.sizes
    }
}

impl fmt::Display for RankSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, r) in self.ranks.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str(")")
    }
}

/// Ranks of the `y` observations within the pooled sample, 1-based and sorted.
///
/// Ties anywhere in the pooled sample are an error.
pub fn ranks_of_second_sample(x: &[f64], y: &[f64]) -> Result<RankSet> {
    let sizes = SampleSizes::new(x.len(), y.len())?;
    let mut pooled: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, false))
        .chain(y.iter().map(|&v| (v, true)))
        .collect();
    if let Some(&(v, _)) = pooled.iter().find(|(v, _)| v.is_nan()) {
        return Err(Error::InvalidParameter(format!("non-comparable value {v}")));
    }
    pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    for w in pooled.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateValue(w[0].0));
        }
    }
    let ranks = pooled
        .iter()
        .enumerate()
        .filter(|(_, (_, is_y))| *is_y)
        .map(|(i, _)| i as u32 + 1)
        .collect();
    Ok(RankSet::from_sorted_unchecked(ranks, sizes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreKind {
    /// `k(i) = i`.
    Wilcoxon,
    /// `k(i) = Φ⁻¹(i / (N + 1))`.
    VanDerWaerden,
    /// `k(i) = E[Z_(i)]`, expected standard normal order statistics.
    NormalExact,
    /// `k(i) = -Σ_{j=i}^{N} 1/j`; the locally most powerful scores for
    /// Lehmann alternatives.
    Savage,
    Custom,
}

impl ScoreKind {
    pub const BUILT_IN: [ScoreKind; 4] =
        [ScoreKind::Wilcoxon, ScoreKind::VanDerWaerden, ScoreKind::NormalExact, ScoreKind::Savage];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Wilcoxon => "wilcoxon",
            ScoreKind::VanDerWaerden => "vdw",
            ScoreKind::NormalExact => "normal",
            ScoreKind::Savage => "savage",
            ScoreKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wilcoxon" => Ok(ScoreKind::Wilcoxon),
            "vdw" | "vanderwaerden" | "van-der-waerden" => Ok(ScoreKind::VanDerWaerden),
            "normal" | "normal-exact" | "normalexact" => Ok(ScoreKind::NormalExact),
            "savage" => Ok(ScoreKind::Savage),
            other => Err(Error::InvalidParameter(format!("unknown score kind '{other}'"))),
        }
    }
}

/// Score function values `k(1), …, k(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    kind: ScoreKind,
    values: Vec<f64>,
}

impl ScoreVector {
    /// Arbitrary nondecreasing scores.
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter("need at least two scores".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("scores must be finite".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("scores must be nondecreasing".into()));
        }
        Ok(ScoreVector { kind: ScoreKind::Custom, values })
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pooled sample size the scores are defined for.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `k(i)` for a 1-based rank.
    pub fn at(&self, rank: u32) -> f64 {
        self.values[rank as usize - 1]
    }

    /// Integer values if every score is an integer of moderate size.
    pub fn as_integers(&self) -> Option<Vec<i64>> {
        self.values
            .iter()
            .map(|&v| {
                if v.fract() == 0.0 && v.abs() <= (1u64 << 40) as f64 {
                    Some(v as i64)
                } else {
                    None
                }
            })
            .collect()
    }

    /// `scale * k + shift` as custom scores (`scale > 0`).
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter("affine scale must be positive".into()));
        }
        ScoreVector::custom(self.values.iter().map(|v| scale * v + shift).collect())
    }
}

/// Built-in scores for a pooled sample of size `big_n`.
///
/// `tolerance` bounds the absolute quadrature error of [`ScoreKind::NormalExact`].
pub fn score_vector(kind: ScoreKind, big_n: usize, tolerance: f64) -> Result<ScoreVector> {
    if big_n < 2 {
        return Err(Error::InvalidParameter(format!("N must be at least 2, got {big_n}")));
    }
    let values = match kind {
        ScoreKind::Wilcoxon => (1..=big_n).map(|i| i as f64).collect(),
        ScoreKind::VanDerWaerden => {
            let denom = (big_n + 1) as f64;
            (1..=big_n).map(|i| norm_quantile(i as f64 / denom)).collect()
        }
        ScoreKind::NormalExact => {
            if !(tolerance > 0.0) {
                return Err(Error::InvalidParameter("tolerance must be positive".into()));
            }
            (1..=big_n)
                .map(|i| expected_normal_order_statistic(i, big_n, tolerance))
                .collect::<Result<Vec<_>>>()?
        }
        ScoreKind::Savage => savage_values(big_n),
        ScoreKind::Custom => {
            return Err(Error::InvalidParameter(
                "custom scores are built with ScoreVector::custom".into(),
            ))
        }
    };
    Ok(ScoreVector { kind, values })
}

fn savage_values(big_n: usize) -> Vec<f64> {
    let mut values = vec![0.0; big_n];
    let mut tail = 0.0;
    for i in (1..=big_n).rev() {
        tail += 1.0 / i as f64;
        values[i - 1] = -tail;
    }
    values
}

/// `E[Z_(i)]` for the i-th smallest of `big_n` standard normals.
fn expected_normal_order_statistic(i: usize, big_n: usize, tol: f64) -> Result<f64> {
    let (nf, i_f) = (big_n as f64, i as f64);
    let ln_coef = ln_gamma(nf + 1.0) - ln_gamma(i_f) - ln_gamma(nf - i_f + 1.0);
    let below = (i - 1) as f64;
    let above = (big_n - i) as f64;
    let integrand = |z: f64| {
        let ln_dens = ln_coef
            + below * ln_norm_cdf(z)
            + above * ln_norm_cdf(-z)
            + norm_pdf(z).ln();
        z * ln_dens.exp()
    };
    // The order-statistic densities are negligible beyond |z| = 12.5 for any
    // N that fits in memory.
    quad::integrate_partitioned(integrand, -12.5, 12.5, 64, 0.5 * tol)
}

/// `Σ_j k(r_j)`.
pub fn statistic(scores: &ScoreVector, r: &RankSet) -> Result<f64> {
    if scores.len() != r.sizes().total() {
        return Err(Error::LengthMismatch { expected: r.sizes().total(), actual: scores.len() });
    }
    Ok(statistic_unchecked(scores.values(), r.ranks()))
}

#[inline]
pub(crate) fn statistic_unchecked(values: &[f64], ranks: &[u32]) -> f64 {
    ranks.iter().map(|&r| values[r as usize - 1]).sum()
}

/// Lexicographic enumeration of all `n`-subsets of `{1, …, N}`.
///
/// Subsets are addressed by their lexicographic index, so disjoint index
/// ranges can be consumed independently.
#[derive(Debug, Clone, Copy)]
pub struct RankSetEnumerator {
    sizes: SampleSizes,
    count: u64,
}

impl RankSetEnumerator {
    pub fn new(sizes: SampleSizes, cap: u64) -> Result<Self> {
        match sizes.subset_count() {
            Some(c) if c <= cap as u128 => Ok(RankSetEnumerator { sizes, count: c as u64 }),
            Some(c) => Err(Error::CapExceeded { count: c.to_string(), cap }),
            None => Err(Error::CapExceeded { count: "more than 2^128".into(), cap }),
        }
    }

    pub fn sizes(&self) -> SampleSizes {
        self.sizes
    }

    /// `C(N, n)`.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// The subset at lexicographic position `index`.
    pub fn unrank(&self, index: u64) -> Vec<u32> {
        let big_n = self.sizes.total() as u64;
        let n = self.sizes.n() as u64;
        let mut out = Vec::with_capacity(n as usize);
        let mut rest = index as u128;
        let mut next = 1u64;
        for slot in 0..n {
            let remaining = n - slot - 1;
            loop {
                let with_next = choose(big_n - next, remaining).expect("within cap");
                if rest < with_next {
                    break;
                }
                rest -= with_next;
                next += 1;
            }
            out.push(next as u32);
            next += 1;
        }
        out
    }

    /// Calls `f` on every subset with index in `start..end`, in order.
    pub fn for_each_in_range<F: FnMut(&[u32])>(&self, start: u64, end: u64, mut f: F) {
        let end = end.min(self.count);
        if start >= end {
            return;
        }
        let mut current = self.unrank(start);
        let big_n = self.sizes.total() as u32;
        let n = current.len();
        f(&current);
        for _ in start + 1..end {
            advance(&mut current, n, big_n);
            f(&current);
        }
    }

    /// Calls `f` on every subset in lexicographic order.
    pub fn for_each<F: FnMut(&[u32])>(&self, f: F) {
        self.for_each_in_range(0, self.count, f)
    }

    /// Owned iterator over all rank sets.
    pub fn iter(&self) -> RankSetIter {
        RankSetIter { sizes: self.sizes, current: None, remaining: self.count }
    }
}

#[inline]
fn advance(current: &mut [u32], n: usize, big_n: u32) {
    let mut i = n;
    while i > 0 {
        i -= 1;
        let limit = big_n - (n - 1 - i) as u32;
        if current[i] < limit {
            current[i] += 1;
            for j in i + 1..n {
                current[j] = current[j - 1] + 1;
            }
            return;
        }
    }
}

/// Iterator produced by [`RankSetEnumerator::iter`].
#[derive(Debug, Clone)]
pub struct RankSetIter {
    sizes: SampleSizes,
    current: Option<Vec<u32>>,
    remaining: u64,
}

impl Iterator for RankSetIter {
    type Item = RankSet;

    fn next(&mut self) -> Option<RankSet> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let n = self.sizes.n();
        let big_n = self.sizes.total() as u32;
        let next = match self.current.take() {
            None => (1..=n as u32).collect(),
            Some(mut c) => {
                advance(&mut c, n, big_n);
                c
            }
        };
        self.current = Some(next.clone());
        Some(RankSet::from_sorted_unchecked(next, self.sizes))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (r, Some(r))
    }
}

/// Convenience wrapper: enumerate all rank sets for `sizes`, subject to `cap`.
pub fn enumerate_ranksets(sizes: SampleSizes, cap: u64) -> Result<RankSetIter> {
    Ok(RankSetEnumerator::new(sizes, cap)?.iter())
}

/// An alternative to the null hypothesis of identical distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alternative {
    /// Y has distribution function `F^a`.
    Lehmann { a: f64 },
    /// Y has distribution function `F(x - theta)`.
    Shift { theta: f64, family: DistributionFamily },
    /// Contiguous shift `theta = c / sqrt(n)`.
    Local { c: f64, family: DistributionFamily },
}

impl Alternative {
    pub fn lehmann(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("Lehmann exponent must be positive, got {a}")));
        }
        Ok(Alternative::Lehmann { a })
    }

    pub fn shift(theta: f64, family: DistributionFamily) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("shift must be finite, got {theta}")));
        }
        Ok(Alternative::Shift { theta, family })
    }

    pub fn local(c: f64, family: DistributionFamily) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("local scale c must be positive, got {c}")));
        }
        Ok(Alternative::Local { c, family })
    }

    /// Whether this alternative coincides with the null hypothesis.
    pub fn is_null(&self) -> bool {
        match *self {
            Alternative::Lehmann { a } => a == 1.0,
            Alternative::Shift { theta, .. } => theta == 0.0,
            Alternative::Local { .. } => false,
        }
    }

    /// The base family for shift-type alternatives.
    pub fn family(&self) -> Option<DistributionFamily> {
        match *self {
            Alternative::Lehmann { .. } => None,
            Alternative::Shift { family, .. } | Alternative::Local { family, .. } => Some(family),
        }
    }
}
