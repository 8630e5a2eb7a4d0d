//! Seeded Monte Carlo: sampling under null, Lehmann and shift alternatives,
//! power estimation for rank and comparator tests, and empirical
//! sample-size matching with common random numbers.
//!
//! # Random streams
//!
//! Replicates are grouped into chunks of `chunk_size`. Chunk `c` gets the
//! seed `splitmix64(seed ^ splitmix64(c))`; replicate `i` of that chunk gets
//! `splitmix64(chunk_seed + i)`. Each replicate owns two generators
//! (xoshiro256++): a data stream seeded with the replicate seed and an
//! auxiliary stream (boundary randomization, permutation resampling) seeded
//! with the replicate seed XOR [`AUX_STREAM_TAG`]. Data are drawn as
//! interleaved pairs `x_0, y_0, x_1, y_1, …`, so samples of size `k` extend
//! samples of size `k' < k` and estimates at different sizes share common
//! random numbers. Results depend only on `(seed, reps, chunk_size)`, never on
//! the thread count.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{critical_value_with, mp_test_with, ExactConfig, MpTest, RandomizedTest};
use crate::family::{DistributionFamily, FamilyKind};
use crate::ranks::{choose, score_vector, Alternative, SampleSizes, ScoreKind, DEFAULT_SCORE_TOLERANCE};
use crate::special::t_quantile;

/// Mixed into the replicate seed for the auxiliary stream.
pub const AUX_STREAM_TAG: u64 = 0xA5A5_5A5A_C3C3_3C3C;

/// Default number of replicates per chunk.
pub const DEFAULT_CHUNK_SIZE: u64 = 4096;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed and chunking discipline for a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
    pub chunk_size: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        RngSpec { seed, chunk_size: DEFAULT_CHUNK_SIZE }
    }

    pub fn with_chunk_size(seed: u64, chunk_size: u64) -> Self {
        RngSpec { seed, chunk_size: chunk_size.max(1) }
    }

    pub fn chunk_seed(&self, chunk: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(chunk))
    }

    /// Data and auxiliary generators for one replicate.
    pub fn replicate_streams(&self, chunk: u64, index: u64) -> (Xoshiro256PlusPlus, Xoshiro256PlusPlus) {
        let s = splitmix64(self.chunk_seed(chunk).wrapping_add(index));
        (Xoshiro256PlusPlus::seed_from_u64(s), Xoshiro256PlusPlus::seed_from_u64(s ^ AUX_STREAM_TAG))
    }
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// How Y is generated from a uniform draw.
#[derive(Debug, Clone, Copy)]
enum YLaw {
    Lehmann(f64),
    Shift(f64),
}

fn resolve(alt: &Alternative, family: &DistributionFamily, sizes: SampleSizes) -> Result<YLaw> {
    if let Some(f) = alt.family() {
        if f != *family {
            return Err(Error::InvalidParameter(format!(
                "alternative family {} differs from sampling family {}",
                f.kind, family.kind
            )));
        }
    }
    Ok(match *alt {
        Alternative::Lehmann { a } => YLaw::Lehmann(1.0 / a),
        Alternative::Shift { theta, .. } => YLaw::Shift(theta),
        Alternative::Local { c, .. } => YLaw::Shift(c / (sizes.n() as f64).sqrt()),
    })
}

fn fill_samples<R: RngCore + ?Sized>(
    sizes: SampleSizes,
    law: YLaw,
    family: &DistributionFamily,
    rng: &mut R,
    x: &mut Vec<f64>,
    y: &mut Vec<f64>,
) {
    x.clear();
    y.clear();
    let (m, n) = (sizes.m(), sizes.n());
    for i in 0..m.max(n) {
        if i < m {
            x.push(family.quantile(open01(rng)));
        }
        if i < n {
            let u = open01(rng);
            y.push(match law {
                YLaw::Lehmann(inv_a) => family.quantile(u.powf(inv_a)),
                YLaw::Shift(theta) => family.quantile(u) + theta,
            });
        }
    }
}

/// Draws `x` iid from `family` and `y` from the alternative, by inversion.
///
/// Lehmann alternatives use `F⁻¹(U^{1/a})`; shifts use `F⁻¹(U) + θ`; the
/// local alternative resolves `θ = c / sqrt(n)`.
pub fn draw_two_samples<R: RngCore + ?Sized>(
    sizes: SampleSizes,
    alt: &Alternative,
    family: &DistributionFamily,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let law = resolve(alt, family, sizes)?;
    let mut x = Vec::with_capacity(sizes.m());
    let mut y = Vec::with_capacity(sizes.n());
    fill_samples(sizes, law, family, rng, &mut x, &mut y);
    Ok((x, y))
}

/// How a permutation test obtains its reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationConfig {
    /// Enumerate all `C(N, n)` regroupings when there are at most this many.
    pub exact_cap: u64,
    /// Random regroupings otherwise.
    pub resamples: usize,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig { exact_cap: 5_000, resamples: 999 }
    }
}

/// Parametric and permutation comparators for rank tests. All are one-sided,
/// rejecting when Y tends to be larger.
#[derive(Debug, Clone, PartialEq)]
pub enum ComparatorTest {
    /// Pooled-variance two-sample t test.
    TwoSampleT { sizes: SampleSizes, alpha: f64, critical: f64 },
    /// Permutation test on `Ȳ - X̄` (equivalently on `ΣY` given the pooled sample).
    PermutationMean { sizes: SampleSizes, alpha: f64, perm: PermutationConfig },
    /// Permutation test on `Σ_Y ψ(Z - μ̂)` with `ψ = -f'/f` the location score
    /// of `family` and `μ̂` the pooled maximum likelihood location.
    EfficientScorePermutation {
        sizes: SampleSizes,
        alpha: f64,
        family: FamilyKind,
        perm: PermutationConfig,
    },
}

impl ComparatorTest {
    pub fn two_sample_t(sizes: SampleSizes, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if sizes.total() < 3 {
            return Err(Error::InvalidParameter("t test needs N >= 3".into()));
        }
        let critical = t_quantile(1.0 - alpha, (sizes.total() - 2) as f64);
        Ok(ComparatorTest::TwoSampleT { sizes, alpha, critical })
    }

    pub fn permutation_mean(sizes: SampleSizes, alpha: f64, perm: PermutationConfig) -> Result<Self> {
        check_alpha(alpha)?;
        check_perm(&perm)?;
        Ok(ComparatorTest::PermutationMean { sizes, alpha, perm })
    }

    pub fn efficient_score(
        sizes: SampleSizes,
        alpha: f64,
        family: FamilyKind,
        perm: PermutationConfig,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        check_perm(&perm)?;
        if !matches!(family, FamilyKind::Normal | FamilyKind::Logistic) {
            return Err(Error::InvalidParameter(format!(
                "efficient location scores are implemented for normal and logistic, not {family}"
            )));
        }
        Ok(ComparatorTest::EfficientScorePermutation { sizes, alpha, family, perm })
    }

    pub fn sizes(&self) -> SampleSizes {
        match self {
            ComparatorTest::TwoSampleT { sizes, .. }
            | ComparatorTest::PermutationMean { sizes, .. }
            | ComparatorTest::EfficientScorePermutation { sizes, .. } => *sizes,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            ComparatorTest::TwoSampleT { alpha, .. }
            | ComparatorTest::PermutationMean { alpha, .. }
            | ComparatorTest::EfficientScorePermutation { alpha, .. } => *alpha,
        }
    }

    /// Whether the permutation reference distribution is fully enumerated.
    pub fn is_exact_permutation(&self) -> bool {
        match self {
            ComparatorTest::TwoSampleT { .. } => false,
            ComparatorTest::PermutationMean { sizes, perm, .. }
            | ComparatorTest::EfficientScorePermutation { sizes, perm, .. } => {
                sizes.subset_count().is_some_and(|c| c <= perm.exact_cap as u128)
            }
        }
    }

    /// Rejection probability for the observed samples. `aux` drives the
    /// resampling when the reference distribution is not enumerated.
    pub fn decision<R: RngCore + ?Sized>(
        &self,
        x: &[f64],
        y: &[f64],
        aux: &mut R,
        scratch: &mut Vec<f64>,
    ) -> f64 {
        match self {
            ComparatorTest::TwoSampleT { critical, .. } => {
                if pooled_t(x, y) > *critical {
                    1.0
                } else {
                    0.0
                }
            }
            ComparatorTest::PermutationMean { alpha, perm, .. } => {
                scratch.clear();
                scratch.extend_from_slice(x);
                scratch.extend_from_slice(y);
                permutation_decision(scratch, y.len(), *alpha, perm, aux)
            }
            ComparatorTest::EfficientScorePermutation { alpha, family, perm, .. } => {
                scratch.clear();
                scratch.extend_from_slice(x);
                scratch.extend_from_slice(y);
                if *family == FamilyKind::Logistic {
                    let mu = logistic_location_mle(scratch);
                    for v in scratch.iter_mut() {
                        *v = (0.5 * (*v - mu)).tanh();
                    }
                }
                permutation_decision(scratch, y.len(), *alpha, perm, aux)
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_perm(perm: &PermutationConfig) -> Result<()> {
    if perm.resamples == 0 {
        return Err(Error::InvalidParameter("need at least one permutation resample".into()));
    }
    Ok(())
}

/// One-sided pooled-variance t statistic for `mean(y) - mean(x)`.
pub fn pooled_t(x: &[f64], y: &[f64]) -> f64 {
    let (m, n) = (x.len() as f64, y.len() as f64);
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>()
        + y.iter().map(|v| (v - my) * (v - my)).sum::<f64>();
    let sp2 = ss / (m + n - 2.0);
    (my - mx) / (sp2 * (1.0 / m + 1.0 / n)).sqrt()
}

/// Pooled maximum likelihood location of a logistic sample (unit scale):
/// the root of `Σ tanh((z - μ)/2) = 0`.
pub fn logistic_location_mle(z: &[f64]) -> f64 {
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    let mut mu = sorted[sorted.len() / 2];
    let (mut lo, mut hi) = (sorted[0], sorted[sorted.len() - 1]);
    for _ in 0..100 {
        let mut f = 0.0;
        let mut df = 0.0;
        for &v in z {
            let t = (0.5 * (v - mu)).tanh();
            f += t;
            df += 0.5 * (1.0 - t * t);
        }
        if f > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let mut next = mu + f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - mu).abs() <= 1e-12 * (1.0 + mu.abs()) {
            return next;
        }
        mu = next;
    }
    mu
}

/// Randomized permutation test of `Σ_{last n} z` on the pooled values `z`
/// (X first, then Y). Exact size `alpha` in both modes.
fn permutation_decision<R: RngCore + ?Sized>(
    z: &mut [f64],
    n: usize,
    alpha: f64,
    perm: &PermutationConfig,
    aux: &mut R,
) -> f64 {
    let big_n = z.len();
    let observed: f64 = z[big_n - n..].iter().sum();
    let tol = 1e-12 * observed.abs().max(1.0);
    let count = choose(big_n as u64, n as u64);
    if let Some(c) = count.filter(|&c| c <= perm.exact_cap as u128) {
        // Every regrouping, including the observed one.
        let (mut greater, mut equal) = (0u64, 0u64);
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let s: f64 = idx.iter().map(|&i| z[i]).sum();
            if s > observed + tol {
                greater += 1;
            } else if (s - observed).abs() <= tol {
                equal += 1;
            }
            // next combination
            let mut i = n;
            let mut advanced = false;
            while i > 0 {
                i -= 1;
                if idx[i] < big_n - n + i {
                    idx[i] += 1;
                    for j in i + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        let target = alpha * c as f64;
        let (g, e) = (greater as f64, equal as f64);
        return if g + e <= target {
            1.0
        } else if g < target {
            (target - g) / e
        } else {
            0.0
        };
    }
    // Random regroupings: partial Fisher–Yates over the smaller group.
    let total: f64 = z.iter().sum();
    let take = n.min(big_n - n);
    let (mut greater, mut equal) = (0usize, 0usize);
    let mut draw = BoundedIndex::default();
    for _ in 0..perm.resamples {
        let mut s = 0.0;
        for i in 0..take {
            let j = i + draw.below(aux, (big_n - i) as u32) as usize;
            z.swap(i, j);
            s += z[i];
        }
        let sy = if take == n { s } else { total - s };
        if sy > observed + tol {
            greater += 1;
        } else if (sy - observed).abs() <= tol {
            equal += 1;
        }
    }
    // The observed value sits uniformly among positions greater+1 ..= greater+equal+1
    // (counted from the top) of the B + 1 values.
    let k = alpha * (perm.resamples + 1) as f64;
    let full = k.floor();
    let frac = k - full;
    let lo = greater + 1;
    let hi = greater + equal + 1;
    let mut phi = 0.0;
    for pos in lo..=hi {
        let pos = pos as f64;
        if pos <= full {
            phi += 1.0;
        } else if pos == full + 1.0 {
            phi += frac;
        }
    }
    phi / (hi - lo + 1) as f64
}

/// Uniform indices below a bound from 32-bit halves of 64-bit draws
/// (Lemire's multiply-and-reject method).
#[derive(Default)]
struct BoundedIndex {
    spare: Option<u32>,
}

impl BoundedIndex {
    #[inline]
    fn word<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> u32 {
        match self.spare.take() {
            Some(w) => w,
            None => {
                let v = rng.next_u64();
                self.spare = Some(v as u32);
                (v >> 32) as u32
            }
        }
    }

    #[inline]
    fn below<R: RngCore + ?Sized>(&mut self, rng: &mut R, bound: u32) -> u32 {
        let mut prod = self.word(rng) as u64 * bound as u64;
        if (prod as u32) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (prod as u32) < threshold {
                prod = self.word(rng) as u64 * bound as u64;
            }
        }
        (prod >> 32) as u32
    }
}

/// Any test whose power can be estimated by simulation.
#[derive(Debug, Clone)]
pub enum PowerTest {
    Rank(RandomizedTest),
    Mp(MpTest),
    Comparator(ComparatorTest),
}

impl PowerTest {
    pub fn sizes(&self) -> SampleSizes {
        match self {
            PowerTest::Rank(t) => t.sizes,
            PowerTest::Mp(t) => t.sizes,
            PowerTest::Comparator(t) => t.sizes(),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            PowerTest::Rank(t) => t.alpha,
            PowerTest::Mp(t) => t.alpha,
            PowerTest::Comparator(t) => t.alpha(),
        }
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            PowerTest::Rank(t) => format!("rank:{}", t.scores.kind()),
            PowerTest::Mp(t) => format!("mp:a={}", t.a),
            PowerTest::Comparator(ComparatorTest::TwoSampleT { .. }) => "t".into(),
            PowerTest::Comparator(ComparatorTest::PermutationMean { .. }) => "perm-mean".into(),
            PowerTest::Comparator(ComparatorTest::EfficientScorePermutation { family, .. }) => {
                format!("perm-score:{family}")
            }
        }
    }
}

/// Reusable per-worker buffers.
#[derive(Default)]
struct Scratch {
    x: Vec<f64>,
    y: Vec<f64>,
    pooled: Vec<(f64, bool)>,
    ranks: Vec<u32>,
    values: Vec<f64>,
}

impl Scratch {
    /// Sorted Y ranks into `self.ranks`.
    fn rank(&mut self) -> Result<()> {
        self.pooled.clear();
        self.pooled.extend(self.x.iter().map(|&v| (v, false)));
        self.pooled.extend(self.y.iter().map(|&v| (v, true)));
        self.pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        self.ranks.clear();
        for (i, w) in self.pooled.iter().enumerate() {
            if i > 0 && self.pooled[i - 1].0 == w.0 {
                return Err(Error::DuplicateValue(w.0));
            }
            if w.1 {
                self.ranks.push(i as u32 + 1);
            }
        }
        Ok(())
    }
}

fn rejection_probability<R: RngCore + ?Sized>(
    test: &PowerTest,
    scratch: &mut Scratch,
    aux: &mut R,
) -> Result<f64> {
    match test {
        PowerTest::Rank(t) => {
            scratch.rank()?;
            let values = t.scores.values();
            let stat: f64 = scratch.ranks.iter().map(|&r| values[r as usize - 1]).sum();
            Ok(t.decision(stat))
        }
        PowerTest::Mp(t) => {
            scratch.rank()?;
            Ok(t.decision(&scratch.ranks))
        }
        PowerTest::Comparator(c) => Ok(c.decision(&scratch.x, &scratch.y, aux, &mut scratch.values)),
    }
}

/// Monte Carlo power with its binomial standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub reps: u64,
    pub rejections: u64,
    pub test_id: String,
    pub alternative: Alternative,
}

impl PowerEstimate {
    fn new(rejections: u64, reps: u64, test_id: String, alternative: Alternative) -> Self {
        let p = rejections as f64 / reps as f64;
        PowerEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / reps as f64).sqrt(),
            reps,
            rejections,
            test_id,
            alternative,
        }
    }
}

/// Rejection frequency of `test` over `reps` replicates. Boundary
/// randomization uses one uniform from the auxiliary stream per replicate.
pub fn power_mc(
    test: &PowerTest,
    sizes: SampleSizes,
    alt: &Alternative,
    family: &DistributionFamily,
    reps: u64,
    rng: &RngSpec,
) -> Result<PowerEstimate> {
    if reps < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 replicates, got {reps}")));
    }
    if test.sizes() != sizes {
        return Err(Error::InvalidParameter(format!(
            "test built for {} but sampling {}",
            test.sizes(),
            sizes
        )));
    }
    let law = resolve(alt, family, sizes)?;
    let chunk = rng.chunk_size.max(1);
    let chunks = reps.div_ceil(chunk);
    let counts: Vec<Result<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = Scratch::default();
            let mut hits = 0u64;
            let len = chunk.min(reps - c * chunk);
            for i in 0..len {
                let (mut data, mut aux) = rng.replicate_streams(c, i);
                let u = open01(&mut aux);
                fill_samples(sizes, law, family, &mut data, &mut scratch.x, &mut scratch.y);
                let phi = rejection_probability(test, &mut scratch, &mut aux)?;
                if u < phi {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect();
    let mut total = 0u64;
    for c in counts {
        total += c?;
    }
    Ok(PowerEstimate::new(total, reps, test.id(), *alt))
}

/// Recipe for building a test at any sample sizes, used when sizes vary.
#[derive(Debug, Clone, PartialEq)]
pub enum TestSpec {
    Rank { kind: ScoreKind, alpha: f64, conservative: bool },
    LehmannMp { a: f64, alpha: f64 },
    TwoSampleT { alpha: f64 },
    PermutationMean { alpha: f64, perm: PermutationConfig },
    EfficientScore { family: FamilyKind, alpha: f64, perm: PermutationConfig },
}

impl TestSpec {
    pub fn build(&self, sizes: SampleSizes, exact: &ExactConfig) -> Result<PowerTest> {
        Ok(match self {
            TestSpec::Rank { kind, alpha, conservative } => {
                let scores = score_vector(*kind, sizes.total(), DEFAULT_SCORE_TOLERANCE)?;
                PowerTest::Rank(critical_value_with(&scores, sizes, *alpha, *conservative, exact)?)
            }
            TestSpec::LehmannMp { a, alpha } => PowerTest::Mp(mp_test_with(sizes, *a, *alpha, exact)?),
            TestSpec::TwoSampleT { alpha } => {
                PowerTest::Comparator(ComparatorTest::two_sample_t(sizes, *alpha)?)
            }
            TestSpec::PermutationMean { alpha, perm } => {
                PowerTest::Comparator(ComparatorTest::permutation_mean(sizes, *alpha, *perm)?)
            }
            TestSpec::EfficientScore { family, alpha, perm } => {
                PowerTest::Comparator(ComparatorTest::efficient_score(sizes, *alpha, *family, *perm)?)
            }
        })
    }
}

/// Settings for [`matched_sample_size`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub reps: u64,
    pub rng: RngSpec,
    /// Pool-adjacent-violators smoothing of the power-vs-size curve.
    pub isotonic: bool,
    /// Powers within this absolute amount below the target count as reaching it.
    pub target_tolerance: f64,
    /// Give up when the matching size would exceed this multiple of `n`.
    pub max_factor: usize,
    pub exact: ExactConfig,
}

impl MatchConfig {
    pub fn new(reps: u64, rng: RngSpec) -> Self {
        MatchConfig {
            reps,
            rng,
            isotonic: true,
            target_tolerance: 0.0,
            max_factor: 64,
            exact: ExactConfig::default(),
        }
    }
}

/// One grid point of an empirical deficiency computation.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRow {
    pub n: usize,
    /// Power of procedure A at `(n, n)`.
    pub target: PowerEstimate,
    /// Smallest size at which B's (smoothed) power reaches the target.
    pub k: usize,
    pub deficiency: i64,
    /// Power of B at `(k, k)` after smoothing.
    pub power_at_k: f64,
    /// Set when `|power(k) - target| < 2 SE` with SE combining both estimates.
    pub within_noise: bool,
    /// Approximate Monte Carlo resolution of `k`: `2 SE` divided by the
    /// least-squares slope of power against size over the evaluated points.
    pub k_resolution: f64,
    /// Every size evaluated for B with its raw estimate, ascending in size.
    pub evaluations: Vec<(usize, PowerEstimate)>,
}

/// Empirical deficiency of B relative to A against `θ = c / sqrt(n)`.
///
/// For each `n` the target is A's power at `(n, n)`. B is evaluated at
/// `(k, k)` against the same `θ` with common random numbers across `k`; the
/// search brackets the target by doubling steps away from `k = n` and then
/// bisects on integers.
pub fn matched_sample_size(
    test_b: &TestSpec,
    test_a: &TestSpec,
    n_grid: &[usize],
    c: f64,
    family: &DistributionFamily,
    cfg: &MatchConfig,
) -> Result<Vec<MatchRow>> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    n_grid.iter().map(|&n| match_one(test_b, test_a, n, c, family, cfg)).collect()
}

fn match_one(
    test_b: &TestSpec,
    test_a: &TestSpec,
    n: usize,
    c: f64,
    family: &DistributionFamily,
    cfg: &MatchConfig,
) -> Result<MatchRow> {
    let theta = c / (n as f64).sqrt();
    let alt = Alternative::shift(theta, *family)?;
    let at = |spec: &TestSpec, k: usize| -> Result<PowerEstimate> {
        let sizes = SampleSizes::new(k, k)?;
        let test = spec.build(sizes, &cfg.exact)?;
        power_mc(&test, sizes, &alt, family, cfg.reps, &cfg.rng)
    };
    let target = at(test_a, n)?;
    let goal = target.estimate - cfg.target_tolerance;
    let limit = cfg.max_factor.max(1) * n;
    let min_k = 2;

    let mut evals: BTreeMap<usize, PowerEstimate> = BTreeMap::new();
    let mut eval = |k: usize| -> Result<f64> {
        if let Some(e) = evals.get(&k) {
            return Ok(e.estimate);
        }
        let e = at(test_b, k)?;
        let p = e.estimate;
        evals.insert(k, e);
        Ok(p)
    };

    // Bracket: lo below the goal, hi at or above it.
    let (mut lo, mut hi);
    if eval(n)? >= goal {
        hi = n;
        let mut step = 1;
        loop {
            if hi <= min_k {
                lo = min_k - 1;
                break;
            }
            let cand = hi.saturating_sub(step).max(min_k);
            if eval(cand)? >= goal {
                hi = cand;
                step *= 2;
            } else {
                lo = cand;
                break;
            }
        }
    } else {
        lo = n;
        let mut step = 1;
        loop {
            let cand = lo + step;
            if cand > limit {
                return Err(Error::NotBracketed { target: target.estimate, limit });
            }
            if eval(cand)? >= goal {
                hi = cand;
                break;
            }
            lo = cand;
            step *= 2;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if eval(mid)? >= goal {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let evaluations: Vec<(usize, PowerEstimate)> = evals.into_iter().collect();
    let raw: Vec<f64> = evaluations.iter().map(|(_, e)| e.estimate).collect();
    let smooth = if cfg.isotonic { isotonic_increasing(&raw) } else { raw.clone() };
    let (k, power_at_k) = evaluations
        .iter()
        .zip(&smooth)
        .find(|(_, &p)| p >= goal)
        .map(|((k, _), &p)| (*k, p))
        .unwrap_or((hi, *smooth.last().expect("evaluated")));
    let se_b = evaluations
        .iter()
        .find(|(kk, _)| *kk == k)
        .map(|(_, e)| e.std_error)
        .unwrap_or(0.0);
    let se = (target.std_error.powi(2) + se_b.powi(2)).sqrt();
    let k_resolution = match power_slope(&evaluations) {
        Some(slope) if slope > 0.0 => 2.0 * se / slope,
        _ => f64::INFINITY,
    };
    Ok(MatchRow {
        n,
        target: target.clone(),
        k,
        deficiency: k as i64 - n as i64,
        power_at_k,
        within_noise: (power_at_k - target.estimate).abs() < 2.0 * se,
        k_resolution,
        evaluations,
    })
}

fn power_slope(evals: &[(usize, PowerEstimate)]) -> Option<f64> {
    if evals.len() < 2 {
        return None;
    }
    let len = evals.len() as f64;
    let mk = evals.iter().map(|(k, _)| *k as f64).sum::<f64>() / len;
    let mp = evals.iter().map(|(_, e)| e.estimate).sum::<f64>() / len;
    let sxx: f64 = evals.iter().map(|(k, _)| (*k as f64 - mk).powi(2)).sum();
    let sxy: f64 = evals.iter().map(|(k, e)| (*k as f64 - mk) * (e.estimate - mp)).sum();
    Some(sxy / sxx)
}

/// Pool-adjacent-violators fit of a nondecreasing sequence (equal weights).
pub fn isotonic_increasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let merged = (a * na as f64 + b * nb as f64) / (na + nb) as f64;
            *blocks.last_mut().expect("non-empty") = (merged, na + nb);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}
