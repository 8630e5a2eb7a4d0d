//! Exact and Monte Carlo power of two-sample linear rank tests under Lehmann
//! alternatives `(F, F^a)`, most powerful and locally most powerful rank
//! tests, and the efficiency / deficiency calculus for comparing tests
//! through their power expansions.

pub mod asymptotics;
pub mod error;
pub mod exact;
pub mod family;
pub mod quad;
pub mod ranks;
pub mod simulate;
pub mod special;

pub use asymptotics::{
    are, deficiency_curve, deficiency_leading_coeff, numeric_derivative, DeficiencyFit,
    GaussianLocalPower, PowerExpansion,
};
pub use error::{Error, Result};
pub use exact::{
    alt_pmf, critical_value, exact_power, lmp_scores, mp_test, null_pmf, rankset_prob_lehmann,
    ExactConfig, MpTest, Pmf, RandomizedTest,
};
pub use family::{DistributionFamily, FamilyKind};
pub use ranks::{
    enumerate_ranksets, ranks_of_second_sample, score_vector, statistic, Alternative, RankSet,
    SampleSizes, ScoreKind, ScoreVector,
};
pub use simulate::{
    draw_two_samples, matched_sample_size, power_mc, ComparatorTest, MatchConfig, PowerEstimate,
    PowerTest, RngSpec, TestSpec,
};
