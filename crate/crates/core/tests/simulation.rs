use rankpower::exact::{critical_value_with, ExactConfig};
use rankpower::simulate::PermutationConfig;
use rankpower::*;

fn sz(m: usize, n: usize) -> SampleSizes {
    SampleSizes::new(m, n).unwrap()
}

fn rank_test(kind: ScoreKind, sizes: SampleSizes, alpha: f64) -> RandomizedTest {
    let scores = score_vector(kind, sizes.total(), 1e-10).unwrap();
    critical_value(&scores, sizes, alpha).unwrap()
}

fn within(est: &PowerEstimate, value: f64, k: f64) -> bool {
    let se = est.std_error.max((value * (1.0 - value) / est.reps as f64).sqrt());
    (est.estimate - value).abs() <= k * se
}

#[test]
fn wilcoxon_two_by_two_power() {
    let sizes = sz(2, 2);
    let test = PowerTest::Rank(rank_test(ScoreKind::Wilcoxon, sizes, 1.0 / 6.0));
    let alt = Alternative::lehmann(2.0).unwrap();
    let est = power_mc(&test, sizes, &alt, &DistributionFamily::uniform(), 1_000_000, &RngSpec::new(1)).unwrap();
    assert!(within(&est, 1.0 / 3.0, 4.0), "{est:?}");
}

#[test]
fn built_in_tests_hold_their_size() {
    let reps = 1_000_000;
    let null = Alternative::lehmann(1.0).unwrap();
    for &alpha in &[0.05, 0.1] {
        let mut tests: Vec<(PowerTest, SampleSizes, DistributionFamily)> = Vec::new();
        for kind in ScoreKind::BUILT_IN {
            let sizes = sz(4, 4);
            tests.push((PowerTest::Rank(rank_test(kind, sizes, alpha)), sizes, DistributionFamily::cauchy()));
        }
        tests.push((PowerTest::Mp(mp_test(sz(4, 4), 2.0, alpha).unwrap()), sz(4, 4), DistributionFamily::uniform()));
        tests.push((
            PowerTest::Comparator(ComparatorTest::two_sample_t(sz(5, 6), alpha).unwrap()),
            sz(5, 6),
            DistributionFamily::normal(),
        ));
        tests.push((
            PowerTest::Comparator(ComparatorTest::permutation_mean(sz(3, 4), alpha, PermutationConfig::default()).unwrap()),
            sz(3, 4),
            DistributionFamily::exponential(),
        ));
        let sampled = PermutationConfig { exact_cap: 0, resamples: 99 };
        tests.push((
            PowerTest::Comparator(ComparatorTest::permutation_mean(sz(5, 5), alpha, sampled).unwrap()),
            sz(5, 5),
            DistributionFamily::normal(),
        ));
        tests.push((
            PowerTest::Comparator(
                ComparatorTest::efficient_score(sz(3, 3), alpha, FamilyKind::Logistic, PermutationConfig::default())
                    .unwrap(),
            ),
            sz(3, 3),
            DistributionFamily::logistic(),
        ));
        for (i, (test, sizes, fam)) in tests.iter().enumerate() {
            let est = power_mc(test, *sizes, &null, fam, reps, &RngSpec::new(100 + i as u64)).unwrap();
            assert!(within(&est, alpha, 4.0), "{} alpha={alpha}: {est:?}", test.id());
        }
    }
}

#[test]
fn wilcoxon_power_does_not_depend_on_f() {
    let sizes = sz(5, 5);
    let test = PowerTest::Rank(rank_test(ScoreKind::Wilcoxon, sizes, 0.1));
    let alt = Alternative::lehmann(2.0).unwrap();
    let reps = 400_000;
    let a = power_mc(&test, sizes, &alt, &DistributionFamily::normal(), reps, &RngSpec::new(5)).unwrap();
    let b = power_mc(&test, sizes, &alt, &DistributionFamily::exponential(), reps, &RngSpec::new(6)).unwrap();
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.estimate - b.estimate).abs() < 4.0 * se);
}

#[test]
fn common_random_numbers_make_power_monotone_in_a() {
    for (m, n) in [(2, 3), (4, 4), (6, 6)] {
        let sizes = sz(m, n);
        let test = PowerTest::Rank(rank_test(ScoreKind::Wilcoxon, sizes, 0.1));
        let mut prev_mc = 0.0;
        let mut prev_exact = 0.0;
        for &a in &[1.0, 1.5, 2.0, 3.0] {
            let alt = Alternative::lehmann(a).unwrap();
            let est = power_mc(&test, sizes, &alt, &DistributionFamily::uniform(), 20_000, &RngSpec::new(9)).unwrap();
            assert!(est.estimate >= prev_mc);
            prev_mc = est.estimate;
            let PowerTest::Rank(t) = &test else { unreachable!() };
            let ex = exact_power(t, a).unwrap();
            assert!(ex >= prev_exact);
            prev_exact = ex;
        }
    }
}

#[test]
fn exact_and_monte_carlo_agree() {
    let reps = 300_000;
    let cases: Vec<(PowerTest, SampleSizes, f64, f64)> = vec![
        (PowerTest::Rank(rank_test(ScoreKind::Savage, sz(4, 5), 0.05)), sz(4, 5), 1.5, 0.0),
        (PowerTest::Rank(rank_test(ScoreKind::VanDerWaerden, sz(3, 3), 0.1)), sz(3, 3), 3.0, 0.0),
        (PowerTest::Rank(rank_test(ScoreKind::NormalExact, sz(5, 3), 0.1)), sz(5, 3), 0.5, 0.0),
        (PowerTest::Mp(mp_test(sz(4, 4), 2.0, 0.05).unwrap()), sz(4, 4), 2.0, 0.0),
    ];
    for (i, (test, sizes, a, _)) in cases.iter().enumerate() {
        let exact = match test {
            PowerTest::Rank(t) => exact_power(t, *a).unwrap(),
            PowerTest::Mp(t) => t.power(*a).unwrap(),
            PowerTest::Comparator(_) => unreachable!(),
        };
        let alt = Alternative::lehmann(*a).unwrap();
        let est = power_mc(test, *sizes, &alt, &DistributionFamily::logistic(), reps, &RngSpec::new(i as u64)).unwrap();
        assert!(within(&est, exact, 4.0), "{}: {est:?} vs {exact}", test.id());
    }
}

#[test]
fn estimates_are_reproducible() {
    let sizes = sz(6, 7);
    let test = PowerTest::Comparator(
        ComparatorTest::permutation_mean(sizes, 0.05, PermutationConfig { exact_cap: 0, resamples: 199 }).unwrap(),
    );
    let alt = Alternative::local(2.0, DistributionFamily::normal()).unwrap();
    let spec = RngSpec::with_chunk_size(77, 250);
    let a = power_mc(&test, sizes, &alt, &DistributionFamily::normal(), 3000, &spec).unwrap();
    let b = power_mc(&test, sizes, &alt, &DistributionFamily::normal(), 3000, &spec).unwrap();
    assert_eq!(a, b);
}

#[test]
fn conservative_rank_test_has_no_randomization() {
    let sizes = sz(3, 3);
    let scores = score_vector(ScoreKind::Wilcoxon, 6, 1e-9).unwrap();
    let t = critical_value_with(&scores, sizes, 0.1, true, &ExactConfig::default()).unwrap();
    assert_eq!(t.gamma, 0.0);
    let est = power_mc(
        &PowerTest::Rank(t.clone()),
        sizes,
        &Alternative::lehmann(1.0).unwrap(),
        &DistributionFamily::uniform(),
        200_000,
        &RngSpec::new(3),
    )
    .unwrap();
    assert!(within(&est, t.size, 4.0));
}

#[test]
fn matching_reports_unreachable_targets() {
    let a = TestSpec::Rank { kind: ScoreKind::Wilcoxon, alpha: 0.1, conservative: false };
    let b = TestSpec::Rank { kind: ScoreKind::Wilcoxon, alpha: 0.001, conservative: false };
    let mut cfg = MatchConfig::new(2000, RngSpec::new(4));
    cfg.max_factor = 1;
    let err = matched_sample_size(&b, &a, &[10], 1.0, &DistributionFamily::logistic(), &cfg).unwrap_err();
    assert_eq!(err.name(), "NotBracketed");
}

#[test]
fn weaker_test_needs_more_observations() {
    // Conservative Wilcoxon at a tiny level loses power; it must need k > n.
    let a = TestSpec::TwoSampleT { alpha: 0.05 };
    let b = TestSpec::Rank { kind: ScoreKind::Wilcoxon, alpha: 0.02, conservative: false };
    let cfg = MatchConfig::new(4000, RngSpec::new(8));
    let rows = matched_sample_size(&b, &a, &[20], 2.5, &DistributionFamily::normal(), &cfg).unwrap();
    assert!(rows[0].deficiency > 0, "{:?}", rows[0]);
    assert!(rows[0].evaluations.windows(2).all(|w| w[0].0 < w[1].0));
}
