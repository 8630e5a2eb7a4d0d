//! Acceptance suite. Each test checks one criterion and prints a single
//! `criterion N: PASS|FAIL` line. Run with
//! `cargo test --release -p rankpower-cli --test acceptance -- --nocapture --test-threads=1`.

use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rankpower::asymptotics::{fit_sqrt_n, matched_size};
use rankpower::ranks::DEFAULT_ENUMERATION_CAP;
use rankpower::simulate::PermutationConfig;
use rankpower::special::{norm_cdf, norm_pdf, norm_quantile};
use rankpower::*;

fn report(id: &str, ok: bool, detail: &str, started: Instant) {
    println!(
        "criterion {id}: {} ({detail}; {:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

fn sz(m: usize, n: usize) -> SampleSizes {
    SampleSizes::new(m, n).unwrap()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `P(pattern)` for ordered pooled positions (`true` = Y) under X ~ U,
/// Y ~ U^{1/a}, by nested cumulative integration of the ordered cube
/// integral in `σ = sqrt(v)`, where every integrand is smooth.
fn cube_probability(pattern: &[bool], a: f64) -> f64 {
    const M: usize = 4096;
    let h = 1.0 / M as f64;
    let sigma: Vec<f64> = (0..=M).map(|i| i as f64 * h).collect();
    let dens = |y: bool, s: f64| if y { 2.0 * a * s.powf(2.0 * a - 1.0) } else { 2.0 * s };
    let mut f = vec![1.0; M + 1];
    for &is_y in pattern {
        let g: Vec<f64> = (0..=M).map(|i| dens(is_y, sigma[i]) * f[i]).collect();
        let mut next = vec![0.0; M + 1];
        for i in 0..M {
            let step = if i == 0 {
                9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3]
            } else if i == M - 1 {
                g[M - 3] - 5.0 * g[M - 2] + 19.0 * g[M - 1] + 9.0 * g[M]
            } else {
                -g[i - 1] + 13.0 * g[i] + 13.0 * g[i + 1] - g[i + 2]
            };
            next[i + 1] = next[i] + step * h / 24.0;
        }
        f = next;
    }
    let n = pattern.iter().filter(|&&y| y).count();
    factorial(pattern.len() - n) * factorial(n) * f[M]
}

fn pattern_of(r: &RankSet) -> Vec<bool> {
    let big_n = r.sizes().total();
    (1..=big_n as u32).map(|k| r.ranks().contains(&k)).collect()
}

fn uniform(rng: &mut Xoshiro256PlusPlus) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

#[test]
fn criterion_01_lehmann_law_exactness() {
    let started = Instant::now();
    let alphas = [0.5, 1.5, 2.0, 3.0];
    let mut worst_norm: f64 = 0.0;
    for m in 1..=4 {
        for n in 1..=4 {
            for &a in &alphas {
                let total: f64 = enumerate_ranksets(sz(m, n), DEFAULT_ENUMERATION_CAP)
                    .unwrap()
                    .map(|r| rankset_prob_lehmann(&r, a).unwrap())
                    .sum();
                worst_norm = worst_norm.max((total - 1.0).abs());
            }
        }
    }

    // Monte Carlo: 10^7 pooled samples of 3 X and 3 Y; sizes (m, n) use the
    // first m and n draws, and ln U is shared across exponents.
    const REPS: u64 = 10_000_000;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2024);
    let mut counts = vec![vec![0u64; 64]; 9 * alphas.len()];
    let mut x = [0.0; 3];
    let mut ln_u = [0.0; 3];
    let mut y = [0.0; 3];
    for _ in 0..REPS {
        for j in 0..3 {
            x[j] = uniform(&mut rng);
            ln_u[j] = uniform(&mut rng).ln();
        }
        for (ai, &a) in alphas.iter().enumerate() {
            for j in 0..3 {
                y[j] = (ln_u[j] / a).exp();
            }
            for m in 1..=3 {
                for n in 1..=3 {
                    let mut mask = 0usize;
                    for j in 0..n {
                        let mut rank = 1;
                        for &xv in &x[..m] {
                            rank += (xv < y[j]) as usize;
                        }
                        for &yv in &y[..n] {
                            rank += (yv < y[j]) as usize;
                        }
                        mask |= 1 << (rank - 1);
                    }
                    counts[ai * 9 + (m - 1) * 3 + (n - 1)][mask] += 1;
                }
            }
        }
    }

    let (mut worst_cube, mut worst_z): (f64, f64) = (0.0, 0.0);
    let mut cells = 0;
    for (ai, &a) in alphas.iter().enumerate() {
        for m in 1..=3 {
            for n in 1..=3 {
                for r in enumerate_ranksets(sz(m, n), DEFAULT_ENUMERATION_CAP).unwrap() {
                    let p = rankset_prob_lehmann(&r, a).unwrap();
                    worst_cube = worst_cube.max((cube_probability(&pattern_of(&r), a) - p).abs());
                    let mask: usize = r.ranks().iter().map(|&k| 1usize << (k - 1)).sum();
                    let freq = counts[ai * 9 + (m - 1) * 3 + (n - 1)][mask] as f64 / REPS as f64;
                    let se = (p * (1.0 - p) / REPS as f64).sqrt();
                    worst_z = worst_z.max((freq - p).abs() / se);
                    cells += 1;
                }
            }
        }
    }
    let ok = worst_norm < 1e-10 && worst_cube < 1e-6 && worst_z < 4.0 && started.elapsed().as_secs() < 60;
    report(
        "1",
        ok,
        &format!(
            "max |sum-1| = {worst_norm:.1e}; {cells} rank-set probabilities: max |cube - formula| = {worst_cube:.1e}, max MC z = {worst_z:.2}"
        ),
        started,
    );
}

#[test]
fn criterion_02_null_power_equals_alpha() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for m in 1..=6 {
        for n in 1..=6 {
            let sizes = sz(m, n);
            for &alpha in &[0.01, 0.05, 0.1, 1.0 / 6.0] {
                for kind in ScoreKind::BUILT_IN {
                    let scores = score_vector(kind, m + n, 1e-10).unwrap();
                    let t = critical_value(&scores, sizes, alpha).unwrap();
                    worst = worst.max((exact_power(&t, 1.0).unwrap() - alpha).abs());
                    count += 1;
                }
                let mp = mp_test(sizes, 2.0, alpha).unwrap();
                worst = worst.max((mp.power(1.0).unwrap() - alpha).abs());
                count += 1;
            }
        }
    }
    report("2", worst <= 1e-12, &format!("{count} tests, max |power(a=1) - alpha| = {worst:.1e}"), started);
}

#[test]
fn criterion_03_pinned_values() {
    let started = Instant::now();
    let top = |a: f64| rankset_prob_lehmann(&RankSet::new(vec![2], sz(1, 1)).unwrap(), a).unwrap();
    let scores = score_vector(ScoreKind::Wilcoxon, 4, 1e-9).unwrap();
    let test = critical_value(&scores, sz(2, 2), 1.0 / 6.0).unwrap();
    let power = exact_power(&test, 2.0).unwrap();
    // The same quantities from the integration oracle.
    let cube_top2 = cube_probability(&[false, true], 2.0);
    let cube_top3 = cube_probability(&[false, true], 3.0);
    let cube_power: f64 = enumerate_ranksets(sz(2, 2), DEFAULT_ENUMERATION_CAP)
        .unwrap()
        .map(|r| cube_probability(&pattern_of(&r), 2.0) * test.decision(statistic(&scores, &r).unwrap()))
        .sum();
    let checks = [
        (top(2.0), 2.0 / 3.0),
        (top(3.0), 0.75),
        (power, 1.0 / 3.0),
        (cube_top2, 2.0 / 3.0),
        (cube_top3, 0.75),
        (cube_power, 1.0 / 3.0),
    ];
    let worst = checks.iter().map(|(v, e)| (v - e).abs()).fold(0.0, f64::max);
    report(
        "3",
        worst <= 1e-12,
        &format!("P(top|a=2) = {}, P(top|a=3) = {}, power = {}; max error {worst:.1e}", top(2.0), top(3.0), power),
        started,
    );
}

#[test]
fn criterion_04_neyman_pearson_dominance() {
    let started = Instant::now();
    let sizes = sz(4, 4);
    let mut ok = true;
    let mut detail = Vec::new();
    for &alpha in &[0.05, 0.1] {
        let mp = mp_test(sizes, 2.0, alpha).unwrap().power(2.0).unwrap();
        let mut others = Vec::new();
        for kind in ScoreKind::BUILT_IN {
            let t = critical_value(&score_vector(kind, 8, 1e-10).unwrap(), sizes, alpha).unwrap();
            let p = exact_power(&t, 2.0).unwrap();
            ok &= mp >= p - 1e-15;
            others.push(format!("{kind}={p:.6}"));
        }
        detail.push(format!("alpha={alpha}: mp={mp:.6} vs {}", others.join(" ")));
    }
    report("4", ok && started.elapsed().as_secs_f64() < 1.0, &detail.join("; "), started);
}

#[test]
fn criterion_05_lmp_identity() {
    let started = Instant::now();
    let h = 1e-5;
    let mut inversions = 0;
    let mut pairs = 0u64;
    for big_n in 2..=8usize {
        let savage = lmp_scores(big_n).unwrap();
        for n in 1..big_n {
            let sets: Vec<RankSet> = enumerate_ranksets(sz(big_n - n, n), DEFAULT_ENUMERATION_CAP).unwrap().collect();
            let keys: Vec<(f64, f64)> = sets
                .iter()
                .map(|r| {
                    let d = (rankset_prob_lehmann(r, 1.0 + h).unwrap().ln()
                        - rankset_prob_lehmann(r, 1.0 - h).unwrap().ln())
                        / (2.0 * h);
                    (d, statistic(&savage, r).unwrap())
                })
                .collect();
            for i in 0..keys.len() {
                for j in i + 1..keys.len() {
                    let dd = keys[i].0 - keys[j].0;
                    let ds = keys[i].1 - keys[j].1;
                    pairs += 1;
                    // Differences below 1e-7 count as ties on either scale.
                    let sd = if dd.abs() < 1e-7 { 0 } else { dd.signum() as i8 };
                    let ss = if ds.abs() < 1e-7 { 0 } else { ds.signum() as i8 };
                    if sd != ss {
                        inversions += 1;
                    }
                }
            }
        }
    }
    report(
        "5",
        inversions == 0 && started.elapsed().as_secs() < 60,
        &format!("{pairs} rank-set pairs with N <= 8, {inversions} inversions"),
        started,
    );
}

#[test]
fn criterion_06_distribution_free_alternative() {
    let started = Instant::now();
    let sizes = sz(5, 5);
    let t = critical_value(&score_vector(ScoreKind::Wilcoxon, 10, 1e-9).unwrap(), sizes, 0.1).unwrap();
    let exact = exact_power(&t, 2.0).unwrap();
    let test = PowerTest::Rank(t);
    let alt = Alternative::lehmann(2.0).unwrap();
    let mut ok = true;
    let mut detail = vec![format!("exact {exact:.6}")];
    for (i, fam) in [DistributionFamily::normal(), DistributionFamily::exponential(), DistributionFamily::cauchy()]
        .iter()
        .enumerate()
    {
        let est = power_mc(&test, sizes, &alt, fam, 1_000_000, &RngSpec::new(600 + i as u64)).unwrap();
        let z = (est.estimate - exact) / est.std_error;
        ok &= z.abs() < 4.0;
        detail.push(format!("{} {:.6} (z={z:.2})", fam.kind, est.estimate));
    }
    report("6", ok, &detail.join(", "), started);
}

#[test]
fn criterion_07_are_solver() {
    let started = Instant::now();
    let g = |e: f64| GaussianLocalPower::new(e, 0.05).unwrap().expansion();
    let mut worst = [0.0f64; 3];
    for &c in &[0.25, 0.5, 1.0, 2.0, 3.0] {
        worst[0] = worst[0].max((are(&g(2.0), &g(1.0), c).unwrap() - 4.0).abs());
        worst[1] = worst[1].max((are(&g(1.0), &g(2.0), c).unwrap() - 0.25).abs());
        worst[2] = worst[2].max((are(&g(1.0), &g(1.0), c).unwrap() - 1.0).abs());
    }
    report(
        "7",
        worst[0] <= 1e-9 && worst[1] <= 1e-9 && worst[2] <= 1e-12,
        &format!("max errors: (2,1)->4 {:.1e}, (1,2)->1/4 {:.1e}, A=B->1 {:.1e}", worst[0], worst[1], worst[2]),
        started,
    );
}

#[test]
fn criterion_08_deficiency_calculus() {
    let started = Instant::now();
    let z = norm_quantile(0.95);
    let exp = |a1: f64, a2: f64| {
        PowerExpansion::new(
            Arc::new(move |c: f64| norm_cdf(c - z)),
            Arc::new(move |_| a1),
            Arc::new(move |_| a2),
            (0.0, 10.0),
        )
        .unwrap()
    };
    let grid: Vec<f64> = (0..13).map(|i| 10f64.powf(2.0 + 0.5 * i as f64)).collect();

    let same = exp(0.1, 0.3);
    let fit_same = deficiency_curve(&same, &same, 1.0, &grid).unwrap();
    let zero_ok = fit_same.d_values().iter().all(|d| *d == Some(0.0)) && fit_same.h1 == 0.0 && fit_same.h2 == 0.0;

    let fit_eq = deficiency_curve(&exp(0.1, 0.4), &exp(0.1, 0.0), 1.0, &grid).unwrap();
    let d: Vec<f64> = fit_eq.d_values().into_iter().map(Option::unwrap).collect();
    let half = grid.len() / 2;
    let (top_slope, _, _) = fit_sqrt_n(&grid[half..], &d[half..]).unwrap();
    let const_ok = fit_eq.h1.abs() < 1e-3 && top_slope.abs() < 1e-3;

    let (a, b) = (exp(0.1, 0.0), exp(0.0, 0.0));
    let h1 = deficiency_leading_coeff(&a, &b, 1.0).unwrap();
    let n = 1e8;
    let numeric = (matched_size(&a, &b, 1.0, n).unwrap() - n) / n.sqrt();
    let analytic = 0.2 / norm_pdf(1.0 - z);
    let coeff_ok = (numeric - h1).abs() < 0.01 * h1.abs() && (h1 - analytic).abs() < 1e-6 && (h1 - 0.617).abs() < 1e-3;

    report(
        "8",
        zero_ok && const_ok && coeff_ok,
        &format!(
            "A=B d=0: {zero_ok}; a1=b1: h1={:.2e}, top-half slope={top_slope:.2e}, d(1e8)={:.4}; 0.617 instance: closed form {h1:.6}, d/sqrt(n) at 1e8 = {numeric:.6}",
            fit_eq.h1,
            d[d.len() - 1]
        ),
        started,
    );
}

fn weighted_slope(x: &[f64], y: &[f64], se: &[f64]) -> (f64, f64) {
    let w: Vec<f64> = se.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (x - mx) * (y - my)).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

#[test]
fn criterion_09_monte_carlo_deficiency_trends() {
    let started = Instant::now();
    let reps = 100_000;
    let perm = PermutationConfig::default();

    // (a) Wilcoxon against the efficient-score test under logistic shift.
    let a_ref = TestSpec::EfficientScore { family: FamilyKind::Logistic, alpha: 0.05, perm };
    let b_wil = TestSpec::Rank { kind: ScoreKind::Wilcoxon, alpha: 0.05, conservative: false };
    let grid_a = [50, 100, 200, 350, 500];
    let cfg = MatchConfig::new(reps, RngSpec::new(9001));
    let rows_a = matched_sample_size(&b_wil, &a_ref, &grid_a, 4.0, &DistributionFamily::logistic(), &cfg).unwrap();
    let x: Vec<f64> = rows_a.iter().map(|r| (r.n as f64).sqrt()).collect();
    let d: Vec<f64> = rows_a.iter().map(|r| r.deficiency as f64).collect();
    // Standard error of d_n from the Monte Carlo resolution, at least one observation.
    let se: Vec<f64> = rows_a.iter().map(|r| (r.k_resolution / 2.0).max(1.0)).collect();
    let (slope, slope_se) = weighted_slope(&x, &d, &se);
    let ok_a = slope < 3.0 * slope_se && se.iter().all(|s| s.is_finite());
    let detail_a: Vec<String> =
        rows_a.iter().map(|r| format!("n={} d={} (±{:.1})", r.n, r.deficiency, r.k_resolution / 2.0)).collect();

    // (b) Permutation mean test against the t test under normal shift.
    let a_t = TestSpec::TwoSampleT { alpha: 0.05 };
    let b_perm = TestSpec::PermutationMean { alpha: 0.05, perm };
    let grid_b = [25, 50, 100, 200];
    let cfg_b = MatchConfig::new(reps, RngSpec::new(9002));
    let rows_b = matched_sample_size(&b_perm, &a_t, &grid_b, 2.5, &DistributionFamily::normal(), &cfg_b).unwrap();
    let mut ok_b = true;
    let mut detail_b = Vec::new();
    for r in &rows_b {
        let at_n = &r.evaluations.iter().find(|(k, _)| *k == r.n).expect("search starts at n").1;
        let gap = at_n.estimate - r.target.estimate;
        let band = 2.0 * (r.target.std_error.powi(2) + at_n.std_error.powi(2)).sqrt();
        ok_b &= r.deficiency == 0 || gap.abs() <= band;
        detail_b.push(format!("n={} d={} gap={gap:+.4} band={band:.4}", r.n, r.deficiency));
    }
    report(
        "9",
        ok_a && ok_b && started.elapsed().as_secs() < 3600,
        &format!(
            "(a) {} slope={slope:.3} se={slope_se:.3} [{}]; (b) {} [{}]",
            if ok_a { "no growth" } else { "growth" },
            detail_a.join(", "),
            if ok_b { "zero" } else { "nonzero" },
            detail_b.join(", ")
        ),
        started,
    );
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rankpower"))
        .args(args)
        .env_remove("RANKPOWER_THREADS")
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn criterion_10_cli_determinism() {
    let started = Instant::now();
    let cases: [&[&str]; 3] = [
        &["power-mc", "--m", "6", "--n", "7", "--a", "2", "--family", "cauchy", "--alpha", "0.05", "--reps", "40000", "--seed", "42"],
        &[
            "power-mc", "--m", "8", "--n", "8", "--c", "2", "--family", "normal", "--test", "perm-mean", "--alpha",
            "0.05", "--reps", "2000", "--perm-resamples", "99", "--seed", "7", "--format", "csv",
        ],
        &[
            "deficiency-mc", "--test-a", "t", "--test-b", "wilcoxon", "--family", "normal", "--c", "2", "--n-grid",
            "10,20", "--reps", "3000", "--seed", "3",
        ],
    ];
    let mut ok = true;
    for case in cases {
        let mut outputs = Vec::new();
        for threads in ["1", "1", "3"] {
            let mut args = case.to_vec();
            args.extend(["--threads", threads, "--chunk-size", "500"]);
            let (code, out) = run(&args);
            ok &= code == 0;
            outputs.push(out);
        }
        ok &= outputs[0] == outputs[1] && outputs[0] == outputs[2];
    }
    report("10", ok, "3 stochastic commands, repeated and with --threads 1 vs 3: byte-identical", started);
}
