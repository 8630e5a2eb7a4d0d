use std::sync::Arc;

use rankpower::asymptotics::{fit_sqrt_n, matched_size};
use rankpower::special::{norm_cdf, norm_quantile};
use rankpower::*;

fn expansion(p0: impl Fn(f64) -> f64 + Send + Sync + 'static, a1: f64, a2: f64) -> PowerExpansion {
    PowerExpansion::new(Arc::new(p0), Arc::new(move |_| a1), Arc::new(move |_| a2), (0.0, 20.0)).unwrap()
}

#[test]
fn matched_scale_reciprocity() {
    let z = norm_quantile(0.95);
    let a = expansion(move |c| norm_cdf(c.powf(1.2) - z), 0.0, 0.0);
    let b = expansion(move |c| norm_cdf(1.5 * c - z), 0.0, 0.0);
    for &c in &[0.4, 1.0, 2.0, 3.5] {
        let e = are(&a, &b, c).unwrap();
        let back = are(&b, &a, c * e.sqrt()).unwrap();
        assert!((e * back - 1.0).abs() < 1e-8, "c={c}: {e} {back}");
    }
}

#[test]
fn gaussian_efficiency_ignores_c_and_alpha() {
    let mut values = Vec::new();
    for &alpha in &[0.01, 0.05, 0.2] {
        let a = GaussianLocalPower::new(1.7, alpha).unwrap().expansion();
        let b = GaussianLocalPower::new(1.1, alpha).unwrap().expansion();
        for &c in &[0.2, 0.9, 1.6, 3.0] {
            values.push(are(&a, &b, c).unwrap());
        }
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo < 1e-9);
    assert!((lo - (1.7f64 / 1.1).powi(2)).abs() < 1e-9);
}

#[test]
fn equal_first_order_terms_give_bounded_deficiency() {
    let z = norm_quantile(0.05);
    let a = expansion(move |c| norm_cdf(c + z), 0.1, 0.4);
    let b = expansion(move |c| norm_cdf(c + z), 0.1, 0.0);
    let grid: Vec<f64> = (0..13).map(|i| 10f64.powf(2.0 + 0.5 * i as f64)).collect();
    let fit = deficiency_curve(&a, &b, 1.0, &grid).unwrap();
    assert!(fit.h1.abs() < 1e-3, "{fit:?}");
    let d: Vec<f64> = fit.d_values().into_iter().map(Option::unwrap).collect();
    let half = grid.len() / 2;
    let (slope, _, _) = fit_sqrt_n(&grid[half..], &d[half..]).unwrap();
    assert!(slope.abs() < 1e-3);
    // The limit is 2 a2 / (c b0'(c)) when a1 = b1.
    let limit = 0.8 / rankpower::special::norm_pdf(1.0 + z);
    assert!((d[d.len() - 1] - limit).abs() < 0.01 * limit);
}

#[test]
fn leading_coefficient_matches_numeric_solve() {
    let z = norm_quantile(0.95);
    for &(a1, b1, c) in &[(0.1, 0.0, 1.0), (0.3, -0.2, 0.7), (-0.05, 0.1, 2.2)] {
        let a = expansion(move |c| norm_cdf(c - z), a1, 0.0);
        let b = expansion(move |c| norm_cdf(c - z), b1, 0.25);
        let h1 = deficiency_leading_coeff(&a, &b, c).unwrap();
        let n = 1e8;
        let numeric = (matched_size(&a, &b, c, n).unwrap() - n) / n.sqrt();
        assert!((numeric - h1).abs() < 0.01 * h1.abs(), "{a1} {b1} {c}: {numeric} vs {h1}");
        let fit = deficiency_curve(&a, &b, c, &[1e5, 1e6, 1e7, 1e8, 1e9]).unwrap();
        assert!((fit.h1 - h1).abs() < 0.01 * h1.abs());
    }
}

#[test]
fn too_few_points_is_a_degenerate_fit() {
    let g = GaussianLocalPower::new(1.0, 0.05).unwrap().expansion();
    let err = deficiency_curve(&g, &g, 1.0, &[10.0, 20.0]).unwrap_err();
    assert_eq!(err.name(), "DegenerateFit");
}

#[test]
fn tabulated_expansions_interpolate() {
    let z = norm_quantile(0.95);
    let mut csv = String::from("c,p0,p1,p2\n");
    for i in 0..=80 {
        let c = 0.05 * i as f64;
        csv.push_str(&format!("{c},{},{},0\n", norm_cdf(c - z), 0.1 * c));
    }
    let tab = PowerExpansion::from_csv_reader(csv.as_bytes()).unwrap();
    let exact = GaussianLocalPower::new(1.0, 0.05).unwrap().expansion();
    let e = are(&tab, &exact, 1.3).unwrap();
    assert!((e - 1.0).abs() < 1e-4);
    assert!((tab.p1(1.33) - 0.133).abs() < 1e-12);
}
