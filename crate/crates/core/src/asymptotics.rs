//! Efficiency and deficiency calculus on power expansions
//! `π_n(c) = p0(c) + p1(c) n^{-1/2} + p2(c) n^{-1}` against local
//! alternatives `θ = c n^{-1/2}`.
//!
//! Sample sizes are treated as real numbers: the power of B at size `k` is the
//! expansion evaluated at real `k`, with the alternative rescaled to
//! `c' = c (k/n)^{1/2}` so that both procedures face the same `θ`.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_quantile};

pub type CoeffFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const VALIDATION_GRID: usize = 257;
const SATURATION: f64 = 1e-9;
const ARE_LOWER: f64 = 1e-8;
const ARE_UPPER: f64 = 1e8;
/// Tolerance on the matched-power equation, in power units.
pub const POWER_TOLERANCE: f64 = 1e-10;
/// How far from 1 the efficiency may be before deficiencies are refused.
pub const ARE_UNITY_TOLERANCE: f64 = 1e-6;

/// Power expansion coefficients of one procedure on a declared domain of `c`.
#[derive(Clone)]
pub struct PowerExpansion {
    p0: CoeffFn,
    p1: CoeffFn,
    p2: CoeffFn,
    domain: (f64, f64),
}

impl fmt::Debug for PowerExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PowerExpansion").field("domain", &self.domain).finish_non_exhaustive()
    }
}

fn zero() -> CoeffFn {
    Arc::new(|_| 0.0)
}

impl PowerExpansion {
    /// Builds an expansion and checks on a grid that `p0` is a probability,
    /// nondecreasing, and strictly increasing wherever it is not within
    /// 1e-9 of 0 or 1 (where floating point cannot resolve the increase).
    /// Infinite upper limits are checked on `[lo, lo + 100]`.
    pub fn new(p0: CoeffFn, p1: CoeffFn, p2: CoeffFn, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo >= 0.0) || !(hi > lo) || lo.is_infinite() {
            return Err(Error::InvalidParameter(format!("bad domain [{lo}, {hi}]")));
        }
        let exp = PowerExpansion { p0, p1, p2, domain };
        exp.validate()?;
        Ok(exp)
    }

    /// First-order expansion (`p1 = p2 = 0`).
    pub fn first_order(p0: CoeffFn, domain: (f64, f64)) -> Result<Self> {
        Self::new(p0, zero(), zero(), domain)
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        let top = if hi.is_finite() { hi } else { lo + 100.0 };
        let mut prev: Option<f64> = None;
        for i in 0..VALIDATION_GRID {
            // Interior points: the ends of an open domain such as (0, ∞) may be degenerate.
            let c = lo + (top - lo) * (i as f64 + 0.5) / VALIDATION_GRID as f64;
            let v = (self.p0)(c);
            if !v.is_finite() {
                return Err(Error::NonFinite(c));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("p0({c}) = {v} is not a probability")));
            }
            if let Some(p) = prev {
                if v < p || (v == p && v > SATURATION && v < 1.0 - SATURATION) {
                    return Err(Error::InvalidParameter(format!("p0 is not strictly increasing near c = {c}")));
                }
            }
            for (name, f) in [("p1", &self.p1), ("p2", &self.p2)] {
                if !f(c).is_finite() {
                    return Err(Error::InvalidParameter(format!("{name}({c}) is not finite")));
                }
            }
            prev = Some(v);
        }
        Ok(())
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn contains(&self, c: f64) -> bool {
        c >= self.domain.0 && c <= self.domain.1
    }

    pub fn p0(&self, c: f64) -> f64 {
        (self.p0)(c)
    }

    pub fn p1(&self, c: f64) -> f64 {
        (self.p1)(c)
    }

    pub fn p2(&self, c: f64) -> f64 {
        (self.p2)(c)
    }

    /// The expansion truncated after the `n^{-1}` term, at real `n`.
    pub fn power(&self, c: f64, n: f64) -> f64 {
        self.p0(c) + self.p1(c) / n.sqrt() + self.p2(c) / n
    }

    /// Reads a table with header `c,p0,p1,p2`; see [`CoefficientTable`].
    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Table(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        CoefficientTable::from_reader(reader)?.into_expansion()
    }
}

/// `p0(c) = Φ(e·c − z_α)` with `p1 = p2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLocalPower {
    pub efficacy: f64,
    pub alpha: f64,
}

impl GaussianLocalPower {
    pub fn new(efficacy: f64, alpha: f64) -> Result<Self> {
        if !(efficacy > 0.0) || !efficacy.is_finite() {
            return Err(Error::InvalidParameter(format!("efficacy must be positive, got {efficacy}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(GaussianLocalPower { efficacy, alpha })
    }

    pub fn z_alpha(&self) -> f64 {
        norm_quantile(1.0 - self.alpha)
    }

    pub fn p0(&self, c: f64) -> f64 {
        norm_cdf(self.efficacy * c - self.z_alpha())
    }

    pub fn expansion(&self) -> PowerExpansion {
        let (e, z) = (self.efficacy, self.z_alpha());
        PowerExpansion {
            p0: Arc::new(move |c| norm_cdf(e * c - z)),
            p1: zero(),
            p2: zero(),
            domain: (0.0, f64::INFINITY),
        }
    }
}

/// Tabulated coefficients with monotone (Fritsch–Carlson) cubic interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub c: Vec<f64>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl CoefficientTable {
    /// Parses CSV with header exactly `c,p0,p1,p2` and strictly increasing `c`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Table(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["c", "p0", "p1", "p2"] {
            return Err(Error::Table(format!("expected header c,p0,p1,p2, got {}", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut t = CoefficientTable { c: vec![], p0: vec![], p1: vec![], p2: vec![] };
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Table(e.to_string()))?;
            let mut vals = [0.0f64; 4];
            for (j, v) in vals.iter_mut().enumerate() {
                let field = rec.get(j).ok_or_else(|| Error::Table(format!("row {}: missing column", line + 1)))?;
                *v = field
                    .parse()
                    .map_err(|_| Error::Table(format!("row {}: cannot parse '{field}'", line + 1)))?;
                if !v.is_finite() {
                    return Err(Error::Table(format!("row {}: non-finite value", line + 1)));
                }
            }
            t.c.push(vals[0]);
            t.p0.push(vals[1]);
            t.p1.push(vals[2]);
            t.p2.push(vals[3]);
        }
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        if self.c.len() < 2 {
            return Err(Error::Table("need at least two rows".into()));
        }
        if self.c.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("c must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn into_expansion(self) -> Result<PowerExpansion> {
        self.check()?;
        let domain = (self.c[0], self.c[self.c.len() - 1]);
        let c = Arc::new(self.c);
        let f = |y: Vec<f64>| -> CoeffFn {
            let interp = Pchip::new(Arc::clone(&c), y);
            Arc::new(move |x| interp.eval(x))
        };
        PowerExpansion::new(f(self.p0), f(self.p1), f(self.p2), domain)
    }
}

/// Piecewise cubic Hermite interpolant preserving monotonicity of the data.
/// Evaluates to NaN outside the tabulated range.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Arc<Vec<f64>>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Arc<Vec<f64>>, y: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = edge(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { x, y, d }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let x = &self.x;
        let n = x.len();
        if !(t >= x[0] && t <= x[n - 1]) {
            return f64::NAN;
        }
        let k = match x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = x[k + 1] - x[k];
        let s = (t - x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

// Shape-preserving three-point end slope.
fn edge(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// Asymptotic relative efficiency `E` solving `a0(c) = b0(c·E^{1/2})`.
///
/// Bisection on `log E` over `[1e-8, 1e8]` intersected with B's domain,
/// to relative tolerance well below 1e-10.
pub fn are(a: &PowerExpansion, b: &PowerExpansion, c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    if !a.contains(c) {
        return Err(Error::InvalidParameter(format!("c = {c} outside the domain of A")));
    }
    let target = a.p0(c);
    if !target.is_finite() {
        return Err(Error::NonFinite(c));
    }
    let (dlo, dhi) = b.domain();
    let mut lo = ARE_LOWER.max((dlo / c).powi(2));
    let mut hi = ARE_UPPER.min((dhi / c).powi(2));
    if !(lo <= hi) {
        return Err(Error::NoSolution(format!("domain of B excludes every E at c = {c}")));
    }
    let g = |e: f64| b.p0(c * e.sqrt()) - target;
    let (glo, ghi) = (g(lo), g(hi));
    if !glo.is_finite() || !ghi.is_finite() {
        return Err(Error::NonFinite(c));
    }
    if glo > 0.0 || ghi < 0.0 {
        return Err(Error::NoSolution(format!("b0 does not attain a0({c}) = {target} for E in [{lo:e}, {hi:e}]")));
    }
    if glo == 0.0 {
        return Ok(lo);
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        let v = g(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 <= 1e-14 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Central difference of order 1 or 2 with steps `1e-6·max(1,|x|)` and
/// `1e-4·max(1,|x|)` respectively.
pub fn numeric_derivative<F: Fn(f64) -> f64>(f: F, x: f64, order: u8) -> Result<f64> {
    numeric_derivative_in(f, x, order, (f64::NEG_INFINITY, f64::INFINITY))
}

/// As [`numeric_derivative`], but the stencil stays inside `domain`; near an
/// end point a one-sided second-order formula is used.
pub fn numeric_derivative_in<F: Fn(f64) -> f64>(f: F, x: f64, order: u8, domain: (f64, f64)) -> Result<f64> {
    let (lo, hi) = domain;
    if !(x >= lo && x <= hi) {
        return Err(Error::InvalidParameter(format!("x = {x} outside [{lo}, {hi}]")));
    }
    let h = match order {
        1 => 1e-6,
        2 => 1e-4,
        _ => return Err(Error::InvalidParameter(format!("derivative order must be 1 or 2, got {order}"))),
    } * x.abs().max(1.0);
    let span = if order == 1 { 2.0 } else { 3.0 };
    let eval = |t: f64| -> Result<f64> {
        let v = f(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(t))
        }
    };
    let (left, right) = (x - h >= lo, x + h <= hi);
    if left && right {
        let (fm, fp) = (eval(x - h)?, eval(x + h)?);
        return Ok(if order == 1 {
            (fp - fm) / (2.0 * h)
        } else {
            (fp - 2.0 * eval(x)? + fm) / (h * h)
        });
    }
    let s = if right && x + span * h <= hi {
        1.0
    } else if left && x - span * h >= lo {
        -1.0
    } else {
        return Err(Error::InvalidParameter(format!("domain [{lo}, {hi}] too narrow for a stencil at {x}")));
    };
    let at = |j: f64| eval(x + s * j * h);
    Ok(if order == 1 {
        s * (-3.0 * at(0.0)? + 4.0 * at(1.0)? - at(2.0)?) / (2.0 * h)
    } else {
        (2.0 * at(0.0)? - 5.0 * at(1.0)? + 4.0 * at(2.0)? - at(3.0)?) / (h * h)
    })
}

/// Matched sample size at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct DeficiencyPoint {
    pub n: f64,
    /// Real sample size at which B matches A, or the error name on failure.
    pub k: std::result::Result<f64, String>,
}

impl DeficiencyPoint {
    pub fn deficiency(&self) -> Option<f64> {
        self.k.as_ref().ok().map(|k| k - self.n)
    }
}

/// Least-squares fit `d_n ≈ h1·√n + h2` over the solved grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct DeficiencyFit {
    pub points: Vec<DeficiencyPoint>,
    pub h1: f64,
    pub h2: f64,
    /// Euclidean norm of the fit residuals.
    pub residual: f64,
}

impl DeficiencyFit {
    pub fn n_grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.n).collect()
    }

    pub fn d_values(&self) -> Vec<Option<f64>> {
        self.points.iter().map(DeficiencyPoint::deficiency).collect()
    }
}

/// Fits `d ≈ h1·√n + h2`; returns `(h1, h2, residual norm)`.
pub fn fit_sqrt_n(n: &[f64], d: &[f64]) -> Result<(f64, f64, f64)> {
    if n.len() != d.len() {
        return Err(Error::LengthMismatch { expected: n.len(), actual: d.len() });
    }
    if n.len() < 3 {
        return Err(Error::DegenerateFit { usable: n.len() });
    }
    let s: Vec<f64> = n.iter().map(|v| v.sqrt()).collect();
    let len = s.len() as f64;
    let ms = s.iter().sum::<f64>() / len;
    let md = d.iter().sum::<f64>() / len;
    let sxx: f64 = s.iter().map(|v| (v - ms) * (v - ms)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit { usable: 1 });
    }
    let sxy: f64 = s.iter().zip(d).map(|(x, y)| (x - ms) * (y - md)).sum();
    let h1 = sxy / sxx;
    let h2 = md - h1 * ms;
    let residual = s.iter().zip(d).map(|(x, y)| (y - h1 * x - h2).powi(2)).sum::<f64>().sqrt();
    Ok((h1, h2, residual))
}

fn require_unit_are(a: &PowerExpansion, b: &PowerExpansion, c: f64) -> Result<()> {
    let e = are(a, b, c)?;
    if (e - 1.0).abs() > ARE_UNITY_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "efficiency at c = {c} is {e}, deficiencies need it to equal 1"
        )));
    }
    Ok(())
}

/// Solves `π̃_{k,B}(c√(k/n)) = π̃_{n,A}(c)` for real `k`.
pub fn matched_size(a: &PowerExpansion, b: &PowerExpansion, c: f64, n: f64) -> Result<f64> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidParameter(format!("n must be positive, got {n}")));
    }
    let target = a.power(c, n);
    if !target.is_finite() {
        return Err(Error::NonFinite(c));
    }
    let (dlo, dhi) = b.domain();
    let kmin = n * (dlo / c).powi(2);
    let kmax = n * (dhi / c).powi(2);
    let g = |k: f64| b.power(c * (k / n).sqrt(), k) - target;
    let g0 = g(n);
    if !g0.is_finite() {
        return Err(Error::NonFinite(n));
    }
    if g0 == 0.0 {
        return Ok(n);
    }
    // Step away from n by doubling until the sign changes.
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let mut step = n.sqrt().max(1.0);
    let mut near = n;
    let far;
    loop {
        let mut cand = n + dir * step;
        if dir < 0.0 {
            cand = cand.max(0.5 * (near + kmin.max(0.0)));
        } else {
            cand = cand.min(kmax);
        }
        if cand == near || cand <= 0.0 {
            return Err(Error::NoSolution(format!("matched size for n = {n} leaves the domain")));
        }
        let v = g(cand);
        if !v.is_finite() {
            return Err(Error::NonFinite(cand));
        }
        if v == 0.0 {
            return Ok(cand);
        }
        if (v > 0.0) == (dir > 0.0) {
            far = cand;
            break;
        }
        near = cand;
        step *= 2.0;
        if step > 1e6 * n {
            return Err(Error::NoSolution(format!("matched size for n = {n} not bracketed")));
        }
    }
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let k = 0.5 * (lo + hi);
    let resid = g(k).abs();
    if resid > POWER_TOLERANCE {
        return Err(Error::NoSolution(format!(
            "matched-power residual {resid:e} at n = {n} (expansion not monotone in k?)"
        )));
    }
    Ok(k)
}

/// Deficiencies `d_n = k_n − n` over `n_grid` and the fit `h1·√n + h2`.
/// Grid points where no solution exists are kept with their error.
pub fn deficiency_curve(a: &PowerExpansion, b: &PowerExpansion, c: f64, n_grid: &[f64]) -> Result<DeficiencyFit> {
    require_unit_are(a, b, c)?;
    let points: Vec<DeficiencyPoint> = n_grid
        .par_iter()
        .map(|&n| DeficiencyPoint { n, k: matched_size(a, b, c, n).map_err(|e| e.name().to_string()) })
        .collect();
    let (ns, ds): (Vec<f64>, Vec<f64>) =
        points.iter().filter_map(|p| p.deficiency().map(|d| (p.n, d))).unzip();
    if ns.len() < 3 {
        return Err(Error::DegenerateFit { usable: ns.len() });
    }
    let (h1, h2, residual) = fit_sqrt_n(&ns, &ds)?;
    Ok(DeficiencyFit { points, h1, h2, residual })
}

/// Leading deficiency coefficient `h1 = 2(a1(c) − b1(c)) / (c·b0'(c))`.
pub fn deficiency_leading_coeff(a: &PowerExpansion, b: &PowerExpansion, c: f64) -> Result<f64> {
    require_unit_are(a, b, c)?;
    let slope = numeric_derivative_in(|t| b.p0(t), c, 1, b.domain())?;
    if slope.abs() < 1e-12 {
        return Err(Error::ZeroDerivative(slope));
    }
    Ok(2.0 * (a.p1(c) - b.p1(c)) / (c * slope))
}
