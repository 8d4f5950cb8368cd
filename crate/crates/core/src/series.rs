//! Truncated complex power series about a finite center.
//!
//! Every numeric object in the crate eventually passes through [`PowerSeries`]:
//! Taylor expansions of catalog functions, local solutions of the
//! factorization ODEs, and the divided-derivative recursion all use the
//! arithmetic defined here. Coefficient `n` multiplies `(z - center)^n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

/// Default truncation length used across the crate.
pub const DEFAULT_ORDER: usize = 64;

const CENTER_TOL: f64 = 1e-14;
const COMPOSE_TOL: f64 = 1e-12;
/// Coefficients below this magnitude are treated as exact zeros by the radius fit.
const FIT_FLOOR: f64 = 1e-300;
/// Points more than this far (natural-log units) below the upper hull of
/// `ln|c_n|` are cancellation dips and are skipped like zeros.
const HULL_DROP: f64 = 2.0;
const FIT_RESIDUAL_MAX: f64 = 0.5;
const OSCILLATION_RESIDUAL: f64 = 0.1;
/// Local radius growth between the two halves of the fit window above which
/// the decay is called super-geometric.
const ENTIRE_GROWTH: f64 = 1.1;
/// Convolution-ratio level (decades) below which decay is called factorial.
const NOISE_DEFECT: f64 = -6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series centers differ: {0} vs {1}")]
    CenterMismatch(C64, C64),
    #[error("inner constant term {inner} does not match outer center {outer}")]
    ConstantTermMismatch { outer: C64, inner: C64 },
    #[error("logarithm of a series with zero constant term")]
    LogOfZeroConstantTerm,
    #[error("radius estimation needs order >= 16, got {0}")]
    InsufficientOrder(usize),
    #[error("a power series needs at least one coefficient")]
    Empty,
    #[error("non-finite coefficient at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    center: C64,
    coeffs: Vec<C64>,
}

/// Value of a truncated series together with a tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: C64,
    pub error: f64,
    /// Set when the point lies at or beyond the estimated radius.
    pub outside: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusMethod {
    HadamardFit,
    Ratio,
    DeclaredEntire,
}

/// Empirical radius of convergence read off the coefficient tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    /// `None` means the tail decays super-geometrically (treated as entire).
    pub value: Option<f64>,
    pub method: RadiusMethod,
    pub fit_window: (usize, usize),
    pub fit_residual: f64,
}

impl RadiusEstimate {
    pub fn is_unbounded(&self) -> bool {
        self.value.is_none()
    }

    /// Radius as a float, `f64::INFINITY` when unbounded.
    pub fn as_f64(&self) -> f64 {
        self.value.unwrap_or(f64::INFINITY)
    }
}

impl PowerSeries {
    pub fn new(center: C64, coeffs: Vec<C64>) -> Result<Self, SeriesError> {
        if coeffs.is_empty() {
            return Err(SeriesError::Empty);
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SeriesError::NonFinite(i));
        }
        Ok(Self { center, coeffs })
    }

    /// Builds a series without the finiteness check. Callers own the invariant.
    pub(crate) fn from_raw(center: C64, coeffs: Vec<C64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { center, coeffs }
    }

    pub fn constant(center: C64, value: C64, order: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); order.max(1)];
        coeffs[0] = value;
        Self { center, coeffs }
    }

    /// The series of `z` itself about `center`.
    pub fn identity(center: C64, order: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); order.max(1)];
        coeffs[0] = center;
        if order > 1 {
            coeffs[1] = C64::new(1.0, 0.0);
        }
        Self { center, coeffs }
    }

    /// Series of a polynomial given by its coefficients about the origin,
    /// re-expanded about `center`.
    pub fn from_polynomial(poly: &[C64], center: C64, order: usize) -> Self {
        let mut shifted = taylor_shift(poly, center);
        shifted.resize(order.max(1), C64::new(0.0, 0.0));
        Self::from_raw(center, shifted)
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, n: usize) -> C64 {
        self.coeffs.get(n).copied().unwrap_or_default()
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.clamp(1, self.order());
        Self::from_raw(self.center, self.coeffs[..order].to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_center(&self, other: &Self) -> Result<(), SeriesError> {
        if (self.center - other.center).norm() > CENTER_TOL {
            return Err(SeriesError::CenterMismatch(self.center, other.center));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_center(other)?;
        let n = self.order().min(other.order());
        let coeffs = (0..n).map(|i| self.coeffs[i] + other.coeffs[i]).collect();
        Ok(Self::from_raw(self.center, coeffs))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_center(other)?;
        let n = self.order().min(other.order());
        let coeffs = (0..n).map(|i| self.coeffs[i] - other.coeffs[i]).collect();
        Ok(Self::from_raw(self.center, coeffs))
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::from_raw(self.center, self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn add_scalar(&self, k: C64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    /// Cauchy product truncated to the shorter operand.
    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_center(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, a) in self.coeffs[..n].iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            for (j, b) in other.coeffs[..n - i].iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::from_raw(self.center, out)
    }

    /// Reciprocal by the standard division recursion. Requires a nonzero
    /// constant term.
    pub fn recip(&self) -> Result<Self, SeriesError> {
        let a0 = self.coeffs[0];
        if a0 == C64::new(0.0, 0.0) {
            return Err(SeriesError::LogOfZeroConstantTerm);
        }
        let n = self.order();
        let mut b = vec![C64::new(0.0, 0.0); n];
        b[0] = a0.inv();
        for k in 1..n {
            let mut s = C64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.coeffs[j] * b[k - j];
            }
            b[k] = -s / a0;
        }
        Ok(Self::from_raw(self.center, b))
    }

    pub fn div(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_center(other)?;
        Ok(self.mul_unchecked(&other.recip()?))
    }

    /// `self ∘ inner`, i.e. the series of `self(inner(z))` about `inner`'s
    /// center. The constant term of `inner` must equal the center of `self`.
    pub fn compose(&self, inner: &Self) -> Result<Self, SeriesError> {
        let gap = (inner.coeffs[0] - self.center).norm();
        if gap > COMPOSE_TOL * (1.0 + self.center.norm()) {
            return Err(SeriesError::ConstantTermMismatch {
                outer: self.center,
                inner: inner.coeffs[0],
            });
        }
        let n = self.order().min(inner.order());
        let mut du = inner.truncate(n);
        du.coeffs[0] = C64::new(0.0, 0.0);
        let mut acc = Self::constant(inner.center, self.coeffs[n - 1], n);
        for k in (0..n - 1).rev() {
            acc = acc.mul_unchecked(&du);
            acc.coeffs[0] += self.coeffs[k];
        }
        Ok(acc)
    }

    pub fn exp(&self) -> Self {
        let n = self.order();
        let mut b = vec![C64::new(0.0, 0.0); n];
        b[0] = self.coeffs[0].exp();
        for k in 1..n {
            b[k] = exp_coefficient(&self.coeffs, &b, k);
        }
        Self::from_raw(self.center, b)
    }

    /// Principal-branch logarithm at the constant term.
    pub fn ln(&self) -> Result<Self, SeriesError> {
        let a0 = self.coeffs[0];
        if a0 == C64::new(0.0, 0.0) {
            return Err(SeriesError::LogOfZeroConstantTerm);
        }
        let n = self.order();
        let mut b = vec![C64::new(0.0, 0.0); n];
        b[0] = a0.ln();
        for k in 1..n {
            b[k] = log_coefficient(&self.coeffs, &b, k);
        }
        Ok(Self::from_raw(self.center, b))
    }

    /// `exp(p · log(self))` with the principal branch at the constant term.
    pub fn powc(&self, p: C64) -> Result<Self, SeriesError> {
        Ok(self.ln()?.scale(p).exp())
    }

    pub fn derive(&self) -> Self {
        if self.order() == 1 {
            return Self::constant(self.center, C64::new(0.0, 0.0), 1);
        }
        let coeffs = (1..self.order())
            .map(|k| self.coeffs[k] * k as f64)
            .collect();
        Self::from_raw(self.center, coeffs)
    }

    /// Termwise antiderivative with constant term `c0`. The order is kept,
    /// dropping the top coefficient of the integrand.
    pub fn integrate(&self, c0: C64) -> Self {
        let n = self.order();
        let mut out = Vec::with_capacity(n);
        out.push(c0);
        for k in 1..n {
            out.push(self.coeffs[k - 1] / k as f64);
        }
        Self::from_raw(self.center, out)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: C64) -> C64 {
        let u = z - self.center;
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, c| acc * u + c)
    }

    /// Derivative at `z` without materializing the derived series.
    pub fn eval_derivative(&self, z: C64) -> C64 {
        let u = z - self.center;
        let mut acc = C64::new(0.0, 0.0);
        for k in (1..self.order()).rev() {
            acc = acc * u + self.coeffs[k] * k as f64;
        }
        acc
    }

    /// Evaluation with a geometric tail estimate taken from the fitted radius.
    pub fn eval_with_error(&self, z: C64) -> Evaluation {
        let value = self.eval(z);
        let dist = (z - self.center).norm();
        if dist == 0.0 {
            return Evaluation {
                value: self.coeffs[0],
                error: 0.0,
                outside: false,
            };
        }
        let radius = match radius_estimate(self) {
            Ok(r) => r.as_f64(),
            Err(_) => ratio_radius(&self.coeffs).unwrap_or(f64::INFINITY),
        };
        let n = self.order() - 1;
        let last = self.coeffs[n].norm() * dist.powi(n as i32);
        let q = dist / radius;
        if q >= 1.0 {
            return Evaluation {
                value,
                error: f64::INFINITY,
                outside: true,
            };
        }
        Evaluation {
            value,
            error: last * q / (1.0 - q),
            outside: false,
        }
    }

    pub fn radius(&self) -> Result<RadiusEstimate, SeriesError> {
        radius_estimate(self)
    }
}

/// `b_k` of `b = exp(a)` given `b_0..b_{k-1}`.
pub(crate) fn exp_coefficient(a: &[C64], b: &[C64], k: usize) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for j in 1..=k {
        s += a[j] * b[k - j] * j as f64;
    }
    s / k as f64
}

/// `b_k` of `b = log(a)` given `b_0..b_{k-1}`.
pub(crate) fn log_coefficient(a: &[C64], b: &[C64], k: usize) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for j in 1..k {
        s += b[j] * a[k - j] * j as f64;
    }
    (a[k] - s / k as f64) / a[0]
}

/// Coefficients of `p(center + u)` in powers of `u`.
pub fn taylor_shift(poly: &[C64], center: C64) -> Vec<C64> {
    let mut out = poly.to_vec();
    if out.is_empty() {
        return vec![C64::new(0.0, 0.0)];
    }
    let n = out.len();
    // Repeated synthetic division.
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let next = out[j + 1];
            out[j] += center * next;
        }
    }
    out
}

pub fn poly_eval(poly: &[C64], z: C64) -> C64 {
    poly.iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
}

pub fn poly_derivative(poly: &[C64]) -> Vec<C64> {
    if poly.len() <= 1 {
        return vec![C64::new(0.0, 0.0)];
    }
    poly.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * k as f64)
        .collect()
}

/// Degree of a polynomial, ignoring exactly-zero leading coefficients.
pub fn poly_degree(poly: &[C64]) -> usize {
    poly.iter()
        .rposition(|c| *c != C64::new(0.0, 0.0))
        .unwrap_or(0)
}

/// Cauchy–Hadamard style radius estimate from the coefficient tail.
///
/// The tail window `[order/2, order)` is fitted by least squares with the
/// model `ln|c_n| = A + B n + β ln n`, which captures the algebraic prefactor
/// of poles and logarithmic branch points; the radius is `exp(-B)`. Exact
/// zeros and cancellation dips far below the upper hull of the log-magnitudes
/// are skipped. When more than half the window is skipped, or the fit
/// residual exceeds 0.5, the ratio test over the last eight usable
/// coefficients is used instead.
pub fn radius_estimate(series: &PowerSeries) -> Result<RadiusEstimate, SeriesError> {
    let order = series.order();
    if order < 16 {
        return Err(SeriesError::InsufficientOrder(order));
    }
    let window = (order / 2, order);
    let raw: Vec<(f64, f64)> = (window.0..window.1)
        .filter_map(|n| {
            let m = series.coeffs[n].norm();
            (m.is_finite() && m >= FIT_FLOOR).then(|| (n as f64, m.ln()))
        })
        .collect();
    let entire = RadiusEstimate {
        value: None,
        method: RadiusMethod::DeclaredEntire,
        fit_window: window,
        fit_residual: 0.0,
    };
    if raw.len() < 2 {
        return Ok(entire);
    }
    if factorial_decay(&series.coeffs, order) {
        return Ok(entire);
    }
    let kept = drop_cancellation_dips(&raw);
    let span = window.1 - window.0;
    if 2 * kept.len() < span || kept.len() < 6 {
        return Ok(ratio_estimate(&kept, window).unwrap_or(entire));
    }

    // Compare decay rates of the two halves on the upper hull, which ignores
    // the periodic dips left by several singularities on the same circle.
    // The hull is sampled away from the window ends, where it follows
    // whichever phase of the oscillation the end point happens to hit.
    let hull = upper_hull(&kept);
    let q = span as f64 / 8.0;
    let (x0, xm, x1) = (
        window.0 as f64 + q,
        0.5 * (window.0 + window.1) as f64,
        (window.1 - 1) as f64 - q,
    );
    let s1 = (hull_at(&hull, xm) - hull_at(&hull, x0)) / (xm - x0);
    let s2 = (hull_at(&hull, x1) - hull_at(&hull, xm)) / (x1 - xm);
    if (s1 - s2) > ENTIRE_GROWTH.ln() {
        return Ok(entire);
    }

    let (mut slope, residual) = log_linear_fit(&kept);
    if residual > FIT_RESIDUAL_MAX {
        let mut est = ratio_estimate(&kept, window).unwrap_or(entire);
        est.fit_residual = residual;
        return Ok(est);
    }
    if residual > OSCILLATION_RESIDUAL {
        // Beats between singularities of equal modulus confound the
        // power-law term; the interior hull chord tracks the envelope.
        slope = (hull_at(&hull, x1) - hull_at(&hull, x0)) / (x1 - x0);
    }
    Ok(RadiusEstimate {
        value: Some((-slope).exp()),
        method: RadiusMethod::HadamardFit,
        fit_window: window,
        fit_residual: residual,
    })
}

fn ratio_radius(coeffs: &[C64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() >= FIT_FLOOR && c.is_finite())
        .map(|(n, c)| (n as f64, c.norm().ln()))
        .collect();
    let tail = &pts[pts.len().saturating_sub(8)..];
    if tail.len() < 2 {
        return None;
    }
    let (n0, l0) = tail[0];
    let (n1, l1) = tail[tail.len() - 1];
    Some(((l0 - l1) / (n1 - n0)).exp())
}

fn ratio_estimate(kept: &[(f64, f64)], window: (usize, usize)) -> Option<RadiusEstimate> {
    let tail = &kept[kept.len().saturating_sub(8)..];
    if tail.len() < 2 {
        return None;
    }
    let (n0, l0) = tail[0];
    let (n1, l1) = tail[tail.len() - 1];
    let r = ((l0 - l1) / (n1 - n0)).exp();
    Some(RadiusEstimate {
        value: Some(r),
        method: RadiusMethod::Ratio,
        fit_window: window,
        fit_residual: 0.0,
    })
}

/// Whether `log10(|c_p c_n| / max_m |c_m c_{n+p-m}|)` stays below
/// `NOISE_DEFECT` for three consecutive nonzero coefficients in
/// `[order/4, order)`, `p` being the first nonzero index above 0.
///
/// Geometric decay keeps the ratio near 0 for every `n`, and an isolated
/// cancellation dip only lowers it at one index. Factorial decay drives it
/// down by many decades before the rounding noise of a convolution recursion
/// catches up with the true coefficients, so the test reads the clean stretch
/// before the noise floor flattens the tail.
fn factorial_decay(coeffs: &[C64], order: usize) -> bool {
    let mag: Vec<f64> = coeffs.iter().map(|c| c.norm()).collect();
    let lo = (order / 4).max(3);
    let Some(p) = (1..lo).find(|&k| mag[k] >= FIT_FLOOR) else {
        return false;
    };
    let mut run = 0;
    for n in lo..order {
        if !(mag[n] >= FIT_FLOOR && mag[n].is_finite()) {
            continue;
        }
        let mut peak = 0.0f64;
        for m in p + 1..n {
            peak = peak.max(mag[m] * mag[n + p - m]);
        }
        if peak > 0.0 && (mag[p] * mag[n] / peak).log10() < NOISE_DEFECT {
            run += 1;
            if run >= 3 {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

/// Vertices of the upper concave hull of points sorted by abscissa.
fn upper_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            // Pop while the middle point lies on or below the chord.
            if (x2 - x1) * (p.1 - y1) - (y2 - y1) * (p.0 - x1) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Keeps points within `HULL_DROP` of the upper concave hull.
fn drop_cancellation_dips(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    // End points always lie on the hull, so test them against the extension
    // of the neighbouring hull edge instead.
    let extension = |h: &[(f64, f64)], x: f64| -> Option<f64> {
        let [(x1, y1), (x2, y2)] = h else { return None };
        Some(y2 + (y2 - y1) * (x - x2) / (x2 - x1))
    };
    let (mut lo, mut hi) = (0, pts.len());
    while hi - lo > 3 {
        let h = upper_hull(&pts[lo..hi - 1]);
        match extension(&h[h.len() - 2..], pts[hi - 1].0) {
            Some(e) if pts[hi - 1].1 < e - HULL_DROP => hi -= 1,
            _ => break,
        }
    }
    while hi - lo > 3 {
        let h = upper_hull(&pts[lo + 1..hi]);
        let rev = [h[1], h[0]];
        match extension(&rev, pts[lo].0) {
            Some(e) if pts[lo].1 < e - HULL_DROP => lo += 1,
            _ => break,
        }
    }
    let pts = &pts[lo..hi];
    let hull = upper_hull(pts);
    pts.iter()
        .copied()
        .filter(|&(x, y)| y >= hull_at(&hull, x) - HULL_DROP)
        .collect()
}

/// Piecewise-linear interpolation of hull vertices, constant past the ends.
fn hull_at(hull: &[(f64, f64)], x: f64) -> f64 {
    let i = hull.partition_point(|h| h.0 < x);
    if i == 0 {
        return hull[0].1;
    }
    if i >= hull.len() {
        return hull[hull.len() - 1].1;
    }
    let (x1, y1) = hull[i - 1];
    let (x2, y2) = hull[i];
    y1 + (y2 - y1) * (x - x1) / (x2 - x1)
}

/// Ordinary least squares `y = a + b x`; returns `(b, rms residual)`.
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - my - b * (p.0 - mx)).powi(2))
        .sum();
    (b, (rss / n).sqrt())
}

/// Least squares `y = a + b x + β ln x` on centered columns; returns
/// `(b, rms residual)`.
fn log_linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in pts {
        let u = x - mx;
        let v = x.ln() - ml;
        let w = y - my;
        s11 += u * u;
        s12 += u * v;
        s22 += v * v;
        t1 += u * w;
        t2 += v * w;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * s11 * s22 {
        return linear_fit(pts);
    }
    let b = (t1 * s22 - t2 * s12) / det;
    let beta = (s11 * t2 - s12 * t1) / det;
    let rss: f64 = pts
        .iter()
        .map(|&(x, y)| (y - my - b * (x - mx) - beta * (x.ln() - ml)).powi(2))
        .sum();
    (b, (rss / n).sqrt())
}
