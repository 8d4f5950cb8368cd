//! Concrete entire functions used throughout the laboratory.
//!
//! Each [`CatalogFn`] can be evaluated, differentiated, expanded in a Taylor
//! series about any center, probed for its maximum modulus on a circle, and
//! (for the variants where a finite procedure exists) asked for its finite
//! asymptotic values.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{self, QuadConfig, QuadratureError};
use crate::series::{poly_degree, poly_derivative, poly_eval, PowerSeries, SeriesError, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Distinctness tolerance for asymptotic values.
pub const ASYMPTOTIC_DEDUP: f64 = 1e-9;
/// Ray integrals are cut once the integrand falls below this magnitude.
const RAY_CUTOFF: f64 = 1e-18;
const RAY_MAX: f64 = 1e4;
const MAXMOD_SAMPLES: usize = 720;
const PROBE_GRID: usize = 9;
const PROBE_RADIUS: f64 = 6.0;
const PROBE_TOL: f64 = 1e-9;
const PROBE_MIN_SLOPE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("invalid catalog function: {0}")]
    Invalid(String),
    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),
    #[error(transparent)]
    QuadratureNonConvergence(#[from] QuadratureError),
    #[error("integrand does not decay along the ray at angle {theta}")]
    RayDivergence { theta: f64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// A concrete entire function. `Chain` applies its factors right to left:
/// `[f1, f2, f3]` is `f1(f2(f3(z)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CatalogFn {
    /// `∫_0^z exp(p(t)) dt + c`, `p` given by coefficients about 0.
    IntExpPoly {
        p: Vec<C64>,
        #[serde(default)]
        c: C64,
    },
    /// `alpha + exp(a z + b)`.
    ExpAffine { alpha: C64, a: C64, b: C64 },
    /// `z + a`.
    Affine { a: C64 },
    /// `a z + b`.
    Linear { a: C64, b: C64 },
    /// Principal `log(z - a)`. Not entire; only meaningful as an inner
    /// factor whose image avoids the cut.
    LogShift { a: C64 },
    /// `z^n`.
    Monomial { n: u32 },
    /// `exp(lambda z)`.
    ScaledExp { lambda: C64 },
    /// `z exp(h(z))` with `h(z) = Σ z^n / (n·n!)`.
    ZExpH,
    /// `∫_0^z exp(e^t) dt`.
    IntExpExp,
    /// `(c_1 e^z + z) ∘ … ∘ (c_k e^z + z)` using the first `k` entries of `cs`.
    NgLimit { cs: Vec<f64>, k: usize },
    Chain { factors: Vec<CatalogFn> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticProvenance {
    ClosedForm,
    SectorQuadrature,
    SetAlgebra,
}

/// Finite asymptotic values of a function, with a flag telling whether the
/// list is known to be exhaustive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSet {
    pub values: Vec<C64>,
    pub complete: bool,
    pub provenance: AsymptoticProvenance,
    /// Accumulated quadrature error bound on the values.
    #[serde(default)]
    pub tolerance: f64,
}

impl AsymptoticSet {
    pub fn new(values: Vec<C64>, complete: bool, provenance: AsymptoticProvenance) -> Self {
        Self {
            values: dedup_points(values, ASYMPTOTIC_DEDUP),
            complete,
            provenance,
            tolerance: 0.0,
        }
    }

    pub fn incomplete() -> Self {
        Self::new(Vec::new(), false, AsymptoticProvenance::ClosedForm)
    }

    pub fn contains(&self, w: C64, tol: f64) -> bool {
        self.values.iter().any(|v| (v - w).norm() <= tol)
    }
}

/// Removes near-duplicates, keeping first occurrences in order.
pub fn dedup_points(values: Vec<C64>, tol: f64) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::with_capacity(values.len());
    for v in values {
        if !out.iter().any(|u| (u - v).norm() <= tol) {
            out.push(v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeHit {
    pub target: C64,
    pub preimage: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub hits: Vec<ProbeHit>,
    pub misses: Vec<C64>,
}

impl ProbeReport {
    pub fn preimage_of(&self, target: C64) -> Option<C64> {
        self.hits
            .iter()
            .find(|h| h.target == target)
            .map(|h| h.preimage)
    }
}

impl CatalogFn {
    /// The error function integral `∫_0^z e^{-t^2} dt`.
    pub fn calabi() -> Self {
        CatalogFn::IntExpPoly {
            p: vec![ZERO, ZERO, -ONE],
            c: ZERO,
        }
    }

    /// `∫_0^z e^{-t^{2k}} dt`.
    pub fn even_gaussian(k: usize) -> Self {
        let mut p = vec![ZERO; 2 * k + 1];
        p[2 * k] = -ONE;
        CatalogFn::IntExpPoly { p, c: ZERO }
    }

    /// `e^z - 1` written as `∫_0^z e^t dt`.
    pub fn exp_minus_one() -> Self {
        CatalogFn::IntExpPoly {
            p: vec![ZERO, ONE],
            c: ZERO,
        }
    }

    pub fn identity() -> Self {
        CatalogFn::Affine { a: ZERO }
    }

    pub fn chain(factors: Vec<CatalogFn>) -> Self {
        CatalogFn::Chain { factors }
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        match self {
            CatalogFn::IntExpPoly { p, c } => {
                if poly_degree(p) < 1 {
                    return Err(CatalogError::Invalid(
                        "int_exp_poly exponent must be non-constant".into(),
                    ));
                }
                if !p.iter().all(|z| z.is_finite()) || !c.is_finite() {
                    return Err(CatalogError::Invalid("non-finite coefficient".into()));
                }
            }
            CatalogFn::ExpAffine { a, .. } if *a == ZERO => {
                return Err(CatalogError::Invalid("exp_affine needs a != 0".into()))
            }
            CatalogFn::Linear { a, .. } if *a == ZERO => {
                return Err(CatalogError::Invalid("linear needs a != 0".into()))
            }
            CatalogFn::ScaledExp { lambda } if *lambda == ZERO => {
                return Err(CatalogError::Invalid("scaled_exp needs lambda != 0".into()))
            }
            CatalogFn::Monomial { n } if *n == 0 => {
                return Err(CatalogError::Invalid("monomial degree must be >= 1".into()))
            }
            CatalogFn::NgLimit { cs, k } => {
                if *k > cs.len() {
                    return Err(CatalogError::UnsupportedVariant(format!(
                        "ng_limit prefix {k} exceeds {} stored constants",
                        cs.len()
                    )));
                }
                if *k == 0 || cs.iter().any(|c| !(*c > 0.0)) {
                    return Err(CatalogError::Invalid(
                        "ng_limit needs k >= 1 and positive constants".into(),
                    ));
                }
            }
            CatalogFn::Chain { factors } => {
                if factors.is_empty() {
                    return Err(CatalogError::Invalid("empty chain".into()));
                }
                for f in factors {
                    f.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Whether the variant is an entire local homeomorphism normalized by
    /// `f'(0) = 1`.
    pub fn is_elh_variant(&self) -> bool {
        matches!(
            self,
            CatalogFn::IntExpPoly { .. }
                | CatalogFn::Affine { .. }
                | CatalogFn::ZExpH
                | CatalogFn::IntExpExp
        )
    }

    pub fn eval(&self, z: C64) -> Result<C64, CatalogError> {
        let cfg = QuadConfig::default();
        Ok(match self {
            CatalogFn::IntExpPoly { p, c } => {
                c + quad::segment(|t| poly_eval(p, t).exp(), ZERO, z, &cfg)?.value
            }
            CatalogFn::ExpAffine { alpha, a, b } => alpha + (a * z + b).exp(),
            CatalogFn::Affine { a } => z + a,
            CatalogFn::Linear { a, b } => a * z + b,
            CatalogFn::LogShift { a } => log_shift(z, *a)?,
            CatalogFn::Monomial { n } => z.powu(*n),
            CatalogFn::ScaledExp { lambda } => (lambda * z).exp(),
            CatalogFn::ZExpH => z * h_integral(z)?.exp(),
            CatalogFn::IntExpExp => quad::segment(|t| t.exp().exp(), ZERO, z, &cfg)?.value,
            CatalogFn::NgLimit { cs, k } => {
                self.validate()?;
                cs[..*k].iter().rev().fold(z, |w, c| c * w.exp() + w)
            }
            CatalogFn::Chain { factors } => {
                let mut w = z;
                for f in factors.iter().rev() {
                    w = f.eval(w)?;
                }
                w
            }
        })
    }

    /// `(f(z), f'(z))`.
    pub fn eval_with_derivative(&self, z: C64) -> Result<(C64, C64), CatalogError> {
        Ok(match self {
            CatalogFn::IntExpPoly { p, .. } => (self.eval(z)?, poly_eval(p, z).exp()),
            CatalogFn::ExpAffine { alpha, a, b } => {
                let e = (a * z + b).exp();
                (alpha + e, a * e)
            }
            CatalogFn::Affine { a } => (z + a, ONE),
            CatalogFn::Linear { a, b } => (a * z + b, *a),
            CatalogFn::LogShift { a } => (log_shift(z, *a)?, (z - a).inv()),
            CatalogFn::Monomial { n } => (z.powu(*n), z.powu(n - 1) * *n as f64),
            CatalogFn::ScaledExp { lambda } => {
                let e = (lambda * z).exp();
                (e, lambda * e)
            }
            CatalogFn::ZExpH => {
                let h = h_integral(z)?;
                (z * h.exp(), (z + h).exp())
            }
            CatalogFn::IntExpExp => (self.eval(z)?, z.exp().exp()),
            CatalogFn::NgLimit { cs, k } => {
                self.validate()?;
                let mut w = z;
                let mut d = ONE;
                for c in cs[..*k].iter().rev() {
                    let e = w.exp();
                    d *= c * e + 1.0;
                    w += c * e;
                }
                (w, d)
            }
            CatalogFn::Chain { factors } => {
                let mut w = z;
                let mut d = ONE;
                for f in factors.iter().rev() {
                    let (v, dv) = f.eval_with_derivative(w)?;
                    w = v;
                    d *= dv;
                }
                (w, d)
            }
        })
    }

    /// Taylor expansion about `center` truncated to `order` coefficients.
    pub fn taylor_at(&self, center: C64, order: usize) -> Result<PowerSeries, CatalogError> {
        let order = order.max(2);
        let u = PowerSeries::identity(center, order);
        Ok(match self {
            CatalogFn::IntExpPoly { p, .. } => {
                let integrand = PowerSeries::from_polynomial(p, center, order).exp();
                integrand.integrate(self.eval(center)?)
            }
            CatalogFn::ExpAffine { alpha, a, b } => u.scale(*a).add_scalar(*b).exp().add_scalar(*alpha),
            CatalogFn::Affine { a } => u.add_scalar(*a),
            CatalogFn::Linear { a, b } => u.scale(*a).add_scalar(*b),
            CatalogFn::LogShift { a } => {
                log_shift(center, *a)?;
                u.add_scalar(-a).ln()?
            }
            CatalogFn::Monomial { n } => {
                let mut coeffs = vec![ZERO; order];
                let mut binom = 1.0;
                for (k, slot) in coeffs.iter_mut().enumerate().take(*n as usize + 1) {
                    *slot = center.powu(n - k as u32) * binom;
                    binom *= (*n as f64 - k as f64) / (k as f64 + 1.0);
                }
                PowerSeries::new(center, coeffs)?
            }
            CatalogFn::ScaledExp { lambda } => u.scale(*lambda).exp(),
            CatalogFn::ZExpH => {
                let h = h_series(center, order)?;
                u.mul(&h.exp())?
            }
            CatalogFn::IntExpExp => u.exp().exp().integrate(self.eval(center)?),
            CatalogFn::NgLimit { cs, k } => {
                self.validate()?;
                let mut w = u;
                for c in cs[..*k].iter().rev() {
                    w = w.exp().scale(C64::new(*c, 0.0)).add(&w)?;
                }
                w
            }
            CatalogFn::Chain { factors } => {
                let (last, rest) = factors
                    .split_last()
                    .ok_or_else(|| CatalogError::Invalid("empty chain".into()))?;
                let mut s = last.taylor_at(center, order)?;
                for f in rest.iter().rev() {
                    let outer = f.taylor_at(s.coeff(0), order)?;
                    s = outer.compose(&s)?;
                }
                s
            }
        })
    }

    /// Finite asymptotic values where a finite procedure exists.
    pub fn asymptotic_values(&self) -> Result<AsymptoticSet, CatalogError> {
        Ok(match self {
            CatalogFn::Affine { .. } | CatalogFn::Linear { .. } => {
                AsymptoticSet::new(Vec::new(), true, AsymptoticProvenance::ClosedForm)
            }
            CatalogFn::ExpAffine { alpha, .. } => {
                AsymptoticSet::new(vec![*alpha], true, AsymptoticProvenance::ClosedForm)
            }
            CatalogFn::ScaledExp { .. } => {
                AsymptoticSet::new(vec![ZERO], true, AsymptoticProvenance::ClosedForm)
            }
            CatalogFn::IntExpPoly { p, c } => {
                self.validate()?;
                let mut values = Vec::new();
                let mut tolerance: f64 = 0.0;
                for theta in decay_bisectors(p) {
                    let (v, err) = ray_integral(p, theta)?;
                    values.push(c + v);
                    tolerance = tolerance.max(err);
                }
                let mut set =
                    AsymptoticSet::new(values, true, AsymptoticProvenance::SectorQuadrature);
                set.tolerance = tolerance;
                set
            }
            _ => AsymptoticSet::incomplete(),
        })
    }

    /// `max |f|` on the circle `|z| = r`: 720 equiangular samples followed by
    /// golden-section refinement around the best one.
    pub fn max_modulus(&self, r: f64) -> Result<f64, CatalogError> {
        let step = TAU / MAXMOD_SAMPLES as f64;
        let at = |theta: f64| -> Result<f64, CatalogError> {
            Ok(self.eval(C64::from_polar(r, theta))?.norm())
        };
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..MAXMOD_SAMPLES {
            let theta = k as f64 * step;
            let m = at(theta)?;
            if m > best.1 {
                best = (theta, m);
            }
        }
        let refined = golden_max(&at, best.0 - step, best.0 + step, 60)?;
        Ok(best.1.max(refined))
    }

    /// Multi-start Newton search for preimages of each target.
    pub fn surjectivity_probe(
        &self,
        targets: &[C64],
        newton_budget: usize,
    ) -> Result<ProbeReport, CatalogError> {
        let starts = probe_starts();
        let mut report = ProbeReport {
            hits: Vec::new(),
            misses: Vec::new(),
        };
        for &w in targets {
            let mut found = None;
            for &z0 in &starts {
                if let Some(z) = self.newton(w, z0, newton_budget) {
                    found = Some(z);
                    break;
                }
            }
            match found {
                Some(z) => report.hits.push(ProbeHit {
                    target: w,
                    preimage: z,
                }),
                None => report.misses.push(w),
            }
        }
        Ok(report)
    }

    /// Rejects candidates where the function merely creeps towards an
    /// asymptotic value: there `|f'|` collapses with `|f - target|`, or the
    /// next Newton step fails to shrink quadratically.
    fn settled(&self, target: C64, z: C64, step: f64, d: f64) -> bool {
        if d < PROBE_MIN_SLOPE {
            return false;
        }
        let Ok((v, d1)) = self.eval_with_derivative(z) else {
            return false;
        };
        if d1.norm() == 0.0 {
            return false;
        }
        let next = ((v - target) / d1).norm();
        if !(next <= 0.1 * step || next < 1e-13 * (1.0 + z.norm())) {
            return false;
        }
        // The linear model must hold nearby; evaluations swamped by rounding
        // noise fail this even when Newton appears to have stopped.
        let h = 1e-4 * (1.0 + z.norm());
        [C64::new(h, 0.0), C64::new(0.0, h)].iter().all(|&dz| {
            self.eval(z + dz)
                .is_ok_and(|w| (w - v - d1 * dz).norm() <= 0.1 * (d1 * dz).norm())
        })
    }

    fn newton(&self, target: C64, start: C64, budget: usize) -> Option<C64> {
        let mut z = start;
        for _ in 0..=budget {
            let (v, d) = self.eval_with_derivative(z).ok()?;
            let r = v - target;
            if !r.is_finite() {
                return None;
            }
            if d.norm() == 0.0 || !d.is_finite() {
                return None;
            }
            let mut step = r / d;
            // A small residual only counts once Newton has settled on a root;
            // on an omitted value the residual decays while the steps do not.
            if r.norm() < PROBE_TOL && step.norm() < 1e-6 * (1.0 + z.norm()) {
                return self.settled(target, z - step, step.norm(), d.norm()).then_some(z);
            }
            if step.norm() > 2.0 {
                step *= 2.0 / step.norm();
            }
            z -= step;
            if z.norm() > 50.0 {
                return None;
            }
        }
        None
    }
}

fn log_shift(z: C64, a: C64) -> Result<C64, CatalogError> {
    if z == a {
        return Err(CatalogError::Invalid(format!("log_shift evaluated at its pole {a}")));
    }
    Ok((z - a).ln())
}

/// 9×9 grid on `[-6, 6]^2`, points outside the disk pulled radially onto it.
fn probe_starts() -> Vec<C64> {
    let mut out = Vec::with_capacity(PROBE_GRID * PROBE_GRID);
    let step = 2.0 * PROBE_RADIUS / (PROBE_GRID - 1) as f64;
    // Start from the middle so that small targets are tried near the origin first.
    let mut idx: Vec<(usize, usize)> = (0..PROBE_GRID)
        .flat_map(|i| (0..PROBE_GRID).map(move |j| (i, j)))
        .collect();
    let mid = (PROBE_GRID / 2) as i64;
    idx.sort_by_key(|&(i, j)| {
        let di = i as i64 - mid;
        let dj = j as i64 - mid;
        (di * di + dj * dj, i, j)
    });
    for (i, j) in idx {
        let mut z = C64::new(
            -PROBE_RADIUS + i as f64 * step,
            -PROBE_RADIUS + j as f64 * step,
        );
        if z.norm() > PROBE_RADIUS {
            z *= PROBE_RADIUS / z.norm();
        }
        out.push(z);
    }
    out
}

pub(crate) fn golden_max<F>(f: &F, mut a: f64, mut b: f64, iters: usize) -> Result<f64, CatalogError>
where
    F: Fn(f64) -> Result<f64, CatalogError>,
{
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iters {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok(f1.max(f2))
}

/// `(e^w - 1)/w`, continuous at 0.
fn expm1_over(w: C64) -> C64 {
    if w.norm() < 0.5 {
        let mut term = ONE;
        let mut sum = ONE;
        for k in 2..30 {
            term *= w / k as f64;
            sum += term;
        }
        sum
    } else {
        (w.exp() - 1.0) / w
    }
}

/// `h(z) = ∫_0^z (e^ξ - 1)/ξ dξ = Σ z^n/(n·n!)`.
fn h_integral(z: C64) -> Result<C64, CatalogError> {
    if z.norm() <= 4.0 {
        let mut term = ONE;
        let mut sum = ZERO;
        for n in 1..80 {
            term *= z / n as f64;
            sum += term / n as f64;
        }
        return Ok(sum);
    }
    let r = quad::integrate(|s| z * expm1_over(z * s), 0.0, 1.0, &QuadConfig::default())?;
    Ok(r.value)
}

fn h_series(center: C64, order: usize) -> Result<PowerSeries, CatalogError> {
    let u = PowerSeries::identity(center, order);
    let h_prime = if center == ZERO {
        let mut coeffs = vec![ZERO; order];
        let mut fact = 1.0;
        for (n, slot) in coeffs.iter_mut().enumerate() {
            fact *= (n + 1) as f64;
            *slot = C64::new(1.0 / fact, 0.0);
        }
        PowerSeries::new(center, coeffs)?
    } else {
        u.exp().add_scalar(-ONE).div(&u)?
    };
    Ok(h_prime.integrate(h_integral(center)?))
}

/// Bisectors of the sectors where `Re(lead · t^d) < 0`.
pub fn decay_bisectors(p: &[C64]) -> Vec<f64> {
    let d = poly_degree(p);
    if d == 0 {
        return Vec::new();
    }
    let phi = p[d].arg();
    (0..d)
        .map(|k| ((PI + TAU * k as f64 - phi) / d as f64).rem_euclid(TAU))
        .collect()
}

/// `∫_0^{∞ e^{iθ}} exp(p(t)) dt` with the tail cut where the integrand falls
/// below `1e-18`. Returns the value and an error bound including the tail.
fn ray_integral(p: &[C64], theta: f64) -> Result<(C64, f64), CatalogError> {
    let dir = C64::from_polar(1.0, theta);
    let log_mag = |s: f64| poly_eval(p, dir * s).re;
    let dp = poly_derivative(p);
    let slope = |s: f64| (poly_eval(&dp, dir * s) * dir).re;
    let cut = RAY_CUTOFF.ln();
    let mut s = 0.25;
    let end = loop {
        if s > RAY_MAX {
            return Err(CatalogError::RayDivergence { theta });
        }
        if log_mag(s) < cut && slope(s) < 0.0 {
            let ok = [1.25, 1.5, 2.0]
                .iter()
                .all(|f| log_mag(s * f) < log_mag(s) && slope(s * f) < 0.0);
            if ok {
                break s;
            }
        }
        s *= 1.1;
    };
    let cfg = QuadConfig {
        max_intervals: 8000,
        ..QuadConfig::default()
    };
    let pieces = (end.ceil() as usize).clamp(1, 64);
    let mut total = ZERO;
    let mut err = 0.0;
    for i in 0..pieces {
        let a = end * i as f64 / pieces as f64;
        let b = end * (i + 1) as f64 / pieces as f64;
        let r = quad::integrate(|x| poly_eval(p, dir * x).exp() * dir, a, b, &cfg)?;
        total += r.value;
        err += r.error;
    }
    // Beyond the cut the integrand decays at least like exp(slope·(s - end)).
    let tail = log_mag(end).exp() / (-slope(end)).max(1e-300);
    Ok((total, err + tail))
}
