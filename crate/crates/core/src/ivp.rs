//! Local Taylor solutions of the factorization initial value problems
//!
//! ```text
//! L'(z) = e^{F(z)} (L - a)^{-N} e^{-G(L)},   L(alpha) = a0
//! ```
//!
//! together with the classical existence-radius lower bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{golden_max, CatalogError, CatalogFn};
use crate::quad::{self, QuadConfig};
use crate::series::{
    exp_coefficient, log_coefficient, poly_degree, poly_derivative, poly_eval, radius_estimate,
    taylor_shift, PowerSeries, RadiusEstimate, SeriesError, C64,
};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub const MIN_ORDER: usize = 8;
const BOX_GRID: usize = 128;
/// `box_b` values tried by [`solve_local`]; `box_a` is fixed at 1.
pub const AUTO_BOX_B: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IvpError {
    #[error("seed a0 coincides with the exceptional value a")]
    SeedAtExceptionalValue,
    #[error("specification does not describe an elh factorization: {0}")]
    NonElhSpec(String),
    #[error("order {0} is below the minimum of 8")]
    OrderTooSmall(usize),
    #[error("box |w - a0| <= {box_b} contains the exceptional value")]
    BoxHitsExceptionalValue { box_b: f64 },
    #[error("coefficient recursion produced non-finite values")]
    NonFinite,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IvpType {
    Type1,
    Type2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvpSpec {
    #[serde(rename = "type")]
    pub kind: IvpType,
    #[serde(rename = "F")]
    pub f_exponent: Vec<C64>,
    #[serde(rename = "G")]
    pub g_exponent: Vec<C64>,
    #[serde(rename = "N", default)]
    pub n: u32,
    #[serde(default)]
    pub a: C64,
    #[serde(default)]
    pub alpha: C64,
    #[serde(default)]
    pub a0: C64,
}

impl IvpSpec {
    pub fn type1(f: Vec<C64>, g: Vec<C64>) -> Self {
        Self {
            kind: IvpType::Type1,
            f_exponent: f,
            g_exponent: g,
            n: 0,
            a: ZERO,
            alpha: ZERO,
            a0: ZERO,
        }
    }

    pub fn type2(f: Vec<C64>, g: Vec<C64>, n: u32, a: C64, a0: C64) -> Self {
        Self {
            kind: IvpType::Type2,
            f_exponent: f,
            g_exponent: g,
            n,
            a,
            alpha: ZERO,
            a0,
        }
    }

    /// `F = z`, `G = -w`, seeded at the origin; `L = -log(2 - e^z)`.
    pub fn benchmark() -> Self {
        Self::type1(vec![ZERO, ONE], vec![ZERO, -ONE])
    }

    /// Same problem with a different seed.
    pub fn reseeded(&self, alpha: C64, a0: C64) -> Self {
        Self {
            alpha,
            a0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), IvpError> {
        let finite = |p: &[C64]| p.iter().all(|c| c.is_finite());
        if !finite(&self.f_exponent)
            || !finite(&self.g_exponent)
            || !self.a.is_finite()
            || !self.alpha.is_finite()
            || !self.a0.is_finite()
        {
            return Err(IvpError::NonElhSpec("non-finite input".into()));
        }
        if poly_degree(&self.f_exponent) == 0 {
            return Err(IvpError::NonElhSpec("F must be non-constant".into()));
        }
        let g_constant = poly_degree(&self.g_exponent) == 0;
        match self.kind {
            IvpType::Type1 => {
                if self.n != 0 {
                    return Err(IvpError::NonElhSpec("type1 requires N = 0".into()));
                }
                if g_constant {
                    return Err(IvpError::NonElhSpec(
                        "G must be non-constant when N = 0".into(),
                    ));
                }
            }
            IvpType::Type2 => {
                if self.n == 0 && g_constant {
                    return Err(IvpError::NonElhSpec(
                        "G must be non-constant when N = 0".into(),
                    ));
                }
                if self.a0 == self.a {
                    return Err(IvpError::SeedAtExceptionalValue);
                }
            }
        }
        Ok(())
    }

    fn uses_exceptional_value(&self) -> bool {
        self.kind == IvpType::Type2 || self.n > 0
    }

    /// `(w - a)^{-N} e^{-G(w)}`.
    pub fn w_factor(&self, w: C64) -> C64 {
        let e = (-poly_eval(&self.g_exponent, w)).exp();
        if self.n == 0 {
            e
        } else {
            e / (w - self.a).powu(self.n)
        }
    }

    /// Right-hand side of the ODE.
    pub fn rhs(&self, z: C64, w: C64) -> C64 {
        poly_eval(&self.f_exponent, z).exp() * self.w_factor(w)
    }

    /// `ln |(w - a)^{-N} e^{-G(w)}|`.
    fn log_w_factor(&self, w: C64) -> f64 {
        let mut v = -poly_eval(&self.g_exponent, w).re;
        if self.n > 0 {
            v -= self.n as f64 * (w - self.a).norm().ln();
        }
        v
    }

    /// `ln |d/dw [(w - a)^{-N} e^{-G(w)}]|`.
    fn log_w_factor_derivative(&self, w: C64) -> f64 {
        let dg = poly_eval(&poly_derivative(&self.g_exponent), w);
        let mut inner = -dg;
        if self.n > 0 {
            inner -= self.n as f64 / (w - self.a);
        }
        self.log_w_factor(w) + inner.norm().ln()
    }

    /// The factor pair induced by the problem: `f = ∫_0^z e^F` and
    /// `g(w) = f(alpha) + ∫_{a0}^w (t - a)^N e^{G(t)} dt`, so that `f = g∘L`.
    pub fn induced_pair(&self) -> Result<InducedPair, IvpError> {
        let f = CatalogFn::IntExpPoly {
            p: self.f_exponent.clone(),
            c: ZERO,
        };
        let f_alpha = f.eval(self.alpha)?;
        let pair = InducedPair {
            f,
            g_exponent: self.g_exponent.clone(),
            n: self.n,
            a: self.a,
            w_anchor: self.a0,
            g_anchor: f_alpha,
        };
        Ok(pair)
    }
}

/// `f` and `g` with `f = g∘L`; `g` is anchored by `g(w_anchor) = g_anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedPair {
    pub f: CatalogFn,
    pub g_exponent: Vec<C64>,
    pub n: u32,
    pub a: C64,
    pub w_anchor: C64,
    pub g_anchor: C64,
}

impl InducedPair {
    /// `g'(t) = (t - a)^N e^{G(t)}`.
    pub fn g_prime(&self, t: C64) -> C64 {
        let e = poly_eval(&self.g_exponent, t).exp();
        if self.n == 0 {
            e
        } else {
            e * (t - self.a).powu(self.n)
        }
    }

    /// `∫_{from}^{to} g'(t) dt` along the straight segment.
    pub fn g_increment(&self, from: C64, to: C64) -> Result<C64, IvpError> {
        let r = quad::segment(|t| self.g_prime(t), from, to, &QuadConfig::default())
            .map_err(CatalogError::from)?;
        Ok(r.value)
    }

    pub fn g(&self, w: C64) -> Result<C64, IvpError> {
        Ok(self.g_anchor + self.g_increment(self.w_anchor, w)?)
    }

    /// `g` as a catalog function, available when `N = 0`.
    pub fn g_catalog(&self) -> Result<Option<CatalogFn>, IvpError> {
        if self.n != 0 {
            return Ok(None);
        }
        let c = self.g_anchor - self.g_increment(ZERO, self.w_anchor)?;
        Ok(Some(CatalogFn::IntExpPoly {
            p: self.g_exponent.clone(),
            c,
        }))
    }
}

/// Coefficients of `v ↦ L(z0 + s v)` for the solution through `(z0, w0)`,
/// by the order-by-order recursion
/// `L_{n+1} = s Φ_n / (n + 1)`, `Φ = e^{F} · exp(-N log(L - a) - G(L))`.
pub fn local_coefficients(
    spec: &IvpSpec,
    z0: C64,
    w0: C64,
    scale: f64,
    order: usize,
) -> Result<Vec<C64>, IvpError> {
    let n_exc = spec.n as f64;
    let use_log = spec.n > 0;
    if use_log && w0 == spec.a {
        return Err(IvpError::SeedAtExceptionalValue);
    }

    // e^{F(z0 + s v)}
    let mut fz = taylor_shift(&spec.f_exponent, z0);
    let mut sk = 1.0;
    for c in fz.iter_mut() {
        *c *= sk;
        sk *= scale;
    }
    fz.resize(order.max(fz.len()), ZERO);
    fz.truncate(order);
    let ef = PowerSeries::from_raw(ZERO, fz).exp().into_coeffs();

    // G(w0 + u) in powers of u.
    let gs = taylor_shift(&spec.g_exponent, w0);
    let gdeg = poly_degree(&gs);

    let mut l = vec![ZERO; order];
    l[0] = w0;
    // powers[j][n] = coefficient n of (L - w0)^(j+1)
    let mut powers: Vec<Vec<C64>> = vec![vec![ZERO; order]; gdeg.max(1)];
    let mut dlog = vec![ZERO; order]; // L - a
    let mut lg = vec![ZERO; order]; // log(L - a)
    if use_log {
        dlog[0] = w0 - spec.a;
        lg[0] = dlog[0].ln();
    }
    let mut q = vec![ZERO; order];
    let mut p = vec![ZERO; order];
    q[0] = -gs[0] - n_exc * lg[0];
    p[0] = q[0].exp();

    for n in 0..order - 1 {
        if n >= 1 {
            for j in 0..gdeg {
                powers[j][n] = if j == 0 {
                    l[n]
                } else {
                    let mut s = ZERO;
                    for k in 1..=n.saturating_sub(j) {
                        s += l[k] * powers[j - 1][n - k];
                    }
                    s
                };
            }
            let mut qn = ZERO;
            for j in 0..gdeg {
                qn -= gs[j + 1] * powers[j][n];
            }
            if use_log {
                dlog[n] = l[n];
                lg[n] = log_coefficient(&dlog, &lg, n);
                qn -= n_exc * lg[n];
            }
            q[n] = qn;
            p[n] = exp_coefficient(&q, &p, n);
        }
        let mut phi = ZERO;
        for k in 0..=n {
            phi += ef[k] * p[n - k];
        }
        l[n + 1] = phi * (scale / (n + 1) as f64);
        if !l[n + 1].is_finite() {
            return Err(IvpError::NonFinite);
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HilleBounds {
    pub banach: f64,
    pub picard: f64,
    pub cauchy: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub box_a: f64,
    pub box_b: f64,
}

/// Maximum of `f(center + r e^{iθ})` over θ: equispaced grid plus one
/// golden-section refinement around the best sample.
fn circle_max<H: Fn(C64) -> f64>(h: &H, center: C64, r: f64) -> f64 {
    let step = std::f64::consts::TAU / BOX_GRID as f64;
    let at = |t: f64| -> Result<f64, CatalogError> { Ok(h(center + C64::from_polar(r, t))) };
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..BOX_GRID {
        let t = i as f64 * step;
        let v = h(center + C64::from_polar(r, t));
        if v > best.1 {
            best = (t, v);
        }
    }
    let refined = golden_max(&at, best.0 - step, best.0 + step, 40).unwrap_or(best.1);
    best.1.max(refined)
}

/// Existence-radius lower bounds on the dicylinder
/// `|z - alpha| <= box_a`, `|w - a0| <= box_b`.
///
/// The right side factors as `e^{F(z)} · h(w)`, so `M` and `K` are products
/// of one-variable boundary maxima.
pub fn bounds_hille(spec: &IvpSpec, box_a: f64, box_b: f64) -> Result<HilleBounds, IvpError> {
    if spec.uses_exceptional_value() && (spec.a0 - spec.a).norm() <= box_b {
        return Err(IvpError::BoxHitsExceptionalValue { box_b });
    }
    let log_ef = circle_max(&|z| poly_eval(&spec.f_exponent, z).re, spec.alpha, box_a);
    let log_h = circle_max(&|w| spec.log_w_factor(w), spec.a0, box_b);
    let log_dh = circle_max(&|w| spec.log_w_factor_derivative(w), spec.a0, box_b);
    let log_m = log_ef + log_h;
    let log_k = log_ef + log_dh;
    let b_over_m = (box_b.ln() - log_m).exp();
    let inv_k = (-log_k).exp();
    let picard = box_a.min(b_over_m);
    let banach = picard.min(inv_k);
    let cauchy = box_a * -(-b_over_m / (2.0 * box_a)).exp_m1();
    Ok(HilleBounds {
        banach,
        picard,
        cauchy,
        m: log_m.exp(),
        k: log_k.exp(),
        box_a,
        box_b,
    })
}

/// The `box_a = 1` search over [`AUTO_BOX_B`] keeping the best Picard bound.
/// Boxes that would contain the exceptional value are skipped; if none
/// remain, `box_b = |a0 - a| / 2` is used.
pub fn auto_bounds(spec: &IvpSpec) -> Result<HilleBounds, IvpError> {
    let mut best: Option<HilleBounds> = None;
    for b in AUTO_BOX_B {
        match bounds_hille(spec, 1.0, b) {
            Ok(h) => {
                if best.map_or(true, |x| h.picard > x.picard) {
                    best = Some(h);
                }
            }
            Err(IvpError::BoxHitsExceptionalValue { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(h) => Ok(h),
        None => bounds_hille(spec, 1.0, 0.5 * (spec.a0 - spec.a).norm()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryRadii {
    pub banach: f64,
    pub picard: f64,
    pub cauchy: f64,
}

impl TheoryRadii {
    pub fn max(&self) -> f64 {
        self.banach.max(self.picard).max(self.cauchy)
    }
}

impl From<HilleBounds> for TheoryRadii {
    fn from(h: HilleBounds) -> Self {
        Self {
            banach: h.banach,
            picard: h.picard,
            cauchy: h.cauchy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskChart {
    pub id: usize,
    pub spec: IvpSpec,
    #[serde(rename = "L")]
    pub l: PowerSeries,
    pub r_theory: TheoryRadii,
    pub r_emp: RadiusEstimate,
    pub generation: usize,
    pub parent: Option<usize>,
    pub entry_angle: Option<f64>,
}

impl DiskChart {
    pub fn center(&self) -> C64 {
        self.spec.alpha
    }

    /// Empirical radius, `None` when the solution looks entire.
    pub fn radius(&self) -> Option<f64> {
        self.r_emp.value
    }
}

/// Root chart of the problem as given.
pub fn solve_local(spec: &IvpSpec, order: usize) -> Result<DiskChart, IvpError> {
    spec.validate()?;
    if order < MIN_ORDER {
        return Err(IvpError::OrderTooSmall(order));
    }
    // The radius fit needs a longer window than very short charts carry.
    let fit_order = order.max(32);
    let coeffs = local_coefficients(spec, spec.alpha, spec.a0, 1.0, fit_order)?;
    let r_emp = radius_estimate(&PowerSeries::new(spec.alpha, coeffs.clone())?)?;
    let l = PowerSeries::new(spec.alpha, coeffs[..order].to_vec())?;
    let r_theory = auto_bounds(spec)?.into();
    Ok(DiskChart {
        id: 0,
        spec: spec.clone(),
        l,
        r_theory,
        r_emp,
        generation: 0,
        parent: None,
        entry_angle: None,
    })
}

/// Deterministic points filling the disk `|z - center| <= r`.
pub(crate) fn disk_samples(center: C64, r: f64, n: usize) -> Vec<C64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let rho = r * ((i as f64 + 0.5) / n as f64).sqrt();
            center + C64::from_polar(rho, i as f64 * golden)
        })
        .collect()
}

/// `max |L' - e^F (L - a)^{-N} e^{-G(L)}|` over points of the disk of radius
/// `0.5 · min(picard, r_emp)`.
pub fn residual_check(chart: &DiskChart, n_samples: usize) -> f64 {
    let mut r = chart.r_theory.picard;
    if let Some(e) = chart.r_emp.value {
        r = r.min(e);
    }
    disk_samples(chart.center(), 0.5 * r, n_samples.max(1))
        .into_iter()
        .map(|z| {
            let w = chart.l.eval(z);
            let dw = chart.l.eval_derivative(z);
            (dw - chart.spec.rhs(z, w)).norm()
        })
        .fold(0.0, f64::max)
}
