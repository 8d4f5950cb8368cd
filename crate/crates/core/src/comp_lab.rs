//! Explicit factorizations and the checks built around composition: chain
//! verification, omitted-value and root factorizations, the derivative
//! recursion for a known right factor, asymptotic-set algebra, component
//! counts and growth inequalities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{dedup_points, AsymptoticProvenance, AsymptoticSet, CatalogError, CatalogFn, ASYMPTOTIC_DEDUP};
use crate::series::{PowerSeries, SeriesError, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Coefficients of degree two and up below this make a series affine.
pub const AFFINE_TOL: f64 = 1e-10;
const AFFINE_ORDER: usize = 24;
const NORMALIZATION_TOL: f64 = 1e-10;
const PROBE_NEWTON: usize = 60;
pub const DIVIDE_ORDER: usize = 64;
/// Coefficients compared by the derivative recursion.
pub const DIVIDE_COMPARE: usize = 32;
const DIVIDE_SAMPLES: usize = 32;
const DIVIDE_RADIUS: f64 = 0.5;
const H_PRIME_MIN: f64 = 1e-12;
const G_ORIGIN_TOL: f64 = 1e-12;
const CLUNIE_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompError {
    #[error("value {omitted} is attained near {preimage}")]
    NotOmittedOnProbe { omitted: C64, preimage: C64 },
    #[error("logarithm of f - {omitted} has no series at the origin: {reason}")]
    BranchObstruction { omitted: C64, reason: String },
    #[error("f vanishes near {preimage}")]
    ZeroValueOnProbe { preimage: C64 },
    #[error("h' vanishes near {z}")]
    HPrimeZeroOnBox { z: C64 },
    #[error("expected a chain with at least two factors")]
    NotAComposition,
    #[error("asymptotic set is not known to be complete")]
    IncompleteInput,
    #[error("component counts violate subadditivity: f_{sum} > f_{k} + f_{n}", sum = k + n)]
    SubadditivityViolation { k: usize, n: usize },
    #[error("component counts must start with f_1 = comp_f and be positive")]
    InvalidCounts,
    #[error("g(0) = {value} is not zero")]
    GNotZeroAtOrigin { value: C64 },
    #[error("max modulus {modulus} at r = {r} does not exceed 1")]
    DegenerateModulus { r: f64, modulus: f64 },
    #[error("chain is not normalized: residual {residual:e} at the origin")]
    NotNormalized { residual: f64 },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainProvenance {
    /// `(a + e^d z) ∘ z² ∘ e^{cz/2}` for `f = a + e^{cz+d}`.
    OmittedAffine,
    /// `(a + z) ∘ e^z ∘ log(f - a)`.
    OmittedLog,
    /// `(z/(N+1)) ∘ z^{N+1} ∘ (z - 0) ∘ L` with `L^{N+1} = (N+1) f`.
    Root,
    Identity,
    User,
}

/// Factors listed outermost first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorChain {
    pub factors: Vec<CatalogFn>,
    pub provenance: ChainProvenance,
}

impl FactorChain {
    pub fn user(factors: Vec<CatalogFn>) -> Self {
        Self {
            factors,
            provenance: ChainProvenance::User,
        }
    }

    pub fn identity(f: CatalogFn) -> Self {
        Self {
            factors: vec![f],
            provenance: ChainProvenance::Identity,
        }
    }

    pub fn as_catalog(&self) -> CatalogFn {
        CatalogFn::chain(self.factors.clone())
    }

    pub fn eval(&self, z: C64) -> Result<C64, CatalogError> {
        self.as_catalog().eval(z)
    }

    /// Value and derivative at 0 match those of `f`.
    pub fn check_normalized(&self, f: &CatalogFn) -> Result<(), CompError> {
        let (v, d) = self.as_catalog().eval_with_derivative(ZERO)?;
        let (fv, fd) = f.eval_with_derivative(ZERO)?;
        let residual = (v - fv).norm().max((d - fd).norm());
        if residual > NORMALIZATION_TOL {
            return Err(CompError::NotNormalized { residual });
        }
        Ok(())
    }
}

/// First `n` points of the base-2/3 Halton sequence mapped to `|z| ≤ radius`
/// with area-uniform density.
pub fn halton_disk(n: usize, radius: f64) -> Vec<C64> {
    (1..=n)
        .map(|i| {
            let r = radius * radical_inverse(i, 2).sqrt();
            C64::from_polar(r, std::f64::consts::TAU * radical_inverse(i, 3))
        })
        .collect()
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut x = 0.0;
    while i > 0 {
        x += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    x
}

/// `max |f(z) - chain(z)|` over Halton points of the disk.
pub fn verify_composition(
    f: &CatalogFn,
    chain: &FactorChain,
    n_samples: usize,
    box_radius: f64,
) -> Result<f64, CatalogError> {
    let g = chain.as_catalog();
    let mut worst: f64 = 0.0;
    for z in halton_disk(n_samples, box_radius) {
        worst = worst.max((f.eval(z)? - g.eval(z)?).norm());
    }
    Ok(worst)
}

fn is_affine(s: &PowerSeries) -> bool {
    s.coeffs().iter().skip(2).all(|c| c.norm() < AFFINE_TOL)
}

/// Factorization through an omitted value `omitted` of `f`.
pub fn picard_factorize(f: &CatalogFn, omitted: C64) -> Result<FactorChain, CompError> {
    f.validate()?;
    let probe = f.surjectivity_probe(&[omitted], PROBE_NEWTON)?;
    if let Some(preimage) = probe.preimage_of(omitted) {
        return Err(CompError::NotOmittedOnProbe { omitted, preimage });
    }
    let log = CatalogFn::chain(vec![CatalogFn::LogShift { a: omitted }, f.clone()]);
    let branch = |e: CatalogError| CompError::BranchObstruction {
        omitted,
        reason: e.to_string(),
    };
    let at0 = log.taylor_at(ZERO, AFFINE_ORDER).map_err(branch)?;
    let at1 = log.taylor_at(ONE, AFFINE_ORDER).map_err(branch)?;
    if !at0.is_finite() || !at1.is_finite() {
        return Err(CompError::BranchObstruction {
            omitted,
            reason: "non-finite logarithm series".into(),
        });
    }
    let chain = if is_affine(&at0) && is_affine(&at1) {
        let c = at0.coeff(1);
        let d = at0.coeff(0);
        FactorChain {
            factors: vec![
                CatalogFn::Linear { a: d.exp(), b: omitted },
                CatalogFn::Monomial { n: 2 },
                CatalogFn::ScaledExp { lambda: c / 2.0 },
            ],
            provenance: ChainProvenance::OmittedAffine,
        }
    } else {
        FactorChain {
            factors: vec![
                CatalogFn::Affine { a: omitted },
                CatalogFn::ScaledExp { lambda: ONE },
                log,
            ],
            provenance: ChainProvenance::OmittedLog,
        }
    };
    chain.check_normalized(f)?;
    Ok(chain)
}

/// The inner factor `L = (N+1)^{1/(N+1)} f^{1/(N+1)}`, principal root at 0.
pub fn root_inner(f: &CatalogFn, n: u32) -> CatalogFn {
    let m = (n + 1) as f64;
    CatalogFn::chain(vec![
        CatalogFn::Linear {
            a: C64::new(m.powf(1.0 / m), 0.0),
            b: ZERO,
        },
        CatalogFn::ScaledExp {
            lambda: C64::new(1.0 / m, 0.0),
        },
        CatalogFn::LogShift { a: ZERO },
        f.clone(),
    ])
}

/// `f = (z/(N+1)) ∘ z^{N+1} ∘ (z - 0) ∘ L` for `f` without zeros.
pub fn root_factorize(f: &CatalogFn, n: u32) -> Result<FactorChain, CompError> {
    f.validate()?;
    if n == 0 {
        return Err(CatalogError::Invalid("root factorization needs N >= 1".into()).into());
    }
    let probe = f.surjectivity_probe(&[ZERO], PROBE_NEWTON)?;
    if let Some(preimage) = probe.preimage_of(ZERO) {
        return Err(CompError::ZeroValueOnProbe { preimage });
    }
    let m = (n + 1) as f64;
    let chain = FactorChain {
        factors: vec![
            CatalogFn::Linear {
                a: C64::new(1.0 / m, 0.0),
                b: ZERO,
            },
            CatalogFn::Monomial { n: n + 1 },
            CatalogFn::Affine { a: ZERO },
            root_inner(f, n),
        ],
        provenance: ChainProvenance::Root,
    };
    chain.check_normalized(f)?;
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivideReport {
    /// `max |f_k(z) - g^{(k)}(h(z))|` on the sample points, `k = 0..=n_max`.
    pub residuals: Vec<f64>,
    /// Coefficient mismatch between `f_k` and `g^{(k)} ∘ h` below degree
    /// [`DIVIDE_COMPARE`], relative to the largest coefficient.
    pub coefficient_residuals: Vec<f64>,
    /// `max |f_1 f_0 - (g g')(h)|` on the sample points.
    pub product_residual: f64,
}

fn split_composition(f: &CatalogFn) -> Result<(CatalogFn, CatalogFn), CompError> {
    match f {
        CatalogFn::Chain { factors } if factors.len() >= 2 => {
            let (h, g) = factors.split_last().expect("two factors");
            let g = if g.len() == 1 {
                g[0].clone()
            } else {
                CatalogFn::chain(g.to_vec())
            };
            Ok((g, h.clone()))
        }
        _ => Err(CompError::NotAComposition),
    }
}

/// `g^{(k)}(w)` read off the Taylor expansion of `g` at `w`.
fn nth_derivative(g: &CatalogFn, w: C64, k: usize) -> Result<C64, CatalogError> {
    let s = g.taylor_at(w, k + 2)?;
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    Ok(s.coeff(k) * fact)
}

/// Coefficient mismatch relative to the largest reference coefficient; an
/// identically zero reference is compared in absolute terms.
fn relative_mismatch(a: &PowerSeries, b: &PowerSeries, upto: usize) -> f64 {
    let scale = (0..upto).map(|n| b.coeff(n).norm()).fold(0.0, f64::max);
    let diff = (0..upto)
        .map(|n| (a.coeff(n) - b.coeff(n)).norm())
        .fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// The recursion `f_0 = f`, `f_{k+1} = f_k' / h'` for `f = g ∘ h`, compared
/// with `g^{(k)} ∘ h`.
pub fn divide_recursion(f: &CatalogFn, n_max: usize) -> Result<DivideReport, CompError> {
    let (g, h) = split_composition(f)?;
    let samples = halton_disk(DIVIDE_SAMPLES, DIVIDE_RADIUS);
    for &z in &samples {
        let (_, d) = h.eval_with_derivative(z)?;
        if d.norm() < H_PRIME_MIN {
            return Err(CompError::HPrimeZeroOnBox { z });
        }
    }
    let h_series = h.taylor_at(ZERO, DIVIDE_ORDER)?;
    let h_prime = h_series.derive();
    if h_prime.coeff(0).norm() < H_PRIME_MIN {
        return Err(CompError::HPrimeZeroOnBox { z: ZERO });
    }
    let h_at: Vec<C64> = samples.iter().map(|&z| h.eval(z)).collect::<Result<_, _>>()?;
    let g_outer = g.taylor_at(h_series.coeff(0), DIVIDE_ORDER)?;

    let mut fk = f.taylor_at(ZERO, DIVIDE_ORDER)?;
    let mut g_k = g_outer.clone();
    let mut residuals = Vec::with_capacity(n_max + 1);
    let mut coefficient_residuals = Vec::with_capacity(n_max + 1);
    let mut f1 = None;
    for k in 0..=n_max {
        let mut worst: f64 = 0.0;
        for (&z, &w) in samples.iter().zip(&h_at) {
            worst = worst.max((fk.eval(z) - nth_derivative(&g, w, k)?).norm());
        }
        residuals.push(worst);
        let reference = g_k.compose(&h_series)?;
        coefficient_residuals.push(relative_mismatch(&fk, &reference, DIVIDE_COMPARE.min(fk.order())));
        if k == n_max {
            break;
        }
        let divisor = h_prime.truncate(fk.order() - 1);
        fk = fk.derive().div(&divisor)?;
        g_k = g_k.derive();
        if k == 0 {
            f1 = Some(fk.clone());
        }
    }

    let f0 = f.taylor_at(ZERO, DIVIDE_ORDER)?;
    let f1 = match f1 {
        Some(s) => s,
        None => f0.derive().div(&h_prime)?,
    };
    let product = f1.mul(&f0.truncate(f1.order()))?;
    let mut product_residual: f64 = 0.0;
    for (&z, &w) in samples.iter().zip(&h_at) {
        let (gv, gd) = g.eval_with_derivative(w)?;
        product_residual = product_residual.max((product.eval(z) - gv * gd).norm());
    }
    Ok(DivideReport {
        residuals,
        coefficient_residuals,
        product_residual,
    })
}

/// Asymptotic values of `f ∘ g`: `A(f) ∪ f(A(g))`.
pub fn asym_compose(
    a_f: &AsymptoticSet,
    f: &CatalogFn,
    a_g: &AsymptoticSet,
) -> Result<AsymptoticSet, CompError> {
    if !a_f.complete || !a_g.complete {
        return Err(CompError::IncompleteInput);
    }
    let mut values = a_f.values.clone();
    for &w in &a_g.values {
        values.push(f.eval(w)?);
    }
    let mut out = AsymptoticSet::new(values, true, AsymptoticProvenance::SetAlgebra);
    out.tolerance = a_f.tolerance.max(a_g.tolerance);
    Ok(out)
}

/// Asymptotic values of the `(n+1)`-fold iterate of `f`, by folding
/// [`asym_compose`].
pub fn asym_iterate(a_f: &AsymptoticSet, f: &CatalogFn, n: usize) -> Result<AsymptoticSet, CompError> {
    if !a_f.complete {
        return Err(CompError::IncompleteInput);
    }
    let mut acc = a_f.clone();
    acc.values = dedup_points(acc.values, ASYMPTOTIC_DEDUP);
    for _ in 0..n {
        acc = asym_compose(a_f, f, &acc)?;
    }
    Ok(acc)
}

/// Component counts of the iterates of one function; `f_k[0]` is `f_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompCounts {
    pub comp_f: u64,
    pub f_k: Vec<u64>,
}

impl CompCounts {
    pub fn validate(&self) -> Result<(), CompError> {
        if self.comp_f == 0 || self.f_k.first() != Some(&self.comp_f) || self.f_k.contains(&0) {
            return Err(CompError::InvalidCounts);
        }
        let len = self.f_k.len();
        for k in 1..=len {
            for n in k..=len - k {
                if self.f_k[k + n - 1] > self.f_k[k - 1] + self.f_k[n - 1] {
                    return Err(CompError::SubadditivityViolation { k, n });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KoebeCheck {
    pub lhs: f64,
    pub bound: f64,
    /// Closed-form bound on the unstored terms.
    pub tail: f64,
    pub ok: bool,
}

/// `|Σ f_k z^k|` against `comp_f |z| / (1 - |z|)^2`.
pub fn comp_koebe(counts: &CompCounts, z: C64) -> Result<KoebeCheck, CompError> {
    counts.validate()?;
    let x = z.norm();
    if !(x < 1.0) {
        return Err(CatalogError::Invalid(format!("|z| = {x} is not below 1")).into());
    }
    let mut sum = ZERO;
    let mut zk = ONE;
    for &f in &counts.f_k {
        zk *= z;
        sum += zk * f as f64;
    }
    let lhs = sum.norm();
    let cf = counts.comp_f as f64;
    let bound = cf * x / (1.0 - x).powi(2);
    let big_k = counts.f_k.len() as f64;
    // Σ_{k>K} k x^k = x^{K+1} ((K+1) - K x) / (1 - x)^2
    let tail = cf * x.powf(big_k + 1.0) * ((big_k + 1.0) - big_k * x) / (1.0 - x).powi(2);
    let ok = lhs <= (bound + tail) * (1.0 + 4.0 * f64::EPSILON);
    Ok(KoebeCheck { lhs, bound, tail, ok })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub c_rho: f64,
    pub ok: bool,
}

/// `M(R, f∘g) ≥ M(c(ρ) M(ρR, g), f)` with `c(ρ) = (1 - ρ²) / (4ρ)`.
pub fn growth_clunie(f: &CatalogFn, g: &CatalogFn, rho: f64, r: f64) -> Result<GrowthCheck, CompError> {
    if !(rho > 0.0 && rho < 1.0) || !(r >= 0.0) {
        return Err(CatalogError::Invalid(format!("need 0 < rho < 1 and R >= 0, got {rho}, {r}")).into());
    }
    let value = g.eval(ZERO)?;
    if value.norm() > G_ORIGIN_TOL {
        return Err(CompError::GNotZeroAtOrigin { value });
    }
    let c_rho = (1.0 - rho * rho) / (4.0 * rho);
    let lhs = CatalogFn::chain(vec![f.clone(), g.clone()]).max_modulus(r)?;
    let rhs = f.max_modulus(c_rho * g.max_modulus(rho * r)?)?;
    Ok(GrowthCheck {
        lhs,
        rhs,
        c_rho,
        ok: lhs >= rhs * (1.0 - CLUNIE_SLACK),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyaRatios {
    pub r: Vec<f64>,
    pub ratios: Vec<f64>,
    pub increasing: bool,
}

/// `log M(r, f∘g) / log M(r, f)` on a grid of radii.
pub fn polya_ratio(f: &CatalogFn, g: &CatalogFn, grid: &[f64]) -> Result<PolyaRatios, CompError> {
    let fg = CatalogFn::chain(vec![f.clone(), g.clone()]);
    let mut ratios = Vec::with_capacity(grid.len());
    for &r in grid {
        let mf = f.max_modulus(r)?;
        if !(mf > 1.0) {
            return Err(CompError::DegenerateModulus { r, modulus: mf });
        }
        ratios.push(fg.max_modulus(r)?.ln() / mf.ln());
    }
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    Ok(PolyaRatios {
        r: grid.to_vec(),
        ratios,
        increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn halton_points_fill_the_disk() {
        let pts = halton_disk(200, 2.0);
        assert!(pts.iter().all(|z| z.norm() <= 2.0));
        let inner = pts.iter().filter(|z| z.norm() <= 1.0).count();
        // a quarter of the area
        assert!((inner as f64 / 200.0 - 0.25).abs() < 0.05, "{inner}");
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert!((radical_inverse(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn half_exponential_square() {
        let f = CatalogFn::exp_minus_one();
        let chain = FactorChain::user(vec![
            CatalogFn::chain(vec![CatalogFn::Affine { a: re(-1.0) }, CatalogFn::Monomial { n: 2 }]),
            CatalogFn::ScaledExp { lambda: re(0.5) },
        ]);
        assert!(verify_composition(&f, &chain, 200, 2.0).unwrap() < 1e-12);
    }

    #[test]
    fn power_tower_of_exp() {
        let f = CatalogFn::ScaledExp { lambda: re(1.0) };
        let chain = FactorChain::user(vec![
            CatalogFn::Monomial { n: 2 },
            CatalogFn::Monomial { n: 3 },
            CatalogFn::ScaledExp { lambda: re(1.0 / 6.0) },
        ]);
        assert!(verify_composition(&f, &chain, 200, 2.0).unwrap() < 1e-12);
        let id = FactorChain::identity(CatalogFn::calabi());
        assert_eq!(verify_composition(&CatalogFn::calabi(), &id, 50, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn picard_affine_case() {
        let f = CatalogFn::ScaledExp { lambda: re(1.0) };
        let chain = picard_factorize(&f, ZERO).unwrap();
        assert_eq!(chain.provenance, ChainProvenance::OmittedAffine);
        assert_eq!(chain.factors[1], CatalogFn::Monomial { n: 2 });
        assert!(verify_composition(&f, &chain, 200, 2.0).unwrap() < 1e-12);
    }

    #[test]
    fn picard_log_case() {
        let f = CatalogFn::chain(vec![CatalogFn::ScaledExp { lambda: re(1.0) }, CatalogFn::calabi()]);
        let chain = picard_factorize(&f, ZERO).unwrap();
        assert_eq!(chain.provenance, ChainProvenance::OmittedLog);
        assert!(verify_composition(&f, &chain, 200, 2.0).unwrap() < 1e-10);
    }

    #[test]
    fn picard_rejects_attained_value() {
        assert!(matches!(
            picard_factorize(&CatalogFn::calabi(), ZERO),
            Err(CompError::NotOmittedOnProbe { .. })
        ));
    }

    #[test]
    fn root_factorization_of_exp() {
        let f = CatalogFn::IntExpPoly {
            p: vec![ZERO, ONE],
            c: ONE,
        };
        for n in [1u32, 2] {
            let chain = root_factorize(&f, n).unwrap();
            assert!(verify_composition(&f, &chain, 200, 2.0).unwrap() < 1e-12);
            // L = (N+1)^{1/(N+1)} e^{z/(N+1)}
            let m = (n + 1) as f64;
            let l = root_inner(&f, n).taylor_at(ZERO, 8).unwrap();
            let mut expect = m.powf(1.0 / m);
            for k in 0..8 {
                assert!((l.coeff(k) - re(expect)).norm() < 1e-12, "{n} {k}");
                expect /= m * (k + 1) as f64;
            }
        }
        assert!(matches!(
            root_factorize(&CatalogFn::exp_minus_one(), 1),
            Err(CompError::ZeroValueOnProbe { .. })
        ));
    }

    #[test]
    fn divide_recursion_two_step_exact() {
        let f = CatalogFn::chain(vec![
            CatalogFn::Monomial { n: 2 },
            CatalogFn::ScaledExp { lambda: re(1.0) },
        ]);
        let rep = divide_recursion(&f, 3).unwrap();
        assert!(rep.residuals.iter().all(|&r| r < 1e-12), "{:?}", rep.residuals);
        assert!(rep.product_residual < 1e-12);
        assert_eq!(divide_recursion(&f, 0).unwrap().residuals.len(), 1);
        assert!(divide_recursion(&CatalogFn::calabi(), 1).is_err());
    }

    #[test]
    fn asym_compose_set_arithmetic() {
        let a_f = AsymptoticSet::new(vec![re(2.0)], true, AsymptoticProvenance::ClosedForm);
        let a_g = AsymptoticSet::new(vec![ZERO], true, AsymptoticProvenance::ClosedForm);
        let out = asym_compose(&a_f, &CatalogFn::Affine { a: ONE }, &a_g).unwrap();
        assert_eq!(out.values, vec![re(2.0), re(1.0)]);
        assert!(matches!(
            asym_compose(&AsymptoticSet::incomplete(), &CatalogFn::identity(), &a_g),
            Err(CompError::IncompleteInput)
        ));
    }

    #[test]
    fn koebe_examples() {
        let maximal = CompCounts {
            comp_f: 1,
            f_k: (1..=200).collect(),
        };
        let k = comp_koebe(&maximal, re(0.5)).unwrap();
        assert!((k.lhs - 2.0).abs() < 1e-12 && (k.bound - 2.0).abs() < 1e-15 && k.ok);
        let ones = CompCounts {
            comp_f: 1,
            f_k: vec![1; 200],
        };
        let k = comp_koebe(&ones, re(0.5)).unwrap();
        assert!((k.lhs - 1.0).abs() < 1e-12 && k.ok);
        let bad = CompCounts {
            comp_f: 1,
            f_k: vec![1, 5],
        };
        assert!(matches!(
            comp_koebe(&bad, re(0.5)),
            Err(CompError::SubadditivityViolation { k: 1, n: 1 })
        ));
    }

    #[test]
    fn clunie_examples() {
        let f = CatalogFn::exp_minus_one();
        let chk = growth_clunie(&f, &f, 0.5, 2.0).unwrap();
        let e2 = 2f64.exp() - 1.0;
        assert!((chk.lhs - (e2.exp() - 1.0)).abs() < 1e-8 * chk.lhs);
        assert!((chk.rhs - ((0.375 * (1f64.exp() - 1.0)).exp() - 1.0)).abs() < 1e-10);
        assert!(chk.ok);
        let id = growth_clunie(&f, &CatalogFn::identity(), 0.5, 1.0).unwrap();
        assert!(id.ok);
        assert!(matches!(
            growth_clunie(&f, &CatalogFn::ScaledExp { lambda: ONE }, 0.5, 1.0),
            Err(CompError::GNotZeroAtOrigin { .. })
        ));
    }

    #[test]
    fn polya_examples() {
        let e = CatalogFn::ScaledExp { lambda: ONE };
        let p = polya_ratio(&e, &e, &[1.0, 2.0, 3.0]).unwrap();
        for (r, v) in p.r.iter().zip(&p.ratios) {
            assert!((v - r.exp() / r).abs() < 1e-9, "{r} {v}");
        }
        assert!(p.increasing);
        let id = polya_ratio(&e, &CatalogFn::identity(), &[1.0, 2.0]).unwrap();
        assert!(id.ratios.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(polya_ratio(&e, &e, &[2.0]).unwrap().increasing);
    }
}
