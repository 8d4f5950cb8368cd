//! Constants `c_k > 0` making `F_n = (c_1 e^z + z) ∘ … ∘ (c_n e^z + z)`
//! converge uniformly on compact sets.
//!
//! `F_k(k)` grows like a tower of exponentials in `k`, so the admissible
//! constants shrink doubly exponentially. Increments are therefore carried as
//! logarithms, and the last stages that remain resolvable use a second
//! exponential level for both the constant and the outermost argument.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::CatalogFn;
use crate::series::C64;

pub const MAX_STAGES: usize = 40;
const BISECT_REL: f64 = 1e-12;
const BISECT_MAX: usize = 200;
pub const TAIL_SAMPLES: usize = 720;
/// Past this real part `e^t` leaves the `f64` range.
const EXP_RANGE: f64 = 690.0;
/// Largest absolute rounding error in `ln c*` that still places `c*/2`.
const RESOLVE_ABS: f64 = 1e-4;
/// Relative deepening of `ln c` when `c*/2` cannot be resolved.
const SLACK: f64 = 1e-9;
/// A phase is meaningless once the rounding error of the angle reaches this.
const PHASE_ABS: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NgError {
    #[error("need 1 <= K <= {MAX_STAGES}, got {0}")]
    InvalidLength(usize),
    /// The stage cannot be resolved in floating point: an argument of the
    /// chain would need a third exponential level.
    #[error("stage {stage}: increments leave the representable range")]
    UnderflowAtStage { stage: usize },
    #[error("stage {stage}: increment {increment:e} exceeds 2^-{stage}")]
    InequalityViolated { stage: usize, increment: f64 },
    #[error("|z| = {modulus} lies outside the validated disk of radius {radius}")]
    OutsideValidatedDisk { modulus: f64, radius: f64 },
    #[error("stage {k} needs c_{next} but only {len} constants exist", next = k + 1)]
    StageOutOfRange { k: usize, len: usize },
    #[error("F_K({z}) overflows")]
    Overflow { z: C64 },
}

/// `ln c` of one constant. `NegExp(l)` stands for `ln c = -e^l`, used once
/// `ln c` itself leaves the `f64` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "value", rename_all = "snake_case")]
pub enum LogConst {
    Ln(f64),
    NegExp(f64),
}

impl LogConst {
    /// `ln c`, `-inf` for `NegExp`.
    pub fn ln(self) -> f64 {
        match self {
            LogConst::Ln(x) => x,
            LogConst::NegExp(l) => -l.exp(),
        }
    }

    /// `c` as an `f64`, zero once it underflows.
    pub fn value(self) -> f64 {
        self.ln().exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgSequence {
    /// The constants; late stages underflow to 0 here, see `log_cs`.
    pub cs: Vec<f64>,
    /// Authoritative logarithms of the constants when present.
    #[serde(default)]
    pub log_cs: Vec<LogConst>,
    /// `(F_{k+1}(k) - F_k(k)) / 2^{-k}` for `k = 1..K-1`.
    pub margins: Vec<f64>,
    /// Bisection iterations per stage, 0 where the constant was certified
    /// without bisection.
    #[serde(default)]
    pub method_log: Vec<usize>,
}

impl NgSequence {
    fn logs(&self) -> Vec<LogConst> {
        if self.log_cs.len() == self.cs.len() {
            self.log_cs.clone()
        } else {
            self.cs.iter().map(|c| LogConst::Ln(c.ln())).collect()
        }
    }

    pub fn len(&self) -> usize {
        self.cs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cs.is_empty()
    }

    /// `F_k(z)` for `k ≤ len()`.
    pub fn prefix_eval(&self, k: usize, z: C64) -> C64 {
        self.logs()[..k]
            .iter()
            .rev()
            .fold(z, |w, lc| w + (w + lc.ln()).exp())
    }

    /// `|F_k(z + dz) - F_k(z)|`, or an upper bound where the phase of the
    /// outermost argument is lost.
    pub fn prefix_increment(&self, k: usize, z: C64, dz: C64) -> Result<f64, NgError> {
        if dz == C64::new(0.0, 0.0) {
            return Ok(0.0);
        }
        let parts = chain_increment(&self.logs()[..k], z, LogDelta::Small(dz.ln()))
            .ok_or(NgError::UnderflowAtStage { stage: k })?;
        Ok(parts.bound().exp())
    }

    /// The longest prefix whose constants are representable as `f64`.
    pub fn as_catalog(&self) -> CatalogFn {
        let k = self.cs.iter().take_while(|c| **c > 0.0).count();
        CatalogFn::NgLimit {
            cs: self.cs[..k].to_vec(),
            k,
        }
    }
}

/// `ln δ`, possibly `-e^l + a` when far below the `f64` range.
#[derive(Debug, Clone, Copy)]
enum LogDelta {
    Small(C64),
    NegBig { l: f64, a: C64 },
}

impl LogDelta {
    fn from_const(lc: LogConst, shift: C64) -> Self {
        match lc {
            LogConst::Ln(x) => LogDelta::Small(shift + x),
            LogConst::NegExp(l) => LogDelta::NegBig { l, a: shift },
        }
    }

    fn add(self, t: C64) -> Self {
        match self {
            LogDelta::Small(a) => LogDelta::Small(a + t),
            LogDelta::NegBig { l, a } => LogDelta::NegBig { l, a: a + t },
        }
    }

    /// `ln((e^δ - 1)/δ)`.
    fn expm1_ratio(self) -> C64 {
        match self {
            LogDelta::NegBig { .. } => C64::new(0.0, 0.0),
            LogDelta::Small(ld) => {
                let d = ld.exp();
                if ld.re < -8.0 {
                    d * (0.5 + d / 24.0)
                } else {
                    ((d.exp() - 1.0) / d).ln()
                }
            }
        }
    }
}

/// Real part of the final `ln δ`, as `small - e^neg + e^pos`.
#[derive(Debug, Clone, Copy)]
struct Parts {
    small: f64,
    neg: Option<f64>,
    pos: Option<f64>,
}

impl Parts {
    /// The value, `±inf` when it leaves the `f64` range.
    fn bound(self) -> f64 {
        match (self.neg, self.pos) {
            (None, None) => self.small,
            (Some(l), None) => self.small - l.exp(),
            (None, Some(p)) => self.small + p.exp(),
            (Some(l), Some(p)) => {
                if p >= l {
                    f64::INFINITY
                } else {
                    // e^p - e^l = -e^{l + ln(1 - e^{p-l})}
                    self.small - (l + (-(p - l).exp_m1()).ln()).exp()
                }
            }
        }
    }
}

/// `ln(1 + e^t)` without overflow.
fn log1p_exp(t: C64) -> C64 {
    if t.re > 40.0 {
        t + (-t).exp()
    } else if t.re < -40.0 {
        t.exp()
    } else {
        (1.0 + t.exp()).ln()
    }
}

fn log1p_exp_re(t: f64) -> f64 {
    if t > 40.0 {
        t + (-t).exp()
    } else {
        t.exp().ln_1p()
    }
}

fn phase_lost(t: C64) -> bool {
    t.im.abs() * f64::EPSILON > PHASE_ABS
}

/// Chain argument `u`, or `e^U` once `u` leaves the `f64` range.
#[derive(Debug, Clone, Copy)]
enum Arg {
    Small(C64),
    Big(C64),
}

/// Pushes `(u, δ)` through `u ↦ c e^u + u`, innermost constant last, and
/// returns the real part of the final `ln δ`. `None` when an intermediate
/// quantity cannot be represented.
fn chain_increment(log_cs: &[LogConst], z: C64, ld0: LogDelta) -> Option<Parts> {
    let mut u = Arg::Small(z);
    let mut ld = ld0;
    for (i, &lc) in log_cs.iter().enumerate().rev() {
        let last = i == 0;
        let r = ld.expm1_ratio();
        // δ' = δ (1 + c e^u (e^δ - 1)/δ)
        match (u, lc) {
            (Arg::Small(w), LogConst::Ln(x)) => {
                let t = w + x + r;
                if phase_lost(t) && t.re > -40.0 {
                    if !last {
                        return None;
                    }
                    // Only the modulus of the final increment matters.
                    return Some(finish(ld, None, log1p_exp_re(t.re)));
                }
                ld = ld.add(log1p_exp(t));
            }
            // c e^u vanishes against -e^l
            (Arg::Small(_), LogConst::NegExp(_)) => {}
            (Arg::Big(big), LogConst::Ln(x)) if last => {
                let (re_u, im_u) = (big.re, big.im);
                if phase_lost(big) {
                    return None;
                }
                let cos = im_u.cos();
                let b = x + r.re;
                let a = re_u + cos.abs().ln();
                if a < EXP_RANGE {
                    return Some(finish(ld, None, log1p_exp_re(a.exp() * cos.signum() + b)));
                }
                if cos < 0.0 {
                    return Some(finish(ld, None, 0.0));
                }
                return Some(finish(ld, Some(a), b));
            }
            _ => return None,
        }
        if !last {
            u = match (u, lc) {
                (Arg::Small(w), LogConst::Ln(x)) => {
                    let t = w + x;
                    if t.re > EXP_RANGE {
                        Arg::Big(t + (1.0 + w * (-t).exp()).ln())
                    } else {
                        if phase_lost(t) && t.re > -40.0 {
                            return None;
                        }
                        Arg::Small(w + t.exp())
                    }
                }
                (small, LogConst::NegExp(_)) => small,
                _ => return None,
            };
        }
    }
    Some(finish(ld, None, 0.0))
}

/// Adds a real term `e^pos + small` to the real part of `ld`.
fn finish(ld: LogDelta, pos: Option<f64>, small: f64) -> Parts {
    match ld {
        LogDelta::Small(a) => Parts {
            small: a.re + small,
            neg: None,
            pos,
        },
        LogDelta::NegBig { l, a } => Parts {
            small: a.re + small,
            neg: Some(l),
            pos,
        },
    }
}

/// Builds `K` constants, each stage taking half the largest admissible one.
pub fn build_cs(k_max: usize) -> Result<NgSequence, NgError> {
    build_cs_with(k_max, 0.5)
}

/// As [`build_cs`] with `c_{k+1} = shrink · c*`; values of `shrink` above 1
/// exist to exercise the failure path.
///
/// Where rounding in `ln c*` exceeds [`RESOLVE_ABS`], `c*/2` cannot be
/// placed and `ln c*` is deepened by the relative factor [`SLACK`] instead,
/// which keeps the defining inequality with a margin far above the rounding.
pub fn build_cs_with(k_max: usize, shrink: f64) -> Result<NgSequence, NgError> {
    if k_max == 0 || k_max > MAX_STAGES {
        return Err(NgError::InvalidLength(k_max));
    }
    let mut log_cs = vec![LogConst::Ln(0.0)];
    let mut margins = Vec::new();
    let mut method_log = Vec::new();
    for k in 1..k_max {
        let x = C64::new(k as f64, 0.0);
        let kf = k as f64;
        let log_budget = -kf * std::f64::consts::LN_2;
        let unresolved = NgError::UnderflowAtStage { stage: k };
        let gain = |lc: LogConst| -> Option<f64> {
            Some(chain_increment(&log_cs, x, LogDelta::from_const(lc, x))?.bound())
        };

        // ln F_k'(k) from a vanishing increment.
        let probe = -EXP_RANGE;
        let slope = chain_increment(&log_cs, x, LogDelta::Small(C64::new(probe, 0.0)))
            .ok_or(unresolved.clone())?;
        let (lc, iters) = match slope.pos {
            Some(p) => (LogConst::NegExp(p + SLACK * p.max(1.0)), 0),
            None => {
                let estimate = log_budget - kf - (slope.small - probe);
                if estimate.abs() * f64::EPSILON <= RESOLVE_ABS {
                    let (sup, iters) = log_supremum(estimate, |lc| {
                        gain(LogConst::Ln(lc)).is_some_and(|g| g <= log_budget)
                    });
                    if !sup.is_finite() {
                        return Err(unresolved);
                    }
                    (LogConst::Ln(sup + shrink.ln()), iters)
                } else {
                    (LogConst::Ln(estimate * (1.0 + SLACK)), 0)
                }
            }
        };
        let achieved = gain(lc).ok_or(unresolved)?;
        if !(achieved <= log_budget) {
            return Err(NgError::InequalityViolated {
                stage: k,
                increment: achieved.exp(),
            });
        }
        log_cs.push(lc);
        margins.push((achieved - log_budget).exp());
        method_log.push(iters);
    }
    Ok(NgSequence {
        cs: log_cs.iter().map(|l| l.value()).collect(),
        log_cs,
        margins,
        method_log,
    })
}

/// Largest `ln c` with `ok(ln c)` for a predicate holding on a left ray,
/// searched outward from `start`. The tolerance is relative on `c`, i.e.
/// absolute on `ln c`.
fn log_supremum<P: Fn(f64) -> bool>(start: f64, ok: P) -> (f64, usize) {
    let mut lo = start;
    let mut hi = start;
    let mut step = 1.0;
    let mut iters = 0;
    if ok(lo) {
        while ok(hi) {
            lo = hi;
            hi += step;
            step *= 2.0;
            iters += 1;
            if hi > EXP_RANGE {
                return (f64::NAN, iters);
            }
        }
    } else {
        while !ok(lo) {
            hi = lo;
            lo -= step;
            step *= 2.0;
            iters += 1;
            if !lo.is_finite() {
                return (f64::NEG_INFINITY, iters);
            }
        }
    }
    while iters < BISECT_MAX && (hi - lo) > BISECT_REL {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    (lo, iters)
}

/// `max |F_{k+1} - F_k|` over [`TAIL_SAMPLES`] points of `|z| = probe_radius`.
/// Where the phase of the outermost argument is lost the sample contributes
/// an upper bound instead of a value.
pub fn tail_bound_check(seq: &NgSequence, k: usize, probe_radius: f64) -> Result<f64, NgError> {
    if k == 0 || k >= seq.cs.len() {
        return Err(NgError::StageOutOfRange { k, len: seq.cs.len() });
    }
    let logs = seq.logs();
    let samples = if probe_radius == 0.0 { 1 } else { TAIL_SAMPLES };
    let mut worst: f64 = 0.0;
    for j in 0..samples {
        let z = C64::from_polar(probe_radius, std::f64::consts::TAU * j as f64 / samples as f64);
        let parts = chain_increment(&logs[..k], z, LogDelta::from_const(logs[k], z))
            .ok_or(NgError::UnderflowAtStage { stage: k })?;
        worst = worst.max(parts.bound().exp());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitValue {
    pub value: C64,
    /// Bound on `|F(z) - F_K(z)|`.
    pub error_bound: f64,
}

/// `F_K(z)` for the full prefix with the bound `2^{1-K}` on the remaining tail.
pub fn limit_eval(seq: &NgSequence, z: C64) -> Result<LimitValue, NgError> {
    let k = seq.cs.len();
    let radius = k.saturating_sub(1) as f64;
    if z.norm() > radius {
        return Err(NgError::OutsideValidatedDisk {
            modulus: z.norm(),
            radius,
        });
    }
    let value = seq.prefix_eval(k, z);
    if !value.is_finite() {
        return Err(NgError::Overflow { z });
    }
    Ok(LimitValue {
        value,
        error_bound: 0.5f64.powi(k as i32 - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn first_constant_is_one() {
        let s = build_cs(1).unwrap();
        assert_eq!(s.cs, vec![1.0]);
        assert!(s.margins.is_empty());
    }

    #[test]
    fn second_constant_matches_scalar_bisection() {
        // e^{1 + c e} + c e <= e + 1/2, solved independently by plain bisection.
        let e = 1f64.exp();
        let g = |c: f64| (1.0 + c * e).exp() + c * e - e - 0.5;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if g(m) <= 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        let s = build_cs(2).unwrap();
        assert!((s.cs[1] - lo / 2.0).abs() < 1e-12 * lo, "{} vs {}", s.cs[1], lo / 2.0);
        assert!((lo - 0.047).abs() < 0.001 && (s.cs[1] - 0.024).abs() < 0.001);
    }

    #[test]
    fn doubled_constant_breaks_inequality() {
        assert!(matches!(
            build_cs_with(2, 2.0),
            Err(NgError::InequalityViolated { stage: 1, .. })
        ));
    }

    #[test]
    fn increment_agrees_with_direct_difference() {
        let s = build_cs(5).unwrap();
        for z in [re(0.3), C64::new(-1.0, 2.0), re(3.0)] {
            let dz = s.cs[4] * z.exp();
            let direct = s.prefix_eval(4, z + dz) - s.prefix_eval(4, z);
            let inc = s.prefix_increment(4, z, dz).unwrap();
            assert!((direct.norm() - inc).abs() < 1e-9 * (1.0 + inc), "{z}");
        }
    }

    #[test]
    fn tail_bounds_and_limits() {
        let s = build_cs(10).unwrap();
        assert!(tail_bound_check(&s, 1, 1.0).unwrap() <= 0.5);
        assert!(tail_bound_check(&s, 5, 5.0).unwrap() <= 0.5f64.powi(5));
        assert!(tail_bound_check(&s, 5, 0.0).unwrap() <= 0.5f64.powi(5));
        assert!(tail_bound_check(&s, 10, 1.0).is_err());
        let at1 = limit_eval(&s, re(1.0)).unwrap();
        assert!(at1.value.re > 1.0);
        let at0 = limit_eval(&s, re(0.0)).unwrap();
        assert!(at0.value.re >= 1.0 && at0.error_bound == 0.5f64.powi(9));
        assert!(matches!(
            limit_eval(&s, re(50.0)),
            Err(NgError::OutsideValidatedDisk { .. })
        ));
    }

    #[test]
    fn catalog_variant_matches_prefix() {
        let s = build_cs(6).unwrap();
        let f = s.as_catalog();
        let z = C64::new(0.4, -1.3);
        assert!((f.eval(z).unwrap() - s.prefix_eval(6, z)).norm() < 1e-14);
    }

    #[test]
    fn twelve_stages_hold_on_every_disk() {
        let s = build_cs(12).unwrap();
        assert_eq!(s.log_cs.len(), 12);
        for k in 1..12 {
            let bound = tail_bound_check(&s, k, k as f64).unwrap();
            assert!(bound <= 0.5f64.powi(k as i32), "stage {k}: {bound:e}");
        }
        assert!(matches!(s.log_cs[11], LogConst::NegExp(_)));
        assert!(s.as_catalog().eval(re(0.5)).is_ok());
    }

    #[test]
    fn late_stages_become_unresolvable() {
        assert!(matches!(build_cs(16), Err(NgError::UnderflowAtStage { .. })));
    }

    #[test]
    fn log_const_serializes_tagged() {
        let j = serde_json::to_string(&LogConst::NegExp(2.0)).unwrap();
        assert_eq!(j, r#"{"form":"neg_exp","value":2.0}"#);
    }
}
