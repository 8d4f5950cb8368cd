//! End-to-end acceptance battery. Runs every criterion, prints one line per
//! criterion and exits non-zero if any of them fails.

use std::f64::consts::{LN_2, PI, TAU};
use std::time::{Duration, Instant};

use holofact_core::atlas::{build_atlas, verify_thm2, AtlasConfig, Budget};
use holofact_core::catalog::{dedup_points, AsymptoticProvenance, AsymptoticSet, CatalogFn, ASYMPTOTIC_DEDUP};
use holofact_core::comp_lab::{
    asym_compose, asym_iterate, divide_recursion, growth_clunie, picard_factorize, polya_ratio,
    root_factorize, verify_composition, FactorChain,
};
use holofact_core::ivp::{bounds_hille, solve_local, IvpSpec, AUTO_BOX_B};
use holofact_core::ng::{build_cs, tail_bound_check};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn unit_disk(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(rng.gen::<f64>().sqrt(), rng.gen_range(0.0..TAU))
}

fn benchmark_continuation() -> Outcome {
    let start = Instant::now();
    let spec = IvpSpec::benchmark();
    let root = solve_local(&spec, 64).map_err(|e| e.to_string())?;
    let r = root.radius().ok_or("root chart looks entire")?;
    let rel = (r - LN_2).abs() / LN_2;
    let atlas = build_atlas(&spec, &Budget::default(), &AtlasConfig::default()).map_err(|e| e.to_string())?;
    let lattice_dist = |z: C64| {
        let k = ((z.im) / TAU).round();
        (z - C64::new(LN_2, TAU * k)).norm()
    };
    let worst_loc = atlas.singular.iter().map(|p| lattice_dist(p.location)).fold(0.0, f64::max);
    let worst_val = atlas.singular.iter().map(|p| (p.singular_value - ONE).norm()).fold(0.0, f64::max);
    let report = verify_thm2(&atlas).map_err(|e| e.to_string())?;
    let a_g = report.asymptotic_values_g.clone().unwrap_or_default();
    let a_g_ok = a_g.len() == 1 && (a_g[0] - ONE).norm() < 1e-9;
    let elapsed = start.elapsed();
    check(
        rel < 0.01
            && !atlas.singular.is_empty()
            && worst_loc < 1e-3
            && worst_val < 1e-6
            && report.passed()
            && a_g_ok
            && elapsed < Duration::from_secs(10),
        format!(
            "r_emp {r:.6} (rel {rel:.1e}), {} singular points, lattice dist {worst_loc:.1e}, \
             value err {worst_val:.1e}, thm2 {}, A_g {a_g:?}, {elapsed:.2?}",
            atlas.singular.len(),
            report.passed()
        ),
    )
}

fn bound_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = Vec::new();
    let mut boxes = 0;
    for i in 0..20 {
        let f: Vec<C64> = (0..=rng.gen_range(1..=4)).map(|_| unit_disk(&mut rng)).collect();
        let g: Vec<C64> = (0..=rng.gen_range(1..=3)).map(|_| unit_disk(&mut rng)).collect();
        let spec = IvpSpec::type1(f, g);
        let chart = solve_local(&spec, 64).map_err(|e| e.to_string())?;
        let r_emp = chart.radius().unwrap_or(f64::INFINITY);
        let mut searched = vec![chart.r_theory];
        for b in AUTO_BOX_B {
            searched.push(bounds_hille(&spec, 1.0, b).map_err(|e| e.to_string())?.into());
        }
        for t in searched {
            boxes += 1;
            if !(t.banach <= t.picard && t.max() <= 1.05 * r_emp) {
                violations.push(format!("spec {i}: {t:?} vs r_emp {r_emp}"));
            }
        }
    }
    check(
        violations.is_empty(),
        format!("20 specs, {boxes} boxes, {} violations {violations:?}", violations.len()),
    )
}

fn factorization_identities() -> Outcome {
    let exp = CatalogFn::ScaledExp { lambda: ONE };
    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut push = |name: &str, f: &CatalogFn, chain: &FactorChain| -> Result<(), String> {
        let r = verify_composition(f, chain, 200, 2.0).map_err(|e| e.to_string())?;
        rows.push((name.into(), r));
        Ok(())
    };
    let remark = FactorChain::user(vec![
        CatalogFn::chain(vec![CatalogFn::Affine { a: -ONE }, CatalogFn::Monomial { n: 2 }]),
        CatalogFn::ScaledExp { lambda: re(0.5) },
    ]);
    push("(z^2-1)∘e^(z/2)", &CatalogFn::exp_minus_one(), &remark)?;
    for n in 2..=4u32 {
        let mut factors: Vec<CatalogFn> = (2..=n).map(|k| CatalogFn::Monomial { n: k }).collect();
        let fact: f64 = (2..=n).map(f64::from).product();
        factors.push(CatalogFn::ScaledExp { lambda: re(1.0 / fact) });
        push(&format!("power tower n={n}"), &exp, &FactorChain::user(factors))?;
    }
    let affine = picard_factorize(&exp, ZERO).map_err(|e| e.to_string())?;
    push("omitted value, affine log", &exp, &affine)?;
    let exp_calabi = CatalogFn::chain(vec![exp.clone(), CatalogFn::calabi()]);
    let trans = picard_factorize(&exp_calabi, ZERO).map_err(|e| e.to_string())?;
    push("omitted value, transcendental log", &exp_calabi, &trans)?;
    let shifted = CatalogFn::IntExpPoly { p: vec![ZERO, ONE], c: ONE };
    for n in 1..=2 {
        let chain = root_factorize(&shifted, n).map_err(|e| e.to_string())?;
        push(&format!("root chain N={n}"), &shifted, &chain)?;
    }
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail: Vec<String> = rows.iter().map(|(n, r)| format!("{n}: {r:.1e}")).collect();
    check(worst < 1e-10, detail.join(", "))
}

fn local_factorization() -> Outcome {
    let spec = IvpSpec::benchmark();
    let chart = solve_local(&spec, 64).map_err(|e| e.to_string())?;
    let r = chart.radius().ok_or("root chart looks entire")?;
    let pair = spec.induced_pair().map_err(|e| e.to_string())?;
    let g = pair.g_catalog().map_err(|e| e.to_string())?.ok_or("g unavailable")?;
    let mut worst: f64 = 0.0;
    for z in holofact_core::comp_lab::halton_disk(200, 0.4 * r) {
        let lhs = pair.f.eval(z).map_err(|e| e.to_string())?;
        let rhs = g.eval(chart.l.eval(z)).map_err(|e| e.to_string())?;
        worst = worst.max((lhs - rhs).norm());
    }
    check(worst < 1e-9, format!("max |f - g∘L| = {worst:.1e} on |z| <= {:.4}", 0.4 * r))
}

/// `ω ∫_0^S e^{-s^m} ds` by composite Simpson along the ray through `ω`.
fn ray_integral(m: i32, omega: C64) -> C64 {
    let (s_max, n) = (12.0, 200_000);
    let h = s_max / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let s: f64 = i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * (-s.powi(m)).exp();
    }
    omega * (acc * h / 3.0)
}

fn matches_all(values: &[C64], oracle: &[C64], tol: f64) -> (bool, f64) {
    let mut worst: f64 = 0.0;
    for o in oracle {
        let d = values.iter().map(|v| (v - o).norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    (values.len() == oracle.len() && worst < tol, worst)
}

fn calabi_asymptotic_values() -> Outcome {
    let gauss = |k: i32| -> Vec<C64> {
        let m = 2 * k;
        (0..m)
            .map(|j| ray_integral(m, C64::from_polar(1.0, TAU * j as f64 / m as f64)))
            .collect()
    };
    let oracle2 = gauss(1);
    let oracle4 = gauss(2);
    // Sanity of the oracle itself.
    let half_sqrt_pi = PI.sqrt() / 2.0;
    let g54 = 0.906_402_477_055_477_f64; // Γ(5/4)
    let oracle_ok = (oracle2[0].re - half_sqrt_pi).abs() < 1e-12 && (oracle4[0].re - g54).abs() < 1e-12;
    let a2 = CatalogFn::calabi().asymptotic_values().map_err(|e| e.to_string())?;
    let a4 = CatalogFn::even_gaussian(2).asymptotic_values().map_err(|e| e.to_string())?;
    let (ok2, e2) = matches_all(&a2.values, &oracle2, 1e-8);
    let (ok4, e4) = matches_all(&a4.values, &oracle4, 1e-4);
    check(
        oracle_ok && ok2 && ok4,
        format!("erf values err {e2:.1e}, quartic values err {e4:.1e}, oracle sane {oracle_ok}"),
    )
}

fn ng_construction() -> Outcome {
    let seq = build_cs(12).map_err(|e| e.to_string())?;
    let mut worst_ratio: f64 = 0.0;
    for k in 1..=11 {
        let b = tail_bound_check(&seq, k, k as f64).map_err(|e| e.to_string())?;
        worst_ratio = worst_ratio.max(b / 0.5f64.powi(k as i32));
    }
    let grows = (1..=5).all(|n| {
        let v = seq.prefix_eval(12, re(n as f64));
        v.is_finite() && v.re > n as f64
    });
    let mut min_coeff = f64::INFINITY;
    for k in 1..=6 {
        let f = CatalogFn::NgLimit { cs: seq.cs[..k].to_vec(), k };
        let t = f.taylor_at(ZERO, 41).map_err(|e| e.to_string())?;
        let scale = t.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        for c in t.coeffs() {
            min_coeff = min_coeff.min(c.re / scale);
            if c.im.abs() > 1e-12 * scale {
                min_coeff = f64::NEG_INFINITY;
            }
        }
    }
    check(
        worst_ratio <= 1.0 && grows && min_coeff >= -1e-12,
        format!(
            "12 constants, max tail/2^-k {worst_ratio:.4}, F(n) > n for n <= 5: {grows}, \
             min relative coefficient {min_coeff:.1e}"
        ),
    )
}

fn divide_recursion_instances() -> Outcome {
    let exp = CatalogFn::ScaledExp { lambda: ONE };
    let instances = [
        CatalogFn::chain(vec![exp.clone(), CatalogFn::exp_minus_one()]),
        CatalogFn::chain(vec![CatalogFn::Monomial { n: 2 }, exp]),
    ];
    let mut worst_series: f64 = 0.0;
    let mut worst_product: f64 = 0.0;
    for f in &instances {
        let rep = divide_recursion(f, 3).map_err(|e| e.to_string())?;
        worst_series = rep.residuals.iter().copied().fold(worst_series, f64::max);
        worst_product = worst_product.max(rep.product_residual);
    }
    check(
        worst_series < 1e-9 && worst_product < 1e-9,
        format!("max f_k - g^(k)∘h residual {worst_series:.1e}, product identity {worst_product:.1e}"),
    )
}

fn same_set(a: &[C64], b: &[C64]) -> bool {
    let within = |x: &C64, s: &[C64]| s.iter().any(|y| (x - y).norm() <= ASYMPTOTIC_DEDUP);
    a.len() == b.len() && a.iter().all(|x| within(x, b)) && b.iter().all(|x| within(x, a))
}

fn asymptotic_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let finite = |vals: Vec<C64>| AsymptoticSet::new(vals, true, AsymptoticProvenance::ClosedForm);
    let mut failures = Vec::new();
    for i in 0..10 {
        let a_f: Vec<C64> = (0..rng.gen_range(1..=4)).map(|_| 2.0 * unit_disk(&mut rng)).collect();
        let a_g: Vec<C64> = (0..rng.gen_range(1..=4)).map(|_| 2.0 * unit_disk(&mut rng)).collect();
        let f = CatalogFn::ExpAffine {
            alpha: unit_disk(&mut rng),
            a: unit_disk(&mut rng),
            b: unit_disk(&mut rng),
        };
        let got = asym_compose(&finite(a_f.clone()), &f, &finite(a_g.clone())).map_err(|e| e.to_string())?;
        let mut brute = a_f.clone();
        for w in &a_g {
            let e = (f_affine_exp(&f, *w)).ok_or("unexpected factor")?;
            brute.push(e);
        }
        let brute = dedup_points(brute, ASYMPTOTIC_DEDUP);
        if !same_set(&got.values, &brute) {
            failures.push(format!("compose {i}"));
        }
    }
    // Iterated fold against direct expansion A ∪ f(A) ∪ f(f(A)) ∪ …
    let f = CatalogFn::Linear { a: C64::new(0.5, 0.25), b: ONE };
    let base = vec![ZERO, C64::new(0.0, 1.0), re(-2.0)];
    for n in 2..=3 {
        let got = asym_iterate(&finite(base.clone()), &f, n).map_err(|e| e.to_string())?;
        let mut direct = base.clone();
        let mut layer = base.clone();
        for _ in 0..n {
            layer = layer.iter().map(|w| C64::new(0.5, 0.25) * w + 1.0).collect();
            direct.extend(&layer);
        }
        if !same_set(&got.values, &dedup_points(direct, ASYMPTOTIC_DEDUP)) {
            failures.push(format!("fold n={n}"));
        }
    }
    check(failures.is_empty(), format!("10 random compositions, 2 folds, failures {failures:?}"))
}

/// `alpha + exp(a w + b)` evaluated without the catalog.
fn f_affine_exp(f: &CatalogFn, w: C64) -> Option<C64> {
    match f {
        CatalogFn::ExpAffine { alpha, a, b } => Some(alpha + (a * w + b).exp()),
        _ => None,
    }
}

fn growth_inequalities() -> Outcome {
    let em1 = CatalogFn::exp_minus_one();
    let e2m1 = CatalogFn::chain(vec![
        CatalogFn::Affine { a: -ONE },
        CatalogFn::ScaledExp { lambda: re(2.0) },
    ]);
    let composed = CatalogFn::chain(vec![em1.clone(), em1.clone()]);
    let pool = [em1.clone(), e2m1.clone(), composed];
    let instances = [
        (0, 0, 0.3, 1.0),
        (0, 1, 0.5, 2.0),
        (1, 0, 0.7, 1.0),
        (1, 1, 0.3, 2.0),
        (2, 0, 0.5, 1.0),
        (0, 2, 0.7, 2.0),
        (2, 1, 0.3, 1.0),
        (1, 2, 0.5, 1.0),
        (2, 2, 0.7, 1.0),
        (0, 0, 0.5, 2.0),
    ];
    let mut bad = Vec::new();
    for (i, &(fi, gi, rho, r)) in instances.iter().enumerate() {
        match growth_clunie(&pool[fi], &pool[gi], rho, r) {
            Ok(g) if g.ok => {}
            Ok(g) => bad.push(format!("{i}: {g:?}")),
            Err(e) => bad.push(format!("{i}: {e}")),
        }
    }
    let exp = CatalogFn::ScaledExp { lambda: ONE };
    let p = polya_ratio(&exp, &exp, &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    check(
        bad.is_empty() && p.increasing,
        format!("10 growth instances, failing {bad:?}; ratios {:?} increasing {}", p.ratios, p.increasing),
    )
}

/// Cubic-or-lower exponents `G`, excluding `-w^2`, for which `L = z` solves
/// the problem and the factorization is trivial.
fn candidate_gs() -> Vec<Vec<C64>> {
    let i = C64::new(0.0, 1.0);
    vec![
        vec![ZERO, -ONE],
        vec![ZERO, ONE],
        vec![ZERO, re(2.0)],
        vec![ZERO, i],
        vec![ZERO, ZERO, ONE],
        vec![ZERO, ONE, re(0.5)],
        vec![ZERO, -ONE, ZERO, re(0.3)],
        vec![ZERO, ZERO, ZERO, ONE],
        vec![ZERO, ZERO, ZERO, -ONE],
        vec![re(0.5), ONE + i, re(0.2)],
        vec![ZERO, re(0.5), ZERO, re(-0.25)],
        vec![ZERO, ZERO, re(-0.5), re(0.5)],
    ]
}

fn primeness_harness() -> Outcome {
    let budget = Budget {
        max_generation: 2,
        max_charts: 40,
        angles_per_chart: 64,
    };
    let mut failures = Vec::new();
    for g in candidate_gs() {
        let spec = IvpSpec::type1(vec![ZERO, ZERO, -ONE], g.clone());
        let root = solve_local(&spec, 64).map_err(|e| e.to_string())?;
        let atlas = build_atlas(&spec, &budget, &AtlasConfig::default()).map_err(|e| e.to_string())?;
        if root.radius().is_none() || atlas.singular.is_empty() {
            failures.push(format!("{g:?}"));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{} candidate G, all with finite radius and singular points; without witness {:?} \
             (numerical evidence, not a proof)",
            candidate_gs().len(),
            failures
        ),
    )
}

fn determinism() -> Outcome {
    let run = || -> Result<(String, String), String> {
        let atlas = build_atlas(&IvpSpec::benchmark(), &Budget::default(), &AtlasConfig::default())
            .map_err(|e| e.to_string())?;
        let ng = build_cs(12).map_err(|e| e.to_string())?;
        Ok((
            serde_json::to_string(&atlas.export()).map_err(|e| e.to_string())?,
            serde_json::to_string(&ng).map_err(|e| e.to_string())?,
        ))
    };
    let (a1, n1) = run()?;
    let (a2, n2) = run()?;
    check(
        a1 == a2 && n1 == n2,
        format!("atlas {} bytes, ng {} bytes, identical {}", a1.len(), n1.len(), a1 == a2 && n1 == n2),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("closed-form continuation benchmark", benchmark_continuation),
        ("bound soundness battery", bound_soundness),
        ("factorization identity suite", factorization_identities),
        ("local factorization on the disk", local_factorization),
        ("error-function asymptotic values", calabi_asymptotic_values),
        ("convergent exponential composition", ng_construction),
        ("right-factor division recursion", divide_recursion_instances),
        ("asymptotic set algebra", asymptotic_algebra),
        ("growth inequalities", growth_inequalities),
        ("primeness falsification harness", primeness_harness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{:.2?}]", i + 1, t.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{:.2?}]", i + 1, t.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
