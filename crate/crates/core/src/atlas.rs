//! Analytic continuation of IVP solutions across chains of maximal disks.
//!
//! A chart's boundary is scanned along rays. Each ray is walked by repeated
//! re-expansion of the ODE solution; the walk either reaches the boundary
//! point with room to spare (the point is regular and seeds a child chart) or
//! the local radius keeps shrinking, in which case the walk turns towards the
//! nearest singularity and follows it until the local radius collapses.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::CatalogError;
use crate::ivp::{local_coefficients, solve_local, DiskChart, InducedPair, IvpError, IvpSpec};
use crate::series::{radius_estimate, PowerSeries, SeriesError, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

pub const DEFAULT_LAMBDA: f64 = 1e8;
pub const CORROBORATION_TOL: f64 = 1e-4;
/// Radial sample positions as fractions of the chart radius.
pub const RADIAL_SAMPLES: [f64; 5] = [0.8, 0.9, 0.95, 0.975, 0.9875];
/// Sub-step length as a fraction of the local radius.
const STEP_FRACTION: f64 = 0.3;
/// Homing step as a fraction of the local radius.
const HOMING_FRACTION: f64 = 0.5;
/// Local radius, relative to the chart radius, at which a walk is stuck.
const STUCK: f64 = 1e-4;
/// Local radius, relative to the chart radius, at which homing stops.
const COLLAPSE: f64 = 1e-7;
const MAX_SUBSTEPS: usize = 400;
const MAX_HOMING: usize = 80;
const CAUCHY_RATIO: f64 = 0.8;
const OVERLAP_RECORD: f64 = 1e-8;
const OVERLAP_REJECT: f64 = 1e-6;
const LENS_POINTS: usize = 20;
const DEDUP_FRACTION: f64 = 0.7;
const DEDUP_AGREE: f64 = 1e-6;
const SINGULAR_MERGE: f64 = 1e-6;
/// Angular separation below which a regular and a singular classification on
/// the same chart contradict each other.
pub const CLOSURE_ANGLE: f64 = 1.0 / 256.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtlasError {
    #[error("chart {0} has no finite radius to scan")]
    EntireChart(usize),
    #[error("direction {theta} is not regular")]
    NotRegularDirection { theta: f64 },
    #[error("child disagrees with parent by {mismatch:e} on the overlap")]
    OverlapMismatch { mismatch: f64 },
    #[error("no chart with id {0}")]
    UnknownChart(usize),
    #[error("walk left the region where the solution could be continued")]
    WalkFailed,
    #[error(transparent)]
    Ivp(#[from] IvpError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    pub max_generation: usize,
    pub max_charts: usize,
    pub angles_per_chart: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_generation: 3,
            max_charts: 160,
            angles_per_chart: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtlasConfig {
    /// Order of chart expansions.
    pub order: usize,
    /// Order of the re-expansions used while walking.
    pub walk_order: usize,
    /// Blow-up threshold.
    pub lambda: f64,
}

impl Default for AtlasConfig {
    fn default() -> Self {
        Self {
            order: 64,
            walk_order: 32,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub location: C64,
    pub chart_id: usize,
    pub generation: usize,
    /// Largest `|L|` seen on the approach.
    pub blowup_mag: f64,
    /// `f` at the located point.
    pub singular_value: C64,
    /// `|g(L) - singular_value|` at the last approach sample.
    pub corroboration_residual: f64,
    /// The same quantity over the last approach samples, oldest first.
    pub corroboration_tail: Vec<f64>,
    /// Angle of the scan ray that led here.
    pub entry_angle: f64,
    /// Local radius at the last approach sample.
    pub final_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum BoundaryClass {
    Regular {
        a: C64,
        /// Local radius of convergence at the sample nearest the boundary.
        local_radius: Option<f64>,
    },
    Singular(SingularPoint),
    Inconclusive {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub angle: f64,
    pub overlap_mismatch: f64,
}

/// Classification angles recorded for one chart.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChartScan {
    pub chart_id: usize,
    pub regular: Vec<f64>,
    pub singular: Vec<f64>,
    pub inconclusive: Vec<f64>,
    /// Directions of singular points reached by probes between scan angles.
    pub probed: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetUsed {
    pub generations: usize,
    pub charts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atlas {
    pub spec: IvpSpec,
    pub config: AtlasConfig,
    pub charts: Vec<DiskChart>,
    pub edges: Vec<Edge>,
    pub singular: Vec<SingularPoint>,
    pub scans: Vec<ChartScan>,
    pub budget_used: BudgetUsed,
    pub budget_exhausted: bool,
    /// Children dropped because they disagreed with their parent.
    pub overlap_rejections: usize,
}

/// Re-expansion of the solution about one point of a walk, in the variable
/// `v = (z - z0) / scale`.
#[derive(Debug, Clone)]
struct Local {
    z: C64,
    w: C64,
    scale: f64,
    coeffs: Vec<C64>,
    rho: Option<f64>,
    /// Direction of the dominant nearby singularity.
    phase: f64,
}

impl Local {
    fn eval(&self, z: C64) -> C64 {
        let v = (z - self.z) / self.scale;
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * v + c)
    }
}

/// `-mean arg(c_{n+1} / c_n)` over the upper half of the coefficients: the
/// argument of the nearest singularity when one dominates.
fn dominant_phase(coeffs: &[C64]) -> f64 {
    let n = coeffs.len();
    let mut acc = ZERO;
    for k in n / 2..n - 1 {
        let r = coeffs[k + 1] * coeffs[k].conj();
        let m = r.norm();
        if m > 0.0 && m.is_finite() {
            acc += r / m;
        }
    }
    -acc.arg()
}

fn expand(spec: &IvpSpec, z: C64, w: C64, hint: f64, order: usize) -> Result<Local, AtlasError> {
    let mut s = if hint.is_finite() && hint > 0.0 { hint } else { 1.0 };
    let ceiling = 1e8 * s.max(1.0);
    let mut last: Option<Local> = None;
    for _ in 0..16 {
        let coeffs = match local_coefficients(spec, z, w, s, order) {
            Ok(c) => c,
            Err(IvpError::NonFinite) => {
                s *= 1e-2;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let est = radius_estimate(&PowerSeries::new(ZERO, coeffs.clone())?)?;
        let phase = dominant_phase(&coeffs);
        let mut local = Local {
            z,
            w,
            scale: s,
            coeffs,
            rho: None,
            phase,
        };
        match est.value {
            None => {
                if s >= ceiling {
                    return Ok(local);
                }
                last = Some(local);
                s *= 8.0;
            }
            Some(rv) => {
                local.rho = Some(rv * s);
                if (0.05..=20.0).contains(&rv) {
                    return Ok(local);
                }
                last = Some(local);
                s *= rv.clamp(1e-4, 1e4);
            }
        }
    }
    last.ok_or(AtlasError::WalkFailed)
}

/// State of a walk: the current expansion plus `g(L)` carried along the
/// image path when a corroborating `g` is supplied.
#[derive(Debug, Clone)]
struct Walker<'a> {
    spec: &'a IvpSpec,
    pair: Option<&'a InducedPair>,
    order: usize,
    local: Local,
    g: C64,
}

enum Leg {
    Reached,
    Stuck,
}

impl<'a> Walker<'a> {
    fn start(
        spec: &'a IvpSpec,
        pair: Option<&'a InducedPair>,
        order: usize,
        z: C64,
        w: C64,
        hint: f64,
        g: C64,
    ) -> Result<Self, AtlasError> {
        Ok(Self {
            spec,
            pair,
            order,
            local: expand(spec, z, w, hint, order)?,
            g,
        })
    }

    fn step_to(&mut self, z: C64) -> Result<(), AtlasError> {
        let w = self.local.eval(z);
        if !w.is_finite() {
            return Err(AtlasError::WalkFailed);
        }
        if let Some(pair) = self.pair {
            self.g += pair.g_increment(self.local.w, w)?;
        }
        let hint = self.local.rho.unwrap_or(4.0 * self.local.scale);
        self.local = expand(self.spec, z, w, hint, self.order)?;
        Ok(())
    }

    /// Walks the straight segment to `target`, stopping early when the local
    /// radius drops below `stuck`.
    fn walk_to(&mut self, target: C64, stuck: f64) -> Result<Leg, AtlasError> {
        for _ in 0..MAX_SUBSTEPS {
            let d = target - self.local.z;
            let dist = d.norm();
            if dist == 0.0 {
                return Ok(Leg::Reached);
            }
            let reach = match self.local.rho {
                Some(r) => {
                    if r < stuck {
                        return Ok(Leg::Stuck);
                    }
                    STEP_FRACTION * r
                }
                None => 4.0 * self.local.scale,
            };
            if dist <= reach {
                self.step_to(target)?;
                return Ok(Leg::Reached);
            }
            self.step_to(self.local.z + d * (reach / dist))?;
        }
        Ok(Leg::Stuck)
    }
}

struct ApproachSample {
    w: C64,
    g: C64,
}

/// Follows the dominant singularity from the walker's position.
fn home(
    walker: &mut Walker<'_>,
    chart_radius: f64,
    chart_id: usize,
    generation: usize,
    theta: f64,
    lambda: f64,
) -> Result<BoundaryClass, AtlasError> {
    let pair = walker.pair.expect("homing needs the induced pair");
    let mut samples = vec![ApproachSample {
        w: walker.local.w,
        g: walker.g,
    }];
    let mut collapsed = false;
    for _ in 0..MAX_HOMING {
        let Some(rho) = walker.local.rho else {
            break;
        };
        if rho < COLLAPSE * chart_radius {
            collapsed = true;
            break;
        }
        let next = walker.local.z + C64::from_polar(HOMING_FRACTION * rho, walker.local.phase);
        walker.step_to(next)?;
        samples.push(ApproachSample {
            w: walker.local.w,
            g: walker.g,
        });
    }
    if !collapsed {
        return Ok(BoundaryClass::Inconclusive {
            reason: "local radius did not collapse".into(),
        });
    }
    let rho = walker.local.rho.unwrap_or(0.0);
    let location = walker.local.z + C64::from_polar(rho, walker.local.phase);
    let singular_value = pair.f.eval(location)?;
    let n = samples.len();
    if n < 4 {
        return Ok(BoundaryClass::Inconclusive {
            reason: "approach too short".into(),
        });
    }
    let tail = &samples[n - 4..];
    let mags: Vec<f64> = tail.iter().map(|s| s.w.norm()).collect();
    let growing = mags.windows(2).all(|p| p[1] > p[0]);
    let d1 = (tail[3].w - tail[2].w).norm();
    let d0 = (tail[2].w - tail[1].w).norm();
    let blowup_mag = samples.iter().map(|s| s.w.norm()).fold(0.0, f64::max);
    let not_converging = d1 >= CAUCHY_RATIO * d0 || blowup_mag > lambda;
    let corroboration_tail: Vec<f64> = tail.iter().map(|s| (s.g - singular_value).norm()).collect();
    let corroborated = corroboration_tail.windows(2).all(|p| p[1] < p[0])
        && corroboration_tail[3] < CORROBORATION_TOL;
    if !(growing && not_converging) {
        return Ok(BoundaryClass::Inconclusive {
            reason: "local radius collapsed without blow-up".into(),
        });
    }
    if !corroborated {
        return Ok(BoundaryClass::Inconclusive {
            reason: "blow-up without g(L) -> f corroboration".into(),
        });
    }
    Ok(BoundaryClass::Singular(SingularPoint {
        location,
        chart_id,
        generation,
        blowup_mag,
        singular_value,
        corroboration_residual: corroboration_tail[3],
        corroboration_tail,
        entry_angle: theta,
        final_radius: rho,
    }))
}

/// `f = g∘L` anchored at the chart's seed.
pub fn chart_pair(chart: &DiskChart) -> Result<InducedPair, AtlasError> {
    Ok(chart.spec.induced_pair()?)
}

/// Classifies the boundary point of `chart` in direction `theta`.
pub fn classify_boundary(
    chart: &DiskChart,
    theta: f64,
    cfg: &AtlasConfig,
) -> Result<BoundaryClass, AtlasError> {
    let pair = chart_pair(chart)?;
    classify_with(chart, &pair, theta, cfg)
}

fn classify_with(
    chart: &DiskChart,
    pair: &InducedPair,
    theta: f64,
    cfg: &AtlasConfig,
) -> Result<BoundaryClass, AtlasError> {
    let radius = chart.radius().ok_or(AtlasError::EntireChart(chart.id))?;
    let alpha = chart.center();
    let dir = C64::from_polar(1.0, theta);
    let mut walker = Walker::start(
        &chart.spec,
        Some(pair),
        cfg.walk_order,
        alpha,
        chart.spec.a0,
        radius,
        pair.g_anchor,
    )?;
    let stuck = STUCK * radius;
    let mut values = Vec::with_capacity(RADIAL_SAMPLES.len());
    for t in RADIAL_SAMPLES {
        match walker.walk_to(alpha + dir * (t * radius), stuck)? {
            Leg::Reached => values.push(walker.local.w),
            Leg::Stuck => {
                return home(&mut walker, radius, chart.id, chart.generation, theta, cfg.lambda)
            }
        }
    }
    let boundary = alpha + dir * radius;
    let remaining = (boundary - walker.local.z).norm();
    let reaches = walker.local.rho.map_or(true, |r| remaining <= 0.5 * r);
    let n = values.len();
    let d1 = (values[n - 1] - values[n - 2]).norm();
    let d0 = (values[n - 2] - values[n - 3]).norm();
    let cauchy = d1 < CAUCHY_RATIO * d0 || d1 == 0.0;
    if reaches && cauchy {
        return Ok(BoundaryClass::Regular {
            a: walker.local.eval(boundary),
            local_radius: walker.local.rho,
        });
    }
    home(&mut walker, radius, chart.id, chart.generation, theta, cfg.lambda)
}

/// Walks to the boundary point at `theta` and then follows the nearest
/// singularity from there. Used to pin down singular points lying between
/// scan rays.
fn probe_from_boundary(
    chart: &DiskChart,
    pair: &InducedPair,
    theta: f64,
    cfg: &AtlasConfig,
) -> Result<BoundaryClass, AtlasError> {
    let radius = chart.radius().ok_or(AtlasError::EntireChart(chart.id))?;
    let alpha = chart.center();
    let mut walker = Walker::start(
        &chart.spec,
        Some(pair),
        cfg.walk_order,
        alpha,
        chart.spec.a0,
        radius,
        pair.g_anchor,
    )?;
    let boundary = alpha + C64::from_polar(radius, theta);
    walker.walk_to(boundary, STUCK * radius)?;
    home(&mut walker, radius, chart.id, chart.generation, theta, cfg.lambda)
}

/// Value of the chart's branch at `z`, reached along the ray from its center.
pub fn chart_value(chart: &DiskChart, z: C64, cfg: &AtlasConfig) -> Result<C64, AtlasError> {
    let alpha = chart.center();
    let d = (z - alpha).norm();
    match chart.radius() {
        Some(r) if d > 0.5 * r => {
            let mut walker = Walker::start(
                &chart.spec,
                None,
                cfg.walk_order,
                alpha,
                chart.spec.a0,
                r,
                ZERO,
            )?;
            match walker.walk_to(z, 0.0)? {
                Leg::Reached => Ok(walker.local.w),
                Leg::Stuck => Err(AtlasError::WalkFailed),
            }
        }
        _ => Ok(chart.l.eval(z)),
    }
}

/// Points in the lens shared by a parent and a child seeded on its boundary.
fn lens_points(parent: &DiskChart, child: &DiskChart) -> Vec<C64> {
    let rp = parent.radius().unwrap_or(1.0);
    let r = child.radius().map_or(rp, |rc| rc.min(rp));
    let base = child.center();
    let inward = (parent.center() - base).arg();
    (0..LENS_POINTS)
        .map(|i| {
            let rho = r * (0.1 + 0.3 * (i % 5) as f64 / 4.0);
            let phi = -PI / 4.0 + (PI / 2.0) * (i / 5) as f64 / 3.0;
            base + C64::from_polar(rho, inward + phi)
        })
        .collect()
}

/// Largest disagreement between parent and child on their lens.
pub fn overlap_mismatch(
    parent: &DiskChart,
    child: &DiskChart,
    cfg: &AtlasConfig,
) -> Result<f64, AtlasError> {
    let mut worst: f64 = 0.0;
    for z in lens_points(parent, child) {
        let a = chart_value(parent, z, cfg)?;
        let b = chart_value(child, z, cfg)?;
        worst = worst.max((a - b).norm());
    }
    Ok(worst)
}

impl Atlas {
    /// Atlas holding only the root chart.
    pub fn new(spec: &IvpSpec, cfg: AtlasConfig) -> Result<Self, AtlasError> {
        let root = solve_local(spec, cfg.order)?;
        Ok(Self {
            spec: spec.clone(),
            config: cfg,
            charts: vec![root],
            edges: Vec::new(),
            singular: Vec::new(),
            scans: Vec::new(),
            budget_used: BudgetUsed {
                generations: 0,
                charts: 1,
            },
            budget_exhausted: false,
            overlap_rejections: 0,
        })
    }

    pub fn chart(&self, id: usize) -> Result<&DiskChart, AtlasError> {
        self.charts.get(id).ok_or(AtlasError::UnknownChart(id))
    }

    /// Edges whose recorded overlap disagreement exceeds `1e-8`.
    pub fn overlap_violations(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| e.overlap_mismatch > OVERLAP_RECORD)
            .count()
    }

    pub fn root(&self) -> &DiskChart {
        &self.charts[0]
    }

    fn make_child(
        &self,
        parent: &DiskChart,
        theta: f64,
        a: C64,
    ) -> Result<DiskChart, AtlasError> {
        let r = parent.radius().ok_or(AtlasError::EntireChart(parent.id))?;
        let alpha = parent.center() + C64::from_polar(r, theta);
        let mut child = solve_local(&parent.spec.reseeded(alpha, a), self.config.order)?;
        child.id = self.charts.len();
        child.generation = parent.generation + 1;
        child.parent = Some(parent.id);
        child.entry_angle = Some(theta);
        Ok(child)
    }

    fn attach(&mut self, child: DiskChart, mismatch: f64) -> usize {
        let id = child.id;
        self.edges.push(Edge {
            parent: child.parent.expect("child has a parent"),
            child: id,
            angle: child.entry_angle.unwrap_or(0.0),
            overlap_mismatch: mismatch,
        });
        self.budget_used.generations = self.budget_used.generations.max(child.generation);
        self.charts.push(child);
        self.budget_used.charts = self.charts.len();
        id
    }

    /// Seeds a child chart at the regular boundary point of `chart_id` in
    /// direction `theta` and links it.
    pub fn continue_through(&mut self, chart_id: usize, theta: f64) -> Result<usize, AtlasError> {
        let parent = self.chart(chart_id)?.clone();
        let a = match classify_boundary(&parent, theta, &self.config)? {
            BoundaryClass::Regular { a, .. } => a,
            _ => return Err(AtlasError::NotRegularDirection { theta }),
        };
        let child = self.make_child(&parent, theta, a)?;
        let mismatch = overlap_mismatch(&parent, &child, &self.config)?;
        if mismatch > OVERLAP_REJECT {
            return Err(AtlasError::OverlapMismatch { mismatch });
        }
        Ok(self.attach(child, mismatch))
    }

    /// Whether a candidate child duplicates an existing chart on the same sheet.
    fn duplicates_existing(&self, child: &DiskChart) -> Result<bool, AtlasError> {
        let z = child.center();
        for other in &self.charts {
            let Some(r) = other.radius() else { continue };
            if (z - other.center()).norm() >= DEDUP_FRACTION * r {
                continue;
            }
            let mid = 0.5 * (z + other.center());
            let theirs = chart_value(other, mid, &self.config)?;
            let ours = match chart_value(child, mid, &self.config) {
                Ok(v) => v,
                Err(AtlasError::WalkFailed) => continue,
                Err(e) => return Err(e),
            };
            if (theirs - ours).norm() < DEDUP_AGREE {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn record_singular(&mut self, p: SingularPoint) {
        let dup = self.singular.iter().any(|q| {
            (q.location - p.location).norm() < SINGULAR_MERGE
                && (q.singular_value - p.singular_value).norm() < SINGULAR_MERGE
        });
        if !dup {
            self.singular.push(p);
        }
    }
}

/// Scan results for one chart, in angle order.
struct ChartOutcome {
    chart_id: usize,
    equispaced: Vec<(f64, BoundaryClass)>,
    probes: Vec<(f64, BoundaryClass)>,
}

fn scan_chart(chart: &DiskChart, angles: usize, cfg: &AtlasConfig) -> Result<ChartOutcome, AtlasError> {
    let pair = chart_pair(chart)?;
    let thetas: Vec<f64> = (0..angles).map(|k| TAU * k as f64 / angles as f64).collect();
    let equispaced: Vec<(f64, BoundaryClass)> = thetas
        .par_iter()
        .map(|&t| {
            let class = classify_with(chart, &pair, t, cfg).unwrap_or_else(|e| {
                BoundaryClass::Inconclusive {
                    reason: e.to_string(),
                }
            });
            (t, class)
        })
        .collect();

    // Singular points between scan rays show up as local minima of the
    // boundary radius; follow them from the boundary.
    let radius = chart.radius().unwrap_or(f64::INFINITY);
    let local = |i: usize| match &equispaced[i].1 {
        BoundaryClass::Regular {
            local_radius: Some(r),
            ..
        } => Some(*r),
        _ => None,
    };
    let n = equispaced.len();
    let mut seeds = Vec::new();
    for i in 0..n {
        let Some(r) = local(i) else { continue };
        if r >= 0.5 * radius {
            continue;
        }
        let prev = local((i + n - 1) % n).unwrap_or(f64::INFINITY);
        let next = local((i + 1) % n).unwrap_or(f64::INFINITY);
        if r <= prev && r < next {
            seeds.push(equispaced[i].0);
        }
    }
    let probes: Vec<(f64, BoundaryClass)> = seeds
        .par_iter()
        .map(|&t| {
            let class = probe_from_boundary(chart, &pair, t, cfg).unwrap_or_else(|e| {
                BoundaryClass::Inconclusive {
                    reason: e.to_string(),
                }
            });
            (t, class)
        })
        .collect();
    Ok(ChartOutcome {
        chart_id: chart.id,
        equispaced,
        probes,
    })
}

/// Breadth-first continuation from the root chart of `spec`.
pub fn build_atlas(spec: &IvpSpec, budget: &Budget, cfg: &AtlasConfig) -> Result<Atlas, AtlasError> {
    let mut atlas = Atlas::new(spec, *cfg)?;
    if atlas.root().radius().is_none() {
        return Ok(atlas);
    }
    if budget.max_charts <= 1 {
        atlas.budget_exhausted = true;
    }
    let mut frontier = vec![0usize];
    for generation in 0..=budget.max_generation {
        if frontier.is_empty() {
            break;
        }
        let charts: Vec<DiskChart> = frontier.iter().map(|&i| atlas.charts[i].clone()).collect();
        let outcomes: Vec<ChartOutcome> = charts
            .par_iter()
            .map(|c| scan_chart(c, budget.angles_per_chart.max(1), cfg))
            .collect::<Result<_, _>>()?;

        let mut next = Vec::new();
        for outcome in outcomes {
            let mut scan = ChartScan {
                chart_id: outcome.chart_id,
                ..ChartScan::default()
            };
            let parent = atlas.charts[outcome.chart_id].clone();
            let parent_center = parent.center();
            for (theta, class) in outcome.equispaced {
                match class {
                    BoundaryClass::Regular { a, .. } => {
                        scan.regular.push(theta);
                        if generation >= budget.max_generation {
                            continue;
                        }
                        if atlas.charts.len() >= budget.max_charts {
                            atlas.budget_exhausted = true;
                            continue;
                        }
                        let Ok(child) = atlas.make_child(&parent, theta, a) else {
                            continue;
                        };
                        if child.radius().is_some_and(|r| !(r > 0.0)) {
                            continue;
                        }
                        // A failed comparison walk leaves the child unverified.
                        if atlas.duplicates_existing(&child).unwrap_or(true) {
                            continue;
                        }
                        let mismatch = overlap_mismatch(&parent, &child, cfg).unwrap_or(f64::INFINITY);
                        if mismatch > OVERLAP_REJECT {
                            atlas.overlap_rejections += 1;
                            continue;
                        }
                        next.push(atlas.attach(child, mismatch));
                    }
                    BoundaryClass::Singular(p) => {
                        scan.singular.push(theta);
                        atlas.record_singular(p);
                    }
                    BoundaryClass::Inconclusive { .. } => scan.inconclusive.push(theta),
                }
            }
            for (_, class) in outcome.probes {
                if let BoundaryClass::Singular(p) = class {
                    scan.probed
                        .push((p.location - parent_center).arg().rem_euclid(TAU));
                    atlas.record_singular(p);
                }
            }
            atlas.scans.push(scan);
        }
        frontier = next;
    }
    Ok(atlas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// `g`'s asymptotic values could not be completed.
    SkippedGIncomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm2Report {
    pub b_check: CheckStatus,
    pub c_check: CheckStatus,
    pub closure_check: CheckStatus,
    /// No singular point found although the root has a finite radius.
    pub empty_singular_set: bool,
    pub asymptotic_values_g: Option<Vec<C64>>,
    pub issues: Vec<String>,
}

impl Thm2Report {
    pub fn passed(&self) -> bool {
        self.b_check == CheckStatus::Pass
            && self.c_check != CheckStatus::Fail
            && self.closure_check == CheckStatus::Pass
            && !self.empty_singular_set
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Checks the boundary structure of an atlas: singular points carry both
/// limits, their values are asymptotic values of `g`, and no regular
/// direction sits next to a singular one.
pub fn verify_thm2(atlas: &Atlas) -> Result<Thm2Report, AtlasError> {
    let mut issues = Vec::new();

    let mut b_ok = true;
    for p in &atlas.singular {
        let t = &p.corroboration_tail;
        let decreasing = t.windows(2).all(|w| w[1] < w[0]);
        let small = t.last().is_some_and(|&x| x < CORROBORATION_TOL);
        if !(decreasing && small) {
            b_ok = false;
            issues.push(format!("corroboration fails at {}", p.location));
        }
    }

    let pair = atlas.spec.induced_pair()?;
    let (c_check, asym) = match pair.g_catalog()? {
        Some(g) => {
            let set = g.asymptotic_values()?;
            if !set.complete {
                (CheckStatus::SkippedGIncomplete, None)
            } else {
                let mut ok = true;
                for p in &atlas.singular {
                    if !set.contains(p.singular_value, CORROBORATION_TOL) {
                        ok = false;
                        issues.push(format!(
                            "singular value {} is not an asymptotic value of g",
                            p.singular_value
                        ));
                    }
                }
                let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
                (status, Some(set.values))
            }
        }
        None => (CheckStatus::SkippedGIncomplete, None),
    };

    let mut closure_ok = true;
    for scan in &atlas.scans {
        for &s in &scan.singular {
            if let Some(&r) = scan
                .regular
                .iter()
                .find(|&&r| angular_distance(r, s) < CLOSURE_ANGLE)
            {
                closure_ok = false;
                issues.push(format!(
                    "chart {}: regular angle {r} next to singular angle {s}",
                    scan.chart_id
                ));
            }
        }
    }

    let empty = atlas.singular.is_empty() && atlas.root().radius().is_some();
    if empty {
        issues.push("finite root radius but no singular point found".into());
    }
    let status = |ok: bool| if ok { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok(Thm2Report {
        b_check: status(b_ok),
        c_check,
        closure_check: status(closure_ok),
        empty_singular_set: empty,
        asymptotic_values_g: asym,
        issues,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartExport {
    pub id: usize,
    pub center: C64,
    pub radius: Option<f64>,
    pub generation: usize,
    pub parent: Option<usize>,
    pub entry_angle: Option<f64>,
    pub coefficients: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasExport {
    pub schema: String,
    pub spec: IvpSpec,
    pub charts: Vec<ChartExport>,
    pub edges: Vec<Edge>,
    pub singular: Vec<SingularPoint>,
    pub budget_used: BudgetUsed,
    pub budget_exhausted: bool,
}

pub const ATLAS_SCHEMA: &str = "atlas-v1";
const EXPORT_COEFFS: usize = 16;

impl Atlas {
    pub fn export(&self) -> AtlasExport {
        AtlasExport {
            schema: ATLAS_SCHEMA.into(),
            spec: self.spec.clone(),
            charts: self
                .charts
                .iter()
                .map(|c| ChartExport {
                    id: c.id,
                    center: c.center(),
                    radius: c.radius(),
                    generation: c.generation,
                    parent: c.parent,
                    entry_angle: c.entry_angle,
                    coefficients: c.l.coeffs().iter().take(EXPORT_COEFFS).copied().collect(),
                })
                .collect(),
            edges: self.edges.clone(),
            singular: self.singular.clone(),
            budget_used: self.budget_used,
            budget_exhausted: self.budget_exhausted,
        }
    }
}
