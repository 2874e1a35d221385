//! Orbits, cycles, super-attracting and exceptional sets, and continuation
//! of inverse branches along paths.

use crate::error::{Error, Result};
use crate::polysolve::preimages;
use crate::ratmap::{CriticalData, RationalMap, MAX_PERIOD, PERIODIC_TOLERANCE};
use crate::sphere::{Chart, SpherePoint};
use num_complex::Complex64;
use std::fmt;

type C = Complex64;

/// |λ| below this is super-attracting.
pub const SUPERATTRACTING_TOLERANCE: f64 = 1e-8;
/// Width of the indifferent band ||λ| - 1| <= this.
pub const INDIFFERENT_TOLERANCE: f64 = 1e-8;
/// Largest root-of-unity order tested for parabolic multipliers.
pub const PARABOLIC_MAX_ORDER: u32 = 64;
/// Tolerance on |λ^q - 1| for parabolic multipliers.
pub const PARABOLIC_TOLERANCE: f64 = 1e-6;
/// Iterations applied to each critical point before looking for its cycle.
pub const CRITICAL_ORBIT_STEPS: usize = 2000;
/// Boundary samples per cycle point when validating the radius δ.
pub const DELTA_BOUNDARY_SAMPLES: usize = 720;
/// Iterates checked in the empirical contraction inequality.
pub const DELTA_CONTRACTION_STEPS: usize = 10;
/// log C allowed in the empirical contraction inequality.
pub const DELTA_LOG_C: f64 = 1.0;
/// Distances to the cycle below this are not resolved by binary64 orbits.
pub const DELTA_RESOLUTION: f64 = 1e-14;
/// Bisection depth when a continuation step fails.
pub const CONTINUATION_BISECTIONS: usize = 10;
/// Largest allowed spacing between consecutive path points.
pub const PATH_SPACING: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CycleClass {
    SuperAttracting,
    Attracting,
    Parabolic,
    IrrationallyIndifferent,
    Repelling,
}

impl fmt::Display for CycleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CycleClass::SuperAttracting => "super-attracting",
            CycleClass::Attracting => "attracting",
            CycleClass::Parabolic => "parabolic",
            CycleClass::IrrationallyIndifferent => "irrationally-indifferent",
            CycleClass::Repelling => "repelling",
        };
        f.write_str(s)
    }
}

pub fn classify_multiplier(lambda: C) -> CycleClass {
    let r = lambda.norm();
    if r < SUPERATTRACTING_TOLERANCE {
        CycleClass::SuperAttracting
    } else if r < 1.0 - INDIFFERENT_TOLERANCE {
        CycleClass::Attracting
    } else if (r - 1.0).abs() <= INDIFFERENT_TOLERANCE {
        let u = lambda / r;
        let mut p = u;
        for _ in 1..=PARABOLIC_MAX_ORDER {
            if (p - 1.0).norm() <= PARABOLIC_TOLERANCE {
                return CycleClass::Parabolic;
            }
            p *= u;
        }
        CycleClass::IrrationallyIndifferent
    } else {
        CycleClass::Repelling
    }
}

#[derive(Debug, Clone)]
pub struct CycleInfo {
    pub points: Vec<SpherePoint>,
    pub multiplier: C,
    pub class: CycleClass,
}

impl CycleInfo {
    pub fn period(&self) -> usize {
        self.points.len()
    }

    pub fn contains(&self, x: &SpherePoint, tol: f64) -> bool {
        self.points.iter().any(|p| p.distance(x) < tol)
    }
}

/// `f^n(x)` together with the derivative of its `out` coordinate with
/// respect to the coordinate of `x` in chart `input`.
pub fn iterate_chart_derivative(
    f: &RationalMap,
    x: &SpherePoint,
    n: usize,
    input: Chart,
    out: Chart,
) -> (SpherePoint, C) {
    let mut y = *x;
    let mut chart = input;
    let mut deriv = C::new(1.0, 0.0);
    for k in 0..n {
        let next = f.apply(&y);
        let next_chart = if k + 1 == n { out } else { next.chart() };
        deriv *= f.chart_derivative(&y, chart, next_chart);
        chart = next_chart;
        y = next;
    }
    (y, deriv)
}

fn refine_periodic(f: &RationalMap, x: &SpherePoint, m: usize) -> SpherePoint {
    let chart = x.chart();
    let mut t = x.coord(chart);
    let mut best = f.iterate(x, m).distance(x);
    for _ in 0..50 {
        if best < 1e-15 {
            break;
        }
        let z = SpherePoint::from_coord(chart, t);
        let (y, d) = iterate_chart_derivative(f, &z, m, chart, chart);
        let g = y.coord(chart) - t;
        let denom = d - 1.0;
        if !(denom.norm() > 1e-12) {
            break;
        }
        let cand = t - g / denom;
        let cz = SpherePoint::from_coord(chart, cand);
        let res = f.iterate(&cz, m).distance(&cz);
        if !(res < best) {
            break;
        }
        t = cand;
        best = res;
    }
    SpherePoint::from_coord(chart, t)
}

/// Cycle through `x` of period at most `max_period`, refined by Newton.
pub fn detect_cycle(f: &RationalMap, x: &SpherePoint, max_period: usize) -> Option<CycleInfo> {
    let m = f.return_time(x, max_period.min(MAX_PERIOD), PERIODIC_TOLERANCE)?;
    let y0 = refine_periodic(f, x, m);
    let mut points = Vec::with_capacity(m);
    let mut y = y0;
    for _ in 0..m {
        points.push(y);
        y = f.apply(&y);
    }
    let chart = y0.chart();
    let (_, multiplier) = iterate_chart_derivative(f, &y0, m, chart, chart);
    Some(CycleInfo {
        points,
        multiplier,
        class: classify_multiplier(multiplier),
    })
}

/// Super-attracting cycles with a validated invariant radius and the
/// contraction exponent `l`.
#[derive(Debug, Clone)]
pub struct SuperAttractingSet {
    pub cycles: Vec<CycleInfo>,
    /// Local degree of `f^m` at each cycle.
    pub local_degrees: Vec<u32>,
    /// Radius of the validated neighbourhood; 0 when there are no cycles.
    pub delta: f64,
    /// `min (local degree)^{1/m}`; infinite when there are no cycles.
    pub l: f64,
}

impl SuperAttractingSet {
    pub fn points(&self) -> impl Iterator<Item = &SpherePoint> {
        self.cycles.iter().flat_map(|c| c.points.iter())
    }

    /// Chordal distance to the nearest super-attracting periodic point;
    /// infinite when there is none.
    pub fn distance_to(&self, a: &SpherePoint) -> f64 {
        self.points().map(|p| p.distance(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }
}

fn delta_is_valid(f: &RationalMap, set: &SuperAttractingSet, delta: f64) -> bool {
    let all: Vec<SpherePoint> = set.points().copied().collect();
    let dist = |x: &SpherePoint| all.iter().map(|p| p.distance(x)).fold(f64::INFINITY, f64::min);
    for (cycle, &deg) in set.cycles.iter().zip(&set.local_degrees) {
        let m = cycle.period();
        // each cycle is checked against its own exponent deg^{1/m}
        let l = (deg as f64).powf(1.0 / m as f64);
        for y in &cycle.points {
            for k in 0..DELTA_BOUNDARY_SAMPLES {
                let th = 2.0 * std::f64::consts::PI * k as f64 / DELTA_BOUNDARY_SAMPLES as f64;
                let s = y.offset(delta, th);
                // f^m maps the ball around y into itself
                if !(f.iterate(&s, m).distance(y) < delta) {
                    return false;
                }
            }
            for j in 0..3 {
                let rho = delta * 0.5f64.powi(j);
                for k in 0..16 {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                    let mut z = y.offset(rho, th);
                    for n in 1..=DELTA_CONTRACTION_STEPS {
                        z = f.apply(&z);
                        if n % m != 0 {
                            continue;
                        }
                        let dn = dist(&z);
                        // below this the orbit is snapped onto the cycle by rounding
                        if dn < DELTA_RESOLUTION {
                            break;
                        }
                        let rhs = DELTA_LOG_C + l.powi(-(n as i32)) * dn.ln();
                        if rho.ln() > rhs {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

fn push_unique(cycles: &mut Vec<CycleInfo>, c: CycleInfo) {
    if !cycles.iter().any(|o| o.contains(&c.points[0], 1e-8)) {
        cycles.push(c);
    }
}

/// Super-attracting cycles found from critical orbits.
pub fn super_attracting_set(f: &RationalMap) -> Result<SuperAttractingSet> {
    let crit = f.critical_points()?;
    Ok(super_attracting_set_with(f, &crit))
}

pub fn super_attracting_set_with(f: &RationalMap, crit: &CriticalData) -> SuperAttractingSet {
    let mut cycles = Vec::new();
    for (c, _) in &crit.all {
        let tail = f.iterate(c, CRITICAL_ORBIT_STEPS);
        if let Some(cy) = detect_cycle(f, &tail, MAX_PERIOD) {
            if cy.class == CycleClass::SuperAttracting {
                push_unique(&mut cycles, cy);
            }
        }
    }
    let local_degrees: Vec<u32> = cycles
        .iter()
        .map(|cy| cy.points.iter().map(|p| f.local_degree(p, crit)).product())
        .collect();
    let l = cycles
        .iter()
        .zip(&local_degrees)
        .map(|(cy, &deg)| (deg as f64).powf(1.0 / cy.period() as f64))
        .fold(f64::INFINITY, f64::min);
    let mut set = SuperAttractingSet {
        cycles,
        local_degrees,
        delta: 0.0,
        l,
    };
    if !set.cycles.is_empty() {
        set.delta = (1..=40)
            .map(|k| 0.5f64.powi(k))
            .find(|&d| delta_is_valid(f, &set, d))
            .unwrap_or(0.0);
    }
    set
}

/// Points with finite backward orbit (at most two).
#[derive(Debug, Clone, Default)]
pub struct ExceptionalSet {
    pub points: Vec<SpherePoint>,
}

impl ExceptionalSet {
    pub fn contains(&self, x: &SpherePoint) -> bool {
        self.points.iter().any(|p| p.distance(x) < PERIODIC_TOLERANCE)
    }
}

/// Exceptional points: totally ramified points whose preimage is a single
/// point that is itself exceptional (fixed points and 2-cycles).
pub fn exceptional_set(f: &RationalMap) -> Result<ExceptionalSet> {
    let crit = f.critical_points()?;
    let d = f.degree() as u32;
    let candidates: Vec<SpherePoint> = crit
        .all
        .iter()
        .filter(|(_, m)| *m == d - 1)
        .map(|(c, _)| *c)
        .collect();
    let unique_preimage = |w: &SpherePoint| -> Result<Option<SpherePoint>> {
        let set = preimages(f, w)?;
        Ok(match set.roots.as_slice() {
            [(p, m)] if *m == d => Some(*p),
            _ => None,
        })
    };
    let mut points = Vec::new();
    for c in &candidates {
        let Some(p1) = unique_preimage(c)? else { continue };
        if p1.distance(c) < PERIODIC_TOLERANCE {
            points.push(*c);
            continue;
        }
        if let Some(p2) = unique_preimage(&p1)? {
            if p2.distance(c) < PERIODIC_TOLERANCE {
                points.push(*c);
            }
        }
    }
    assert!(points.len() <= 2, "more than two exceptional points");
    points.sort_by(|a, b| a.canonical_cmp(b));
    Ok(ExceptionalSet { points })
}

#[derive(Debug, Clone)]
pub struct PostcriticalReport {
    pub geometrically_finite_evidence: bool,
    pub postcritical_sample: Vec<SpherePoint>,
}

/// Heuristic evidence that every critical orbit is finite or converges to a
/// detected attracting cycle.
pub fn postcritical_classify(f: &RationalMap, depth: usize) -> Result<PostcriticalReport> {
    if depth > 10_000 {
        return Err(Error::InvalidArgument(format!("depth {depth} > 10000")));
    }
    let crit = f.critical_points()?;
    let mut sample = Vec::new();
    let mut evidence = true;
    for (c, _) in &crit.all {
        let mut y = f.apply(c);
        let mut orbit_ok = false;
        for k in 0..depth.max(CRITICAL_ORBIT_STEPS) {
            if k < depth {
                sample.push(y);
            }
            if !orbit_ok && k < 200 && f.return_time(&y, MAX_PERIOD, PERIODIC_TOLERANCE).is_some() {
                orbit_ok = true;
                if k >= depth {
                    break;
                }
            }
            y = f.apply(&y);
        }
        if !orbit_ok {
            orbit_ok = matches!(
                detect_cycle(f, &y, MAX_PERIOD).map(|cy| cy.class),
                Some(CycleClass::SuperAttracting | CycleClass::Attracting)
            );
        }
        evidence &= orbit_ok;
    }
    Ok(PostcriticalReport {
        geometrically_finite_evidence: evidence,
        postcritical_sample: sample,
    })
}

/// Classification of a base point with respect to the rate theorems.
#[derive(Debug, Clone, PartialEq)]
pub enum PointKind {
    Exceptional,
    Periodic(CycleClass, usize),
    /// Strictly preperiodic onto a cycle of the given class.
    Preperiodic(CycleClass),
    Other,
}

pub fn classify_point(f: &RationalMap, a: &SpherePoint) -> Result<PointKind> {
    if exceptional_set(f)?.contains(a) {
        return Ok(PointKind::Exceptional);
    }
    if let Some(cy) = detect_cycle(f, a, MAX_PERIOD) {
        return Ok(PointKind::Periodic(cy.class, cy.period()));
    }
    let mut y = *a;
    for _ in 0..MAX_PERIOD {
        y = f.apply(&y);
        if let Some(cy) = detect_cycle(f, &y, MAX_PERIOD) {
            return Ok(PointKind::Preperiodic(cy.class));
        }
    }
    Ok(PointKind::Other)
}

fn geodesic_midpoint(a: &SpherePoint, b: &SpherePoint) -> SpherePoint {
    let (u, v) = (a.to_r3(), b.to_r3());
    SpherePoint::from_r3([u[0] + v[0], u[1] + v[1], u[2] + v[2]].map(|x| x * 0.5))
}

fn newton_lift(f: &RationalMap, n: usize, seed: &SpherePoint, w: &SpherePoint) -> SpherePoint {
    let input = seed.chart();
    let out = w.chart();
    let target = w.coord(out);
    let mut t = seed.coord(input);
    for _ in 0..40 {
        let z = SpherePoint::from_coord(input, t);
        let (y, d) = iterate_chart_derivative(f, &z, n, input, out);
        if y.distance(w) < 1e-15 || d.norm() == 0.0 {
            break;
        }
        let step = (y.coord(out) - target) / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        t -= step;
        if step.norm() < 1e-16 * t.norm().max(1.0) {
            break;
        }
    }
    SpherePoint::from_coord(input, t)
}

fn lift_step(
    f: &RationalMap,
    n: usize,
    prev: &SpherePoint,
    w_prev: &SpherePoint,
    w: &SpherePoint,
    level: usize,
) -> std::result::Result<SpherePoint, String> {
    let try_direct = || -> std::result::Result<SpherePoint, String> {
        let (_, d_prev) = f.iterate_with_derivative(prev, n);
        if !(d_prev > 1e-12) {
            return Err("lift reached a critical point".into());
        }
        let z = newton_lift(f, n, prev, w);
        let (img, d_new) = f.iterate_with_derivative(&z, n);
        let residual = img.distance(w);
        if !(residual < 1e-9) {
            return Err(format!("Newton residual {residual:e}"));
        }
        let spacing = w.distance(w_prev);
        let step = z.distance(prev);
        if step > 5.0 * spacing / d_prev + 1e-15 {
            return Err(format!("step {step:e} exceeds derivative bound"));
        }
        let ratio = d_new / d_prev;
        if !(0.25..=4.0).contains(&ratio) {
            return Err(format!("derivative ratio {ratio:e} out of range"));
        }
        Ok(z)
    };
    match try_direct() {
        Ok(z) => Ok(z),
        Err(e) if level >= CONTINUATION_BISECTIONS => Err(e),
        Err(_) => {
            let mid = geodesic_midpoint(w_prev, w);
            let z_mid = lift_step(f, n, prev, w_prev, &mid, level + 1)?;
            lift_step(f, n, &z_mid, &mid, w, level + 1)
        }
    }
}

/// Endpoint of the lift of `path` through `f^n` that starts at
/// `start_lift`.
pub fn inverse_branch_continue(
    f: &RationalMap,
    n: usize,
    start_lift: &SpherePoint,
    path: &[SpherePoint],
) -> Result<SpherePoint> {
    let Some(first) = path.first() else {
        return Ok(*start_lift);
    };
    let r = f.iterate(start_lift, n).distance(first);
    if !(r < 1e-8) {
        return Err(Error::InvalidArgument(format!(
            "start lift does not map to the path start (residual {r:e})"
        )));
    }
    if n == 0 {
        return Ok(*path.last().unwrap());
    }
    let mut z = *start_lift;
    for k in 1..path.len() {
        let gap = path[k].distance(&path[k - 1]);
        if gap >= PATH_SPACING {
            return Err(Error::InvalidArgument(format!(
                "path points {} and {k} are {gap} apart",
                k - 1
            )));
        }
        if gap == 0.0 {
            continue;
        }
        z = lift_step(f, n, &z, &path[k - 1], &path[k], 0)
            .map_err(|reason| Error::ContinuationFailure { index: k, reason })?;
    }
    Ok(z)
}

/// Great-circle path from `a` to `b` with spacing at most `step`.
pub fn geodesic_path(a: &SpherePoint, b: &SpherePoint, step: f64) -> Vec<SpherePoint> {
    let u = a.to_r3();
    let v = b.to_r3();
    let dot = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0);
    let angle = dot.acos();
    // chordal distance is half the R^3 chord
    let chord = a.distance(b);
    let k = ((chord / step).ceil() as usize).max(1);
    if angle < 1e-15 {
        return vec![*a, *b];
    }
    let s = angle.sin();
    (0..=k)
        .map(|i| {
            let t = i as f64 / k as f64;
            let (ca, cb) = (((1.0 - t) * angle).sin() / s, (t * angle).sin() / s);
            SpherePoint::from_r3([0, 1, 2].map(|j| ca * u[j] + cb * v[j]))
        })
        .collect()
}

/// Radial path from the centre of a ball to its boundary point in direction
/// `theta`.
pub fn radial_path(center: &SpherePoint, radius: f64, theta: f64, step: f64) -> Vec<SpherePoint> {
    let k = ((radius / step).ceil() as usize).max(1);
    (0..=k)
        .map(|i| center.offset(radius * i as f64 / k as f64, theta))
        .collect()
}
