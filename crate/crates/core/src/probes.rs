//! Numerical probes of the proof machinery: critical-distance sums along
//! orbits, diameters of pulled-back balls, Böttcher contraction and Koebe
//! distortion of inverse branches.

use crate::dynamics::{inverse_branch_continue, radial_path, CycleClass, CycleInfo, SuperAttractingSet};
use crate::error::{Error, Result};
use crate::measures::backward_walk;
use crate::polysolve::fiber;
use crate::ratmap::{CriticalData, RationalMap};
use crate::sphere::SpherePoint;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Value of `-log d` at an exact critical hit.
pub const PSI_CAP: f64 = 50.0;
pub const BOUNDARY_LIFTS: usize = 64;
pub const FALLBACK_SAMPLES: usize = 256;
pub const PATH_STEP: f64 = 0.004;
pub const BOTTCHER_SEEDS: usize = 10;
pub const BOTTCHER_BOUNDARY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiVariant {
    /// Distance to the non-periodic critical points.
    NonPeriodic,
    /// Distance to all critical points.
    AllCritical,
    /// Distance to a single point.
    Point(SpherePoint),
}

/// `-log d(x, C)` capped at [`PSI_CAP`]; the flag is set when capped.
pub fn psi(crit: &CriticalData, x: &SpherePoint, variant: PsiVariant) -> (f64, bool) {
    let dist = match variant {
        PsiVariant::NonPeriodic => crit.nonperiodic.iter().map(|c| c.distance(x)).fold(f64::INFINITY, f64::min),
        PsiVariant::AllCritical => crit.all.iter().map(|(c, _)| c.distance(x)).fold(f64::INFINITY, f64::min),
        PsiVariant::Point(c) => c.distance(x),
    };
    if dist.is_infinite() {
        return (0.0, false);
    }
    let v = -dist.ln();
    if v >= PSI_CAP {
        (PSI_CAP, true)
    } else {
        (v.max(0.0), false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpuReport {
    pub x: SpherePoint,
    pub n: usize,
    pub n_removed: usize,
    pub untrimmed_sum: f64,
    pub trimmed_sum: f64,
    pub q_hat: f64,
    pub removed_indices: Vec<usize>,
    /// Orbit indices where the critical distance underflowed the cap.
    pub capped: Vec<usize>,
    /// Set when the non-periodic critical set is empty.
    pub vacuous: bool,
}

/// Sum of `psi_f` along `orbit` with the `n_removed` largest terms dropped.
pub fn dpu_on_orbit(crit: &CriticalData, orbit: &[SpherePoint], n_removed: usize) -> Result<DpuReport> {
    let Some(x) = orbit.first() else {
        return Err(Error::InvalidArgument("orbit length must be at least 1".into()));
    };
    let mut terms: Vec<(usize, f64)> = Vec::with_capacity(orbit.len());
    let mut capped = Vec::new();
    for (i, y) in orbit.iter().enumerate() {
        let (v, hit) = psi(crit, y, PsiVariant::NonPeriodic);
        if hit {
            capped.push(i);
        }
        terms.push((i, v));
    }
    let untrimmed: f64 = terms.iter().map(|t| t.1).sum();
    let mut order = terms.clone();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let k = n_removed.min(order.len());
    let mut removed_indices: Vec<usize> = order[..k].iter().map(|t| t.0).collect();
    removed_indices.sort_unstable();
    let trimmed: f64 = order[k..].iter().map(|t| t.1).sum();
    Ok(DpuReport {
        x: *x,
        n: orbit.len(),
        n_removed: k,
        untrimmed_sum: untrimmed,
        trimmed_sum: trimmed,
        q_hat: trimmed / orbit.len() as f64,
        removed_indices,
        capped,
        vacuous: crit.nonperiodic.is_empty(),
    })
}

/// DPU sum along the forward orbit `x, f(x), ..., f^{n-1}(x)`.
pub fn dpu_trimmed_sum(f: &RationalMap, x: &SpherePoint, n: usize, n_removed: usize) -> Result<DpuReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let crit = f.critical_points()?;
    let mut orbit = Vec::with_capacity(n);
    let mut y = *x;
    for _ in 0..n {
        orbit.push(y);
        y = f.apply(&y);
    }
    dpu_on_orbit(&crit, &orbit, n_removed)
}

/// A length-`n` orbit segment ending at `x`, read off a backward random
/// walk from `x`. Forward iteration is unstable near the Julia set, so
/// this is how orbits that stay on it are produced.
pub fn backward_shadow_orbit<R: Rng>(f: &RationalMap, x: &SpherePoint, n: usize, rng: &mut R) -> Result<Vec<SpherePoint>> {
    let mut path = backward_walk(f, x, n, rng)?;
    path.reverse();
    path.pop();
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiameterMethod {
    BoundaryLift,
    ClusterFallback,
}

impl std::fmt::Display for DiameterMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DiameterMethod::BoundaryLift => "boundary-lift",
            DiameterMethod::ClusterFallback => "cluster-fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiameterReport {
    pub x: SpherePoint,
    pub n: usize,
    pub ball_center: SpherePoint,
    pub ball_radius: f64,
    pub diam_v: f64,
    pub method: DiameterMethod,
    /// `log diam V / log diam B`.
    pub exponent_observed: f64,
}

fn max_pairwise(points: &[SpherePoint]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max(p.distance(q));
        }
    }
    best
}

fn ball_diameter(center: &SpherePoint, radius: f64) -> f64 {
    max_pairwise(
        &(0..BOUNDARY_LIFTS)
            .map(|k| center.offset(radius, 2.0 * PI * k as f64 / BOUNDARY_LIFTS as f64))
            .collect::<Vec<_>>(),
    )
}

fn boundary_lift_diameter(f: &RationalMap, x: &SpherePoint, n: usize, center: &SpherePoint, radius: f64) -> Result<f64> {
    let lifted = (0..BOUNDARY_LIFTS)
        .into_par_iter()
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / BOUNDARY_LIFTS as f64;
            inverse_branch_continue(f, n, x, &radial_path(center, radius, theta, PATH_STEP))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pts = lifted;
    pts.push(*x);
    Ok(max_pairwise(&pts))
}

fn cluster_diameter(f: &RationalMap, x: &SpherePoint, n: usize, center: &SpherePoint, radius: f64, budget: u64) -> Result<f64> {
    // sunflower sampling of the ball
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut pts = vec![*x];
    for k in 0..FALLBACK_SAMPLES {
        let rho = radius * ((k as f64 + 0.5) / FALLBACK_SAMPLES as f64).sqrt();
        let level = fiber(f, &center.offset(rho, golden * k as f64), n, budget)?;
        pts.extend(level.points);
    }
    let nn: Vec<f64> = pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            pts.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| p.distance(q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut sorted = nn.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = 2.0 * sorted[sorted.len() / 2];
    let mut in_cluster = vec![false; pts.len()];
    in_cluster[0] = true;
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        for j in 0..pts.len() {
            if !in_cluster[j] && pts[i].distance(&pts[j]) <= threshold {
                in_cluster[j] = true;
                frontier.push(j);
            }
        }
    }
    let members: Vec<SpherePoint> = pts.iter().zip(&in_cluster).filter(|(_, c)| **c).map(|(p, _)| *p).collect();
    Ok(max_pairwise(&members))
}

/// Diameter of the component of `f^{-n}(B(f^n(x), radius))` containing `x`.
pub fn diameter_pullback(f: &RationalMap, x: &SpherePoint, n: usize, radius: f64, budget: u64) -> Result<DiameterReport> {
    let center = f.iterate(x, n);
    let diam_b = ball_diameter(&center, radius);
    let (diam_v, method) = match boundary_lift_diameter(f, x, n, &center, radius) {
        Ok(d) => (d, DiameterMethod::BoundaryLift),
        Err(first) => match cluster_diameter(f, x, n, &center, radius, budget) {
            Ok(d) => (d, DiameterMethod::ClusterFallback),
            Err(second) => {
                return Err(Error::Numeric(format!(
                    "pullback diameter failed: boundary lift ({first}); cluster fallback ({second})"
                )))
            }
        },
    };
    Ok(DiameterReport {
        x: *x,
        n,
        ball_center: center,
        ball_radius: radius,
        diam_v,
        method,
        exponent_observed: diam_v.ln() / diam_b.ln(),
    })
}

/// Constants of `log diam V <= n log L + rho/(-log s + 1) log r`, where `s`
/// is the distance from `f^n(x)` to the super-attracting set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterLaw {
    pub log_l: f64,
    pub rho: f64,
}

/// One datum for [`fit_diameter_law`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterSample {
    pub n: usize,
    pub radius: f64,
    pub s: f64,
    pub diam_v: f64,
}

impl DiameterSample {
    pub fn from_report(rep: &DiameterReport, set: &SuperAttractingSet) -> Self {
        DiameterSample {
            n: rep.n,
            radius: rep.ball_radius,
            s: set.distance_to(&rep.ball_center).min(1.0),
            diam_v: rep.diam_v,
        }
    }

    fn weight(&self) -> f64 {
        self.radius.ln() / (1.0 - self.s.ln())
    }
}

impl DiameterLaw {
    pub fn bound(&self, s: &DiameterSample) -> f64 {
        s.n as f64 * self.log_l + self.rho * s.weight()
    }

    /// Amount by which `log diam V` exceeds the bound (negative when it holds).
    pub fn excess(&self, s: &DiameterSample) -> f64 {
        s.diam_v.ln() - self.bound(s)
    }
}

/// Tightest envelope over a grid of `rho`: for each `rho` the smallest
/// admissible `log L`, keeping the pair with the least total slack. The
/// returned `log L` is widened by `margin`.
pub fn fit_diameter_law(samples: &[DiameterSample], margin: f64) -> Result<DiameterLaw> {
    if samples.is_empty() || samples.iter().any(|s| s.n == 0) {
        return Err(Error::TooFewPoints(
            "diameter fit needs samples with n >= 1".into(),
        ));
    }
    let mut best: Option<(f64, DiameterLaw)> = None;
    for k in 1..=400 {
        let rho = k as f64 * 0.01;
        let log_l = samples
            .iter()
            .map(|s| (s.diam_v.ln() - rho * s.weight()) / s.n as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let law = DiameterLaw { log_l, rho };
        let slack: f64 = samples.iter().map(|s| -law.excess(s)).sum();
        if best.as_ref().map_or(true, |(b, _)| slack < *b) {
            best = Some((slack, law));
        }
    }
    let (_, mut law) = best.unwrap();
    law.log_l += margin;
    Ok(law)
}

/// Fitted `diam B ≈ C (diam f^n B)^{l^{-n}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BottcherFit {
    pub c: f64,
    pub l: f64,
    pub rms: f64,
    /// `(n, log diam B, log diam f^n B)` data used in the fit.
    pub data: Vec<(usize, f64, f64)>,
}

fn image_diameter(f: &RationalMap, center: &SpherePoint, radius: f64, n: usize) -> f64 {
    let mut pts: Vec<SpherePoint> = (0..BOTTCHER_BOUNDARY)
        .map(|k| center.offset(radius, 2.0 * PI * k as f64 / BOTTCHER_BOUNDARY as f64))
        .collect();
    pts.push(*center);
    let imgs: Vec<SpherePoint> = pts.iter().map(|p| f.iterate(p, n)).collect();
    max_pairwise(&imgs)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Fits `(C, l)` from balls near a super-attracting cycle. Iterates are
/// taken at multiples of the period, and diameters under the resolution of
/// the chart are discarded.
pub fn bottcher_contraction(f: &RationalMap, cycle: &CycleInfo, radius: f64, n_max: usize) -> Result<BottcherFit> {
    if cycle.class != CycleClass::SuperAttracting {
        return Err(Error::Refused(format!("cycle has class {}", cycle.class)));
    }
    let m = cycle.period();
    // prefer a cycle point sitting at 0 or infinity, where tiny diameters are resolved
    let (p, floor) = cycle
        .points
        .iter()
        .map(|p| {
            let gap = p.distance(&SpherePoint::ZERO).min(p.distance(&SpherePoint::INFINITY));
            (p, gap)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, gap)| (*p, if gap < 1e-14 { 1e-280 } else { 1e-12 }))
        .unwrap();
    let mut data = Vec::new();
    for j in 0..BOTTCHER_SEEDS {
        let r = radius * (0.3 + 0.7 * j as f64 / BOTTCHER_SEEDS as f64);
        let center = p.offset(0.3 * radius * (j % 3) as f64 / 2.0, 2.0 * PI * j as f64 / BOTTCHER_SEEDS as f64);
        let diam_b = ball_diameter(&center, r);
        for k in 1..=n_max {
            let dn = image_diameter(f, &center, r, k * m);
            if dn > floor && dn.is_finite() {
                data.push((k * m, diam_b.ln(), dn.ln()));
            }
        }
    }
    if data.is_empty() {
        return Err(Error::TooFewPoints("no resolvable image diameters".into()));
    }
    let fit_c = |l: f64| {
        let k = data.len() as f64;
        let log_c = data.iter().map(|(n, y, x)| y - l.powi(-(*n as i32)) * x).sum::<f64>() / k;
        let rms = (data
            .iter()
            .map(|(n, y, x)| (y - log_c - l.powi(-(*n as i32)) * x).powi(2))
            .sum::<f64>()
            / k)
            .sqrt();
        (log_c, rms)
    };
    // the misfit plateaus for large l, so bracket on a log grid first
    let grid: Vec<f64> = (0..=200).map(|k| 1.01 * (16.0f64 / 1.01).powf(k as f64 / 200.0)).collect();
    let k_best = (0..grid.len())
        .min_by(|&i, &j| fit_c(grid[i]).1.total_cmp(&fit_c(grid[j]).1))
        .unwrap();
    let l = golden_min(|l| fit_c(l).1, grid[k_best.saturating_sub(1)], grid[(k_best + 1).min(200)], 100);
    let (log_c, rms) = fit_c(l);
    Ok(BottcherFit {
        c: log_c.exp(),
        l,
        rms,
        data,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KoebeReport {
    /// Index of the base preimage in the sorted fiber of the centre.
    pub branch: usize,
    pub n: usize,
    pub radius: f64,
    pub lambda_hat: f64,
    pub samples: usize,
}

/// Distortion `max/min (f^n)^#` over a branch of `f^{-n}` on `B(center, radius)`.
pub fn koebe_ratio(
    f: &RationalMap,
    center: &SpherePoint,
    radius: f64,
    n: usize,
    samples: usize,
    branch: usize,
    budget: u64,
) -> Result<KoebeReport> {
    let level = fiber(f, center, n, budget)?;
    let base = *level
        .points
        .get(branch)
        .ok_or_else(|| Error::InvalidArgument(format!("branch {branch} out of range ({})", level.len())))?;
    let rings = (samples as f64).sqrt().ceil().max(1.0) as usize;
    let per_ring = samples.div_ceil(rings).max(1);
    let step = (radius / 8.0).min(PATH_STEP);
    let derivs = (0..per_ring)
        .into_par_iter()
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / per_ring as f64;
            let mut out = Vec::with_capacity(rings);
            let mut lift = base;
            let mut prev = *center;
            for j in 1..=rings {
                let target = center.offset(radius * j as f64 / rings as f64, theta);
                let mut path = radial_path(center, radius * j as f64 / rings as f64, theta, step);
                // continue from the previous ring instead of restarting
                path.retain(|q| q.distance(center) + 1e-15 >= prev.distance(center));
                path.insert(0, prev);
                lift = inverse_branch_continue(f, n, &lift, &path)?;
                prev = target;
                out.push(f.iterate_with_derivative(&lift, n).1);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lo = f.iterate_with_derivative(&base, n).1;
    let mut hi = lo;
    for d in derivs.iter().flatten() {
        lo = lo.min(*d);
        hi = hi.max(*d);
    }
    Ok(KoebeReport {
        branch,
        n,
        radius,
        lambda_hat: hi / lo,
        samples: rings * per_ring,
    })
}
