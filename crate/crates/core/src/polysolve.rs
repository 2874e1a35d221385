//! Polynomial roots (Aberth–Ehrlich) and preimage fibers of rational maps.

use crate::error::{Error, Result};
use crate::ratmap::{derivative, horner, horner_with_derivative, RationalMap};
use crate::sphere::{Chart, SpherePoint};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

type C = Complex64;

/// Sweeps before the simultaneous iteration gives up.
pub const MAX_SWEEPS: usize = 500;
/// Leading coefficients below this (relative) count as roots at infinity.
pub const DEGREE_DROP_THRESHOLD: f64 = 1e-13;
/// Roots closer than this (times max(1, |r|)) are merged into one.
pub const CLUSTER_RADIUS: f64 = 1e-7;
/// Required chordal round-trip accuracy of every preimage.
pub const PREIMAGE_RESIDUAL: f64 = 1e-8;
/// Default cap on the number of points in a full preimage tree level.
pub const DEFAULT_BUDGET: u64 = 2_000_000;

const ANGLE_OFFSET: f64 = 0.414_213_562_373_095_1; // sqrt(2) - 1
const ECCENTRICITY: f64 = 0.9;

/// Roots on the sphere with multiplicities.
#[derive(Debug, Clone, Default)]
pub struct RootSet {
    pub roots: Vec<(SpherePoint, u32)>,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> u32 {
        self.roots.iter().map(|(_, m)| m).sum()
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

/// Positive root of `|a0| x^m - sum_{k>=1} |a_k| x^{m-k}`.
fn cauchy_bound(abs: &[f64]) -> f64 {
    let m = abs.len() - 1;
    let lead = abs[0];
    let g = |x: f64| {
        let mut v = lead;
        for &c in &abs[1..] {
            v = v * x - c;
        }
        v
    };
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = if m == 0 { 0.0 } else { hi / 2.0 };
    if g(lo) >= 0.0 {
        lo = 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn abs_horner(abs: &[f64], x: f64) -> f64 {
    abs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Polynomial with nonzero leading and constant terms, evaluated in
/// whichever of `z` or `1/z` is bounded by 1.
struct Workspace<'a> {
    a: &'a [C],
    rev: Vec<C>,
    abs_a: Vec<f64>,
    abs_rev: Vec<f64>,
    m: usize,
}

impl<'a> Workspace<'a> {
    fn new(a: &'a [C]) -> Self {
        let rev: Vec<C> = a.iter().rev().copied().collect();
        Workspace {
            abs_a: a.iter().map(|c| c.norm()).collect(),
            abs_rev: rev.iter().map(|c| c.norm()).collect(),
            m: a.len() - 1,
            a,
            rev,
        }
    }

    /// Returns `p'/p` (the inverse Newton ratio), `|p|` and the rounding
    /// bound for `|p|`, all in the bounded chart.
    fn eval(&self, z: C) -> (C, f64, f64) {
        if z.norm() <= 1.0 {
            let (p, dp) = horner_with_derivative(self.a, z);
            let bound = 4.0 * f64::EPSILON * abs_horner(&self.abs_a, z.norm());
            (dp / p, p.norm(), bound)
        } else {
            let s = z.inv();
            let (r, dr) = horner_with_derivative(&self.rev, s);
            let bound = 4.0 * f64::EPSILON * abs_horner(&self.abs_rev, s.norm());
            // p'/p = s (m - s r'/r)
            (s * (self.m as f64 - s * dr / r), r.norm(), bound)
        }
    }

    fn relative_residual(&self, z: C) -> f64 {
        let (_, p, bound) = self.eval(z);
        p / (bound / (4.0 * f64::EPSILON))
    }

    /// Newton on the `k`-th derivative (in the bounded chart), used to polish
    /// the centre of a cluster of `k + 1` roots.
    fn polish(&self, z: C, k: usize) -> C {
        let (mut w, chart) = if z.norm() <= 1.0 { (z, Chart::Zero) } else { (z.inv(), Chart::Infinity) };
        let base = match chart {
            Chart::Zero => self.a.to_vec(),
            Chart::Infinity => self.rev.clone(),
        };
        let mut poly = base;
        for _ in 0..k {
            poly = derivative(&poly);
        }
        let dpoly = derivative(&poly);
        let mut best = horner(&poly, w).norm();
        for _ in 0..20 {
            let dp = horner(&dpoly, w);
            if dp.norm() == 0.0 || best == 0.0 {
                break;
            }
            let cand = w - horner(&poly, w) / dp;
            let val = horner(&poly, cand).norm();
            if !(val < best) {
                break;
            }
            w = cand;
            best = val;
        }
        match chart {
            Chart::Zero => w,
            Chart::Infinity => w.inv(),
        }
    }
}

fn quadratic_roots(a: &[C]) -> [C; 2] {
    let (a2, a1, a0) = (a[0], a[1], a[2]);
    let disc = (a1 * a1 - 4.0 * a2 * a0).sqrt();
    // pick the sign that avoids cancellation
    let q = if (a1.conj() * disc).re >= 0.0 { -0.5 * (a1 + disc) } else { -0.5 * (a1 - disc) };
    if q.norm() == 0.0 {
        return [C::new(0.0, 0.0); 2];
    }
    [q / a2, a0 / q]
}

/// Aberth–Ehrlich iteration for a polynomial with nonzero leading and
/// constant coefficients of degree `m >= 2`.
fn aberth(ws: &Workspace) -> Result<Vec<C>> {
    let m = ws.m;
    let upper = cauchy_bound(&ws.abs_a);
    let lower = 1.0 / cauchy_bound(&ws.abs_rev);
    let radius = (upper * lower).sqrt();
    let mut center = -ws.a[1] / (ws.a[0] * m as f64);
    if !(center.norm() < upper) {
        center = C::new(0.0, 0.0);
    }
    let mut z: Vec<C> = (0..m)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / m as f64 + ANGLE_OFFSET;
            center + radius * C::new(th.cos(), ECCENTRICITY * th.sin())
        })
        .collect();
    let mut done = vec![false; m];
    for _ in 0..MAX_SWEEPS {
        for i in 0..m {
            if done[i] {
                continue;
            }
            let (inv_newton, p, bound) = ws.eval(z[i]);
            if p <= bound {
                done[i] = true;
                continue;
            }
            let s: C = (0..m)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let denom = inv_newton - s;
            if !(denom.norm() > 0.0) || !denom.re.is_finite() {
                continue;
            }
            let w = denom.inv();
            z[i] -= w;
            if w.norm() < 4.0 * f64::EPSILON * z[i].norm() {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            return Ok(z);
        }
    }
    let max_residual = z.iter().map(|&r| ws.relative_residual(r)).fold(0.0, f64::max);
    Err(Error::SolverFailure {
        sweeps: MAX_SWEEPS,
        max_residual,
    })
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut k = i;
    while parent[k] != r {
        let next = parent[k];
        parent[k] = r;
        k = next;
    }
    r
}

/// Groups approximate roots into clusters and polishes each centre.
fn merge_clusters(ws: &Workspace, z: &[C]) -> Vec<(C, u32)> {
    let n = z.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            let scale = z[i].norm().max(z[j].norm()).max(1.0);
            if (z[i] - z[j]).norm() < CLUSTER_RADIUS * scale {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<C>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, members)) => members.push(z[i]),
            None => groups.push((r, vec![z[i]])),
        }
    }
    groups
        .into_iter()
        .map(|(_, members)| {
            let k = members.len();
            let mean = members.iter().sum::<C>() / k as f64;
            (ws.polish(mean, k - 1), k as u32)
        })
        .collect()
}

/// All roots of a polynomial of formal degree `coeffs.len() - 1` on the
/// sphere. Coefficients are highest degree first; a degree drop of `k`
/// reports infinity with multiplicity `k`.
pub fn roots(coeffs: &[C]) -> Result<RootSet> {
    if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidArgument("non-finite coefficient".into()));
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if coeffs.is_empty() || scale == 0.0 {
        return Err(Error::InvalidArgument("all coefficients are zero".into()));
    }
    let mut out = Vec::new();
    let lead = coeffs
        .iter()
        .position(|c| c.norm() > DEGREE_DROP_THRESHOLD * scale)
        .expect("nonzero coefficient");
    if lead > 0 {
        out.push((SpherePoint::INFINITY, lead as u32));
    }
    let mut body: Vec<C> = coeffs[lead..].iter().map(|c| c / scale).collect();
    let mut zeros = 0u32;
    while body.len() > 1 && *body.last().unwrap() == C::new(0.0, 0.0) {
        body.pop();
        zeros += 1;
    }
    if zeros > 0 {
        out.push((SpherePoint::ZERO, zeros));
    }
    let m = body.len() - 1;
    let approx: Vec<C> = match m {
        0 => Vec::new(),
        1 => vec![-body[1] / body[0]],
        2 => quadratic_roots(&body).to_vec(),
        _ => aberth(&Workspace::new(&body))?,
    };
    if m > 0 {
        let ws = Workspace::new(&body);
        for (z, k) in merge_clusters(&ws, &approx) {
            out.push((SpherePoint::from_complex(z), k));
        }
    }
    out.sort_by(|a, b| a.0.canonical_cmp(&b.0));
    Ok(RootSet { roots: out })
}

/// The fiber `f^{-1}(w)`: roots of `w1 P - w0 Q`, with multiplicities
/// summing to `d`.
pub fn preimages(f: &RationalMap, w: &SpherePoint) -> Result<RootSet> {
    let set = roots(&f.preimage_equation(w))?;
    for (r, _) in &set.roots {
        let residual = f.apply(r).distance(w);
        if !(residual < PREIMAGE_RESIDUAL) {
            return Err(Error::Residual {
                residual,
                tolerance: PREIMAGE_RESIDUAL,
            });
        }
    }
    Ok(set)
}

/// One level of a backward tree: points, multiplicities and the index of
/// each point's image in the previous level.
#[derive(Debug, Clone, Default)]
pub struct TreeLevel {
    pub points: Vec<SpherePoint>,
    pub mult: Vec<u64>,
    pub parent: Vec<usize>,
}

impl TreeLevel {
    pub fn total_multiplicity(&self) -> u64 {
        self.mult.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn root(a: SpherePoint) -> Self {
        TreeLevel {
            points: vec![a],
            mult: vec![1],
            parent: vec![0],
        }
    }
}

/// Full backward tree `a, f^{-1}(a), ..., f^{-n}(a)`.
#[derive(Debug, Clone)]
pub struct PreimageTree {
    pub levels: Vec<TreeLevel>,
}

impl PreimageTree {
    pub fn last(&self) -> &TreeLevel {
        self.levels.last().expect("tree has a root level")
    }
}

fn check_budget(f: &RationalMap, n: usize, budget: u64) -> Result<()> {
    let required = (f.degree() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(Error::Budget { required, budget });
    }
    Ok(())
}

fn expand(f: &RationalMap, prev: &TreeLevel) -> Result<TreeLevel> {
    let children: Vec<Vec<(SpherePoint, u64, usize)>> = prev
        .points
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let set = preimages(f, w)?;
            Ok(set
                .roots
                .into_iter()
                .map(|(r, m)| (r, m as u64 * prev.mult[i], i))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut flat: Vec<(SpherePoint, u64, usize)> = children.into_iter().flatten().collect();
    flat.sort_by(|a, b| a.0.canonical_cmp(&b.0).then(a.2.cmp(&b.2)));
    Ok(TreeLevel {
        points: flat.iter().map(|t| t.0).collect(),
        mult: flat.iter().map(|t| t.1).collect(),
        parent: flat.iter().map(|t| t.2).collect(),
    })
}

/// Breadth-first preimage tree of depth `n`; fails when `d^n > budget`.
pub fn preimage_tree(f: &RationalMap, a: &SpherePoint, n: usize, budget: u64) -> Result<PreimageTree> {
    check_budget(f, n, budget)?;
    let mut levels = vec![TreeLevel::root(*a)];
    for _ in 0..n {
        let next = expand(f, levels.last().unwrap())?;
        levels.push(next);
    }
    Ok(PreimageTree { levels })
}

/// Only the deepest level `f^{-n}(a)` (parent links point into level `n-1`).
pub fn fiber(f: &RationalMap, a: &SpherePoint, n: usize, budget: u64) -> Result<TreeLevel> {
    check_budget(f, n, budget)?;
    let mut level = TreeLevel::root(*a);
    for _ in 0..n {
        level = expand(f, &level)?;
    }
    Ok(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratmap::parse_map;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn roots_examples() {
        let r = roots(&[c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.roots[0].0.same_as(&SpherePoint::from_re_im(-1.0, 0.0)));
        assert!(r.roots[1].0.same_as(&SpherePoint::from_re_im(1.0, 0.0)));

        let r = roots(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert!(r.roots[0].0.same_as(&SpherePoint::ZERO));
        assert_eq!(r.roots[0].1, 2);

        let quartic = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)];
        let r = roots(&quartic).unwrap();
        assert_eq!(r.len(), 4);
        for (p, m) in &r.roots {
            assert_eq!(*m, 1);
            let crate::sphere::Affine::Finite(z) = p.to_affine() else { panic!() };
            assert!(horner(&quartic, z).norm() < 1e-12);
        }
    }

    #[test]
    fn degree_drop_reports_infinity() {
        let r = roots(&[c(0.0, 0.0), c(1e-20, 0.0), c(1.0, 0.0), c(-2.0, 0.0)]).unwrap();
        assert_eq!(r.total_multiplicity(), 3);
        let inf = r.roots.iter().find(|(p, _)| p.is_infinity()).unwrap();
        assert_eq!(inf.1, 2);
    }

    #[test]
    fn multiple_roots_are_merged() {
        // (z - 0.5)^2 (z + 1) = z^3 - 0.75 z + 0.25
        let r = roots(&[c(1.0, 0.0), c(0.0, 0.0), c(-0.75, 0.0), c(0.25, 0.0)]).unwrap();
        assert_eq!(r.len(), 2);
        let double = r.roots.iter().find(|(_, m)| *m == 2).unwrap();
        assert!(double.0.distance(&SpherePoint::from_re_im(0.5, 0.0)) < 1e-7);
    }

    #[test]
    fn random_polynomials_have_small_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let deg = rng.gen_range(3..=24);
            let a: Vec<C> = (0..=deg)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let r = roots(&a).unwrap();
            assert_eq!(r.total_multiplicity() as usize, deg);
            let ws = Workspace::new(&a);
            for (p, _) in &r.roots {
                let crate::sphere::Affine::Finite(z) = p.to_affine() else { continue };
                assert!(ws.relative_residual(z) < 1e-10, "{}", ws.relative_residual(z));
            }
        }
    }

    #[test]
    fn perturbation_moves_simple_roots_little() {
        // well separated roots 1, 2, -1.5, i
        let targets = [c(1.0, 0.0), c(2.0, 0.0), c(-1.5, 0.0), c(0.0, 1.0)];
        let mut a = vec![c(1.0, 0.0)];
        for t in targets {
            let mut next = vec![c(0.0, 0.0); a.len() + 1];
            for (i, &x) in a.iter().enumerate() {
                next[i] += x;
                next[i + 1] -= x * t;
            }
            a = next;
        }
        let base = roots(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let b: Vec<C> = a
                .iter()
                .map(|x| x + c(rng.gen_range(-1e-12..1e-12), rng.gen_range(-1e-12..1e-12)))
                .collect();
            let moved = roots(&b).unwrap();
            for ((p, _), (q, _)) in base.roots.iter().zip(&moved.roots) {
                assert!(p.distance(q) < 1e-8);
            }
        }
    }

    #[test]
    fn preimage_examples() {
        let sq = parse_map("power 2").unwrap();
        let r = preimages(&sq, &SpherePoint::from_re_im(1.0, 0.0)).unwrap();
        assert_eq!(r.len(), 2);
        let r = preimages(&sq, &SpherePoint::ZERO).unwrap();
        assert_eq!(r.roots, vec![(SpherePoint::ZERO, 2)]);
        let g = parse_map("quadratic i").unwrap();
        let r = preimages(&g, &SpherePoint::from_re_im(0.0, 1.0)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.roots[0].1, 2);
        assert!(r.roots[0].0.same_as(&SpherePoint::ZERO));
    }

    #[test]
    fn tree_examples() {
        let sq = parse_map("power 2").unwrap();
        let t = preimage_tree(&sq, &SpherePoint::from_re_im(1.0, 0.0), 3, DEFAULT_BUDGET).unwrap();
        let last = t.last();
        assert_eq!(last.len(), 8);
        for p in &last.points {
            let crate::sphere::Affine::Finite(z) = p.to_affine() else { panic!() };
            let k = (z.arg() / (PI / 4.0)).round();
            let exact = SpherePoint::from_complex(C::from_polar(1.0, k * PI / 4.0));
            assert!(p.distance(&exact) < 1e-10);
        }
        let t = preimage_tree(&sq, &SpherePoint::ZERO, 5, DEFAULT_BUDGET).unwrap();
        for (k, level) in t.levels.iter().enumerate() {
            assert_eq!(level.points.len(), 1);
            assert_eq!(level.mult[0], 1 << k);
        }
        let t = preimage_tree(&sq, &SpherePoint::ZERO, 0, DEFAULT_BUDGET).unwrap();
        assert_eq!(t.levels.len(), 1);
    }

    #[test]
    fn budget_is_enforced() {
        let sq = parse_map("power 2").unwrap();
        let err = preimage_tree(&sq, &SpherePoint::ZERO, 22, DEFAULT_BUDGET).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn parents_map_forward() {
        let f = parse_map("coeffs p: 1,0.3,0,-1 q: 0.2,0,1,0.5").unwrap();
        let t = preimage_tree(&f, &SpherePoint::from_re_im(0.3, 0.2), 4, DEFAULT_BUDGET).unwrap();
        for k in 1..t.levels.len() {
            let (lvl, prev) = (&t.levels[k], &t.levels[k - 1]);
            assert_eq!(lvl.total_multiplicity(), 3u64.pow(k as u32));
            for (p, &i) in lvl.points.iter().zip(&lvl.parent) {
                assert!(f.apply(p).distance(&prev.points[i]) < PREIMAGE_RESIDUAL);
            }
        }
    }
}
