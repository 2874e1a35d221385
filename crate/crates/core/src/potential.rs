//! Dynamical Green function, the potentials `g_a` and the potential-pairing
//! oracle.

use crate::error::{Error, Result};
use crate::measures::{pair_reference, preimage_measure_exact, ReferenceMeasure, REFERENCE_TOLERANCE};
use crate::numeric::{gauss_legendre, Accumulator};
use crate::observables::{Ddc, Observable, SignedDdc};
use crate::polysolve::fiber;
use crate::ratmap::RationalMap;
use crate::sphere::{fibonacci_grid, Rotation, SpherePoint};
use num_complex::Complex64;
use rayon::prelude::*;

/// Default tolerance for the Green function series.
pub const GREEN_TOLERANCE: f64 = 1e-13;
/// Depth at which the Green series is declared non-convergent.
pub const MAX_GREEN_DEPTH: usize = 200;
/// Default grid for the sup normalization.
pub const SUP_GRID: usize = 20_000;
/// Points below this chordal distance from `a` are treated as `a`.
pub const POLE_RADIUS: f64 = 1e-14;
/// Double-double is switched on when `n ln d` exceeds this.
pub const DD_THRESHOLD: f64 = 25.0;
pub const DISTORTION_GRID: usize = 4000;
pub const DISTORTION_SAFETY: f64 = 1.25;
pub const A_SAFETY: f64 = 1.5;
pub const A_RADII: usize = 100;
pub const A_ANGLES: usize = 100;
pub const LEMMA_SHELLS: usize = 16;
pub const LEMMA_RADIAL_NODES: usize = 3;
pub const LEMMA_ANGLES: usize = 16;

/// A value of the Green series with its tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenValue {
    pub value: f64,
    pub err: f64,
    pub depth: usize,
}

/// Escape-rate potential `u` with `dd^c u = mu_f - omega`.
#[derive(Debug, Clone)]
pub struct Green {
    map: RationalMap,
    /// Bound on `|log ‖F(X)‖|` over unit lifts.
    distortion: f64,
}

impl Green {
    pub fn new(f: &RationalMap) -> Self {
        let worst = fibonacci_grid(DISTORTION_GRID)
            .iter()
            .map(|x| f.lift_norm(x).ln().abs())
            .fold(0.0, f64::max);
        Green {
            map: f.clone(),
            distortion: DISTORTION_SAFETY * worst + 1e-3,
        }
    }

    pub fn map(&self) -> &RationalMap {
        &self.map
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    /// `u(x) = sum_k d^{-(k+1)} log ‖F(Y_k)‖` with `Y_k` the unit lift of
    /// `f^k(x)`, truncated once the tail is below `tol`.
    pub fn u(&self, x: &SpherePoint, tol: f64) -> Result<GreenValue> {
        let d = self.map.degree() as f64;
        let mut y = *x;
        let mut sum = 0.0;
        let mut scale = 1.0 / d;
        for k in 0..MAX_GREEN_DEPTH {
            sum += scale * self.map.lift_norm(&y).ln();
            y = self.map.apply(&y);
            let tail = self.distortion * scale / (d - 1.0);
            if tail < tol {
                return Ok(GreenValue {
                    value: sum,
                    err: tail,
                    depth: k + 1,
                });
            }
            scale /= d;
        }
        Err(Error::Numeric(format!(
            "green series did not reach tolerance {tol:e} within depth {MAX_GREEN_DEPTH}"
        )))
    }

    /// Homogeneous escape rate `G(X) = log ‖X‖ + u([X])`.
    pub fn escape_rate(&self, z0: Complex64, z1: Complex64, tol: f64) -> Result<f64> {
        let norm = (z0.norm_sqr() + z1.norm_sqr()).sqrt();
        let x = SpherePoint::from_homogeneous(z0, z1)
            .ok_or_else(|| Error::InvalidArgument("zero vector has no escape rate".into()))?;
        Ok(norm.ln() + self.u(&x, tol)?.value)
    }
}

pub fn green_u(f: &RationalMap, x: &SpherePoint, tol: f64) -> Result<GreenValue> {
    Green::new(f).u(x, tol)
}

/// Result of the sup normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupNormalization {
    pub c_a: f64,
    /// Location of the refined maximum.
    pub argmax: SpherePoint,
    /// Gain of the local refinement over the grid maximum.
    pub grid_err: f64,
}

/// `g_a = log d(., a) - u + c_a` with `sup g_a = 0`.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub green: Green,
    pub a: SpherePoint,
    pub c_a: f64,
    pub c_err: f64,
    pub n_green: usize,
    /// Error bound of each `u` evaluation.
    pub err: f64,
    pub argmax: SpherePoint,
}

fn raw_potential(green: &Green, a: &SpherePoint, x: &SpherePoint) -> f64 {
    let d = x.distance(a);
    if d < POLE_RADIUS {
        return f64::NEG_INFINITY;
    }
    match green.u(x, GREEN_TOLERANCE) {
        Ok(u) => d.ln() - u.value,
        Err(_) => f64::NAN,
    }
}

fn nelder_mead<F: Fn(Complex64) -> f64>(f: F, start: Complex64, step: f64, iters: usize) -> (Complex64, f64) {
    let mut simplex: Vec<(Complex64, f64)> = [start, start + step, start + Complex64::new(0.0, step)]
        .into_iter()
        .map(|p| (p, f(p)))
        .collect();
    for _ in 0..iters {
        // maximize: best first
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (best, worst) = (simplex[0], simplex[2]);
        if (best.0 - worst.0).norm() < 1e-13 {
            break;
        }
        let centroid = (simplex[0].0 + simplex[1].0) * 0.5;
        let refl = centroid + (centroid - worst.0);
        let fr = f(refl);
        if fr > best.1 {
            let exp = centroid + (centroid - worst.0) * 2.0;
            let fe = f(exp);
            simplex[2] = if fe > fr { (exp, fe) } else { (refl, fr) };
        } else if fr > simplex[1].1 {
            simplex[2] = (refl, fr);
        } else {
            let con = centroid + (worst.0 - centroid) * 0.5;
            let fc = f(con);
            if fc > worst.1 {
                simplex[2] = (con, fc);
            } else {
                for i in 1..3 {
                    let p = best.0 + (simplex[i].0 - best.0) * 0.5;
                    simplex[i] = (p, f(p));
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    simplex[0]
}

/// `c_a = -sup_x (log d(x,a) - u(x))`: grid search, then local refinement
/// around the best grid point in the chart centred there.
pub fn normalize_sup(green: &Green, a: &SpherePoint, grid_size: usize) -> SupNormalization {
    let grid = fibonacci_grid(grid_size.max(2));
    let values: Vec<f64> = grid.par_iter().map(|x| raw_potential(green, a, x)).collect();
    let (best_idx, grid_max) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let rot = Rotation::moving_zero_to(&grid[best_idx]);
    let spacing = 2.0 / (grid.len() as f64).sqrt();
    let local = |w: Complex64| raw_potential(green, a, &rot.apply(&SpherePoint::from_complex(w)));
    let mut best = (Complex64::new(0.0, 0.0), grid_max);
    for round in 0..3 {
        let step = spacing / 4f64.powi(round);
        let cand = nelder_mead(local, best.0, step, 400);
        if cand.1 > best.1 {
            best = cand;
        }
    }
    SupNormalization {
        c_a: -best.1,
        argmax: rot.apply(&SpherePoint::from_complex(best.0)),
        grid_err: best.1 - grid_max,
    }
}

/// Constant `A` with `{g_a < -M} ⊂ B(a, A e^{-M})`.
#[derive(Debug, Clone, PartialEq)]
pub struct AEstimate {
    pub value: f64,
    /// `(M, largest sampled radius of {g_a < -M})`.
    pub radii: Vec<(f64, f64)>,
}

impl PotentialField {
    pub fn new(f: &RationalMap, a: &SpherePoint) -> Result<Self> {
        Self::with_grid(f, a, SUP_GRID)
    }

    pub fn with_grid(f: &RationalMap, a: &SpherePoint, grid_size: usize) -> Result<Self> {
        let green = Green::new(f);
        let probe = green.u(a, GREEN_TOLERANCE)?;
        let norm = normalize_sup(&green, a, grid_size);
        Ok(PotentialField {
            green,
            a: *a,
            c_a: norm.c_a,
            c_err: norm.grid_err,
            n_green: probe.depth,
            err: probe.err,
            argmax: norm.argmax,
        })
    }

    pub fn map(&self) -> &RationalMap {
        self.green.map()
    }

    /// `g_a(x)`, `-inf` at `a`.
    pub fn eval(&self, x: &SpherePoint) -> f64 {
        raw_potential(&self.green, &self.a, x) + self.c_a
    }

    pub fn truncated(&self, m: f64) -> TruncatedPotential<'_> {
        TruncatedPotential { base: self, m }
    }

    /// Samples `g_a` on log-spaced circles around `a`; radii below `1e-12`
    /// are not resolved.
    pub fn estimate_a(&self, m_list: &[f64]) -> Result<AEstimate> {
        if m_list.is_empty() || m_list.iter().any(|m| !(1.0..=20.0).contains(m)) {
            return Err(Error::InvalidArgument("M values must lie in [1, 20]".into()));
        }
        let samples: Vec<(f64, f64)> = (0..A_RADII)
            .into_par_iter()
            .flat_map_iter(|i| {
                let r = 10f64.powf(-12.0 + 12.0 * i as f64 / (A_RADII - 1) as f64);
                (0..A_ANGLES).map(move |j| (r, 2.0 * std::f64::consts::PI * j as f64 / A_ANGLES as f64))
            })
            .map(|(r, th)| (r, self.eval(&self.a.offset(r.min(1.0), th))))
            .collect();
        let mut radii = Vec::with_capacity(m_list.len());
        let mut value: f64 = 0.0;
        for &m in m_list {
            let r = samples
                .iter()
                .filter(|(_, g)| *g < -m)
                .map(|(r, _)| *r)
                .fold(0.0, f64::max);
            radii.push((m, r));
            value = value.max(r * m.exp());
        }
        Ok(AEstimate {
            value: A_SAFETY * value,
            radii,
        })
    }
}

/// `g_{a,M} = max(g_a, -M)`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedPotential<'a> {
    pub base: &'a PotentialField,
    pub m: f64,
}

impl TruncatedPotential<'_> {
    pub fn eval(&self, x: &SpherePoint) -> f64 {
        self.base.eval(x).max(-self.m)
    }

    /// Sampled sup norm over a Fibonacci grid plus the pole neighbourhood.
    pub fn sup_norm(&self, grid_size: usize) -> f64 {
        let mut pts = fibonacci_grid(grid_size);
        pts.push(self.base.a.offset(1e-12, 0.0));
        pts.par_iter().map(|x| self.eval(x).abs()).reduce(|| 0.0, f64::max)
    }
}

/// `d^{-n} sum_i w_i g_a(f^n(x_i))` over the quadrature of `ddc`, which
/// equals `<d^{-n}(f^n)^* delta_a - mu_f, phi>` when `dd^c phi = ddc`.
pub fn pairing_via_potential(p: &PotentialField, n: usize, ddc: &SignedDdc, extended: bool) -> Result<f64> {
    if !ddc.is_balanced() {
        return Err(Error::InvalidArgument("dd^c measure is not balanced".into()));
    }
    let nodes = ddc.quadrature().map_err(|e| Error::Refused(format!("potential oracle: {e}")))?;
    let f = p.map();
    let d = f.degree() as f64;
    let mut acc = Accumulator::new(extended || n as f64 * d.ln() > DD_THRESHOLD);
    for (i, (x, w)) in nodes.iter().enumerate() {
        let g = p.eval(&f.iterate(x, n));
        if !g.is_finite() {
            return Err(Error::PotentialPole {
                index: i,
                point: x.to_string(),
            });
        }
        acc.add_product(*w, g);
    }
    Ok(acc.value() * d.powi(-(n as i32)))
}

/// Convenience wrapper taking the observable itself.
pub fn pairing_for_observable(p: &PotentialField, n: usize, phi: &Observable, extended: bool) -> Result<f64> {
    match &phi.ddc {
        Ddc::Zero => Ok(0.0),
        Ddc::Signed(s) => pairing_via_potential(p, n, s, extended),
        _ => Err(Error::Refused(format!(
            "potential oracle needs a discrete dd^c, `{}` has none",
            phi
        ))),
    }
}

/// Both sides of the bounded-potential inequality for `nu_{a,M}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReport {
    pub n: usize,
    pub m: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Checks `|<d^{-n}(f^n)^* nu - mu, phi>| <= d^{-n} M ‖dd^c phi‖` for
/// `nu = mu + dd^c g_{a,M} = delta_a + dd^c (-M - g_a)_+`.
pub fn check_lemma_bdd(
    p: &PotentialField,
    m: f64,
    phi: &Observable,
    n: usize,
    reference: &ReferenceMeasure,
    budget: u64,
) -> Result<LemmaReport> {
    if !phi.is_smooth() {
        return Err(Error::Refused(format!("`{phi}` has no dd^c density")));
    }
    let ddc_norm = phi
        .ddc_mass()
        .ok_or_else(|| Error::Refused(format!("`{phi}` has no dd^c bound")))?;
    let f = p.map();
    let d = f.degree() as f64;
    let scale = d.powi(-(n as i32));
    let tree = preimage_measure_exact(f, &p.a, n, budget)?.pair(phi)?;
    let mu = pair_reference(reference, phi, REFERENCE_TOLERANCE)?.value;

    // (-M - g_a)_+ is carried by B(a, A e^{-M}); integrate it against the
    // transfer of h omega in graded shells around a
    let outer = (p.estimate_a(&[m])?.value * (-m).exp()).min(1.0);
    let (gx, gw) = gauss_legendre(LEMMA_RADIAL_NODES);
    let mut nodes = Vec::new();
    for k in 0..LEMMA_SHELLS {
        let hi = outer * 0.5f64.powi(k as i32);
        let lo = hi * 0.5;
        for (xi, wi) in gx.iter().zip(&gw) {
            let rho = lo + 0.5 * (hi - lo) * (xi + 1.0);
            let w = 2.0 * rho * 0.5 * (hi - lo) * wi / LEMMA_ANGLES as f64;
            for j in 0..LEMMA_ANGLES {
                let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / LEMMA_ANGLES as f64;
                nodes.push((p.a.offset(rho, th), w));
            }
        }
    }
    let terms = nodes
        .par_iter()
        .map(|(y, w)| {
            let psi = (-m - p.eval(y)).max(0.0);
            if psi == 0.0 {
                return Ok(0.0);
            }
            let level = fiber(f, y, n, budget)?;
            let mut transfer = 0.0;
            for (x, mult) in level.points.iter().zip(&level.mult) {
                let (_, jac) = f.iterate_with_derivative(x, n);
                let h = phi.ddc_density(x).unwrap_or(0.0);
                transfer += *mult as f64 * h / (jac * jac);
            }
            Ok(w * psi * transfer)
        })
        .collect::<Result<Vec<f64>>>()?;
    let correction: f64 = terms.iter().sum();
    let lhs = (tree - mu + scale * correction).abs();
    let rhs = scale * m * ddc_norm;
    Ok(LemmaReport {
        n,
        m,
        lhs,
        rhs,
        slack: rhs - lhs,
        holds: lhs <= rhs + REFERENCE_TOLERANCE,
    })
}
