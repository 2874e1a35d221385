//! Summation, extended precision and quadrature helpers.

use crate::error::{Error, Result};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Compensated (Kahan–Babuška) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub const CHUNK: usize = 4096;

/// Sum `f(i)` for `i in 0..len` with a result that is bitwise independent
/// of the thread count: fixed chunks are summed in parallel, then the chunk
/// totals are combined sequentially.
pub fn stable_parallel_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            (lo..hi).map(&f).collect::<KahanSum>().value()
        })
        .collect();
    chunks.into_iter().collect::<KahanSum>().value()
}

/// Unevaluated sum `hi + lo` with |lo| <= ulp(hi)/2.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn add(self, other: DoubleDouble) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let (t, f) = two_sum(self.lo, other.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }

    pub fn add_f64(self, x: f64) -> Self {
        self.add(DoubleDouble::from_f64(x))
    }

    pub fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }

    pub fn mul_f64(self, x: f64) -> Self {
        let (p, e) = two_prod(self.hi, x);
        let (hi, lo) = quick_two_sum(p, e + self.lo * x);
        DoubleDouble { hi, lo }
    }

    /// Exact product of two binary64 values.
    pub fn product(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        DoubleDouble { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Accumulator that switches between compensated binary64 and double-double.
#[derive(Debug, Clone, Copy)]
pub enum Accumulator {
    Compensated(KahanSum),
    Extended(DoubleDouble),
}

impl Accumulator {
    pub fn new(extended: bool) -> Self {
        if extended {
            Accumulator::Extended(DoubleDouble::ZERO)
        } else {
            Accumulator::Compensated(KahanSum::new())
        }
    }

    /// Adds `w * x`; in extended mode the product is formed exactly.
    pub fn add_product(&mut self, w: f64, x: f64) {
        match self {
            Accumulator::Compensated(k) => k.add(w * x),
            Accumulator::Extended(dd) => *dd = dd.add(DoubleDouble::product(w, x)),
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Accumulator::Compensated(k) => k.value(),
            Accumulator::Extended(dd) => dd.to_f64(),
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed-order Gauss–Legendre rule mapped to [a, b].
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        GaussRule { nodes, weights }
    }

    /// Nodes and weights on [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.mapped(a, b)
            .map(|(x, w)| w * f(x))
            .collect::<KahanSum>()
            .value()
    }
}

/// Adaptive Gauss–Legendre integration to absolute tolerance `tol`.
///
/// Each panel is accepted when a 20-point rule and the sum of two
/// half-panel 20-point rules agree within the panel's share of `tol`.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_DEPTH: usize = 40;
    let rule = GaussRule::new(20);
    let mut total = KahanSum::new();
    let mut worst = 0.0_f64;
    let mut failed = false;
    let mut stack = vec![(a, b, rule.integrate(a, b, &f), 0usize)];
    let width = (b - a).abs();
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &f);
        let right = rule.integrate(mid, hi, &f);
        let fine = left + right;
        let err = (fine - coarse).abs();
        let share = tol * (hi - lo).abs() / width;
        if err <= share.max(4.0 * f64::EPSILON * fine.abs()) {
            total.add(fine);
        } else if depth >= MAX_DEPTH {
            total.add(fine);
            worst = worst.max(err);
            failed = true;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if failed && worst > tol {
        return Err(Error::Quadrature {
            requested: tol,
            achieved: worst,
        });
    }
    Ok(total.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussRule::new(8);
        // degree 15 is the exactness limit for 8 nodes
        let v = rule.integrate(-1.0, 1.0, |x| x.powi(14));
        assert_relative_eq!(v, 2.0 / 15.0, epsilon = 1e-14);
        let w: f64 = gauss_legendre(8).1.iter().sum();
        assert_relative_eq!(w, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_sqrt() {
        let v = adaptive_integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kahan_beats_naive() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..1000 {
            k.add(1e-16);
        }
        assert_relative_eq!(k.value(), 1.0 + 1e-13, epsilon = 1e-18);
    }

    #[test]
    fn double_double_keeps_low_bits() {
        let x = DoubleDouble::from_f64(1.0).add_f64(1e-20).add_f64(-1.0);
        assert_relative_eq!(x.to_f64(), 1e-20, max_relative = 1e-12);
    }

    #[test]
    fn stable_sum_is_exact_on_integers() {
        let s = stable_parallel_sum(100_000, |i| i as f64);
        assert_eq!(s, 99_999.0 * 100_000.0 / 2.0);
    }
}
