//! Rational maps of the sphere as pairs of homogeneous polynomial lifts.

use crate::error::{Error, Result};
use crate::polysolve;
use crate::sphere::{parse_complex, Affine, Chart, SpherePoint};
use num_complex::Complex64;
use std::fmt;

/// Chordal tolerance for "x returns to itself" in periodicity tests.
pub const PERIODIC_TOLERANCE: f64 = 1e-9;
/// Longest period searched by numeric cycle detection.
pub const MAX_PERIOD: usize = 64;
/// Maps above this degree are rejected (root-solver conditioning).
pub const MAX_DEGREE: usize = 12;
/// Resultant threshold relative to the (unit) coefficient scale.
pub const RESULTANT_THRESHOLD: f64 = 1e-10;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Horner evaluation of a highest-degree-first coefficient list.
pub fn horner(coeffs: &[C], z: C) -> C {
    coeffs.iter().fold(ZERO, |acc, &c| acc * z + c)
}

/// Value and derivative by Horner.
pub fn horner_with_derivative(coeffs: &[C], z: C) -> (C, C) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Coefficients of the derivative (highest first).
pub fn derivative(coeffs: &[C]) -> Vec<C> {
    let n = coeffs.len().saturating_sub(1);
    coeffs[..n]
        .iter()
        .enumerate()
        .map(|(i, &c)| c * (n - i) as f64)
        .collect()
}

fn poly_mul(a: &[C], b: &[C]) -> Vec<C> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Named constructors with exact coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Power(usize),
    Chebyshev(usize),
    Quadratic(C),
}

/// A rational map `f = p/q` of degree `d >= 2`.
///
/// `p` and `q` are stored highest degree first, padded to length `d + 1`
/// and scaled jointly so the largest coefficient modulus is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMap {
    p: Vec<C>,
    q: Vec<C>,
    degree: usize,
    family: Option<Family>,
    p_rev: Vec<C>,
    q_rev: Vec<C>,
    dp: Vec<C>,
    dq: Vec<C>,
    dp_rev: Vec<C>,
    dq_rev: Vec<C>,
}

/// Critical points with multiplicities and the non-periodic subset.
#[derive(Debug, Clone)]
pub struct CriticalData {
    pub all: Vec<(SpherePoint, u32)>,
    pub nonperiodic: Vec<SpherePoint>,
}

impl CriticalData {
    /// Cardinality of the non-periodic critical set.
    pub fn n(&self) -> usize {
        self.nonperiodic.len()
    }

    pub fn total_multiplicity(&self) -> u32 {
        self.all.iter().map(|(_, m)| m).sum()
    }
}

fn leading_degree(c: &[C]) -> Option<usize> {
    c.iter()
        .position(|z| *z != ZERO)
        .map(|i| c.len() - 1 - i)
}

fn pad_to(c: &[C], len: usize) -> Vec<C> {
    let trimmed = match c.iter().position(|z| *z != ZERO) {
        Some(i) => &c[i..],
        None => &[][..],
    };
    let mut out = vec![ZERO; len - trimmed.len()];
    out.extend_from_slice(trimmed);
    out
}

/// Determinant by LU with partial pivoting.
fn determinant(mut m: Vec<Vec<C>>) -> C {
    let n = m.len();
    let mut det = ONE;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
            .unwrap();
        if m[pivot][col] == ZERO {
            return ZERO;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let piv = m[col][col];
        det *= piv;
        for r in col + 1..n {
            let factor = m[r][col] / piv;
            if factor != ZERO {
                for c in col..n {
                    let v = m[col][c];
                    m[r][c] -= factor * v;
                }
            }
        }
    }
    det
}

/// Homogeneous resultant of two forms of formal degree `d` via the
/// Sylvester matrix.
pub fn resultant(p: &[C], q: &[C]) -> C {
    let d = p.len() - 1;
    let n = 2 * d;
    let mut rows = Vec::with_capacity(n);
    for shift in 0..d {
        let mut row = vec![ZERO; n];
        row[shift..shift + d + 1].copy_from_slice(p);
        rows.push(row);
    }
    for shift in 0..d {
        let mut row = vec![ZERO; n];
        row[shift..shift + d + 1].copy_from_slice(q);
        rows.push(row);
    }
    determinant(rows)
}

fn chebyshev_coeffs(d: usize) -> Vec<C> {
    // P_0 = 2, P_1 = z, P_{k+1} = z P_k - P_{k-1}; lowest degree first here
    let mut prev = vec![2.0];
    let mut cur = vec![0.0, 1.0];
    if d == 0 {
        return vec![C::new(2.0, 0.0)];
    }
    for _ in 1..d {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, &c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = cur;
        cur = next;
    }
    cur.iter().rev().map(|&x| C::new(x, 0.0)).collect()
}

impl RationalMap {
    /// Builds a map from numerator and denominator coefficients (highest
    /// degree first; lists may have different lengths).
    pub fn from_coeffs(p: &[C], q: &[C]) -> Result<Self> {
        if p.iter().chain(q).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        let dp = leading_degree(p);
        let dq = leading_degree(q);
        let degree = match (dp, dq) {
            (None, _) | (_, None) => {
                return Err(Error::InvalidMap("numerator or denominator is zero".into()))
            }
            (Some(a), Some(b)) => a.max(b),
        };
        if degree < 2 {
            return Err(Error::InvalidMap(format!("degree {degree} < 2")));
        }
        if degree > MAX_DEGREE {
            return Err(Error::InvalidMap(format!(
                "degree {degree} exceeds supported maximum {MAX_DEGREE}"
            )));
        }
        let mut p = pad_to(p, degree + 1);
        let mut q = pad_to(q, degree + 1);
        let scale = p.iter().chain(&q).map(|c| c.norm()).fold(0.0, f64::max);
        for c in p.iter_mut().chain(q.iter_mut()) {
            *c /= scale;
        }
        let res = resultant(&p, &q);
        if res.norm() <= RESULTANT_THRESHOLD {
            return Err(Error::InvalidMap(format!(
                "numerator and denominator share a root (|resultant| = {:e})",
                res.norm()
            )));
        }
        let p_rev: Vec<C> = p.iter().rev().copied().collect();
        let q_rev: Vec<C> = q.iter().rev().copied().collect();
        Ok(RationalMap {
            dp: derivative(&p),
            dq: derivative(&q),
            dp_rev: derivative(&p_rev),
            dq_rev: derivative(&q_rev),
            p,
            q,
            p_rev,
            q_rev,
            degree,
            family: None,
        })
    }

    pub fn power(d: usize) -> Result<Self> {
        let mut p = vec![ZERO; d + 1];
        p[0] = ONE;
        let mut m = Self::from_coeffs(&p, &[ONE])?;
        m.family = Some(Family::Power(d));
        Ok(m)
    }

    /// The degree-`d` Chebyshev map normalized to preserve [-2, 2]
    /// (`z + 1/z` semiconjugate of `z^d`).
    pub fn chebyshev(d: usize) -> Result<Self> {
        let mut m = Self::from_coeffs(&chebyshev_coeffs(d), &[ONE])?;
        m.family = Some(Family::Chebyshev(d));
        Ok(m)
    }

    /// `z^2 + c`.
    pub fn quadratic(c: C) -> Result<Self> {
        let mut m = Self::from_coeffs(&[ONE, ZERO, c], &[ONE])?;
        m.family = Some(Family::Quadratic(c));
        Ok(m)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &[C] {
        &self.p
    }

    pub fn denominator(&self) -> &[C] {
        &self.q
    }

    pub fn family(&self) -> Option<Family> {
        self.family
    }

    /// True when the coefficients are exactly those of `z^d`.
    pub fn is_power_map(&self) -> bool {
        let d = self.degree;
        self.p[0] == ONE
            && self.p[1..].iter().all(|c| *c == ZERO)
            && self.q[..d].iter().all(|c| *c == ZERO)
            && self.q[d] == ONE
    }

    /// True when the coefficients match the normalized Chebyshev map.
    pub fn is_chebyshev(&self) -> bool {
        match Self::chebyshev(self.degree) {
            Ok(t) => self
                .p
                .iter()
                .chain(&self.q)
                .zip(t.p.iter().chain(&t.q))
                .all(|(a, b)| (a - b).norm() < 1e-14),
            Err(_) => false,
        }
    }

    /// Numerator and denominator values in the chart of `x`, with the
    /// chart coordinate.
    fn chart_values(&self, x: &SpherePoint) -> (Chart, C, C, C) {
        let chart = x.chart();
        let w = x.coord(chart);
        match chart {
            Chart::Zero => (chart, w, horner(&self.p, w), horner(&self.q, w)),
            Chart::Infinity => (chart, w, horner(&self.p_rev, w), horner(&self.q_rev, w)),
        }
    }

    /// Homogeneous image `(P(X), Q(X))` up to a nonzero scalar.
    pub fn apply(&self, x: &SpherePoint) -> SpherePoint {
        let (_, _, pv, qv) = self.chart_values(x);
        SpherePoint::from_homogeneous(pv, qv).unwrap_or(*x)
    }

    /// Unnormalized homogeneous image of a unit lift, `F(X)`, together with
    /// its Euclidean norm. The lift scale is `z1^d` or `z0^d` depending on
    /// the chart, folded back in so that the result is `F` on `X` itself.
    pub fn lift_norm(&self, x: &SpherePoint) -> f64 {
        let (chart, _, pv, qv) = self.chart_values(x);
        let base = match chart {
            Chart::Zero => x.z1(),
            Chart::Infinity => x.z0(),
        };
        let scale = base.norm().powi(self.degree as i32);
        (pv.norm_sqr() + qv.norm_sqr()).sqrt() * scale
    }

    pub fn iterate(&self, x: &SpherePoint, n: usize) -> SpherePoint {
        let mut y = *x;
        for _ in 0..n {
            y = self.apply(&y);
        }
        y
    }

    /// Wronskian `p'q - pq'` in a chart coordinate.
    fn wronskian_in_chart(&self, chart: Chart, w: C) -> (C, C, C) {
        let (p, dp, q, dq) = match chart {
            Chart::Zero => (&self.p, &self.dp, &self.q, &self.dq),
            Chart::Infinity => (&self.p_rev, &self.dp_rev, &self.q_rev, &self.dq_rev),
        };
        let pv = horner(p, w);
        let qv = horner(q, w);
        let wr = horner(dp, w) * qv - pv * horner(dq, w);
        (pv, qv, wr)
    }

    /// Norm of the differential of `f` at `x` for the chordal metric.
    pub fn spherical_derivative(&self, x: &SpherePoint) -> f64 {
        let chart = x.chart();
        let w = x.coord(chart);
        let (pv, qv, wr) = self.wronskian_in_chart(chart, w);
        wr.norm() * (1.0 + w.norm_sqr()) / (pv.norm_sqr() + qv.norm_sqr())
    }

    /// Iterate and spherical derivative of `f^n` by the chain rule.
    pub fn iterate_with_derivative(&self, x: &SpherePoint, n: usize) -> (SpherePoint, f64) {
        let mut y = *x;
        let mut deriv = 1.0;
        for _ in 0..n {
            deriv *= self.spherical_derivative(&y);
            y = self.apply(&y);
        }
        (y, deriv)
    }

    /// Complex derivative of `f` at `x` from coordinate `input` to
    /// coordinate `output`.
    pub fn chart_derivative(&self, x: &SpherePoint, input: Chart, output: Chart) -> C {
        let w = x.coord(input);
        let (pv, qv, wr) = self.wronskian_in_chart(input, w);
        match output {
            Chart::Zero => wr / (qv * qv),
            Chart::Infinity => -wr / (pv * pv),
        }
    }

    /// Critical points (roots of the homogeneous Wronskian, formal degree
    /// `2d - 2`) and the subset that is not periodic.
    pub fn critical_points(&self) -> Result<CriticalData> {
        let w = {
            let a = poly_mul(&self.dp, &self.q);
            let b = poly_mul(&self.p, &self.dq);
            let full: Vec<C> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            // the z^{2d-1} terms cancel identically
            full[1..].to_vec()
        };
        let roots = polysolve::roots(&w)?;
        let all: Vec<(SpherePoint, u32)> = roots.roots;
        let nonperiodic = all
            .iter()
            .filter(|(c, _)| self.return_time(c, MAX_PERIOD, PERIODIC_TOLERANCE).is_none())
            .map(|(c, _)| *c)
            .collect();
        Ok(CriticalData { all, nonperiodic })
    }

    /// Smallest `m <= max_period` with `d(f^m(x), x) < tol`.
    pub fn return_time(&self, x: &SpherePoint, max_period: usize, tol: f64) -> Option<usize> {
        let mut y = *x;
        for m in 1..=max_period {
            y = self.apply(&y);
            if y.distance(x) < tol {
                return Some(m);
            }
        }
        None
    }

    /// Local degree of `f` at `x` (1 + critical multiplicity).
    pub fn local_degree(&self, x: &SpherePoint, crit: &CriticalData) -> u32 {
        1 + crit
            .all
            .iter()
            .filter(|(c, _)| c.distance(x) < PERIODIC_TOLERANCE)
            .map(|(_, m)| *m)
            .sum::<u32>()
    }

    /// Equation `w1 p(t) - w0 q(t) = 0` whose roots are `f^{-1}(w)`.
    pub fn preimage_equation(&self, w: &SpherePoint) -> Vec<C> {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(&a, &b)| w.z1() * a - w.z0() * b)
            .collect()
    }

    /// Conjugate `M f M^{-1}` by a Möbius map given as a 2x2 matrix.
    pub fn conjugate(&self, m: [[C; 2]; 2]) -> Result<Self> {
        // M^{-1} up to scale
        let inv = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
        let d = self.degree;
        // substitute z -> (a z + b)/(c z + e): P(a z + b, c z + e) homogeneous
        let lin0 = [inv[0][0], inv[0][1]];
        let lin1 = [inv[1][0], inv[1][1]];
        let subst = |coeffs: &[C]| -> Vec<C> {
            let mut out = vec![ZERO; d + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                let k = d - i;
                // (lin0)^k (lin1)^(d-k)
                let mut term = vec![c];
                for _ in 0..k {
                    term = poly_mul(&term, &lin0);
                }
                for _ in 0..d - k {
                    term = poly_mul(&term, &lin1);
                }
                for (o, t) in out.iter_mut().zip(term) {
                    *o += t;
                }
            }
            out
        };
        let ps = subst(&self.p);
        let qs = subst(&self.q);
        let np: Vec<C> = ps.iter().zip(&qs).map(|(a, b)| m[0][0] * a + m[0][1] * b).collect();
        let nq: Vec<C> = ps.iter().zip(&qs).map(|(a, b)| m[1][0] * a + m[1][1] * b).collect();
        Self::from_coeffs(&np, &nq)
    }
}

fn apply_mobius(m: [[C; 2]; 2], x: &SpherePoint) -> SpherePoint {
    SpherePoint::from_homogeneous(
        m[0][0] * x.z0() + m[0][1] * x.z1(),
        m[1][0] * x.z0() + m[1][1] * x.z1(),
    )
    .expect("invertible")
}

/// Applies a Möbius matrix to a point.
pub fn mobius_apply(m: [[C; 2]; 2], x: &SpherePoint) -> SpherePoint {
    apply_mobius(m, x)
}

fn parse_coeff_list(s: &str) -> Result<Vec<C>> {
    s.split(',')
        .map(|t| match parse_complex(t.trim())? {
            Affine::Finite(z) => Ok(z),
            Affine::Infinity => Err(Error::Parse("infinite coefficient".into())),
        })
        .collect()
}

fn parse_degree(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad degree `{s}`")))
}

/// Parses `power d`, `chebyshev d`, `quadratic c` or
/// `coeffs p: a,b,.. q: c,d,..` (highest degree first).
pub fn parse_map(spec: &str) -> Result<RationalMap> {
    let spec = spec.trim();
    let (head, rest) = spec.split_once(char::is_whitespace).unwrap_or((spec, ""));
    match head {
        "power" => RationalMap::power(parse_degree(rest)?),
        "chebyshev" => RationalMap::chebyshev(parse_degree(rest)?),
        "quadratic" => match parse_complex(rest)? {
            Affine::Finite(c) => RationalMap::quadratic(c),
            Affine::Infinity => Err(Error::Parse("quadratic parameter must be finite".into())),
        },
        "coeffs" => {
            let rest = rest.trim();
            let p_part = rest
                .strip_prefix("p:")
                .ok_or_else(|| Error::Parse("expected `p:` after `coeffs`".into()))?;
            let (p_txt, q_txt) = p_part
                .split_once("q:")
                .ok_or_else(|| Error::Parse("expected `q:` list".into()))?;
            RationalMap::from_coeffs(&parse_coeff_list(p_txt)?, &parse_coeff_list(q_txt)?)
        }
        _ => Err(Error::Parse(format!("unknown map spec `{spec}`"))),
    }
}

impl fmt::Display for RationalMap {
    /// Re-parsable spec string.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Some(Family::Power(d)) => write!(f, "power {d}"),
            Some(Family::Chebyshev(d)) => write!(f, "chebyshev {d}"),
            Some(Family::Quadratic(c)) => {
                write!(f, "quadratic {}", SpherePoint::from_complex(c))
            }
            None => {
                let list = |v: &[C]| {
                    v.iter()
                        .map(|c| format!("{}{:+}i", c.re, c.im))
                        .collect::<Vec<_>>()
                        .join(",")
                };
                write!(f, "coeffs p: {} q: {}", list(&self.p), list(&self.q))
            }
        }
    }
}
