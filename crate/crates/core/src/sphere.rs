//! Points of the Riemann sphere in normalized homogeneous coordinates and
//! the chordal metric (normalized so the sphere has diameter 1).

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Chordal distance below which two points are considered identical.
pub const POINT_TOLERANCE: f64 = 1e-10;

/// |z1| below which `to_affine` reports infinity.
pub const INFINITY_THRESHOLD: f64 = 1e-14;

/// A point `[z0 : z1]` with `|z0|^2 + |z1|^2 = 1`.
#[derive(Debug, Clone, Copy)]
pub struct SpherePoint {
    z0: Complex64,
    z1: Complex64,
}

/// Affine coordinate of a point, or the point at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Affine {
    Finite(Complex64),
    Infinity,
}

/// One of the two standard charts: `Zero` uses z0/z1, `Infinity` uses z1/z0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Zero,
    Infinity,
}

impl SpherePoint {
    pub const ZERO: SpherePoint = SpherePoint {
        z0: Complex64::new(0.0, 0.0),
        z1: Complex64::new(1.0, 0.0),
    };
    pub const INFINITY: SpherePoint = SpherePoint {
        z0: Complex64::new(1.0, 0.0),
        z1: Complex64::new(0.0, 0.0),
    };

    /// Normalizes an arbitrary nonzero homogeneous pair.
    ///
    /// Returns `None` for `(0, 0)` or non-finite input.
    pub fn from_homogeneous(z0: Complex64, z1: Complex64) -> Option<Self> {
        let s = z0.norm().max(z1.norm());
        if !(s.is_finite() && s > 0.0) {
            return None;
        }
        // scale first so the squares cannot overflow or underflow
        let (a, b) = (z0 / s, z1 / s);
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        Some(SpherePoint { z0: a / n, z1: b / n })
    }

    pub fn from_affine(z: Affine) -> Result<Self> {
        match z {
            Affine::Infinity => Ok(Self::INFINITY),
            Affine::Finite(z) => {
                if z.re.is_nan() || z.im.is_nan() {
                    return Err(Error::InvalidArgument("NaN affine coordinate".into()));
                }
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Ok(Self::INFINITY);
                }
                Ok(Self::from_homogeneous(z, Complex64::new(1.0, 0.0)).unwrap_or(Self::INFINITY))
            }
        }
    }

    /// Shorthand for a finite affine point.
    pub fn from_complex(z: Complex64) -> Self {
        Self::from_affine(Affine::Finite(z)).expect("finite coordinate")
    }

    pub fn from_re_im(re: f64, im: f64) -> Self {
        Self::from_complex(Complex64::new(re, im))
    }

    pub fn z0(&self) -> Complex64 {
        self.z0
    }

    pub fn z1(&self) -> Complex64 {
        self.z1
    }

    pub fn to_affine(&self) -> Affine {
        if self.z1.norm() < INFINITY_THRESHOLD {
            Affine::Infinity
        } else {
            Affine::Finite(self.z0 / self.z1)
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self.to_affine(), Affine::Infinity)
    }

    /// The chart in which this point has coordinate of modulus at most 1.
    pub fn chart(&self) -> Chart {
        if self.z0.norm() <= self.z1.norm() {
            Chart::Zero
        } else {
            Chart::Infinity
        }
    }

    /// Coordinate of the point in the given chart.
    pub fn coord(&self, chart: Chart) -> Complex64 {
        match chart {
            Chart::Zero => self.z0 / self.z1,
            Chart::Infinity => self.z1 / self.z0,
        }
    }

    pub fn from_coord(chart: Chart, w: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let p = match chart {
            Chart::Zero => Self::from_homogeneous(w, one),
            Chart::Infinity => Self::from_homogeneous(one, w),
        };
        p.unwrap_or(match chart {
            Chart::Zero => Self::INFINITY,
            Chart::Infinity => Self::ZERO,
        })
    }

    pub fn distance(&self, other: &SpherePoint) -> f64 {
        chordal_distance(self, other)
    }

    /// Same point up to the point-identity tolerance.
    pub fn same_as(&self, other: &SpherePoint) -> bool {
        self.distance(other) < POINT_TOLERANCE
    }

    /// Height coordinate `(|z|^2 - 1)/(|z|^2 + 1)` of the unit-sphere embedding.
    pub fn height(&self) -> f64 {
        self.z0.norm_sqr() - self.z1.norm_sqr()
    }

    /// Embedding into the unit sphere of R^3 (the chordal distance is half
    /// the Euclidean distance there).
    pub fn to_r3(&self) -> [f64; 3] {
        let w = 2.0 * self.z0 * self.z1.conj();
        [w.re, w.im, self.height()]
    }

    pub fn from_r3(v: [f64; 3]) -> Self {
        let h = v[2].clamp(-1.0, 1.0);
        let phase = Complex64::new(v[0], v[1]);
        let r0 = ((1.0 + h) / 2.0).sqrt();
        let r1 = ((1.0 - h) / 2.0).sqrt();
        let unit = if phase.norm() > 0.0 {
            phase / phase.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        Self::from_homogeneous(unit * r0, Complex64::new(r1, 0.0)).expect("unit vector")
    }

    /// Uniform sample with respect to the spherical area.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let h: f64 = rng.gen_range(-1.0..=1.0);
        let theta: f64 = rng.gen_range(0.0..2.0 * PI);
        let r0 = ((1.0 + h) / 2.0).sqrt();
        let r1 = ((1.0 - h) / 2.0).sqrt();
        Self::from_homogeneous(Complex64::from_polar(r0, theta), Complex64::new(r1, 0.0))
            .expect("unit vector")
    }

    /// Point at chordal distance `rho` from `self` in direction `theta`.
    pub fn offset(&self, rho: f64, theta: f64) -> SpherePoint {
        let rho = rho.clamp(0.0, 1.0);
        let local = SpherePoint {
            z0: Complex64::from_polar(rho, theta),
            z1: Complex64::new((1.0 - rho * rho).max(0.0).sqrt(), 0.0),
        };
        Rotation::moving_zero_to(self).apply(&local)
    }

    /// Total order on affine coordinates (finite points first, then
    /// infinity); used to canonicalize point lists.
    pub fn canonical_cmp(&self, other: &SpherePoint) -> Ordering {
        match (self.to_affine(), other.to_affine()) {
            (Affine::Infinity, Affine::Infinity) => Ordering::Equal,
            (Affine::Infinity, _) => Ordering::Greater,
            (_, Affine::Infinity) => Ordering::Less,
            (Affine::Finite(a), Affine::Finite(b)) => {
                a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
            }
        }
    }
}

impl PartialEq for SpherePoint {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

/// `|z0(p) z1(q) - z1(p) z0(q)|` on unit representatives.
pub fn chordal_distance(p: &SpherePoint, q: &SpherePoint) -> f64 {
    (p.z0 * q.z1 - p.z1 * q.z0).norm().min(1.0)
}

/// A unitary (SU(2)) change of homogeneous coordinates; acts on the sphere
/// as a rotation, so it preserves chordal distances.
#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    m: [[Complex64; 2]; 2],
}

impl Rotation {
    /// `[[a, -conj(b)], [b, conj(a)]]` with `|a|^2 + |b|^2 = 1`.
    pub fn from_pair(a: Complex64, b: Complex64) -> Self {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (a, b) = (a / n, b / n);
        Rotation {
            m: [[a, -b.conj()], [b, a.conj()]],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        Self::from_pair(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]) + 1e-3)
    }

    /// A rotation sending `[0:1]` to `c`.
    pub fn moving_zero_to(c: &SpherePoint) -> Self {
        Rotation {
            m: [[c.z1.conj(), c.z0], [-c.z0.conj(), c.z1]],
        }
    }

    pub fn apply(&self, p: &SpherePoint) -> SpherePoint {
        let z0 = self.m[0][0] * p.z0 + self.m[0][1] * p.z1;
        let z1 = self.m[1][0] * p.z0 + self.m[1][1] * p.z1;
        SpherePoint::from_homogeneous(z0, z1).expect("unitary image is nonzero")
    }

    pub fn inverse(&self) -> Self {
        let m = self.m;
        Rotation {
            m: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]],
        }
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        self.m
    }
}

/// Quasi-uniform Fibonacci grid of `n` points on the sphere.
pub fn fibonacci_grid(n: usize) -> Vec<SpherePoint> {
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let h = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let theta = golden * i as f64;
            let r0 = ((1.0 + h) / 2.0).sqrt();
            let r1 = ((1.0 - h) / 2.0).sqrt();
            SpherePoint::from_homogeneous(Complex64::from_polar(r0, theta), Complex64::new(r1, 0.0))
                .expect("unit vector")
        })
        .collect()
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_affine() {
            Affine::Infinity => write!(f, "inf"),
            Affine::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}

/// Parses `inf`, `3`, `-2.5i`, `i`, `1+2i`, `1e-3-4.5e2i`.
pub fn parse_complex(s: &str) -> Result<Affine> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Parse(format!("malformed complex number `{s}`"));
    if t.is_empty() {
        return Err(bad());
    }
    let lower = t.to_ascii_lowercase();
    if lower == "inf" || lower == "infinity" || lower == "∞" {
        return Ok(Affine::Infinity);
    }
    if !lower.ends_with('i') {
        let re = f64::from_str(&lower).map_err(|_| bad())?;
        return Ok(Affine::Finite(Complex64::new(re, 0.0)));
    }
    let body = &lower[..lower.len() - 1];
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && bytes[k - 1] != b'e' {
            split = Some(k);
            break;
        }
    }
    let parse_im = |txt: &str| -> Result<f64> {
        match txt {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => f64::from_str(txt).map_err(|_| bad()),
        }
    };
    let (re, im) = match split {
        Some(k) => (
            f64::from_str(&body[..k]).map_err(|_| bad())?,
            parse_im(&body[k..])?,
        ),
        None => (0.0, parse_im(body)?),
    };
    if re.is_nan() || im.is_nan() {
        return Err(bad());
    }
    Ok(Affine::Finite(Complex64::new(re, im)))
}

impl FromStr for SpherePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpherePoint::from_affine(parse_complex(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chordal_examples() {
        let zero = SpherePoint::ZERO;
        let inf = SpherePoint::INFINITY;
        let one = SpherePoint::from_re_im(1.0, 0.0);
        assert_relative_eq!(chordal_distance(&zero, &inf), 1.0);
        assert_eq!(chordal_distance(&one, &one), 0.0);
        assert_relative_eq!(chordal_distance(&zero, &one), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
    }

    #[test]
    fn affine_examples() {
        let p = SpherePoint::from_re_im(3.0, 4.0);
        let s = 26f64.sqrt();
        assert_relative_eq!(p.z0().re, 3.0 / s, epsilon = 1e-15);
        assert_relative_eq!(p.z0().im, 4.0 / s, epsilon = 1e-15);
        assert_relative_eq!(p.z1().re, 1.0 / s, epsilon = 1e-15);
        assert_eq!(SpherePoint::ZERO.to_affine(), Affine::Finite(Complex64::new(0.0, 0.0)));
        assert_eq!(SpherePoint::INFINITY.to_affine(), Affine::Infinity);
        assert!(SpherePoint::from_affine(Affine::Finite(Complex64::new(f64::NAN, 0.0))).is_err());
    }

    #[test]
    fn parse_and_display() {
        for (s, want) in [
            ("inf", Affine::Infinity),
            ("3", Affine::Finite(Complex64::new(3.0, 0.0))),
            ("i", Affine::Finite(Complex64::new(0.0, 1.0))),
            ("-i", Affine::Finite(Complex64::new(0.0, -1.0))),
            ("1-2.5i", Affine::Finite(Complex64::new(1.0, -2.5))),
            ("1e-3+2e2i", Affine::Finite(Complex64::new(1e-3, 200.0))),
            ("-0.25", Affine::Finite(Complex64::new(-0.25, 0.0))),
        ] {
            assert_eq!(parse_complex(s).unwrap(), want, "{s}");
        }
        assert!(parse_complex("abc").is_err());
        let p = SpherePoint::from_re_im(1.5, -2.0);
        let q: SpherePoint = p.to_string().parse().unwrap();
        assert!(p.same_as(&q));
        assert_eq!(SpherePoint::INFINITY.to_string(), "inf");
    }

    #[test]
    fn offset_lands_at_requested_distance() {
        let c = SpherePoint::from_re_im(0.3, -2.0);
        for k in 0..16 {
            let q = c.offset(0.2, k as f64);
            assert_relative_eq!(c.distance(&q), 0.2, epsilon = 1e-13);
        }
    }

    #[test]
    fn random_pairs_metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let (p, q, r) = (
                SpherePoint::random(&mut rng),
                SpherePoint::random(&mut rng),
                SpherePoint::random(&mut rng),
            );
            let d = p.distance(&q);
            assert!((0.0..=1.0).contains(&d));
            assert_eq!(d, q.distance(&p));
            assert!(p.distance(&r) <= d + q.distance(&r) + 1e-12);
        }
    }

    #[test]
    fn rotations_preserve_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let u = Rotation::random(&mut rng);
            let (p, q) = (SpherePoint::random(&mut rng), SpherePoint::random(&mut rng));
            let d0 = p.distance(&q);
            let d1 = u.apply(&p).distance(&u.apply(&q));
            assert!((d0 - d1).abs() < 1e-10);
            assert!(u.inverse().apply(&u.apply(&p)).same_as(&p));
        }
    }

    proptest! {
        #[test]
        fn affine_round_trip(re in -1e6f64..1e6, im in -1e6f64..1e6) {
            let p = SpherePoint::from_re_im(re, im);
            let q = SpherePoint::from_affine(p.to_affine()).unwrap();
            prop_assert!(p.distance(&q) < 1e-10);
            let n = p.z0().norm_sqr() + p.z1().norm_sqr();
            prop_assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
