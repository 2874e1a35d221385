//! Test functions: truncated log-distance potentials, basin contrasts and
//! smooth chart functions, with their Hölder and dd^c norms.

use crate::error::{Error, Result};
use crate::numeric::gauss_legendre;
use crate::sphere::{fibonacci_grid, parse_complex, SpherePoint};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;

/// Nodes of the trapezoid rule on a dd^c circle.
pub const CIRCLE_NODES: usize = 256;
/// Gauss nodes in `u = rho^2` on a dd^c cap.
pub const CAP_RADIAL_NODES: usize = 16;
/// Angular nodes on a dd^c cap.
pub const CAP_ANGULAR_NODES: usize = 64;
/// Sample count for the finite-difference dd^c density bound.
pub const LAPLACIAN_SAMPLES: usize = 10_000;
/// Finite-difference step for the dd^c density.
pub const LAPLACIAN_STEP: f64 = 1e-4;
/// Safety factor applied to the sampled density bound.
pub const LAPLACIAN_SAFETY: f64 = 2.0;
/// Largest supported moment order.
pub const MAX_MOMENT: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableKind {
    Constant(f64),
    /// `x -> d(x, b)`.
    ChordalDistance(SpherePoint),
    /// `x -> log max(d(x, b), eps)`.
    LogDistance { b: SpherePoint, eps: f64 },
    /// Difference of two log-distance observables.
    BasinContrast {
        plus: SpherePoint,
        minus: SpherePoint,
        eps: f64,
    },
    /// `(|z|^2 - 1)/(|z|^2 + 1)`.
    Height,
    /// `Re (z/(1+|z|^2))^k`.
    ReMoment(u32),
    /// `Im (z/(1+|z|^2))^k`.
    ImMoment(u32),
}

/// One component of a signed dd^c measure.
#[derive(Debug, Clone, PartialEq)]
pub enum DdcPiece {
    /// Uniform measure of total mass `mass` (signed) on a chordal circle.
    Circle {
        center: SpherePoint,
        radius: f64,
        mass: f64,
    },
    /// `sign` times the area form restricted to a chordal disk (mass radius²).
    Cap {
        center: SpherePoint,
        radius: f64,
        sign: f64,
    },
    /// `sign` times the area form outside a chordal disk.
    CapComplement {
        center: SpherePoint,
        radius: f64,
        sign: f64,
    },
}

/// A signed measure made of circle and area pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDdc {
    pub pieces: Vec<DdcPiece>,
    pub plus_mass: f64,
    pub minus_mass: f64,
}

impl SignedDdc {
    /// Signed quadrature nodes representing the measure. Fails when a piece
    /// has global support (area form outside a disk).
    pub fn quadrature(&self) -> Result<Vec<(SpherePoint, f64)>> {
        let mut nodes = Vec::new();
        for piece in &self.pieces {
            match *piece {
                DdcPiece::Circle { center, radius, mass } => {
                    let w = mass / CIRCLE_NODES as f64;
                    for k in 0..CIRCLE_NODES {
                        let th = 2.0 * PI * k as f64 / CIRCLE_NODES as f64;
                        nodes.push((center.offset(radius, th), w));
                    }
                }
                DdcPiece::Cap { center, radius, sign } => {
                    // the area form is uniform in (rho^2, theta)
                    let (x, wx) = gauss_legendre(CAP_RADIAL_NODES);
                    let r2 = radius * radius;
                    for (xi, wi) in x.iter().zip(&wx) {
                        let u = 0.5 * r2 * (xi + 1.0);
                        let wu = 0.5 * r2 * wi;
                        for k in 0..CAP_ANGULAR_NODES {
                            let th = 2.0 * PI * (k as f64 + 0.5) / CAP_ANGULAR_NODES as f64;
                            nodes.push((center.offset(u.sqrt(), th), sign * wu / CAP_ANGULAR_NODES as f64));
                        }
                    }
                }
                DdcPiece::CapComplement { .. } => {
                    return Err(Error::InvalidArgument(
                        "dd^c has an area component with global support".into(),
                    ))
                }
            }
        }
        Ok(nodes)
    }

    pub fn is_balanced(&self) -> bool {
        (self.plus_mass - self.minus_mass).abs() <= 1e-15 * self.plus_mass.max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ddc {
    Zero,
    Signed(SignedDdc),
    /// `dd^c phi = h omega` with `|h| <= bound`.
    Density { bound: f64, estimated: bool },
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub kind: ObservableKind,
    /// Hölder exponent for which `holder_const` is valid.
    pub alpha: Option<f64>,
    pub holder_const: f64,
    /// False when `holder_const` is only an estimate.
    pub holder_exact: bool,
    pub ddc: Ddc,
    pub sup_norm: f64,
}

fn log_max_distance(x: &SpherePoint, b: &SpherePoint, eps: f64) -> f64 {
    x.distance(b).max(eps).ln()
}

/// `z/(1+|z|^2)` for a unit lift, i.e. `z0 conj(z1)`.
fn moment_base(x: &SpherePoint) -> Complex64 {
    x.z0() * x.z1().conj()
}

impl Observable {
    pub fn eval(&self, x: &SpherePoint) -> f64 {
        match &self.kind {
            ObservableKind::Constant(c) => *c,
            ObservableKind::ChordalDistance(b) => x.distance(b),
            ObservableKind::LogDistance { b, eps } => log_max_distance(x, b, *eps),
            ObservableKind::BasinContrast { plus, minus, eps } => {
                log_max_distance(x, plus, *eps) - log_max_distance(x, minus, *eps)
            }
            ObservableKind::Height => x.height(),
            ObservableKind::ReMoment(k) => moment_base(x).powu(*k).re,
            ObservableKind::ImMoment(k) => moment_base(x).powu(*k).im,
        }
    }

    /// Upper bound on the total variation of dd^c phi (`None` if unknown).
    pub fn ddc_mass(&self) -> Option<f64> {
        match &self.ddc {
            Ddc::Zero => Some(0.0),
            Ddc::Signed(s) => Some(s.plus_mass + s.minus_mass),
            Ddc::Density { bound, .. } => Some(*bound),
            Ddc::Unknown => None,
        }
    }

    /// `‖dd^c phi‖_∞` for smooth observables.
    pub fn ddc_sup(&self) -> Option<f64> {
        match &self.ddc {
            Ddc::Zero => Some(0.0),
            Ddc::Density { bound, .. } => Some(*bound),
            _ => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(
            self.kind,
            ObservableKind::Constant(_)
                | ObservableKind::Height
                | ObservableKind::ReMoment(_)
                | ObservableKind::ImMoment(_)
        )
    }

    /// The density `h` of `dd^c phi = h omega` for smooth observables.
    pub fn ddc_density(&self, x: &SpherePoint) -> Option<f64> {
        match self.kind {
            ObservableKind::Constant(_) => Some(0.0),
            ObservableKind::Height => Some(-4.0 * x.height()),
            ObservableKind::ReMoment(_) | ObservableKind::ImMoment(_) => {
                Some(fd_density(|y| self.eval(y), x, LAPLACIAN_STEP))
            }
            _ => None,
        }
    }
}

/// `h = (1+|w|^2)^2 Δφ / 2` by the five-point Laplacian in the chart of `x`.
pub fn fd_density<F: Fn(&SpherePoint) -> f64>(phi: F, x: &SpherePoint, h: f64) -> f64 {
    let chart = x.chart();
    let w = x.coord(chart);
    let at = |dw: Complex64| phi(&SpherePoint::from_coord(chart, w + dw));
    let lap = (at(Complex64::new(h, 0.0))
        + at(Complex64::new(-h, 0.0))
        + at(Complex64::new(0.0, h))
        + at(Complex64::new(0.0, -h))
        - 4.0 * phi(x))
        / (h * h);
    0.5 * (1.0 + w.norm_sqr()).powi(2) * lap
}

fn sampled_density_bound<F: Fn(&SpherePoint) -> f64>(phi: F) -> f64 {
    let max = fibonacci_grid(LAPLACIAN_SAMPLES)
        .iter()
        .map(|x| fd_density(&phi, x, LAPLACIAN_STEP).abs())
        .fold(0.0, f64::max);
    LAPLACIAN_SAFETY * max
}

pub fn constant(c: f64) -> Observable {
    Observable {
        kind: ObservableKind::Constant(c),
        alpha: Some(1.0),
        holder_const: 0.0,
        holder_exact: true,
        ddc: Ddc::Zero,
        sup_norm: c.abs(),
    }
}

pub fn chordal_distance(b: SpherePoint) -> Observable {
    Observable {
        kind: ObservableKind::ChordalDistance(b),
        alpha: Some(1.0),
        holder_const: 1.0,
        holder_exact: true,
        ddc: Ddc::Unknown,
        sup_norm: 1.0,
    }
}

fn log_distance_ddc(b: SpherePoint, eps: f64, sign: f64) -> Vec<DdcPiece> {
    vec![
        DdcPiece::Circle {
            center: b,
            radius: eps,
            mass: sign * (1.0 - eps * eps),
        },
        DdcPiece::CapComplement {
            center: b,
            radius: eps,
            sign: -sign,
        },
    ]
}

/// `log max(d(., b), eps)`; dd^c is `(1 - eps²)` times the uniform measure on
/// the eps-circle minus the area form outside the eps-disk.
pub fn make_log_distance(b: SpherePoint, eps: f64) -> Result<Observable> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, 1)")));
    }
    let mass = 1.0 - eps * eps;
    Ok(Observable {
        kind: ObservableKind::LogDistance { b, eps },
        alpha: Some(1.0),
        holder_const: 1.0 / eps,
        holder_exact: true,
        ddc: Ddc::Signed(SignedDdc {
            pieces: log_distance_ddc(b, eps, 1.0),
            plus_mass: mass,
            minus_mass: mass,
        }),
        sup_norm: eps.ln().abs(),
    })
}

/// Difference of the log-distance observables at `plus` and `minus`; its
/// dd^c is compactly supported in the two eps-disks.
pub fn make_basin_contrast(plus: SpherePoint, minus: SpherePoint, eps: f64) -> Result<Observable> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, 1)")));
    }
    if plus.distance(&minus) <= 2.0 * eps {
        return Err(Error::InvalidArgument(format!(
            "centres are {} apart, need more than 2 eps = {}",
            plus.distance(&minus),
            2.0 * eps
        )));
    }
    let mass = 1.0 - eps * eps;
    // area terms outside the two disks cancel, leaving the disks themselves
    let pieces = vec![
        DdcPiece::Circle {
            center: plus,
            radius: eps,
            mass,
        },
        DdcPiece::Cap {
            center: plus,
            radius: eps,
            sign: 1.0,
        },
        DdcPiece::Circle {
            center: minus,
            radius: eps,
            mass: -mass,
        },
        DdcPiece::Cap {
            center: minus,
            radius: eps,
            sign: -1.0,
        },
    ];
    Ok(Observable {
        kind: ObservableKind::BasinContrast { plus, minus, eps },
        alpha: Some(1.0),
        holder_const: 2.0 / eps,
        holder_exact: true,
        ddc: Ddc::Signed(SignedDdc {
            pieces,
            plus_mass: 1.0,
            minus_mass: 1.0,
        }),
        // both terms lie in [log eps, 0]
        sup_norm: eps.ln().abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartFunction {
    Height,
    ReMoment(u32),
    ImMoment(u32),
}

/// Smooth chart observables with a sampled dd^c density bound.
pub fn make_chart_c2(name: ChartFunction) -> Result<Observable> {
    let (kind, holder, sup) = match name {
        ChartFunction::Height => (ObservableKind::Height, 2.0, 1.0),
        ChartFunction::ReMoment(k) | ChartFunction::ImMoment(k) => {
            if k == 0 || k > MAX_MOMENT {
                return Err(Error::InvalidArgument(format!(
                    "moment order {k} outside 1..={MAX_MOMENT}"
                )));
            }
            let kind = if matches!(name, ChartFunction::ReMoment(_)) {
                ObservableKind::ReMoment(k)
            } else {
                ObservableKind::ImMoment(k)
            };
            // |d(w^k)| <= k |w|^{k-1} |dw| with |w| <= 1/2 and |dw| <= d
            (kind, k as f64 * 0.5f64.powi(k as i32 - 1), 0.5f64.powi(k as i32))
        }
    };
    let mut phi = Observable {
        kind,
        alpha: Some(1.0),
        holder_const: holder,
        holder_exact: true,
        ddc: Ddc::Unknown,
        sup_norm: sup,
    };
    let probe = phi.clone();
    phi.ddc = Ddc::Density {
        bound: sampled_density_bound(|x| probe.eval(x)),
        estimated: true,
    };
    Ok(phi)
}

/// Largest sampled Hölder quotient: half the pairs uniform, half at
/// distance at most 1e-3. A lower bound on the true constant.
pub fn holder_estimate(phi: &Observable, alpha: f64, n_samples: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for i in 0..n_samples {
        let x = SpherePoint::random(&mut rng);
        let y = if i % 2 == 0 {
            SpherePoint::random(&mut rng)
        } else {
            let r: f64 = rng.gen_range(0.0..1e-3);
            x.offset(r, rng.gen_range(0.0..2.0 * PI))
        };
        let d = x.distance(&y);
        if d > 0.0 {
            best = best.max((phi.eval(&x) - phi.eval(&y)).abs() / d.powf(alpha));
        }
    }
    Ok(best)
}

fn parse_args(body: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{kv}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn arg<'a>(args: &'a [(String, String)], key: &str) -> Result<&'a str> {
    args.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Parse(format!("missing argument `{key}`")))
}

fn point_arg(args: &[(String, String)], key: &str) -> Result<SpherePoint> {
    SpherePoint::from_affine(parse_complex(arg(args, key)?)?)
}

fn real_arg(args: &[(String, String)], key: &str) -> Result<f64> {
    let v = arg(args, key)?;
    v.parse()
        .map_err(|_| Error::Parse(format!("bad number `{v}` for `{key}`")))
}

fn int_arg(args: &[(String, String)], key: &str) -> Result<u32> {
    let v = arg(args, key)?;
    v.parse()
        .map_err(|_| Error::Parse(format!("bad integer `{v}` for `{key}`")))
}

/// Parses `height`, `moment(k=2)`, `im-moment(k=2)`, `log-dist(b=0, eps=0.1)`,
/// `basin(bp=0, bm=inf, eps=0.05)`, `constant(c=1)` or `distance(b=0)`.
pub fn parse_observable(spec: &str) -> Result<Observable> {
    let spec = spec.trim();
    let (name, body) = match spec.split_once('(') {
        Some((n, rest)) => {
            let body = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("missing `)` in `{spec}`")))?;
            (n.trim(), body)
        }
        None => (spec, ""),
    };
    let args = parse_args(body)?;
    match name {
        "height" => make_chart_c2(ChartFunction::Height),
        "moment" | "re-moment" => make_chart_c2(ChartFunction::ReMoment(int_arg(&args, "k")?)),
        "im-moment" => make_chart_c2(ChartFunction::ImMoment(int_arg(&args, "k")?)),
        "log-dist" => make_log_distance(point_arg(&args, "b")?, real_arg(&args, "eps")?),
        "basin" => make_basin_contrast(
            point_arg(&args, "bp")?,
            point_arg(&args, "bm")?,
            real_arg(&args, "eps")?,
        ),
        "constant" => Ok(constant(real_arg(&args, "c")?)),
        "distance" => Ok(chordal_distance(point_arg(&args, "b")?)),
        _ => Err(Error::Parse(format!("unknown observable `{spec}`"))),
    }
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableKind::Constant(c) => write!(f, "constant(c={c})"),
            ObservableKind::ChordalDistance(b) => write!(f, "distance(b={b})"),
            ObservableKind::LogDistance { b, eps } => write!(f, "log-dist(b={b}, eps={eps})"),
            ObservableKind::BasinContrast { plus, minus, eps } => {
                write!(f, "basin(bp={plus}, bm={minus}, eps={eps})")
            }
            ObservableKind::Height => write!(f, "height"),
            ObservableKind::ReMoment(k) => write!(f, "moment(k={k})"),
            ObservableKind::ImMoment(k) => write!(f, "im-moment(k={k})"),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn pt(re: f64, im: f64) -> SpherePoint {
        SpherePoint::from_re_im(re, im)
    }

    #[test]
    fn log_distance_examples() {
        let phi = make_log_distance(SpherePoint::ZERO, 0.1).unwrap();
        assert_relative_eq!(phi.eval(&SpherePoint::INFINITY), 0.0, epsilon = 1e-15);
        assert_relative_eq!(phi.eval(&SpherePoint::ZERO), 0.1f64.ln());
        assert!(holder_estimate(&phi, 1.0, 10_000, 1).unwrap() <= 10.0);
        assert!(make_log_distance(SpherePoint::ZERO, 1.0).is_err());
        let Ddc::Signed(s) = &phi.ddc else { panic!() };
        assert!(s.is_balanced());
        assert!(s.quadrature().is_err());
    }

    #[test]
    fn basin_examples() {
        let phi = make_basin_contrast(SpherePoint::ZERO, SpherePoint::INFINITY, 0.05).unwrap();
        for k in 0..16 {
            let x = SpherePoint::from_complex(Complex64::from_polar(1.0, k as f64));
            assert!(phi.eval(&x).abs() < 1e-15);
        }
        assert_relative_eq!(phi.eval(&SpherePoint::ZERO), 0.05f64.ln());
        let Ddc::Signed(s) = &phi.ddc else { panic!() };
        assert_eq!((s.plus_mass, s.minus_mass), (1.0, 1.0));
        let nodes = s.quadrature().unwrap();
        let total: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!(total.abs() < 1e-14);
        let plus: f64 = nodes.iter().map(|(_, w)| w.max(0.0)).sum();
        assert_relative_eq!(plus, 1.0, epsilon = 1e-13);
        assert!(make_basin_contrast(SpherePoint::ZERO, pt(0.05, 0.0), 0.05).is_err());
        assert!(holder_estimate(&phi, 1.0, 10_000, 2).unwrap() <= 2.0 / 0.05);
    }

    #[test]
    fn chart_examples() {
        let h = make_chart_c2(ChartFunction::Height).unwrap();
        assert_eq!(h.eval(&SpherePoint::ZERO), -1.0);
        assert_eq!(h.eval(&SpherePoint::INFINITY), 1.0);
        assert_relative_eq!(h.eval(&pt(2.0, 0.0)), 0.6, epsilon = 1e-15);
        // exact density is -4 height, so the sampled bound is about 2 * 4
        let Ddc::Density { bound, estimated } = h.ddc else { panic!() };
        assert!(estimated);
        assert!((bound - 8.0).abs() < 1e-3, "{bound}");
        let m = make_chart_c2(ChartFunction::ReMoment(2)).unwrap();
        let x = pt(0.5, 0.5);
        let w = Complex64::new(0.5, 0.5) / (1.0 + 0.5);
        assert_relative_eq!(m.eval(&x), (w * w).re, epsilon = 1e-15);
        assert!(make_chart_c2(ChartFunction::ReMoment(17)).is_err());
    }

    #[test]
    fn fd_density_matches_height_formula() {
        let h = make_chart_c2(ChartFunction::Height).unwrap();
        for x in fibonacci_grid(200) {
            let fd = fd_density(|y| h.eval(y), &x, LAPLACIAN_STEP);
            assert!((fd - h.ddc_density(&x).unwrap()).abs() < 1e-5);
        }
    }

    #[test]
    fn holder_examples() {
        assert_eq!(holder_estimate(&constant(3.0), 1.0, 1000, 1).unwrap(), 0.0);
        let d = chordal_distance(SpherePoint::ZERO);
        let est = holder_estimate(&d, 1.0, 10_000, 4).unwrap();
        assert!((0.9..=1.0 + 1e-12).contains(&est), "{est}");
    }

    #[test]
    fn observables_bounded_by_sup_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let list = [
            make_log_distance(pt(0.3, 0.1), 0.05).unwrap(),
            make_basin_contrast(SpherePoint::ZERO, SpherePoint::INFINITY, 0.05).unwrap(),
            make_basin_contrast(pt(0.3, 0.2), pt(-2.0, 1.0), 0.05).unwrap(),
            make_chart_c2(ChartFunction::Height).unwrap(),
            make_chart_c2(ChartFunction::ReMoment(3)).unwrap(),
            make_chart_c2(ChartFunction::ImMoment(1)).unwrap(),
        ];
        for _ in 0..100_000 / list.len() {
            let x = SpherePoint::random(&mut rng);
            for phi in &list {
                let v = phi.eval(&x);
                assert!(v.is_finite() && v.abs() <= phi.sup_norm + 1e-12);
            }
        }
        for phi in &list {
            let est = holder_estimate(phi, 1.0, 5000, 3).unwrap();
            assert!(est <= phi.holder_const * (1.0 + 1e-9), "{phi}: {est}");
        }
    }

    #[test]
    fn parse_round_trip() {
        for s in [
            "height",
            "moment(k=2)",
            "im-moment(k=3)",
            "log-dist(b=0+0i, eps=0.1)",
            "basin(bp=0+0i, bm=inf, eps=0.05)",
            "constant(c=1.5)",
        ] {
            let phi = parse_observable(s).unwrap();
            assert_eq!(phi.to_string(), s);
            assert_eq!(parse_observable(&phi.to_string()).unwrap().kind, phi.kind);
        }
        assert!(parse_observable("basin(bp=0)").is_err());
        assert!(parse_observable("wiggle").is_err());
    }
}
