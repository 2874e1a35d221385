//! Preimage measures, closed-form equilibrium measures and pairings.

use crate::error::{Error, Result};
use crate::numeric::{adaptive_integrate, stable_parallel_sum, Accumulator};
use crate::observables::Observable;
use crate::polysolve::{fiber, preimages};
use crate::ratmap::RationalMap;
use crate::sphere::{parse_complex, SpherePoint, POINT_TOLERANCE};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;

/// Default absolute tolerance for reference quadrature.
pub const REFERENCE_TOLERANCE: f64 = 1e-12;

/// Probability measure with finitely many atoms.
#[derive(Debug, Clone, Default)]
pub struct DiscreteMeasure {
    pub atoms: Vec<(SpherePoint, f64)>,
}

impl DiscreteMeasure {
    pub fn dirac(a: SpherePoint) -> Self {
        DiscreteMeasure {
            atoms: vec![(a, 1.0)],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    fn check_value(&self, i: usize, v: f64) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::SingularObservable {
                index: i,
                point: self.atoms[i].0.to_string(),
            })
        }
    }

    /// `sum w_i phi(x_i)`, bitwise independent of the thread count.
    pub fn pair(&self, phi: &Observable) -> Result<f64> {
        for (i, (x, _)) in self.atoms.iter().enumerate() {
            self.check_value(i, phi.eval(x))?;
        }
        Ok(stable_parallel_sum(self.atoms.len(), |i| {
            let (x, w) = &self.atoms[i];
            w * phi.eval(x)
        }))
    }

    /// Pairing with products and sums carried in double-double.
    pub fn pair_extended(&self, phi: &Observable) -> Result<f64> {
        let mut acc = Accumulator::new(true);
        for (i, (x, w)) in self.atoms.iter().enumerate() {
            acc.add_product(*w, self.check_value(i, phi.eval(x))?);
        }
        Ok(acc.value())
    }

    /// Pairing and its Monte-Carlo standard error, treating the atoms as
    /// equally weighted samples.
    pub fn pair_with_sigma(&self, phi: &Observable) -> Result<(f64, f64)> {
        let mean = self.pair(phi)?;
        let k = self.atoms.len() as f64;
        let var = stable_parallel_sum(self.atoms.len(), |i| {
            let (x, w) = &self.atoms[i];
            w * (phi.eval(x) - mean).powi(2)
        });
        Ok((mean, (var / k).sqrt()))
    }
}

fn merge_close_atoms(mut atoms: Vec<(SpherePoint, f64)>) -> Vec<(SpherePoint, f64)> {
    atoms.sort_by(|a, b| a.0.canonical_cmp(&b.0));
    let mut out: Vec<(SpherePoint, f64)> = Vec::with_capacity(atoms.len());
    for (x, w) in atoms {
        // sorted by real part: only a short window can hold a duplicate
        let mut merged = false;
        for (y, wy) in out.iter_mut().rev().take(8) {
            if y.distance(&x) < POINT_TOLERANCE {
                *wy += w;
                merged = true;
                break;
            }
        }
        if !merged {
            out.push((x, w));
        }
    }
    out
}

/// `d^{-n} (f^n)^* δ_a` from the full preimage fiber.
pub fn preimage_measure_exact(f: &RationalMap, a: &SpherePoint, n: usize, budget: u64) -> Result<DiscreteMeasure> {
    let level = fiber(f, a, n, budget)?;
    let scale = (f.degree() as f64).powi(n as i32);
    let atoms = level
        .points
        .into_iter()
        .zip(level.mult)
        .map(|(p, m)| (p, m as f64 / scale))
        .collect();
    Ok(DiscreteMeasure {
        atoms: merge_close_atoms(atoms),
    })
}

/// Generator for walk `walk` of experiment `experiment`.
pub fn walk_rng(seed: u64, experiment: u64, walk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ experiment.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(walk);
    rng
}

/// One backward random walk of length `n`, each step picking a preimage
/// with probability multiplicity / d.
pub fn backward_walk<R: Rng>(f: &RationalMap, a: &SpherePoint, n: usize, rng: &mut R) -> Result<Vec<SpherePoint>> {
    let d = f.degree() as u32;
    let mut path = Vec::with_capacity(n + 1);
    let mut w = *a;
    path.push(w);
    for _ in 0..n {
        let set = preimages(f, &w)?;
        let mut ticket = rng.gen_range(0..d);
        for (p, m) in &set.roots {
            if ticket < *m {
                w = *p;
                break;
            }
            ticket -= m;
        }
        path.push(w);
    }
    Ok(path)
}

/// `K` independent backward walks of length `n`, each atom of weight 1/K.
pub fn preimage_measure_sampled(
    f: &RationalMap,
    a: &SpherePoint,
    n: usize,
    k: usize,
    seed: u64,
    experiment: u64,
) -> Result<DiscreteMeasure> {
    if k == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let atoms = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = walk_rng(seed, experiment, i as u64);
            let path = backward_walk(f, a, n, &mut rng)?;
            Ok((*path.last().unwrap(), 1.0 / k as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteMeasure { atoms })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceKind {
    PowerCircle,
    ChebyshevArcsine,
    DeepBackward {
        base: SpherePoint,
        depth: usize,
        samples: usize,
        seed: u64,
    },
}

impl ReferenceKind {
    pub fn is_closed_form(&self) -> bool {
        !matches!(self, ReferenceKind::DeepBackward { .. })
    }
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceKind::PowerCircle => write!(f, "power-circle"),
            ReferenceKind::ChebyshevArcsine => write!(f, "chebyshev"),
            ReferenceKind::DeepBackward {
                base,
                depth,
                samples,
                seed,
            } => write!(f, "deep-backward(b={base}, n={depth}, K={samples}, seed={seed})"),
        }
    }
}

/// Parses `power-circle`, `chebyshev` or
/// `deep-backward(b=.., n=.., K=.., seed=..)`.
pub fn parse_reference(spec: &str) -> Result<ReferenceKind> {
    let spec = spec.trim();
    match spec {
        "power-circle" => return Ok(ReferenceKind::PowerCircle),
        "chebyshev" | "chebyshev-arcsine" => return Ok(ReferenceKind::ChebyshevArcsine),
        _ => {}
    }
    let body = spec
        .strip_prefix("deep-backward(")
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("unknown reference measure `{spec}`")))?;
    let mut base = None;
    let mut depth = None;
    let mut samples = None;
    let mut seed = None;
    for kv in body.split(',') {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{kv}`")))?;
        let v = v.trim();
        let bad = || Error::Parse(format!("bad value `{v}` for `{}`", k.trim()));
        match k.trim() {
            "b" => base = Some(SpherePoint::from_affine(parse_complex(v)?)?),
            "n" => depth = Some(v.parse().map_err(|_| bad())?),
            "K" => samples = Some(v.parse().map_err(|_| bad())?),
            "seed" => seed = Some(v.parse().map_err(|_| bad())?),
            other => return Err(Error::Parse(format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::Parse(format!("deep-backward needs `{k}`"));
    Ok(ReferenceKind::DeepBackward {
        base: base.ok_or_else(|| missing("b"))?,
        depth: depth.ok_or_else(|| missing("n"))?,
        samples: samples.ok_or_else(|| missing("K"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
    })
}

/// A handle that can pair observables against the equilibrium measure.
#[derive(Debug, Clone)]
pub struct ReferenceMeasure {
    pub kind: ReferenceKind,
    sample: Option<DiscreteMeasure>,
}

/// Experiment id used for the streams of deep-backward references.
const DEEP_BACKWARD_STREAM: u64 = 0xdeeb;

pub fn reference_measure(f: &RationalMap, kind: ReferenceKind) -> Result<ReferenceMeasure> {
    match &kind {
        ReferenceKind::PowerCircle if !f.is_power_map() => Err(Error::ReferenceMismatch(format!(
            "power-circle requires z^d, got `{f}`"
        ))),
        ReferenceKind::ChebyshevArcsine if !f.is_chebyshev() => Err(Error::ReferenceMismatch(format!(
            "chebyshev requires the normalized Chebyshev map, got `{f}`"
        ))),
        ReferenceKind::DeepBackward {
            base,
            depth,
            samples,
            seed,
        } => {
            let sample = preimage_measure_sampled(f, base, *depth, *samples, *seed, DEEP_BACKWARD_STREAM)?;
            Ok(ReferenceMeasure {
                kind,
                sample: Some(sample),
            })
        }
        _ => Ok(ReferenceMeasure { kind, sample: None }),
    }
}

/// Pairing against a reference, with an error bound (quadrature tolerance
/// for closed forms, Monte-Carlo standard error otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePairing {
    pub value: f64,
    pub error: f64,
    pub monte_carlo: bool,
}

pub fn pair_reference(nu: &ReferenceMeasure, phi: &Observable, tol: f64) -> Result<ReferencePairing> {
    match &nu.kind {
        ReferenceKind::PowerCircle => {
            let g = |t: f64| phi.eval(&SpherePoint::from_complex(Complex64::from_polar(1.0, t)));
            let v = adaptive_integrate(g, 0.0, 2.0 * PI, tol * 2.0 * PI)? / (2.0 * PI);
            Ok(ReferencePairing {
                value: v,
                error: tol,
                monte_carlo: false,
            })
        }
        ReferenceKind::ChebyshevArcsine => {
            // x = 2 cos t turns the arcsine density into dt / pi
            let g = |t: f64| phi.eval(&SpherePoint::from_re_im(2.0 * t.cos(), 0.0));
            let v = adaptive_integrate(g, 0.0, PI, tol * PI)? / PI;
            Ok(ReferencePairing {
                value: v,
                error: tol,
                monte_carlo: false,
            })
        }
        ReferenceKind::DeepBackward { .. } => {
            let sample = nu.sample.as_ref().expect("deep-backward reference carries samples");
            let (value, sigma) = sample.pair_with_sigma(phi)?;
            Ok(ReferencePairing {
                value,
                error: sigma,
                monte_carlo: true,
            })
        }
    }
}
