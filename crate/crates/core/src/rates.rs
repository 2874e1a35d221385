//! Error series `e_n`, rate fits and theorem-bound checkers.

use crate::dynamics::{classify_point, exceptional_set, postcritical_classify, super_attracting_set, CycleClass, PointKind};
use crate::error::{Error, Result};
use crate::measures::{pair_reference, preimage_measure_exact, ReferenceKind, ReferenceMeasure, REFERENCE_TOLERANCE};
use crate::observables::Observable;
use crate::potential::{pairing_for_observable, PotentialField};
use crate::ratmap::RationalMap;
use crate::sphere::SpherePoint;
use rayon::prelude::*;
use std::fmt;

/// First `n` used in fits and checks.
pub const N_MIN: usize = 3;
/// Entries with `err_n >= e_n / NOISE_RATIO` sit at the noise floor.
pub const NOISE_RATIO: f64 = 10.0;
/// Per-evaluation rounding model for pairings.
pub const ROUNDING: f64 = 1e-15;
pub const POSTCRITICAL_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Tree,
    PotentialOracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tree => "tree",
            Method::PotentialOracle => "potential-oracle",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(Method::Tree),
            "potential-oracle" | "potential" => Ok(Method::PotentialOracle),
            _ => Err(Error::Parse(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEntry {
    pub n: usize,
    pub e_n: f64,
    pub method: Method,
    pub err_n: f64,
}

impl RateEntry {
    /// Above the noise floor.
    pub fn admitted(&self) -> bool {
        self.err_n < self.e_n / NOISE_RATIO
    }
}

/// Where a series came from; absent for synthetic series.
#[derive(Debug, Clone)]
pub struct SeriesContext {
    pub map: RationalMap,
    pub a: SpherePoint,
    pub phi: Observable,
    pub reference: ReferenceKind,
}

#[derive(Debug, Clone)]
pub struct RateSeries {
    pub context: Option<SeriesContext>,
    pub entries: Vec<RateEntry>,
}

impl RateSeries {
    /// Series from raw `(n, e_n)` pairs with zero numerical error.
    pub fn synthetic(values: impl IntoIterator<Item = (usize, f64)>) -> Self {
        RateSeries {
            context: None,
            entries: values
                .into_iter()
                .map(|(n, e_n)| RateEntry {
                    n,
                    e_n,
                    method: Method::Tree,
                    err_n: 0.0,
                })
                .collect(),
        }
    }
}

/// Inputs that only some methods need.
#[derive(Debug, Clone, Copy)]
pub struct SeriesOptions<'a> {
    pub budget: u64,
    pub potential: Option<&'a PotentialField>,
    pub extended: bool,
}

fn tree_entry(
    f: &RationalMap,
    a: &SpherePoint,
    phi: &Observable,
    reference: (f64, f64),
    n: usize,
    opts: &SeriesOptions,
) -> Result<RateEntry> {
    let nu = preimage_measure_exact(f, a, n, opts.budget)?;
    let pairing = if opts.extended { nu.pair_extended(phi)? } else { nu.pair(phi)? };
    Ok(RateEntry {
        n,
        e_n: (pairing - reference.0).abs(),
        method: Method::Tree,
        err_n: reference.1 + ROUNDING * (phi.sup_norm + phi.holder_const),
    })
}

fn oracle_entry(p: &PotentialField, phi: &Observable, n: usize, opts: &SeriesOptions) -> Result<RateEntry> {
    let v = pairing_for_observable(p, n, phi, opts.extended)?;
    let d = p.map().degree() as f64;
    let mass = phi.ddc_mass().unwrap_or(0.0);
    Ok(RateEntry {
        n,
        e_n: v.abs(),
        method: Method::PotentialOracle,
        err_n: d.powi(-(n as i32)) * mass * (p.err + ROUNDING),
    })
}

/// `e_n = |<d^{-n}(f^n)^* delta_a - mu_f, phi>|` for each `n` in `ns`.
pub fn error_series(
    f: &RationalMap,
    a: &SpherePoint,
    phi: &Observable,
    reference: &ReferenceMeasure,
    ns: &[usize],
    method: Method,
    opts: SeriesOptions,
) -> Result<RateSeries> {
    let entries = match method {
        Method::Tree => {
            let r = pair_reference(reference, phi, REFERENCE_TOLERANCE)?;
            ns.par_iter()
                .map(|&n| tree_entry(f, a, phi, (r.value, r.error), n, &opts))
                .collect::<Result<Vec<_>>>()?
        }
        Method::PotentialOracle => {
            let p = opts
                .potential
                .ok_or_else(|| Error::InvalidArgument("potential-oracle needs a potential field".into()))?;
            if !p.a.same_as(a) {
                return Err(Error::InvalidArgument("potential field is built for another base point".into()));
            }
            ns.par_iter()
                .map(|&n| oracle_entry(p, phi, n, &opts))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(RateSeries {
        context: Some(SeriesContext {
            map: f.clone(),
            a: *a,
            phi: phi.clone(),
            reference: reference.kind.clone(),
        }),
        entries,
    })
}

/// `log e_n ≈ log C + beta log n - n log lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub c: f64,
    pub lambda: f64,
    pub beta: f64,
    pub residual_rms: f64,
    pub window: (usize, usize),
    pub used: usize,
    pub zero_excluded: usize,
}

/// Least squares by modified Gram-Schmidt.
fn least_squares(rows: &[[f64; 3]], y: &[f64]) -> Option<[f64; 3]> {
    let m = rows.len();
    let mut q: Vec<Vec<f64>> = (0..3).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut r = [[0.0; 3]; 3];
    for j in 0..3 {
        for i in 0..j {
            let dot: f64 = (0..m).map(|k| q[i][k] * q[j][k]).sum();
            r[i][j] = dot;
            for k in 0..m {
                q[j][k] -= dot * q[i][k];
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return None;
        }
        r[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qty: Vec<f64> = (0..3).map(|j| (0..m).map(|k| q[j][k] * y[k]).sum()).collect();
    let mut x = [0.0; 3];
    for j in (0..3).rev() {
        x[j] = (qty[j] - (j + 1..3).map(|i| r[j][i] * x[i]).sum::<f64>()) / r[j][j];
    }
    Some(x)
}

/// Fits the rate model over admitted entries with `n` in the window. The
/// window ends at the first noise-floor entry past `n_min`.
pub fn fit_rate(series: &RateSeries, window: Option<(usize, usize)>) -> Result<RateFit> {
    if let Some(ctx) = &series.context {
        if !ctx.reference.is_closed_form() {
            return Err(Error::Refused(
                "rate fits need a closed-form reference; deep-backward is Monte-Carlo".into(),
            ));
        }
    }
    let (n_min, n_max) = window.unwrap_or((N_MIN, usize::MAX));
    let mut entries: Vec<&RateEntry> = series.entries.iter().filter(|e| e.n >= n_min.max(1) && e.n <= n_max).collect();
    entries.sort_by_key(|e| e.n);
    let mut used = Vec::new();
    let mut zero_excluded = 0;
    for e in entries {
        if e.e_n == 0.0 {
            zero_excluded += 1;
            continue;
        }
        if !e.admitted() {
            break;
        }
        used.push(e);
    }
    if used.len() < 5 {
        return Err(Error::TooFewPoints(format!(
            "rate fit needs 5 admitted entries with e_n > 0, found {}",
            used.len()
        )));
    }
    let rows: Vec<[f64; 3]> = used.iter().map(|e| [1.0, (e.n as f64).ln(), -(e.n as f64)]).collect();
    let y: Vec<f64> = used.iter().map(|e| e.e_n.ln()).collect();
    let coef = least_squares(&rows, &y).ok_or_else(|| Error::Numeric("rank-deficient rate fit".into()))?;
    let rms = (rows
        .iter()
        .zip(&y)
        .map(|(r, yi)| (yi - (coef[0] * r[0] + coef[1] * r[1] + coef[2] * r[2])).powi(2))
        .sum::<f64>()
        / rows.len() as f64)
        .sqrt();
    Ok(RateFit {
        c: coef[0].exp(),
        beta: coef[1],
        lambda: coef[2].exp(),
        residual_rms: rms,
        window: (used[0].n, used[used.len() - 1].n),
        used: used.len(),
        zero_excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    VacuousPass,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::VacuousPass => "vacuous-pass",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub verdict: Verdict,
    /// Supremum (upper-bound checks) or infimum (lower bound).
    pub statistic: f64,
    pub per_n: Vec<(usize, f64)>,
    pub first_half_max: f64,
    pub second_half_max: f64,
    pub note: String,
}

fn halves(values: &[(usize, f64)]) -> (f64, f64) {
    let mid = values.len() / 2;
    let max = |s: &[(usize, f64)]| s.iter().map(|v| v.1).fold(0.0, f64::max);
    (max(&values[..mid]), max(&values[mid..]))
}

fn upper_report(values: Vec<(usize, f64)>, any_admitted: bool, what: &str) -> CheckReport {
    if !any_admitted || values.is_empty() {
        return CheckReport {
            verdict: Verdict::VacuousPass,
            statistic: values.iter().map(|v| v.1).fold(0.0, f64::max),
            per_n: values,
            first_half_max: 0.0,
            second_half_max: 0.0,
            note: format!("every e_n is at the noise floor; {what} holds vacuously"),
        };
    }
    let sup = values.iter().map(|v| v.1).fold(0.0, f64::max);
    let (first, second) = if values.len() >= 2 { halves(&values) } else { (sup, sup) };
    let stable = sup.is_finite() && second <= 2.0 * first;
    CheckReport {
        verdict: if stable { Verdict::Pass } else { Verdict::Fail },
        statistic: sup,
        per_n: values,
        first_half_max: first,
        second_half_max: second,
        note: if stable {
            format!("{what}: supremum finite and stabilizing")
        } else {
            format!("{what}: second-half maximum exceeds twice the first-half maximum")
        },
    }
}

fn check_window(series: &RateSeries) -> Vec<&RateEntry> {
    let mut v: Vec<&RateEntry> = series.entries.iter().filter(|e| e.n >= N_MIN).collect();
    v.sort_by_key(|e| e.n);
    v
}

/// `C_required(n) = e_n / ([1 + log 1/dist] n d^{-n} (‖phi‖_alpha + ‖dd^c phi‖))`.
pub fn check_thm_main(series: &RateSeries, d: usize, dist_sf: f64, alpha_const: f64, ddc_mass: f64) -> Result<CheckReport> {
    if !(dist_sf > 0.0) {
        return Err(Error::Refused(
            "a lies on a super-attracting cycle (d(a, S_f) = 0); the upper bound does not apply".into(),
        ));
    }
    let dist = dist_sf.min(1.0);
    let norm = alpha_const + ddc_mass;
    let entries = check_window(series);
    let any = entries.iter().any(|e| e.admitted());
    let values = entries
        .iter()
        .map(|e| {
            let envelope = (1.0 - dist.ln()) * e.n as f64 * (d as f64).powi(-(e.n as i32)) * norm;
            (e.n, e.e_n / envelope)
        })
        .collect();
    Ok(upper_report(values, any, "C_required"))
}

/// `e_n d^n / (‖dd^c phi‖_∞ + ‖phi‖_∞)`.
pub fn check_thm_gf(series: &RateSeries, d: usize, ddc_sup: f64, sup_norm: f64) -> Result<CheckReport> {
    let norm = ddc_sup + sup_norm;
    let entries = check_window(series);
    let any = entries.iter().any(|e| e.admitted());
    let values = entries
        .iter()
        .map(|e| (e.n, e.e_n * (d as f64).powi(e.n as i32) / norm))
        .collect();
    Ok(upper_report(values, any, "e_n d^n"))
}

/// `inf_{k >= n0} e_{mk} d^{mk}` over admitted entries.
pub fn check_lower_bound(series: &RateSeries, d: usize, m: usize, n0: usize) -> Result<CheckReport> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let mut entries: Vec<&RateEntry> = series.entries.iter().filter(|e| e.n % m == 0 && e.n / m >= n0).collect();
    entries.sort_by_key(|e| e.n);
    let admitted: Vec<(usize, f64)> = entries
        .iter()
        .filter(|e| e.admitted())
        .map(|e| (e.n, e.e_n * (d as f64).powi(e.n as i32)))
        .collect();
    if admitted.is_empty() || 2 * admitted.len() < entries.len() {
        return Ok(CheckReport {
            verdict: Verdict::Inconclusive,
            statistic: admitted.iter().map(|v| v.1).fold(f64::INFINITY, f64::min),
            per_n: admitted,
            first_half_max: 0.0,
            second_half_max: 0.0,
            note: format!(
                "{} of {} entries at the noise floor; no lower-bound verdict",
                entries.len() - entries.iter().filter(|e| e.admitted()).count(),
                entries.len()
            ),
        });
    }
    let inf = admitted.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let (first, second) = if admitted.len() >= 2 { halves(&admitted) } else { (inf, inf) };
    let stable = second <= 2.0 * first && first <= 2.0 * second.max(inf);
    let verdict = if inf > 0.0 && stable { Verdict::Pass } else { Verdict::Fail };
    Ok(CheckReport {
        verdict,
        statistic: inf,
        per_n: admitted,
        first_half_max: first,
        second_half_max: second,
        note: format!("inf e_n d^n over n >= {}", n0 * m),
    })
}

/// Hypotheses of the general upper bound. Returns `d(a, S_f)`.
pub fn gate_thm_main(f: &RationalMap, a: &SpherePoint) -> Result<f64> {
    if exceptional_set(f)?.contains(a) {
        return Err(Error::Refused(format!("{a} is exceptional; its preimage measures never move")));
    }
    let dist = super_attracting_set(f)?.distance_to(a);
    if dist < 1e-12 {
        return Err(Error::Refused(format!("{a} lies on a super-attracting cycle")));
    }
    Ok(dist.min(1.0))
}

/// Hypotheses of the geometrically finite `O(d^{-n})` bound.
pub fn gate_thm_gf(f: &RationalMap, a: &SpherePoint) -> Result<()> {
    if exceptional_set(f)?.contains(a) {
        return Err(Error::Refused(format!("{a} is exceptional")));
    }
    if let PointKind::Periodic(class, m) = classify_point(f, a)? {
        if matches!(class, CycleClass::SuperAttracting | CycleClass::Attracting | CycleClass::Parabolic) {
            return Err(Error::Refused(format!("{a} is a {class} periodic point of period {m}")));
        }
    }
    if !postcritical_classify(f, POSTCRITICAL_DEPTH)?.geometrically_finite_evidence {
        return Err(Error::Refused(format!("no evidence that `{f}` is geometrically finite")));
    }
    Ok(())
}

/// `a` must be repelling periodic or a preimage of a repelling cycle.
pub fn gate_lower(f: &RationalMap, a: &SpherePoint) -> Result<()> {
    match classify_point(f, a)? {
        PointKind::Periodic(CycleClass::Repelling, _) | PointKind::Preperiodic(CycleClass::Repelling) => Ok(()),
        other => Err(Error::Refused(format!(
            "{a} is not known to lie on the Julia set ({other:?})"
        ))),
    }
}
