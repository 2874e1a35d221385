//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria marked `known_defect` cannot pass as stated (see the README);
//! they are run and reported as FAIL without failing the target. Any other
//! FAIL exits nonzero.

use eqspeed_core::measures::{pair_reference, REFERENCE_TOLERANCE};
use eqspeed_core::observables::{make_basin_contrast, make_chart_c2, ChartFunction};
use eqspeed_core::polysolve::{fiber, DEFAULT_BUDGET};
use eqspeed_core::potential::pairing_for_observable;
use eqspeed_core::probes::{
    backward_shadow_orbit, bottcher_contraction, diameter_pullback, dpu_on_orbit, fit_diameter_law, koebe_ratio,
    DiameterMethod, DiameterSample,
};
use eqspeed_core::rates::{
    check_lower_bound, check_thm_gf, check_thm_main, gate_thm_gf, gate_thm_main, SeriesOptions, ROUNDING,
};
use eqspeed_core::{
    check_lemma_bdd, error_series, fit_rate, parse_map, parse_observable, preimage_measure_exact, reference_measure,
    super_attracting_set, Affine, Method, Observable, PotentialField, RateSeries, RationalMap, ReferenceKind,
    ReferenceMeasure, SpherePoint, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

struct Criterion {
    id: &'static str,
    limit: Option<Duration>,
    known_defect: bool,
    run: fn() -> Outcome,
}

fn pt(re: f64, im: f64) -> SpherePoint {
    SpherePoint::from_re_im(re, im)
}

fn square() -> RationalMap {
    parse_map("power 2").unwrap()
}

fn circle(f: &RationalMap) -> ReferenceMeasure {
    reference_measure(f, ReferenceKind::PowerCircle).unwrap()
}

fn opts() -> SeriesOptions<'static> {
    SeriesOptions {
        budget: DEFAULT_BUDGET,
        potential: None,
        extended: false,
    }
}

fn basin_series(a: &SpherePoint, ns: std::ops::RangeInclusive<usize>) -> (Observable, RateSeries) {
    let f = square();
    let phi = make_basin_contrast(SpherePoint::ZERO, SpherePoint::INFINITY, 0.05).unwrap();
    let ns: Vec<usize> = ns.collect();
    let s = error_series(&f, a, &phi, &circle(&f), &ns, Method::Tree, opts()).unwrap();
    (phi, s)
}

fn a1() -> Outcome {
    let level = fiber(&square(), &pt(3.0, 0.0), 16, DEFAULT_BUDGET).unwrap();
    let total = level.total_multiplicity() as f64;
    let mut angles: Vec<(f64, f64)> = level
        .points
        .iter()
        .zip(&level.mult)
        .map(|(p, &m)| {
            let Affine::Finite(z) = p.to_affine() else { panic!("fiber of 3 contains infinity") };
            (z.arg().rem_euclid(TAU) / TAU, m as f64 / total)
        })
        .collect();
    angles.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf = 0.0;
    let mut ks: f64 = 0.0;
    for (u, w) in &angles {
        ks = ks.max((u - cdf).abs());
        cdf += w;
        ks = ks.max((cdf - u).abs());
    }
    let bound = 2.0 * 2f64.powi(-16);
    Outcome {
        pass: level.len() == 1 << 16 && ks <= bound,
        detail: format!("KS = {ks:.3e} <= {bound:.3e}, {} atoms", level.len()),
    }
}

fn a2() -> Outcome {
    let f = square();
    let a = pt(1.0, 0.0);
    let (phi, series) = basin_series(&a, 3..=18);
    let dist = gate_thm_main(&f, &a).unwrap();
    let report = check_thm_main(&series, 2, dist, phi.holder_const, phi.ddc_mass().unwrap()).unwrap();
    let fit = fit_rate(&series, None);
    let stable = report.statistic.is_finite() && report.second_half_max <= 2.0 * report.first_half_max;
    let lambda_ok = matches!(&fit, Ok(r) if (1.95..=2.05).contains(&r.lambda));
    let max_e = series.entries.iter().map(|e| e.e_n).fold(0.0, f64::max);
    // same observable, generic base point: the rate itself is visible
    let (_, generic) = basin_series(&pt(2.0, 0.0), 3..=18);
    let generic_fit = fit_rate(&generic, None).map(|r| r.lambda);
    Outcome {
        pass: stable && lambda_ok,
        detail: format!(
            "C_required {} (sup {:.3e}); max e_n = {max_e:.2e}; lambda fit: {}; at a=2 lambda = {}",
            report.verdict,
            report.statistic,
            match &fit {
                Ok(r) => format!("{:.4}", r.lambda),
                Err(e) => e.to_string(),
            },
            generic_fit.map(|l| format!("{l:.6}")).unwrap_or_else(|e| e.to_string())
        ),
    }
}

fn a3() -> Outcome {
    let ns: Vec<usize> = (3..=18).collect();
    let f = square();
    let a = pt(1.0, 0.0);
    gate_thm_gf(&f, &a).unwrap();
    let h = make_chart_c2(ChartFunction::Height).unwrap();
    let s1 = error_series(&f, &a, &h, &circle(&f), &ns, Method::Tree, opts()).unwrap();
    let r1 = check_thm_gf(&s1, 2, h.ddc_sup().unwrap(), h.sup_norm).unwrap();

    let cheb = parse_map("chebyshev 2").unwrap();
    gate_thm_gf(&cheb, &a).unwrap();
    let m2 = parse_observable("moment(k=2)").unwrap();
    let arcsine = reference_measure(&cheb, ReferenceKind::ChebyshevArcsine).unwrap();
    let s2 = error_series(&cheb, &a, &m2, &arcsine, &ns, Method::Tree, opts()).unwrap();
    let r2 = check_thm_gf(&s2, 2, m2.ddc_sup().unwrap(), m2.sup_norm).unwrap();
    let ok = |v: Verdict| matches!(v, Verdict::Pass | Verdict::VacuousPass);
    Outcome {
        pass: ok(r1.verdict) && r2.verdict == Verdict::Pass,
        detail: format!(
            "z^2/height {} (sup {:.3e}); z^2-2/moment(2) {} (sup {:.4}, halves {:.4}/{:.4})",
            r1.verdict, r1.statistic, r2.verdict, r2.statistic, r2.first_half_max, r2.second_half_max
        ),
    }
}

fn a4() -> Outcome {
    let a = pt(1.0, 0.0);
    let (_, series) = basin_series(&a, 3..=18);
    let p = PotentialField::new(&square(), &a).unwrap();
    let rhs = 0.5 * (p.eval(&SpherePoint::ZERO) - p.eval(&SpherePoint::INFINITY)).abs();
    let lhs = series
        .entries
        .iter()
        .filter(|e| e.n >= 5)
        .map(|e| e.e_n * 2f64.powi(e.n as i32))
        .fold(f64::INFINITY, f64::min);
    let report = check_lower_bound(&series, 2, 1, 5).unwrap();
    Outcome {
        pass: rhs > 1e-9 && lhs >= rhs,
        detail: format!(
            "inf e_n 2^n = {lhs:.3e}, 0.5|g_1(0) - g_1(inf)| = {rhs:.3e} (potential err {:.1e}); checker {}",
            p.err, report.verdict
        ),
    }
}

fn a5() -> Outcome {
    let f = square();
    let nu = circle(&f);
    let observables = [
        make_basin_contrast(SpherePoint::ZERO, SpherePoint::INFINITY, 0.05).unwrap(),
        make_basin_contrast(pt(0.3, 0.2), pt(-2.0, 1.0), 0.05).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut checked = 0;
    for a in [pt(1.0, 0.0), pt(2.0, 0.0)] {
        let p = PotentialField::new(&f, &a).unwrap();
        for phi in &observables {
            let mu = pair_reference(&nu, phi, REFERENCE_TOLERANCE).unwrap();
            for n in 0..=14 {
                let tree = preimage_measure_exact(&f, &a, n, DEFAULT_BUDGET).unwrap().pair(phi).unwrap() - mu.value;
                let oracle = pairing_for_observable(&p, n, phi, false).unwrap();
                let err_tree = mu.error + ROUNDING * (phi.sup_norm + phi.holder_const);
                let err_oracle = 2f64.powi(-(n as i32)) * phi.ddc_mass().unwrap() * (p.err + ROUNDING);
                let tol = (err_tree + err_oracle).max(1e-9);
                let gap = (tree - oracle).abs();
                worst = worst.max(gap / tol);
                checked += 1;
                if gap > tol {
                    failures.push(format!("a={a} {phi} n={n}: {gap:.2e} > {tol:.2e}"));
                }
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{checked} pairings, worst gap/tolerance {worst:.2e}")
        } else {
            failures.join("; ")
        },
    }
}

fn a6() -> Outcome {
    let f = parse_map("quadratic i").unwrap();
    let crit = f.critical_points().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_ratio: f64 = 0.0;
    let mut bad = Vec::new();
    for k in 0..20 {
        let x = SpherePoint::random(&mut rng);
        let orbit = backward_shadow_orbit(&f, &x, 10_000, &mut rng).unwrap();
        let q: Vec<f64> = [100, 1_000, 10_000]
            .iter()
            .map(|&n| dpu_on_orbit(&crit, &orbit[orbit.len() - n..], 1).unwrap().q_hat)
            .collect();
        let lo = q.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = q.iter().cloned().fold(0.0, f64::max);
        let ratio = hi / lo;
        worst_ratio = worst_ratio.max(ratio);
        if !(hi.is_finite() && lo > 0.0 && ratio <= 3.0) {
            bad.push(format!("x#{k}: {q:?}"));
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!("worst max/min Q_hat = {worst_ratio:.3} over 20 points {}", bad.join("; ")),
    }
}

fn a7() -> Outcome {
    let f = square();
    let set = super_attracting_set(&f).unwrap();
    let zero = set.cycles.iter().find(|c| c.contains(&SpherePoint::ZERO, 1e-12)).unwrap();
    let fit = bottcher_contraction(&f, zero, set.delta.min(0.2), 8).unwrap();
    let l_ok = (fit.l - 2.0).abs() <= 0.05 * 2.0;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut samples = Vec::new();
    let mut skipped = 0;
    while samples.len() < 50 {
        let n = rng.gen_range(1..=8usize);
        let rho: f64 = rng.gen_range(0.5..2.0);
        let theta: f64 = rng.gen_range(0.0..TAU);
        let radius: f64 = 10f64.powf(rng.gen_range(-3.0..-1.5));
        let x = SpherePoint::from_complex(num_complex::Complex64::from_polar(rho.powf(0.5f64.powi(n as i32)), theta));
        let rep = diameter_pullback(&f, &x, n, radius, DEFAULT_BUDGET).unwrap();
        if rep.method != DiameterMethod::BoundaryLift {
            skipped += 1;
            continue;
        }
        samples.push(DiameterSample::from_report(&rep, &set));
    }
    let (train, holdout) = samples.split_at(25);
    let law = fit_diameter_law(train, DIAMETER_MARGIN).unwrap();
    let violations = holdout.iter().filter(|s| law.excess(s) > 1e-9).count();
    let worst = holdout.iter().map(|s| law.excess(s)).fold(f64::NEG_INFINITY, f64::max);
    Outcome {
        pass: l_ok && violations == 0,
        detail: format!(
            "Bottcher l = {:.4} (rms {:.3}); law log L = {:.4}, rho = {:.2}; holdout violations {violations}/25 (max excess {worst:.3e}); {skipped} fallback probes dropped",
            fit.l, fit.rms, law.log_l, law.rho
        ),
    }
}

/// Widening of the fitted `log L` before validation.
const DIAMETER_MARGIN: f64 = 0.05;

fn a8() -> Outcome {
    let f = square();
    let center = pt(2.0, 0.0);
    let radii = [0.3, 0.1, 0.03, 0.01, 0.003, 0.001];
    let lambdas: Vec<f64> = radii
        .iter()
        .map(|&r| koebe_ratio(&f, &center, r, 6, 256, 0, DEFAULT_BUDGET).unwrap().lambda_hat)
        .collect();
    let bound = lambdas.iter().cloned().fold(0.0, f64::max);
    let monotone = lambdas.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let small = *lambdas.last().unwrap() <= 1.01;

    let p = PotentialField::new(&f, &pt(1.0, 0.0)).unwrap();
    let h = make_chart_c2(ChartFunction::Height).unwrap();
    let nu = circle(&f);
    let mut min_slack = f64::INFINITY;
    let mut lemma_ok = true;
    for n in 0..=12 {
        let r = check_lemma_bdd(&p, 3.0, &h, n, &nu, DEFAULT_BUDGET).unwrap();
        lemma_ok &= r.holds && r.slack > 0.0;
        min_slack = min_slack.min(r.slack);
    }
    Outcome {
        pass: bound.is_finite() && monotone && small && lemma_ok,
        detail: format!(
            "lambda_hat by radius {lambdas:.4?} (bound {bound:.4}); truncated-potential bound min slack {min_slack:.3e}"
        ),
    }
}

fn a9() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_eqspeed");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/z2_exceptional.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut codes = Vec::new();
    for t in ["thm-main", "thm-gf", "lower"] {
        let st = Command::new(bin)
            .args(["rate", "check", t, config.to_str().unwrap(), "--output", out])
            .output()
            .unwrap();
        codes.push(st.status.code());
    }
    let run = Command::new(bin)
        .args(["rate", "run", config.to_str().unwrap(), "--output", out])
        .output()
        .unwrap();
    let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap_or_default();
    let values: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    let constant = !values.is_empty() && values.iter().all(|v| *v == values[0]);
    Outcome {
        pass: codes.iter().all(|c| *c == Some(4)) && run.status.success() && constant,
        detail: format!(
            "checker exit codes {codes:?}; e_n over {} values constant: {constant} ({})",
            values.len(),
            values.first().unwrap_or(&"-")
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: "A1", limit: Some(secs(10)), known_defect: false, run: a1 },
        Criterion { id: "A2", limit: Some(secs(120)), known_defect: true, run: a2 },
        Criterion { id: "A3", limit: Some(secs(180)), known_defect: false, run: a3 },
        Criterion { id: "A4", limit: Some(secs(120)), known_defect: true, run: a4 },
        Criterion { id: "A5", limit: None, known_defect: false, run: a5 },
        Criterion { id: "A6", limit: Some(secs(60)), known_defect: false, run: a6 },
        Criterion { id: "A7", limit: Some(secs(120)), known_defect: false, run: a7 },
        Criterion { id: "A8", limit: Some(secs(60)), known_defect: false, run: a8 },
        Criterion { id: "A9", limit: None, known_defect: false, run: a9 },
    ];
    let mut blocking = 0;
    for c in &criteria {
        let start = Instant::now();
        let o = (c.run)();
        let elapsed = start.elapsed();
        let in_time = c.limit.map_or(true, |l| elapsed <= l);
        let pass = o.pass && in_time;
        let tag = if pass { "PASS" } else { "FAIL" };
        let note = match (pass, c.known_defect) {
            (false, true) => " [known defect, not blocking]",
            _ => "",
        };
        let time = match c.limit {
            Some(l) => format!("{:.1}s / {}s", elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.1}s", elapsed.as_secs_f64()),
        };
        println!("{} {tag} ({time}) {}{note}", c.id, o.detail);
        if !pass && !c.known_defect {
            blocking += 1;
        }
    }
    if blocking > 0 {
        println!("{blocking} blocking criteria failed");
        std::process::exit(1);
    }
}
