//! Subcommand definitions and their implementations.

use crate::config::{ConfigError, ExperimentConfig, Precision, Resolved};
use crate::experiments::EXPERIMENTS;
use crate::output::{self, point_fields, point_from_fields, write_rows};
use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use eqspeed_core::dynamics::{detect_cycle, postcritical_classify, CycleInfo};
use eqspeed_core::measures::walk_rng;
use eqspeed_core::polysolve::DEFAULT_BUDGET;
use eqspeed_core::potential::LemmaReport;
use eqspeed_core::probes::{
    backward_shadow_orbit, bottcher_contraction, diameter_pullback, dpu_on_orbit, dpu_trimmed_sum, koebe_ratio,
};
use eqspeed_core::ratmap::MAX_PERIOD;
use eqspeed_core::rates::{
    check_lower_bound, check_thm_gf, check_thm_main, gate_lower, gate_thm_gf, gate_thm_main, CheckReport, SeriesContext,
    SeriesOptions, POSTCRITICAL_DEPTH,
};
use eqspeed_core::sphere::parse_complex;
use eqspeed_core::{
    check_lemma_bdd, error_series, exceptional_set, fit_rate, parse_map, parse_observable, preimage_measure_exact,
    preimage_measure_sampled, preimage_tree, reference_measure, roots, super_attracting_set, Error, Method,
    PotentialField, RateEntry, RateFit, RateSeries, RationalMap, SpherePoint, Verdict,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

/// Exit statuses.
pub mod exit {
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const BUDGET: i32 = 3;
    pub const REFUSED: i32 = 4;
    pub const NUMERIC: i32 = 5;
    pub const CHECK_FAILED: i32 = 6;
}

/// A checker ran to completion and its verdict was `fail`.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "check failed: {}", self.0)
    }
}

impl std::error::Error for CheckFailed {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Parse(_) | Error::InvalidMap(_) | Error::InvalidArgument(_) => exit::PARSE,
                Error::Budget { .. } => exit::BUDGET,
                Error::Refused(_) | Error::ReferenceMismatch(_) => exit::REFUSED,
                _ => exit::NUMERIC,
            };
        }
        if cause.is::<ConfigError>() || cause.is::<csv::Error>() {
            return exit::PARSE;
        }
        if cause.is::<CheckFailed>() {
            return exit::CHECK_FAILED;
        }
        if cause.is::<std::io::Error>() {
            return exit::IO;
        }
    }
    exit::IO
}

#[derive(Debug, Parser)]
#[command(name = "eqspeed", version, about = "Preimage equidistribution experiments for rational maps")]
pub struct Cli {
    /// Use double-double accumulation for pairings.
    #[arg(long, global = true)]
    pub precision: Option<Precision>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cycles, super-attracting data, exceptional set and postcritical evidence.
    Classify {
        #[arg(long)]
        map: String,
        /// CSV file for the structured table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Backward tree a, f^-1(a), ..., f^-n(a) as CSV.
    Preimages {
        #[arg(long)]
        map: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The measure d^-n (f^n)^* delta_a, exact or sampled.
    Measure {
        #[arg(long)]
        map: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        n: usize,
        /// Number of backward walks; exact tree when absent.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Observable to pair against; the value goes to stderr.
        #[arg(long)]
        pair: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate g_a on the points of a CSV file (columns re, im, is_inf).
    Potential {
        #[arg(long)]
        map: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncated-potential bound for n = 0..=n_max.
    PotentialCheck {
        #[arg(long)]
        map: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        observable: String,
        #[arg(long)]
        reference: String,
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Geometric probes.
    #[command(subcommand)]
    Probe(Probe),
    /// Error series, fits and theorem checks.
    #[command(subcommand)]
    Rate(Rate),
    /// The built-in acceptance experiments.
    ListExperiments,
}

#[derive(Debug, Subcommand)]
pub enum Probe {
    /// Trimmed sum of -log psi along an orbit of length n.
    Dpu {
        #[arg(long)]
        map: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        n: usize,
        /// Number of largest terms removed.
        #[arg(long, default_value_t = 1)]
        removed: usize,
        /// Use a backward shadow orbit ending at x instead of the forward orbit.
        #[arg(long)]
        backward: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diameter of an inverse image of B(f^n x, radius).
    Diameter {
        #[arg(long)]
        map: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Contraction exponent at every super-attracting cycle.
    Bottcher {
        #[arg(long)]
        map: String,
        /// Ball radius; defaults to min(delta, 0.2).
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distortion of an inverse branch of f^n on B(center, radius).
    Koebe {
        #[arg(long)]
        map: String,
        #[arg(long)]
        center: String,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        branch: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config file.
    pub config: PathBuf,
    /// Output directory; overrides `[run] output`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Reuse a series CSV (n, e_n, err_n, method) instead of recomputing.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    ThmMain,
    ThmGf,
    Lower,
}

#[derive(Debug, Subcommand)]
pub enum Rate {
    /// Compute e_n and write series.csv, series.svg and manifest.toml.
    Run(RunArgs),
    /// Fit log e_n = log C + beta log n - n log lambda.
    Fit {
        #[command(flatten)]
        args: RunArgs,
        /// Fit window `lo:hi`.
        #[arg(long)]
        window: Option<String>,
    },
    /// Gate the hypotheses and evaluate a theorem's normalized statistic.
    Check {
        theorem: Theorem,
        #[command(flatten)]
        args: RunArgs,
        /// Period m of the base point for the lower bound.
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// First k with n = m k entering the lower bound.
        #[arg(long, default_value_t = 5)]
        n0: usize,
    },
}

pub fn parse_point(s: &str) -> eqspeed_core::Result<SpherePoint> {
    SpherePoint::from_affine(parse_complex(s)?)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let precision = cli.precision;
    match cli.command {
        Command::Classify { map, out } => classify(&parse_map(&map)?, out.as_deref()),
        Command::Preimages { map, a, n, budget, out } => preimages(&parse_map(&map)?, &parse_point(&a)?, n, budget, out.as_deref()),
        Command::Measure {
            map,
            a,
            n,
            samples,
            seed,
            budget,
            pair,
            out,
        } => measure(
            &parse_map(&map)?,
            &parse_point(&a)?,
            n,
            samples,
            seed,
            budget,
            pair.as_deref(),
            precision.unwrap_or_default().extended(),
            out.as_deref(),
        ),
        Command::Potential { map, a, input, out } => potential(&parse_map(&map)?, &parse_point(&a)?, &input, out.as_deref()),
        Command::PotentialCheck {
            map,
            a,
            m,
            observable,
            reference,
            n_max,
            budget,
            out,
        } => potential_check(&parse_map(&map)?, &parse_point(&a)?, m, &observable, &reference, n_max, budget, out.as_deref()),
        Command::Probe(p) => probe(p),
        Command::Rate(r) => rate(r, precision),
        Command::ListExperiments => {
            for e in &EXPERIMENTS {
                println!("{}\t{}\t{}", e.id, e.title, e.description);
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ClassifyRow {
    kind: &'static str,
    period: usize,
    class: String,
    multiplier_re: f64,
    multiplier_im: f64,
    value: f64,
    re: f64,
    im: f64,
    is_inf: u8,
}

impl ClassifyRow {
    fn scalar(kind: &'static str, value: f64) -> Self {
        ClassifyRow {
            kind,
            period: 0,
            class: String::new(),
            multiplier_re: 0.0,
            multiplier_im: 0.0,
            value,
            re: 0.0,
            im: 0.0,
            is_inf: 0,
        }
    }

    fn point(kind: &'static str, p: &SpherePoint, value: f64) -> Self {
        let (re, im, is_inf) = point_fields(p);
        ClassifyRow {
            re,
            im,
            is_inf,
            ..ClassifyRow::scalar(kind, value)
        }
    }
}

/// Fixed points plus the cycles found along critical orbits.
fn find_cycles(f: &RationalMap) -> anyhow::Result<Vec<CycleInfo>> {
    let d = f.degree();
    let pad = |v: &[Complex64]| {
        let mut out = vec![Complex64::new(0.0, 0.0); d + 1 - v.len()];
        out.extend_from_slice(v);
        out
    };
    let (p, q) = (pad(f.numerator()), pad(f.denominator()));
    // P(z) - z Q(z) with formal degree d + 1
    let mut eq = vec![Complex64::new(0.0, 0.0); d + 2];
    for k in 0..=d {
        eq[k + 1] += p[k];
        eq[k] -= q[k];
    }
    let mut seeds: Vec<SpherePoint> = roots(&eq)?.roots.into_iter().map(|(r, _)| r).collect();
    for (c, _) in &f.critical_points()?.all {
        seeds.push(f.iterate(c, 2000));
    }
    let mut cycles: Vec<CycleInfo> = Vec::new();
    for s in seeds {
        if let Some(c) = detect_cycle(f, &s, MAX_PERIOD) {
            if !cycles.iter().any(|k| k.period() == c.period() && k.contains(&c.points[0], 1e-7)) {
                cycles.push(c);
            }
        }
    }
    Ok(cycles)
}

fn classify(f: &RationalMap, out: Option<&Path>) -> anyhow::Result<()> {
    let cycles = find_cycles(f)?;
    let sa = super_attracting_set(f)?;
    let ex = exceptional_set(f)?;
    let crit = f.critical_points()?;
    let pc = postcritical_classify(f, POSTCRITICAL_DEPTH)?;

    println!("map        {f}");
    println!("degree     {}", f.degree());
    println!("cycles");
    for c in &cycles {
        println!(
            "  period {:<3} {:<17} |lambda| = {:<12.6e} at {}",
            c.period(),
            c.class.to_string(),
            c.multiplier.norm(),
            c.points[0]
        );
    }
    println!("S_f        {} point(s)", sa.points().count());
    println!("delta      {}", sa.delta);
    println!("l          {}", sa.l);
    println!(
        "E_f        {}",
        if ex.points.is_empty() {
            "empty".to_string()
        } else {
            ex.points.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
        }
    );
    println!("critical   {}", crit.all.iter().map(|(c, m)| format!("{c} (x{m})")).collect::<Vec<_>>().join(", "));
    println!("geometrically finite evidence: {}", pc.geometrically_finite_evidence);

    if let Some(path) = out {
        let mut rows = Vec::new();
        for c in &cycles {
            for p in &c.points {
                rows.push(ClassifyRow {
                    period: c.period(),
                    class: c.class.to_string(),
                    multiplier_re: c.multiplier.re,
                    multiplier_im: c.multiplier.im,
                    ..ClassifyRow::point("cycle", p, 0.0)
                });
            }
        }
        for p in sa.points() {
            rows.push(ClassifyRow::point("super-attracting", p, 0.0));
        }
        for p in &ex.points {
            rows.push(ClassifyRow::point("exceptional", p, 0.0));
        }
        for (c, m) in &crit.all {
            rows.push(ClassifyRow::point("critical", c, *m as f64));
        }
        rows.push(ClassifyRow::scalar("delta", sa.delta));
        rows.push(ClassifyRow::scalar("l", sa.l));
        rows.push(ClassifyRow::scalar(
            "geometrically-finite",
            if pc.geometrically_finite_evidence { 1.0 } else { 0.0 },
        ));
        write_rows(Some(path), &rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TreeRow {
    level: usize,
    re: f64,
    im: f64,
    is_inf: u8,
    multiplicity: u64,
    parent_index: usize,
}

fn preimages(f: &RationalMap, a: &SpherePoint, n: usize, budget: u64, out: Option<&Path>) -> anyhow::Result<()> {
    let tree = preimage_tree(f, a, n, budget)?;
    let mut rows = Vec::new();
    for (level, l) in tree.levels.iter().enumerate() {
        for i in 0..l.len() {
            let (re, im, is_inf) = point_fields(&l.points[i]);
            rows.push(TreeRow {
                level,
                re,
                im,
                is_inf,
                multiplicity: l.mult[i],
                parent_index: l.parent[i],
            });
        }
    }
    write_rows(out, &rows)
}

#[derive(Serialize)]
struct AtomRow {
    re: f64,
    im: f64,
    is_inf: u8,
    weight: f64,
}

#[allow(clippy::too_many_arguments)]
fn measure(
    f: &RationalMap,
    a: &SpherePoint,
    n: usize,
    samples: Option<usize>,
    seed: u64,
    budget: u64,
    pair: Option<&str>,
    extended: bool,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let nu = match samples {
        Some(k) => preimage_measure_sampled(f, a, n, k, seed, 0)?,
        None => preimage_measure_exact(f, a, n, budget)?,
    };
    if let Some(spec) = pair {
        let phi = parse_observable(spec)?;
        if samples.is_some() {
            let (v, sigma) = nu.pair_with_sigma(&phi)?;
            eprintln!("<nu, {phi}> = {v} +- {sigma}");
        } else {
            let v = if extended { nu.pair_extended(&phi)? } else { nu.pair(&phi)? };
            eprintln!("<nu, {phi}> = {v}");
        }
    }
    let rows: Vec<AtomRow> = nu
        .atoms
        .iter()
        .map(|(p, w)| {
            let (re, im, is_inf) = point_fields(p);
            AtomRow { re, im, is_inf, weight: *w }
        })
        .collect();
    write_rows(out, &rows)
}

#[derive(Deserialize)]
struct PointRow {
    re: f64,
    im: f64,
    is_inf: u8,
}

#[derive(Serialize)]
struct PotentialRow {
    re: f64,
    im: f64,
    is_inf: u8,
    g: f64,
}

fn potential(f: &RationalMap, a: &SpherePoint, input: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let field = PotentialField::new(f, a)?;
    let mut reader = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        let r: PointRow = rec?;
        let x = point_from_fields(r.re, r.im, r.is_inf);
        rows.push(PotentialRow {
            re: r.re,
            im: r.im,
            is_inf: r.is_inf,
            g: field.eval(&x),
        });
    }
    eprintln!("c_a = {} (+- {}), argmax {}", field.c_a, field.c_err, field.argmax);
    write_rows(out, &rows)
}

#[derive(Serialize)]
struct LemmaRow {
    n: usize,
    m: f64,
    lhs: f64,
    rhs: f64,
    slack: f64,
    holds: bool,
}

impl From<LemmaReport> for LemmaRow {
    fn from(r: LemmaReport) -> Self {
        LemmaRow {
            n: r.n,
            m: r.m,
            lhs: r.lhs,
            rhs: r.rhs,
            slack: r.slack,
            holds: r.holds,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn potential_check(
    f: &RationalMap,
    a: &SpherePoint,
    m: f64,
    observable: &str,
    reference: &str,
    n_max: usize,
    budget: u64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let field = PotentialField::new(f, a)?;
    let phi = parse_observable(observable)?;
    let nu = reference_measure(f, eqspeed_core::parse_reference(reference)?)?;
    let rows = (0..=n_max)
        .map(|n| check_lemma_bdd(&field, m, &phi, n, &nu, budget).map(LemmaRow::from))
        .collect::<eqspeed_core::Result<Vec<_>>>()?;
    let failed: Vec<usize> = rows.iter().filter(|r| !r.holds).map(|r| r.n).collect();
    write_rows(out, &rows)?;
    if !failed.is_empty() {
        return Err(CheckFailed(format!("bound violated for n in {failed:?}")).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct DpuRow {
    re: f64,
    im: f64,
    is_inf: u8,
    n: usize,
    n_removed: usize,
    untrimmed_sum: f64,
    trimmed_sum: f64,
    q_hat: f64,
    removed_indices: String,
    capped: usize,
    vacuous: bool,
}

#[derive(Serialize)]
struct DiameterRow {
    re: f64,
    im: f64,
    is_inf: u8,
    n: usize,
    center_re: f64,
    center_im: f64,
    center_is_inf: u8,
    ball_radius: f64,
    diam_v: f64,
    method: String,
    exponent_observed: f64,
}

#[derive(Serialize)]
struct BottcherRow {
    cycle_re: f64,
    cycle_im: f64,
    cycle_is_inf: u8,
    period: usize,
    c: f64,
    l: f64,
    rms: f64,
    n: usize,
    log_diam_b: f64,
    log_diam_image: f64,
}

#[derive(Serialize)]
struct KoebeRow {
    re: f64,
    im: f64,
    is_inf: u8,
    branch: usize,
    n: usize,
    radius: f64,
    lambda_hat: f64,
    samples: usize,
}

fn probe(p: Probe) -> anyhow::Result<()> {
    match p {
        Probe::Dpu {
            map,
            x,
            n,
            removed,
            backward,
            seed,
            out,
        } => {
            let f = parse_map(&map)?;
            let x = parse_point(&x)?;
            let rep = if backward {
                let orbit = backward_shadow_orbit(&f, &x, n, &mut walk_rng(seed, 0, 0))?;
                dpu_on_orbit(&f.critical_points()?, &orbit, removed)?
            } else {
                dpu_trimmed_sum(&f, &x, n, removed)?
            };
            let (re, im, is_inf) = point_fields(&rep.x);
            write_rows(
                out.as_deref(),
                &[DpuRow {
                    re,
                    im,
                    is_inf,
                    n: rep.n,
                    n_removed: rep.n_removed,
                    untrimmed_sum: rep.untrimmed_sum,
                    trimmed_sum: rep.trimmed_sum,
                    q_hat: rep.q_hat,
                    removed_indices: rep.removed_indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "),
                    capped: rep.capped.len(),
                    vacuous: rep.vacuous,
                }],
            )
        }
        Probe::Diameter {
            map,
            x,
            n,
            radius,
            budget,
            out,
        } => {
            let f = parse_map(&map)?;
            let rep = diameter_pullback(&f, &parse_point(&x)?, n, radius, budget)?;
            let (re, im, is_inf) = point_fields(&rep.x);
            let (center_re, center_im, center_is_inf) = point_fields(&rep.ball_center);
            write_rows(
                out.as_deref(),
                &[DiameterRow {
                    re,
                    im,
                    is_inf,
                    n: rep.n,
                    center_re,
                    center_im,
                    center_is_inf,
                    ball_radius: rep.ball_radius,
                    diam_v: rep.diam_v,
                    method: rep.method.to_string(),
                    exponent_observed: rep.exponent_observed,
                }],
            )
        }
        Probe::Bottcher { map, radius, n_max, out } => {
            let f = parse_map(&map)?;
            let sa = super_attracting_set(&f)?;
            if sa.is_empty() {
                return Err(Error::Refused(format!("`{f}` has no super-attracting cycle")).into());
            }
            let radius = radius.unwrap_or(sa.delta.min(0.2));
            let mut rows = Vec::new();
            for cycle in &sa.cycles {
                let fit = bottcher_contraction(&f, cycle, radius, n_max)?;
                let (cycle_re, cycle_im, cycle_is_inf) = point_fields(&cycle.points[0]);
                for (n, log_b, log_img) in &fit.data {
                    rows.push(BottcherRow {
                        cycle_re,
                        cycle_im,
                        cycle_is_inf,
                        period: cycle.period(),
                        c: fit.c,
                        l: fit.l,
                        rms: fit.rms,
                        n: *n,
                        log_diam_b: *log_b,
                        log_diam_image: *log_img,
                    });
                }
            }
            write_rows(out.as_deref(), &rows)
        }
        Probe::Koebe {
            map,
            center,
            radius,
            n,
            samples,
            branch,
            budget,
            out,
        } => {
            let f = parse_map(&map)?;
            let c = parse_point(&center)?;
            let rep = koebe_ratio(&f, &c, radius, n, samples, branch, budget)?;
            let (re, im, is_inf) = point_fields(&c);
            write_rows(
                out.as_deref(),
                &[KoebeRow {
                    re,
                    im,
                    is_inf,
                    branch: rep.branch,
                    n: rep.n,
                    radius: rep.radius,
                    lambda_hat: rep.lambda_hat,
                    samples: rep.samples,
                }],
            )
        }
    }
}

/// A loaded config with command-line overrides applied.
struct Loaded {
    cfg: ExperimentConfig,
    resolved: Resolved,
    output: PathBuf,
}

fn load(args: &RunArgs, precision: Option<Precision>) -> anyhow::Result<Loaded> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| anyhow::Error::new(e).context(args.config.display().to_string()))?;
    if let Some(p) = precision {
        cfg.run.precision = p;
    }
    if let Some(o) = &args.output {
        cfg.run.output = o.clone();
    }
    let resolved = cfg
        .resolve()
        .map_err(|(_, msg)| ConfigError { line: None, message: msg })?;
    let output = cfg.run.output.clone();
    Ok(Loaded { cfg, resolved, output })
}

#[derive(Deserialize)]
struct SeriesInRow {
    n: usize,
    e_n: f64,
    err_n: f64,
    method: String,
}

fn read_series(path: &Path) -> anyhow::Result<Vec<RateEntry>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in reader.deserialize() {
        let r: SeriesInRow = rec?;
        out.push(RateEntry {
            n: r.n,
            e_n: r.e_n,
            err_n: r.err_n,
            method: r.method.parse::<Method>()?,
        });
    }
    Ok(out)
}

fn series_for(l: &Loaded, input: Option<&Path>) -> anyhow::Result<RateSeries> {
    let r = &l.resolved;
    if let Some(path) = input {
        return Ok(RateSeries {
            context: Some(SeriesContext {
                map: r.map.clone(),
                a: r.a,
                phi: r.phi.clone(),
                reference: r.reference.clone(),
            }),
            entries: read_series(path)?,
        });
    }
    let nu = reference_measure(&r.map, r.reference.clone())?;
    let field = match r.method {
        Method::PotentialOracle => Some(PotentialField::new(&r.map, &r.a)?),
        Method::Tree => None,
    };
    let opts = SeriesOptions {
        budget: l.cfg.run.budget,
        potential: field.as_ref(),
        extended: l.cfg.run.precision.extended(),
    };
    Ok(error_series(&r.map, &r.a, &r.phi, &nu, &r.ns, r.method, opts)?)
}

fn write_manifest(l: &Loaded, command: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(&l.output).with_context(|| format!("creating {}", l.output.display()))?;
    std::fs::write(l.output.join("manifest.toml"), output::manifest(&l.cfg, command))?;
    Ok(())
}

fn parse_window(s: &str) -> anyhow::Result<(usize, usize)> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("window `{s}` is not lo:hi")))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad window bound `{t}`")));
    Ok((p(lo)?, p(hi)?))
}

#[derive(Serialize)]
struct FitRow {
    c: f64,
    lambda: f64,
    beta: f64,
    residual_rms: f64,
    window_lo: usize,
    window_hi: usize,
    used: usize,
    zero_excluded: usize,
}

impl From<&RateFit> for FitRow {
    fn from(f: &RateFit) -> Self {
        FitRow {
            c: f.c,
            lambda: f.lambda,
            beta: f.beta,
            residual_rms: f.residual_rms,
            window_lo: f.window.0,
            window_hi: f.window.1,
            used: f.used,
            zero_excluded: f.zero_excluded,
        }
    }
}

#[derive(Serialize)]
struct CheckRow {
    n: usize,
    statistic: f64,
}

fn rate(r: Rate, precision: Option<Precision>) -> anyhow::Result<()> {
    match r {
        Rate::Run(args) => {
            let l = load(&args, precision)?;
            let series = series_for(&l, args.input.as_deref())?;
            write_manifest(&l, "rate run")?;
            write_rows(Some(&l.output.join("series.csv")), &output::series_rows(&series))?;
            let fit = fit_rate(&series, None).ok();
            let title = format!("{} a={} phi={}", l.resolved.map, l.resolved.a, l.resolved.phi);
            std::fs::write(
                l.output.join("series.svg"),
                output::series_svg(&series, l.resolved.map.degree(), fit.as_ref(), &title),
            )?;
            for e in &series.entries {
                println!(
                    "{:>3}  {:<24e} {:<24e} {}",
                    e.n,
                    e.e_n,
                    e.err_n,
                    if e.admitted() { "" } else { "noise-floor" }
                );
            }
            Ok(())
        }
        Rate::Fit { args, window } => {
            let l = load(&args, precision)?;
            let window = window.as_deref().map(parse_window).transpose()?;
            let series = series_for(&l, args.input.as_deref())?;
            let fit = fit_rate(&series, window)?;
            write_manifest(&l, "rate fit")?;
            let row = FitRow::from(&fit);
            write_rows(Some(&l.output.join("fit.csv")), std::slice::from_ref(&row))?;
            write_rows(None, &[row])
        }
        Rate::Check { theorem, args, m, n0 } => {
            let l = load(&args, precision)?;
            let res = &l.resolved;
            let d = res.map.degree();
            let report = match theorem {
                Theorem::ThmMain => {
                    let dist = gate_thm_main(&res.map, &res.a)?;
                    let series = series_for(&l, args.input.as_deref())?;
                    let mass = res.phi.ddc_mass().unwrap_or(0.0);
                    check_thm_main(&series, d, dist, res.phi.holder_const, mass)?
                }
                Theorem::ThmGf => {
                    gate_thm_gf(&res.map, &res.a)?;
                    let sup = res
                        .phi
                        .ddc_sup()
                        .ok_or_else(|| Error::Refused(format!("`{}` has no bounded dd^c density", res.phi)))?;
                    let series = series_for(&l, args.input.as_deref())?;
                    check_thm_gf(&series, d, sup, res.phi.sup_norm)?
                }
                Theorem::Lower => {
                    gate_lower(&res.map, &res.a)?;
                    let series = series_for(&l, args.input.as_deref())?;
                    check_lower_bound(&series, d, m, n0)?
                }
            };
            write_manifest(&l, "rate check")?;
            report_check(&l.output, &report)
        }
    }
}

fn report_check(dir: &Path, report: &CheckReport) -> anyhow::Result<()> {
    let rows: Vec<CheckRow> = report.per_n.iter().map(|&(n, statistic)| CheckRow { n, statistic }).collect();
    write_rows(Some(&dir.join("check.csv")), &rows)?;
    println!("verdict     {}", report.verdict);
    println!("statistic   {}", report.statistic);
    println!("halves      {} / {}", report.first_half_max, report.second_half_max);
    println!("note        {}", report.note);
    if report.verdict == Verdict::Fail {
        return Err(CheckFailed(report.note.clone()).into());
    }
    Ok(())
}
