//! CSV tables, SVG plots and the run manifest.

use crate::config::ExperimentConfig;
use eqspeed_core::{Affine, RateFit, RateSeries, SpherePoint};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `(re, im, is_inf)` with infinity written as `(0, 0, 1)`.
pub fn point_fields(p: &SpherePoint) -> (f64, f64, u8) {
    match p.to_affine() {
        Affine::Finite(z) => (z.re, z.im, 0),
        Affine::Infinity => (0.0, 0.0, 1),
    }
}

pub fn point_from_fields(re: f64, im: f64, is_inf: u8) -> SpherePoint {
    if is_inf != 0 {
        SpherePoint::INFINITY
    } else {
        SpherePoint::from_re_im(re, im)
    }
}

/// Writes serializable rows with a header to `path`, or stdout for `None`.
pub fn write_rows<T: Serialize>(path: Option<&Path>, rows: &[T]) -> anyhow::Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SeriesRow {
    pub n: usize,
    pub e_n: f64,
    pub err_n: f64,
    pub method: String,
}

pub fn series_rows(series: &RateSeries) -> Vec<SeriesRow> {
    series
        .entries
        .iter()
        .map(|e| SeriesRow {
            n: e.n,
            e_n: e.e_n,
            err_n: e.err_n,
            method: e.method.to_string(),
        })
        .collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    threads: usize,
    experiment: &'a crate::config::ExperimentSection,
    run: &'a crate::config::RunSection,
    knobs: BTreeMap<&'static str, String>,
}

/// Resolved config plus library version and every numeric knob.
pub fn manifest(cfg: &ExperimentConfig, command: &str) -> String {
    let canonical = cfg.canonical();
    let m = Manifest {
        version: VERSION,
        command,
        threads: rayon::current_num_threads(),
        experiment: &canonical.experiment,
        run: &canonical.run,
        knobs: eqspeed_core::knobs::knobs().into_iter().collect(),
    };
    toml::to_string(&m).expect("manifest serializes")
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Decimal-log plot of `e_n` against `n`: admitted entries filled, noise
/// floor entries hollow, the fitted model and the envelope `K n d^{-n}`.
pub fn series_svg(series: &RateSeries, d: usize, fit: Option<&RateFit>, title: &str) -> String {
    let pts: Vec<(f64, f64, bool)> = series
        .entries
        .iter()
        .filter(|e| e.e_n > 0.0)
        .map(|e| (e.n as f64, e.e_n.log10(), e.admitted()))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    if pts.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">no positive e_n</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        s.push_str("</svg>\n");
        return s;
    }
    let log_d = (d as f64).log10();
    let envelope_k = pts
        .iter()
        .filter(|p| p.0 >= 1.0)
        .map(|p| p.1 - p.0.log10() + p.0 * log_d)
        .fold(f64::NEG_INFINITY, f64::max);
    let envelope = |n: f64| envelope_k + n.log10() - n * log_d;
    let model = |n: f64, f: &RateFit| (f.c.ln() + f.beta * n.ln() - n * f.lambda.ln()) / std::f64::consts::LN_10;

    let (n_lo, n_hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let n_hi = if n_hi > n_lo { n_hi } else { n_lo + 1.0 };
    let (mut y_lo, mut y_hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if envelope_k.is_finite() {
        for n in [n_lo.max(1.0), n_hi] {
            y_lo = y_lo.min(envelope(n));
            y_hi = y_hi.max(envelope(n));
        }
    }
    y_lo = y_lo.floor();
    y_hi = y_hi.ceil().max(y_lo + 1.0);

    let sx = |n: f64| MARGIN + (n - n_lo) / (n_hi - n_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2} {y0:.2} L{x0:.2} {y1:.2} L{x1:.2} {y1:.2}" fill="none" stroke="black"/>"#,
        x0 = MARGIN,
        y0 = MARGIN,
        y1 = HEIGHT - MARGIN,
        x1 = WIDTH - MARGIN
    );
    let mut e = y_lo as i64;
    while e as f64 <= y_hi {
        let y = sy(e as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{tx:.2}" y="{ty:.2}" font-family="sans-serif" font-size="10" text-anchor="end">1e{e}</text>"##,
            x0 = MARGIN,
            x1 = WIDTH - MARGIN,
            tx = MARGIN - 4.0,
            ty = y + 3.0
        );
        e += 1;
    }
    let step = ((n_hi - n_lo) / 10.0).ceil().max(1.0);
    let mut n = n_lo;
    while n <= n_hi + 1e-9 {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{n}</text>"#,
            sx(n),
            HEIGHT - MARGIN + 14.0
        );
        n += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">n</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );

    let curve = |s: &mut String, g: &dyn Fn(f64) -> f64, color: &str, dash: &str, label: &str, row: f64| {
        let samples = 100;
        let mut d_attr = String::new();
        for i in 0..=samples {
            let n = n_lo.max(1.0) + (n_hi - n_lo.max(1.0)) * i as f64 / samples as f64;
            let y = g(n).clamp(y_lo, y_hi);
            let _ = write!(d_attr, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, sx(n), sy(y));
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-dasharray="{dash}"/>"#,
            d_attr.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            MARGIN + row,
            escape(label)
        );
    };
    if envelope_k.is_finite() {
        curve(&mut s, &envelope, "#c0392b", "6 4", &format!("envelope K n {d}^-n"), 0.0);
    }
    if let Some(f) = fit {
        let label = format!("fit lambda={:.4} beta={:.3}", f.lambda, f.beta);
        curve(&mut s, &|n| model(n, f), "#2471a3", "", &label, 14.0);
    }
    for (n, y, admitted) in &pts {
        let fill = if *admitted { "black" } else { "white" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{fill}" stroke="black"/>"#,
            sx(*n),
            sy(*y)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_round_trips_through_fields() {
        let (re, im, inf) = point_fields(&SpherePoint::INFINITY);
        assert!(point_from_fields(re, im, inf).is_infinity());
        let p = SpherePoint::from_re_im(0.5, -2.0);
        let (re, im, inf) = point_fields(&p);
        assert!(point_from_fields(re, im, inf).distance(&p) < 1e-15);
    }

    #[test]
    fn svg_is_well_formed_for_degenerate_series() {
        let empty = RateSeries::synthetic([(3, 0.0), (4, 0.0)]);
        let svg = series_svg(&empty, 2, None, "zeros");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        let one = RateSeries::synthetic([(5, 1e-3)]);
        assert!(series_svg(&one, 2, None, "one").contains("<circle"));
    }
}
