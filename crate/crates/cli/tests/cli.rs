use eqspeed_cli::config::{ExperimentConfig, Precision};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_eqspeed");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn eqspeed(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("EQSPEED_THREADS", t.to_string());
    }
    cmd.output().expect("binary runs")
}

fn rate_run(config: &Path, out: &Path, threads: Option<usize>) -> Output {
    eqspeed(
        &["rate", "run", config.to_str().unwrap(), "--output", out.to_str().unwrap()],
        threads,
    )
}

#[test]
fn rate_run_matches_golden_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = rate_run(&configs().join("z2_basin.toml"), dir.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let want = include_str!("golden/z2_basin_series.csv");
    assert_eq!(got.lines().count(), 17);
    assert_eq!(got, want);
    let svg = std::fs::read_to_string(dir.path().join("series.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("version = \"0.1.0\""));
    assert!(manifest.contains("observable = \"basin(bp=0+0i, bm=inf, eps=0.05)\""));
}

#[test]
fn manifest_lists_every_knob() {
    let dir = tempfile::tempdir().unwrap();
    assert!(rate_run(&configs().join("z2_basin_a2.toml"), dir.path(), None).status.success());
    let manifest: toml::Table = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap().parse().unwrap();
    let knobs = manifest["knobs"].as_table().unwrap();
    for (name, value) in eqspeed_core::knobs::knobs() {
        assert_eq!(knobs[name].as_str(), Some(value.as_str()), "{name}");
    }
}

#[test]
fn output_is_identical_across_thread_counts() {
    let config = configs().join("z2_basin_a2.toml");
    let mut outputs = Vec::new();
    for threads in [1, 2, 4] {
        let dir = tempfile::tempdir().unwrap();
        assert!(rate_run(&config, dir.path(), Some(threads)).status.success());
        outputs.push(std::fs::read(dir.path().join("series.csv")).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn configs_round_trip() {
    let base = std::fs::read_to_string(configs().join("z2_basin.toml")).unwrap();
    let variants = [
        base.clone(),
        base.replace("\"double\"", "\"dd\""),
        base.replace("\"power-circle\"", "\"deep-backward(b=0.5, n=12, K=1000, seed=3)\""),
        base.replace("\"power 2\"", "\"coeffs p: 1, 0, 0.2, 0 q: 0, 0.5, 0, 1\""),
        "[experiment]\nmap = \"chebyshev 2\"\na = \"1\"\nobservable = \"moment(k=2)\"\nreference = \"chebyshev\"\nn_min = 0\nn_max = 4\n".into(),
    ];
    for text in variants {
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let again = ExperimentConfig::parse(&cfg.emit()).unwrap();
        assert_eq!(cfg, again);
        let canon = cfg.canonical();
        assert_eq!(ExperimentConfig::parse(&canon.emit()).unwrap().canonical(), canon);
    }
    let dd = ExperimentConfig::parse(&base.replace("\"double\"", "\"dd\"")).unwrap();
    assert_eq!(dd.run.precision, Precision::Dd);
}

#[test]
fn malformed_config_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(configs().join("z2_basin.toml"))
        .unwrap()
        .replace("reference = \"power-circle\"", "reference = \"uniform\"");
    std::fs::write(&path, text).unwrap();
    let out = rate_run(&path, dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
}

#[test]
fn budget_exceeded_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.toml");
    let text = std::fs::read_to_string(configs().join("z2_basin.toml"))
        .unwrap()
        .replace("budget = 1000000", "budget = 1000");
    std::fs::write(&path, text).unwrap();
    assert_eq!(rate_run(&path, dir.path(), None).status.code(), Some(3));
}

#[test]
fn reference_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cheb.toml");
    let text = std::fs::read_to_string(configs().join("z2_basin.toml"))
        .unwrap()
        .replace("\"power-circle\"", "\"chebyshev\"");
    std::fs::write(&path, text).unwrap();
    assert_eq!(rate_run(&path, dir.path(), None).status.code(), Some(4));
}

#[test]
fn list_experiments_has_eight_stable_ids() {
    let a = eqspeed(&["list-experiments"], None);
    let b = eqspeed(&["list-experiments"], None);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let ids: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(ids, ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8"]);
    assert!(text.lines().any(|l| l.starts_with("A4") && l.contains("lower bound")));
}

#[test]
fn potential_round_trips_points_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pts.csv");
    let output = dir.path().join("g.csv");
    std::fs::write(&input, "re,im,is_inf\n0,0,0\n0,0,1\n3,0,0\n").unwrap();
    let out = eqspeed(
        &[
            "potential",
            "--map",
            "power 2",
            "--a",
            "1",
            "--input",
            input.to_str().unwrap(),
            "--out",
            output.to_str().unwrap(),
        ],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_path(&output).unwrap();
    let g: Vec<f64> = rd.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    // g_1 = log|z-1| - log max(|z|,1) - log 2
    let want = [-(2f64.ln()), -(2f64.ln()), 2f64.ln() - 3f64.ln() - 2f64.ln()];
    for (a, b) in g.iter().zip(want) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}
