use eqspeed_core::dynamics::{detect_cycle, exceptional_set, super_attracting_set};
use eqspeed_core::measures::{pair_reference, reference_measure, ReferenceKind, REFERENCE_TOLERANCE};
use eqspeed_core::observables::{holder_estimate, make_basin_contrast, make_log_distance, Ddc, ObservableKind};
use eqspeed_core::polysolve::{fiber, DEFAULT_BUDGET, PREIMAGE_RESIDUAL};
use eqspeed_core::probes::bottcher_contraction;
use eqspeed_core::{parse_map, parse_observable, preimages, RationalMap, SpherePoint};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point() -> impl Strategy<Value = SpherePoint> {
    (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y)| SpherePoint::from_re_im(x, y))
}

fn random_map(rng: &mut ChaCha8Rng) -> RationalMap {
    loop {
        let d = rng.gen_range(2..=4);
        let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let p: Vec<Complex64> = (0..=d).map(|_| c()).collect();
        let q: Vec<Complex64> = (0..=d).map(|_| c()).collect();
        if let Ok(f) = RationalMap::from_coeffs(&p, &q) {
            return f;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn preimages_map_back(cr in -1.5f64..0.5, ci in -1.0f64..1.0, w in point()) {
        let f = parse_map(&format!("quadratic {cr}{ci:+}i")).unwrap();
        let set = preimages(&f, &w).unwrap();
        prop_assert_eq!(set.total_multiplicity(), 2);
        for (r, _) in &set.roots {
            prop_assert!(f.apply(r).distance(&w) < PREIMAGE_RESIDUAL);
        }
    }

    #[test]
    fn fibers_count_d_to_the_n(w in point(), n in 0usize..9) {
        let f = parse_map("coeffs p: 1, 0, 0.2, 0 q: 0, 0.5, 0, 1").unwrap();
        let level = fiber(&f, &w, n, DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(level.total_multiplicity(), 3u64.pow(n as u32));
        for x in &level.points {
            prop_assert!(f.iterate(x, n).distance(&w) < 1e-6);
        }
    }

    #[test]
    fn constructed_observables_are_bounded(b in point(), c in point(), eps in 0.01f64..0.3, x in point()) {
        prop_assume!(b.distance(&c) > 2.0 * eps);
        for phi in [make_log_distance(b, eps).unwrap(), make_basin_contrast(b, c, eps).unwrap()] {
            let v = phi.eval(&x);
            prop_assert!(v.is_finite() && v.abs() <= phi.sup_norm + 1e-12);
            if let Ddc::Signed(s) = &phi.ddc {
                if matches!(phi.kind, ObservableKind::BasinContrast { .. }) {
                    prop_assert!(s.is_balanced());
                }
            }
        }
    }
}

#[test]
fn deep_fiber_of_quadratic_counts_exactly() {
    let f = parse_map("quadratic i").unwrap();
    let level = fiber(&f, &SpherePoint::from_re_im(0.3, 0.3), 20, DEFAULT_BUDGET).unwrap();
    assert_eq!(level.total_multiplicity(), 1 << 20);
}

#[test]
fn random_maps_have_small_exceptional_sets_and_closed_cycles() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..30 {
        let f = random_map(&mut rng);
        assert!(exceptional_set(&f).unwrap().points.len() <= 2);
        let x = SpherePoint::random(&mut rng);
        if let Some(c) = detect_cycle(&f, &f.iterate(&x, 500), 16) {
            let m = c.period();
            for p in &c.points {
                assert!(f.iterate(p, m).distance(p) < 1e-9);
            }
        }
    }
}

#[test]
fn holder_estimates_respect_constructive_bounds() {
    let b = SpherePoint::from_re_im(0.2, -0.4);
    let c = SpherePoint::from_re_im(-1.5, 2.0);
    for eps in [0.02, 0.1] {
        let logd = make_log_distance(b, eps).unwrap();
        assert!(holder_estimate(&logd, 1.0, 20_000, 3).unwrap() <= 1.0 / eps);
        let basin = make_basin_contrast(b, c, eps).unwrap();
        assert!(holder_estimate(&basin, 1.0, 20_000, 3).unwrap() <= 2.0 / eps);
    }
}

#[test]
fn references_are_probability_measures() {
    let one = parse_observable("constant(c=1)").unwrap();
    for (spec, kind) in [
        ("power 2", ReferenceKind::PowerCircle),
        ("power 5", ReferenceKind::PowerCircle),
        ("chebyshev 2", ReferenceKind::ChebyshevArcsine),
        ("chebyshev 4", ReferenceKind::ChebyshevArcsine),
    ] {
        let nu = reference_measure(&parse_map(spec).unwrap(), kind).unwrap();
        let v = pair_reference(&nu, &one, REFERENCE_TOLERANCE).unwrap().value;
        assert!((v - 1.0).abs() < 1e-12, "{spec}");
    }
}

#[test]
fn superattracting_contraction_reversed_form() {
    // diam f^n(B) >= (diam B / C)^{l^n} for balls around 0, with C fitted
    let sq = parse_map("power 2").unwrap();
    let set = super_attracting_set(&sq).unwrap();
    let zero = set.cycles.iter().find(|c| c.contains(&SpherePoint::ZERO, 1e-12)).unwrap();
    let radius = set.delta.min(0.2);
    let fit = bottcher_contraction(&sq, zero, radius, 8).unwrap();
    let c = fit.c * std::f64::consts::E;
    for (n, log_b, log_fn) in &fit.data {
        let rhs = 2f64.powi(*n as i32) * (log_b - c.ln());
        assert!(*log_fn >= rhs - 1e-9, "n={n}");
    }
}
