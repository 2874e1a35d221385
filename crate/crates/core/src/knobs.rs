//! Every numeric knob of the library with its compiled-in value.

use crate::{dynamics, measures, numeric, observables, polysolve, potential, probes, rates, ratmap, sphere};

macro_rules! knobs {
    ($($module:ident :: $name:ident),* $(,)?) => {
        vec![$((concat!(stringify!($module), ".", stringify!($name)), format!("{:?}", $module::$name))),*]
    };
}

/// `(module.NAME, value)` pairs in a fixed order.
pub fn knobs() -> Vec<(&'static str, String)> {
    knobs![
        sphere::POINT_TOLERANCE,
        sphere::INFINITY_THRESHOLD,
        numeric::CHUNK,
        ratmap::PERIODIC_TOLERANCE,
        ratmap::MAX_PERIOD,
        ratmap::MAX_DEGREE,
        ratmap::RESULTANT_THRESHOLD,
        polysolve::MAX_SWEEPS,
        polysolve::DEGREE_DROP_THRESHOLD,
        polysolve::CLUSTER_RADIUS,
        polysolve::PREIMAGE_RESIDUAL,
        polysolve::DEFAULT_BUDGET,
        dynamics::SUPERATTRACTING_TOLERANCE,
        dynamics::INDIFFERENT_TOLERANCE,
        dynamics::PARABOLIC_MAX_ORDER,
        dynamics::PARABOLIC_TOLERANCE,
        dynamics::CRITICAL_ORBIT_STEPS,
        dynamics::DELTA_BOUNDARY_SAMPLES,
        dynamics::DELTA_CONTRACTION_STEPS,
        dynamics::DELTA_LOG_C,
        dynamics::DELTA_RESOLUTION,
        dynamics::CONTINUATION_BISECTIONS,
        dynamics::PATH_SPACING,
        measures::REFERENCE_TOLERANCE,
        observables::CIRCLE_NODES,
        observables::CAP_RADIAL_NODES,
        observables::CAP_ANGULAR_NODES,
        observables::LAPLACIAN_SAMPLES,
        observables::LAPLACIAN_STEP,
        observables::LAPLACIAN_SAFETY,
        observables::MAX_MOMENT,
        potential::GREEN_TOLERANCE,
        potential::MAX_GREEN_DEPTH,
        potential::SUP_GRID,
        potential::POLE_RADIUS,
        potential::DD_THRESHOLD,
        potential::DISTORTION_GRID,
        potential::DISTORTION_SAFETY,
        potential::A_SAFETY,
        potential::A_RADII,
        potential::A_ANGLES,
        potential::LEMMA_SHELLS,
        potential::LEMMA_RADIAL_NODES,
        potential::LEMMA_ANGLES,
        probes::PSI_CAP,
        probes::BOUNDARY_LIFTS,
        probes::FALLBACK_SAMPLES,
        probes::PATH_STEP,
        probes::BOTTCHER_SEEDS,
        probes::BOTTCHER_BOUNDARY,
        rates::N_MIN,
        rates::NOISE_RATIO,
        rates::ROUNDING,
        rates::POSTCRITICAL_DEPTH,
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn names_are_unique() {
        let k = super::knobs();
        let mut names: Vec<_> = k.iter().map(|(n, _)| *n).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), k.len());
    }
}
