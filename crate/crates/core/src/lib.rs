//! Numerical toolkit for equidistribution of iterated preimages of rational
//! maps on the Riemann sphere.

pub mod dynamics;
pub mod error;
pub mod knobs;
pub mod measures;
pub mod numeric;
pub mod observables;
pub mod polysolve;
pub mod potential;
pub mod probes;
pub mod ratmap;
pub mod rates;
pub mod sphere;

pub use dynamics::{classify_point, exceptional_set, super_attracting_set, CycleClass, CycleInfo, PointKind};
pub use error::{Error, Result};
pub use measures::{
    pair_reference, parse_reference, preimage_measure_exact, preimage_measure_sampled, reference_measure,
    DiscreteMeasure, ReferenceKind, ReferenceMeasure,
};
pub use observables::{parse_observable, Observable};
pub use polysolve::{preimage_tree, preimages, roots, PreimageTree, RootSet, TreeLevel};
pub use potential::{check_lemma_bdd, green_u, pairing_via_potential, PotentialField, TruncatedPotential};
pub use ratmap::{parse_map, CriticalData, RationalMap};
pub use rates::{error_series, fit_rate, Method, RateEntry, RateFit, RateSeries, Verdict};
pub use sphere::{chordal_distance, Affine, Chart, Rotation, SpherePoint};
