//! Fingerprint-library positioning of a remote spin from the first coherence
//! dip seen by several sensors.
//!
//! 1. [`build_library`] tabulates the first-dip time and depth over a polar
//!    (R, θ) grid around a sensor.
//! 2. [`match_features`] selects the cells consistent with a measured dip.
//! 3. [`intersect_sensors`] keeps the points in space that every sensor's
//!    selection allows and groups them into connected regions.

mod features;
mod intersect;
mod library;
mod locate;
mod matching;

pub use features::{
    extract_features, extract_features_with, find_dip, find_first_dip, half_depth_width, DipFeature, DipRule,
    DEFAULT_DIP_THRESHOLD,
};
pub use intersect::{intersect_sensors, IntersectionSetup, PositionEstimate, Region, VoxelKey};
pub use library::{
    build_library, AxisRange, CellFeature, FingerprintLibrary, LibraryBuilder, LibraryGrid, LibrarySpec, Provenance,
    SpotCheck,
};
pub use locate::{locate, LocateOptions, LocateOutcome};
pub use matching::{match_features, IntervalBox, MatchResult, MatchTolerance, NearestCell};
