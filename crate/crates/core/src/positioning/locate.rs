use alloc::vec::Vec;
use core::f64::consts::PI;

use super::features::{extract_features_with, DipFeature, DipRule};
use super::intersect::{intersect_sensors, PositionEstimate};
use super::library::FingerprintLibrary;
use super::matching::{match_features, MatchResult, MatchTolerance};
use crate::coherence::CoherenceCurve;
use crate::error::{invalid, Error, Result};
use crate::nv::SensorConfig;

#[derive(Clone, Debug)]
pub struct LocateOutcome {
    pub features: Vec<DipFeature>,
    pub matches: Vec<MatchResult>,
    pub estimate: PositionEstimate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocateOptions {
    pub tolerance: MatchTolerance,
    /// nm
    pub voxel: f64,
    /// Dips narrower than this many pulse spacings (full width at half
    /// depth) are skipped during extraction.
    pub min_dip_width: f64,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self { tolerance: MatchTolerance::default(), voxel: 0.05, min_dip_width: 0.5 }
    }
}

/// Feature extraction, library matching and intersection for one curve,
/// library and sensor each.
pub fn locate(
    curves: &[CoherenceCurve],
    libraries: &[&FingerprintLibrary],
    sensors: &[SensorConfig],
    opts: &LocateOptions,
) -> Result<LocateOutcome> {
    if curves.len() != libraries.len() || curves.len() != sensors.len() {
        return Err(invalid("need one curve and one library per sensor"));
    }
    let mut features = Vec::with_capacity(curves.len());
    let mut matches = Vec::with_capacity(curves.len());
    for ((c, lib), s) in curves.iter().zip(libraries).zip(sensors) {
        let spacing = PI / lib.spec.field.larmor(lib.spec.target_gamma);
        let rule = DipRule { min_width: opts.min_dip_width * spacing, ..DipRule::default() };
        let f = extract_features_with(c, &rule).ok_or_else(|| Error::NoDip(s.id.clone()))?;
        matches.push(match_features(&f, lib, opts.tolerance));
        features.push(f);
    }
    let estimate = intersect_sensors(sensors, &matches, opts.voxel)?;
    Ok(LocateOutcome { features, matches, estimate })
}
