use alloc::vec::Vec;

use crate::coherence::CoherenceCurve;

/// Samples must drop below this to count as a dip.
pub const DEFAULT_DIP_THRESHOLD: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DipFeature {
    pub order: usize,
    /// μs
    pub time: f64,
    pub depth: f64,
}

/// Selection rule for the first dip.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DipRule {
    /// Samples must drop below this to count as a dip.
    pub threshold: f64,
    /// Minima narrower than this full width at half depth (μs) are ignored.
    /// Other sensors in the tip produce such narrow dips.
    pub min_width: f64,
}

impl Default for DipRule {
    fn default() -> Self {
        Self { threshold: DEFAULT_DIP_THRESHOLD, min_width: 0.0 }
    }
}

impl DipRule {
    /// Default threshold and a minimum width of `fraction` pulse spacings.
    pub fn for_cpmg(pulses: usize, dip_time: f64, fraction: f64) -> Self {
        Self { threshold: DEFAULT_DIP_THRESHOLD, min_width: fraction * dip_time / pulses as f64 }
    }
}

/// First dip of a sampled curve.
///
/// The dip is the first interior local minimum that is below `threshold`
/// and reaches at least half of the curve's deepest excursion, so that
/// filter side lobes ahead of the main dip are skipped. Time and depth come
/// from the parabola through the minimum and its two neighbours.
pub fn find_first_dip(times: &[f64], values: &[f64], threshold: f64) -> Option<DipFeature> {
    find_dip(times, values, &DipRule { threshold, min_width: 0.0 })
}

/// [`find_first_dip`] that also skips minima narrower than `rule.min_width`.
pub fn find_dip(times: &[f64], values: &[f64], rule: &DipRule) -> Option<DipFeature> {
    let n = times.len().min(values.len());
    if n < 3 {
        return None;
    }
    let candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| {
            let v = values[i];
            v < rule.threshold && v < values[i - 1] && v <= values[i + 1]
        })
        .filter(|&i| rule.min_width <= 0.0 || half_depth_width(&times[..n], &values[..n], i) >= rule.min_width)
        .collect();
    let lowest = candidates.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
    if !(lowest < rule.threshold) {
        return None;
    }
    let level = 1.0 - (1.0 - lowest) / 2.0;
    let i = candidates.into_iter().find(|&i| values[i] <= level)?;
    let (t0, t1, t2) = (times[i - 1], times[i], times[i + 1]);
    let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
    // Vertex of the interpolating parabola (general spacing).
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let curv = (d12 - d01) / (t2 - t0);
    let (time, depth) = if curv > 0.0 {
        let tv = 0.5 * (t0 + t1) - d01 / (2.0 * curv);
        let tv = tv.clamp(t0, t2);
        let yv = y1 + d01 * (tv - t1) + curv * (tv - t0) * (tv - t1);
        (tv, yv.min(y1))
    } else {
        (t1, y1)
    };
    Some(DipFeature { order: 1, time, depth: depth.max(-1.0) })
}

/// Full width of the minimum at sample `i` where the curve recovers half way
/// back to 1, linearly interpolated. Open ends count up to the curve edge.
pub fn half_depth_width(times: &[f64], values: &[f64], i: usize) -> f64 {
    let half = (1.0 + values[i]) / 2.0;
    let crossing = |j: usize, k: usize| {
        let (a, b) = (values[j], values[k]);
        let f = if b != a { (half - a) / (b - a) } else { 0.0 };
        times[j] + f * (times[k] - times[j])
    };
    let mut l = i;
    while l > 0 && values[l - 1] < half {
        l -= 1;
    }
    let left = if l == 0 { times[0] } else { crossing(l, l - 1) };
    let mut r = i;
    while r + 1 < values.len() && values[r + 1] < half {
        r += 1;
    }
    let right = if r + 1 == values.len() { times[r] } else { crossing(r, r + 1) };
    right - left
}

/// [`find_first_dip`] with the default threshold.
pub fn extract_features(curve: &CoherenceCurve) -> Option<DipFeature> {
    find_first_dip(&curve.times, &curve.values, DEFAULT_DIP_THRESHOLD)
}

/// [`find_dip`] on a curve.
pub fn extract_features_with(curve: &CoherenceCurve, rule: &DipRule) -> Option<DipFeature> {
    find_dip(&curve.times, &curve.values, rule)
}
