use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use super::matching::MatchResult;
use crate::error::{invalid, Result};
use crate::geometry::{Frame, Vec3};
use crate::nv::SensorConfig;

/// Integer voxel coordinates; the voxel centre is `key · v`.
pub type VoxelKey = [i64; 3];

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Region {
    pub voxels: usize,
    /// nm
    pub centroid: Vec3,
    /// Bounding box of voxel centres, nm.
    pub min: Vec3,
    pub max: Vec3,
    /// Diameter of the sphere with the region's volume, nm.
    pub resolution: f64,
    /// Largest bounding-box edge including one voxel, nm.
    pub max_extent: f64,
    /// voxels · v³, nm³
    pub volume: f64,
    /// Some sensor only admits this region through its θ → π − θ mirror.
    pub mirror_branch: bool,
}

impl Region {
    /// Whether `p` lies inside the bounding box grown by half a voxel.
    pub fn contains(&self, p: Vec3, voxel: f64) -> bool {
        (0..3).all(|a| p.0[a] >= self.min.0[a] - voxel / 2.0 && p.0[a] <= self.max.0[a] + voxel / 2.0)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PositionEstimate {
    /// Largest region first.
    pub regions: Vec<Region>,
    pub voxel: f64,
    pub ambiguous: bool,
    pub degenerate_geometry: bool,
    pub diagnostics: Vec<String>,
}

impl PositionEstimate {
    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn best(&self) -> Option<&Region> {
        self.regions.first()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.regions.iter().any(|r| r.contains(p, self.voxel))
    }
}

#[derive(Clone, Debug)]
struct SensorView {
    position: Vec3,
    frame: Frame,
    matched: MatchResult,
    r_lo: f64,
    r_hi: f64,
}

/// Voxel scan split into independent x-slabs.
#[derive(Clone, Debug)]
pub struct IntersectionSetup {
    views: Vec<SensorView>,
    voxel: f64,
    lo: VoxelKey,
    hi: VoxelKey,
    degenerate: bool,
    diagnostics: Vec<String>,
}

impl IntersectionSetup {
    pub fn new(sensors: &[SensorConfig], matches: &[MatchResult], voxel: f64) -> Result<Self> {
        if sensors.len() != matches.len() || sensors.is_empty() {
            return Err(invalid("need one match result per sensor"));
        }
        if !(voxel > 0.0) || !voxel.is_finite() {
            return Err(invalid("voxel size must be positive"));
        }
        let mut diagnostics = Vec::new();
        let mut views = Vec::new();
        for (s, m) in sensors.iter().zip(matches) {
            let frame = s.frame()?;
            let r_lo = m.boxes.iter().map(|b| b.r[0] - b.pad_r).fold(f64::INFINITY, f64::min) - voxel;
            let r_hi = m.boxes.iter().map(|b| b.r[1] + b.pad_r).fold(0.0, f64::max) + voxel;
            if m.boxes.is_empty() {
                diagnostics.push(format!("sensor {}: no matching library cells", s.id));
            }
            views.push(SensorView { position: s.position, frame, matched: m.clone(), r_lo: r_lo.max(0.0), r_hi });
        }
        let degenerate = degenerate_geometry(sensors, voxel);
        if degenerate {
            diagnostics.push(String::from("sensor layout is degenerate (fewer than three non-collinear sensors)"));
        }
        let mut lo = [i64::MIN; 3];
        let mut hi = [i64::MAX; 3];
        for v in &views {
            for a in 0..3 {
                lo[a] = lo[a].max(((v.position.0[a] - v.r_hi) / voxel).ceil() as i64);
                hi[a] = hi[a].min(((v.position.0[a] + v.r_hi) / voxel).floor() as i64);
            }
        }
        if views.iter().any(|v| v.matched.boxes.is_empty()) {
            hi = [lo[0] - 1, lo[1] - 1, lo[2] - 1];
        }
        Ok(Self { views, voxel, lo, hi, degenerate, diagnostics })
    }

    pub fn slab_count(&self) -> usize {
        (self.hi[0] - self.lo[0] + 1).max(0) as usize
    }

    /// Voxels in x-slab `s` consistent with every sensor; the flag marks
    /// voxels that needed a mirrored angle.
    pub fn scan_slab(&self, s: usize) -> Vec<(VoxelKey, bool)> {
        let v = self.voxel;
        let kx = self.lo[0] + s as i64;
        let mut out = Vec::new();
        for ky in self.lo[1]..=self.hi[1] {
            for kz in self.lo[2]..=self.hi[2] {
                let p = Vec3::new(kx as f64 * v, ky as f64 * v, kz as f64 * v);
                if let Some(mirror) = self.consistent(p) {
                    out.push(([kx, ky, kz], mirror));
                }
            }
        }
        out
    }

    fn consistent(&self, p: Vec3) -> Option<bool> {
        let v = self.voxel;
        let mut mirror = false;
        for view in &self.views {
            let d = p - view.position;
            let r = d.norm();
            if r < view.r_lo || r > view.r_hi || r == 0.0 {
                return None;
            }
            let theta = (d.dot(&view.frame.z) / r).clamp(-1.0, 1.0).acos();
            let (er, et) = (v / 2.0, v / (2.0 * r));
            if !view.matched.contains_padded(r, theta, er, et) {
                if view.matched.contains_padded(r, PI - theta, er, et) {
                    mirror = true;
                } else {
                    return None;
                }
            }
        }
        Some(mirror)
    }

    /// Groups voxels into 26-connected regions.
    pub fn assemble(&self, mut voxels: Vec<(VoxelKey, bool)>) -> PositionEstimate {
        voxels.sort_by(|a, b| a.0.cmp(&b.0));
        voxels.dedup_by(|a, b| a.0 == b.0);
        let v = self.voxel;
        let keys: Vec<VoxelKey> = voxels.iter().map(|x| x.0).collect();
        let mut seen = alloc::vec![false; keys.len()];
        let mut regions = Vec::new();
        let mut stack = Vec::new();
        for start in 0..keys.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut sum = [0.0f64; 3];
            let mut min = [i64::MAX; 3];
            let mut max = [i64::MIN; 3];
            let mut count = 0usize;
            let mut mirror = false;
            while let Some(i) = stack.pop() {
                let k = keys[i];
                count += 1;
                mirror |= voxels[i].1;
                for a in 0..3 {
                    sum[a] += k[a] as f64 * v;
                    min[a] = min[a].min(k[a]);
                    max[a] = max[a].max(k[a]);
                }
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        for dz in -1..=1 {
                            let n = [k[0] + dx, k[1] + dy, k[2] + dz];
                            if let Ok(j) = keys.binary_search(&n) {
                                if !seen[j] {
                                    seen[j] = true;
                                    stack.push(j);
                                }
                            }
                        }
                    }
                }
            }
            let c = count as f64;
            let minv = Vec3::new(min[0] as f64 * v, min[1] as f64 * v, min[2] as f64 * v);
            let maxv = Vec3::new(max[0] as f64 * v, max[1] as f64 * v, max[2] as f64 * v);
            let ext = maxv - minv;
            regions.push(Region {
                voxels: count,
                centroid: Vec3::new(sum[0] / c, sum[1] / c, sum[2] / c),
                min: minv,
                max: maxv,
                resolution: (6.0 * c * v * v * v / PI).cbrt(),
                max_extent: ext.x().max(ext.y()).max(ext.z()) + v,
                volume: c * v * v * v,
                mirror_branch: mirror,
            });
        }
        regions.sort_by(|a, b| b.voxels.cmp(&a.voxels).then(a.min.0.partial_cmp(&b.min.0).unwrap_or(core::cmp::Ordering::Equal)));
        let mut diagnostics = self.diagnostics.clone();
        if regions.is_empty() && !self.views.iter().any(|w| w.matched.boxes.is_empty()) {
            diagnostics.push(String::from("no voxel is consistent with every sensor"));
        }
        PositionEstimate {
            ambiguous: self.degenerate || regions.len() > 1,
            regions,
            voxel: v,
            degenerate_geometry: self.degenerate,
            diagnostics,
        }
    }
}

fn degenerate_geometry(sensors: &[SensorConfig], voxel: f64) -> bool {
    if sensors.len() < 3 {
        return true;
    }
    let p0 = sensors[0].position;
    let mut span = 0.0f64;
    for s in sensors {
        span = span.max((s.position - p0).norm());
    }
    if span < voxel {
        return true;
    }
    // Largest triangle area spanned with the first sensor.
    let mut area = 0.0f64;
    for i in 1..sensors.len() {
        for j in i + 1..sensors.len() {
            area = area.max((sensors[i].position - p0).cross(&(sensors[j].position - p0)).norm());
        }
    }
    area < voxel * span
}

/// Voxel-consistency intersection of per-sensor (R, θ) matches.
pub fn intersect_sensors(sensors: &[SensorConfig], matches: &[MatchResult], voxel: f64) -> Result<PositionEstimate> {
    let setup = IntersectionSetup::new(sensors, matches, voxel)?;
    let mut voxels = Vec::new();
    for s in 0..setup.slab_count() {
        voxels.extend(setup.scan_slab(s));
    }
    Ok(setup.assemble(voxels))
}
