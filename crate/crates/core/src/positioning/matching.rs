use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::features::DipFeature;
use super::library::{FingerprintLibrary, LibraryGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchTolerance {
    /// Relative dip-time tolerance.
    pub time: f64,
    /// Absolute depth tolerance.
    pub depth: f64,
}

impl Default for MatchTolerance {
    fn default() -> Self {
        Self { time: 0.001, depth: 0.02 }
    }
}

/// Bounding box of one connected group of matched cells, in grid values.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntervalBox {
    /// nm
    pub r: [f64; 2],
    /// rad
    pub theta: [f64; 2],
    pub cells: usize,
    /// Half grid steps: the box covers the matched cells, not just their centres.
    pub pad_r: f64,
    pub pad_theta: f64,
}

impl IntervalBox {
    pub fn contains(&self, r: f64, theta: f64) -> bool {
        self.contains_padded(r, theta, 0.0, 0.0)
    }

    /// Membership with extra padding on top of the half-step padding.
    pub fn contains_padded(&self, r: f64, theta: f64, extra_r: f64, extra_theta: f64) -> bool {
        let pr = self.pad_r + extra_r;
        let pt = self.pad_theta + extra_theta;
        r >= self.r[0] - pr && r <= self.r[1] + pr && theta >= self.theta[0] - pt && theta <= self.theta[1] + pt
    }

    pub fn r_width(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    pub fn theta_width(&self) -> f64 {
        self.theta[1] - self.theta[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NearestCell {
    pub r: f64,
    pub theta: f64,
    pub time: f64,
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub boxes: Vec<IntervalBox>,
    /// Matched cell indices, ascending.
    pub cells: Vec<usize>,
    pub tolerance: MatchTolerance,
    /// Closest cell in tolerance-scaled distance, reported when nothing matched.
    pub nearest: Option<NearestCell>,
    /// Grid of `cells`. Without it only the boxes are known and
    /// membership falls back to them.
    pub grid: Option<LibraryGrid>,
}

impl MatchResult {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, r: f64, theta: f64) -> bool {
        self.contains_padded(r, theta, 0.0, 0.0)
    }

    /// Whether (r, θ) lies in a matched cell (each cell spans half a grid
    /// step either side of its centre) grown by `extra_r`, `extra_theta`.
    pub fn contains_padded(&self, r: f64, theta: f64, extra_r: f64, extra_theta: f64) -> bool {
        let Some(g) = &self.grid else {
            return self.boxes.iter().any(|b| b.contains_padded(r, theta, extra_r, extra_theta));
        };
        let Some((r0, r1)) = axis_span(&g.r, r, extra_r) else { return false };
        let Some((t0, t1)) = axis_span(&g.theta, theta, extra_theta) else { return false };
        (r0..=r1).any(|ir| (t0..=t1).any(|it| self.cells.binary_search(&g.index(ir, it)).is_ok()))
    }
}

/// Indices of grid points within half a step plus `extra` of `x`.
fn axis_span(axis: &super::library::AxisRange, x: f64, extra: f64) -> Option<(usize, usize)> {
    let reach = axis.step / 2.0 + extra;
    let lo = ((x - reach - axis.min) / axis.step).ceil().max(0.0);
    let hi = ((x + reach - axis.min) / axis.step).floor();
    if hi < lo || hi < 0.0 {
        return None;
    }
    let hi = (hi as usize).min(axis.count() - 1);
    let lo = lo as usize;
    (lo <= hi).then_some((lo, hi))
}

/// All cells with |t_cell − t|/t ≤ tol.time and |d_cell − d| ≤ tol.depth,
/// grouped into 8-connected components.
pub fn match_features(feature: &DipFeature, lib: &FingerprintLibrary, tol: MatchTolerance) -> MatchResult {
    let g = &lib.spec.grid;
    let (nr, nt) = (g.r.count(), g.theta.count());
    let ok = |c: &super::library::CellFeature| {
        !c.is_sentinel()
            && (c.time - feature.time).abs() <= tol.time * feature.time
            && (c.depth - feature.depth).abs() <= tol.depth
    };
    let mut mask = vec![false; lib.cells.len()];
    let mut cells = Vec::new();
    for (i, c) in lib.cells.iter().enumerate() {
        if ok(c) {
            mask[i] = true;
            cells.push(i);
        }
    }

    let mut seen = vec![false; lib.cells.len()];
    let mut boxes = Vec::new();
    let mut stack = Vec::new();
    for &start in &cells {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut r0, mut r1, mut t0, mut t1) = (usize::MAX, 0, usize::MAX, 0);
        let mut count = 0;
        while let Some(idx) = stack.pop() {
            let (ir, it) = g.coords(idx);
            count += 1;
            r0 = r0.min(ir);
            r1 = r1.max(ir);
            t0 = t0.min(it);
            t1 = t1.max(it);
            for dr in -1i64..=1 {
                for dt in -1i64..=1 {
                    let (jr, jt) = (ir as i64 + dr, it as i64 + dt);
                    if jr < 0 || jt < 0 || jr >= nr as i64 || jt >= nt as i64 {
                        continue;
                    }
                    let j = g.index(jr as usize, jt as usize);
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        boxes.push(IntervalBox {
            r: [g.r.value(r0), g.r.value(r1)],
            theta: [g.theta.value(t0), g.theta.value(t1)],
            cells: count,
            pad_r: g.r.step / 2.0,
            pad_theta: g.theta.step / 2.0,
        });
    }

    let nearest = if cells.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for (i, c) in lib.cells.iter().enumerate() {
            if c.is_sentinel() {
                continue;
            }
            let dt = (c.time - feature.time) / (tol.time.max(1e-300) * feature.time);
            let dd = (c.depth - feature.depth) / tol.depth.max(1e-300);
            let d = dt * dt + dd * dd;
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| {
            let (ir, it) = g.coords(i);
            NearestCell { r: g.r.value(ir), theta: g.theta.value(it), time: lib.cells[i].time, depth: lib.cells[i].depth }
        })
    } else {
        None
    };

    MatchResult { boxes, cells, tolerance: tol, nearest, grid: Some(*g) }
}
