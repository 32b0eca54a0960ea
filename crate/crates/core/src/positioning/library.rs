use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use super::features::{find_first_dip, DEFAULT_DIP_THRESHOLD};
use crate::coherence::{dip_time, CurveEvaluator, EngineKind, TimeGrid, DEFAULT_SAMPLES};
use crate::error::{invalid, Result};
use crate::geometry::dipolar_components;
use crate::nv::{nv_eigensystem, EnvSpin, FieldConfig, SensorConfig};

/// Evenly spaced axis `min + i·step`, i = 0..count.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let a = Self { min, max, step };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.max >= self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(invalid("axis needs step > 0 and max >= min"));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        ((self.max - self.min) / self.step).round() as usize + 1
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    /// Last grid value (may differ from `max` by rounding).
    pub fn last(&self) -> f64 {
        self.value(self.count() - 1)
    }
}

/// Polar grid around a sensor: R in nm, θ in rad from the sensor axis.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LibraryGrid {
    pub r: AxisRange,
    pub theta: AxisRange,
}

impl LibraryGrid {
    /// R ∈ [5, 30] nm in 0.02 nm steps, θ ∈ [0°, 90°] in 0.2° steps.
    pub fn survey() -> Self {
        Self {
            r: AxisRange { min: 5.0, max: 30.0, step: 0.02 },
            theta: AxisRange { min: 0.0, max: core::f64::consts::FRAC_PI_2, step: 0.2f64.to_radians() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.r.validate()?;
        self.theta.validate()?;
        if !(self.r.min > 0.0) {
            return Err(invalid("library radii must be positive"));
        }
        if self.theta.min < 0.0 || self.theta.last() > core::f64::consts::PI + 1e-12 {
            return Err(invalid("library angles must lie in [0, pi]"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.r.count() * self.theta.count()
    }

    /// Row-major index: R outer, θ inner.
    #[inline]
    pub fn index(&self, ir: usize, it: usize) -> usize {
        ir * self.theta.count() + it
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        let nt = self.theta.count();
        (idx / nt, idx % nt)
    }
}

/// Everything a library depends on.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LibrarySpec {
    pub grid: LibraryGrid,
    pub pulses: usize,
    pub field: FieldConfig,
    pub sensor: SensorConfig,
    /// Signed, rad/(μs·G).
    pub target_gamma: f64,
    pub engine: EngineKind,
    /// Samples of the canonical first-dip window.
    pub samples: usize,
}

impl LibrarySpec {
    pub fn new(grid: LibraryGrid, pulses: usize, field: FieldConfig, sensor: SensorConfig, engine: EngineKind) -> Self {
        Self { grid, pulses, field, sensor, target_gamma: crate::units::gamma_nv(), engine, samples: DEFAULT_SAMPLES }
    }
}

/// First-dip time (μs) and depth of one cell. Depth 1 marks a cell without
/// a dip; its time is then the predicted dip time.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellFeature {
    pub time: f64,
    pub depth: f64,
}

impl CellFeature {
    pub fn is_sentinel(&self) -> bool {
        self.depth >= 1.0
    }
}

/// Agreement of a random cell subset with a second engine.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpotCheck {
    pub engine: EngineKind,
    pub cells: usize,
    pub max_time_rel: f64,
    pub max_depth_abs: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub engine: EngineKind,
    pub version: String,
    pub config_hash: String,
    pub spot_check: Option<SpotCheck>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FingerprintLibrary {
    pub spec: LibrarySpec,
    /// Row-major, see [`LibraryGrid::index`].
    pub cells: Vec<CellFeature>,
    pub provenance: Provenance,
}

impl FingerprintLibrary {
    pub fn cell(&self, ir: usize, it: usize) -> CellFeature {
        self.cells[self.spec.grid.index(ir, it)]
    }
}

/// Per-cell evaluation with shared precomputation; cells are independent, so
/// callers may evaluate them in any order or in parallel.
#[derive(Clone, Debug)]
pub struct LibraryBuilder {
    spec: LibrarySpec,
    lambda: f64,
    splitting: f64,
    omega_e: f64,
    window: TimeGrid,
    half_width: f64,
}

impl LibraryBuilder {
    pub fn new(spec: LibrarySpec) -> Result<Self> {
        spec.grid.validate()?;
        spec.sensor.validate()?;
        spec.field.validate()?;
        if spec.pulses == 0 || spec.samples < 3 {
            return Err(invalid("library needs >= 1 pulse and >= 3 samples"));
        }
        let eig = nv_eigensystem(&spec.sensor, &spec.field)?;
        let omega_e = spec.field.larmor(spec.target_gamma);
        let window = TimeGrid::first_dip(spec.pulses, omega_e, spec.samples)?;
        let half_width = (2.5 / spec.pulses as f64).min(0.5);
        Ok(Self { spec, lambda: eig.lambda, splitting: eig.splitting, omega_e, window, half_width })
    }

    pub fn spec(&self) -> &LibrarySpec {
        &self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Canonical sampling grid shared with simulated curves.
    pub fn window(&self) -> TimeGrid {
        self.window
    }

    /// Unrenormalised (A_z, A_⊥) of a cell.
    pub fn couplings(&self, r: f64, theta: f64) -> Result<(f64, f64)> {
        dipolar_components(r, theta, self.spec.sensor.gamma, self.spec.target_gamma, 1.0)
    }

    /// Feature of the cell at grid indices (ir, it).
    pub fn cell(&self, ir: usize, it: usize) -> CellFeature {
        let r = self.spec.grid.r.value(ir);
        let theta = self.spec.grid.theta.value(it);
        self.feature_at(r, theta, self.spec.engine)
    }

    /// Feature at an arbitrary (R, θ) with a chosen engine.
    pub fn feature_at(&self, r: f64, theta: f64, engine: EngineKind) -> CellFeature {
        let Ok((a_z, a_perp)) = self.couplings(r, theta) else {
            return CellFeature { time: f64::NAN, depth: 1.0 };
        };
        let Ok(t0) = dip_time(self.spec.pulses, 1, self.omega_e, self.lambda, a_z) else {
            return CellFeature { time: f64::NAN, depth: 1.0 };
        };
        let sentinel = CellFeature { time: t0, depth: 1.0 };
        if a_perp == 0.0 {
            return sentinel;
        }
        let spin = EnvSpin::from_components(self.omega_e, a_z, a_perp);
        let Ok(ev) = CurveEvaluator::from_spins(
            self.lambda,
            self.splitting,
            alloc::vec![spin],
            self.spec.pulses,
            engine,
            false,
        ) else {
            return sentinel;
        };
        // Canonical samples within ±half_width of this cell's predicted dip.
        let w = &self.window;
        let lo = ((t0 * (1.0 - self.half_width) - w.start) / w.step).ceil().max(0.0) as usize;
        let hi_f = ((t0 * (1.0 + self.half_width) - w.start) / w.step).floor();
        if hi_f < 0.0 || lo >= w.len {
            return sentinel;
        }
        let hi = (hi_f as usize).min(w.len - 1);
        if hi < lo + 2 {
            return sentinel;
        }
        let mut times = Vec::with_capacity(hi - lo + 1);
        let mut values = Vec::with_capacity(hi - lo + 1);
        for j in lo..=hi {
            let t = w.at(j);
            times.push(t);
            values.push(ev.eval(t).unwrap_or(1.0));
        }
        match find_first_dip(&times, &values, DEFAULT_DIP_THRESHOLD) {
            Some(d) => CellFeature { time: d.time, depth: d.depth },
            None => sentinel,
        }
    }

    pub fn assemble(&self, cells: Vec<CellFeature>, provenance: Provenance) -> Result<FingerprintLibrary> {
        if cells.len() != self.spec.grid.cell_count() {
            return Err(invalid("cell count does not match the grid"));
        }
        Ok(FingerprintLibrary { spec: self.spec.clone(), cells, provenance })
    }

    /// Recomputes every `stride`-th cell (offset `offset`) with `engine` and
    /// reports the worst disagreement among cells that have a dip.
    pub fn spot_check(&self, lib: &FingerprintLibrary, engine: EngineKind, stride: usize, offset: usize) -> SpotCheck {
        let mut check = SpotCheck { engine, cells: 0, max_time_rel: 0.0, max_depth_abs: 0.0 };
        let stride = stride.max(1);
        let mut idx = offset % stride;
        while idx < lib.cells.len() {
            let (ir, it) = self.spec.grid.coords(idx);
            let a = lib.cells[idx];
            let b = self.feature_at(self.spec.grid.r.value(ir), self.spec.grid.theta.value(it), engine);
            check.cells += 1;
            if !a.is_sentinel() && !b.is_sentinel() {
                check.max_time_rel = check.max_time_rel.max((a.time - b.time).abs() / a.time);
                check.max_depth_abs = check.max_depth_abs.max((a.depth - b.depth).abs());
            } else if a.is_sentinel() != b.is_sentinel() {
                check.max_depth_abs = check.max_depth_abs.max((a.depth - b.depth).abs());
            }
            idx += stride;
        }
        check
    }
}

/// Sequential library build.
pub fn build_library(spec: &LibrarySpec) -> Result<FingerprintLibrary> {
    let b = LibraryBuilder::new(spec.clone())?;
    let g = spec.grid;
    let mut cells = Vec::with_capacity(g.cell_count());
    for ir in 0..g.r.count() {
        for it in 0..g.theta.count() {
            cells.push(b.cell(ir, it));
        }
    }
    let provenance =
        Provenance { engine: spec.engine, version: String::from(crate::VERSION), config_hash: String::new(), spot_check: None };
    b.assemble(cells, provenance)
}
