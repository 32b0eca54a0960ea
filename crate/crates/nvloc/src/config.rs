//! Run configuration (TOML).
//!
//! Units follow the published conventions: strain and gyromagnetic ratios
//! in linear MHz and MHz/G, lengths in nm, times in μs, angles in degrees.
//! Everything is converted to internal angular units when the config is
//! resolved. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nvloc_core::bath::BathSpec;
use nvloc_core::coherence::{EngineKind, TimeGrid, DEFAULT_SAMPLES};
use nvloc_core::geometry::{axis_111, from_polar, Frame};
use nvloc_core::nv::{FieldConfig, SensorConfig, TargetSpec};
use nvloc_core::positioning::{AxisRange, LibraryGrid, LibrarySpec, LocateOptions, MatchTolerance};
use nvloc_core::sequence::PulseSequence;
use nvloc_core::{units, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_engine")]
    pub engine: EngineKind,
    /// Keep the h²/2E term of the sensor energy.
    #[serde(default)]
    pub quadratic: bool,
    /// Include the other sensors as environment spins in simulated curves.
    #[serde(default)]
    pub bystanders: bool,
    pub field: FieldSection,
    pub sequence: SequenceSection,
    #[serde(default)]
    pub time: Option<TimeSection>,
    #[serde(default)]
    pub target: Option<TargetSection>,
    pub sensors: Vec<SensorSection>,
    #[serde(default)]
    pub library: Option<LibrarySection>,
    #[serde(default)]
    pub matching: MatchingSection,
    #[serde(default)]
    pub bath: Option<BathSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_engine() -> EngineKind {
    EngineKind::Exact
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub gauss: f64,
    /// Normalised on load; defaults to [111].
    #[serde(default)]
    pub direction: Option<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Cpmg,
    Xy8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    #[serde(default = "default_kind")]
    pub kind: SequenceKind,
    /// π pulses for CPMG, repetitions for XY8.
    pub pulses: usize,
}

fn default_kind() -> SequenceKind {
    SequenceKind::Cpmg
}

/// Explicit time grid; without it curves use the first-dip window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(default)]
    pub position: [f64; 3],
    /// MHz/G, signed. Defaults to the electron value.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Shift applied to the target after sensors are placed, nm.
    #[serde(default)]
    pub displacement: Option<[f64; 3]>,
}

/// Sensor position relative to the target: the target sits at distance `r`
/// and polar angles (θ, φ) in the sensor's axis frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub r: f64,
    pub theta_deg: f64,
    #[serde(default)]
    pub phi_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub id: String,
    /// MHz
    pub strain: f64,
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    #[serde(default)]
    pub placement: Option<Placement>,
    #[serde(default)]
    pub axis: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibrarySection {
    /// [min, max, step], nm.
    #[serde(default = "default_r_range")]
    pub r: [f64; 3],
    /// [min, max, step], degrees.
    #[serde(default = "default_theta_range")]
    pub theta_deg: [f64; 3],
    /// Defaults to the Magnus closed form.
    #[serde(default)]
    pub engine: Option<EngineKind>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Fraction of cells recomputed with the other engine (0 disables).
    #[serde(default = "default_spot_check")]
    pub spot_check: f64,
    /// Also write a CSV export; defaults to grids of at most 10⁴ cells.
    #[serde(default)]
    pub csv: Option<bool>,
}

fn default_r_range() -> [f64; 3] {
    [5.0, 30.0, 0.02]
}

fn default_theta_range() -> [f64; 3] {
    [0.0, 90.0, 0.2]
}

fn default_spot_check() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingSection {
    #[serde(default = "default_tol_time")]
    pub tol_time: f64,
    #[serde(default = "default_tol_depth")]
    pub tol_depth: f64,
    /// nm
    #[serde(default = "default_voxel")]
    pub voxel: f64,
    /// Pulse spacings.
    #[serde(default = "default_min_width")]
    pub min_dip_width: f64,
}

fn default_tol_time() -> f64 {
    MatchTolerance::default().time
}

fn default_tol_depth() -> f64 {
    MatchTolerance::default().depth
}

fn default_voxel() -> f64 {
    LocateOptions::default().voxel
}

fn default_min_width() -> f64 {
    LocateOptions::default().min_dip_width
}

impl Default for MatchingSection {
    fn default() -> Self {
        Self {
            tol_time: default_tol_time(),
            tol_depth: default_tol_depth(),
            voxel: default_voxel(),
            min_dip_width: default_min_width(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    #[serde(default = "default_abundance")]
    pub abundance: f64,
    /// nm
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// nm
    #[serde(default = "default_lattice")]
    pub lattice_constant: f64,
    /// Pairs with |D_zz| or |δ| below this are dropped, Hz.
    #[serde(default = "default_floor")]
    pub pair_floor_hz: f64,
    /// Seeds seed, seed+1, ...
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Sensor whose bath is simulated; defaults to the first.
    #[serde(default)]
    pub sensor: Option<String>,
    /// μs
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_bath_samples")]
    pub samples: usize,
}

fn default_abundance() -> f64 {
    units::C13_NATURAL_ABUNDANCE
}

fn default_cutoff() -> f64 {
    8.0
}

fn default_lattice() -> f64 {
    units::DIAMOND_LATTICE_NM
}

fn default_floor() -> f64 {
    1.0
}

fn default_realizations() -> usize {
    5
}

fn default_t_max() -> f64 {
    1000.0
}

fn default_bath_samples() -> usize {
    201
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// Time sampling of simulated curves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TimeSpec {
    FirstDip { samples: usize },
    Explicit(TimeGrid),
}

/// Config with units converted and positions resolved.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub engine: EngineKind,
    pub quadratic: bool,
    pub bystanders: bool,
    pub field: FieldConfig,
    /// CPMG pulse count actually applied.
    pub pulses: usize,
    pub sequence_note: Option<String>,
    pub time: TimeSpec,
    pub target: Option<TargetSpec>,
    /// Shift already applied to `target`, nm.
    pub target_displacement: Option<Vec3>,
    pub sensors: Vec<SensorConfig>,
    pub library: Option<ResolvedLibrary>,
    pub locate: LocateOptions,
    pub bath: Option<ResolvedBath>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedLibrary {
    pub grid: LibraryGrid,
    pub engine: EngineKind,
    pub samples: usize,
    pub spot_check: f64,
    #[serde(skip)]
    pub csv: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedBath {
    pub spec: BathSpec,
    pub realizations: usize,
    pub sensor: usize,
    pub times: TimeGrid,
}

impl Resolved {
    /// Library specification for sensor `i`.
    pub fn library_spec(&self, i: usize) -> Option<LibrarySpec> {
        let lib = self.library.as_ref()?;
        let mut spec = LibrarySpec::new(lib.grid, self.pulses, self.field, self.sensors[i].clone(), lib.engine);
        spec.samples = lib.samples;
        if let Some(t) = &self.target {
            spec.target_gamma = t.gamma;
        }
        Some(spec)
    }

    pub fn target_gamma(&self) -> f64 {
        self.target.map_or(units::gamma_nv(), |t| t.gamma)
    }

    /// Sample times of simulated curves.
    pub fn times(&self) -> std::result::Result<Vec<f64>, nvloc_core::Error> {
        match self.time {
            TimeSpec::Explicit(g) => Ok(g.times()),
            TimeSpec::FirstDip { samples } => {
                Ok(TimeGrid::first_dip(self.pulses, self.field.larmor(self.target_gamma()), samples)?.times())
            }
        }
    }
}

/// A semantic error tied to a key path such as `sensors[1].strain`.
struct KeyError {
    key: String,
    msg: String,
}

fn key_err(key: impl Into<String>, msg: impl Into<String>) -> KeyError {
    KeyError { key: key.into(), msg: msg.into() }
}

fn unit(v: [f64; 3], key: &str) -> std::result::Result<Vec3, KeyError> {
    Vec3(v).normalized().map_err(|_| key_err(key, "must be a nonzero vector"))
}

fn range(v: [f64; 3], scale: f64, key: &str) -> std::result::Result<AxisRange, KeyError> {
    AxisRange::new(v[0] * scale, v[1] * scale, v[2] * scale)
        .map_err(|e| key_err(key, format!("expected [min, max, step] with step > 0 and max >= min ({e})")))
}

impl RunConfig {
    pub fn from_toml(src: &str) -> std::result::Result<Self, String> {
        toml::from_str(src).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg = Self::from_toml(&src).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, src))
    }

    /// Converts units and validates. `src`, when given, is used to attach a
    /// line number to semantic errors.
    pub fn resolve(&self, src: Option<&str>) -> Result<Resolved> {
        self.resolve_inner().map_err(|e| {
            let line = src.and_then(|s| find_key_line(s, &e.key));
            match line {
                Some(l) => CliError::Config(format!("line {l}: {}: {}", e.key, e.msg)),
                None => CliError::Config(format!("{}: {}", e.key, e.msg)),
            }
        })
    }

    fn resolve_inner(&self) -> std::result::Result<Resolved, KeyError> {
        let direction = match self.field.direction {
            Some(d) => unit(d, "field.direction")?,
            None => axis_111(),
        };
        let field = FieldConfig { magnitude: self.field.gauss, direction };
        field.validate().map_err(|e| key_err("field.gauss", e.to_string()))?;

        if self.sequence.pulses == 0 {
            return Err(key_err("sequence.pulses", "must be >= 1"));
        }
        let (pulses, sequence_note) = match self.sequence.kind {
            SequenceKind::Cpmg => (self.sequence.pulses, None),
            SequenceKind::Xy8 => {
                let s = PulseSequence::xy8(self.sequence.pulses, 1.0).map_err(|e| key_err("sequence.pulses", e.to_string()))?;
                (s.pulses, s.note)
            }
        };

        let time = match &self.time {
            None => TimeSpec::FirstDip { samples: DEFAULT_SAMPLES },
            Some(t) => match (t.start, t.stop) {
                (None, None) => TimeSpec::FirstDip { samples: t.samples },
                (start, Some(stop)) => TimeSpec::Explicit(
                    TimeGrid::new(start.unwrap_or(0.0), stop, t.samples).map_err(|e| key_err("time.stop", e.to_string()))?,
                ),
                (Some(_), None) => return Err(key_err("time.start", "needs time.stop as well")),
            },
        };
        if let TimeSpec::FirstDip { samples } = time {
            if samples < 3 {
                return Err(key_err("time.samples", "must be >= 3"));
            }
        }

        let target = match &self.target {
            None => None,
            Some(t) => {
                let gamma = units::angular(t.gamma.unwrap_or(units::GAMMA_NV_MHZ_PER_GAUSS));
                if gamma == 0.0 || !gamma.is_finite() {
                    return Err(key_err("target.gamma", "must be finite and nonzero"));
                }
                Some(TargetSpec { position: Vec3(t.position), gamma })
            }
        };

        if self.sensors.is_empty() {
            return Err(key_err("sensors", "at least one sensor is required"));
        }
        let mut sensors = Vec::with_capacity(self.sensors.len());
        for (i, s) in self.sensors.iter().enumerate() {
            let key = |k: &str| format!("sensors[{i}].{k}");
            if self.sensors[..i].iter().any(|o| o.id == s.id) {
                return Err(key_err(key("id"), format!("duplicate sensor id '{}'", s.id)));
            }
            let axis = match s.axis {
                Some(a) => unit(a, &key("axis"))?,
                None => axis_111(),
            };
            let position = match (&s.position, &s.placement) {
                (Some(p), None) => Vec3(*p),
                (None, Some(pl)) => {
                    let t = target.ok_or_else(|| key_err(key("placement"), "placement needs a [target]"))?;
                    if !(pl.r > 0.0) {
                        return Err(key_err(key("placement"), "r must be positive"));
                    }
                    let frame = Frame::from_axis(axis).map_err(|e| key_err(key("axis"), e.to_string()))?;
                    let offset = from_polar(Vec3::ZERO, &frame, pl.r, pl.theta_deg.to_radians(), pl.phi_deg.to_radians());
                    t.position - offset
                }
                _ => return Err(key_err(key("position"), "give exactly one of position or placement")),
            };
            let mut sc = SensorConfig::new(s.id.clone(), position, s.strain);
            sc.axis = axis;
            sc.validate().map_err(|e| key_err(key("strain"), e.to_string()))?;
            sensors.push(sc);
        }

        // Displace the target only after the sensors are placed around it.
        let target = match (target, self.target.as_ref().and_then(|t| t.displacement)) {
            (Some(mut t), Some(d)) => {
                t.position = t.position + Vec3(d);
                Some(t)
            }
            (t, _) => t,
        };
        if let Some(t) = &target {
            if let Some(s) = sensors.iter().find(|s| (s.position - t.position).norm() == 0.0) {
                return Err(key_err("target.position", format!("target coincides with sensor {}", s.id)));
            }
        }

        let library = match &self.library {
            None => None,
            Some(l) => {
                let grid = LibraryGrid {
                    r: range(l.r, 1.0, "library.r")?,
                    theta: range(l.theta_deg, std::f64::consts::PI / 180.0, "library.theta_deg")?,
                };
                grid.validate().map_err(|e| key_err("library.r", e.to_string()))?;
                if l.samples < 3 {
                    return Err(key_err("library.samples", "must be >= 3"));
                }
                if !(0.0..=1.0).contains(&l.spot_check) {
                    return Err(key_err("library.spot_check", "must lie in [0, 1]"));
                }
                Some(ResolvedLibrary {
                    grid,
                    engine: l.engine.unwrap_or(EngineKind::Magnus),
                    samples: l.samples,
                    spot_check: l.spot_check,
                    csv: l.csv.unwrap_or(grid.cell_count() <= 10_000),
                })
            }
        };

        let m = &self.matching;
        if !(m.tol_time >= 0.0) || !(m.tol_depth >= 0.0) {
            return Err(key_err("matching.tol_time", "tolerances must be >= 0"));
        }
        if !(m.voxel > 0.0) {
            return Err(key_err("matching.voxel", "must be positive"));
        }
        if !(m.min_dip_width >= 0.0) {
            return Err(key_err("matching.min_dip_width", "must be >= 0"));
        }
        let locate = LocateOptions {
            tolerance: MatchTolerance { time: m.tol_time, depth: m.tol_depth },
            voxel: m.voxel,
            min_dip_width: m.min_dip_width,
        };

        let bath = match &self.bath {
            None => None,
            Some(b) => {
                let spec = BathSpec {
                    seed: self.seed,
                    abundance: b.abundance,
                    cutoff: b.cutoff,
                    lattice_constant: b.lattice_constant,
                    pair_floor: units::angular(b.pair_floor_hz * 1e-6),
                };
                spec.validate().map_err(|e| key_err("bath.abundance", e.to_string()))?;
                if b.realizations == 0 {
                    return Err(key_err("bath.realizations", "must be >= 1"));
                }
                let sensor = match &b.sensor {
                    None => 0,
                    Some(id) => sensors
                        .iter()
                        .position(|s| &s.id == id)
                        .ok_or_else(|| key_err("bath.sensor", format!("no sensor '{id}'")))?,
                };
                let times = TimeGrid::new(0.0, b.t_max, b.samples).map_err(|e| key_err("bath.t_max", e.to_string()))?;
                Some(ResolvedBath { spec, realizations: b.realizations, sensor, times })
            }
        };

        Ok(Resolved {
            seed: self.seed,
            engine: self.engine,
            quadratic: self.quadratic,
            bystanders: self.bystanders,
            field,
            pulses,
            sequence_note,
            time,
            target,
            target_displacement: self.target.as_ref().and_then(|t| t.displacement).map(Vec3),
            sensors,
            library,
            locate,
            bath,
        })
    }
}

/// 1-based line of a key path like `sensors[1].strain` or `field.gauss`.
pub fn find_key_line(src: &str, key: &str) -> Option<usize> {
    let mut parts = key.split('.');
    let first = parts.next()?;
    let second = parts.next();
    let (table, index) = match first.find('[') {
        Some(b) => (&first[..b], first[b + 1..first.len() - 1].parse::<usize>().ok()),
        None => (first, None),
    };
    let lines: Vec<&str> = src.lines().collect();
    let is_key = |l: &str, k: &str| {
        let l = l.trim_start();
        l.strip_prefix(k).is_some_and(|rest| rest.trim_start().starts_with('='))
    };
    let header = |l: &str| {
        let l = l.trim();
        l.starts_with('[').then(|| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
    };
    let Some(sub) = second else {
        // Top-level key or a table header.
        if let Some(i) = lines.iter().position(|l| header(l).is_none() && is_key(l, table)) {
            if lines[..i].iter().all(|l| header(l).is_none()) {
                return Some(i + 1);
            }
        }
        return lines.iter().position(|l| header(l).as_deref() == Some(table)).map(|i| i + 1);
    };
    let mut seen = 0usize;
    let mut start = None;
    for (i, l) in lines.iter().enumerate() {
        if header(l).as_deref() == Some(table) {
            if index.is_none_or(|k| k == seen) {
                start = Some(i);
                break;
            }
            seen += 1;
        }
    }
    let start = start?;
    for (i, l) in lines.iter().enumerate().skip(start + 1) {
        if header(l).is_some() {
            break;
        }
        if is_key(l, sub) {
            return Some(i + 1);
        }
    }
    Some(start + 1)
}
