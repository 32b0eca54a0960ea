//! The four verbs. Each parallel loop maps independent work items and
//! collects them in index order, so outputs do not depend on thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nvloc_core::bath::{cce2_cpmg, generate_bath};
use nvloc_core::coherence::{CoherenceCurve, CurveEvaluator, EngineKind, Scenario};
use nvloc_core::positioning::{
    extract_features_with, match_features, DipFeature, DipRule, FingerprintLibrary, IntersectionSetup, IntervalBox,
    LibraryBuilder, MatchResult, NearestCell, PositionEstimate, Provenance, SpotCheck, VoxelKey,
};
use nvloc_core::{Vec3, VERSION};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Resolved, RunConfig};
use crate::error::{CliError, Result};
use crate::hash::{config_hash, ControlSpec};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    Simulate,
    Library,
    Locate,
    Bath,
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub engine: Option<EngineKind>,
    pub force: bool,
}

/// A loaded and resolved run.
pub struct Run {
    pub cfg: Resolved,
    pub hash: String,
    pub out: PathBuf,
    pub force: bool,
    pool: rayon::ThreadPool,
}

impl Run {
    pub fn new(opts: &Options) -> Result<Self> {
        let (mut raw, src) = RunConfig::load(&opts.config)?;
        if let Some(seed) = opts.seed {
            raw.seed = seed;
        }
        if let Some(engine) = opts.engine {
            raw.engine = engine;
            if let Some(l) = raw.library.as_mut() {
                l.engine = Some(engine);
            }
        }
        let cfg = raw.resolve(Some(&src))?;
        let out = opts.out.clone().or_else(|| raw.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        Self::from_resolved(cfg, out, opts.threads, opts.force)
    }

    pub fn from_resolved(cfg: Resolved, out: PathBuf, threads: Option<usize>, force: bool) -> Result<Self> {
        if threads == Some(0) {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        Ok(Self { hash: config_hash(&cfg), cfg, out, force, pool })
    }

    /// Runs a verb and returns the human-readable summary.
    pub fn execute(&self, verb: Verb) -> Result<String> {
        match verb {
            Verb::Simulate => self.simulate().map(|s| s.to_string()),
            Verb::Library => self.library().map(|s| s.to_string()),
            Verb::Locate => self.locate().map(|s| s.to_string()),
            Verb::Bath => self.bath().map(|s| s.to_string()),
        }
    }

    fn control(&self, i: usize) -> ControlSpec {
        ControlSpec::new(self.cfg.pulses, self.cfg.field, &self.cfg.sensors[i], self.cfg.target_gamma())
    }

    /// Dip rule for curves of this run: narrow dips are skipped.
    fn dip_rule(&self) -> DipRule {
        let spacing = std::f64::consts::PI / self.cfg.field.larmor(self.cfg.target_gamma()).abs();
        DipRule { min_width: self.cfg.locate.min_dip_width * spacing, ..DipRule::default() }
    }

    fn scenario(&self, i: usize) -> Scenario {
        let c = &self.cfg;
        let mut s = Scenario::new(c.sensors[i].clone(), c.field);
        if let Some(t) = c.target {
            s = s.with_target(t);
        }
        if c.bystanders {
            let others = c.sensors.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, o)| o.clone()).collect();
            s = s.with_bystanders(others);
        }
        s.quadratic = c.quadratic;
        s
    }

    /// Curve of sensor `i`, evaluated in parallel over times.
    pub fn curve(&self, i: usize) -> Result<CoherenceCurve> {
        let scenario = self.scenario(i);
        let ev = CurveEvaluator::new(&scenario, self.cfg.pulses, self.cfg.engine)?;
        let times = self.cfg.times()?;
        let values = self.pool.install(|| times.par_iter().map(|&t| ev.eval(t)).collect::<Result<Vec<_>, _>>())?;
        Ok(CoherenceCurve { times, values, engine: self.cfg.engine, pulses: self.cfg.pulses, label: scenario.sensor.id })
    }

    pub fn simulate(&self) -> Result<SimulateSummary> {
        let rule = self.dip_rule();
        let mut sensors = Vec::new();
        for (i, s) in self.cfg.sensors.iter().enumerate() {
            let curve = self.curve(i)?;
            let control = self.control(i);
            let meta = io::CurveMeta {
                sensor: s.id.clone(),
                engine: self.cfg.engine,
                pulses: self.cfg.pulses,
                version: VERSION.to_string(),
                config_hash: self.hash.clone(),
                control_hash: control.hash(),
                control,
                note: self.cfg.sequence_note.clone(),
            };
            let path = io::curve_path(&self.out, &s.id);
            io::write_curve(&path, &curve, &meta)?;
            sensors.push(SimulatedSensor {
                id: s.id.clone(),
                file: file_name(&path),
                min_coherence: curve.values.iter().copied().fold(f64::INFINITY, f64::min),
                first_dip: extract_features_with(&curve, &rule),
            });
        }
        let summary = SimulateSummary {
            config_hash: self.hash.clone(),
            version: VERSION.to_string(),
            engine: self.cfg.engine,
            pulses: self.cfg.pulses,
            sensors,
        };
        io::write_json(&self.out.join("simulate.json"), &summary)?;
        Ok(summary)
    }

    /// Builds one sensor's library in parallel and spot-checks it.
    pub fn build_library(&self, i: usize) -> Result<FingerprintLibrary> {
        let lib_cfg = self.cfg.library.as_ref().ok_or_else(|| CliError::Config("no [library] section".into()))?;
        let spec = self.cfg.library_spec(i).expect("library section present");
        let builder = LibraryBuilder::new(spec)?;
        let grid = builder.spec().grid;
        let cells = self.pool.install(|| {
            (0..grid.cell_count())
                .into_par_iter()
                .map(|k| {
                    let (ir, it) = grid.coords(k);
                    builder.cell(ir, it)
                })
                .collect()
        });
        let mut provenance = Provenance {
            engine: lib_cfg.engine,
            version: VERSION.to_string(),
            config_hash: self.hash.clone(),
            spot_check: None,
        };
        let mut lib = builder.assemble(cells, provenance.clone())?;
        if lib_cfg.spot_check > 0.0 {
            let other = if lib_cfg.engine == EngineKind::Exact { EngineKind::Magnus } else { EngineKind::Exact };
            let stride = ((1.0 / lib_cfg.spot_check).round() as usize).max(1);
            let offset = (self.cfg.seed % stride as u64) as usize;
            // Interleaved chunks cover every stride-th cell exactly once.
            let chunks = self.pool.current_num_threads().max(1);
            let parts: Vec<SpotCheck> = self.pool.install(|| {
                (0..chunks)
                    .into_par_iter()
                    .map(|j| builder.spot_check(&lib, other, stride * chunks, offset + j * stride))
                    .collect()
            });
            let merged = parts.into_iter().fold(
                SpotCheck { engine: other, cells: 0, max_time_rel: 0.0, max_depth_abs: 0.0 },
                |a, b| SpotCheck {
                    engine: other,
                    cells: a.cells + b.cells,
                    max_time_rel: a.max_time_rel.max(b.max_time_rel),
                    max_depth_abs: a.max_depth_abs.max(b.max_depth_abs),
                },
            );
            provenance.spot_check = Some(merged);
            lib.provenance = provenance;
        }
        Ok(lib)
    }

    pub fn library(&self) -> Result<LibrarySummary> {
        let lib_cfg = self.cfg.library.as_ref().ok_or_else(|| CliError::Config("no [library] section".into()))?;
        if !self.force {
            for s in &self.cfg.sensors {
                let p = io::library_path(&self.out, &s.id);
                if p.exists() {
                    return Err(CliError::Guard(format!("{} exists; pass --force to overwrite", p.display())));
                }
            }
        }
        let mut sensors = Vec::new();
        for (i, s) in self.cfg.sensors.iter().enumerate() {
            let started = std::time::Instant::now();
            let lib = self.build_library(i)?;
            log::info!("library {}: {} cells in {:.1} s", s.id, lib.cells.len(), started.elapsed().as_secs_f64());
            let path = io::library_path(&self.out, &s.id);
            io::write_library(&path, &lib)?;
            let csv = if lib_cfg.csv {
                let p = path.with_extension("csv");
                io::write_library_csv(&p, &lib)?;
                Some(file_name(&p))
            } else {
                None
            };
            sensors.push(LibrarySensor {
                id: s.id.clone(),
                file: file_name(&path),
                csv,
                cells: lib.cells.len(),
                cells_without_dip: lib.cells.iter().filter(|c| c.is_sentinel()).count(),
                control_hash: ControlSpec::of_library(&lib.spec).hash(),
                spot_check: lib.provenance.spot_check,
            });
        }
        let summary = LibrarySummary {
            config_hash: self.hash.clone(),
            version: VERSION.to_string(),
            engine: lib_cfg.engine,
            grid: [lib_cfg.grid.r.count(), lib_cfg.grid.theta.count()],
            sensors,
        };
        io::write_json(&self.out.join("library.json"), &summary)?;
        Ok(summary)
    }

    /// Loads curves and libraries from the output directory, checking that
    /// their control parameters agree with the config.
    fn load_inputs(&self) -> Result<(Vec<CoherenceCurve>, Vec<FingerprintLibrary>, Vec<bool>)> {
        let mut curves = Vec::new();
        let mut libs = Vec::new();
        let mut checked = Vec::new();
        for (i, s) in self.cfg.sensors.iter().enumerate() {
            let expected = self.control(i);
            let lp = io::library_path(&self.out, &s.id);
            let (lib, header) = io::read_library(&lp)?;
            if header.control_hash != expected.hash() {
                return Err(mismatch(&lp, &expected, &header.control));
            }
            let cp = io::curve_path(&self.out, &s.id);
            let (curve, meta) = io::read_curve(&cp)?;
            match &meta {
                Some(m) if m.control_hash != expected.hash() => return Err(mismatch(&cp, &expected, &m.control)),
                Some(_) => checked.push(true),
                None => {
                    log::warn!("{}: no metadata, control parameters not checked", cp.display());
                    checked.push(false);
                }
            }
            curves.push(curve);
            libs.push(lib);
        }
        Ok((curves, libs, checked))
    }

    /// Features and library matches of every sensor.
    pub fn match_sensors(&self) -> Result<(Vec<SensorMatch>, Vec<MatchResult>)> {
        let (curves, libs, checked) = self.load_inputs()?;
        let rule = self.dip_rule();
        let mut matches = Vec::new();
        let mut sensors = Vec::new();
        for (((curve, lib), s), hash_checked) in curves.iter().zip(&libs).zip(&self.cfg.sensors).zip(checked) {
            let feature = extract_features_with(curve, &rule).ok_or_else(|| nvloc_core::Error::NoDip(s.id.clone()))?;
            let m = match_features(&feature, lib, self.cfg.locate.tolerance);
            sensors.push(SensorMatch::new(&s.id, feature, &m, hash_checked));
            matches.push(m);
        }
        Ok((sensors, matches))
    }

    pub fn locate(&self) -> Result<LocateReport> {
        let (sensors, matches) = self.match_sensors()?;
        let estimate = self.intersect(&matches)?;
        let truth = self.cfg.target.map(|t| t.position);
        let reference = self.reference_position();
        let report = LocateReport {
            config_hash: self.hash.clone(),
            version: VERSION.to_string(),
            sensors,
            truth_contained: truth.map(|p| estimate.contains(p)),
            reference_contained: reference.map(|p| estimate.contains(p)),
            truth,
            reference,
            estimate,
        };
        io::write_json(&self.out.join("estimate.json"), &report)?;
        Ok(report)
    }

    /// Voxel intersection with slabs scanned in parallel.
    pub fn intersect(&self, matches: &[MatchResult]) -> Result<PositionEstimate> {
        let setup = IntersectionSetup::new(&self.cfg.sensors, matches, self.cfg.locate.voxel)?;
        let voxels = self.scan(&setup);
        Ok(setup.assemble(voxels))
    }

    /// Every consistent voxel, in slab order.
    pub fn consistent_voxels(&self, matches: &[MatchResult]) -> Result<Vec<VoxelKey>> {
        let setup = IntersectionSetup::new(&self.cfg.sensors, matches, self.cfg.locate.voxel)?;
        Ok(self.scan(&setup).into_iter().map(|(k, _)| k).collect())
    }

    fn scan(&self, setup: &IntersectionSetup) -> Vec<(VoxelKey, bool)> {
        let slabs = self.pool.install(|| {
            (0..setup.slab_count()).into_par_iter().map(|s| setup.scan_slab(s)).collect::<Vec<_>>()
        });
        slabs.into_iter().flatten().collect()
    }

    /// Target position before any configured displacement.
    fn reference_position(&self) -> Option<Vec3> {
        let t = self.cfg.target?;
        Some(t.position - self.cfg.target_displacement.unwrap_or(Vec3::ZERO))
    }

    pub fn bath(&self) -> Result<BathSummary> {
        let b = self.cfg.bath.as_ref().ok_or_else(|| CliError::Config("no [bath] section".into()))?;
        let sensor = &self.cfg.sensors[b.sensor];
        let times = b.times.times();
        let mut columns = Vec::new();
        let mut realizations = Vec::new();
        for r in 0..b.realizations {
            let mut spec = b.spec;
            spec.seed = b.spec.seed.wrapping_add(r as u64);
            let bath = generate_bath(&spec, sensor, &self.cfg.field)?;
            let values: Vec<f64> =
                self.pool.install(|| times.par_iter().map(|&t| cce2_cpmg(&bath, self.cfg.pulses, t).re).collect());
            let path = self.out.join(format!("bath_realization_{}.json", spec.seed));
            io::write_json(&path, &BathFile { config_hash: &self.hash, version: VERSION, realization: &bath })?;
            realizations.push(BathRealizationSummary {
                seed: spec.seed,
                file: file_name(&path),
                spins: bath.spins.len(),
                pairs: bath.pairs.len(),
                min_coherence: values.iter().copied().fold(f64::INFINITY, f64::min),
            });
            columns.push(values);
        }
        let mean: Vec<f64> =
            (0..times.len()).map(|k| columns.iter().map(|c| c[k]).sum::<f64>() / columns.len() as f64).collect();
        let mut header = vec!["time_us".to_string(), "mean".to_string()];
        header.extend(realizations.iter().map(|r| format!("seed_{}", r.seed)));
        let rows: Vec<Vec<f64>> = (0..times.len())
            .map(|k| {
                let mut row = vec![times[k], mean[k]];
                row.extend(columns.iter().map(|c| c[k]));
                row
            })
            .collect();
        let comments = [
            "nvloc bath coherence (CCE-2)".to_string(),
            format!("sensor {}, CPMG-{}, config {}, version {}", sensor.id, self.cfg.pulses, self.hash, VERSION),
        ];
        let csv = self.out.join("bath_curve.csv");
        io::write_table(&csv, &comments, &header, &rows)?;
        let summary = BathSummary {
            config_hash: self.hash.clone(),
            version: VERSION.to_string(),
            sensor: sensor.id.clone(),
            pulses: self.cfg.pulses,
            file: file_name(&csv),
            min_mean_coherence: mean.iter().copied().fold(f64::INFINITY, f64::min),
            realizations,
        };
        io::write_json(&self.out.join("bath.json"), &summary)?;
        Ok(summary)
    }
}

fn mismatch(path: &Path, expected: &ControlSpec, found: &ControlSpec) -> CliError {
    let mut msg = format!("{} was produced with different control parameters (file vs config):", path.display());
    for d in found.diff(expected) {
        let _ = write!(msg, "\n  {d}");
    }
    CliError::Guard(msg)
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulatedSensor {
    pub id: String,
    pub file: String,
    pub min_coherence: f64,
    pub first_dip: Option<DipFeature>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub config_hash: String,
    pub version: String,
    pub engine: EngineKind,
    pub pulses: usize,
    pub sensors: Vec<SimulatedSensor>,
}

impl std::fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "simulate: engine {}, CPMG-{}, config {}", self.engine, self.pulses, &self.config_hash[..12])?;
        for s in &self.sensors {
            match &s.first_dip {
                Some(d) => writeln!(f, "  {}: {} first dip t = {:.4} us, depth {:.4}", s.id, s.file, d.time, d.depth)?,
                None => writeln!(f, "  {}: {} no dip (min L = {:.6})", s.id, s.file, s.min_coherence)?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LibrarySensor {
    pub id: String,
    pub file: String,
    pub csv: Option<String>,
    pub cells: usize,
    pub cells_without_dip: usize,
    pub control_hash: String,
    pub spot_check: Option<SpotCheck>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LibrarySummary {
    pub config_hash: String,
    pub version: String,
    pub engine: EngineKind,
    /// (R, θ) points.
    pub grid: [usize; 2],
    pub sensors: Vec<LibrarySensor>,
}

impl std::fmt::Display for LibrarySummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "library: engine {}, grid {} x {}, config {}", self.engine, self.grid[0], self.grid[1], &self.config_hash[..12])?;
        for s in &self.sensors {
            write!(f, "  {}: {} ({} cells, {} without dip)", s.id, s.file, s.cells, s.cells_without_dip)?;
            if let Some(c) = &s.spot_check {
                write!(
                    f,
                    "; {} check on {} cells: max |dt|/t {:.2e}, max |d depth| {:.2e}",
                    c.engine, c.cells, c.max_time_rel, c.max_depth_abs
                )?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensorMatch {
    pub id: String,
    pub feature: DipFeature,
    pub hash_checked: bool,
    pub matched_cells: usize,
    /// R in nm, θ in degrees.
    pub intervals: Vec<Interval>,
    pub nearest: Option<NearestCell>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Interval {
    pub r_nm: [f64; 2],
    pub theta_deg: [f64; 2],
    pub cells: usize,
}

impl From<&IntervalBox> for Interval {
    fn from(b: &IntervalBox) -> Self {
        Self { r_nm: b.r, theta_deg: [b.theta[0].to_degrees(), b.theta[1].to_degrees()], cells: b.cells }
    }
}

impl SensorMatch {
    fn new(id: &str, feature: DipFeature, m: &MatchResult, hash_checked: bool) -> Self {
        Self {
            id: id.to_string(),
            feature,
            hash_checked,
            matched_cells: m.cells.len(),
            intervals: m.boxes.iter().map(Interval::from).collect(),
            nearest: m.nearest,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocateReport {
    pub config_hash: String,
    pub version: String,
    pub sensors: Vec<SensorMatch>,
    /// Configured target position (after displacement).
    pub truth: Option<Vec3>,
    pub truth_contained: Option<bool>,
    /// Target position before displacement.
    pub reference: Option<Vec3>,
    pub reference_contained: Option<bool>,
    pub estimate: PositionEstimate,
}

impl std::fmt::Display for LocateReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "locate: config {}", &self.config_hash[..12])?;
        for s in &self.sensors {
            write!(f, "  {}: dip t = {:.4} us, depth {:.4}; {} cells", s.id, s.feature.time, s.feature.depth, s.matched_cells)?;
            for b in &s.intervals {
                write!(
                    f,
                    "; R in [{:.2}, {:.2}] nm, theta in [{:.1}, {:.1}] deg",
                    b.r_nm[0], b.r_nm[1], b.theta_deg[0], b.theta_deg[1]
                )?;
            }
            if !s.hash_checked {
                write!(f, " (unchecked curve)")?;
            }
            writeln!(f)?;
        }
        let e = &self.estimate;
        if e.regions.is_empty() {
            writeln!(f, "  no consistent region")?;
        }
        for (k, r) in e.regions.iter().enumerate() {
            let c = r.centroid.0;
            writeln!(
                f,
                "  region {k}: {} voxels, centroid ({:.3}, {:.3}, {:.3}) nm, resolution {:.3} nm (extent {:.3} nm){}",
                r.voxels,
                c[0],
                c[1],
                c[2],
                r.resolution,
                r.max_extent,
                if r.mirror_branch { ", mirror branch" } else { "" }
            )?;
        }
        if e.ambiguous {
            writeln!(f, "  ambiguous: {} disjoint regions", e.regions.len())?;
        }
        for d in &e.diagnostics {
            writeln!(f, "  note: {d}")?;
        }
        if let Some(c) = self.truth_contained {
            writeln!(f, "  configured target {}", if c { "inside the estimate" } else { "OUTSIDE the estimate" })?;
        }
        if self.reference != self.truth {
            if let Some(false) = self.reference_contained {
                writeln!(f, "  flag: estimate excludes the undisplaced target position")?;
            } else if let Some(true) = self.reference_contained {
                writeln!(f, "  flag: estimate still contains the undisplaced target position")?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct BathFile<'a> {
    config_hash: &'a str,
    version: &'a str,
    realization: &'a nvloc_core::bath::BathRealization,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BathRealizationSummary {
    pub seed: u64,
    pub file: String,
    pub spins: usize,
    pub pairs: usize,
    pub min_coherence: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BathSummary {
    pub config_hash: String,
    pub version: String,
    pub sensor: String,
    pub pulses: usize,
    pub file: String,
    pub min_mean_coherence: f64,
    pub realizations: Vec<BathRealizationSummary>,
}

impl std::fmt::Display for BathSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "bath: sensor {}, CPMG-{}, config {}", self.sensor, self.pulses, &self.config_hash[..12])?;
        for r in &self.realizations {
            writeln!(f, "  seed {}: {} spins, {} pairs, min L = {:.5}", r.seed, r.spins, r.pairs, r.min_coherence)?;
        }
        writeln!(f, "  seed-averaged min L = {:.5} ({})", self.min_mean_coherence, self.file)
    }
}
