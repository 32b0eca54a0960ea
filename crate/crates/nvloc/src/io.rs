//! File formats.
//!
//! Curves are CSV (`time_us,coherence`) preceded by `#` comment lines; a
//! `# meta: {json}` line carries provenance and is optional on input so
//! externally measured curves can be read.
//!
//! Libraries are a binary columnar file:
//!
//! ```text
//! b"NVLIB1\n"
//! u32 LE   header length
//! [u8]     JSON header (LibraryHeader)
//! u64 LE   cell count
//! count × (f64 LE dip time μs, f64 LE depth), row-major over (R, θ)
//! ```

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nvloc_core::coherence::{CoherenceCurve, EngineKind};
use nvloc_core::positioning::{CellFeature, FingerprintLibrary, LibrarySpec, Provenance};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::hash::ControlSpec;

pub const LIBRARY_MAGIC: &[u8; 7] = b"NVLIB1\n";

/// Provenance line of a curve file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub sensor: String,
    pub engine: EngineKind,
    pub pulses: usize,
    pub version: String,
    pub config_hash: String,
    pub control: ControlSpec,
    pub control_hash: String,
    #[serde(default)]
    pub note: Option<String>,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn write_curve(path: &Path, curve: &CoherenceCurve, meta: &CurveMeta) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(out, "# nvloc coherence curve").map_err(io)?;
    writeln!(out, "# meta: {}", serde_json::to_string(meta).expect("serialise")).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::format(path, e.to_string());
    w.write_record(["time_us", "coherence"]).map_err(csv_err)?;
    for (t, v) in curve.times.iter().zip(&curve.values) {
        w.write_record([t.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

/// Reads a curve; `meta` is `None` for files without a meta line.
pub fn read_curve(path: &Path) -> Result<(CoherenceCurve, Option<CurveMeta>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut meta = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(json) = line.strip_prefix("# meta:") {
            meta = Some(
                serde_json::from_str::<CurveMeta>(json.trim())
                    .map_err(|e| CliError::format(path, format!("bad meta line: {e}")))?,
            );
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(path, e.to_string()))?;
        if rec.len() < 2 {
            return Err(CliError::format(path, format!("record {}: expected time,coherence", i + 1)));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(t), Ok(v)) => {
                times.push(t);
                values.push(v);
            }
            _ if i == 0 => {} // header row
            _ => return Err(CliError::format(path, format!("record {}: not numeric", i + 1))),
        }
    }
    if times.len() < 3 {
        return Err(CliError::format(path, "curve needs at least 3 samples"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::format(path, "times must be strictly increasing"));
    }
    let curve = CoherenceCurve {
        times,
        values,
        engine: meta.as_ref().map_or(EngineKind::Exact, |m| m.engine),
        pulses: meta.as_ref().map_or(0, |m| m.pulses),
        label: meta.as_ref().map_or_else(|| path.display().to_string(), |m| m.sensor.clone()),
    };
    Ok((curve, meta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LibraryHeader {
    pub format: u32,
    pub spec: LibrarySpec,
    pub provenance: Provenance,
    pub control: ControlSpec,
    pub control_hash: String,
    pub cells: u64,
}

pub fn write_library(path: &Path, lib: &FingerprintLibrary) -> Result<()> {
    let control = ControlSpec::of_library(&lib.spec);
    let header = LibraryHeader {
        format: 1,
        spec: lib.spec.clone(),
        provenance: lib.provenance.clone(),
        control_hash: control.hash(),
        control,
        cells: lib.cells.len() as u64,
    };
    let json = serde_json::to_vec(&header).expect("serialise");
    let mut out = create(path)?;
    let io = |e| CliError::io(path, e);
    out.write_all(LIBRARY_MAGIC).map_err(io)?;
    out.write_all(&(json.len() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&json).map_err(io)?;
    out.write_all(&(lib.cells.len() as u64).to_le_bytes()).map_err(io)?;
    for c in &lib.cells {
        out.write_all(&c.time.to_le_bytes()).map_err(io)?;
        out.write_all(&c.depth.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_library(path: &Path) -> Result<(FingerprintLibrary, LibraryHeader)> {
    let mut bytes = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| CliError::io(path, e))?;
    let bad = |m: &str| CliError::format(path, m.to_string());
    if bytes.len() < LIBRARY_MAGIC.len() + 4 || &bytes[..LIBRARY_MAGIC.len()] != LIBRARY_MAGIC {
        return Err(bad("not an nvloc library (bad magic)"));
    }
    let mut pos = LIBRARY_MAGIC.len();
    let hlen = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
    pos += 4;
    let hend = pos.checked_add(hlen).filter(|&e| e + 8 <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
    let header: LibraryHeader =
        serde_json::from_slice(&bytes[pos..hend]).map_err(|e| CliError::format(path, format!("bad header: {e}")))?;
    pos = hend;
    let count = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()) as usize;
    pos += 8;
    if count != header.spec.grid.cell_count() || count as u64 != header.cells {
        return Err(bad("cell count does not match the grid"));
    }
    if bytes.len() != pos + 16 * count {
        return Err(bad("payload length does not match the cell count"));
    }
    let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let cells = (0..count).map(|k| CellFeature { time: f(pos + 16 * k), depth: f(pos + 16 * k + 8) }).collect();
    let lib = FingerprintLibrary { spec: header.spec.clone(), cells, provenance: header.provenance.clone() };
    Ok((lib, header))
}

/// Human-readable export: one row per cell.
pub fn write_library_csv(path: &Path, lib: &FingerprintLibrary) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(out, "# nvloc fingerprint library, engine {}, config {}", lib.provenance.engine, lib.provenance.config_hash)
        .map_err(io)?;
    writeln!(out, "# depth 1 marks cells without a dip").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::format(path, e.to_string());
    w.write_record(["r_nm", "theta_deg", "t_dip_us", "depth"]).map_err(csv_err)?;
    let g = &lib.spec.grid;
    for (i, c) in lib.cells.iter().enumerate() {
        let (ir, it) = g.coords(i);
        w.write_record([
            g.r.value(ir).to_string(),
            g.theta.value(it).to_degrees().to_string(),
            c.time.to_string(),
            c.depth.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::format(path, e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| CliError::format(path, e.to_string()))
}

/// Table with a `#` provenance comment and a header row.
pub fn write_table(path: &Path, comments: &[String], header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| CliError::io(path, e);
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::format(path, e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

pub fn curve_path(dir: &Path, sensor: &str) -> PathBuf {
    dir.join(format!("curve_{sensor}.csv"))
}

pub fn library_path(dir: &Path, sensor: &str) -> PathBuf {
    dir.join(format!("library_{sensor}.nvlib"))
}
