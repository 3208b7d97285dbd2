//! File formats: scan matrices as CSV, PGM and JSON, and series as CSV.
//!
//! CSV files start with `#` comment lines holding metadata; numbers are
//! written with 17 significant digits so that reading them back is exact,
//! and `-inf` marks the logarithm of an exact zero.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scan::{ScanMetadata, ScanResult};

const METADATA_KEY: &str = "metadata";

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Formats a value losslessly.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        "nan".into()
    }
}

fn parse_value(t: &str, path: &Path, line: usize) -> Result<f64> {
    t.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse { path: path.into(), message: format!("line {line}: '{t}' is not a number") })
}

/// Writes the matrix with a `#` header; the last header line carries the
/// full metadata as JSON.
pub fn write_csv(result: &ScanResult, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let m = &result.metadata;
    let g = &m.grid;
    writeln!(w, "# map: {}", m.map).map_err(io)?;
    writeln!(w, "# indicator: {} ({}), N = {}", g.indicator.name(), m.transform, g.iterations).map_err(io)?;
    writeln!(w, "# columns: {}", g.x_axis).map_err(io)?;
    writeln!(w, "# rows: {}", g.y_axis).map_err(io)?;
    if !g.fixed.is_empty() {
        let f: Vec<String> = g.fixed.iter().map(|(k, v)| format!("{k}={v:?}")).collect();
        writeln!(w, "# fixed: {}", f.join(",")).map_err(io)?;
    }
    let json = serde_json::to_string(m).map_err(|e| Error::Numeric(format!("cannot serialize metadata: {e}")))?;
    writeln!(w, "# {METADATA_KEY}: {json}").map_err(io)?;
    for r in 0..result.rows {
        let line: Vec<String> = result.row(r).iter().map(|&v| format_value(v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a matrix written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<ScanResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut metadata: Option<ScanMetadata> = None;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (i, line) in text.lines().enumerate() {
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(json) = comment.trim_start().strip_prefix(&format!("{METADATA_KEY}:")) {
                metadata = Some(serde_json::from_str(json.trim()).map_err(|e| Error::Parse {
                    path: path.into(),
                    message: format!("line {}: bad metadata: {e}", i + 1),
                })?);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row = line.split(',').map(|t| parse_value(t, path, i + 1)).collect::<Result<Vec<f64>>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Parse { path: path.into(), message: format!("line {}: ragged row", i + 1) })
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let metadata = metadata.ok_or_else(|| Error::Parse { path: path.into(), message: "no metadata header".into() })?;
    let cols = cols.unwrap_or(0);
    if rows != metadata.grid.y_axis.resolution || cols != metadata.grid.x_axis.resolution {
        return Err(Error::Parse {
            path: path.into(),
            message: format!("matrix is {rows}x{cols} but the header describes a different grid"),
        });
    }
    Ok(ScanResult { rows, cols, values, metadata })
}

/// 8-bit gray levels: finite values scaled linearly from their minimum (0)
/// to their maximum (255); `-inf` and other non-finite cells map to 0, and a
/// matrix whose finite values are all equal maps to 0 everywhere.
pub fn gray_levels(values: &[f64]) -> Vec<u8> {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    values
        .iter()
        .map(|&v| {
            if !v.is_finite() || hi <= lo {
                0
            } else {
                ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect()
}

/// Binary PGM (P5); the first image row is the first matrix row.
pub fn write_pgm(result: &ScanResult, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "P5\n{} {}\n255\n", result.cols, result.rows).map_err(io)?;
    w.write_all(&gray_levels(&result.values)).map_err(io)?;
    w.flush().map_err(io)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    metadata: &'a ScanMetadata,
    rows: usize,
    cols: usize,
    finite_min: Option<f64>,
    finite_max: Option<f64>,
    sentinel_cells: usize,
}

pub fn write_json(result: &ScanResult, path: &Path) -> Result<()> {
    let finite = result.finite_values();
    let side = Sidecar {
        metadata: &result.metadata,
        rows: result.rows,
        cols: result.cols,
        finite_min: finite.iter().copied().reduce(f64::min),
        finite_max: finite.iter().copied().reduce(f64::max),
        sentinel_cells: result.values.len() - finite.len(),
    };
    write_json_value(&side, path)
}

/// Pretty-printed JSON of any serializable record.
pub fn write_json_value<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub pgm: PathBuf,
    pub json: PathBuf,
}

impl OutputPaths {
    pub fn from_prefix(prefix: &Path) -> Self {
        let with = |ext: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(".");
            s.push(ext);
            PathBuf::from(s)
        };
        OutputPaths { csv: with("csv"), pgm: with("pgm"), json: with("json") }
    }
}

/// Writes `prefix.csv`, `prefix.pgm` and `prefix.json`.
pub fn write_outputs(result: &ScanResult, prefix: &Path) -> Result<OutputPaths> {
    let paths = OutputPaths::from_prefix(prefix);
    write_csv(result, &paths.csv)?;
    write_pgm(result, &paths.pgm)?;
    write_json(result, &paths.json)?;
    Ok(paths)
}

/// Columns sharing one iteration index.
pub struct SeriesTable<'a> {
    pub header: Vec<(String, String)>,
    pub names: Vec<&'a str>,
    pub iterations: &'a [u64],
    pub columns: Vec<&'a [f64]>,
    /// Extra `#` lines written after the data.
    pub footer: Vec<String>,
}

/// Writes `n,<names...>` rows with a `# key: value` header.
pub fn write_series_csv(table: &SeriesTable<'_>, path: &Path) -> Result<()> {
    if table.columns.len() != table.names.len() || table.columns.iter().any(|c| c.len() != table.iterations.len()) {
        return Err(Error::invalid("series columns do not match their names or iterations"));
    }
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for (k, v) in &table.header {
        writeln!(w, "# {k}: {v}").map_err(io)?;
    }
    writeln!(w, "n,{}", table.names.join(",")).map_err(io)?;
    for (i, n) in table.iterations.iter().enumerate() {
        let vals: Vec<String> = table.columns.iter().map(|c| format_value(c[i])).collect();
        writeln!(w, "{n},{}", vals.join(",")).map_err(io)?;
    }
    for line in &table.footer {
        writeln!(w, "# {line}").map_err(io)?;
    }
    w.flush().map_err(io)
}
