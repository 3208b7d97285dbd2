//! Indicator maps over rectangular grids of initial conditions.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{self, Checkpoints, DeviationVectors, NormSpec};
use crate::maps::{MapInstance, State};
use crate::precision::Precision;

/// Values below this are raised to it before the logarithm of SALI is taken.
pub const SALI_CUTOFF: f64 = 1e-16;

/// Default guard on the number of cells of one scan.
pub const DEFAULT_MAX_CELLS: usize = 4_000_000;

/// One scanned coordinate, sampled at cell centers
/// `min + (i + 1/2) (max - min) / resolution`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub coordinate: String,
    pub min: f64,
    pub max: f64,
    pub resolution: usize,
}

impl Axis {
    pub fn new(coordinate: impl Into<String>, min: f64, max: f64, resolution: usize) -> Result<Self> {
        let a = Axis { coordinate: coordinate.into(), min, max, resolution };
        a.validate()?;
        Ok(a)
    }

    fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(Error::invalid(format!("axis {} needs a resolution of at least 1", self.coordinate)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::invalid(format!(
                "axis {} range [{}, {}] is empty or not finite",
                self.coordinate, self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * (self.max - self.min) / self.resolution as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.resolution).map(|i| self.center(i)).collect()
    }

    /// Index of the center nearest to `value`; equidistant centers resolve to
    /// the lower index.
    pub fn nearest(&self, value: f64) -> Result<usize> {
        if !(self.min..=self.max).contains(&value) {
            return Err(Error::invalid(format!(
                "{} = {value} outside the scanned range [{}, {}]",
                self.coordinate, self.min, self.max
            )));
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers().into_iter().enumerate() {
            let d = (c - value).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        Ok(best)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:?}:{:?}:{}", self.coordinate, self.min, self.max, self.resolution)
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// `name:min:max:resolution`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [name, lo, hi, res] = parts[..] else {
            return Err(Error::invalid(format!("axis '{s}' is not name:min:max:resolution")));
        };
        let num =
            |t: &str| t.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{t}' in axis '{s}'")));
        let res =
            res.trim().parse::<usize>().map_err(|_| Error::invalid(format!("bad resolution '{res}' in axis '{s}'")))?;
        Axis::new(name.trim(), num(lo)?, num(hi)?, res)
    }
}

/// Indicator evaluated at each cell, with its options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndicatorSpec {
    Reversibility {
        precision: Precision,
        norm: NormSpec,
    },
    Divergence {
        precision: Precision,
        reference: Precision,
        norm: NormSpec,
    },
    /// Global error of the torus translation at `precision`.
    Global {
        precision: Precision,
    },
    Mlce {
        vectors: DeviationVectors,
    },
    /// Time-averaged MEGNO `Ybar(N)` with `m = 1`, `j = -1`.
    Megno {
        vectors: DeviationVectors,
    },
    Sali {
        vectors: DeviationVectors,
    },
}

impl IndicatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            IndicatorSpec::Reversibility { .. } => "rev",
            IndicatorSpec::Divergence { .. } => "div",
            IndicatorSpec::Global { .. } => "global",
            IndicatorSpec::Mlce { .. } => "mlce",
            IndicatorSpec::Megno { .. } => "megno",
            IndicatorSpec::Sali { .. } => "sali",
        }
    }

    /// Whether cells hold the natural log of the indicator rather than its value.
    pub fn logarithmic(&self) -> bool {
        !matches!(self, IndicatorSpec::Mlce { .. })
    }

    pub fn check_compatible(&self, map: &MapInstance) -> Result<()> {
        match self {
            IndicatorSpec::Reversibility { norm, .. } => {
                if !map.invertible() {
                    return Err(Error::Unsupported(format!("map '{}' has no inverse", map.family())));
                }
                norm.indices(map).map(|_| ())
            }
            IndicatorSpec::Divergence { norm, .. } => norm.indices(map).map(|_| ()),
            IndicatorSpec::Global { .. } => match map {
                MapInstance::TorusTranslation { .. } => Ok(()),
                _ => Err(Error::Unsupported("global error needs the torus translation".into())),
            },
            IndicatorSpec::Sali { .. } if map.state_dim() < 2 => {
                Err(Error::Unsupported("SALI needs a state of dimension at least 2".into()))
            }
            _ => Ok(()),
        }
    }

    /// Raw indicator value at iteration `n`.
    pub fn raw_value(&self, map: &MapInstance, x0: &State, n: u64) -> Result<f64> {
        let dim = map.state_dim();
        match self {
            IndicatorSpec::Reversibility { precision, norm } => {
                indicators::reversibility_error_final(map, x0, n, *precision, *norm)
            }
            IndicatorSpec::Divergence { precision, reference, norm } => {
                indicators::orbit_divergence_final(map, x0, n, *precision, *reference, *norm)
            }
            IndicatorSpec::Global { precision } => {
                let g = indicators::global_error_translation(map, x0, n, *precision, &Checkpoints::Explicit(vec![n]))?;
                Ok(g.series.values[0])
            }
            IndicatorSpec::Mlce { vectors } => {
                let (v, _) = vectors.resolve(dim)?;
                Ok(indicators::mlce(map, x0, &v, n)?.last().unwrap())
            }
            IndicatorSpec::Megno { vectors } => {
                let (v, u) = vectors.resolve(dim)?;
                let (_, ybar) = indicators::megno(map, x0, &v, u.as_deref(), n, 1, -1)?;
                Ok(ybar.last().unwrap())
            }
            IndicatorSpec::Sali { vectors } => {
                let (v, u) = vectors.resolve(dim)?;
                let u = u.ok_or_else(|| Error::invalid("SALI needs two deviation vectors"))?;
                Ok(indicators::sali(map, x0, &v, &u, n)?.last().unwrap())
            }
        }
    }

    /// Value stored in a scan cell: `ln |value|` for logarithmic indicators
    /// (SALI raised to [`SALI_CUTOFF`] first, `-inf` for an exact zero), the
    /// value itself for mLCE.
    pub fn cell_value(&self, raw: f64) -> f64 {
        match self {
            IndicatorSpec::Mlce { .. } => raw,
            IndicatorSpec::Sali { .. } => raw.max(SALI_CUTOFF).ln(),
            _ => raw.abs().ln(),
        }
    }
}

/// Grid of initial conditions and the indicator to evaluate on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Varies along matrix columns.
    pub x_axis: Axis,
    /// Varies along matrix rows.
    pub y_axis: Axis,
    /// Values of the coordinates that are not scanned.
    pub fixed: Vec<(String, f64)>,
    pub iterations: u64,
    pub indicator: IndicatorSpec,
}

impl GridSpec {
    pub fn cells(&self) -> usize {
        self.x_axis.resolution.saturating_mul(self.y_axis.resolution)
    }

    /// Checks the grid against a map and returns, per state coordinate, where
    /// its value comes from.
    fn layout(&self, map: &MapInstance) -> Result<Vec<Source>> {
        self.x_axis.validate()?;
        self.y_axis.validate()?;
        if self.iterations == 0 {
            return Err(Error::invalid("the number of iterations must be at least 1"));
        }
        let xi = map.coordinate_index(&self.x_axis.coordinate)?;
        let yi = map.coordinate_index(&self.y_axis.coordinate)?;
        if xi == yi {
            return Err(Error::invalid("the two scanned axes must be different coordinates"));
        }
        let mut src = vec![None; map.state_dim()];
        src[xi] = Some(Source::X);
        src[yi] = Some(Source::Y);
        for (name, v) in &self.fixed {
            let i = map.coordinate_index(name)?;
            if src[i].is_some() {
                return Err(Error::invalid(format!("coordinate {name} is both scanned and fixed, or fixed twice")));
            }
            src[i] = Some(Source::Fixed(*v));
        }
        src.into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| Error::invalid(format!("no value given for coordinate {}", map.coordinate_names()[i])))
            })
            .collect()
    }

    /// Initial condition of cell `(row, col)`.
    pub fn cell_state(&self, map: &MapInstance, row: usize, col: usize) -> Result<State> {
        let layout = self.layout(map)?;
        Ok(self.state_from(&layout, row, col))
    }

    fn state_from(&self, layout: &[Source], row: usize, col: usize) -> State {
        State(
            layout
                .iter()
                .map(|s| match *s {
                    Source::X => self.x_axis.center(col),
                    Source::Y => self.y_axis.center(row),
                    Source::Fixed(v) => v,
                })
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug)]
enum Source {
    X,
    Y,
    Fixed(f64),
}

/// Everything needed to rerun a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub map: MapInstance,
    pub grid: GridSpec,
    /// `"ln"` or `"raw"`.
    pub transform: String,
    pub wall_time_seconds: f64,
    pub version: String,
}

/// Row-major matrix of cell values; rows follow the y axis, columns the x axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub metadata: ScanMetadata,
}

impl ScanResult {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Finite cell values (the `-inf` sentinel excluded).
    pub fn finite_values(&self) -> Vec<f64> {
        self.values.iter().copied().filter(|v| v.is_finite()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub max_cells: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { workers: None, max_cells: DEFAULT_MAX_CELLS }
    }
}

/// Value of a single cell, computed exactly as [`grid_scan`] does.
pub fn evaluate_cell(map: &MapInstance, grid: &GridSpec, row: usize, col: usize) -> Result<f64> {
    let layout = grid.layout(map)?;
    grid.indicator.check_compatible(map)?;
    cell(map, grid, &layout, row, col)
}

fn cell(map: &MapInstance, grid: &GridSpec, layout: &[Source], row: usize, col: usize) -> Result<f64> {
    let x0 = grid.state_from(layout, row, col);
    let raw = grid.indicator.raw_value(map, &x0, grid.iterations)?;
    let v = grid.indicator.cell_value(raw);
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::Numeric(format!("cell ({row}, {col}) evaluated to {v}")));
    }
    Ok(v)
}

/// Evaluates the indicator at every cell center. Any failing cell aborts the scan.
pub fn grid_scan(map: &MapInstance, grid: &GridSpec, opts: &ScanOptions) -> Result<ScanResult> {
    map.validate()?;
    let layout = grid.layout(map)?;
    grid.indicator.check_compatible(map)?;
    let cells = grid.cells();
    if cells > opts.max_cells {
        return Err(Error::ResourceLimit(format!("{cells} cells exceed the limit of {}", opts.max_cells)));
    }
    let cols = grid.x_axis.resolution;
    let started = Instant::now();
    let run = || {
        (0..cells).into_par_iter().map(|k| cell(map, grid, &layout, k / cols, k % cols)).collect::<Result<Vec<f64>>>()
    };
    let values = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::ResourceLimit(format!("cannot start worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(ScanResult {
        rows: grid.y_axis.resolution,
        cols,
        values,
        metadata: ScanMetadata {
            map: map.clone(),
            grid: grid.clone(),
            transform: if grid.indicator.logarithmic() { "ln" } else { "raw" }.into(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
    })
}

/// One row or column of a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionProfile {
    /// The coordinate held fixed and the exact cell center used.
    pub fixed_coordinate: String,
    pub fixed_value: f64,
    /// The coordinate varying along the profile.
    pub coordinate: String,
    pub points: Vec<(f64, f64)>,
}

/// Profile at the cell center nearest to `value` of the scanned coordinate
/// `axis` (ties go to the lower index).
pub fn extract_section(result: &ScanResult, axis: &str, value: f64) -> Result<SectionProfile> {
    let g = &result.metadata.grid;
    if axis == g.y_axis.coordinate {
        let r = g.y_axis.nearest(value)?;
        Ok(SectionProfile {
            fixed_coordinate: axis.into(),
            fixed_value: g.y_axis.center(r),
            coordinate: g.x_axis.coordinate.clone(),
            points: g.x_axis.centers().into_iter().zip(result.row(r).iter().copied()).collect(),
        })
    } else if axis == g.x_axis.coordinate {
        let c = g.x_axis.nearest(value)?;
        Ok(SectionProfile {
            fixed_coordinate: axis.into(),
            fixed_value: g.x_axis.center(c),
            coordinate: g.y_axis.coordinate.clone(),
            points: g.y_axis.centers().into_iter().zip(result.column(c)).collect(),
        })
    } else {
        Err(Error::invalid(format!(
            "'{axis}' is not a scanned axis (expected {} or {})",
            g.x_axis.coordinate, g.y_axis.coordinate
        )))
    }
}
