//! Ensemble statistics of reversibility displacements under round-off or
//! under uniform random perturbations.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_power_law, PowerLawFit};
use crate::indicators::Checkpoints;
use crate::maps::{check_finite, MapInstance, State, Stepper};
use crate::precision::{Arithmetic, Backend, Precision};
use crate::rng::{Leg, MemberRng, COORD_SLOTS};
use crate::with_backend;

/// Axis-aligned box `[lower_i, upper_i]` in state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let r = Region { lower, upper };
        r.validate()?;
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::invalid("region bounds must have equal, nonzero length"));
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::invalid(format!("empty or non-finite region side [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

impl FromStr for Region {
    type Err = Error;

    /// `lo:hi,lo:hi,...`, one interval per coordinate.
    fn from_str(s: &str) -> Result<Self> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for side in s.split(',') {
            let (lo, hi) =
                side.split_once(':').ok_or_else(|| Error::invalid(format!("region side '{side}' is not lo:hi")))?;
            let parse =
                |t: &str| t.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{t}' in region")));
            lower.push(parse(lo)?);
            upper.push(parse(hi)?);
        }
        Region::new(lower, upper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub region: Region,
    pub count: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(region: Region, count: usize, seed: u64) -> Result<Self> {
        region.validate()?;
        if count < 2 {
            return Err(Error::invalid(format!("an ensemble needs at least 2 members, got {count}")));
        }
        Ok(EnsembleSpec { region, count, seed })
    }

    /// Initial condition of member `i`, uniform in the region.
    pub fn member(&self, i: usize) -> State {
        let mut rng = MemberRng::new(self.seed, i as u64);
        rng.seek(Leg::Initial, 0);
        State(self.region.lower.iter().zip(&self.region.upper).map(|(lo, hi)| lo + (hi - lo) * rng.unit()).collect())
    }
}

/// Source of irreversibility for an ensemble run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Round-off of the given precision only.
    Roundoff { precision: Precision },
    /// Uniform noise on `[-amplitude, amplitude]` added to every coordinate
    /// at every forward and backward step.
    Noise { amplitude: f64, precision: Precision },
}

impl PerturbationMode {
    pub fn roundoff(precision: Precision) -> Self {
        PerturbationMode::Roundoff { precision }
    }

    /// Noise on top of binary64 arithmetic.
    pub fn noise(amplitude: f64) -> Result<Self> {
        let m = PerturbationMode::Noise { amplitude, precision: Precision::DOUBLE };
        m.validate()?;
        Ok(m)
    }

    pub fn precision(&self) -> Precision {
        match *self {
            PerturbationMode::Roundoff { precision } | PerturbationMode::Noise { precision, .. } => precision,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PerturbationMode::Noise { amplitude, .. } if !(amplitude > 0.0 && amplitude.is_finite()) => {
                Err(Error::invalid(format!("noise amplitude must be positive and finite, got {amplitude}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PerturbationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbationMode::Roundoff { precision } => write!(f, "roundoff({precision})"),
            PerturbationMode::Noise { amplitude, precision } => write!(f, "noise({amplitude:e}, {precision})"),
        }
    }
}

/// Population variances of the per-coordinate reversibility displacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceSeries {
    pub coordinates: Vec<String>,
    /// Starts with `n = 0`.
    pub iterations: Vec<u64>,
    /// `mean[c][k]`: ensemble mean of the displacement of coordinate `c` at `iterations[k]`.
    pub mean: Vec<Vec<f64>>,
    /// `variance[c][k]`, about the ensemble mean.
    pub variance: Vec<Vec<f64>>,
    pub members: usize,
}

impl VarianceSeries {
    pub fn coordinate(&self, name: &str) -> Result<usize> {
        self.coordinates
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::invalid(format!("no coordinate '{name}' in variance series")))
    }

    pub fn at(&self, coordinate: usize, n: u64) -> Option<f64> {
        let k = self.iterations.binary_search(&n).ok()?;
        Some(self.variance[coordinate][k])
    }

    /// Power-law fit of one coordinate's variance over `lo <= n <= hi`.
    pub fn fit(&self, coordinate: usize, lo: u64, hi: u64) -> Result<PowerLawFit> {
        fit_power_law(&self.iterations, &self.variance[coordinate], lo, hi)
    }

    /// Fit over the last decade of the series.
    pub fn fit_last_decade(&self, coordinate: usize) -> Result<PowerLawFit> {
        let n = *self.iterations.last().unwrap();
        self.fit(coordinate, (n / 10).max(1), n)
    }
}

/// Signed displacement `M^-n(M^n(x0)) - x0` of every coordinate at each
/// checkpoint, flattened as `[point][coordinate]`.
fn member_displacements<A: Arithmetic>(
    st: &Stepper<A>,
    x0: &State,
    pts: &[u64],
    noise: Option<(f64, &mut MemberRng)>,
) -> Result<Vec<f64>> {
    let dim = x0.dim();
    let ar = st.arithmetic();
    let start = st.load(x0)?;
    let mut fwd = start.clone();
    let mut out = Vec::with_capacity(pts.len() * dim);
    let mut draws = [0.0; COORD_SLOTS];
    let mut noise = noise;
    if let Some((_, rng)) = noise.as_mut() {
        rng.seek(Leg::Forward, 1);
    }
    let mut done = 0;
    for &p in pts {
        for _ in done..p {
            let kick = noise.as_mut().map(|(a, rng)| {
                rng.draw_step(*a, &mut draws[..dim]);
                draws[..dim].iter().map(|&d| ar.from_f64(d)).collect::<Vec<_>>()
            });
            st.forward(&mut fwd, kick.as_deref());
        }
        done = p;
        check_finite(st, &fwd)?;
        let mut back = fwd.clone();
        // the forward leg resumes from its own position after this pass
        let mut resume = None;
        if let Some((_, rng)) = noise.as_mut() {
            resume = Some(rng.clone());
            rng.seek(Leg::Backward(p), 1);
        }
        for _ in 0..p {
            let kick = noise.as_mut().map(|(a, rng)| {
                rng.draw_step(*a, &mut draws[..dim]);
                draws[..dim].iter().map(|&d| ar.from_f64(d)).collect::<Vec<_>>()
            });
            st.inverse(&mut back, kick.as_deref());
        }
        if let (Some((_, rng)), Some(saved)) = (noise.as_mut(), resume) {
            **rng = saved;
        }
        check_finite(st, &back)?;
        out.extend((0..dim).map(|i| st.coordinate_difference(i, &back[i], &start[i])));
    }
    Ok(out)
}

/// Runs every member to `n` iterations and reduces the displacements to
/// per-coordinate means and population variances at each checkpoint.
///
/// Members are evaluated in parallel on `workers` threads (the global pool
/// when `None`); the reduction is an ordered fold, so the result does not
/// depend on the worker count.
pub fn run_ensemble(
    map: &MapInstance,
    ens: &EnsembleSpec,
    mode: PerturbationMode,
    n: u64,
    checkpoints: &Checkpoints,
    workers: Option<usize>,
) -> Result<VarianceSeries> {
    mode.validate()?;
    ens.region.validate()?;
    if !map.invertible() {
        return Err(Error::Unsupported(format!(
            "map '{}' has no inverse; ensemble reversibility is undefined",
            map.family()
        )));
    }
    let dim = map.state_dim();
    if ens.region.dim() != dim {
        return Err(Error::invalid(format!(
            "region has {} coordinates, map '{}' has {dim}",
            ens.region.dim(),
            map.family()
        )));
    }
    if n > crate::rng::MAX_STEP {
        return Err(Error::ResourceLimit(format!("at most {} iterations per ensemble", crate::rng::MAX_STEP)));
    }
    let pts = checkpoints.resolve(n)?;
    let per_member = |i: usize| -> Result<Vec<f64>> {
        let x0 = ens.member(i);
        with_backend!(Backend::select(mode.precision()), ar => {
            let st = Stepper::new(map, ar)?;
            match mode {
                PerturbationMode::Roundoff { .. } => member_displacements(&st, &x0, &pts, None),
                PerturbationMode::Noise { amplitude, .. } => {
                    let mut rng = MemberRng::new(ens.seed, i as u64);
                    member_displacements(&st, &x0, &pts, Some((amplitude, &mut rng)))
                }
            }
        })
    };
    let run = || (0..ens.count).into_par_iter().map(per_member).collect::<Result<Vec<_>>>();
    let rows = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::ResourceLimit(format!("cannot start worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let width = pts.len() * dim;
    let count = ens.count as f64;
    let mut mean = vec![0.0; width];
    for row in &rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; width];
    for row in &rows {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= count);

    let split = |flat: &[f64]| -> Vec<Vec<f64>> {
        (0..dim).map(|c| std::iter::once(0.0).chain((0..pts.len()).map(|k| flat[k * dim + c])).collect()).collect()
    };
    Ok(VarianceSeries {
        coordinates: map.coordinate_names().iter().map(|s| s.to_string()).collect(),
        iterations: std::iter::once(0).chain(pts.iter().copied()).collect(),
        mean: split(&mean),
        variance: split(&var),
        members: ens.count,
    })
}
