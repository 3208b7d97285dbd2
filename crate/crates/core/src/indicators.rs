//! Round-off indicators (reversibility error, orbit divergence, global error)
//! and variational indicators (mLCE, MEGNO, SALI).

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{check_finite, cross_difference, MapInstance, State, Stepper};
use crate::precision::{Arithmetic, Backend, DoubleArith, Dyadic, Precision, PrecisionSpec};
use crate::rng;
use crate::with_backend;

/// Which coordinates enter the Euclidean distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSpec {
    #[default]
    Full,
    /// Only the action coordinates (`y`, or `I, J`).
    ActionOnly,
}

impl NormSpec {
    pub fn indices(&self, map: &MapInstance) -> Result<Vec<usize>> {
        match self {
            NormSpec::Full => Ok((0..map.state_dim()).collect()),
            NormSpec::ActionOnly => map
                .action_indices()
                .map(<[usize]>::to_vec)
                .ok_or_else(|| Error::invalid(format!("map '{}' has no action coordinates", map.family()))),
        }
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormSpec::Full => "full",
            NormSpec::ActionOnly => "action",
        })
    }
}

impl FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(NormSpec::Full),
            "action" | "action-only" | "action_only" => Ok(NormSpec::ActionOnly),
            _ => Err(Error::invalid(format!("unknown norm '{s}' (expected full or action)"))),
        }
    }
}

/// Iterations at which a series is evaluated.
///
/// A full reversibility series costs `O(N^2)` map steps, so long runs are
/// usually sampled at log-spaced iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    All,
    /// About `per_decade` points per factor of ten, always including `N`.
    LogSpaced {
        per_decade: u32,
    },
    Explicit(Vec<u64>),
}

impl Checkpoints {
    /// Sorted, distinct iterations in `1..=n`.
    pub fn resolve(&self, n: u64) -> Result<Vec<u64>> {
        if n == 0 {
            return Err(Error::invalid("the number of iterations must be at least 1"));
        }
        let mut pts = match self {
            Checkpoints::All => (1..=n).collect(),
            Checkpoints::LogSpaced { per_decade } => {
                if *per_decade == 0 {
                    return Err(Error::invalid("per_decade must be positive"));
                }
                let top = (n as f64).log10() * *per_decade as f64;
                let mut v: Vec<u64> = (0..=top.ceil() as u64)
                    .map(|k| 10f64.powf(k as f64 / *per_decade as f64).round() as u64)
                    .filter(|&p| p >= 1 && p <= n)
                    .collect();
                v.push(n);
                v
            }
            Checkpoints::Explicit(v) => {
                if let Some(bad) = v.iter().find(|&&p| p == 0 || p > n) {
                    return Err(Error::invalid(format!("checkpoint {bad} outside 1..={n}")));
                }
                v.clone()
            }
        };
        pts.sort_unstable();
        pts.dedup();
        if pts.is_empty() {
            return Err(Error::invalid("no checkpoints selected"));
        }
        Ok(pts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Reversibility,
    Divergence,
    Global,
}

/// Error values at selected iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub kind: ErrorKind,
    pub iterations: Vec<u64>,
    pub values: Vec<f64>,
}

impl ErrorSeries {
    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Value at iteration `n`, if sampled.
    pub fn at(&self, n: u64) -> Option<f64> {
        self.iterations.binary_search(&n).ok().map(|i| self.values[i])
    }

    /// Log-log slope over `lo <= n <= hi`, ignoring exact zeros.
    pub fn log_log_slope(&self, lo: u64, hi: u64) -> Result<crate::fit::PowerLawFit> {
        let (ns, vs): (Vec<u64>, Vec<f64>) =
            self.iterations.iter().zip(&self.values).filter(|(_, v)| **v > 0.0).map(|(n, v)| (*n, *v)).unzip();
        crate::fit::fit_power_law(&ns, &vs, lo, hi)
    }
}

fn distance<A: Arithmetic>(st: &Stepper<A>, a: &[A::Value], b: &[A::Value], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| st.coordinate_difference(i, &a[i], &b[i]).powi(2)).sum::<f64>().sqrt()
}

fn require_invertible(map: &MapInstance) -> Result<()> {
    if map.invertible() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("map '{}' has no inverse; reversibility is undefined", map.family())))
    }
}

/// `R_n = |M^-n(M^n(x0)) - x0|` at each checkpoint. Each backward pass starts
/// afresh from the forward iterate `n`, so the cost is the sum of the checkpoints.
pub fn reversibility_error(
    map: &MapInstance,
    x0: &State,
    n: u64,
    precision: Precision,
    norm: NormSpec,
    checkpoints: &Checkpoints,
) -> Result<ErrorSeries> {
    require_invertible(map)?;
    let idx = norm.indices(map)?;
    let pts = checkpoints.resolve(n)?;
    let values = with_backend!(Backend::select(precision), ar => {
        let st = Stepper::new(map, ar)?;
        let start = st.load(x0)?;
        let mut fwd = start.clone();
        let mut done = 0;
        let mut out = Vec::with_capacity(pts.len());
        for &p in &pts {
            for _ in done..p {
                st.forward(&mut fwd, None);
            }
            done = p;
            check_finite(&st, &fwd)?;
            let mut back = fwd.clone();
            for _ in 0..p {
                st.inverse(&mut back, None);
            }
            check_finite(&st, &back)?;
            out.push(distance(&st, &back, &start, &idx));
        }
        out
    });
    Ok(ErrorSeries { kind: ErrorKind::Reversibility, iterations: pts, values })
}

/// `R_N` alone (2N map steps).
pub fn reversibility_error_final(
    map: &MapInstance,
    x0: &State,
    n: u64,
    precision: Precision,
    norm: NormSpec,
) -> Result<f64> {
    let s = reversibility_error(map, x0, n, precision, norm, &Checkpoints::Explicit(vec![n]))?;
    Ok(s.values[0])
}

fn bits(p: Precision) -> u64 {
    match p {
        Precision::Rounded(s) => s.significand_bits() as u64,
        Precision::Exact => u64::MAX,
    }
}

/// `Delta_n = |M_low^n(x0) - M_high^n(x0)|`. Both orbits start from the seed
/// rounded to `low`.
pub fn orbit_divergence(
    map: &MapInstance,
    x0: &State,
    n: u64,
    low: Precision,
    high: Precision,
    norm: NormSpec,
    checkpoints: &Checkpoints,
) -> Result<ErrorSeries> {
    if bits(low) > bits(high) {
        return Err(Error::invalid(format!("low precision {low} is wider than reference precision {high}")));
    }
    let idx = norm.indices(map)?;
    let pts = checkpoints.resolve(n)?;
    let values = with_backend!(Backend::select(low), lo_ar => {
        with_backend!(Backend::select(high), hi_ar => {
            let lo = Stepper::new(map, lo_ar)?;
            let hi = Stepper::new(map, hi_ar)?;
            let mut a = lo.load(x0)?;
            let seed: Vec<Dyadic> = a
                .iter()
                .map(|v| lo.arithmetic().to_dyadic(v).expect("finite seed"))
                .collect();
            let mut b = hi.load_exact(&seed);
            let mut done = 0;
            let mut out = Vec::with_capacity(pts.len());
            for &p in &pts {
                for _ in done..p {
                    lo.forward(&mut a, None);
                    hi.forward(&mut b, None);
                }
                done = p;
                check_finite(&lo, &a)?;
                check_finite(&hi, &b)?;
                let d2: f64 = idx.iter().map(|&i| cross_difference(&lo, &a[i], &hi, &b[i], i).powi(2)).sum();
                out.push(d2.sqrt());
            }
            out
        })
    });
    Ok(ErrorSeries { kind: ErrorKind::Divergence, iterations: pts, values })
}

/// `Delta_N` alone.
pub fn orbit_divergence_final(
    map: &MapInstance,
    x0: &State,
    n: u64,
    low: Precision,
    high: Precision,
    norm: NormSpec,
) -> Result<f64> {
    let s = orbit_divergence(map, x0, n, low, high, norm, &Checkpoints::Explicit(vec![n]))?;
    Ok(s.values[0])
}

/// Global error of the torus translation with its linear drift removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalError {
    /// `G_n`: torus distance between the rounded orbit and `x0* + n omega`.
    pub series: ErrorSeries,
    /// `G_N / N`.
    pub drift: f64,
    /// `w_n = (G_n - n drift) / eps`.
    pub fluctuation: Vec<f64>,
    pub machine_epsilon: f64,
}

/// Global error of the rounded translation orbit against the exact orbit
/// `x0* + n omega mod 1` (evaluated exactly, then rounded to 113 bits), where
/// `x0*` is the seed rounded to `precision`.
pub fn global_error_translation(
    map: &MapInstance,
    x0: &State,
    n: u64,
    precision: Precision,
    checkpoints: &Checkpoints,
) -> Result<GlobalError> {
    let MapInstance::TorusTranslation { omega } = *map else {
        return Err(Error::Unsupported(format!(
            "global error is defined only for the torus translation, not '{}'",
            map.family()
        )));
    };
    let eps = match precision {
        Precision::Rounded(s) => s.machine_epsilon(),
        Precision::Exact => 0.0,
    };
    let pts = checkpoints.resolve(n)?;
    let omega_exact = Dyadic::from_f64(omega).expect("validated omega");
    let (one, half) = (Dyadic::from_i64(1), Dyadic::from_parts(1.into(), -1));
    let values = with_backend!(Backend::select(precision), ar => {
        let st = Stepper::new(map, ar)?;
        let mut x = st.load(x0)?;
        let seed = st.arithmetic().to_dyadic(&x[0]).expect("finite seed");
        let mut done = 0;
        let mut out = Vec::with_capacity(pts.len());
        for &p in &pts {
            for _ in done..p {
                st.forward(&mut x, None);
            }
            done = p;
            let exact = seed.add(&omega_exact.mul(&Dyadic::from_i64(p as i64)));
            let reference = PrecisionSpec::EXTENDED113.round(&exact)?.value;
            let here = st.arithmetic().to_dyadic(&x[0]).expect("finite orbit");
            // torus distance taken exactly before converting
            let d = here.sub(&reference);
            let k = d.add(&half).div_floor(&one);
            out.push(d.sub(&Dyadic::from_parts(k, 0)).to_f64().abs());
        }
        out
    });
    let last_n = *pts.last().unwrap();
    let drift = values.last().unwrap() / last_n as f64;
    let fluctuation = if eps > 0.0 {
        pts.iter().zip(&values).map(|(&p, g)| (g - p as f64 * drift) / eps).collect()
    } else {
        vec![0.0; values.len()]
    };
    Ok(GlobalError {
        series: ErrorSeries { kind: ErrorKind::Global, iterations: pts, values },
        drift,
        fluctuation,
        machine_epsilon: eps,
    })
}

/// Compensated (Neumaier) running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Initial deviation vectors for variational indicators.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationVectors {
    /// `v = (1, 0, ...)`, `u = (0, 1, 0, ...)` (no `u` in one dimension).
    #[default]
    Default,
    /// Seeded random orthonormal pair.
    Random {
        seed: u64,
    },
    Given {
        v: Vec<f64>,
        u: Option<Vec<f64>>,
    },
}

impl DeviationVectors {
    pub fn resolve(&self, dim: usize) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        match self {
            DeviationVectors::Default => {
                let mut v = vec![0.0; dim];
                v[0] = 1.0;
                let u = (dim >= 2).then(|| {
                    let mut u = vec![0.0; dim];
                    u[1] = 1.0;
                    u
                });
                Ok((v, u))
            }
            DeviationVectors::Random { seed } => {
                if dim < 2 {
                    let mut r = rng::MemberRng::new(*seed, 0);
                    return Ok((vec![if r.unit() < 0.5 { -1.0 } else { 1.0 }], None));
                }
                let (v, u) = rng::orthonormal_pair(dim, *seed);
                Ok((v, Some(u)))
            }
            DeviationVectors::Given { v, u } => Ok((v.clone(), u.clone())),
        }
    }
}

/// Alignment below which two deviation vectors count as collinear.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-12;

/// Orbit point (iterated in binary64) with one or two unit deviation vectors.
#[derive(Clone, Debug)]
pub struct TangentState {
    stepper: Stepper<DoubleArith>,
    x: Vec<f64>,
    v: Vec<f64>,
    u: Option<Vec<f64>>,
    steps: u64,
}

/// Pre-normalization stretch factors of one tangent step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stretch {
    pub v: f64,
    pub u: Option<f64>,
}

fn unit_vector(v: &[f64], dim: usize, name: &str) -> Result<Vec<f64>> {
    if v.len() != dim {
        return Err(Error::invalid(format!("deviation vector {name} has {} entries, expected {dim}", v.len())));
    }
    let n = norm2(v);
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::invalid(format!("deviation vector {name} must be finite and nonzero")));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

impl TangentState {
    pub fn new(map: &MapInstance, x0: &State, v0: &[f64], u0: Option<&[f64]>) -> Result<Self> {
        let stepper = Stepper::new(map, DoubleArith)?;
        let x = stepper.load(x0)?;
        let dim = map.state_dim();
        let v = unit_vector(v0, dim, "v")?;
        let u = u0.map(|u| unit_vector(u, dim, "u")).transpose()?;
        let ts = TangentState { stepper, x, v, u, steps: 0 };
        if let Some(s) = ts.sali() {
            if s < COLLINEARITY_TOLERANCE {
                return Err(Error::invalid("deviation vectors v and u are collinear"));
            }
        }
        Ok(ts)
    }

    pub fn state(&self) -> State {
        State(self.x.clone())
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn u(&self) -> Option<&[f64]> {
        self.u.as_deref()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `min(|v + u|, |v - u|)` of the current unit vectors, capped at `sqrt 2`.
    pub fn sali(&self) -> Option<f64> {
        let u = self.u.as_ref()?;
        let plus = self.v.iter().zip(u).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        let minus = self.v.iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        Some(plus.min(minus).min(SQRT_2))
    }

    /// Advances orbit and vectors, renormalizes the vectors and returns their
    /// stretch factors.
    pub fn step(&mut self) -> Result<Stretch> {
        let j = self.stepper.map().jacobian_at(&self.x);
        self.stepper.forward(&mut self.x, None);
        check_finite(&self.stepper, &self.x)?;
        self.steps += 1;
        let sv = Self::advance(&j, &mut self.v)?;
        let su = match self.u.as_mut() {
            Some(u) => Some(Self::advance(&j, u)?),
            None => None,
        };
        Ok(Stretch { v: sv, u: su })
    }

    fn advance(j: &crate::maps::JacobianMatrix, v: &mut Vec<f64>) -> Result<f64> {
        let w = j.apply(v);
        let n = norm2(&w);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Numeric(format!("deviation vector degenerated (norm {n})")));
        }
        *v = w.into_iter().map(|x| x / n).collect();
        Ok(n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    Mlce,
    Megno,
    MegnoMean,
    Sali,
}

/// Variational indicator values for `n = 1..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSeries {
    pub kind: IndicatorKind,
    pub iterations: Vec<u64>,
    pub values: Vec<f64>,
}

impl IndicatorSeries {
    fn new(kind: IndicatorKind, values: Vec<f64>) -> Self {
        IndicatorSeries { kind, iterations: (1..=values.len() as u64).collect(), values }
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Value at iteration `n >= 1`.
    pub fn at(&self, n: u64) -> Option<f64> {
        self.values.get((n as usize).checked_sub(1)?).copied()
    }
}

fn require_steps(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("the number of iterations must be at least 1"))
    } else {
        Ok(())
    }
}

/// Finite-time mLCE: mean log-stretch of a deviation vector renormalized each step.
pub fn mlce(map: &MapInstance, x0: &State, v0: &[f64], n: u64) -> Result<IndicatorSeries> {
    require_steps(n)?;
    let mut ts = TangentState::new(map, x0, v0, None)?;
    let mut sum = Neumaier::default();
    let mut out = Vec::with_capacity(n as usize);
    for k in 1..=n {
        sum.add(ts.step()?.v.ln());
        out.push(sum.value() / k as f64);
    }
    Ok(IndicatorSeries::new(IndicatorKind::Mlce, out))
}

/// MEGNO `Y_{m,j}(n) = (m+1) n^j sum_k k^m L_k` and its running mean, where
/// `L_k` is the larger log-stretch of `v` and `u` at step `k` (ties go to `v`).
pub fn megno(
    map: &MapInstance,
    x0: &State,
    v0: &[f64],
    u0: Option<&[f64]>,
    n: u64,
    m: i32,
    j: i32,
) -> Result<(IndicatorSeries, IndicatorSeries)> {
    require_steps(n)?;
    let mut ts = TangentState::new(map, x0, v0, u0)?;
    let (mut weighted, mut ysum) = (Neumaier::default(), Neumaier::default());
    let mut y = Vec::with_capacity(n as usize);
    let mut ybar = Vec::with_capacity(n as usize);
    for k in 1..=n {
        let s = ts.step()?;
        let stretch = match s.u {
            Some(su) if su > s.v => su,
            _ => s.v,
        };
        let kf = k as f64;
        weighted.add(kf.powi(m) * stretch.ln());
        let yk = (m + 1) as f64 * kf.powi(j) * weighted.value();
        ysum.add(yk);
        y.push(yk);
        ybar.push(ysum.value() / kf);
    }
    Ok((IndicatorSeries::new(IndicatorKind::Megno, y), IndicatorSeries::new(IndicatorKind::MegnoMean, ybar)))
}

/// SALI with both vectors renormalized every step. Raw values; no cutoff.
pub fn sali(map: &MapInstance, x0: &State, v0: &[f64], u0: &[f64], n: u64) -> Result<IndicatorSeries> {
    require_steps(n)?;
    if map.state_dim() < 2 {
        return Err(Error::Unsupported("SALI needs a state of dimension at least 2".into()));
    }
    let mut ts = TangentState::new(map, x0, v0, Some(u0))?;
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        ts.step()?;
        out.push(ts.sali().expect("two vectors"));
    }
    Ok(IndicatorSeries::new(IndicatorKind::Sali, out))
}
