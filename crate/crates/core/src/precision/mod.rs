//! Deterministic rounded arithmetic at a configurable significand width.
//!
//! A [`PrecisionSpec`] fixes a binary floating-point format (significand
//! bits `p`, exponent range). All rounding is to nearest with ties to even,
//! with gradual underflow. Map iteration runs through an [`Arithmetic`]
//! backend selected from the [`PrecisionSpec`]:
//!
//! * `p <= 25` inside the binary64 range: values carried in `f64`, each
//!   operation computed in binary64 and rounded once more to `p` bits. For
//!   `+ - * /` this double rounding is innocuous because `53 >= 2p + 2`.
//! * binary64 itself: native IEEE operations.
//! * everything else (for example the 113-bit reference format): exact
//!   [`Dyadic`] arithmetic followed by one rounding.
//!
//! Transcendentals are evaluated at no less than `2p` bits and rounded once,
//! which makes them faithful (within one ulp) rather than correctly rounded.

mod backend;
mod ddouble;
mod dyadic;
mod fast;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use backend::{Arithmetic, Backend, DoubleArith, ExactArith, NarrowArith, WideArith, WideValue};
pub use dyadic::Dyadic;

/// Errors raised by rounding and rounded evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrecisionError {
    #[error("invalid precision: {0}")]
    InvalidSpec(String),
    #[error("value {value:e} overflows the range of {spec}")]
    Overflow { value: f64, spec: PrecisionSpec },
    #[error("non-finite input")]
    NonFinite,
    #[error("argument {value:e} is not representable in {spec}")]
    NotRepresentable { value: f64, spec: PrecisionSpec },
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
}

/// Largest significand width accepted (limited by the cached digits of pi).
pub const MAX_SIGNIFICAND_BITS: u32 = 1000;

/// A binary floating-point format: `p` significand bits (including the
/// leading bit) and the normal exponent range `[exponent_min, exponent_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PrecisionSpec {
    significand_bits: u32,
    exponent_min: i32,
    exponent_max: i32,
}

impl PrecisionSpec {
    /// IEEE 754 binary32.
    pub const SINGLE: PrecisionSpec = PrecisionSpec { significand_bits: 24, exponent_min: -126, exponent_max: 127 };
    /// IEEE 754 binary64.
    pub const DOUBLE: PrecisionSpec = PrecisionSpec { significand_bits: 53, exponent_min: -1022, exponent_max: 1023 };
    /// IEEE 754 binary128 layout, used as the reference ("exact") orbit format.
    pub const EXTENDED113: PrecisionSpec =
        PrecisionSpec { significand_bits: 113, exponent_min: -16382, exponent_max: 16383 };

    pub fn new(significand_bits: u32, exponent_min: i32, exponent_max: i32) -> Result<Self, PrecisionError> {
        if !(2..=MAX_SIGNIFICAND_BITS).contains(&significand_bits) {
            return Err(PrecisionError::InvalidSpec(format!(
                "significand bits {significand_bits} outside [2, {MAX_SIGNIFICAND_BITS}]"
            )));
        }
        if exponent_min >= exponent_max {
            return Err(PrecisionError::InvalidSpec(format!(
                "exponent_min {exponent_min} must be below exponent_max {exponent_max}"
            )));
        }
        if exponent_min < -(1 << 30) || exponent_max > (1 << 30) {
            return Err(PrecisionError::InvalidSpec("exponent range too wide".into()));
        }
        Ok(PrecisionSpec { significand_bits, exponent_min, exponent_max })
    }

    pub fn significand_bits(&self) -> u32 {
        self.significand_bits
    }

    pub fn exponent_min(&self) -> i32 {
        self.exponent_min
    }

    pub fn exponent_max(&self) -> i32 {
        self.exponent_max
    }

    /// `2^-p`.
    pub fn machine_epsilon(&self) -> f64 {
        machine_epsilon(*self)
    }

    /// Rounds an exact value into this format.
    pub fn round(&self, x: &Dyadic) -> Result<RoundedValue, PrecisionError> {
        let r = x.round_to_grid(self.significand_bits, Some(self.exponent_min as i64));
        if r.value.log2_floor().is_some_and(|e| e > self.exponent_max as i64) {
            return Err(PrecisionError::Overflow { value: x.to_f64(), spec: *self });
        }
        let negative_zero = r.value.is_zero() && x.is_negative();
        Ok(RoundedValue { value: r.value, underflow: r.tiny, negative_zero })
    }
}

impl fmt::Display for PrecisionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PrecisionSpec::SINGLE => f.write_str("single"),
            PrecisionSpec::DOUBLE => f.write_str("double"),
            PrecisionSpec::EXTENDED113 => f.write_str("extended113"),
            s => write!(f, "p{}:{}:{}", s.significand_bits, s.exponent_min, s.exponent_max),
        }
    }
}

impl FromStr for PrecisionSpec {
    type Err = PrecisionError;

    /// Accepts `single`, `double`, `extended113` or `p<bits>:<emin>:<emax>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" => Ok(Self::SINGLE),
            "double" => Ok(Self::DOUBLE),
            "extended113" => Ok(Self::EXTENDED113),
            other => {
                let bad = || PrecisionError::InvalidSpec(format!("unknown precision '{s}'"));
                let rest = other.strip_prefix('p').ok_or_else(bad)?;
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                let p = parts[0].parse().map_err(|_| bad())?;
                let lo = parts[1].parse().map_err(|_| bad())?;
                let hi = parts[2].parse().map_err(|_| bad())?;
                Self::new(p, lo, hi)
            }
        }
    }
}

/// Arithmetic mode for an orbit: rounded to a format, or exact.
///
/// In exact mode sums, differences, products and modulo reductions carry no
/// rounding at all; division and transcendental functions are deterministic
/// functions evaluated at [`EXACT_WORKING_BITS`] bits. Forward and inverse
/// steps then compose to the identity exactly for every map except the
/// circle rotation, whose matrix entries cannot be dyadic and orthonormal at
/// the same time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Precision {
    Rounded(PrecisionSpec),
    Exact,
}

/// Working precision of division and transcendentals in exact mode.
pub const EXACT_WORKING_BITS: u32 = 256;

impl Precision {
    pub const SINGLE: Precision = Precision::Rounded(PrecisionSpec::SINGLE);
    pub const DOUBLE: Precision = Precision::Rounded(PrecisionSpec::DOUBLE);
    pub const EXTENDED113: Precision = Precision::Rounded(PrecisionSpec::EXTENDED113);

    /// Effective significand width used to order precisions.
    pub fn significand_bits(&self) -> u32 {
        match self {
            Precision::Rounded(s) => s.significand_bits,
            Precision::Exact => u32::MAX,
        }
    }

    pub fn spec(&self) -> Option<PrecisionSpec> {
        match self {
            Precision::Rounded(s) => Some(*s),
            Precision::Exact => None,
        }
    }
}

impl From<PrecisionSpec> for Precision {
    fn from(s: PrecisionSpec) -> Self {
        Precision::Rounded(s)
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Rounded(s) => s.fmt(f),
            Precision::Exact => f.write_str("exact"),
        }
    }
}

impl FromStr for Precision {
    type Err = PrecisionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("exact") {
            Ok(Precision::Exact)
        } else {
            s.parse().map(Precision::Rounded)
        }
    }
}

impl From<PrecisionSpec> for String {
    fn from(p: PrecisionSpec) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for PrecisionSpec {
    type Error = PrecisionError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Precision> for String {
    fn from(p: Precision) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Precision {
    type Error = PrecisionError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A value exactly representable in some [`PrecisionSpec`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundedValue {
    pub value: Dyadic,
    /// Set when the result is subnormal, or zero while the exact value was not.
    pub underflow: bool,
    /// Sign of a zero result under the IEEE 754 rules. [`Dyadic`] has a
    /// single zero, so the sign is kept here.
    pub negative_zero: bool,
}

impl RoundedValue {
    pub fn to_f64(&self) -> f64 {
        if self.negative_zero {
            -0.0
        } else {
            self.value.to_f64()
        }
    }
}

/// `2^-p` for the given format.
pub fn machine_epsilon(spec: PrecisionSpec) -> f64 {
    2f64.powi(-(spec.significand_bits as i32))
}

/// Rounds `x` to the nearest value of `spec`, ties to even.
///
/// Values below the normal range round onto the subnormal grid and raise
/// the `underflow` flag; values beyond the largest finite number are an
/// overflow error.
pub fn round_nearest(x: f64, spec: PrecisionSpec) -> Result<RoundedValue, PrecisionError> {
    let d = Dyadic::from_f64(x).ok_or(PrecisionError::NonFinite)?;
    let mut r = spec.round(&d)?;
    r.negative_zero |= x == 0.0 && x.is_sign_negative();
    Ok(r)
}

/// Operations accepted by [`rounded_eval`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    /// Reduction into `[0, period)`; the period is first rounded into the format.
    Mod {
        period: f64,
    },
}

impl Op {
    fn arity(&self) -> usize {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }
}

/// Evaluates `op` on representable arguments with one rounding into `spec`
/// (faithful rounding for `Sin`/`Cos`).
pub fn rounded_eval(op: Op, args: &[f64], spec: PrecisionSpec) -> Result<RoundedValue, PrecisionError> {
    if args.len() != op.arity() {
        return Err(PrecisionError::Domain(format!("{op:?} takes {} argument(s), got {}", op.arity(), args.len())));
    }
    for &a in args {
        let r = round_nearest(a, spec)?;
        if r.value != Dyadic::from_f64(a).ok_or(PrecisionError::NonFinite)? {
            return Err(PrecisionError::NotRepresentable { value: a, spec });
        }
    }
    if op == Op::Div && args[1] == 0.0 {
        return Err(PrecisionError::DivisionByZero);
    }
    if let Op::Mod { period } = op {
        if !(period.is_finite() && period > 0.0) {
            return Err(PrecisionError::Domain(format!("modulo period must be positive, got {period}")));
        }
    }
    let backend = Backend::select(Precision::Rounded(spec));
    let result = crate::with_backend!(backend, ar => {
        let a = ar.from_f64(args[0]);
        let b = args.get(1).map(|&x| ar.from_f64(x));
        let v = match op {
            Op::Add => ar.add(&a, b.as_ref().unwrap()),
            Op::Sub => ar.sub(&a, b.as_ref().unwrap()),
            Op::Mul => ar.mul(&a, b.as_ref().unwrap()),
            Op::Div => ar.div(&a, b.as_ref().unwrap()),
            Op::Sin => ar.sin(&a),
            Op::Cos => ar.cos(&a),
            Op::Mod { period } => {
                let p = ar.from_f64(period);
                ar.reduce(&a, &p)
            }
        };
        ar.to_dyadic(&v)
    });
    let Some(value) = result else {
        return Err(PrecisionError::Overflow { value: f64::INFINITY, spec });
    };
    let below_normal = value.log2_floor().is_none_or(|e| e < spec.exponent_min as i64);
    let underflow = below_normal && {
        // decide with the exact value only in the rare tiny case
        let exact = match op {
            Op::Add | Op::Sub | Op::Mul => {
                let a = Dyadic::from_f64(args[0]).unwrap();
                let b = Dyadic::from_f64(args[1]).unwrap();
                Some(match op {
                    Op::Add => a.add(&b),
                    Op::Sub => a.sub(&b),
                    _ => a.mul(&b),
                })
            }
            _ => None,
        };
        match exact {
            Some(e) => e != value,
            None => true,
        }
    };
    let negative_zero = value.is_zero() && zero_is_negative(op, args);
    Ok(RoundedValue { value, underflow, negative_zero })
}

/// IEEE 754 sign of a zero result of `op` (round to nearest).
fn zero_is_negative(op: Op, args: &[f64]) -> bool {
    let neg = |x: f64| x.is_sign_negative();
    match op {
        Op::Mul | Op::Div => neg(args[0]) != neg(args[1]),
        Op::Add | Op::Sub => {
            let b = if op == Op::Sub { -args[1] } else { args[1] };
            let exact = Dyadic::from_f64(args[0]).unwrap().add(&Dyadic::from_f64(b).unwrap());
            if exact.is_zero() {
                neg(args[0]) && neg(b)
            } else {
                exact.is_negative()
            }
        }
        Op::Sin => neg(args[0]),
        Op::Cos | Op::Mod { .. } => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let s = PrecisionSpec::SINGLE;
        assert_eq!((s.significand_bits(), s.exponent_min(), s.exponent_max()), (24, -126, 127));
        let d = PrecisionSpec::DOUBLE;
        assert_eq!((d.significand_bits(), d.exponent_min(), d.exponent_max()), (53, -1022, 1023));
        assert_eq!("single".parse::<PrecisionSpec>().unwrap(), s);
        assert_eq!("extended113".parse::<PrecisionSpec>().unwrap(), PrecisionSpec::EXTENDED113);
        assert_eq!("p10:-14:15".parse::<PrecisionSpec>().unwrap(), PrecisionSpec::new(10, -14, 15).unwrap());
        assert_eq!("exact".parse::<Precision>().unwrap(), Precision::Exact);
        assert!("quad".parse::<PrecisionSpec>().is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(PrecisionSpec::new(1, -10, 10).is_err());
        assert!(PrecisionSpec::new(24, 10, 10).is_err());
        assert!(PrecisionSpec::new(24, 11, 10).is_err());
    }

    #[test]
    fn epsilon() {
        assert_eq!(machine_epsilon(PrecisionSpec::SINGLE), 2f64.powi(-24));
        assert_eq!(machine_epsilon(PrecisionSpec::DOUBLE), 2f64.powi(-53));
        assert_eq!(machine_epsilon(PrecisionSpec::new(10, -14, 15).unwrap()), 2f64.powi(-10));
    }

    #[test]
    fn round_examples() {
        let s = PrecisionSpec::SINGLE;
        assert_eq!(round_nearest(1.0, s).unwrap().to_f64(), 1.0);
        assert_eq!(round_nearest(1.0 + 2f64.powi(-25), s).unwrap().to_f64(), 1.0);
        // exact tie: 1 + 2^-24 sits halfway, even significand wins
        assert_eq!(round_nearest(1.0 + 2f64.powi(-24), s).unwrap().to_f64(), 1.0);
        assert_eq!(round_nearest(1.0 + 3.0 * 2f64.powi(-24), s).unwrap().to_f64(), 1.0 + 2.0 * 2f64.powi(-23));
    }

    #[test]
    fn overflow_and_underflow() {
        let s = PrecisionSpec::SINGLE;
        assert!(matches!(round_nearest(1e39, s), Err(PrecisionError::Overflow { .. })));
        assert!(matches!(round_nearest(f64::NAN, s), Err(PrecisionError::NonFinite)));
        let tiny = round_nearest(1.0e-40, s).unwrap();
        assert!(tiny.underflow);
        assert_eq!(tiny.to_f64(), 1.0e-40f32 as f64);
        let gone = round_nearest(1.0e-50, s).unwrap();
        assert!(gone.underflow);
        assert_eq!(gone.to_f64(), 0.0);
        assert!(!round_nearest(1.0e-30, s).unwrap().underflow);
        // largest finite single rounds fine, halfway to 2^128 overflows
        assert!(round_nearest(f32::MAX as f64, s).is_ok());
        assert!(round_nearest(2f64.powi(128) - 2f64.powi(103), s).is_err());
    }

    #[test]
    fn rounded_eval_examples() {
        let s = PrecisionSpec::SINGLE;
        assert_eq!(rounded_eval(Op::Add, &[0.25, 0.5], s).unwrap().to_f64(), 0.75);
        assert_eq!(rounded_eval(Op::Mod { period: 1.0 }, &[1.75], s).unwrap().to_f64(), 0.75);
        assert_eq!(rounded_eval(Op::Mod { period: 1.0 }, &[-0.25], s).unwrap().to_f64(), 0.75);
        assert!(matches!(rounded_eval(Op::Div, &[1.0, 0.0], s), Err(PrecisionError::DivisionByZero)));
        assert!(matches!(rounded_eval(Op::Add, &[0.1, 0.5], s), Err(PrecisionError::NotRepresentable { .. })));
        assert!(rounded_eval(Op::Mul, &[3.0e38f32 as f64, 2.0], s).is_err());
        let t = rounded_eval(Op::Mul, &[1.0e-30f32 as f64, 1.0e-10f32 as f64], s).unwrap();
        assert!(t.underflow);
    }
}
