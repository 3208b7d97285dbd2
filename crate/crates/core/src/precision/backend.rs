use std::fmt::Debug;

use super::ddouble;
use super::dyadic::Dyadic;
use super::fast::{fits_f64_carrier, round_f64};
use super::{Precision, PrecisionSpec, EXACT_WORKING_BITS};

/// Rounded arithmetic over a value type. Every operation returns the
/// rounded result of the exact (or reference) operation.
///
/// Overflow does not fail eagerly: it yields a non-finite value that
/// propagates and is detected with [`Arithmetic::is_finite`].
pub trait Arithmetic: Clone + Send + Sync + 'static {
    type Value: Clone + Send + Sync + Debug + PartialEq;

    fn precision(&self) -> Precision;
    #[allow(clippy::wrong_self_convention)]
    fn from_f64(&self, x: f64) -> Self::Value;
    #[allow(clippy::wrong_self_convention)]
    fn from_dyadic(&self, x: &Dyadic) -> Self::Value;
    /// Nearest `f64`.
    fn to_f64(&self, v: &Self::Value) -> f64;
    /// Exact value; `None` when non-finite.
    fn to_dyadic(&self, v: &Self::Value) -> Option<Dyadic>;
    /// The value when it is carried exactly as an `f64`.
    fn as_exact_f64(&self, v: &Self::Value) -> Option<f64>;
    fn is_finite(&self, v: &Self::Value) -> bool;

    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn div(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn sin(&self, a: &Self::Value) -> Self::Value;
    fn cos(&self, a: &Self::Value) -> Self::Value;
    /// `x - k * period` for the integer `k` that puts the exact difference in
    /// `[0, period)`, rounded once. A result that rounds up to `period` is
    /// returned as zero.
    fn reduce(&self, x: &Self::Value, period: &Self::Value) -> Self::Value;
}

/// Backend chosen for a [`Precision`].
#[derive(Clone, Debug)]
pub enum Backend {
    Narrow(NarrowArith),
    Double(DoubleArith),
    Wide(WideArith),
    Exact(ExactArith),
}

impl Backend {
    pub fn select(precision: Precision) -> Backend {
        match precision {
            Precision::Exact => Backend::Exact(ExactArith),
            Precision::Rounded(s) if s == PrecisionSpec::DOUBLE => Backend::Double(DoubleArith),
            Precision::Rounded(s) if NarrowArith::supports(s) => Backend::Narrow(NarrowArith::new(s)),
            Precision::Rounded(s) => Backend::Wide(WideArith::new(s)),
        }
    }
}

/// Runs `$body` with `$ar` bound to the concrete backend of `$backend`.
#[macro_export]
macro_rules! with_backend {
    ($backend:expr, $ar:ident => $body:expr) => {
        match $backend {
            $crate::precision::Backend::Narrow($ar) => $body,
            $crate::precision::Backend::Double($ar) => $body,
            $crate::precision::Backend::Wide($ar) => $body,
            $crate::precision::Backend::Exact($ar) => $body,
        }
    };
}

/// Formats with `p <= 25` that fit inside binary64, carried in `f64`.
#[derive(Clone, Debug)]
pub struct NarrowArith {
    spec: PrecisionSpec,
    p: u32,
    emin: i32,
    overflow: f64,
}

impl NarrowArith {
    pub fn supports(spec: PrecisionSpec) -> bool {
        spec.significand_bits() <= 25
            && fits_f64_carrier(spec.significand_bits(), spec.exponent_min(), spec.exponent_max())
    }

    pub fn new(spec: PrecisionSpec) -> Self {
        assert!(Self::supports(spec), "{spec} is not an f64-carried format");
        NarrowArith {
            spec,
            p: spec.significand_bits(),
            emin: spec.exponent_min(),
            overflow: 2f64.powi(spec.exponent_max() + 1),
        }
    }

    #[inline]
    fn round(&self, x: f64) -> f64 {
        let r = round_f64(x, self.p, self.emin);
        if r.abs() >= self.overflow {
            f64::INFINITY.copysign(r)
        } else {
            r
        }
    }
}

impl Arithmetic for NarrowArith {
    type Value = f64;

    fn precision(&self) -> Precision {
        Precision::Rounded(self.spec)
    }
    #[inline]
    fn from_f64(&self, x: f64) -> f64 {
        self.round(x)
    }
    fn from_dyadic(&self, x: &Dyadic) -> f64 {
        match self.spec.round(x) {
            Ok(r) => r.value.to_f64(),
            Err(_) => f64::INFINITY.copysign(if x.is_negative() { -1.0 } else { 1.0 }),
        }
    }
    #[inline]
    fn to_f64(&self, v: &f64) -> f64 {
        *v
    }
    fn to_dyadic(&self, v: &f64) -> Option<Dyadic> {
        Dyadic::from_f64(*v)
    }
    #[inline]
    fn as_exact_f64(&self, v: &f64) -> Option<f64> {
        Some(*v)
    }
    #[inline]
    fn is_finite(&self, v: &f64) -> bool {
        v.is_finite()
    }
    #[inline]
    fn add(&self, a: &f64, b: &f64) -> f64 {
        self.round(a + b)
    }
    #[inline]
    fn sub(&self, a: &f64, b: &f64) -> f64 {
        self.round(a - b)
    }
    #[inline]
    fn mul(&self, a: &f64, b: &f64) -> f64 {
        self.round(a * b)
    }
    #[inline]
    fn div(&self, a: &f64, b: &f64) -> f64 {
        self.round(a / b)
    }
    #[inline]
    fn sin(&self, a: &f64) -> f64 {
        self.round(libm::sin(*a))
    }
    #[inline]
    fn cos(&self, a: &f64) -> f64 {
        self.round(libm::cos(*a))
    }
    fn reduce(&self, x: &f64, period: &f64) -> f64 {
        let (x, p) = (*x, *period);
        if !x.is_finite() || (0.0..p).contains(&x) {
            return x;
        }
        // With p-bit operands and |k| < 2^20 the exact remainder fits in 53 bits,
        // so the fused multiply-add below is exact.
        if x.abs() < p * 1048576.0 {
            let r = fma_remainder(x, p);
            let r = self.round(r);
            return if r >= p { 0.0 } else { r };
        }
        let xd = Dyadic::from_f64(x).expect("finite");
        let pd = Dyadic::from_f64(p).expect("finite");
        let r = self.from_dyadic(&exact_remainder(&xd, &pd));
        if r >= p {
            0.0
        } else {
            r
        }
    }
}

/// `x - k p` in `[0, p)` via fused multiply-add, single rounding to binary64.
#[inline]
fn fma_remainder(x: f64, p: f64) -> f64 {
    let mut k = (x / p).floor();
    let mut r = (-k).mul_add(p, x);
    while r < 0.0 {
        k -= 1.0;
        r = (-k).mul_add(p, x);
    }
    while r >= p {
        // exact remainder could still be below p when r rounded up to p
        let next = (-(k + 1.0)).mul_add(p, x);
        if next < 0.0 {
            break;
        }
        k += 1.0;
        r = next;
    }
    r
}

fn exact_remainder(x: &Dyadic, period: &Dyadic) -> Dyadic {
    let k = x.div_floor(period);
    x.sub(&period.mul(&Dyadic::from_parts(k, 0)))
}

/// Native IEEE 754 binary64 with double-double transcendentals.
#[derive(Clone, Debug)]
pub struct DoubleArith;

impl DoubleArith {
    fn wide_trig(x: f64, cos: bool) -> f64 {
        let d = Dyadic::from_f64(x).expect("finite");
        let r = if cos { d.cos_approx(170) } else { d.sin_approx(170) };
        r.to_f64()
    }
}

impl Arithmetic for DoubleArith {
    type Value = f64;

    fn precision(&self) -> Precision {
        Precision::DOUBLE
    }
    #[inline]
    fn from_f64(&self, x: f64) -> f64 {
        x
    }
    fn from_dyadic(&self, x: &Dyadic) -> f64 {
        x.to_f64()
    }
    #[inline]
    fn to_f64(&self, v: &f64) -> f64 {
        *v
    }
    fn to_dyadic(&self, v: &f64) -> Option<Dyadic> {
        Dyadic::from_f64(*v)
    }
    #[inline]
    fn as_exact_f64(&self, v: &f64) -> Option<f64> {
        Some(*v)
    }
    #[inline]
    fn is_finite(&self, v: &f64) -> bool {
        v.is_finite()
    }
    #[inline]
    fn add(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }
    #[inline]
    fn sub(&self, a: &f64, b: &f64) -> f64 {
        a - b
    }
    #[inline]
    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a * b
    }
    #[inline]
    fn div(&self, a: &f64, b: &f64) -> f64 {
        a / b
    }
    #[inline]
    fn sin(&self, a: &f64) -> f64 {
        if !a.is_finite() {
            return f64::NAN;
        }
        if a.abs() <= ddouble::MAX_REDUCED_ARG {
            ddouble::sin_cos(*a).0
        } else {
            Self::wide_trig(*a, false)
        }
    }
    #[inline]
    fn cos(&self, a: &f64) -> f64 {
        if !a.is_finite() {
            return f64::NAN;
        }
        if a.abs() <= ddouble::MAX_REDUCED_ARG {
            ddouble::sin_cos(*a).1
        } else {
            Self::wide_trig(*a, true)
        }
    }
    fn reduce(&self, x: &f64, period: &f64) -> f64 {
        let (x, p) = (*x, *period);
        if !x.is_finite() || (0.0..p).contains(&x) {
            return x;
        }
        if x.abs() < p * 2f64.powi(50) {
            let r = fma_remainder(x, p);
            return if r >= p { 0.0 } else { r };
        }
        let xd = Dyadic::from_f64(x).expect("finite");
        let pd = Dyadic::from_f64(p).expect("finite");
        let r = exact_remainder(&xd, &pd).to_f64();
        if r >= p {
            0.0
        } else {
            r
        }
    }
}

/// Value of the wide backend: an exact format value or an overflowed marker.
#[derive(Clone, Debug, PartialEq)]
pub enum WideValue {
    Finite(Dyadic),
    Overflow { negative: bool },
}

/// Any format, through exact dyadic arithmetic and one rounding per operation.
#[derive(Clone, Debug)]
pub struct WideArith {
    spec: PrecisionSpec,
    trig_bits: u64,
}

impl WideArith {
    pub fn new(spec: PrecisionSpec) -> Self {
        WideArith { spec, trig_bits: 2 * spec.significand_bits() as u64 + 64 }
    }

    fn round(&self, d: Dyadic) -> WideValue {
        match self.spec.round(&d) {
            Ok(r) => WideValue::Finite(r.value),
            Err(_) => WideValue::Overflow { negative: d.is_negative() },
        }
    }

    fn binary(&self, a: &WideValue, b: &WideValue, f: impl FnOnce(&Dyadic, &Dyadic) -> Option<Dyadic>) -> WideValue {
        match (a, b) {
            (WideValue::Finite(x), WideValue::Finite(y)) => match f(x, y) {
                Some(d) => self.round(d),
                None => WideValue::Overflow { negative: false },
            },
            (WideValue::Overflow { negative }, _) | (_, WideValue::Overflow { negative }) => {
                WideValue::Overflow { negative: *negative }
            }
        }
    }
}

impl Arithmetic for WideArith {
    type Value = WideValue;

    fn precision(&self) -> Precision {
        Precision::Rounded(self.spec)
    }
    fn from_f64(&self, x: f64) -> WideValue {
        match Dyadic::from_f64(x) {
            Some(d) => self.round(d),
            None => WideValue::Overflow { negative: x < 0.0 },
        }
    }
    fn from_dyadic(&self, x: &Dyadic) -> WideValue {
        self.round(x.clone())
    }
    fn to_f64(&self, v: &WideValue) -> f64 {
        match v {
            WideValue::Finite(d) => d.to_f64(),
            WideValue::Overflow { negative: true } => f64::NEG_INFINITY,
            WideValue::Overflow { negative: false } => f64::INFINITY,
        }
    }
    fn to_dyadic(&self, v: &WideValue) -> Option<Dyadic> {
        match v {
            WideValue::Finite(d) => Some(d.clone()),
            WideValue::Overflow { .. } => None,
        }
    }
    fn as_exact_f64(&self, _v: &WideValue) -> Option<f64> {
        None
    }
    fn is_finite(&self, v: &WideValue) -> bool {
        matches!(v, WideValue::Finite(_))
    }
    fn add(&self, a: &WideValue, b: &WideValue) -> WideValue {
        self.binary(a, b, |x, y| Some(x.add(y)))
    }
    fn sub(&self, a: &WideValue, b: &WideValue) -> WideValue {
        self.binary(a, b, |x, y| Some(x.sub(y)))
    }
    fn mul(&self, a: &WideValue, b: &WideValue) -> WideValue {
        self.binary(a, b, |x, y| Some(x.mul(y)))
    }
    fn div(&self, a: &WideValue, b: &WideValue) -> WideValue {
        let bits = self.spec.significand_bits() as u64 + 3;
        self.binary(a, b, |x, y| x.div_sticky(y, bits))
    }
    fn sin(&self, a: &WideValue) -> WideValue {
        match a {
            WideValue::Finite(x) => self.round(x.sin_approx(self.trig_bits)),
            other => other.clone(),
        }
    }
    fn cos(&self, a: &WideValue) -> WideValue {
        match a {
            WideValue::Finite(x) => self.round(x.cos_approx(self.trig_bits)),
            other => other.clone(),
        }
    }
    fn reduce(&self, x: &WideValue, period: &WideValue) -> WideValue {
        let (WideValue::Finite(xd), WideValue::Finite(pd)) = (x, period) else {
            return x.clone();
        };
        let r = self.round(exact_remainder(xd, pd));
        match r {
            WideValue::Finite(ref d) if d >= pd => WideValue::Finite(Dyadic::zero()),
            other => other,
        }
    }
}

/// Exact arithmetic for `+ - *` and modulo; division and transcendentals are
/// evaluated at a fixed working precision so results stay deterministic.
#[derive(Clone, Debug)]
pub struct ExactArith;

impl ExactArith {
    fn fixed(d: Dyadic) -> Dyadic {
        d.round_to_grid(EXACT_WORKING_BITS, None).value
    }
}

impl Arithmetic for ExactArith {
    type Value = Dyadic;

    fn precision(&self) -> Precision {
        Precision::Exact
    }
    fn from_f64(&self, x: f64) -> Dyadic {
        Dyadic::from_f64(x).expect("finite input")
    }
    fn from_dyadic(&self, x: &Dyadic) -> Dyadic {
        x.clone()
    }
    fn to_f64(&self, v: &Dyadic) -> f64 {
        v.to_f64()
    }
    fn to_dyadic(&self, v: &Dyadic) -> Option<Dyadic> {
        Some(v.clone())
    }
    fn as_exact_f64(&self, _v: &Dyadic) -> Option<f64> {
        None
    }
    fn is_finite(&self, _v: &Dyadic) -> bool {
        true
    }
    fn add(&self, a: &Dyadic, b: &Dyadic) -> Dyadic {
        a.add(b)
    }
    fn sub(&self, a: &Dyadic, b: &Dyadic) -> Dyadic {
        a.sub(b)
    }
    fn mul(&self, a: &Dyadic, b: &Dyadic) -> Dyadic {
        a.mul(b)
    }
    fn div(&self, a: &Dyadic, b: &Dyadic) -> Dyadic {
        let q = a.div_sticky(b, EXACT_WORKING_BITS as u64 + 3).expect("division by zero in exact arithmetic");
        Self::fixed(q)
    }
    fn sin(&self, a: &Dyadic) -> Dyadic {
        Self::fixed(a.sin_approx(EXACT_WORKING_BITS as u64 + 32))
    }
    fn cos(&self, a: &Dyadic) -> Dyadic {
        Self::fixed(a.cos_approx(EXACT_WORKING_BITS as u64 + 32))
    }
    fn reduce(&self, x: &Dyadic, period: &Dyadic) -> Dyadic {
        exact_remainder(x, period)
    }
}
