//! Exact binary rationals `m * 2^e` with arbitrary-size integer significand.
//!
//! This is the wide reference type behind the extended-precision backend,
//! the exact-arithmetic backend and the high-precision evaluation of
//! transcendental functions.

use std::cmp::Ordering;
use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact value `mant * 2^exp`. Canonical form: `mant` is odd, or zero with `exp == 0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mant: BigInt,
    exp: i64,
}

/// Result of rounding a [`Dyadic`] onto a binary floating-point grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct GridRounding {
    pub value: Dyadic,
    pub inexact: bool,
    pub tiny: bool,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { mant: BigInt::zero(), exp: 0 }
    }

    pub fn from_parts(mant: BigInt, exp: i64) -> Self {
        let mut d = Dyadic { mant, exp };
        d.normalize();
        d
    }

    pub fn from_i64(v: i64) -> Self {
        Self::from_parts(BigInt::from(v), 0)
    }

    /// Exact conversion; `None` for NaN and infinities.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::zero());
        }
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if biased == 0 { (frac, -1074) } else { (frac | (1u64 << 52), biased - 1075) };
        let mant = if x < 0.0 { -BigInt::from(m) } else { BigInt::from(m) };
        Some(Self::from_parts(mant, e))
    }

    fn normalize(&mut self) {
        if self.mant.is_zero() {
            self.exp = 0;
            return;
        }
        if let Some(tz) = self.mant.trailing_zeros() {
            if tz > 0 {
                self.mant >>= tz;
                self.exp += tz as i64;
            }
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn neg(&self) -> Self {
        Dyadic { mant: -&self.mant, exp: self.exp }
    }

    pub fn abs(&self) -> Self {
        Dyadic { mant: self.mant.abs(), exp: self.exp }
    }

    /// `floor(log2 |x|)`; `None` for zero.
    pub fn log2_floor(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exp + self.mant.bits() as i64 - 1)
        }
    }

    /// Number of significant bits of the significand.
    pub fn significant_bits(&self) -> u64 {
        self.mant.bits()
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let exp = self.exp.min(other.exp);
        let a = &self.mant << (self.exp - exp) as usize;
        let b = &other.mant << (other.exp - exp) as usize;
        Self::from_parts(a + b, exp)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_parts(&self.mant * &other.mant, self.exp + other.exp)
    }

    /// Multiplies by `2^k` exactly.
    pub fn scale2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Dyadic { mant: self.mant.clone(), exp: self.exp + k }
    }

    /// Quotient truncated to a signed integer plus a sticky flag, scaled so
    /// the result carries at least `bits` significant bits.
    ///
    /// Returns `(q, e)` with `q * 2^e` equal to `self / other` rounded toward
    /// zero at the last kept bit, where the lowest bit of `q` is forced to 1
    /// when the division was inexact. Rounding that value to fewer than
    /// `bits - 1` bits gives the correctly rounded quotient.
    pub(crate) fn div_sticky(&self, other: &Self, bits: u64) -> Option<Dyadic> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let na = self.mant.bits() as i64;
        let nb = other.mant.bits() as i64;
        let shift = (bits as i64 + 2 + nb - na).max(0);
        let num = self.mant.abs() << shift as usize;
        let den = other.mant.abs();
        let (q, r) = num.div_rem(&den);
        let mut q = (q << 1usize) + if r.is_zero() { BigInt::zero() } else { BigInt::one() };
        if self.is_negative() != other.is_negative() {
            q = -q;
        }
        Some(Self::from_parts(q, self.exp - other.exp - shift - 1))
    }

    /// Integer `k = floor(self / other)`; `other` must be positive.
    pub(crate) fn div_floor(&self, other: &Self) -> BigInt {
        debug_assert!(other.mant.is_positive());
        let d = self.exp - other.exp;
        if d >= 0 {
            (&self.mant << d as usize).div_floor(&other.mant)
        } else {
            self.mant.div_floor(&(&other.mant << (-d) as usize))
        }
    }

    /// Rounds to the nearest value on the grid of a `p`-bit significand with
    /// minimum normal exponent `emin` (gradual underflow below it), ties to even.
    /// The exponent range is unbounded above; callers check overflow.
    pub(crate) fn round_to_grid(&self, p: u32, emin: Option<i64>) -> GridRounding {
        let Some(e) = self.log2_floor() else {
            return GridRounding { value: Self::zero(), inexact: false, tiny: false };
        };
        let quantum = match emin {
            Some(emin) => e.max(emin) - p as i64 + 1,
            None => e - p as i64 + 1,
        };
        let tiny_before = emin.is_some_and(|emin| e < emin);
        if self.exp >= quantum {
            return GridRounding { value: self.clone(), inexact: false, tiny: tiny_before };
        }
        let shift = (quantum - self.exp) as usize;
        let neg = self.is_negative();
        let mag = self.mant.abs();
        let mut kept = &mag >> shift;
        let rem = &mag - (&kept << shift);
        let half = BigInt::one() << (shift - 1);
        match rem.cmp(&half) {
            Ordering::Greater => kept += 1,
            Ordering::Equal if kept.is_odd() => kept += 1,
            _ => {}
        }
        let inexact = !rem.is_zero();
        let value = Self::from_parts(if neg { -kept } else { kept }, quantum);
        let tiny = inexact
            && match (emin, value.log2_floor()) {
                (Some(emin), Some(le)) => le < emin,
                (Some(_), None) => true,
                (None, _) => false,
            };
        GridRounding { value, inexact, tiny }
    }

    /// Nearest `f64` (ties to even, gradual underflow, infinities on overflow).
    pub fn to_f64(&self) -> f64 {
        let r = self.round_to_grid(53, Some(-1022)).value;
        let Some(e) = r.log2_floor() else {
            return 0.0;
        };
        if e > 1023 {
            return if r.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        // |mant| < 2^53 and the exponent is in [-1074, 1023 - bits + 1] after rounding.
        let m = r.mant.abs().to_u64().expect("rounded significand fits in 53 bits") as f64;
        let v = m * pow2(r.exp);
        if r.is_negative() {
            -v
        } else {
            v
        }
    }

    /// `floor(self * 2^bits)` as a fixed-point integer.
    pub(crate) fn to_fixed(&self, bits: u64) -> BigInt {
        let shift = self.exp + bits as i64;
        if shift >= 0 {
            &self.mant << shift as usize
        } else {
            let s = (-shift) as usize;
            // floor division by 2^s for signed values
            &self.mant >> s
        }
    }

    pub(crate) fn from_fixed(v: BigInt, bits: u64) -> Self {
        Self::from_parts(v, -(bits as i64))
    }

    /// `pi` truncated to `bits` fractional bits.
    pub fn pi(bits: u64) -> Self {
        Self::from_fixed(pi_fixed(bits), bits)
    }

    /// `sin(self)` with absolute error below `2^-(bits - 2)`.
    pub fn sin_approx(&self, bits: u64) -> Self {
        trig_fixed(self, bits).0
    }

    /// `cos(self)` with absolute error below `2^-(bits - 2)`.
    pub fn cos_approx(&self, bits: u64) -> Self {
        trig_fixed(self, bits).1
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dyadic({} * 2^{} ~ {:e})", self.mant, self.exp, self.to_f64())
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.sub(other);
        match d.mant.sign() {
            Sign::Minus => Ordering::Less,
            Sign::NoSign => Ordering::Equal,
            Sign::Plus => Ordering::Greater,
        }
    }
}

/// `2^e` as `f64` for `e` in `[-1074, 1023]`.
pub(crate) fn pow2(e: i64) -> f64 {
    debug_assert!((-1074..=1023).contains(&e));
    if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (e + 1074))
    }
}

/// Fractional bits of the cached value of pi.
const PI_CACHE_BITS: u64 = 4096;

fn pi_cache() -> &'static BigInt {
    static PI: OnceLock<BigInt> = OnceLock::new();
    PI.get_or_init(|| {
        // Machin: pi = 16 atan(1/5) - 4 atan(1/239), with 64 guard bits.
        let bits = PI_CACHE_BITS + 64;
        let pi = atan_inv_fixed(5, bits) * 16 - atan_inv_fixed(239, bits) * 4;
        pi >> 64usize
    })
}

fn atan_inv_fixed(n: u64, bits: u64) -> BigInt {
    let one = BigInt::one() << bits as usize;
    let n = BigInt::from(n);
    let n2 = &n * &n;
    let mut power = &one / &n;
    let mut sum = power.clone();
    let mut k = 1u64;
    loop {
        power = &power / &n2;
        if power.is_zero() {
            break;
        }
        let term = &power / BigInt::from(2 * k + 1);
        if k % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
        k += 1;
    }
    sum
}

pub(crate) fn pi_fixed(bits: u64) -> BigInt {
    assert!(bits <= PI_CACHE_BITS, "requested {bits} bits of pi, cache holds {PI_CACHE_BITS}");
    pi_cache() >> (PI_CACHE_BITS - bits) as usize
}

/// Fixed-point sine and cosine by quadrant reduction and Taylor series.
fn trig_fixed(x: &Dyadic, bits: u64) -> (Dyadic, Dyadic) {
    let magnitude = x.log2_floor().unwrap_or(0).max(0) as u64;
    let w = bits + 32 + magnitude;
    let xf = x.to_fixed(w);
    let half_pi = pi_fixed(w + 1) >> 2usize; // pi/2 at w bits, from one extra bit
    let (k, r) = {
        let twice = (&xf << 1usize) + &half_pi;
        let k = twice.div_floor(&(&half_pi << 1usize));
        let r = &xf - &k * &half_pi;
        (k, r)
    };
    let one = BigInt::one() << w as usize;
    let r2 = (&r * &r) >> w as usize;
    let mut s = r.clone();
    let mut term = r.clone();
    let mut i = 1u64;
    loop {
        term = -((&term * &r2) >> w as usize) / BigInt::from((2 * i) * (2 * i + 1));
        if term.is_zero() {
            break;
        }
        s += &term;
        i += 1;
    }
    let mut c = one.clone();
    let mut term = one;
    let mut i = 1u64;
    loop {
        term = -((&term * &r2) >> w as usize) / BigInt::from((2 * i - 1) * (2 * i));
        if term.is_zero() {
            break;
        }
        c += &term;
        i += 1;
    }
    let quadrant = k.mod_floor(&BigInt::from(4)).to_u8().unwrap_or(0);
    let (sv, cv) = match quadrant {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    };
    (Dyadic::from_fixed(sv, w), Dyadic::from_fixed(cv, w))
}
