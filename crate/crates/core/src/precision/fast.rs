//! Rounding of `f64` values onto narrower binary grids without allocation.

use super::dyadic::pow2;

/// Rounds `x` to a `p`-bit significand with minimum normal exponent `emin`
/// (gradual underflow below), ties to even. No overflow handling: the caller
/// compares against its own threshold. Requires `p <= 53` and
/// `emin - p + 1 >= -1074`.
#[inline]
pub(crate) fn round_f64(x: f64, p: u32, emin: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let e = if biased == 0 {
        // f64 subnormal: below any grid this function is used with
        -1023
    } else {
        biased - 1023
    };
    let quantum = e.max(emin) - p as i32 + 1;
    if quantum <= -1074 {
        return x;
    }
    // power-of-two scalings are exact here
    let scaled = mul_pow2(x, -(quantum as i64));
    let r = scaled.round_ties_even();
    mul_pow2(r, quantum as i64)
}

#[inline]
fn mul_pow2(v: f64, k: i64) -> f64 {
    if (-1022..=1023).contains(&k) {
        v * pow2(k)
    } else if k < -1022 {
        v * pow2(-1022) * pow2(k + 1022)
    } else {
        v * pow2(1023) * pow2(k - 1023)
    }
}

/// Whether the grid defined by `(p, emin, emax)` is a subset of the `f64`
/// grid with room for exact power-of-two scaling.
pub(crate) fn fits_f64_carrier(p: u32, emin: i32, emax: i32) -> bool {
    p <= 53 && emin - p as i32 + 1 >= -1074 && emax <= 1022
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_f32_conversion() {
        let samples =
            [0.1, 1.0 / 3.0, 1.0 + 2f64.powi(-25), 1.0 + 3.0 * 2f64.powi(-25), 3.0e-39, 1.0e-45, 7.0e-46, 3.4e38];
        for &x in &samples {
            assert_eq!(round_f64(x, 24, -126), x as f32 as f64, "{x:e}");
            assert_eq!(round_f64(-x, 24, -126), -x as f32 as f64, "{x:e}");
        }
    }

    #[test]
    fn carrier_bounds() {
        assert!(fits_f64_carrier(24, -126, 127));
        assert!(!fits_f64_carrier(113, -16382, 16383));
    }
}
