//! Double-double sine and cosine used as the reference evaluation for the
//! native binary64 backend (about 106 significant bits before the final
//! rounding to `f64`).

use std::sync::OnceLock;

use super::dyadic::Dyadic;

#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: e }
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

#[inline]
fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd { hi: p, lo: a.mul_add(b, -p) }
}

impl Dd {
    fn from_dyadic(d: &Dyadic) -> Dd {
        let hi = d.to_f64();
        let lo = d.sub(&Dyadic::from_f64(hi).expect("finite")).to_f64();
        Dd { hi, lo }
    }

    #[inline]
    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(r.hi, r.lo + t.lo)
    }

    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    fn mul(self, o: Dd) -> Dd {
        let p = two_prod(self.hi, o.hi);
        let lo = p.lo + (self.hi * o.lo + self.lo * o.hi);
        quick_two_sum(p.hi, lo)
    }
}

const TERMS: usize = 16;

struct Tables {
    /// pi/2 split into three doubles, hi first
    half_pi: [f64; 3],
    /// (-1)^i / (2i+1)!
    sin_coef: [Dd; TERMS],
    /// (-1)^i / (2i)!
    cos_coef: [Dd; TERMS],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let bits = 300;
        let hp = Dyadic::pi(bits).scale2(-1);
        let p1 = hp.to_f64();
        let r1 = hp.sub(&Dyadic::from_f64(p1).unwrap());
        let p2 = r1.to_f64();
        let p3 = r1.sub(&Dyadic::from_f64(p2).unwrap()).to_f64();
        let mut fact = num_bigint::BigInt::from(1);
        let mut inv = Vec::with_capacity(2 * TERMS);
        for n in 0..(2 * TERMS) as u64 {
            if n > 0 {
                fact *= n;
            }
            let one = Dyadic::from_i64(1);
            let q = one.div_sticky(&Dyadic::from_parts(fact.clone(), 0), 220).expect("nonzero factorial");
            inv.push(Dd::from_dyadic(&q));
        }
        let sign = |i: usize, d: Dd| if i.is_multiple_of(2) { d } else { d.neg() };
        let sin_coef = std::array::from_fn(|i| sign(i, inv[2 * i + 1]));
        let cos_coef = std::array::from_fn(|i| sign(i, inv[2 * i]));
        Tables { half_pi: [p1, p2, p3], sin_coef, cos_coef }
    })
}

/// Largest argument handled by the Cody-Waite reduction below.
pub(crate) const MAX_REDUCED_ARG: f64 = 1.0e6;

fn horner(coef: &[Dd; TERMS], r2: Dd) -> Dd {
    let mut acc = coef[TERMS - 1];
    for c in coef[..TERMS - 1].iter().rev() {
        acc = acc.mul(r2).add(*c);
    }
    acc
}

/// Returns `(sin x, cos x)` rounded once from double-double values.
/// `|x|` must not exceed [`MAX_REDUCED_ARG`].
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    debug_assert!(x.abs() <= MAX_REDUCED_ARG);
    if x.abs() < 2f64.powi(-27) {
        return (x, 1.0);
    }
    let t = tables();
    let k = (x * std::f64::consts::FRAC_2_PI).round_ties_even();
    let mut r = Dd { hi: x, lo: 0.0 };
    for &p in &t.half_pi {
        r = r.add(two_prod(k, p).neg());
    }
    let r2 = r.mul(r);
    let s = horner(&t.sin_coef, r2).mul(r);
    let c = horner(&t.cos_coef, r2);
    let (s, c) = (s.hi + s.lo, c.hi + c.lo);
    match (k as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}
