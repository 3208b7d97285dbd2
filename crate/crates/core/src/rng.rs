//! Counter-based random draws.
//!
//! Every draw is addressed by `(seed, member, leg, step, coordinate)` on a
//! ChaCha8 keystream: the seed is the key, the member selects the stream and
//! the remaining fields select the word position. Results therefore do not
//! depend on evaluation order or on how members are scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest step index addressable inside one leg.
pub const MAX_STEP: u64 = (1 << 32) - 1;
/// Draws reserved per step; states have at most four coordinates.
pub const COORD_SLOTS: usize = 4;

/// Which part of a computation a draw belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leg {
    /// Sampling of initial conditions.
    Initial,
    /// The forward orbit.
    Forward,
    /// The backward pass started from forward iterate `n`.
    Backward(u64),
}

impl Leg {
    fn id(self) -> u128 {
        match self {
            Leg::Initial => 0,
            Leg::Forward => 1,
            Leg::Backward(n) => 2 + n as u128,
        }
    }
}

/// Keyed generator for one ensemble member.
#[derive(Clone, Debug)]
pub struct MemberRng {
    rng: ChaCha8Rng,
}

impl MemberRng {
    pub fn new(seed: u64, member: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(member);
        MemberRng { rng }
    }

    /// Positions the generator at the first coordinate of `(leg, step)`.
    pub fn seek(&mut self, leg: Leg, step: u64) {
        debug_assert!(step <= MAX_STEP);
        let slot = (leg.id() << 32 | step as u128) * COORD_SLOTS as u128;
        // each f64 draw consumes two 32-bit words
        self.rng.set_word_pos(slot * 2);
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform on `[-a, a)`.
    pub fn symmetric(&mut self, amplitude: f64) -> f64 {
        amplitude * (2.0 * self.unit() - 1.0)
    }

    /// Fills `out` (at most [`COORD_SLOTS`] entries) with symmetric draws for
    /// the current step and moves to the next step of the same leg.
    pub fn draw_step(&mut self, amplitude: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= COORD_SLOTS);
        for i in 0..COORD_SLOTS {
            let x = self.symmetric(amplitude);
            if let Some(o) = out.get_mut(i) {
                *o = x;
            }
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Seeded random orthonormal pair in `dim >= 2` dimensions.
pub fn orthonormal_pair(dim: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    assert!((2..=COORD_SLOTS).contains(&dim), "orthonormal pairs are drawn in 2 to 4 dimensions");
    let mut rng = MemberRng::new(seed, u64::MAX);
    let mut attempt = 0;
    loop {
        let mut v = vec![0.0; dim];
        let mut u = vec![0.0; dim];
        rng.seek(Leg::Initial, 2 * attempt);
        rng.draw_step(1.0, &mut v);
        rng.draw_step(1.0, &mut u);
        attempt += 1;
        let nv = norm(&v);
        if nv < 1e-3 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let proj: f64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
        u.iter_mut().zip(&v).for_each(|(b, a)| *b -= proj * a);
        let nu = norm(&u);
        if nu < 1e-3 {
            continue;
        }
        u.iter_mut().for_each(|x| *x /= nu);
        return (v, u);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
