use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revind::indicators::{reversibility_error_final, NormSpec};
use revind::maps::{forward, forward_with_tangent, inverse, jacobian};
use revind::{MapInstance, Precision, PrecisionSpec, State};

const EXT: Precision = Precision::Rounded(PrecisionSpec::EXTENDED113);

fn random_state(map: &MapInstance, rng: &mut ChaCha8Rng) -> State {
    let coords = match map {
        MapInstance::TorusTranslation { .. } | MapInstance::Bernoulli { .. } => vec![rng.gen::<f64>()],
        MapInstance::CircleRotation { .. } => return MapInstance::circle_point(rng.gen()),
        MapInstance::StandardMap { .. } => vec![rng.gen::<f64>() * TAU, rng.gen::<f64>() * TAU],
        MapInstance::SkewMap => vec![rng.gen(), rng.gen()],
        MapInstance::Froeschle4D { .. } => {
            vec![
                rng.gen::<f64>() * TAU,
                rng.gen::<f64>() * TAU,
                rng.gen::<f64>() * 4.0 - 2.0,
                rng.gen::<f64>() * 4.0 - 2.0,
            ]
        }
    };
    State::new(coords)
}

fn symplectic_maps() -> Vec<MapInstance> {
    vec![
        MapInstance::torus_translation(2f64.sqrt() - 1.0).unwrap(),
        MapInstance::circle_rotation(0.1234).unwrap(),
        MapInstance::standard(0.971635).unwrap(),
        MapInstance::standard(10.0).unwrap(),
        MapInstance::skew(),
        MapInstance::froeschle(2.0, 0.6).unwrap(),
    ]
}

#[test]
fn unit_jacobian_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for map in symplectic_maps() {
        for _ in 0..10_000 {
            let s = random_state(&map, &mut rng);
            let det = jacobian(&map, &s).determinant();
            assert!((det - 1.0).abs() <= 1e-12, "{map:?} at {s:?}: det = {det}");
        }
    }
}

#[test]
fn froeschle_preserves_symplectic_form() {
    // J^T W J = W with W the standard form on (theta, phi; I, J)
    let map = MapInstance::froeschle(2.0, 0.6).unwrap();
    let w = |i: usize, j: usize| match (i, j) {
        (0, 2) | (1, 3) => 1.0,
        (2, 0) | (3, 1) => -1.0,
        _ => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let j = jacobian(&map, &random_state(&map, &mut rng));
        for a in 0..4 {
            for b in 0..4 {
                let v: f64 = (0..4)
                    .flat_map(|k| (0..4).map(move |l| (k, l)))
                    .map(|(k, l)| j.get(k, a) * w(k, l) * j.get(l, b))
                    .sum();
                assert!((v - w(a, b)).abs() < 1e-11, "({a},{b}): {v}");
            }
        }
    }
}

/// Largest `R_1 / (2^-113 (1 + |s|))` over `count` random states.
fn worst_round_trip(map: &MapInstance, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let s = random_state(map, &mut rng);
            let norm = s.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = reversibility_error_final(map, &s, 1, EXT, NormSpec::Full).unwrap();
            r / (2f64.powi(-113) * (1.0 + norm))
        })
        .fold(0.0, f64::max)
}

#[test]
fn extended_width_round_trip() {
    for map in symplectic_maps().into_iter().filter(|m| *m != MapInstance::standard(10.0).unwrap()) {
        let worst = worst_round_trip(&map, 1000, 13);
        assert!(worst <= 16.0, "{map:?}: {worst}");
    }
}

#[test]
fn strong_kick_amplifies_round_trip_error() {
    // the recovered angle's error is multiplied by lambda cos(x) in the
    // action, so the bound has to grow with lambda
    let map = MapInstance::standard(10.0).unwrap();
    let worst = worst_round_trip(&map, 1000, 13);
    println!("lambda = 10: worst R_1 = {worst:.2} x 2^-113 (1 + |s|)");
    assert!(worst > 16.0 && worst <= 16.0 * (1.0 + 10.0), "{worst}");
}

#[test]
fn double_round_trip_is_close() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for map in symplectic_maps() {
        for _ in 0..200 {
            let s = random_state(&map, &mut rng);
            let back = inverse(&map, &forward(&map, &s, Precision::DOUBLE).unwrap(), Precision::DOUBLE).unwrap();
            for (i, (a, b)) in back.coords().iter().zip(s.coords()).enumerate() {
                let period = map.periods()[i].map(|p| p.value());
                let mut d = (a - b).abs();
                if let Some(p) = period {
                    d = d.min(p - d);
                }
                assert!(d < 1e-13, "{map:?} coordinate {i}: {d:e}");
            }
        }
    }
}

#[test]
fn rotation_tracks_translation() {
    let omega = 2f64.sqrt() - 1.0;
    let rot = MapInstance::circle_rotation(omega).unwrap();
    let tr = MapInstance::torus_translation(omega).unwrap();
    let x0 = 0.7;
    let mut c = MapInstance::circle_point(x0);
    let mut x = State::new(vec![x0]);
    for _ in 0..1000 {
        c = forward(&rot, &c, Precision::DOUBLE).unwrap();
        x = forward(&tr, &x, Precision::DOUBLE).unwrap();
        let expect = MapInstance::circle_point(x.0[0]);
        assert!((c.0[0] - expect.0[0]).abs() < 1e-12 && (c.0[1] - expect.0[1]).abs() < 1e-12);
    }
}

#[test]
fn froeschle_jacobian_matches_finite_differences() {
    let map = MapInstance::froeschle(2.0, 0.6).unwrap();
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let periods: Vec<Option<f64>> = map.periods().iter().map(|p| p.map(|p| p.value())).collect();
    let diff = |a: f64, b: f64, p: Option<f64>| {
        let d = a - b;
        match p {
            Some(p) => d - p * (d / p).round(),
            None => d,
        }
    };
    for _ in 0..200 {
        // keep angles away from the seam so the shifted points stay in the domain
        let mut s = random_state(&map, &mut rng);
        s.0[0] = 0.1 + s.0[0] * 0.95;
        s.0[1] = 0.1 + s.0[1] * 0.95;
        let j = jacobian(&map, &s);
        for col in 0..4 {
            let (mut plus, mut minus) = (s.clone(), s.clone());
            plus.0[col] += h;
            minus.0[col] -= h;
            let fp = forward(&map, &plus, Precision::DOUBLE).unwrap();
            let fm = forward(&map, &minus, Precision::DOUBLE).unwrap();
            for row in 0..4 {
                let fd = diff(fp.0[row], fm.0[row], periods[row]) / (2.0 * h);
                let an = j.get(row, col);
                assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "J[{row}][{col}]: {an} vs {fd}");
            }
        }
    }
}

#[test]
fn standard_tangent_matches_orbit_separation() {
    let map = MapInstance::standard(0.5).unwrap();
    let h = 1e-8;
    let s0 = State::new(vec![1.0, 2.0]);
    let v0 = vec![0.6, 0.8];
    let mut s = s0.clone();
    let mut v = vec![v0.clone()];
    let mut near = State::new(vec![1.0 + h * v0[0], 2.0 + h * v0[1]]);
    for step in 1..=8 {
        let (s2, v2) = forward_with_tangent(&map, &s, &v, Precision::DOUBLE).unwrap();
        near = forward(&map, &near, Precision::DOUBLE).unwrap();
        s = s2;
        v = v2;
        for i in 0..2 {
            let mut d = near.0[i] - s.0[i];
            d -= TAU * (d / TAU).round();
            let fd = d / h;
            assert!((fd - v[0][i]).abs() <= 1e-5 * (1.0 + v[0][i].abs()), "step {step}: {fd} vs {}", v[0][i]);
        }
    }
}

#[test]
fn inverse_undoes_forward_in_every_precision() {
    let map = MapInstance::skew();
    let s = State::new(vec![0.25, 0.5]);
    for p in [Precision::SINGLE, Precision::DOUBLE, EXT, Precision::Exact] {
        let back = inverse(&map, &forward(&map, &s, p).unwrap(), p).unwrap();
        assert_eq!(back, s, "{p}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn unkicked_standard_map_is_a_twist(x in 0.0..TAU, y in 0.0..TAU) {
        let map = MapInstance::standard(0.0).unwrap();
        let s = State::new(vec![x, y]);
        let f = forward(&map, &s, Precision::DOUBLE).unwrap();
        prop_assert_eq!(f.0[1], y);
        let mut expect = x + y;
        if expect >= TAU {
            expect -= TAU;
        }
        prop_assert!((f.0[0] - expect).abs() < 1e-14 || (f.0[0] - expect).abs() > TAU - 1e-14);
    }

    #[test]
    fn exact_round_trip_without_rotation(seed in any::<u64>(), which in 0usize..5) {
        let maps = symplectic_maps();
        let map = maps.into_iter().filter(|m| !matches!(m, MapInstance::CircleRotation { .. })).nth(which).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&map, &mut rng);
        let r = reversibility_error_final(&map, &s, 3, Precision::Exact, NormSpec::Full).unwrap();
        prop_assert_eq!(r, 0.0);
    }
}
