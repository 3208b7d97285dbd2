use std::f64::consts::{PI, SQRT_2, TAU};

use proptest::prelude::*;
use revind::indicators::{
    global_error_translation, megno, mlce, orbit_divergence, reversibility_error, reversibility_error_final, sali,
    Checkpoints, NormSpec,
};
use revind::{MapInstance, Precision, PrecisionSpec, State};

const EXT: Precision = Precision::Rounded(PrecisionSpec::EXTENDED113);

fn st(c: &[f64]) -> State {
    State::new(c.to_vec())
}

#[test]
fn bernoulli_mlce_is_ln_q_everywhere() {
    for q in [2u32, 3, 5] {
        let map = MapInstance::bernoulli(q).unwrap();
        let s = mlce(&map, &st(&[0.123]), &[1.0], 10_000).unwrap();
        let lnq = (q as f64).ln();
        assert!(s.values.iter().all(|v| (v - lnq).abs() <= 1e-12), "q = {q}");
    }
}

#[test]
fn skew_mlce_decays_like_log_n_over_n() {
    let s = mlce(&MapInstance::skew(), &st(&[0.3, 0.4]), &[0.0, 1.0], 10_000).unwrap();
    for n in [10u64, 100, 1000, 10_000] {
        let v = s.at(n).unwrap();
        assert!(v >= 0.0 && v <= 2.0 * ((n + 1) as f64).ln() / n as f64, "n = {n}: {v}");
    }
}

#[test]
fn chaotic_mlce_near_chirikov_estimate() {
    // ln(lambda / 2) for lambda = 10; cross-checked by two-orbit separation
    let map = MapInstance::standard(10.0).unwrap();
    let x0 = st(&[3.0, 3.0]);
    let l = mlce(&map, &x0, &[1.0, 0.0], 1000).unwrap().last().unwrap();
    assert!((l - 5f64.ln()).abs() <= 0.15 * 5f64.ln(), "{l}");

    // separation of a 1e-12 neighbour, renormalized every step
    let d0 = 1e-12;
    let mut a = x0.clone();
    let mut b = st(&[3.0 + d0, 3.0]);
    let mut sum = 0.0;
    let n = 1000;
    for _ in 0..n {
        a = revind::maps::forward(&map, &a, Precision::DOUBLE).unwrap();
        b = revind::maps::forward(&map, &b, Precision::DOUBLE).unwrap();
        let dx: Vec<f64> = (0..2)
            .map(|i| {
                let d = b.0[i] - a.0[i];
                d - TAU * (d / TAU).round()
            })
            .collect();
        let d = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
        sum += (d / d0).ln();
        let mut nb: Vec<f64> = (0..2).map(|i| a.0[i] + dx[i] * d0 / d).collect();
        for v in &mut nb {
            *v = v.rem_euclid(TAU);
        }
        b = State::new(nb);
    }
    let two_orbit = sum / n as f64;
    assert!((two_orbit - l).abs() <= 0.15 * l, "{two_orbit} vs {l}");
}

#[test]
fn megno_regular_and_chaotic() {
    let regular = MapInstance::standard(1e-4).unwrap();
    let (_, ybar) = megno(&regular, &st(&[1.0, 1.0]), &[1.0, 0.0], Some(&[0.0, 1.0]), 1000, 1, -1).unwrap();
    let y = ybar.last().unwrap();
    assert!((1.5..=2.5).contains(&y), "{y}");

    let chaotic = MapInstance::standard(10.0).unwrap();
    let x0 = st(&[3.0, 3.0]);
    let n = 1000;
    let (_, ybar) = megno(&chaotic, &x0, &[1.0, 0.0], Some(&[0.0, 1.0]), n, 1, -1).unwrap();
    let l = mlce(&chaotic, &x0, &[1.0, 0.0], n).unwrap().last().unwrap();
    // mean slope l/2 between N/2 and N: Ybar(N) - Ybar(N/2) = N l / 4
    let ratio = 4.0 * (ybar.at(n).unwrap() - ybar.at(n / 2).unwrap()) / (n as f64 * l);
    assert!((ratio - 1.0).abs() <= 0.35, "{ratio}");
    let fit = revind::fit::fit_line(
        &(200..=1000).map(|k| k as f64).collect::<Vec<_>>(),
        &(200..=1000).map(|k| ybar.at(k).unwrap()).collect::<Vec<_>>(),
    )
    .unwrap();
    assert!((fit.slope - l / 2.0).abs() <= 0.2 * l / 2.0, "{} vs {}", fit.slope, l / 2.0);
}

#[test]
fn megno_vanishes_without_stretching() {
    let map = MapInstance::torus_translation(0.3).unwrap();
    let (y, ybar) = megno(&map, &st(&[0.2]), &[1.0], None, 100, 1, -1).unwrap();
    assert!(y.values.iter().chain(&ybar.values).all(|&v| v == 0.0));
}

#[test]
fn sali_collapses_for_chaos_and_decays_for_regular() {
    let chaotic = MapInstance::standard(10.0).unwrap();
    let s = sali(&chaotic, &st(&[3.0, 3.0]), &[1.0, 0.0], &[0.0, 1.0], 1000).unwrap();
    assert!(s.values.iter().any(|&v| v <= 1e-16));

    let regular = MapInstance::standard(1e-4).unwrap();
    let s = sali(&regular, &st(&[1.0, 1.0]), &[1.0, 0.0], &[0.0, 1.0], 1000).unwrap();
    let fit = revind::fit::fit_power_law(&s.iterations, &s.values, 100, 1000).unwrap();
    assert!(fit.r_squared >= 0.9 && fit.exponent < 0.0, "{fit:?}");
}

#[test]
fn rotation_keeps_orthogonal_vectors_orthogonal() {
    let map = MapInstance::circle_rotation(0.2).unwrap();
    let s = sali(&map, &MapInstance::circle_point(0.1), &[1.0, 0.0], &[0.0, 1.0], 500).unwrap();
    assert!(s.values.iter().all(|v| (v - SQRT_2).abs() < 1e-12));
}

#[test]
fn chaotic_seed_loses_reversibility_faster() {
    let map = MapInstance::standard(0.971635).unwrap();
    let classify = |x: &State| mlce(&map, x, &[1.0, 0.0], 100_000).unwrap().last().unwrap();
    let island = st(&[PI, 0.2]);
    let sea = st(&[6.0, 1.0]);
    assert!(classify(&island) < 0.005);
    assert!(classify(&sea) > 0.03);
    let r = |x: &State| reversibility_error_final(&map, x, 1000, Precision::SINGLE, NormSpec::ActionOnly).unwrap();
    let ratio = r(&sea) / r(&island);
    assert!(ratio >= 1e4, "{ratio}");
}

#[test]
fn bernoulli_divergence() {
    let div = |q: u32| {
        orbit_divergence(
            &MapInstance::bernoulli(q).unwrap(),
            &st(&[0.3]),
            40,
            Precision::SINGLE,
            Precision::DOUBLE,
            NormSpec::Full,
            &Checkpoints::All,
        )
        .unwrap()
    };
    // doubling a binary fraction is exact in both formats, so the two orbits
    // from the same rounded seed never separate (both reach 0 after 24 steps)
    assert!(div(2).values.iter().all(|&v| v == 0.0));
    // tripling rounds, and the error grows like 3^n eps
    let d = div(3);
    let first = d.iterations[d.values.iter().position(|&v| v >= 0.1).unwrap()];
    assert!(first <= 40, "{first}");
}

#[test]
fn global_error_equals_extended_divergence() {
    let omega = SQRT_2 - 1.0;
    let map = MapInstance::torus_translation(omega).unwrap();
    let x0 = st(&[0.7]);
    let ck = Checkpoints::LogSpaced { per_decade: 10 };
    let g = global_error_translation(&map, &x0, 10_000, Precision::SINGLE, &ck).unwrap();
    let d = orbit_divergence(&map, &x0, 10_000, Precision::SINGLE, EXT, NormSpec::Full, &ck).unwrap();
    assert_eq!(g.series.iterations, d.iterations);
    for (a, b) in g.series.values.iter().zip(&d.values) {
        assert!((a - b).abs() <= 2f64.powi(-50), "{a} vs {b}");
    }
    assert_eq!(g.machine_epsilon, 2f64.powi(-24));
}

#[test]
fn global_drift_converges() {
    let map = MapInstance::torus_translation(SQRT_2 - 1.0).unwrap();
    let ck = Checkpoints::Explicit(vec![10_000, 20_000, 50_000, 100_000]);
    let g = global_error_translation(&map, &st(&[0.7]), 100_000, Precision::SINGLE, &ck).unwrap();
    let rates: Vec<f64> = g.series.iterations.iter().zip(&g.series.values).map(|(&n, &v)| v / n as f64).collect();
    let last = *rates.last().unwrap();
    assert!(last > 0.0);
    for r in &rates {
        assert!((r - last).abs() <= 0.1 * last, "{rates:?}");
    }
    assert!((g.drift - last).abs() <= 1e-18);
}

#[test]
fn dyadic_translation_is_exact() {
    let map = MapInstance::torus_translation(0.25).unwrap();
    let g = global_error_translation(&map, &st(&[0.5]), 1000, Precision::SINGLE, &Checkpoints::All).unwrap();
    assert!(g.series.values.iter().all(|&v| v == 0.0));
}

#[test]
fn linear_growth_on_the_torus() {
    let map = MapInstance::torus_translation(SQRT_2 - 1.0).unwrap();
    let x0 = st(&[0.7]);
    let ck = Checkpoints::LogSpaced { per_decade: 10 };
    let r = reversibility_error(&map, &x0, 100_000, Precision::SINGLE, NormSpec::Full, &ck).unwrap();
    let fit = r.log_log_slope(100, 100_000).unwrap();
    assert!((fit.exponent - 1.0).abs() <= 0.15, "{fit:?}");
}

#[test]
fn repeated_runs_are_bit_identical() {
    let map = MapInstance::froeschle(2.0, 0.6).unwrap();
    let x0 = st(&[0.5, 0.5, 1.0, 1.5]);
    let ck = Checkpoints::LogSpaced { per_decade: 5 };
    let a = reversibility_error(&map, &x0, 300, Precision::SINGLE, NormSpec::ActionOnly, &ck).unwrap();
    let b = reversibility_error(&map, &x0, 300, Precision::SINGLE, NormSpec::ActionOnly, &ck).unwrap();
    assert_eq!(a, b);
    let v = [1.0, 0.0, 0.0, 0.0];
    assert_eq!(mlce(&map, &x0, &v, 300).unwrap(), mlce(&map, &x0, &v, 300).unwrap());
}

fn two_d_state() -> impl Strategy<Value = State> {
    (0.0..TAU, 0.0..TAU).prop_map(|(x, y)| State::new(vec![x, y]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sali_stays_in_range(s in two_d_state(), lambda in 0.0f64..12.0, a in 0.0..PI) {
        let map = MapInstance::standard(lambda).unwrap();
        let u = [a.cos(), a.sin()];
        prop_assume!(a.sin().abs() > 1e-3);
        let series = sali(&map, &s, &[1.0, 0.0], &u, 200).unwrap();
        prop_assert!(series.values.iter().all(|&v| (0.0..=SQRT_2).contains(&v)));
    }

    #[test]
    fn action_norm_never_exceeds_full(s in two_d_state(), lambda in 0.0f64..2.0) {
        let map = MapInstance::standard(lambda).unwrap();
        let ck = Checkpoints::All;
        let full = reversibility_error(&map, &s, 60, Precision::SINGLE, NormSpec::Full, &ck).unwrap();
        let act = reversibility_error(&map, &s, 60, Precision::SINGLE, NormSpec::ActionOnly, &ck).unwrap();
        for (a, f) in act.values.iter().zip(&full.values) {
            prop_assert!(a <= f);
        }
        let dfull = orbit_divergence(&map, &s, 60, Precision::SINGLE, Precision::DOUBLE, NormSpec::Full, &ck).unwrap();
        let dact = orbit_divergence(&map, &s, 60, Precision::SINGLE, Precision::DOUBLE, NormSpec::ActionOnly, &ck).unwrap();
        for (a, f) in dact.values.iter().zip(&dfull.values) {
            prop_assert!(a <= f);
        }
    }

    #[test]
    fn exactness(s in two_d_state(), lambda in 0.0f64..2.0) {
        let map = MapInstance::standard(lambda).unwrap();
        let ck = Checkpoints::Explicit(vec![1, 5, 20]);
        let r = reversibility_error(&map, &s, 20, Precision::Exact, NormSpec::Full, &ck).unwrap();
        prop_assert!(r.values.iter().all(|&v| v == 0.0));
        let d = orbit_divergence(&map, &s, 20, Precision::SINGLE, Precision::SINGLE, NormSpec::Full, &ck).unwrap();
        prop_assert!(d.values.iter().all(|&v| v == 0.0));
    }
}
