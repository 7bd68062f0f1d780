use loewner::driver::*;
use loewner::flow::{Side, StepPolicy};
use loewner::hitting::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn policy() -> StepPolicy {
    StepPolicy::default()
}

#[test]
fn zero_driver_endpoints_and_branches() {
    let d = make_constant(0.0, 1.0).unwrap();
    let p = hitting_profile(&d, 64, &policy()).unwrap();
    assert!((p.a() - 2.0).abs() < 1e-8, "a = {}", p.a());
    assert!((p.b() - 2.0).abs() < 1e-8, "b = {}", p.b());
    for side in [Side::Left, Side::Right] {
        for &(x, t) in p.branch(side) {
            assert!((t - 0.25 * x * x).abs() < 1e-12);
        }
    }
    assert_eq!(p.max_inversion, 0.0);
}

#[test]
fn tilted_slit_endpoints() {
    // Reversed √ slit with α = 1/4 welds [−√3, √(1/3)] up to scale, so a/b = 3.
    let xi = reverse(&make_sqrt_slit(0.25, 0.25).unwrap());
    let p = hitting_profile(&xi, 64, &policy()).unwrap();
    let ratio = p.a() / p.b();
    assert!((ratio - 3.0).abs() < 1e-5, "ratio {ratio}");
    assert!(p.max_inversion <= INVERSION_LIMIT);
}

#[test]
fn hitting_time_wrapper() {
    let d = make_constant(0.0, 1.0).unwrap();
    assert!((hitting_time(&d, 1.0, &policy()).unwrap().value() - 0.25).abs() < 1e-12);
    assert!(!hitting_time(&d, 3.0, &policy()).unwrap().is_finite());
    assert_eq!(HitTime::BeyondHorizon.value(), f64::INFINITY);
}

#[test]
fn inverse_round_trips_on_random_drivers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let d = random_piecewise_linear(&mut rng, 1.0, 9, 0.0, 0.6).unwrap();
        let p = hitting_profile(&d, 32, &policy()).unwrap();
        for side in [Side::Left, Side::Right] {
            for t in [0.01, 0.2, 0.5, 0.9, 1.0] {
                let x = inverse_hitting(&p, t, side).unwrap();
                let back = p.flow().hitting_time(x).unwrap().unwrap();
                assert!((back - t).abs() < 1e-8, "{side:?} t {t}: {back}");
                let y = inverse_hitting_flow(p.flow(), t, side).unwrap();
                assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
        assert!(inverse_hitting(&p, 0.0, Side::Left).is_err());
        assert!(inverse_hitting(&p, 1.5, Side::Left).is_err());
    }
}

#[test]
fn sandwich_with_identical_drivers_is_tight() {
    let d = make_piecewise_linear(&[(0.0, 0.0), (0.5, 0.3), (1.0, -0.2)]).unwrap();
    let grid: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64 + 0.05).collect();
    let r = sandwich_check(&d, &d, &grid, &policy()).unwrap();
    assert_eq!(r.delta, 0.0);
    assert_eq!(r.max_violation, 0.0);
    for pt in &r.points {
        assert_eq!(pt.lower, pt.middle);
        assert_eq!(pt.middle, pt.upper);
    }
}

#[test]
fn constant_shift_moves_inverses_by_the_shift() {
    // τ⁻¹(t) for ξ ≡ c is c ± 2√t, so the gap between c = 0 and c = ε is ε.
    let eps = 0.07;
    let a = make_constant(0.0, 1.0).unwrap();
    let b = make_constant(eps, 1.0).unwrap();
    let grid: Vec<f64> = (1..=8).map(|k| k as f64 / 8.0).collect();
    let gap = lipschitz_check(&a, &b, &grid, &policy()).unwrap();
    assert!((gap - eps).abs() < 1e-9, "gap {gap}");
}

#[test]
fn lipschitz_sweep_is_within_distance() {
    let rows = lipschitz_sweep(3, 21, 0.3, 8, &policy()).unwrap();
    for r in &rows {
        assert!(r.delta <= 0.3);
        assert!(r.value <= r.delta + 1e-8, "{r:?}");
    }
}

#[test]
fn sandwich_sweep_has_no_violations() {
    let rows = sandwich_sweep(3, 21, 0.3, 32, &policy()).unwrap();
    for r in &rows {
        assert!(r.value <= 1e-9, "{r:?}");
        assert_eq!(r.index, rows.iter().position(|q| q == r).unwrap());
    }
}

#[test]
fn mismatched_horizons_are_rejected() {
    let a = make_constant(0.0, 1.0).unwrap();
    let b = make_constant(0.0, 2.0).unwrap();
    assert!(sandwich_check(&a, &b, &[1.0], &policy()).is_err());
    assert!(lipschitz_check(&a, &b, &[0.5], &policy()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn profile_branches_are_monotone(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_piecewise_linear(&mut rng, 1.0, 7, 0.0, 0.5).unwrap();
        let p = hitting_profile(&d, 24, &policy()).unwrap();
        prop_assert!(p.a() > 0.0 && p.b() > 0.0);
        prop_assert!(p.max_inversion <= INVERSION_LIMIT);
        for side in [Side::Left, Side::Right] {
            let br = p.branch(side);
            prop_assert!((br.last().unwrap().1 - 1.0).abs() < 1e-6);
            for w in br.windows(2) {
                prop_assert!((w[1].0 - w[0].0) * side.sign() > 0.0);
            }
        }
    }
}
