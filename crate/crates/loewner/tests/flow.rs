use loewner::driver::*;
use loewner::flow::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn policy() -> StepPolicy {
    StepPolicy::default()
}

#[test]
fn exact_step_hits_and_moves() {
    assert!(matches!(step_constant(1.0, 0.0, 0.25).unwrap(), Step::Hit(t) if (t - 0.25).abs() < 1e-15));
    match step_constant(-2.0, 1.0, 0.5).unwrap() {
        Step::Moved(w) => assert!((w - (1.0 - 7f64.sqrt())).abs() < 1e-14),
        Step::Hit(_) => panic!("should move"),
    }
    assert!(step_constant(1.0, 1.0, 0.1).is_err());
    assert!(step_constant(2.0, 0.0, 0.0).is_err());
}

#[test]
fn constant_driver_hitting_times() {
    for c in [0.0, 0.5, -1.3] {
        let d = make_constant(c, 2.0).unwrap();
        let f = Flow::new(&d, &policy()).unwrap();
        for x in [-2.5, -1.0, -0.2, 0.3, 1.1, 2.7] {
            let g: f64 = x - c;
            let want = 0.25 * g * g;
            match f.hitting_time(x).unwrap() {
                Some(t) => assert!((t - want).abs() < 1e-12, "c {c} x {x}: {t} vs {want}"),
                None => assert!(want > 2.0, "c {c} x {x} should weld"),
            }
        }
    }
}

#[test]
fn zero_driver_trajectory_is_closed_form() {
    let d = make_constant(0.0, 1.0).unwrap();
    let tr = evolve_point(&d, 1.5, &policy()).unwrap();
    assert!(matches!(tr.status, Status::Welded(t) if (t - 0.5625).abs() < 1e-12));
    for &(t, x) in &tr.samples {
        let want = (2.25 - 4.0 * t).max(0.0).sqrt();
        assert!((x - want).abs() < 1e-6, "t {t}: {x} vs {want}");
    }
    let alive = evolve_point(&d, 2.5, &policy()).unwrap();
    assert_eq!(alive.status, Status::AliveAtHorizon);
    let (_, xe) = *alive.samples.last().unwrap();
    assert!((xe - 2.25f64.sqrt()).abs() < 1e-12);
}

#[test]
fn interior_point_under_zero_driver() {
    let d = make_constant(0.0, 1.0).unwrap();
    let z0 = Complex64::new(0.4, 1.2);
    let path = evolve_interior(&d, z0, &policy()).unwrap();
    let (t, z) = *path.last().unwrap();
    let want = (z0 * z0 - 4.0 * t).sqrt();
    let want = if want.im < 0.0 { -want } else { want };
    assert!((z - want).norm() < 1e-10);
    assert!(path.iter().all(|(_, z)| z.im > 0.0));
    assert!(evolve_interior(&d, Complex64::new(0.0, -1.0), &policy()).is_err());
}

#[test]
fn downward_driver_is_rejected() {
    let d = make_sqrt_slit(0.25, 0.25).unwrap();
    assert!(Flow::new(&d, &policy()).is_err());
    assert!(rk4_oracle(&d, 1.0, 1e-4).is_err());
}

#[test]
fn agrees_with_rk4_on_piecewise_linear() {
    let d = make_piecewise_linear(&[(0.0, 0.0), (0.3, 0.4), (0.6, -0.2), (1.0, 0.1)]).unwrap();
    let f = Flow::new(&d, &policy()).unwrap();
    for x in [-1.5, -0.8, -0.3, 0.2, 0.7, 1.6] {
        let ours = f.hitting_time(x).unwrap();
        let oracle = rk4_oracle(&d, x, 1e-5).unwrap().status.tau();
        match (ours, oracle) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-4, "x {x}: {a} vs {b}"),
            (None, None) => {}
            other => panic!("x {x}: status mismatch {other:?}"),
        }
    }
}

#[test]
fn ramp_hitting_time_converges() {
    // ξ(t) = t: the exact hitting time of x < 0 solves ẏ = −2/y − 1 with y = x − t.
    let d = make_piecewise_linear(&[(0.0, 0.0), (2.0, 2.0)]).unwrap();
    let x0: f64 = -0.9;
    let fine = rk4_oracle(&d, x0, 1e-6).unwrap().status.tau().unwrap();
    let mut errs = Vec::new();
    for h in [4e-3, 1e-3, 2.5e-4] {
        let p = StepPolicy { adapt_ratio: 1e3, min_segment_steps: 1, ..policy().with_base_step(h) };
        let f = Flow::new(&d, &p).unwrap();
        errs.push((f.hitting_time(x0).unwrap().unwrap() - fine).abs());
    }
    assert!(errs[2] < errs[0], "{errs:?}");
    assert!(errs[2] < 1e-5, "{errs:?}");
}

#[test]
fn welded_by_matches_hitting_time() {
    let d = make_piecewise_linear(&[(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)]).unwrap();
    let f = Flow::new(&d, &policy()).unwrap();
    let tau = f.hitting_time(-0.6).unwrap().unwrap();
    assert!(f.welded_by(-0.6, tau + 1e-6));
    assert!(!f.welded_by(-0.6, tau - 1e-6));
}

#[test]
fn plan_covers_horizon() {
    let d = make_piecewise_linear(&[(0.0, 0.0), (0.25, 1.0), (1.0, 0.0)]).unwrap();
    let plan = StepPlan::with_total(&d, 100);
    let total: f64 = plan.steps().iter().map(|s| s.dt).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(plan.steps().iter().any(|s| s.t0 == 0.25));
    assert_eq!(plan.locate(0.3), plan.steps().iter().position(|s| s.t0 > 0.3).unwrap() - 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hitting_time_is_monotone_in_distance(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_piecewise_linear(&mut rng, 1.0, 6, 0.0, 0.5).unwrap();
        let f = Flow::new(&d, &policy()).unwrap();
        let mut last = 0.0;
        for k in 1..=12 {
            let x = -0.15 * k as f64;
            match f.hitting_time(x).unwrap() {
                Some(t) => { prop_assert!(t >= last); last = t; }
                None => last = f64::INFINITY,
            }
        }
        let mut last = 0.0;
        for k in 1..=12 {
            let x = 0.15 * k as f64;
            match f.hitting_time(x).unwrap() {
                Some(t) => { prop_assert!(t >= last); last = t; }
                None => last = f64::INFINITY,
            }
        }
    }

    #[test]
    fn hit_time_bounds_by_driver_range(seed in 0u64..1000, x in 0.05f64..1.5) {
        // Comparing with constant drivers at the extremes of ξ brackets τ(x).
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_piecewise_linear(&mut rng, 1.0, 6, 0.0, 0.4).unwrap();
        let f = Flow::new(&d, &policy()).unwrap();
        let hi = (0..=1000).map(|i| d.eval(i as f64 / 1000.0)).fold(f64::MIN, f64::max);
        let x0 = hi + x;
        let lo = (0..=1000).map(|i| d.eval(i as f64 / 1000.0)).fold(f64::MAX, f64::min);
        if let Some(t) = f.hitting_time(x0).unwrap() {
            prop_assert!(t >= 0.25 * x * x - 1e-9);
            prop_assert!(t <= 0.25 * (x0 - lo) * (x0 - lo) + 1e-9);
        }
    }
}
