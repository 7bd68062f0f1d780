use loewner::driver::*;
use loewner::flow::{Flow, StepPolicy};
use loewner::hitting::hitting_profile;

#[test]
fn oscillating_welder_matches_zero_target() {
    let zero = make_constant(0.0, 1.0).unwrap();
    let profile = hitting_profile(&zero, 32, &StepPolicy::default()).unwrap();
    let n = 4;
    let out = make_oscillating_welder(&profile, n, 0.03).unwrap();
    let flow = Flow::new(&out.driver, &StepPolicy::default()).unwrap();
    assert!((out.driver.horizon() - 1.0).abs() < 1e-5);
    for (j, (&(x, y), &t)) in out.pairs.iter().zip(&out.weld_times).enumerate() {
        let want = 2.0 * ((j + 1) as f64 / n as f64).sqrt();
        assert!((x + want).abs() < 1e-8 && (y - want).abs() < 1e-8, "pair {j}: ({x}, {y})");
        let tx = flow.hitting_time(x).unwrap().unwrap();
        let ty = flow.hitting_time(y).unwrap().unwrap();
        assert!((tx - t).abs() < 1e-5 && (ty - t).abs() < 1e-5, "pair {j}: {tx} {ty} vs {t}");
    }
    assert!(make_oscillating_welder(&profile, n, 0.3).is_err());
    assert!(make_oscillating_welder(&profile, 0, 0.01).is_err());
}

#[test]
fn counterexample_welds_within_budget() {
    let n = 3;
    let policy = StepPolicy::default();
    let out = make_counterexample_welder(n, 0.01, &policy).unwrap();
    let budget = 2.0 / (n * n) as f64;
    assert!(out.driver.horizon() <= budget);
    assert!(out.weld_times.windows(2).all(|w| w[1] > w[0]));
    let flow = Flow::new(&out.driver, &policy).unwrap();
    for (k, &(x, y)) in out.pairs.iter().enumerate() {
        let want = (k + 1) as f64 / n as f64;
        assert_eq!((x, y), (-want, want));
        let tx = flow.hitting_time(x).unwrap().unwrap();
        let ty = flow.hitting_time(y).unwrap().unwrap();
        assert!((tx - ty).abs() < 1e-4 * budget, "pair {k}: {tx} vs {ty}");
    }
    // Its welding stays close to the zero driver's, the driver does not.
    assert!(out.driver.sup_norm() > 0.5);
    assert!(make_counterexample_welder(1, 0.01, &policy).is_err());
}
