//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p loewner --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use loewner::driver::*;
use loewner::energy::{minimize_energy, partition_refinement_experiment, MinimizationConfig};
use loewner::flow::{rk4_oracle, Flow, Side, StepPolicy};
use loewner::hitting::*;
use loewner::identities::*;
use loewner::tracer::{tilted_slit_map, trace_curve};
use loewner::welding::*;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;

fn policy() -> StepPolicy {
    StepPolicy::default()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// A driver and a pair (x, y) it welds.
type PlPair = (Driver, f64, f64);

/// 50 seeded piecewise-linear drivers on [0, 1] with the pair (−1/2, φ(−1/2)).
fn seeded_pl_pairs() -> Result<Vec<PlPair>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::with_capacity(50);
    while out.len() < 50 {
        let d = random_piecewise_linear(&mut rng, 1.0, 9, 0.0, 0.6).map_err(err)?;
        let f = Flow::new(&d, &policy()).map_err(err)?;
        let x = -0.5;
        let Some(tau) = f.hitting_time(x).map_err(err)? else { continue };
        let y = inverse_hitting_flow(&f, tau, Side::Right).map_err(err)?;
        out.push((d, x, y));
    }
    Ok(out)
}

fn c1_constant_exactness() -> Check {
    let start = Instant::now();
    let (mut worst_exact, mut worst_rk4) = (0.0_f64, 0.0_f64);
    for c in [0.0, 0.5] {
        let d = make_constant(c, 26.0).map_err(err)?;
        let flow = Flow::new(&d, &policy()).map_err(err)?;
        for k in 0..25 {
            let r = 0.1 * 100f64.powf(k as f64 / 24.0);
            for x in [c - r, c + r] {
                let want = 0.25 * r * r;
                let got = flow.hitting_time(x).map_err(err)?.ok_or("not welded")?;
                worst_exact = worst_exact.max((got - want).abs() / want);
                let oracle = rk4_oracle(&d, x, 1e-4).map_err(err)?.status.tau().ok_or("oracle: not welded")?;
                worst_rk4 = worst_rk4.max((oracle - want).abs() / want);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_exact <= 1e-9 && worst_rk4 <= 1e-6 && secs < 1.0;
    Ok((ok, format!("exact rel {worst_exact:.2e}, rk4 rel {worst_rk4:.2e}, {secs:.2}s")))
}

/// Max distance from the points to the chord between the first and last one.
fn chord_deviation(points: &[Complex64]) -> f64 {
    let (a, b) = (points[0], points[points.len() - 1]);
    let dir = (b - a) / (b - a).norm();
    points.iter().map(|&z| ((z - a) * dir.conj()).im.abs()).fold(0.0, f64::max)
}

fn c2_slit_geometry() -> Check {
    let start = Instant::now();
    let alpha = 1.0 / 3.0;
    let d = reverse(&make_sqrt_slit(alpha, 0.25).map_err(err)?);
    let curve = trace_curve(&d, 10_000).map_err(err)?;
    let dev = chord_deviation(&curve.points);
    let angle = (curve.tip() - curve.base).arg();
    let p = hitting_profile(&d, 64, &policy()).map_err(err)?;
    let b_want = (alpha / (1.0 - alpha)).sqrt();
    let (ea, eb) = ((p.a() - 1.0 / b_want).abs(), (p.b() - b_want).abs());
    let m = tilted_slit_map(alpha).map_err(err)?;
    let tip_err = (curve.tip() - curve.base - m.tip()).norm();
    let secs = start.elapsed().as_secs_f64();
    let ok = dev <= 1e-3 && (angle - PI / 3.0).abs() <= 1e-3 && ea <= 1e-4 && eb <= 1e-4 && secs < 10.0;
    Ok((
        ok,
        format!(
            "chord dev {dev:.2e}, angle err {:.2e}, a err {ea:.2e}, b err {eb:.2e}, tip err {tip_err:.2e}, {secs:.1}s",
            (angle - PI / 3.0).abs()
        ),
    ))
}

fn c3_lipschitz() -> Check {
    let start = Instant::now();
    let rows = lipschitz_sweep(200, 2024, 0.3, 64, &policy()).map_err(err)?;
    let worst = rows.iter().map(|r| r.value - r.delta).fold(f64::MIN, f64::max);
    let dmax = rows.iter().map(|r| r.delta).fold(0.0, f64::max);
    let eps = 0.05;
    let grid: Vec<f64> = (1..=64).map(|k| k as f64 / 64.0).collect();
    let gap = lipschitz_check(
        &make_constant(0.0, 1.0).map_err(err)?,
        &make_constant(eps, 1.0).map_err(err)?,
        &grid,
        &policy(),
    )
    .map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let ok = rows.len() == 200 && dmax <= 0.3 && worst <= 1e-6 && (gap - eps).abs() <= 1e-9 && secs < 60.0;
    Ok((
        ok,
        format!(
            "200 pairs, max(gap − δ) {worst:.2e}, max δ {dmax:.3}, constant gap err {:.2e}, {secs:.1}s",
            (gap - eps).abs()
        ),
    ))
}

fn c4_sandwich() -> Check {
    let rows = sandwich_sweep(200, 2024, 0.3, 64, &policy()).map_err(err)?;
    let violations = rows.iter().filter(|r| r.value > 1e-7).count();
    let worst = rows.iter().map(|r| r.value).fold(0.0, f64::max);
    let skipped: usize = rows.iter().map(|r| r.skipped).sum();
    Ok((violations == 0, format!("{violations} violating pairs, max violation {worst:.2e}, {skipped} points excluded")))
}

fn c5_zoo_monotone() -> Check {
    let (mut inv, mut trip) = (0.0_f64, 0.0_f64);
    let mut strict = true;
    let zoo = driver_zoo().map_err(err)?;
    for (name, d) in &zoo {
        let p = hitting_profile(d, 64, &policy()).map_err(|e| format!("{name}: {e}"))?;
        inv = inv.max(p.max_inversion);
        for side in [Side::Left, Side::Right] {
            strict &= p.branch(side).windows(2).all(|w| w[1].1 > w[0].1 && (w[1].0 - w[0].0) * side.sign() > 0.0);
            for k in 1..=16 {
                let t = p.horizon() * k as f64 / 16.0;
                let x = inverse_hitting(&p, t, side).map_err(|e| format!("{name}: {e}"))?;
                let back = p.flow().hitting_time(x).map_err(err)?.ok_or(format!("{name}: not welded"))?;
                trip = trip.max((back - t).abs());
            }
        }
    }
    let ok = inv <= 1e-9 && strict && trip <= 1e-7;
    Ok((ok, format!("{} drivers, max inversion {inv:.2e}, strict {strict}, round trip {trip:.2e}", zoo.len())))
}

fn c6_interval_width(pairs: &[PlPair]) -> Check {
    let zero = make_constant(0.0, 2.0).map_err(err)?;
    let mut zero_worst = 0.0_f64;
    for y0 in [1.0, 2.0] {
        zero_worst = zero_worst.max(interval_width_residual(&zero, -y0, y0, &policy()).map_err(err)?);
        // Direct comparison with I(t) = √(I₀² − 16t).
        let f = Flow::new(&zero, &policy()).map_err(err)?;
        let (a, b) = (f.evolve(-y0).map_err(err)?, f.evolve(y0).map_err(err)?);
        let n = a.samples.len().min(b.samples.len()) - 1;
        for (&(t, x), &(_, y)) in a.samples[..n].iter().zip(&b.samples[..n]) {
            let want = (4.0 * y0 * y0 - 16.0 * t).max(0.0).sqrt();
            zero_worst = zero_worst.max(((y - x) - want).abs());
        }
    }
    let mut pl_worst = 0.0_f64;
    for (d, x, y) in pairs {
        pl_worst = pl_worst.max(interval_width_residual(d, *x, *y, &policy()).map_err(err)?);
    }
    let ok = zero_worst <= 1e-6 && pl_worst <= 1e-5;
    Ok((ok, format!("zero {zero_worst:.2e}, 50 PL drivers {pl_worst:.2e}")))
}

fn c7_max_time(pairs: &[PlPair], faster: &[FasterTimesRow]) -> Check {
    let mut worst = f64::MIN;
    let mut count = 0;
    for (d, x, y) in pairs {
        for v in max_time_check(d, &[(*x, *y)], &policy()).map_err(err)? {
            worst = worst.max(v.tau - v.bound);
            count += 1;
        }
    }
    for (name, d) in driver_zoo().map_err(err)? {
        let f = Flow::new(&d, &policy()).map_err(err)?;
        let mut zp = Vec::new();
        for k in 1..=4 {
            let t = d.horizon() * k as f64 / 4.0;
            let x = inverse_hitting_flow(&f, t, Side::Left).map_err(|e| format!("{name}: {e}"))?;
            let y = inverse_hitting_flow(&f, t, Side::Right).map_err(|e| format!("{name}: {e}"))?;
            zp.push((x, y));
        }
        for v in max_time_check(&d, &zp, &policy()).map_err(|e| format!("{name}: {e}"))? {
            worst = worst.max(v.tau - v.bound);
            count += 1;
        }
    }
    for r in faster {
        worst = worst.max(r.tau - 0.25);
        count += 1;
    }
    let mut sharp = 0.0_f64;
    for (x0, y0) in [(-1.0, 1.0), (-3.0, 1.0), (0.5, 2.5), (-0.2, 0.1)] {
        sharp = sharp.max(max_time_sharpness(x0, y0, &policy()).map_err(err)?);
    }
    let ok = worst <= 1e-9 && sharp <= 1e-9;
    Ok((ok, format!("{count} welded pairs, max(τ − bound) {worst:.2e}, equality err {sharp:.2e}")))
}

fn c8_non_uniformity() -> Check {
    let delta = 0.05;
    let (xi, xt, y0) = make_lemma36_pair(delta, false).map_err(err)?;
    let t1 = Flow::new(&xi, &policy()).map_err(err)?.hitting_time(y0).map_err(err)?.ok_or("ξ: not welded")?;
    let t2 = Flow::new(&xt, &policy()).map_err(err)?.hitting_time(y0).map_err(err)?.ok_or("ξ̃: not welded")?;
    let dist = sup_distance(&xi, &xt, 8192);
    let e1 = (t1 - (delta + delta * delta)).abs();
    let ok = e1 <= 1e-5 && t2 >= 1.0 / 36.0 - 1e-4 && (dist - delta).abs() <= 1e-12;
    Ok((ok, format!("τ(y₀; ξ) = {t1:.8} (err {e1:.1e}), τ(y₀; ξ̃) = {t2:.6} vs 1/36, ‖ξ − ξ̃‖ = {dist}")))
}

fn c9_appendix(pairs: &[PlPair]) -> Check {
    let fine = policy().with_base_step(0.5 * policy().base_step);
    let (mut c_coarse, mut c_fine) = ([0.0_f64; 2], [0.0_f64; 2]);
    for c in [0.3, -0.7] {
        let d = make_constant(c, 2.0).map_err(err)?;
        for x in [c - 0.8, c + 1.1] {
            c_coarse[0] = c_coarse[0].max(appendix_identity_1(&d, x, &policy()).map_err(err)?);
            c_coarse[1] = c_coarse[1].max(appendix_identity_2(&d, x, &policy()).map_err(err)?);
            c_fine[0] = c_fine[0].max(appendix_identity_1(&d, x, &fine).map_err(err)?);
            c_fine[1] = c_fine[1].max(appendix_identity_2(&d, x, &fine).map_err(err)?);
        }
    }
    let (mut p_coarse, mut p_fine) = ([0.0_f64; 2], [0.0_f64; 2]);
    for (d, x, _) in pairs {
        p_coarse[0] = p_coarse[0].max(appendix_identity_1(d, *x, &policy()).map_err(err)?);
        p_coarse[1] = p_coarse[1].max(appendix_identity_2(d, *x, &policy()).map_err(err)?);
        p_fine[0] = p_fine[0].max(appendix_identity_1(d, *x, &fine).map_err(err)?);
        p_fine[1] = p_fine[1].max(appendix_identity_2(d, *x, &fine).map_err(err)?);
    }
    let shrinks = (0..2).all(|i| c_fine[i] < c_coarse[i] && p_fine[i] < p_coarse[i]);
    let ok = c_coarse.iter().all(|&r| r <= 1e-4) && p_coarse.iter().all(|&r| r <= 1e-3) && shrinks;
    Ok((
        ok,
        format!(
            "constants {:.2e}/{:.2e} → {:.2e}/{:.2e}, 50 PL {:.2e}/{:.2e} → {:.2e}/{:.2e}",
            c_coarse[0], c_coarse[1], c_fine[0], c_fine[1], p_coarse[0], p_coarse[1], p_fine[0], p_fine[1]
        ),
    ))
}

fn c10_counterexample() -> Check {
    let start = Instant::now();
    let n = 20;
    let out = make_counterexample_welder(n, 0.5 / 8000.0, &policy()).map_err(err)?;
    // The outermost pair welds at the very end; hold the driver up to 2/n².
    let driver = out.driver.extended_to(2.0 / (n * n) as f64).map_err(err)?;
    let problem = PartitionWeldingProblem::new(out.pairs.clone()).map_err(err)?;
    let residual = loewner::energy::welding_residuals(&driver, &problem, &policy())
        .map_err(err)?
        .into_iter()
        .fold(0.0, f64::max);
    let total = out.weld_times.last().copied().unwrap_or(f64::INFINITY);
    let sup = out.driver.sup_norm();
    let w = compute_welding(&driver, 64, &policy()).map_err(err)?;
    let dist = sup_distance_to(&w, |x| -x, -1.0, 0.0);
    let secs = start.elapsed().as_secs_f64();
    let ok = residual <= 1e-3 && total <= 0.005 && sup >= 0.85 && dist <= 0.05 && secs < 60.0;
    Ok((
        ok,
        format!("residual {residual:.2e}, total time {total:.5}, sup|ξ| {sup:.4}, welding dist to −x {dist:.4}, {secs:.1}s"),
    ))
}

fn c11_oscillating() -> Check {
    let source = reverse(&make_sqrt_slit(1.0 / 3.0, 2.0).map_err(err)?).extended_to(3.0).map_err(err)?;
    let profile = hitting_profile(&source, 64, &policy()).map_err(err)?;
    let mut dists = Vec::new();
    for n in [4, 16, 64] {
        let out = make_oscillating_welder(&profile, n, 3.0 / (8.0 * n as f64)).map_err(|e| format!("n = {n}: {e}"))?;
        dists.push(sup_distance(&out.driver, &source, 8192));
    }
    let ok = dists.windows(2).all(|w| w[1] < w[0]);
    Ok((ok, format!("sup distance {:.4} → {:.4} → {:.4}", dists[0], dists[1], dists[2])))
}

fn c12_perturbation() -> Check {
    let zero = make_constant(0.0, 1.0).map_err(err)?;
    let deltas = [0.2, 0.1, 0.05, 0.025];
    let rows = driver_perturbation_experiment(
        &zero,
        &deltas,
        PerturbationMode::Sinusoid,
        &PerturbationConfig::default(),
        &policy(),
    )
    .map_err(err)?;
    let dists: Vec<f64> = rows.iter().map(|r| r.welding_distance).collect();
    let decreasing = dists.windows(2).all(|w| w[1] < w[0]);
    let gaps = rows.iter().all(|r| r.left_gap <= r.delta + 1e-6 && r.right_gap <= r.delta + 1e-6);
    let worst_gap = rows.iter().map(|r| r.left_gap.max(r.right_gap) / r.delta).fold(0.0, f64::max);
    let ok = decreasing && dists[3] <= 0.05 && gaps;
    Ok((
        ok,
        format!(
            "welding dist {:.4} {:.4} {:.4} {:.4}, max gap/δ {worst_gap:.3}",
            dists[0], dists[1], dists[2], dists[3]
        ),
    ))
}

fn c13_energy() -> Check {
    let start = Instant::now();
    let cfg = MinimizationConfig::default();
    let single = PartitionWeldingProblem::new(vec![(-1.0, 1.0)]).map_err(err)?;
    let r = minimize_energy(&single, &cfg).map_err(err)?;
    let sup = r.driver.sup_norm();
    let source = make_piecewise_linear(&[(0.0, 0.0), (0.1, 0.3), (0.2, 0.1), (0.3, 0.4)]).map_err(err)?;
    let rows = partition_refinement_experiment(&source, &[2, 4, 8], &cfg, 2000).map_err(err)?;
    let es: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    let src = rows[0].source_energy;
    let nested = es.windows(2).all(|w| w[1] >= w[0] - 1e-3);
    let below = es.iter().all(|&e| e <= src + 1e-3);
    let secs = start.elapsed().as_secs_f64();
    let ok = r.energy <= 1e-3 && sup <= 1e-2 && nested && below && secs < 300.0;
    let conv: Vec<bool> = rows.iter().map(|r| r.converged).collect();
    Ok((
        ok,
        format!(
            "single pair energy {:.2e} sup {sup:.2e}; N = 2,4,8 energies {:.4} {:.4} {:.4} (source {src:.4}, converged {conv:?}), {secs:.1}s",
            r.energy, es[0], es[1], es[2]
        ),
    ))
}

fn c14_faster_times(rows: &[FasterTimesRow]) -> Check {
    let violations = rows.iter().filter(|r| r.tau > r.bound + 1e-6).count();
    let margin = rows.iter().map(|r| r.tau - r.bound).fold(f64::MIN, f64::max);
    let f0 = faster_times_bound(1.0, 0.0).map_err(err)?.f;
    let dmax = rows.iter().map(|r| r.delta).fold(0.0, f64::max);
    let ok = rows.len() == 100 && violations == 0 && f0 == 0.25;
    Ok((ok, format!("100 drivers, {violations} violations, max(τ − f(δ)) {margin:.2e}, max δ {dmax:.3}, f(0) = {f0}")))
}

fn report(id: usize, name: &str, elapsed: Duration, check: Check) -> bool {
    let (ok, detail) = match check {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} [{id:>2}] {name}: {detail} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn main() -> ExitCode {
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut results = Vec::new();
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        if only.is_some_and(|k| k != id) {
            return;
        }
        let start = Instant::now();
        let check = f();
        results.push(report(id, name, start.elapsed(), check));
    };
    let pairs = seeded_pl_pairs();
    let faster = faster_times_sweep(100, 5, &policy()).map_err(err);
    let with_pairs = |f: &dyn Fn(&[PlPair]) -> Check| match &pairs {
        Ok(p) => f(p),
        Err(e) => Err(e.clone()),
    };

    run(1, "constant-driver exactness", &mut c1_constant_exactness);
    run(2, "slit geometry", &mut c2_slit_geometry);
    run(3, "Lipschitz-1 inverse hitting times", &mut c3_lipschitz);
    run(4, "hitting-time sandwich", &mut c4_sandwich);
    run(5, "monotone branches and round trips", &mut c5_zoo_monotone);
    run(6, "interval-width identity", &mut || with_pairs(&c6_interval_width));
    run(7, "maximal welding time", &mut || {
        let f = faster.as_ref().map_err(Clone::clone)?;
        with_pairs(&|p| c7_max_time(p, f))
    });
    run(8, "non-uniform hitting times", &mut c8_non_uniformity);
    run(9, "integral identities", &mut || with_pairs(&c9_appendix));
    run(10, "welding-to-driver discontinuity", &mut c10_counterexample);
    run(11, "oscillating welder convergence", &mut c11_oscillating);
    run(12, "driver-to-welding convergence", &mut c12_perturbation);
    run(13, "energy minimizer", &mut c13_energy);
    run(14, "faster-times bound", &mut || c14_faster_times(faster.as_ref().map_err(Clone::clone)?));

    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
