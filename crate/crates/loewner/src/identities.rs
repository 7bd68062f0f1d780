//! Numerical checks of closed-form identities and bounds for welded pairs:
//! the interval-width formula, the maximal welding time, the faster-times
//! bound and two integral identities for hitting times.
//!
//! Integrands that blow up like (τ − t)^{-1/2} at the welding time are
//! integrated with trapezoids in t up to τ/2 and in u = √(τ − t) after.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{random_piecewise_linear, Driver};
use crate::error::{invalid, Error, Result};
use crate::flow::{BoundaryTrajectory, Flow, Side, Status, StepPolicy};
use crate::hitting::inverse_hitting_flow;
use crate::par;

/// Fraction of [0, τ] integrated in t before switching to u = √(τ − t).
const TAIL_START: f64 = 0.5;

/// Trajectories of x0 < ξ(0) < y0 welded together at `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTrajectory {
    pub x: BoundaryTrajectory,
    pub y: BoundaryTrajectory,
    pub tau: f64,
    /// (t, α) with ξ = (1 − α)x + αy, for the sample times before τ.
    pub alpha_samples: Vec<(f64, f64)>,
}

impl PairTrajectory {
    /// (t, x, y, ξ) at the common sample times before τ.
    fn states<'a>(&'a self, d: &'a Driver) -> impl Iterator<Item = (f64, f64, f64, f64)> + 'a {
        let n = self.alpha_samples.len();
        self.x.samples[..n].iter().zip(&self.y.samples[..n]).map(|(&(t, x), &(_, y))| (t, x, y, d.eval(t)))
    }
}

fn welded(tr: &BoundaryTrajectory) -> Result<f64> {
    match tr.status {
        Status::Welded(t) => Ok(t),
        Status::AliveAtHorizon => Err(Error::BeyondHorizon(tr.x0)),
    }
}

pub fn pair_trajectory(d: &Driver, x0: f64, y0: f64, policy: &StepPolicy) -> Result<PairTrajectory> {
    let flow = Flow::new(d, policy)?;
    let o = flow.origin();
    if !(x0 < o && o < y0) {
        return invalid(format!("need x0 < ξ(0) < y0, got {x0}, {o}, {y0}"));
    }
    let x = flow.evolve(x0)?;
    let y = flow.evolve(y0)?;
    let (tx, ty) = (welded(&x)?, welded(&y)?);
    if (tx - ty).abs() > 1e-7 * (1.0 + d.horizon()) {
        return invalid(format!("pair is not welded together: τ(x0) = {tx}, τ(y0) = {ty}"));
    }
    // Both lists end with the hit; the points before it share the plan times.
    let n = (x.samples.len() - 1).min(y.samples.len() - 1);
    let mut alpha_samples = Vec::with_capacity(n);
    for (&(t, xv), &(ty_, yv)) in x.samples[..n].iter().zip(&y.samples[..n]) {
        if t != ty_ {
            return Err(Error::Construction("trajectories are sampled at different times".into()));
        }
        alpha_samples.push((t, (d.eval(t) - xv) / (yv - xv)));
    }
    Ok(PairTrajectory { x, y, tau: tx.min(ty), alpha_samples })
}

/// ∫₀^{t_k} g for the usable nodes and ∫₀^τ g, for g sampled at increasing
/// times t_0 = 0 < … < t_n < τ and singular like (τ − t)^{-1/2} at τ.
///
/// Trailing nodes much closer to τ than to their predecessor are dropped: at
/// those the sampled g is mostly cancellation error.
fn singular_cumulative(nodes: &[(f64, f64)], tau: f64) -> (Vec<f64>, f64) {
    let mut n = nodes.len();
    while n >= 2 && tau - nodes[n - 1].0 < 1e-3 * (nodes[n - 1].0 - nodes[n - 2].0) {
        n -= 1;
    }
    let nodes = &nodes[..n];
    let mut cum = vec![0.0; n];
    if n == 0 {
        return (cum, 0.0);
    }
    let split = TAIL_START * tau;
    let mut k = 1;
    while k < n && nodes[k].0 <= split {
        cum[k] = cum[k - 1] + 0.5 * (nodes[k].0 - nodes[k - 1].0) * (nodes[k].1 + nodes[k - 1].1);
        k += 1;
    }
    // Tail start: the split point, or the last node if none lies beyond it.
    let (ts, gs, js) = if k < n {
        let (t0, g0) = nodes[k - 1];
        let (t1, g1) = nodes[k];
        let gs = g0 + (g1 - g0) * (split - t0) / (t1 - t0);
        (split, gs, cum[k - 1] + 0.5 * (split - t0) * (g0 + gs))
    } else {
        let (t, g) = nodes[n - 1];
        (t, g, cum[n - 1])
    };
    // In u = √(τ − t), dt = −2u du and G = 2u g stays bounded.
    let mut u_prev = (tau - ts).max(0.0).sqrt();
    let mut g_prev = 2.0 * u_prev * gs;
    let mut acc = js;
    let mut last = [(u_prev, g_prev), (u_prev, g_prev)];
    for i in k..n {
        let (t, g) = nodes[i];
        let u = (tau - t).max(0.0).sqrt();
        let gu = 2.0 * u * g;
        acc += 0.5 * (u_prev - u) * (g_prev + gu);
        cum[i] = acc;
        last = [last[1], (u, gu)];
        u_prev = u;
        g_prev = gu;
    }
    let [(u1, g1), (u2, g2)] = last;
    let g_end = if u1 > u2 { g2 - u2 * (g1 - g2) / (u1 - u2) } else { g2 };
    (cum, acc + 0.5 * u_prev * (g_prev + g_end))
}

/// max over the α sample times of |I(t) − √(I(0)² − 4∫₀ᵗ ds/(α(1−α)))|.
pub fn interval_width_residual(d: &Driver, x0: f64, y0: f64, policy: &StepPolicy) -> Result<f64> {
    let p = pair_trajectory(d, x0, y0, policy)?;
    let nodes: Vec<(f64, f64)> = p.alpha_samples.iter().map(|&(t, a)| (t, 1.0 / (a * (1.0 - a)))).collect();
    let (cum, _) = singular_cumulative(&nodes, p.tau);
    let i0 = y0 - x0;
    let formula = |j: f64| (i0 * i0 - 4.0 * j).max(0.0).sqrt();
    let mut worst: f64 = 0.0;
    for ((_, x, y, _), j) in p.states(d).zip(cum) {
        worst = worst.max(((y - x) - formula(j)).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxTimeVerdict {
    pub x0: f64,
    pub y0: f64,
    pub tau: f64,
    /// (y0 − x0)²/16.
    pub bound: f64,
    pub holds: bool,
}

/// τ ≤ (y0 − x0)²/16 + 1e−9 for pairs welded together under `d`.
pub fn max_time_check(d: &Driver, pairs: &[(f64, f64)], policy: &StepPolicy) -> Result<Vec<MaxTimeVerdict>> {
    let flow = Flow::new(d, policy)?;
    let rows = par::map(pairs, |&(x0, y0)| {
        let tx = flow.hitting_time(x0)?.ok_or(Error::BeyondHorizon(x0))?;
        let ty = flow.hitting_time(y0)?.ok_or(Error::BeyondHorizon(y0))?;
        if (tx - ty).abs() > 1e-7 * (1.0 + d.horizon()) {
            return invalid(format!("({x0}, {y0}) is not welded together"));
        }
        let tau = tx.max(ty);
        let bound = (y0 - x0).powi(2) / 16.0;
        Ok(MaxTimeVerdict { x0, y0, tau, bound, holds: tau <= bound + 1e-9 })
    });
    rows.into_iter().collect()
}

/// |τ − (y0 − x0)²/16| under the constant driver at the pair's average,
/// where the bound is attained.
pub fn max_time_sharpness(x0: f64, y0: f64, policy: &StepPolicy) -> Result<f64> {
    if !(x0 < y0) {
        return invalid("need x0 < y0");
    }
    let bound = (y0 - x0).powi(2) / 16.0;
    let d = crate::driver::make_constant(0.5 * (x0 + y0), 2.0 * bound)?;
    let tau = Flow::new(&d, policy)?.hitting_time(x0)?.ok_or(Error::BeyondHorizon(x0))?;
    Ok((tau - bound).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FasterTimesBound {
    pub f1: f64,
    pub f2: f64,
    /// min(f1, f2).
    pub f: f64,
}

/// Bounds on the welding time of (−y0, y0) when the weld happens at ±δ.
pub fn faster_times_bound(y0: f64, delta: f64) -> Result<FasterTimesBound> {
    if !(y0 > 0.0) || !(delta >= 0.0) {
        return invalid("need y0 > 0 and delta ≥ 0");
    }
    let max_time = (2.0 * y0).powi(2) / 16.0;
    let eps0 = delta * delta * (y0 + delta).powi(2) / (32.0 * y0 * y0);
    let a0 = 0.5 + delta / (4.0 * y0);
    let f1 = max_time - eps0;
    let f2 = max_time - (1.0 / (4.0 * a0 * (1.0 - a0)) - 1.0) * eps0;
    Ok(FasterTimesBound { f1, f2, f: f1.min(f2) })
}

fn hit_state(d: &Driver, x0: f64, policy: &StepPolicy) -> Result<(BoundaryTrajectory, f64)> {
    let tr = Flow::new(d, policy)?.evolve(x0)?;
    let tau = welded(&tr)?;
    Ok((tr, tau))
}

/// |τ − ¼(x0² − x(τ)²) + ∫₀^τ ξ/(x − ξ) dt|.
pub fn appendix_identity_1(d: &Driver, x0: f64, policy: &StepPolicy) -> Result<f64> {
    let (tr, tau) = hit_state(d, x0, policy)?;
    let n = tr.samples.len() - 1;
    let nodes: Vec<(f64, f64)> = tr.samples[..n]
        .iter()
        .map(|&(t, x)| {
            let xi = d.eval(t);
            (t, xi / (x - xi))
        })
        .collect();
    let (_, integral) = singular_cumulative(&nodes, tau);
    let x_end = d.eval(tau);
    Ok((tau - 0.25 * (x0 * x0 - x_end * x_end) + integral).abs())
}

/// |y² − x² − 4∫₀^τ ξ(y − x)/((ξ − x)(y − ξ)) dt| for the welded pair
/// {x, y} = {x0, φ(x0)}, x < y, with φ(x0) found by re-evolution root finding.
pub fn appendix_identity_2(d: &Driver, x0: f64, policy: &StepPolicy) -> Result<f64> {
    let flow = Flow::new(d, policy)?;
    let tau = flow.hitting_time(x0)?.ok_or(Error::BeyondHorizon(x0))?;
    let side = if x0 < flow.origin() { Side::Right } else { Side::Left };
    let partner = inverse_hitting_flow(&flow, tau, side)?;
    let (x0, y0) = if x0 < partner { (x0, partner) } else { (partner, x0) };
    let p = pair_trajectory(d, x0, y0, policy)?;
    let nodes: Vec<(f64, f64)> = p.states(d).map(|(t, x, y, xi)| (t, xi * (y - x) / ((xi - x) * (y - xi)))).collect();
    let (_, integral) = singular_cumulative(&nodes, p.tau);
    Ok((y0 * y0 - x0 * x0 - 4.0 * integral).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FasterTimesRow {
    pub index: usize,
    pub tau: f64,
    /// |ξ(τ)| after rescaling the pair to (−1, 1).
    pub delta: f64,
    pub bound: f64,
    pub holds: bool,
}

/// A random piecewise-linear driver and a pair it welds, rescaled so that
/// the pair becomes (−1, 1).
pub fn random_welded_unit_pair<R: Rng + ?Sized>(rng: &mut R, policy: &StepPolicy) -> Result<Driver> {
    loop {
        let d = random_piecewise_linear(rng, 1.0, 9, 0.0, 0.6)?;
        let flow = Flow::new(&d, policy)?;
        let x = -rng.gen_range(0.2..1.2);
        let Some(tau) = flow.hitting_time(x)? else { continue };
        if tau <= 0.0 {
            continue;
        }
        let y = inverse_hitting_flow(&flow, tau, Side::Right)?;
        let mut d = d.shifted(-0.5 * (x + y)).scaled(2.0 / (y - x))?;
        // The step plan is not scale invariant: re-weld −1 under the rescaled
        // driver until its partner is 1 again.
        for _ in 0..8 {
            let flow = Flow::new(&d, policy)?;
            let Some(tau) = flow.hitting_time(-1.0)? else { break };
            let y = inverse_hitting_flow(&flow, tau, Side::Right)?;
            if (y - 1.0).abs() <= 1e-12 {
                break;
            }
            d = d.shifted(-0.5 * (y - 1.0)).scaled(2.0 / (y + 1.0))?;
        }
        return Ok(d);
    }
}

/// τ ≤ f(δ) + 1e−6 over `count` seeded drivers welding (−1, 1).
pub fn faster_times_sweep(count: usize, seed: u64, policy: &StepPolicy) -> Result<Vec<FasterTimesRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drivers: Vec<Driver> = (0..count).map(|_| random_welded_unit_pair(&mut rng, policy)).collect::<Result<_>>()?;
    let rows = par::map_range(count, |i| {
        let d = &drivers[i];
        let flow = Flow::new(d, policy)?;
        let tx = flow.hitting_time(-1.0)?.ok_or(Error::BeyondHorizon(-1.0))?;
        let ty = flow.hitting_time(1.0)?.ok_or(Error::BeyondHorizon(1.0))?;
        let tau = tx.max(ty);
        let delta = d.eval(tau).abs();
        let bound = faster_times_bound(1.0, delta)?.f;
        Ok(FasterTimesRow { index: i, tau, delta, bound, holds: tau <= bound + 1e-6 })
    });
    rows.into_iter().collect()
}
