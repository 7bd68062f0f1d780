//! Hitting times τ(x; ξ), their two monotone branches, inverses and the
//! welding interval [−a, b].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{random_piecewise_linear_pair, sup_distance, Driver};
use crate::error::{invalid, Error, Result};
use crate::flow::{Flow, Side, StepPolicy, Terminal};
use crate::roots::shrink_bracket;
use crate::par;

/// Resolution of every root-finder on x.
pub const X_TOL: f64 = 1e-9;
/// Relative width at which inverse root finding stops; tighter than
/// [`X_TOL`] so that τ₊(φ(x)) matches τ₋(x) closely even where τ is steep.
pub const INV_TOL: f64 = 1e-12;
/// Largest τ gap left across an inverse bracket, unless the bracket is down
/// to a few ulps.
pub const TIME_TOL: f64 = 1e-10;
/// Adjacent τ inversions above this abort profile construction.
pub const INVERSION_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HitTime {
    At(f64),
    BeyondHorizon,
}

impl HitTime {
    /// τ as a number, +∞ when not welded.
    pub fn value(self) -> f64 {
        match self {
            HitTime::At(t) => t,
            HitTime::BeyondHorizon => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, HitTime::At(_))
    }
}

pub fn hitting_time(d: &Driver, x0: f64, policy: &StepPolicy) -> Result<HitTime> {
    Flow::new(d, policy)?.hitting_time(x0).map(|t| t.map_or(HitTime::BeyondHorizon, HitTime::At))
}

/// Sampled τ₋ and τ₊ with the welding interval endpoints.
#[derive(Debug, Clone)]
pub struct HittingProfile {
    flow: Flow,
    /// (x, τ) ordered from ξ(0) outwards, so x decreases.
    pub left_branch: Vec<(f64, f64)>,
    /// (y, τ) ordered from ξ(0) outwards.
    pub right_branch: Vec<(f64, f64)>,
    /// Outermost welded points, resolved to [`X_TOL`]. a = origin − left_end.
    pub left_end: f64,
    pub right_end: f64,
    /// Largest adjacent inversion seen before re-sorting.
    pub max_inversion: f64,
    /// Whether a finer step was needed to pass the monotonicity check.
    pub refined: bool,
}

impl HittingProfile {
    pub fn flow(&self) -> &Flow {
        &self.flow
    }

    pub fn driver(&self) -> &Driver {
        self.flow.driver()
    }

    pub fn horizon(&self) -> f64 {
        self.flow.horizon()
    }

    pub fn origin(&self) -> f64 {
        self.flow.origin()
    }

    /// a with the welding interval written as [ξ(0) − a, ξ(0) + b].
    pub fn a(&self) -> f64 {
        self.origin() - self.left_end
    }

    pub fn b(&self) -> f64 {
        self.right_end - self.origin()
    }

    pub fn branch(&self, side: Side) -> &[(f64, f64)] {
        match side {
            Side::Left => &self.left_branch,
            Side::Right => &self.right_branch,
        }
    }

    pub fn end(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.left_end,
            Side::Right => self.right_end,
        }
    }
}

/// Fractions of the branch length: geometric on [1e−4, 1/4), then uniform up to 1.
fn branch_fractions(n: usize) -> Vec<f64> {
    let n_geo = n / 4;
    if n_geo == 0 {
        return (1..=n).map(|i| i as f64 / n as f64).collect();
    }
    let n_uni = n - n_geo;
    let lo: f64 = 1e-4;
    let ratio = (0.25 / lo).ln();
    let mut out: Vec<f64> = (0..n_geo).map(|i| lo * (ratio * i as f64 / n_geo as f64).exp()).collect();
    out.extend((0..n_uni).map(|i| {
        if i + 1 == n_uni {
            1.0
        } else {
            0.25 + 0.75 * i as f64 / (n_uni - 1) as f64
        }
    }));
    out
}

/// Outermost point on `side` with τ ≤ T.
fn find_endpoint(flow: &Flow, side: Side) -> Result<f64> {
    let o = flow.origin();
    let s = side.sign();
    let t = flow.horizon();
    let mut r = 2.0 * t.sqrt() + 2.0 * flow.driver().sup_norm() + 1.0;
    let mut tries = 0;
    while flow.welded_by(o + s * r, t) {
        r *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::Construction(format!("no {} endpoint bracket found", side.name())));
        }
    }
    let (mut lo, mut hi) = (0.0_f64, r);
    while hi - lo > X_TOL * (1.0 + (o + s * hi).abs()) {
        let mid = 0.5 * (lo + hi);
        if flow.welded_by(o + s * mid, t) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(o + s * lo)
}

struct Branch {
    points: Vec<(f64, f64)>,
    inversion: f64,
    worst_x: f64,
}

fn sample_branch(flow: &Flow, end: f64, fractions: &[f64]) -> Branch {
    let o = flow.origin();
    let xs: Vec<f64> = fractions.iter().map(|&f| o + f * (end - o)).collect();
    let taus = par::map(&xs, |&x| {
        if x == o {
            return 0.0;
        }
        // The last point is the endpoint itself, welded by construction.
        flow.hitting_time(x).ok().flatten().unwrap_or(f64::INFINITY)
    });
    let mut points = Vec::with_capacity(xs.len() + 1);
    points.push((o, 0.0));
    points.extend(xs.into_iter().zip(taus));
    let (mut inversion, mut worst_x) = (0.0_f64, o);
    for w in points.windows(2) {
        let d = w[0].1 - w[1].1;
        if d > inversion {
            inversion = d;
            worst_x = w[1].0;
        }
    }
    Branch { points, inversion, worst_x }
}

/// Samples both branches with `n` points each (plus the origin) and locates
/// the welding interval endpoints.
pub fn hitting_profile(d: &Driver, n: usize, policy: &StepPolicy) -> Result<HittingProfile> {
    if n < 2 {
        return invalid("a profile needs at least 2 points per branch");
    }
    let fractions = branch_fractions(n);
    let mut policy = *policy;
    let mut refined = false;
    loop {
        let flow = Flow::new(d, &policy)?;
        let left_end = find_endpoint(&flow, Side::Left)?;
        let right_end = find_endpoint(&flow, Side::Right)?;
        let mut left = sample_branch(&flow, left_end, &fractions);
        let mut right = sample_branch(&flow, right_end, &fractions);
        let worst = if left.inversion >= right.inversion { (&left, Side::Left) } else { (&right, Side::Right) };
        if worst.0.inversion > INVERSION_LIMIT {
            if !refined {
                refined = true;
                policy.base_step /= 4.0;
                continue;
            }
            return Err(Error::MonotonicityViolation {
                side: worst.1.name(),
                x: worst.0.worst_x,
                size: worst.0.inversion,
            });
        }
        let max_inversion = left.inversion.max(right.inversion);
        for b in [&mut left, &mut right] {
            let mut taus: Vec<f64> = b.points.iter().map(|p| p.1).collect();
            taus.sort_by(f64::total_cmp);
            for (p, t) in b.points.iter_mut().zip(taus) {
                p.1 = t;
            }
        }
        return Ok(HittingProfile {
            flow,
            left_branch: left.points,
            right_branch: right.points,
            left_end,
            right_end,
            max_inversion,
            refined,
        });
    }
}

/// Solves τ(x) = t between `inner` (welded by t) and `outer` (not), starting
/// from the backward guess. Returns the inner end of the final bracket, which
/// is welded by `t`.
fn invert_bracketed(flow: &Flow, t: f64, side: Side, inner: f64, outer: f64) -> f64 {
    let s = side.sign();
    // τ(x) − t; points alive at the horizon count as hit just after it.
    let f = |x: f64| match flow.run(x, f64::INFINITY, None) {
        Terminal::Welded(th) => th - t,
        Terminal::Alive(_) => flow.horizon() - t + 1.0,
    };
    let inside = |x: f64, a: f64, b: f64| s * (x - a) > 0.0 && s * (b - x) > 0.0;
    let (mut inner, mut outer) = (inner, outer);
    let (mut f_in, mut f_out) = (f64::NAN, f64::NAN);
    let g = flow.backward_guess(t, side);
    if inside(g, inner, outer) {
        let fg = f(g);
        // Walk away from the guess in growing steps until the sign changes.
        let dir = if fg <= 0.0 { s } else { -s };
        if fg <= 0.0 {
            (inner, f_in) = (g, fg);
        } else {
            (outer, f_out) = (g, fg);
        }
        let mut eta = 4.0 * INV_TOL * (1.0 + g.abs());
        loop {
            let x = g + dir * eta;
            if !inside(x, inner, outer) {
                break;
            }
            let fx = f(x);
            if fx <= 0.0 {
                (inner, f_in) = (x, fx);
            } else {
                (outer, f_out) = (x, fx);
            }
            if (fx <= 0.0) != (fg <= 0.0) {
                break;
            }
            eta *= 16.0;
        }
    }
    if f_in.is_nan() {
        f_in = f(inner);
    }
    if f_out.is_nan() {
        f_out = f(outer);
    }
    if f_out == 0.0 {
        return outer;
    }
    if f_in > 0.0 || f_out < 0.0 {
        // The ends do not straddle t in this discretisation; keep the inner one.
        return inner;
    }
    let tol = INV_TOL * (1.0 + inner.abs());
    // Zero counts as welded: nudge it to the inner sign.
    let fz = |x: f64| {
        let v = f(x);
        if v == 0.0 {
            -f64::MIN_POSITIVE
        } else {
            v
        }
    };
    let f_in = if f_in == 0.0 { -f64::MIN_POSITIVE } else { f_in };
    // Where τ is steep a narrow bracket can still straddle a visible jump in
    // time, so keep going down to a few ulps.
    let done = |a: (f64, f64), b: (f64, f64)| {
        let width = (b.0 - a.0).abs();
        (width <= tol && (b.1 - a.1).abs() <= TIME_TOL) || width <= 4.0 * f64::EPSILON * a.0.abs().max(f64::MIN_POSITIVE)
    };
    shrink_bracket(fz, (inner, f_in), (outer, f_out), done).0 .0
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if t > 0.0 && t <= horizon {
        Ok(())
    } else {
        invalid(format!("time {t} is outside (0, {horizon}]"))
    }
}

/// The point on `side` with τ = t, bracketed on the sampled profile and
/// refined by re-evolution.
pub fn inverse_hitting(p: &HittingProfile, t: f64, side: Side) -> Result<f64> {
    check_time(t, p.horizon())?;
    let branch = p.branch(side);
    let i = branch.partition_point(|q| q.1 < t);
    let s = side.sign();
    let (inner, outer) = if i == 0 {
        (branch[0].0, branch[1].0)
    } else if i < branch.len() {
        (branch[i - 1].0, branch[i].0)
    } else {
        let end = p.end(side);
        let mut outer = end + s * 2.0 * X_TOL * (1.0 + end.abs());
        while p.flow.welded_by(outer, t) {
            outer += 2.0 * (outer - end);
        }
        (branch[branch.len() - 1].0, outer)
    };
    // Sorting may have swapped sub-tolerance neighbours; widen by one cell.
    let inner = if i >= 2 && !p.flow.welded_by(inner, t) { branch[i - 2].0 } else { inner };
    let outer = if i + 1 < branch.len() && p.flow.welded_by(outer, t) { branch[i + 1].0 } else { outer };
    Ok(invert_bracketed(&p.flow, t, side, inner, outer))
}

/// The point on `side` with τ = t without a precomputed profile.
pub fn inverse_hitting_flow(flow: &Flow, t: f64, side: Side) -> Result<f64> {
    check_time(t, flow.horizon())?;
    let o = flow.origin();
    let s = side.sign();
    let mut r = 2.0 * t.sqrt() + 2.0 * flow.driver().sup_norm() + 1.0;
    let mut tries = 0;
    while flow.welded_by(o + s * r, t) {
        r *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::Construction("no inverse bracket found".into()));
        }
    }
    Ok(invert_bracketed(flow, t, side, o, o + s * r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichPoint {
    pub x: f64,
    pub side: Side,
    /// τ(x ∓ δ; d1), τ(x; d2), τ(x ± δ; d1); +∞ when not welded.
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub delta: f64,
    pub points: Vec<SandwichPoint>,
    /// Grid points inside the excluded δ-neighbourhood of ξ(0).
    pub skipped: usize,
    pub max_violation: f64,
}

impl SandwichReport {
    pub fn violations(&self, slack: f64) -> usize {
        self.points.iter().filter(|p| p.violation > slack).count()
    }
}

/// Amount by which a ≤ b fails, treating +∞ ≤ +∞ as true.
fn excess(a: f64, b: f64) -> f64 {
    if a <= b {
        0.0
    } else {
        a - b
    }
}

/// Checks τ(y − δ; d1) ≤ τ(y; d2) ≤ τ(y + δ; d1) on the right of ξ(0) and the
/// mirrored inequalities on the left, δ = ‖d1 − d2‖∞.
pub fn sandwich_check(d1: &Driver, d2: &Driver, grid: &[f64], policy: &StepPolicy) -> Result<SandwichReport> {
    if (d1.horizon() - d2.horizon()).abs() > 1e-12 * d1.horizon().max(1.0) {
        return invalid("drivers must share a horizon");
    }
    let f1 = Flow::new(d1, policy)?;
    let f2 = Flow::new(d2, policy)?;
    let delta = sup_distance(d1, d2, 4096);
    let o = d1.initial_value();
    let kept: Vec<f64> = grid.iter().copied().filter(|&x| (x - o).abs() > delta).collect();
    let skipped = grid.len() - kept.len();
    let tau = |f: &Flow, x: f64| -> f64 {
        if x == f.origin() {
            return 0.0;
        }
        f.hitting_time(x).ok().flatten().unwrap_or(f64::INFINITY)
    };
    let points = par::map(&kept, |&x| {
        let side = if x > o { Side::Right } else { Side::Left };
        let s = side.sign();
        let lower = tau(&f1, x - s * delta);
        let middle = tau(&f2, x);
        let upper = tau(&f1, x + s * delta);
        let violation = excess(lower, middle).max(excess(middle, upper));
        SandwichPoint { x, side, lower, middle, upper, violation }
    });
    let max_violation = points.iter().map(|p| p.violation).fold(0.0, f64::max);
    Ok(SandwichReport { delta, points, skipped, max_violation })
}

/// max over `t_grid` and both branches of |τ±⁻¹(t; d1) − τ±⁻¹(t; d2)|.
pub fn lipschitz_check(d1: &Driver, d2: &Driver, t_grid: &[f64], policy: &StepPolicy) -> Result<f64> {
    if (d1.horizon() - d2.horizon()).abs() > 1e-12 * d1.horizon().max(1.0) {
        return invalid("drivers must share a horizon");
    }
    let f1 = Flow::new(d1, policy)?;
    let f2 = Flow::new(d2, policy)?;
    for &t in t_grid {
        check_time(t, d1.horizon())?;
    }
    let jobs: Vec<(f64, Side)> =
        t_grid.iter().flat_map(|&t| [(t, Side::Left), (t, Side::Right)]).collect();
    let gaps = par::map(&jobs, |&(t, side)| -> Result<f64> {
        let a = inverse_hitting_flow(&f1, t, side)?;
        let b = inverse_hitting_flow(&f2, t, side)?;
        Ok((a - b).abs())
    });
    let mut sup = 0.0_f64;
    for g in gaps {
        sup = sup.max(g?);
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSweepRow {
    pub index: usize,
    /// ‖ξ − ξ̃‖∞.
    pub delta: f64,
    /// sup gap of the inverses for the Lipschitz sweep, max violation for
    /// the sandwich sweep.
    pub value: f64,
    /// Sandwich grid points inside the excluded neighbourhood.
    pub skipped: usize,
}

fn seeded_pairs(count: usize, seed: u64, max_distance: f64) -> Result<Vec<(Driver, Driver, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_piecewise_linear_pair(&mut rng, max_distance)).collect()
}

/// [`lipschitz_check`] on `count` seeded random pairs at distance at most
/// `max_distance`, on the grid t_k = k/n_t, k = 1..n_t.
pub fn lipschitz_sweep(count: usize, seed: u64, max_distance: f64, n_t: usize, policy: &StepPolicy) -> Result<Vec<PairSweepRow>> {
    let grid: Vec<f64> = (1..=n_t).map(|k| k as f64 / n_t as f64).collect();
    let pairs = seeded_pairs(count, seed, max_distance)?;
    let mut rows = Vec::with_capacity(count);
    for (index, (d1, d2, delta)) in pairs.iter().enumerate() {
        let value = lipschitz_check(d1, d2, &grid, policy)?;
        rows.push(PairSweepRow { index, delta: *delta, value, skipped: 0 });
    }
    Ok(rows)
}

/// [`sandwich_check`] on the same pairs as [`lipschitz_sweep`], with `n_x`
/// points spread uniformly over [−2, 2].
pub fn sandwich_sweep(count: usize, seed: u64, max_distance: f64, n_x: usize, policy: &StepPolicy) -> Result<Vec<PairSweepRow>> {
    let grid: Vec<f64> = (0..n_x).map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / n_x as f64).collect();
    let pairs = seeded_pairs(count, seed, max_distance)?;
    let mut rows = Vec::with_capacity(count);
    for (index, (d1, d2, _)) in pairs.iter().enumerate() {
        let r = sandwich_check(d1, d2, &grid, policy)?;
        rows.push(PairSweepRow { index, delta: r.delta, value: r.max_violation, skipped: r.skipped });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::make_constant;

    #[test]
    fn fractions_cover_branch() {
        for n in [2, 3, 4, 5, 16, 101] {
            let f = branch_fractions(n);
            assert_eq!(f.len(), n);
            assert_eq!(*f.last().unwrap(), 1.0);
            assert!(f.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn zero_driver_endpoints() {
        let d = make_constant(0.0, 1.0).unwrap();
        let p = hitting_profile(&d, 16, &StepPolicy::default()).unwrap();
        assert!((p.a() - 2.0).abs() < 1e-8 && (p.b() - 2.0).abs() < 1e-8);
        for &(x, t) in p.left_branch.iter().chain(&p.right_branch) {
            assert!((t - x * x / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn excess_treats_infinity_as_top() {
        assert_eq!(excess(f64::INFINITY, f64::INFINITY), 0.0);
        assert_eq!(excess(1.0, f64::INFINITY), 0.0);
        assert_eq!(excess(f64::INFINITY, 1.0), f64::INFINITY);
    }
}
