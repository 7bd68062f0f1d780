//! Drivers that weld prescribed pairs quickly through large oscillations.
//!
//! The capture of a pair X < ξ < Y runs in three phases: a fast linear move
//! towards Y, ending a distance `gap` short of Y's image; a dash back towards
//! X during which Y trails the driver at that same distance; and a hold at
//! the midpoint of the two images until both are welded. Trailing at a fixed
//! distance is an unstable equilibrium, so the dash is split into short legs
//! whose end values are re-solved to restore the distance.

use serde::{Deserialize, Serialize};

use super::{Driver, Orientation, Segment};
use crate::error::{invalid, Error, Result};
use crate::flow::{Flow, Side, StepPolicy, Terminal};
use crate::hitting::{inverse_hitting, HittingProfile};
use crate::par;
use crate::roots::find_root;

/// Dash legs last this many gap² units of time.
const LEG: f64 = 8.0;
const MAX_LEGS: usize = 2_000_000;
/// Accuracy, relative to the horizon, to which captures end on schedule.
pub const SCHEDULE_TOL: f64 = 1e-6;

/// A welder driver together with the pairs it was built to weld.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptureOutcome {
    pub driver: Driver,
    /// Start points (x_j, y_j).
    pub pairs: Vec<(f64, f64)>,
    /// Designed welding time of each pair.
    pub weld_times: Vec<f64>,
    pub epsilon: f64,
    /// How often ε was halved to fit the schedule.
    pub refinements: u32,
}

fn lin(start: f64, end: f64, duration: f64) -> Segment {
    Segment::Linear { start, end, duration }
}

/// Runs points through a single segment.
fn push(seg: &Segment, pts: &[f64], policy: &StepPolicy) -> Vec<Terminal> {
    let d = Driver::new(Orientation::Upward, vec![seg.clone()]).expect("valid segment");
    let f = Flow::new(&d, policy).expect("upward driver");
    pts.iter().map(|&x| f.run(x, f64::INFINITY, None)).collect()
}

fn push_all(segs: &[Segment], pts: &mut [Terminal], policy: &StepPolicy) {
    for seg in segs {
        let alive: Vec<(usize, f64)> = pts
            .iter()
            .enumerate()
            .filter_map(|(i, t)| match t {
                Terminal::Alive(w) => Some((i, *w)),
                Terminal::Welded(_) => None,
            })
            .collect();
        let xs: Vec<f64> = alive.iter().map(|p| p.1).collect();
        let out = push(seg, &xs, policy);
        for ((i, _), o) in alive.into_iter().zip(out) {
            pts[i] = o;
        }
    }
}

fn alive(t: Terminal) -> Option<f64> {
    match t {
        Terminal::Alive(w) => Some(w),
        Terminal::Welded(_) => None,
    }
}

#[derive(Debug, Clone, Copy)]
struct Gadget {
    approach: f64,
    gap: f64,
}

#[derive(Debug, Clone)]
struct Capture {
    segments: Vec<Segment>,
    duration: f64,
}

/// Welds the images x < v < y, driver currently at v.
fn capture(x: f64, y: f64, v: f64, g: Gadget, policy: &StepPolicy) -> Result<Capture> {
    let gap = g.gap;
    if !(gap > 0.0 && g.approach > 0.0) || !(x < v && v < y) {
        return invalid("capture needs x < v < y and positive parameters");
    }
    let mut segments = Vec::new();
    let (mut cx, mut cy, mut cv) = (x, y, v);

    let trail = |from: f64, to: f64, dur: f64, y: f64| match push(&lin(from, to, dur), &[y], policy)[0] {
        Terminal::Alive(w) => w - to - gap,
        Terminal::Welded(_) => -gap,
    };

    // Approach: end the move `gap` short of Y's image. Usually this is a move
    // towards Y; for a tight pair it may be a move away from it.
    let u_lo = cv - 0.5 * (cv - cx);
    let f_lo = trail(cv, u_lo, g.approach, cy);
    if f_lo <= 0.0 {
        return Err(Error::Construction("gap too wide for this pair".into()));
    }
    let f_hi = trail(cv, cy, g.approach, cy);
    let u = find_root(|u| trail(cv, u, g.approach, cy), u_lo, f_lo, cy, f_hi, 1e-13 * gap);
    let seg = lin(cv, u, g.approach);
    let r = push(&seg, &[cx, cy], policy);
    match (alive(r[0]), alive(r[1])) {
        (Some(a), Some(b)) => {
            cx = a;
            cy = b;
        }
        _ => return Err(Error::Construction("pair welded during the approach".into())),
    }
    cv = u;
    segments.push(seg);
    if cv - 0.5 * (cx + cy) <= 0.0 {
        return Err(Error::Construction("gap too wide for this pair".into()));
    }

    let h = LEG * gap * gap;
    let mut legs = 0;
    loop {
        legs += 1;
        if legs > MAX_LEGS {
            return Err(Error::Construction("capture needs too many legs".into()));
        }
        let mut reach = 64.0 * gap + (cy - cv);
        let mut f_lo = trail(cv, cv - reach, h, cy);
        while f_lo <= 0.0 {
            reach *= 2.0;
            f_lo = trail(cv, cv - reach, h, cy);
        }
        let f_hi = trail(cv, cv, h, cy);
        let w = find_root(|w| trail(cv, w, h, cy), cv - reach, f_lo, cv, f_hi, 1e-12 * gap);
        let r = push(&lin(cv, w, h), &[cx, cy], policy);
        if let (Some(a), Some(b)) = (alive(r[0]), alive(r[1])) {
            if w > 0.5 * (a + b) {
                segments.push(lin(cv, w, h));
                cx = a;
                cy = b;
                cv = w;
                continue;
            }
        }
        // The midpoint is crossed on this leg: stop there.
        let slope = (w - cv) / h;
        let offset = |s: f64| {
            let end = cv + slope * s;
            let r = push(&lin(cv, end, s), &[cx, cy], policy);
            match (alive(r[0]), alive(r[1])) {
                (Some(a), Some(b)) => end - 0.5 * (a + b),
                (None, _) => -1.0,
                (_, None) => 1.0,
            }
        };
        let f0 = cv - 0.5 * (cx + cy);
        let fh = offset(h);
        let s = find_root(offset, 0.0, f0, h, fh, 1e-13 * gap * gap);
        let s = if s > 0.0 { s } else { 1e-3 * h };
        let seg = lin(cv, cv + slope * s, s);
        let r = push(&seg, &[cx, cy], policy);
        match (alive(r[0]), alive(r[1])) {
            (Some(a), Some(b)) => {
                cx = a;
                cy = b;
            }
            _ => return Err(Error::Construction("pair welded during the dash".into())),
        }
        cv += slope * s;
        segments.push(seg);
        break;
    }

    let hold = 0.25 * (cv - cx).powi(2).max((cy - cv).powi(2)) * (1.0 + 1e-12);
    segments.push(Segment::Constant { value: cv, duration: hold });
    let duration = segments.iter().map(Segment::duration).sum();
    Ok(Capture { segments, duration })
}

/// A capture lasting exactly `window`: hold at v for a while, then capture
/// with approach time and gap scaled to the pair, the hold length being
/// solved for. The slowest possible capture is a plain hold at the midpoint,
/// so the pair must not weld under a plain hold before the window ends.
fn capture_in(x: f64, y: f64, v: f64, window: f64, tol: f64, policy: &StepPolicy) -> Result<Capture> {
    let first_hit = 0.25 * (v - x).min(y - v).powi(2);
    let last_hit = 0.25 * (v - x).max(y - v).powi(2);
    // A plain hold already welds the pair at the end of the window.
    if (first_hit - window).abs() <= tol && (last_hit - window).abs() <= tol {
        let hold = last_hit * (1.0 + 1e-12);
        return Ok(Capture { segments: vec![Segment::Constant { value: v, duration: hold }], duration: hold });
    }
    if first_hit < window {
        return Err(Error::Construction(format!(
            "pair welds within {first_hit:e} under a plain hold, shorter than the capture window {window:e}"
        )));
    }
    let build = |p: f64| -> Result<Capture> {
        let mut segments = Vec::new();
        let (mut cx, mut cy) = (x, y);
        if p > 0.0 {
            let hold = Segment::Constant { value: v, duration: p };
            let r = push(&hold, &[x, y], policy);
            match (alive(r[0]), alive(r[1])) {
                (Some(a), Some(b)) => {
                    cx = a;
                    cy = b;
                }
                _ => return Err(Error::Construction("pair welded during the pre-hold".into())),
            }
            segments.push(hold);
        }
        let width = cy - cx;
        let rest = 0.25 * (v - cx).min(cy - v).powi(2);
        let approach = (0.125 * window).min(0.25 * rest);
        let gap = (width / 16.0).min(window / (2.0 * width));
        let c = capture(cx, cy, v, Gadget { approach, gap }, policy)?;
        segments.extend(c.segments);
        let duration = segments.iter().map(Segment::duration).sum();
        Ok(Capture { segments, duration })
    };
    let excess = |p: f64| build(p).map(|c| c.duration - window);
    let f0 = excess(0.0)?;
    if f0 > 0.0 {
        return Err(Error::Construction("capture window too short for this pair".into()));
    }
    let p_hi = first_hit * (1.0 - 1e-9);
    let f_hi = excess(p_hi)?;
    if f_hi < 0.0 {
        return Err(Error::Construction("capture cannot be slowed down to fill its window".into()));
    }
    // Failed builds only occur at the extremes; push them towards the far end.
    let p = find_root(|p| excess(p).unwrap_or(f64::MAX), 0.0, f0, p_hi, f_hi, 1e-15 * window);
    let c = build(p)?;
    // Step counts change discretely with segment lengths, so the duration has
    // jumps of the size of the integration error.
    if (c.duration - window).abs() > tol {
        return Err(Error::Construction("capture duration does not match its window".into()));
    }
    Ok(c)
}

/// Driver that welds τ₋⁻¹(jT/n) to τ₊⁻¹(jT/n) at exactly jT/n for the target
/// profile, moving to each pair's midpoint in time ε, holding, and capturing
/// the pair in the last ε of its block. Needs ε < T/(4n).
pub fn make_oscillating_welder(target: &HittingProfile, n: usize, epsilon: f64) -> Result<CaptureOutcome> {
    let horizon = target.horizon();
    if n == 0 {
        return invalid("mesh count must be positive");
    }
    if !(epsilon > 0.0 && epsilon < horizon / (4.0 * n as f64)) {
        return invalid(format!("epsilon must lie in (0, T/(4n)) = (0, {})", horizon / (4.0 * n as f64)));
    }
    let policy = *target.flow().policy();
    let times: Vec<f64> = (1..=n).map(|j| horizon * j as f64 / n as f64).collect();
    let pairs: Vec<Result<(f64, f64)>> = par::map(&times, |&t| {
        Ok((inverse_hitting(target, t, Side::Left)?, inverse_hitting(target, t, Side::Right)?))
    });
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_>>()?;

    let mut pts: Vec<Terminal> = pairs.iter().flat_map(|&(x, y)| [Terminal::Alive(x), Terminal::Alive(y)]).collect();
    let mut v = target.origin();
    let mut now = 0.0;
    let mut segments = Vec::new();
    for (j, &t_weld) in times.iter().enumerate() {
        let (x, y) = match (alive(pts[2 * j]), alive(pts[2 * j + 1])) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Construction(format!("pair {} welded before its block", j + 1))),
        };
        // Move to the midpoint of the images at the end of the move.
        let off = |m: f64| {
            let r = push(&lin(v, m, epsilon), &[x, y], &policy);
            let a = alive(r[0]).unwrap_or(m);
            let b = alive(r[1]).unwrap_or(m);
            m - 0.5 * (a + b)
        };
        let m = find_root(off, x, off(x), y, off(y), 1e-14 * (1.0 + x.abs().max(y.abs())));
        let mut block = vec![lin(v, m, epsilon)];
        push_all(&block, &mut pts, &policy);
        now += epsilon;
        let hold = t_weld - epsilon - now;
        let (xa, ya) = match (alive(pts[2 * j]), alive(pts[2 * j + 1])) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Construction(format!("pair {} welded during the move", j + 1))),
        };
        let half = (m - xa).max(ya - m);
        if 0.25 * half * half <= hold {
            return Err(Error::Construction(format!(
                "pair {} welds during the hold, before its capture window",
                j + 1
            )));
        }
        let hold_seg = Segment::Constant { value: m, duration: hold };
        push_all(std::slice::from_ref(&hold_seg), &mut pts, &policy);
        block.push(hold_seg);
        now += hold;
        let (xb, yb) = (alive(pts[2 * j]).unwrap(), alive(pts[2 * j + 1]).unwrap());
        let cap = capture_in(xb, yb, m, epsilon, SCHEDULE_TOL * horizon, &policy)?;
        push_all(&cap.segments, &mut pts, &policy);
        if alive(pts[2 * j]).is_some() || alive(pts[2 * j + 1]).is_some() {
            return Err(Error::Construction(format!("capture of pair {} did not weld it", j + 1)));
        }
        now += cap.duration;
        v = cap.segments.last().map_or(m, Segment::end_value);
        segments.extend(block);
        segments.extend(cap.segments);
    }
    let driver = Driver::new(Orientation::Upward, segments)?;
    Ok(CaptureOutcome { driver, pairs, weld_times: times, epsilon, refinements: 0 })
}

/// Driver welding −k/n to k/n for k = 1..n in order, each pair captured with
/// approach time and trailing gap ε. ε is halved (up to 8 times) until every
/// pair is welded by 2/n².
pub fn make_counterexample_welder(n: usize, epsilon: f64, policy: &StepPolicy) -> Result<CaptureOutcome> {
    if n < 2 {
        return invalid("n must be at least 2");
    }
    if !(epsilon > 0.0) {
        return invalid("epsilon must be positive");
    }
    let budget = 2.0 / (n * n) as f64;
    let nf = n as f64;
    let pairs: Vec<(f64, f64)> = (1..=n).map(|k| (-(k as f64) / nf, k as f64 / nf)).collect();
    let mut eps = epsilon;
    for refinements in 0..=8 {
        let mut pts: Vec<Terminal> =
            pairs.iter().flat_map(|&(x, y)| [Terminal::Alive(x), Terminal::Alive(y)]).collect();
        let mut v = 0.0;
        let mut now = 0.0;
        let mut segments = Vec::new();
        let mut weld_times = Vec::with_capacity(n);
        let mut failed = None;
        for k in 0..n {
            let (x, y) = match (alive(pts[2 * k]), alive(pts[2 * k + 1])) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    failed = Some(format!("pair {} welded early", k + 1));
                    break;
                }
            };
            let cap = match capture(x, y, v, Gadget { approach: eps, gap: eps }, policy) {
                Ok(c) => c,
                Err(e) => {
                    failed = Some(e.to_string());
                    break;
                }
            };
            push_all(&cap.segments, &mut pts, policy);
            now += cap.duration;
            weld_times.push(now);
            v = cap.segments.last().map_or(v, Segment::end_value);
            segments.extend(cap.segments);
        }
        if failed.is_none() && now <= budget {
            let driver = Driver::new(Orientation::Upward, segments)?;
            return Ok(CaptureOutcome { driver, pairs, weld_times, epsilon: eps, refinements });
        }
        eps *= 0.5;
    }
    Err(Error::Construction(format!("could not weld all {n} pairs within 2/n² = {budget}")))
}
