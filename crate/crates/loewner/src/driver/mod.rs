//! Driving functions: typed segments, constructors and time reversal.

mod spec;
mod welders;

pub use spec::{DriverSpec, ProblemSpec, SegmentSpec};
pub use welders::{make_counterexample_welder, make_oscillating_welder, CaptureOutcome};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const CONTINUITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Orientation {
    /// Upward driver ξ, the one that generates the curve at its base.
    #[default]
    #[serde(rename = "up")]
    Upward,
    /// Downward driver λ.
    #[serde(rename = "down")]
    Downward,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Upward => Orientation::Downward,
            Orientation::Downward => Orientation::Upward,
        }
    }
}

/// Where the √ singularity of a [`Segment::SqrtCap`] sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    /// value = start + coeff·√s
    #[default]
    Start,
    /// value = start + coeff·(√D − √(D − s)); the time reversal of `Start`.
    End,
}

/// One piece of a driver, in segment-local time s ∈ [0, duration].
#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Constant { value: f64, duration: f64 },
    Linear { start: f64, end: f64, duration: f64 },
    SqrtCap { start: f64, coeff: f64, duration: f64, anchor: Anchor },
    /// Linear interpolation through `(s, value)` pairs; the first s is 0.
    Sampled { points: Vec<(f64, f64)> },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Constant { duration, .. }
            | Segment::Linear { duration, .. }
            | Segment::SqrtCap { duration, .. } => *duration,
            Segment::Sampled { points } => points.last().map_or(0.0, |p| p.0),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let d = self.duration();
        let s = s.clamp(0.0, d);
        match self {
            Segment::Constant { value, .. } => *value,
            Segment::Linear { start, end, duration } => {
                if s >= *duration {
                    *end
                } else {
                    start + (end - start) * (s / duration)
                }
            }
            Segment::SqrtCap { start, coeff, duration, anchor } => match anchor {
                Anchor::Start => start + coeff * s.sqrt(),
                Anchor::End => start + coeff * (duration.sqrt() - (duration - s).max(0.0).sqrt()),
            },
            Segment::Sampled { points } => {
                let i = points.partition_point(|p| p.0 <= s);
                if i == 0 {
                    return points[0].1;
                }
                if i >= points.len() {
                    return points[points.len() - 1].1;
                }
                let (t0, v0) = points[i - 1];
                let (t1, v1) = points[i];
                v0 + (v1 - v0) * (s - t0) / (t1 - t0)
            }
        }
    }

    pub fn start_value(&self) -> f64 {
        self.eval(0.0)
    }

    pub fn end_value(&self) -> f64 {
        match self {
            Segment::Linear { end, .. } => *end,
            _ => self.eval(self.duration()),
        }
    }

    /// Local times where the segment may have a kink; always includes 0 and D.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Segment::Sampled { points } => points.iter().map(|p| p.0).collect(),
            _ => vec![0.0, self.duration()],
        }
    }

    fn shifted(&self, delta: f64) -> Segment {
        match self {
            Segment::Constant { value, duration } => {
                Segment::Constant { value: value + delta, duration: *duration }
            }
            Segment::Linear { start, end, duration } => {
                Segment::Linear { start: start + delta, end: end + delta, duration: *duration }
            }
            Segment::SqrtCap { start, coeff, duration, anchor } => Segment::SqrtCap {
                start: start + delta,
                coeff: *coeff,
                duration: *duration,
                anchor: *anchor,
            },
            Segment::Sampled { points } => {
                Segment::Sampled { points: points.iter().map(|&(t, v)| (t, v + delta)).collect() }
            }
        }
    }

    /// Segment played backwards in time with values offset by `-offset`.
    fn reversed(&self, offset: f64) -> Segment {
        let d = self.duration();
        match self {
            Segment::Constant { value, duration } => {
                Segment::Constant { value: value - offset, duration: *duration }
            }
            Segment::Linear { start, end, duration } => Segment::Linear {
                start: end - offset,
                end: start - offset,
                duration: *duration,
            },
            Segment::SqrtCap { start, coeff, duration, anchor } => Segment::SqrtCap {
                start: start + coeff * d.sqrt() - offset,
                coeff: -coeff,
                duration: *duration,
                anchor: match anchor {
                    Anchor::Start => Anchor::End,
                    Anchor::End => Anchor::Start,
                },
            },
            Segment::Sampled { points } => Segment::Sampled {
                points: points.iter().rev().map(|&(t, v)| (d - t, v - offset)).collect(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Segment::Sampled { points } => {
                if points.len() < 2 {
                    return invalid("sampled segment needs at least 2 points");
                }
                if points[0].0 != 0.0 {
                    return invalid("sampled segment must start at local time 0");
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return invalid("sampled segment times must be strictly increasing");
                    }
                }
                if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
                    return invalid("sampled segment has non-finite entries");
                }
                Ok(())
            }
            _ => {
                let d = self.duration();
                if !(d > 0.0 && d.is_finite()) {
                    return invalid(format!("segment duration must be positive, got {d}"));
                }
                let ok = match self {
                    Segment::Constant { value, .. } => value.is_finite(),
                    Segment::Linear { start, end, .. } => start.is_finite() && end.is_finite(),
                    Segment::SqrtCap { start, coeff, .. } => start.is_finite() && coeff.is_finite(),
                    Segment::Sampled { .. } => unreachable!(),
                };
                if ok {
                    Ok(())
                } else {
                    invalid("segment has non-finite parameters")
                }
            }
        }
    }
}

/// A continuous driving function on [0, T] stored as consecutive segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "spec::DriverSpec", try_from = "spec::DriverSpec")]
pub struct Driver {
    horizon: f64,
    orientation: Orientation,
    segments: Vec<Segment>,
    starts: Vec<f64>,
}

impl Driver {
    pub fn new(orientation: Orientation, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return invalid("driver needs at least one segment");
        }
        for s in &segments {
            s.validate()?;
        }
        for w in segments.windows(2) {
            let (a, b) = (w[0].end_value(), w[1].start_value());
            if (a - b).abs() > CONTINUITY_TOL * a.abs().max(1.0) {
                return invalid(format!("driver is discontinuous: segment ends at {a}, next starts at {b}"));
            }
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        for s in &segments {
            starts.push(t);
            t += s.duration();
        }
        Ok(Driver { horizon: t, orientation, segments, starts })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Absolute start time of every segment.
    pub fn segment_starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Index of the segment containing `t`; ties go to the later segment.
    pub fn segment_index(&self, t: f64) -> usize {
        let i = self.starts.partition_point(|&s| s <= t);
        i.saturating_sub(1).min(self.segments.len() - 1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        let i = self.segment_index(t);
        self.segments[i].eval(t - self.starts[i])
    }

    pub fn initial_value(&self) -> f64 {
        self.segments[0].start_value()
    }

    pub fn final_value(&self) -> f64 {
        self.segments[self.segments.len() - 1].end_value()
    }

    /// Absolute times of every breakpoint, sorted, including 0 and T.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (s, &t0) in self.segments.iter().zip(&self.starts) {
            for b in s.breakpoints() {
                out.push(t0 + b);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        out
    }

    /// Max of |ξ| over breakpoints and a uniform grid.
    pub fn sup_norm(&self) -> f64 {
        self.sample_times(2048).into_iter().map(|t| self.eval(t).abs()).fold(0.0, f64::max)
    }

    /// Breakpoints merged with `n` uniform samples.
    pub fn sample_times(&self, n: usize) -> Vec<f64> {
        let mut ts = self.breakpoints();
        let n = n.max(1);
        ts.extend((0..=n).map(|i| self.horizon * i as f64 / n as f64));
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    /// Driver plus a constant.
    pub fn shifted(&self, delta: f64) -> Driver {
        let segments = self.segments.iter().map(|s| s.shifted(delta)).collect();
        Driver { segments, ..self.clone() }
    }

    /// The Brownian-type rescaling t ↦ r·ξ(t/r²) on [0, r²T].
    pub fn scaled(&self, r: f64) -> Result<Driver> {
        if !(r > 0.0 && r.is_finite()) {
            return invalid("scale must be positive");
        }
        let r2 = r * r;
        let segments = self
            .segments
            .iter()
            .map(|s| match s {
                Segment::Constant { value, duration } => {
                    Segment::Constant { value: r * value, duration: r2 * duration }
                }
                Segment::Linear { start, end, duration } => {
                    Segment::Linear { start: r * start, end: r * end, duration: r2 * duration }
                }
                Segment::SqrtCap { start, coeff, duration, anchor } => Segment::SqrtCap {
                    start: r * start,
                    coeff: *coeff,
                    duration: r2 * duration,
                    anchor: *anchor,
                },
                Segment::Sampled { points } => Segment::Sampled {
                    points: points.iter().map(|&(t, v)| (r2 * t, r * v)).collect(),
                },
            })
            .collect();
        Driver::new(self.orientation, segments)
    }

    /// This driver followed by `other`, which is shifted to start where this one ends.
    pub fn concat(&self, other: &Driver) -> Result<Driver> {
        let delta = self.final_value() - other.initial_value();
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().map(|s| s.shifted(delta)));
        Driver::new(self.orientation, segments)
    }

    /// Extends the driver by holding its final value until `horizon`.
    pub fn extended_to(&self, horizon: f64) -> Result<Driver> {
        if horizon <= self.horizon * (1.0 + 1e-15) {
            return Ok(self.clone());
        }
        let mut segments = self.segments.clone();
        segments.push(Segment::Constant {
            value: self.final_value(),
            duration: horizon - self.horizon,
        });
        Driver::new(self.orientation, segments)
    }
}

/// Sup distance between two drivers over the union of their breakpoints and a
/// uniform grid of `n` points.
pub fn sup_distance(a: &Driver, b: &Driver, n: usize) -> f64 {
    let mut ts = a.sample_times(n);
    ts.extend(b.breakpoints());
    let h = a.horizon().min(b.horizon());
    ts.into_iter().filter(|&t| t <= h).map(|t| (a.eval(t) - b.eval(t)).abs()).fold(0.0, f64::max)
}

/// Incrementally assembles a continuous driver.
#[derive(Debug, Clone)]
pub struct DriverBuilder {
    value: f64,
    time: f64,
    segments: Vec<Segment>,
}

impl DriverBuilder {
    pub fn new(start: f64) -> Self {
        DriverBuilder { value: start, time: 0.0, segments: Vec::new() }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn linear_to(&mut self, end: f64, duration: f64) -> &mut Self {
        self.push(Segment::Linear { start: self.value, end, duration })
    }

    pub fn hold(&mut self, duration: f64) -> &mut Self {
        self.push(Segment::Constant { value: self.value, duration })
    }

    /// Appends `seg` shifted so that it starts at the current value.
    pub fn push(&mut self, seg: Segment) -> &mut Self {
        let seg = seg.shifted(self.value - seg.start_value());
        self.value = seg.end_value();
        self.time += seg.duration();
        self.segments.push(seg);
        self
    }

    pub fn build(&self, orientation: Orientation) -> Result<Driver> {
        Driver::new(orientation, self.segments.clone())
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        invalid(format!("horizon must be positive, got {t}"))
    }
}

pub fn make_constant(c: f64, horizon: f64) -> Result<Driver> {
    check_horizon(horizon)?;
    Driver::new(Orientation::Upward, vec![Segment::Constant { value: c, duration: horizon }])
}

/// Upward piecewise-linear driver through `knots`, which must start at t = 0.
pub fn make_piecewise_linear(knots: &[(f64, f64)]) -> Result<Driver> {
    if knots.len() < 2 {
        return invalid("piecewise-linear driver needs at least 2 knots");
    }
    if knots[0].0 != 0.0 {
        return invalid("first knot must be at t = 0");
    }
    let mut segments = Vec::with_capacity(knots.len() - 1);
    for w in knots.windows(2) {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        if !(t1 > t0) {
            return invalid("knot times must be strictly increasing");
        }
        segments.push(Segment::Linear { start: v0, end: v1, duration: t1 - t0 });
    }
    Driver::new(Orientation::Upward, segments)
}

/// Drift of the tilted slit map, the constant term of its expansion at ∞.
pub fn slit_drift(alpha: f64) -> f64 {
    (1.0 - 2.0 * alpha) / (alpha * (1.0 - alpha)).sqrt()
}

/// Downward driver λ(t) = C√t generating the straight segment from 0 at angle απ.
pub fn make_sqrt_slit(alpha: f64, horizon: f64) -> Result<Driver> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    check_horizon(horizon)?;
    // The unit slit has capacity time 1/4 and λ(1/4) = drift.
    let coeff = 2.0 * slit_drift(alpha);
    Driver::new(
        Orientation::Downward,
        vec![Segment::SqrtCap { start: 0.0, coeff, duration: horizon, anchor: Anchor::Start }],
    )
}

/// out(t) = in(T − t) − in(T), orientation flipped.
pub fn reverse(d: &Driver) -> Driver {
    let offset = d.final_value();
    let segments: Vec<Segment> = d.segments.iter().rev().map(|s| s.reversed(offset)).collect();
    Driver::new(d.orientation.flipped(), segments).expect("reversal preserves validity")
}

/// The pair (ξ, ξ̃) with ‖ξ − ξ̃‖∞ = δ whose hitting times at y0 differ by O(1),
/// plus the marked point y0.
///
/// Without `s0`, ξ ramps from 0 to −1 over [0, δ] and then holds, ξ̃ = ξ − δ and
/// y0 = 2δ. With `s0`, both start at 0: ξ waits for δ² while ξ̃ slides to −δ,
/// and y0 is the point whose image at time δ² is 2δ.
pub fn make_lemma36_pair(delta: f64, s0: bool) -> Result<(Driver, Driver, f64)> {
    if !(delta > 0.0 && delta <= 0.1) {
        return invalid(format!("delta must lie in (0, 0.1], got {delta}"));
    }
    let horizon = 1.0;
    if !s0 {
        let xi = make_piecewise_linear(&[(0.0, 0.0), (delta, -1.0), (horizon, -1.0)])?;
        let xt = xi.shifted(-delta);
        return Ok((xi, xt, 2.0 * delta));
    }
    let p = delta * delta;
    let xi = make_piecewise_linear(&[(0.0, 0.0), (p, 0.0), (p + delta, -1.0), (horizon, -1.0)])?;
    let xt = make_piecewise_linear(&[
        (0.0, 0.0),
        (p, -delta),
        (p + delta, -1.0 - delta),
        (horizon, -1.0 - delta),
    ])?;
    // Under the zero driver for time p, y ↦ √(y² − 4p).
    let y0 = (4.0 * delta * delta + 4.0 * p).sqrt();
    Ok((xi, xt, y0))
}

/// Random piecewise-linear upward driver starting at `start`, with `n_knots`
/// equally spaced knots and increments drawn uniformly from [−step, step].
pub fn random_piecewise_linear<R: Rng + ?Sized>(
    rng: &mut R,
    horizon: f64,
    n_knots: usize,
    start: f64,
    step: f64,
) -> Result<Driver> {
    check_horizon(horizon)?;
    let n = n_knots.max(2);
    let mut knots = Vec::with_capacity(n);
    let mut v = start;
    for i in 0..n {
        let t = horizon * i as f64 / (n - 1) as f64;
        if i > 0 {
            v += rng.gen_range(-step..=step);
        }
        knots.push((t, v));
    }
    make_piecewise_linear(&knots)
}

/// A random piecewise-linear driver on [0, 1] with 9 knots, and a second one
/// through the same knot times with every value moved by at most δ, where δ
/// is drawn from (0, `max_distance`]. Returns both and their sup distance.
pub fn random_piecewise_linear_pair<R: Rng + ?Sized>(rng: &mut R, max_distance: f64) -> Result<(Driver, Driver, f64)> {
    if !(max_distance > 0.0) {
        return invalid("max_distance must be positive");
    }
    let d1 = random_piecewise_linear(rng, 1.0, 9, 0.0, 0.6)?;
    let delta = max_distance * (1.0 - rng.gen::<f64>());
    let mut knots = Vec::with_capacity(9);
    let mut dist: f64 = 0.0;
    for t in d1.breakpoints() {
        let off = rng.gen_range(-delta..=delta);
        dist = dist.max(off.abs());
        knots.push((t, d1.eval(t) + off));
    }
    Ok((d1, make_piecewise_linear(&knots)?, dist))
}

/// Named upward drivers used by sweeps and checks: constants, ramps, a tent,
/// reversed slits, the non-uniformity pair and a seeded random one.
pub fn driver_zoo() -> Result<Vec<(String, Driver)>> {
    let (xi, xt, _) = make_lemma36_pair(0.05, false)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    Ok(vec![
        ("zero".into(), make_constant(0.0, 1.0)?),
        ("constant-0.5".into(), make_constant(0.5, 2.0)?),
        ("ramp".into(), make_piecewise_linear(&[(0.0, 0.0), (1.0, 1.0)])?),
        ("tent".into(), make_piecewise_linear(&[(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)])?),
        ("slit-1/3".into(), reverse(&make_sqrt_slit(1.0 / 3.0, 0.25)?)),
        ("slit-1/4".into(), reverse(&make_sqrt_slit(0.25, 0.25)?)),
        ("steep-drop".into(), xi),
        ("steep-drop-shifted".into(), xt),
        ("random-pl".into(), random_piecewise_linear(&mut rng, 1.0, 9, 0.0, 0.6)?),
    ])
}

/// Adds a function to a driver by sampling it on `n` uniform cells plus the
/// driver's breakpoints; the result is a single sampled segment.
pub fn add_sampled(d: &Driver, n: usize, f: impl Fn(f64) -> f64) -> Result<Driver> {
    let ts = d.sample_times(n);
    let points = ts.into_iter().map(|t| (t, d.eval(t) + f(t))).collect();
    Driver::new(d.orientation(), vec![Segment::Sampled { points }])
}

/// A validated partition {(x_j, y_j)} with x_N < … < x_1 < 0 < y_1 < … < y_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "spec::ProblemSpec", into = "spec::ProblemSpec")]
pub struct PartitionWeldingProblem {
    pairs: Vec<(f64, f64)>,
}

impl PartitionWeldingProblem {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return invalid("partition needs at least one pair");
        }
        let mut prev = (0.0, 0.0);
        for &(x, y) in &pairs {
            if !(x.is_finite() && y.is_finite()) {
                return invalid("partition entries must be finite");
            }
            if !(x < prev.0 && y > prev.1) {
                return Err(Error::InvalidInput(format!(
                    "partition must satisfy x_N < … < x_1 < 0 < y_1 < … < y_N; offending pair ({x}, {y})"
                )));
            }
            prev = (x, y);
        }
        Ok(PartitionWeldingProblem { pairs })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn outermost(&self) -> (f64, f64) {
        self.pairs[self.pairs.len() - 1]
    }
}
