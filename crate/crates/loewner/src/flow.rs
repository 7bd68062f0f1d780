//! Upward Loewner flow of boundary and interior points.
//!
//! The driver is replaced by its midpoint value on each step and the exact
//! constant-driver map w ↦ c ± √((w − c)² − 4Δt) is applied, so hits are
//! detected exactly inside a step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::driver::{Anchor, Driver, Orientation, Segment};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    /// Largest plan step Δt.
    pub base_step: f64,
    /// Bisection depth used to resolve a hit (and for adaptive splitting).
    pub near_hit_refinement: u32,
    /// RK4 step of the oracle integrator.
    pub oracle_step: f64,
    /// Every segment gets at least this many steps, however short it is.
    pub min_segment_steps: usize,
    /// A step is split while the driver moves more than this fraction of the
    /// point's distance to it within the step.
    pub adapt_ratio: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            base_step: 1e-4,
            near_hit_refinement: 20,
            oracle_step: 1e-5,
            min_segment_steps: 8,
            adapt_ratio: 0.1,
        }
    }
}

impl StepPolicy {
    pub fn with_base_step(mut self, h: f64) -> Self {
        self.base_step = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_step > 0.0 && self.oracle_step > 0.0 && self.adapt_ratio > 0.0) {
            return invalid("step sizes and adapt ratio must be positive");
        }
        if self.min_segment_steps == 0 {
            return invalid("min_segment_steps must be at least 1");
        }
        Ok(())
    }
}

/// Which side of the driver a boundary point lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step<P> {
    Moved(P),
    /// Hit after this much time (relative for [`step_constant`], absolute elsewhere).
    Hit(f64),
}

/// One exact step of the constant-driver flow for a real point.
pub fn step_constant(w: f64, c: f64, dt: f64) -> Result<Step<f64>> {
    if !(dt > 0.0) {
        return invalid("dt must be positive");
    }
    if w == c {
        return invalid("point already sits on the driver");
    }
    Ok(step_raw(w, c, dt))
}

#[inline]
fn step_raw(w: f64, c: f64, dt: f64) -> Step<f64> {
    let g = w - c;
    let q = g * g - 4.0 * dt;
    if q <= 0.0 {
        Step::Hit(0.25 * g * g)
    } else {
        Step::Moved(c + q.sqrt().copysign(g))
    }
}

/// Square root of `q` in the closed upper half-plane; on the positive real
/// axis the sign follows `hint_re`.
#[inline]
pub(crate) fn upper_sqrt(q: Complex64, hint_re: f64) -> Complex64 {
    let mut s = q.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re * hint_re < 0.0) {
        s = -s;
    }
    s
}

/// One exact step of the constant-driver flow for a point in the closed
/// upper half-plane.
#[inline]
pub fn step_interior(z: Complex64, c: f64, dt: f64) -> Complex64 {
    let g = z - c;
    c + upper_sqrt(g * g - 4.0 * dt, g.re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanStep {
    pub t0: f64,
    /// Segment index and segment-local start time; refinement evaluates the
    /// driver in local time so results do not depend on where a segment sits.
    pub seg: usize,
    pub s0: f64,
    pub dt: f64,
    /// Driver value at the step midpoint.
    pub c: f64,
    pub v0: f64,
    pub v1: f64,
}

/// Time grid aligned with segment boundaries; √ segments are graded towards
/// their singular end so the driver increments stay uniform there.
#[derive(Debug, Clone)]
pub struct StepPlan {
    steps: Vec<PlanStep>,
}

impl StepPlan {
    pub fn new(d: &Driver, policy: &StepPolicy) -> Self {
        Self::build(d, policy.base_step, policy.min_segment_steps)
    }

    /// Plan with roughly `n` steps in total, at least one per segment.
    pub fn with_total(d: &Driver, n: usize) -> Self {
        Self::build(d, d.horizon() / n.max(1) as f64, 1)
    }

    fn build(d: &Driver, target: f64, min_steps: usize) -> Self {
        let mut steps = Vec::new();
        for (k, (seg, &t_start)) in d.segments().iter().zip(d.segment_starts()).enumerate() {
            let grid = segment_grid(seg, target, min_steps);
            let mut prev = seg.eval(grid[0]);
            for w in grid.windows(2) {
                let (s0, s1) = (w[0], w[1]);
                let v1 = seg.eval(s1);
                steps.push(PlanStep {
                    t0: t_start + s0,
                    seg: k,
                    s0,
                    dt: s1 - s0,
                    c: seg.eval(0.5 * (s0 + s1)),
                    v0: prev,
                    v1,
                });
                prev = v1;
            }
        }
        StepPlan { steps }
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Index of the step containing `t`.
    pub fn locate(&self, t: f64) -> usize {
        self.steps.partition_point(|s| s.t0 <= t).saturating_sub(1)
    }
}

fn segment_grid(seg: &Segment, target: f64, min_steps: usize) -> Vec<f64> {
    let d = seg.duration();
    let count = |len: f64, min: usize| ((len / target).ceil() as usize).max(min).max(1);
    match seg {
        Segment::Sampled { points } => {
            let mut out = vec![0.0];
            for w in points.windows(2) {
                let (a, b) = (w[0].0, w[1].0);
                let k = count(b - a, 1);
                for i in 1..=k {
                    out.push(if i == k { b } else { a + (b - a) * i as f64 / k as f64 });
                }
            }
            out
        }
        Segment::SqrtCap { anchor, .. } => {
            let n = count(d, min_steps);
            (0..=n)
                .map(|i| {
                    let u = i as f64 / n as f64;
                    match anchor {
                        Anchor::Start => d * u * u,
                        Anchor::End => d * (1.0 - (1.0 - u) * (1.0 - u)),
                    }
                })
                .collect()
        }
        _ => {
            let n = count(d, min_steps);
            (0..=n).map(|i| if i == n { d } else { d * i as f64 / n as f64 }).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Status {
    AliveAtHorizon,
    Welded(f64),
}

impl Status {
    pub fn tau(&self) -> Option<f64> {
        match self {
            Status::Welded(t) => Some(*t),
            Status::AliveAtHorizon => None,
        }
    }
}

/// t ↦ x(t) for one boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrajectory {
    pub x0: f64,
    pub samples: Vec<(f64, f64)>,
    pub status: Status,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal {
    Welded(f64),
    /// Still alive; position at the end of the last step taken.
    Alive(f64),
}

/// A driver bound to a step plan, ready to evolve many points.
#[derive(Debug, Clone)]
pub struct Flow {
    driver: Driver,
    policy: StepPolicy,
    plan: StepPlan,
}

impl Flow {
    pub fn new(d: &Driver, policy: &StepPolicy) -> Result<Self> {
        policy.validate()?;
        if d.orientation() != Orientation::Upward {
            return invalid("the flow needs an upward driver; reverse it first");
        }
        Ok(Flow { driver: d.clone(), policy: *policy, plan: StepPlan::new(d, policy) })
    }

    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    pub fn policy(&self) -> &StepPolicy {
        &self.policy
    }

    pub fn plan(&self) -> &StepPlan {
        &self.plan
    }

    pub fn horizon(&self) -> f64 {
        self.driver.horizon()
    }

    pub fn origin(&self) -> f64 {
        self.driver.initial_value()
    }

    fn check_start(&self, x0: f64) -> Result<()> {
        if !x0.is_finite() {
            return invalid("start point must be finite");
        }
        if x0 == self.origin() {
            return invalid(format!("start point {x0} coincides with the driver's initial value"));
        }
        Ok(())
    }

    /// Runs `x0` until it is welded or the first step starting at or after `t_stop`.
    pub fn run(&self, x0: f64, t_stop: f64, mut rec: Option<&mut Vec<(f64, f64)>>) -> Terminal {
        let mut w = x0;
        let side = (x0 - self.origin()).signum();
        for st in &self.plan.steps {
            if st.t0 >= t_stop {
                break;
            }
            let seg = &self.driver.segments()[st.seg];
            match self.advance(seg, side, w, st.s0, st.dt, st.c, st.v0, st.v1, 0) {
                Step::Moved(w1) => {
                    w = w1;
                    if let Some(r) = rec.as_deref_mut() {
                        r.push((st.t0 + st.dt, w));
                    }
                }
                Step::Hit(s) => {
                    return Terminal::Welded(self.driver.segment_starts()[st.seg] + s);
                }
            }
        }
        Terminal::Alive(w)
    }

    #[allow(clippy::too_many_arguments)]
    fn advance(&self, seg: &Segment, side: f64, w: f64, t0: f64, dt: f64, c: f64, v0: f64, v1: f64, level: u32) -> Step<f64> {
        let deep_enough = level >= self.policy.near_hit_refinement;
        // Points never cross the driver; a frozen value that jumped past one
        // means it was hit in between.
        if (w - c) * side <= 0.0 {
            return if deep_enough { Step::Hit(t0) } else { self.split(seg, side, w, t0, dt, c, v0, v1, level) };
        }
        let dv = (v0 - c).abs().max((v1 - c).abs());
        let r = self.policy.adapt_ratio;
        if !deep_enough && dv > r * (w - c).abs() {
            return self.split(seg, side, w, t0, dt, c, v0, v1, level);
        }
        match step_raw(w, c, dt) {
            // Near a miss, (w1 − c)² inherits the error |w − c|·dv of the frozen value.
            Step::Moved(w1) if !deep_enough && dv * (w - c).abs() > r * (w1 - c) * (w1 - c) => {
                self.split(seg, side, w, t0, dt, c, v0, v1, level)
            }
            Step::Moved(w1) => Step::Moved(w1),
            Step::Hit(s) if deep_enough => Step::Hit(t0 + s),
            Step::Hit(_) => self.split(seg, side, w, t0, dt, c, v0, v1, level),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn split(&self, seg: &Segment, side: f64, w: f64, t0: f64, dt: f64, c: f64, v0: f64, v1: f64, level: u32) -> Step<f64> {
        let h = 0.5 * dt;
        let cl = seg.eval(t0 + 0.5 * h);
        match self.advance(seg, side, w, t0, h, cl, v0, c, level + 1) {
            Step::Hit(t) => Step::Hit(t),
            Step::Moved(w1) => {
                let cr = seg.eval(t0 + 1.5 * h);
                self.advance(seg, side, w1, t0 + h, h, cr, c, v1, level + 1)
            }
        }
    }

    /// τ(x0), or `None` when the point outlives the horizon.
    pub fn hitting_time(&self, x0: f64) -> Result<Option<f64>> {
        self.check_start(x0)?;
        Ok(match self.run(x0, f64::INFINITY, None) {
            Terminal::Welded(t) => Some(t),
            Terminal::Alive(_) => None,
        })
    }

    /// Whether τ(x0) ≤ t. The initial driver value counts as welded at 0.
    pub fn welded_by(&self, x0: f64, t: f64) -> bool {
        if x0 == self.origin() {
            return true;
        }
        match self.run(x0, t, None) {
            Terminal::Welded(th) => th <= t,
            Terminal::Alive(_) => false,
        }
    }

    /// Position at the horizon, or the hitting time.
    pub fn endpoint(&self, x0: f64) -> Terminal {
        self.run(x0, f64::INFINITY, None)
    }

    pub fn evolve(&self, x0: f64) -> Result<BoundaryTrajectory> {
        self.check_start(x0)?;
        let mut samples = Vec::with_capacity(self.plan.len() + 2);
        samples.push((0.0, x0));
        let status = match self.run(x0, f64::INFINITY, Some(&mut samples)) {
            Terminal::Welded(t) => {
                samples.push((t, self.driver.eval(t)));
                Status::Welded(t)
            }
            Terminal::Alive(_) => Status::AliveAtHorizon,
        };
        Ok(BoundaryTrajectory { x0, samples, status })
    }

    /// Start point that the discrete flow welds at time `t` on `side`, found by
    /// running the exact step maps backwards through the same refinement the
    /// forward run would use. Refinement decisions are taken from the image
    /// rather than the pre-image, so this is an excellent guess, not a proof.
    pub fn backward_guess(&self, t: f64, side: Side) -> f64 {
        let sign = side.sign();
        let t = t.clamp(0.0, self.horizon());
        let mut k = self.plan.locate(t);
        // A hit exactly on a step boundary ends the earlier step.
        if k > 0 && t <= self.plan.steps[k].t0 {
            k -= 1;
        }
        let st = self.plan.steps[k];
        let segs = self.driver.segments();
        let local = (t - st.t0).clamp(0.0, st.dt) + st.s0;
        let mut w = self.back_hit(&segs[st.seg], local, st.s0, st.dt, st.c, st.v0, 0, sign);
        for st in self.plan.steps[..k].iter().rev() {
            w = self.back_step(&segs[st.seg], w, st.s0, st.dt, st.c, st.v0, st.v1, 0, sign);
        }
        w
    }

    #[allow(clippy::too_many_arguments)]
    fn back_step(&self, seg: &Segment, w: f64, t0: f64, dt: f64, c: f64, v0: f64, v1: f64, level: u32, sign: f64) -> f64 {
        let g = w - c;
        let w0 = c + sign * (g * g + 4.0 * dt).sqrt();
        if level < self.policy.near_hit_refinement {
            // The forward splitting tests, evaluated on both ends of the step.
            let dv = (v0 - c).abs().max((v1 - c).abs());
            let r = self.policy.adapt_ratio;
            if dv > r * (w0 - c).abs() || dv * (w0 - c).abs() > r * g * g {
                let h = 0.5 * dt;
                let cl = seg.eval(t0 + 0.5 * h);
                let cr = seg.eval(t0 + 1.5 * h);
                let wm = self.back_step(seg, w, t0 + h, h, cr, c, v1, level + 1, sign);
                return self.back_step(seg, wm, t0, h, cl, v0, c, level + 1, sign);
            }
        }
        w0
    }

    #[allow(clippy::too_many_arguments)]
    fn back_hit(&self, seg: &Segment, t: f64, t0: f64, dt: f64, c: f64, v0: f64, level: u32, sign: f64) -> f64 {
        if level >= self.policy.near_hit_refinement {
            return c + sign * 2.0 * (t - t0).max(0.0).sqrt();
        }
        let h = 0.5 * dt;
        let cl = seg.eval(t0 + 0.5 * h);
        if t <= t0 + h {
            return self.back_hit(seg, t, t0, h, cl, v0, level + 1, sign);
        }
        let cr = seg.eval(t0 + 1.5 * h);
        let wm = self.back_hit(seg, t, t0 + h, h, cr, c, level + 1, sign);
        self.back_step(seg, wm, t0, h, cl, v0, c, level + 1, sign)
    }
}

/// Evolves a boundary point with the exact stepper.
pub fn evolve_point(d: &Driver, x0: f64, policy: &StepPolicy) -> Result<BoundaryTrajectory> {
    Flow::new(d, policy)?.evolve(x0)
}

/// Evolves an interior point over the full horizon.
pub fn evolve_interior(d: &Driver, z0: Complex64, policy: &StepPolicy) -> Result<Vec<(f64, Complex64)>> {
    policy.validate()?;
    if !(z0.im > 0.0) {
        return invalid("interior point must have positive imaginary part");
    }
    if d.orientation() != Orientation::Upward {
        return invalid("the flow needs an upward driver; reverse it first");
    }
    let plan = StepPlan::new(d, policy);
    let mut out = Vec::with_capacity(plan.len() + 1);
    let mut z = z0;
    out.push((0.0, z));
    for st in plan.steps() {
        z = step_interior(z, st.c, st.dt);
        out.push((st.t0 + st.dt, z));
    }
    Ok(out)
}

/// Classical RK4 on ẋ = −2/(x − ξ(t)); once |x − ξ| < 10√h the remaining time
/// is taken from the constant-driver formula.
pub fn rk4_oracle(d: &Driver, x0: f64, h: f64) -> Result<BoundaryTrajectory> {
    if !(h > 0.0) {
        return invalid("oracle step must be positive");
    }
    if d.orientation() != Orientation::Upward {
        return invalid("the flow needs an upward driver; reverse it first");
    }
    if x0 == d.initial_value() {
        return Err(Error::InvalidInput(format!("start point {x0} coincides with the driver's initial value")));
    }
    let horizon = d.horizon();
    let f = |t: f64, x: f64| -2.0 / (x - d.eval(t));
    let near = 10.0 * h.sqrt();
    let (mut t, mut x) = (0.0, x0);
    let mut samples = vec![(t, x)];
    loop {
        let g = x - d.eval(t);
        if g.abs() < near {
            let tau = t + 0.25 * g * g;
            if tau <= horizon {
                samples.push((tau, d.eval(tau)));
                return Ok(BoundaryTrajectory { x0, samples, status: Status::Welded(tau) });
            }
        }
        if t >= horizon {
            return Ok(BoundaryTrajectory { x0, samples, status: Status::AliveAtHorizon });
        }
        let step = h.min(horizon - t);
        let k1 = f(t, x);
        let k2 = f(t + 0.5 * step, x + 0.5 * step * k1);
        let k3 = f(t + 0.5 * step, x + 0.5 * step * k2);
        let k4 = f(t + step, x + step * k3);
        x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = if horizon - t <= h { horizon } else { t + step };
        samples.push((t, x));
    }
}
