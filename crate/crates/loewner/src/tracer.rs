//! Curves generated by upward drivers, via composition of vertical slit maps,
//! and the explicit tilted slit map.
//!
//! With plan steps j = 1..N (driver value c_j, length Δt_j) the upward map is
//! h_T = φ_N ∘ … ∘ φ_1, where φ_j(w) = c_j + √((w − c_j)² − 4Δt_j). The curve
//! runs from its base ξ(T) on ℝ to the tip h_T(ξ(0)); its k-th point is the
//! tip of the slit of step N − k + 1 pushed through the later maps, i.e. the
//! tip of the hull generated by the last k steps.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::driver::{make_sqrt_slit, reverse, slit_drift, Driver, Orientation};
use crate::error::{invalid, Result};
use crate::flow::{step_interior, StepPlan};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// From the base (on ℝ) to the tip.
    pub points: Vec<Complex64>,
    /// Half the half-plane capacity of the piece from the base to each point.
    pub capacity_times: Vec<f64>,
    pub base: f64,
}

impl Curve {
    pub fn tip(&self) -> Complex64 {
        self.points[self.points.len() - 1]
    }

    pub fn horizon(&self) -> f64 {
        self.capacity_times[self.capacity_times.len() - 1]
    }

    /// Point at capacity time `t`, interpolated linearly and clamped.
    pub fn at(&self, t: f64) -> Complex64 {
        let ts = &self.capacity_times;
        let t = t.clamp(0.0, self.horizon());
        let i = ts.partition_point(|&s| s <= t);
        if i == 0 {
            return self.points[0];
        }
        if i >= ts.len() {
            return self.tip();
        }
        let f = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
        self.points[i - 1] + (self.points[i] - self.points[i - 1]) * f
    }
}

/// Traces the curve of `d` with about `n_steps` steps, graded towards √
/// singularities like the flow plan.
pub fn trace_curve(d: &Driver, n_steps: usize) -> Result<Curve> {
    if n_steps == 0 {
        return invalid("need at least one step");
    }
    if d.orientation() != Orientation::Upward {
        return invalid("tracing needs an upward driver; reverse it first");
    }
    let plan = StepPlan::with_total(d, n_steps);
    let steps = plan.steps();
    let n = steps.len();
    let tips: Vec<Complex64> = par::map_range(n, |k| {
        // Slit of step j = n − 1 − k (0-based), then maps j + 1 .. n − 1.
        let j = n - 1 - k;
        let st = &steps[j];
        let mut z = Complex64::new(st.c, 2.0 * st.dt.sqrt());
        for s in &steps[j + 1..] {
            z = step_interior(z, s.c, s.dt);
        }
        z
    });
    let base = d.final_value();
    let mut points = Vec::with_capacity(n + 1);
    points.push(Complex64::new(base, 0.0));
    points.extend(tips);
    let mut capacity_times = Vec::with_capacity(n + 1);
    capacity_times.push(0.0);
    let mut acc = 0.0;
    for st in steps.iter().rev() {
        acc += st.dt;
        capacity_times.push(acc);
    }
    Ok(Curve { points, capacity_times, base })
}

/// F(z) = (z − b)^α (z + a)^{1−α}, mapping ℍ onto ℍ minus a segment from 0 at
/// angle απ, with [−a, b] welded onto the segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltedSlit {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    /// Half-plane capacity of the segment.
    pub hcap: f64,
    /// Capacity time hcap/2.
    pub time: f64,
    /// Constant term of F at ∞: F(z) = z + drift − 1/(2z) + …
    pub drift: f64,
}

impl TiltedSlit {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let p = |w: Complex64, e: f64| -> Complex64 {
            if w.norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            // Argument in [0, π] for w in the closed upper half-plane.
            let arg = if w.im == 0.0 && w.re < 0.0 { std::f64::consts::PI } else { w.arg() };
            Complex64::from_polar(w.norm().powf(e), arg * e)
        };
        p(z - self.b, self.alpha) * p(z + self.a, 1.0 - self.alpha)
    }

    /// The segment tip F(0).
    pub fn tip(&self) -> Complex64 {
        self.eval(Complex64::new(0.0, 0.0))
    }

    /// The point of (0, b] welded to x ∈ [−a, 0), found from |F(x)| = |F(φ(x))|.
    pub fn weld(&self, x: f64) -> f64 {
        let r = |t: f64| (t - self.b).abs().powf(self.alpha) * (t + self.a).abs().powf(1.0 - self.alpha);
        let target = r(x);
        // |F| decreases from the tip modulus at 0 to 0 at b.
        let (mut lo, mut hi) = (0.0, self.b);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if r(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

pub fn tilted_slit_map(alpha: f64) -> Result<TiltedSlit> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let b = (alpha / (1.0 - alpha)).sqrt();
    Ok(TiltedSlit { alpha, a: 1.0 / b, b, hcap: 0.5, time: 0.25, drift: slit_drift(alpha) })
}

/// The tilted slit, scaled by `scale`, that welds exactly x to y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSlit {
    pub alpha: f64,
    pub scale: f64,
    pub map: TiltedSlit,
    /// scale²/4, the time at which the pair is welded.
    pub time: f64,
}

impl PairSlit {
    /// The exact upward driver, starting at 0.
    pub fn driver(&self) -> Result<Driver> {
        Ok(reverse(&make_sqrt_slit(self.alpha, self.time)?))
    }

    /// Value of the exact upward driver at time t ∈ [0, time].
    pub fn driver_value(&self, t: f64) -> f64 {
        let c = 2.0 * self.map.drift;
        c * ((self.time - t).max(0.0).sqrt() - self.time.sqrt())
    }
}

/// b/a = α/(1 − α) = y/|x| gives α = y/(y − x); then scale·b = y.
pub fn weld_pair_slit(x: f64, y: f64) -> Result<PairSlit> {
    if !(x < 0.0 && y > 0.0) || !(x.is_finite() && y.is_finite()) {
        return invalid(format!("need x < 0 < y, got ({x}, {y})"));
    }
    let alpha = y / (y - x);
    let map = tilted_slit_map(alpha)?;
    let scale = y / map.b;
    Ok(PairSlit { alpha, scale, map, time: 0.25 * scale * scale })
}

/// sup over matched capacity times of |z₁(t) − z₂(t)|, on the common range.
pub fn curve_distance(c1: &Curve, c2: &Curve) -> f64 {
    let h = c1.horizon().min(c2.horizon());
    let ts = c1.capacity_times.iter().chain(&c2.capacity_times).copied().filter(|&t| t <= h);
    ts.chain([h]).map(|t| (c1.at(t) - c2.at(t)).norm()).fold(0.0, f64::max)
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn on_segment(a: Complex64, b: Complex64, p: Complex64) -> bool {
    p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Pairs of non-adjacent polyline segments that intersect.
pub fn self_intersections(c: &Curve) -> Vec<(usize, usize)> {
    let p = &c.points;
    if p.len() < 4 {
        return Vec::new();
    }
    let m = p.len() - 1;
    let total: f64 = (0..m).map(|i| (p[i + 1] - p[i]).norm()).sum();
    let cell = (total / m as f64).max(1e-300) * 4.0;
    let key = |x: f64| (x / cell).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..m {
        let (a, b) = (p[i], p[i + 1]);
        for gx in key(a.re.min(b.re))..=key(a.re.max(b.re)) {
            for gy in key(a.im.min(b.im))..=key(a.im.max(b.im)) {
                grid.entry((gx, gy)).or_default().push(i);
            }
        }
    }
    let mut hits = Vec::new();
    for bucket in grid.values() {
        for (u, &i) in bucket.iter().enumerate() {
            for &j in &bucket[u + 1..] {
                let (i, j) = if i < j { (i, j) } else { (j, i) };
                if j - i >= 2 && segments_cross(p[i], p[i + 1], p[j], p[j + 1]) {
                    hits.push((i, j));
                }
            }
        }
    }
    hits.sort_unstable();
    hits.dedup();
    hits
}

pub fn is_simple(c: &Curve) -> bool {
    self_intersections(c).is_empty()
}

/// Max distance from the curve points to the line through the base at angle θ.
pub fn line_deviation(c: &Curve, theta: f64) -> f64 {
    let dir = Complex64::from_polar(1.0, theta);
    c.points.iter().map(|&z| ((z - c.base) * dir.conj()).im.abs()).fold(0.0, f64::max)
}
