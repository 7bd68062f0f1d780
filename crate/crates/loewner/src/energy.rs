//! Loewner energy ½∫ξ̇² of drivers and the energy minimizer for a finite
//! partition welding problem.
//!
//! The minimizer works on piecewise-linear upward drivers with uniform knots
//! on a fixed horizon T₀ ≥ (y_N − x_N)²/16. The objective
//! I(ξ_v) + μ Σ (φ(x_j) − y_j)² is a sum of squares, which is minimized by
//! Levenberg–Marquardt with finite-difference welding derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::driver::{make_piecewise_linear, Anchor, Driver, Orientation, PartitionWeldingProblem, Segment};
use crate::error::{invalid, Error, Result};
use crate::flow::{Flow, Side, StepPolicy, Terminal};
use crate::hitting::{hitting_profile, inverse_hitting, inverse_hitting_flow};
use crate::par;
use crate::tracer::{curve_distance, trace_curve, weld_pair_slit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// +∞ when some segment has a √ singularity.
    pub total: f64,
    pub per_segment: Vec<f64>,
}

impl EnergyReport {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// Energy of the part of `seg` on local times [0, p].
fn segment_energy(seg: &Segment, p: f64) -> f64 {
    let p = p.clamp(0.0, seg.duration());
    if p <= 0.0 {
        return 0.0;
    }
    match seg {
        Segment::Constant { .. } => 0.0,
        Segment::Linear { start, end, duration } => {
            let slope = (end - start) / duration;
            0.5 * slope * slope * p
        }
        Segment::SqrtCap { coeff, duration, anchor, .. } => {
            if *coeff == 0.0 {
                return 0.0;
            }
            match anchor {
                Anchor::Start => f64::INFINITY,
                // ½∫₀ᵖ C²/(4(D − s)) ds
                Anchor::End if p < *duration => 0.125 * coeff * coeff * (duration / (duration - p)).ln(),
                Anchor::End => f64::INFINITY,
            }
        }
        Segment::Sampled { points } => {
            let mut e = 0.0;
            for w in points.windows(2) {
                let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                if t0 >= p {
                    break;
                }
                let slope = (v1 - v0) / (t1 - t0);
                e += 0.5 * slope * slope * (t1.min(p) - t0);
            }
            e
        }
    }
}

pub fn loewner_energy(d: &Driver) -> EnergyReport {
    loewner_energy_until(d, d.horizon())
}

/// Energy of `d` restricted to [0, t].
pub fn loewner_energy_until(d: &Driver, t: f64) -> EnergyReport {
    let per_segment: Vec<f64> = d
        .segments()
        .iter()
        .zip(d.segment_starts())
        .map(|(seg, &s0)| segment_energy(seg, t - s0))
        .collect();
    EnergyReport { total: per_segment.iter().sum(), per_segment }
}

fn push(seg: &Segment, pts: &mut [Terminal], policy: &StepPolicy) -> Result<()> {
    let d = Driver::new(Orientation::Upward, vec![seg.clone()])?;
    let f = Flow::new(&d, policy)?;
    for p in pts.iter_mut() {
        if let Terminal::Alive(w) = *p {
            *p = f.run(w, f64::INFINITY, None);
        }
    }
    Ok(())
}

/// Welds the pairs one at a time, innermost first, each with a
/// piecewise-linear rendering of the tilted-slit block for the current
/// images, graded towards the block end where the exact driver has its √
/// singularity. A short hold after each block finishes the pair.
pub fn zipper_initializer(p: &PartitionWeldingProblem, steps_per_pair: usize) -> Result<Driver> {
    zipper_initializer_with(p, steps_per_pair, &StepPolicy::default())
}

pub fn zipper_initializer_with(
    p: &PartitionWeldingProblem,
    steps_per_pair: usize,
    policy: &StepPolicy,
) -> Result<Driver> {
    if steps_per_pair == 0 {
        return invalid("steps_per_pair must be positive");
    }
    let mut pts: Vec<Terminal> =
        p.pairs().iter().flat_map(|&(x, y)| [Terminal::Alive(x), Terminal::Alive(y)]).collect();
    let mut v = 0.0;
    let mut segments = Vec::new();
    for j in 0..p.len() {
        let (x, y) = match (pts[2 * j], pts[2 * j + 1]) {
            (Terminal::Alive(a), Terminal::Alive(b)) if a < v && v < b => (a, b),
            _ => return Err(Error::Construction(format!("pair {} collapsed before its block", j + 1))),
        };
        let slit = weld_pair_slit(x - v, y - v)?;
        let k = steps_per_pair;
        let knot = |i: usize| {
            let u = 1.0 - i as f64 / k as f64;
            let t = slit.time * (1.0 - u * u);
            (t, v + slit.driver_value(t))
        };
        let mut block = Vec::with_capacity(k + 1);
        for i in 0..k {
            let ((t0, v0), (t1, v1)) = (knot(i), knot(i + 1));
            block.push(Segment::Linear { start: v0, end: v1, duration: t1 - t0 });
        }
        for seg in &block {
            push(seg, &mut pts, policy)?;
        }
        v = knot(k).1;
        let reach = |t: Terminal| match t {
            Terminal::Alive(w) => 0.25 * (w - v) * (w - v),
            Terminal::Welded(_) => 0.0,
        };
        let hold = reach(pts[2 * j]).max(reach(pts[2 * j + 1]));
        if hold > 0.0 {
            let seg = Segment::Constant { value: v, duration: hold * (1.0 + 1e-12) };
            push(&seg, &mut pts, policy)?;
            block.push(seg);
        }
        segments.extend(block);
    }
    Driver::new(Orientation::Upward, segments)
}

/// |φ(x_j) − y_j| per pair, with φ(x_j) found by re-evolution. Pairs whose
/// left point is not welded get the residual y_j − x_j.
pub fn welding_residuals(d: &Driver, p: &PartitionWeldingProblem, policy: &StepPolicy) -> Result<Vec<f64>> {
    let flow = Flow::new(d, policy)?;
    let rows = par::map(p.pairs(), |&(x, y)| match flow.hitting_time(x) {
        Ok(Some(t)) if t > 0.0 => inverse_hitting_flow(&flow, t, Side::Right).map(|phi| phi - y),
        Ok(_) => Ok(y - x),
        Err(e) => Err(e),
    });
    rows.into_iter().map(|r| r.map(f64::abs)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationConfig {
    /// Knot intervals; 8N when absent.
    pub knots: Option<usize>,
    pub mu_schedule: Vec<f64>,
    /// Cap on Levenberg–Marquardt iterations over all penalty levels.
    pub max_iterations: usize,
    /// Required |φ(x_j) − y_j|.
    pub tolerance: f64,
    pub steps_per_pair: usize,
    pub policy: StepPolicy,
}

impl Default for MinimizationConfig {
    fn default() -> Self {
        MinimizationConfig {
            knots: None,
            mu_schedule: vec![10.0, 1e2, 1e3, 1e4],
            max_iterations: 200,
            tolerance: 1e-3,
            steps_per_pair: 64,
            policy: StepPolicy::default().with_base_step(2e-4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationResult {
    pub problem: PartitionWeldingProblem,
    /// Piecewise-linear upward driver with knots on [0, T₀], held constant up
    /// to 2T₀.
    pub driver: Driver,
    /// Energy on [0, τ(x_N)].
    pub energy: f64,
    /// Energy of the zipper initializer.
    pub initial_energy: f64,
    /// τ(x_N) under the minimizer.
    pub weld_time: f64,
    /// Verified on a fresh hitting profile.
    pub welding_residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_mu: f64,
}

/// Horizon of the evaluated drivers, in units of T₀.
const EXTENSION: f64 = 2.0;

struct Objective<'a> {
    problem: &'a PartitionWeldingProblem,
    times: Vec<f64>,
    policy: StepPolicy,
}

impl Objective<'_> {
    /// The knot driver followed by a free constant hold, so that pairs welded
    /// after T₀ at infeasible iterates still give smooth residuals.
    fn driver(&self, v: &[f64]) -> Result<Driver> {
        let mut knots: Vec<(f64, f64)> =
            self.times.iter().zip(std::iter::once(&0.0).chain(v)).map(|(&t, &x)| (t, x)).collect();
        let (t_end, v_end) = knots[knots.len() - 1];
        knots.push((EXTENSION * t_end, v_end));
        make_piecewise_linear(&knots)
    }

    /// φ(x_j) − y_j, plus the last welding time.
    fn welding(&self, v: &[f64]) -> Result<(Vec<f64>, f64)> {
        let d = self.driver(v)?;
        let flow = Flow::new(&d, &self.policy)?;
        let mut out = Vec::with_capacity(self.problem.len());
        let mut last = 0.0;
        for &(x, y) in self.problem.pairs() {
            match flow.hitting_time(x)? {
                Some(t) if t > 0.0 => {
                    out.push(inverse_hitting_flow(&flow, t, Side::Right)? - y);
                    last = t;
                }
                _ => {
                    out.push(y - x);
                    last = flow.horizon();
                }
            }
        }
        Ok((out, last))
    }

    fn residuals(&self, v: &[f64], mu: f64) -> Result<(DVector<f64>, f64)> {
        let m = v.len();
        let n = self.problem.len();
        let mut r = DVector::zeros(m + n);
        let mut prev = 0.0;
        for i in 0..m {
            let dt = self.times[i + 1] - self.times[i];
            r[i] = (v[i] - prev) / (2.0 * dt).sqrt();
            prev = v[i];
        }
        let (w, last) = self.welding(v)?;
        for j in 0..n {
            r[m + j] = mu.sqrt() * w[j];
        }
        Ok((r, last))
    }

    fn jacobian(&self, v: &[f64], r: &DVector<f64>, last: f64, mu: f64) -> Result<DMatrix<f64>> {
        let m = v.len();
        let n = self.problem.len();
        let mut j = DMatrix::zeros(m + n, m);
        for i in 0..m {
            let c = 1.0 / (2.0 * (self.times[i + 1] - self.times[i])).sqrt();
            j[(i, i)] = c;
            if i + 1 < m {
                j[(i + 1, i)] = -c;
            }
        }
        // Knots beyond the last welding time do not move any φ(x_j).
        let active: Vec<usize> = (0..m).filter(|&i| self.times[i] <= last).collect();
        let h = 1e-6;
        let cols = par::map(&active, |&i| {
            let mut w = v.to_vec();
            w[i] += h;
            self.welding(&w).map(|(f, _)| f)
        });
        for (&i, col) in active.iter().zip(cols) {
            let col = col?;
            for k in 0..n {
                j[(m + k, i)] = mu.sqrt() * (col[k] - r[m + k] / mu.sqrt()) / h;
            }
        }
        Ok(j)
    }
}

/// Minimizes the Loewner energy over drivers welding every pair of `p`,
/// starting from the zipper initializer.
pub fn minimize_energy(p: &PartitionWeldingProblem, config: &MinimizationConfig) -> Result<MinimizationResult> {
    if config.mu_schedule.is_empty() || config.mu_schedule.iter().any(|&m| !(m > 0.0)) {
        return invalid("penalty schedule must be non-empty and positive");
    }
    if !(config.tolerance > 0.0) {
        return invalid("tolerance must be positive");
    }
    let policy = config.policy;
    let init = zipper_initializer_with(p, config.steps_per_pair, &policy)?;
    let initial_energy = loewner_energy(&init).total;
    let (xn, yn) = p.outermost();
    let horizon = ((yn - xn).powi(2) / 16.0).max(init.horizon()) * (1.0 + 1e-6);
    let m = config.knots.unwrap_or(8 * p.len()).max(2);
    let times: Vec<f64> = (0..=m).map(|i| horizon * i as f64 / m as f64).collect();
    let obj = Objective { problem: p, times, policy };
    let mut v: Vec<f64> = obj.times[1..].iter().map(|&t| init.eval(t.min(init.horizon()))).collect();

    let mut iterations = 0;
    let mut final_mu = config.mu_schedule[0];
    'levels: for &mu in &config.mu_schedule {
        final_mu = mu;
        let (mut r, mut last) = obj.residuals(&v, mu)?;
        let mut f = r.norm_squared();
        let mut lambda = 1e-3;
        while iterations < config.max_iterations {
            iterations += 1;
            let j = obj.jacobian(&v, &r, last, mu)?;
            let jt = j.transpose();
            let a = &jt * &j;
            let g = &jt * &r;
            let mut improved = false;
            for _ in 0..12 {
                let mut lhs = a.clone();
                for i in 0..m {
                    lhs[(i, i)] += lambda * (a[(i, i)] + 1e-12);
                }
                let Some(step) = lhs.cholesky().map(|c| c.solve(&(-&g))) else {
                    lambda *= 4.0;
                    continue;
                };
                let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                if let Ok((rt, lt)) = obj.residuals(&trial, mu) {
                    let ft = rt.norm_squared();
                    if ft < f {
                        let gain = (f - ft) / f.max(1e-300);
                        v = trial;
                        r = rt;
                        last = lt;
                        f = ft;
                        lambda = (lambda / 3.0).max(1e-12);
                        improved = gain > 1e-10;
                        break;
                    }
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        let worst = r.rows(m, p.len()).amax() / mu.sqrt();
        if worst <= 0.5 * config.tolerance || iterations >= config.max_iterations {
            break 'levels;
        }
    }

    let driver = obj.driver(&v)?;
    // Independent check on a fresh profile with a finer step.
    let check = policy.with_base_step(0.5 * policy.base_step);
    let profile = hitting_profile(&driver, 64, &check)?;
    let mut residuals = Vec::with_capacity(p.len());
    let mut weld_time = 0.0;
    for &(x, y) in p.pairs() {
        match profile.flow().hitting_time(x)? {
            Some(t) if t > 0.0 => {
                residuals.push((inverse_hitting(&profile, t, Side::Right)? - y).abs());
                weld_time = t;
            }
            _ => {
                residuals.push(y - x);
                weld_time = driver.horizon();
            }
        }
    }
    let converged = residuals.iter().all(|&r| r <= config.tolerance);
    Ok(MinimizationResult {
        problem: p.clone(),
        energy: loewner_energy_until(&driver, weld_time).total,
        driver,
        initial_energy,
        weld_time,
        welding_residuals: residuals,
        converged,
        iterations,
        final_mu,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub pairs: usize,
    pub energy: f64,
    pub source_energy: f64,
    pub curve_distance: f64,
    pub max_residual: f64,
    pub converged: bool,
}

/// Piecewise-linear driver cut at time t.
fn truncate_pl(d: &Driver, t: f64) -> Result<Driver> {
    let mut knots = vec![(0.0, d.initial_value())];
    for (&s0, seg) in d.segment_starts().iter().zip(d.segments()) {
        let s1 = s0 + seg.duration();
        if s1 < t {
            knots.push((s1, seg.end_value()));
        } else {
            knots.push((t, d.eval(t)));
            break;
        }
    }
    make_piecewise_linear(&knots)
}

/// For each N, welds the source's pairs at τ-levels kT/N, minimizes, and
/// compares energies and traced curves with the source. The source must
/// start at 0.
pub fn partition_refinement_experiment(
    source: &Driver,
    depths: &[usize],
    config: &MinimizationConfig,
    trace_steps: usize,
) -> Result<Vec<RefinementRow>> {
    if source.initial_value() != 0.0 {
        return invalid("the source driver must start at 0");
    }
    let profile = hitting_profile(source, 64, &config.policy)?;
    let horizon = profile.horizon();
    let source_energy = loewner_energy(source).total;
    let source_curve = trace_curve(source, trace_steps)?;
    let mut rows = Vec::with_capacity(depths.len());
    for &n in depths {
        if n == 0 {
            return invalid("partition sizes must be positive");
        }
        let mut pairs = Vec::with_capacity(n);
        for k in 1..=n {
            let t = horizon * k as f64 / n as f64;
            pairs.push((inverse_hitting(&profile, t, Side::Left)?, inverse_hitting(&profile, t, Side::Right)?));
        }
        let problem = PartitionWeldingProblem::new(pairs)?;
        let res = minimize_energy(&problem, config)?;
        let cut = truncate_pl(&res.driver, res.weld_time)?;
        let curve = trace_curve(&cut, trace_steps)?;
        rows.push(RefinementRow {
            pairs: n,
            energy: res.energy,
            source_energy,
            curve_distance: curve_distance(&curve, &source_curve),
            max_residual: res.welding_residuals.iter().copied().fold(0.0, f64::max),
            converged: res.converged,
        });
    }
    Ok(rows)
}
