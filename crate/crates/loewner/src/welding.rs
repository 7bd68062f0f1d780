//! Conformal weldings φ = τ₊⁻¹ ∘ τ₋ and driver perturbation experiments.
//!
//! Weldings are stored in the driver's own coordinates, so a constant driver c
//! gives φ(x) = 2c − x; [`Welding::centered`] shifts ξ(0) to the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{add_sampled, sup_distance, Driver};
use crate::error::{Error, Result};
use crate::flow::{Side, StepPolicy};
use crate::hitting::{hitting_profile, inverse_hitting, X_TOL};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeldSample {
    pub x: f64,
    pub phi: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Welding {
    /// Ordered by increasing x, from the left endpoint to ξ(0).
    pub samples: Vec<WeldSample>,
    pub origin: f64,
    pub left_end: f64,
    pub right_end: f64,
    pub horizon: f64,
    /// max |τ₋(x) − τ₊(φ(x))| over the samples.
    pub max_residual: f64,
}

impl Welding {
    /// Samples shifted so that ξ(0) sits at 0.
    pub fn centered(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.x - self.origin, s.phi - self.origin)).collect()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.left_end, self.origin)
    }

    /// φ by linear interpolation, clamped to the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let s = &self.samples;
        let x = x.clamp(s[0].x, s[s.len() - 1].x);
        let i = s.partition_point(|p| p.x <= x);
        if i == 0 {
            return s[0].phi;
        }
        if i >= s.len() {
            return s[s.len() - 1].phi;
        }
        let (a, b) = (s[i - 1], s[i]);
        a.phi + (b.phi - a.phi) * (x - a.x) / (b.x - a.x)
    }

    /// Largest increase of φ between neighbouring samples (0 when strictly decreasing).
    pub fn max_inversion(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1].phi - w[0].phi).max(0.0)).fold(0.0, f64::max)
    }
}

/// φ on the `n` left-branch points of the hitting profile, each image found by
/// re-evolution root finding on the right branch.
pub fn compute_welding(d: &Driver, n: usize, policy: &StepPolicy) -> Result<Welding> {
    let profile = hitting_profile(d, n, policy)?;
    let flow = profile.flow();
    let o = profile.origin();
    let xs: Vec<f64> = profile.left_branch.iter().map(|p| p.0).collect();
    let rows: Vec<Result<WeldSample>> = par::map(&xs, |&x| {
        if x == o {
            return Ok(WeldSample { x, phi: o, tau: 0.0 });
        }
        let tau = flow.hitting_time(x)?.ok_or(Error::BeyondHorizon(x))?;
        let phi = inverse_hitting(&profile, tau, Side::Right)?;
        Ok(WeldSample { x, phi, tau })
    });
    let mut samples: Vec<WeldSample> = rows.into_iter().collect::<Result<_>>()?;
    samples.reverse();
    let residuals = par::map(&samples, |s| {
        if s.x == o {
            return 0.0;
        }
        match flow.hitting_time(s.phi) {
            Ok(Some(t)) => (t - s.tau).abs(),
            _ => f64::INFINITY,
        }
    });
    let max_residual = residuals.into_iter().fold(0.0, f64::max);
    Ok(Welding {
        samples,
        origin: o,
        left_end: profile.left_end,
        right_end: profile.right_end,
        horizon: profile.horizon(),
        max_residual,
    })
}

/// sup |φ₁ − φ₂| over the common x-domain, shrunk by the endpoint resolution;
/// both weldings are interpolated onto the union of their sample points.
pub fn welding_distance(w1: &Welding, w2: &Welding) -> Result<f64> {
    let margin = 10.0 * X_TOL * (1.0 + w1.left_end.abs().max(w2.left_end.abs()));
    let lo = w1.left_end.max(w2.left_end) + margin;
    let hi = w1.origin.min(w2.origin);
    if !(lo < hi) {
        return Err(Error::EmptyOverlap);
    }
    let xs = w1.samples.iter().chain(&w2.samples).map(|s| s.x).filter(|&x| x >= lo && x <= hi);
    Ok(xs.chain([lo, hi]).map(|x| (w1.eval(x) - w2.eval(x)).abs()).fold(0.0, f64::max))
}

/// max |φ(x) − f(x)| over the samples with x ∈ [lo, hi].
pub fn sup_distance_to(w: &Welding, f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    w.samples.iter().filter(|s| s.x >= lo && s.x <= hi).map(|s| (s.phi - f(s.x)).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationMode {
    /// δ·sin(6πt/T).
    Sinusoid,
    /// Constant shift by δ.
    Constant,
    /// Seeded random piecewise-linear function with sup-norm δ.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub delta: f64,
    /// Measured ‖ξ_δ − ξ‖∞.
    pub driver_distance: f64,
    pub welding_distance: f64,
    pub left_gap: f64,
    pub right_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub samples: usize,
    pub cells: usize,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig { samples: 64, cells: 4096, seed: 7 }
    }
}

pub fn perturb(d: &Driver, delta: f64, mode: PerturbationMode, cells: usize, seed: u64) -> Result<Driver> {
    let horizon = d.horizon();
    match mode {
        PerturbationMode::Constant => Ok(d.shifted(delta)),
        PerturbationMode::Sinusoid => {
            add_sampled(d, cells, |t| delta * (6.0 * std::f64::consts::PI * t / horizon).sin())
        }
        PerturbationMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let knots: Vec<f64> = (0..=16).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let peak = knots.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
            add_sampled(d, cells, |t| {
                let u = (t / horizon * 16.0).clamp(0.0, 16.0);
                let i = (u.floor() as usize).min(15);
                let f = u - i as f64;
                delta * (knots[i] * (1.0 - f) + knots[i + 1] * f) / peak
            })
        }
    }
}

/// One row per δ: welding distance and endpoint shifts of the perturbed driver.
pub fn driver_perturbation_experiment(
    d: &Driver,
    deltas: &[f64],
    mode: PerturbationMode,
    config: &PerturbationConfig,
    policy: &StepPolicy,
) -> Result<Vec<PerturbationRow>> {
    let base = compute_welding(d, config.samples, policy)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if delta == 0.0 {
            rows.push(PerturbationRow {
                delta,
                driver_distance: 0.0,
                welding_distance: 0.0,
                left_gap: 0.0,
                right_gap: 0.0,
            });
            continue;
        }
        let p = perturb(d, delta, mode, config.cells, config.seed)?;
        let w = compute_welding(&p, config.samples, policy)?;
        rows.push(PerturbationRow {
            delta,
            driver_distance: sup_distance(d, &p, config.cells),
            welding_distance: welding_distance(&base, &w)?,
            left_gap: (w.left_end - base.left_end).abs(),
            right_gap: (w.right_end - base.right_end).abs(),
        });
    }
    Ok(rows)
}
