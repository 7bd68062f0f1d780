//! hitting, welding, trace and verify.

use loewner::hitting::{hitting_profile, inverse_hitting};
use loewner::identities::{appendix_identity_1, appendix_identity_2, interval_width_residual, max_time_check};
use loewner::tracer::{curve_distance, is_simple, trace_curve, Curve};
use loewner::welding::compute_welding;
use loewner::{par, Side};
use serde::Serialize;

use crate::output::{num, Check, Report, Table};
use crate::svg::Plot;
use crate::{CliResult, RunConfig};

#[derive(Serialize)]
struct Endpoints {
    a: f64,
    b: f64,
    #[serde(rename = "T")]
    horizon: f64,
    left_end: f64,
    right_end: f64,
    origin: f64,
    max_inversion: f64,
    refined: bool,
    reversed: bool,
}

pub fn hitting(config: &RunConfig) -> CliResult<()> {
    let (d, reversed) = config.require_driver()?;
    let policy = config.policy(d.horizon());
    let p = hitting_profile(&d, config.grid_or(64), &policy)?;
    let mut table = Table::new(&["x", "tau", "branch"]);
    for &(x, tau) in p.left_branch.iter().rev() {
        table.push(vec![num(x), num(tau), "left".into()]);
    }
    for &(x, tau) in &p.right_branch {
        table.push(vec![num(x), num(tau), "right".into()]);
    }
    table.write(&config.out, "hitting.csv")?;
    Plot::new("hitting times τ(x)")
        .line("left", p.left_branch.clone())
        .line("right", p.right_branch.clone())
        .write(&config.out, "hitting.svg")?;
    let results = Endpoints {
        a: p.a(),
        b: p.b(),
        horizon: p.horizon(),
        left_end: p.left_end,
        right_end: p.right_end,
        origin: p.origin(),
        max_inversion: p.max_inversion,
        refined: p.refined,
        reversed,
    };
    Report::new(config, Vec::new(), results).write(&config.out, "endpoints.json")
}

#[derive(Serialize)]
struct WeldingSummary {
    #[serde(rename = "T")]
    horizon: f64,
    origin: f64,
    left_end: f64,
    right_end: f64,
    max_residual: f64,
    max_inversion: f64,
    samples: usize,
    reversed: bool,
}

pub fn welding(config: &RunConfig) -> CliResult<()> {
    let (d, reversed) = config.require_driver()?;
    let policy = config.policy(d.horizon());
    let w = compute_welding(&d, config.grid_or(64), &policy)?;
    let mut table = Table::new(&["x", "phi", "tau"]);
    for s in &w.samples {
        table.push(vec![num(s.x), num(s.phi), num(s.tau)]);
    }
    table.write(&config.out, "welding.csv")?;
    Plot::new("welding φ(x)")
        .line("φ", w.samples.iter().map(|s| (s.x, s.phi)).collect())
        .write(&config.out, "welding.svg")?;
    let results = WeldingSummary {
        horizon: w.horizon,
        origin: w.origin,
        left_end: w.left_end,
        right_end: w.right_end,
        max_residual: w.max_residual,
        max_inversion: w.max_inversion(),
        samples: w.samples.len(),
        reversed,
    };
    Report::new(config, Vec::new(), results).write(&config.out, "welding.json")
}

#[derive(Serialize)]
struct CurveSummary {
    tip: [f64; 2],
    base: f64,
    capacity: f64,
    points: usize,
    simple: bool,
    reversed: bool,
}

impl CurveSummary {
    fn new(c: &Curve, reversed: bool) -> Self {
        let tip = c.tip();
        CurveSummary {
            tip: [tip.re, tip.im],
            base: c.base,
            capacity: c.horizon(),
            points: c.points.len(),
            simple: is_simple(c),
            reversed,
        }
    }
}

#[derive(Serialize)]
struct TraceSummary {
    curve: CurveSummary,
    curve2: Option<CurveSummary>,
    curve_distance: Option<f64>,
}

fn curve_table(c: &Curve) -> Table {
    let mut table = Table::new(&["t", "re", "im"]);
    for (t, z) in c.capacity_times.iter().zip(&c.points) {
        table.push(vec![num(*t), num(z.re), num(z.im)]);
    }
    table
}

fn xy(c: &Curve) -> Vec<(f64, f64)> {
    c.points.iter().map(|z| (z.re, z.im)).collect()
}

pub fn trace(config: &RunConfig) -> CliResult<()> {
    let steps = config.steps.unwrap_or(10_000);
    let (d, reversed) = config.require_driver()?;
    let c = trace_curve(&d, steps)?;
    curve_table(&c).write(&config.out, "curve.csv")?;
    let mut plot = Plot::new("traced curve").equal_aspect().line("driver", xy(&c));
    let mut summary = TraceSummary { curve: CurveSummary::new(&c, reversed), curve2: None, curve_distance: None };
    if let Some((d2, reversed2)) = config.driver2()? {
        let c2 = trace_curve(&d2, steps)?;
        curve_table(&c2).write(&config.out, "curve2.csv")?;
        plot = plot.line("driver2", xy(&c2));
        summary.curve_distance = Some(curve_distance(&c, &c2));
        summary.curve2 = Some(CurveSummary::new(&c2, reversed2));
    }
    plot.write(&config.out, "curve.svg")?;
    Report::new(config, Vec::new(), summary).write(&config.out, "trace.json")
}

#[derive(Serialize)]
struct VerifyRow {
    x0: f64,
    y0: f64,
    tau: f64,
    bound: f64,
    interval_width: f64,
    identity_1: f64,
    identity_2: f64,
}

#[derive(Serialize)]
struct VerifySummary {
    #[serde(rename = "T")]
    horizon: f64,
    pairs: Vec<VerifyRow>,
    reversed: bool,
}

/// Pairs welded at τ = kT/(n + 1), k = 1..n; residuals of the interval-width
/// and integral identities, and τ against (y0 − x0)²/16.
pub fn verify(config: &RunConfig) -> CliResult<()> {
    let (d, reversed) = config.require_driver()?;
    let policy = config.policy(d.horizon());
    let tol = config.tol_or(1e-4);
    let n = config.grid_or(8);
    let profile = hitting_profile(&d, 64, &policy)?;
    let horizon = profile.horizon();
    let mut pairs = Vec::with_capacity(n);
    for k in 1..=n {
        let t = horizon * k as f64 / (n + 1) as f64;
        pairs.push((inverse_hitting(&profile, t, Side::Left)?, inverse_hitting(&profile, t, Side::Right)?));
    }
    let verdicts = max_time_check(&d, &pairs, &policy)?;
    let residuals = par::map(&pairs, |&(x, y)| -> loewner::Result<(f64, f64, f64)> {
        Ok((
            interval_width_residual(&d, x, y, &policy)?,
            appendix_identity_1(&d, x, &policy)?,
            appendix_identity_2(&d, x, &policy)?,
        ))
    });
    let mut rows = Vec::with_capacity(n);
    let mut table = Table::new(&["x0", "y0", "tau", "bound", "interval_width", "identity_1", "identity_2"]);
    for (v, r) in verdicts.iter().zip(residuals) {
        let (w, i1, i2) = r?;
        table.push(vec![num(v.x0), num(v.y0), num(v.tau), num(v.bound), num(w), num(i1), num(i2)]);
        rows.push(VerifyRow { x0: v.x0, y0: v.y0, tau: v.tau, bound: v.bound, interval_width: w, identity_1: i1, identity_2: i2 });
    }
    table.write(&config.out, "verify.csv")?;
    let worst = |f: fn(&VerifyRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("interval_width", worst(|r| r.interval_width), tol),
        Check::at_most("identity_1", worst(|r| r.identity_1), tol),
        Check::at_most("identity_2", worst(|r| r.identity_2), tol),
        Check::at_most("max_time", rows.iter().map(|r| r.tau - r.bound).fold(f64::MIN, f64::max), 1e-9),
    ];
    let report = Report::new(config, checks, VerifySummary { horizon, pairs: rows, reversed });
    report.write(&config.out, "verify.json")?;
    report.verdict()
}
