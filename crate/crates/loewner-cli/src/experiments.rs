//! Seeded experiments. Each writes `<name>.csv`, `<name>.svg` and
//! `report.json`, then fails with exit code 4 if a check did not hold.

use loewner::driver::{
    make_constant, make_counterexample_welder, make_oscillating_welder, make_piecewise_linear, make_sqrt_slit,
    random_piecewise_linear, reverse, sup_distance,
};
use loewner::energy::{partition_refinement_experiment, welding_residuals, MinimizationConfig};
use loewner::flow::Flow;
use loewner::hitting::{hitting_profile, inverse_hitting_flow, lipschitz_sweep, sandwich_sweep};
use loewner::identities::{
    appendix_identity_1, appendix_identity_2, faster_times_sweep, interval_width_residual, max_time_check,
};
use loewner::welding::{compute_welding, driver_perturbation_experiment, PerturbationConfig, PerturbationMode};
use loewner::{par, Driver, PartitionWeldingProblem, Side, StepPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{num, Check, Report, Table};
use crate::svg::Plot;
use crate::{CliError, CliResult, RunConfig};

pub const NAMES: [&str; 6] = ["oscillating", "counterexample", "perturbation", "energy-refinement", "lipschitz", "identities"];

pub fn run(config: &RunConfig) -> CliResult<()> {
    let name = config
        .experiment
        .as_deref()
        .ok_or_else(|| CliError::Input(format!("--experiment is required: one of {}", NAMES.join(", "))))?;
    match name {
        "oscillating" => oscillating(config),
        "counterexample" => counterexample(config),
        "perturbation" => perturbation(config),
        "energy-refinement" => energy_refinement(config),
        "lipschitz" => lipschitz(config),
        "identities" => identities(config),
        other => Err(CliError::Input(format!("unknown experiment {other:?}: expected one of {}", NAMES.join(", ")))),
    }
}

fn finish<R: Serialize>(config: &RunConfig, checks: Vec<Check>, results: R) -> CliResult<()> {
    let report = Report::new(config, checks, results);
    report.write(&config.out, "report.json")?;
    report.verdict()
}

fn samples(d: &Driver, n: usize) -> Vec<(f64, f64)> {
    d.sample_times(n).into_iter().map(|t| (t, d.eval(t))).collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::MIN, f64::max)
}

#[derive(Serialize)]
struct MeshRow {
    n: usize,
    epsilon: f64,
    refinements: u32,
    sup_distance: f64,
    weld_time: f64,
}

#[derive(Serialize)]
struct Oscillating {
    source_reversed: bool,
    meshes: Vec<MeshRow>,
}

/// Welders for the source's welding on meshes 4, 16, 64 with ε = 3/(8n).
/// Default source: the reversed π/3 slit on [0, 2], held to time 3.
fn oscillating(config: &RunConfig) -> CliResult<()> {
    let (source, reversed) = match config.driver()? {
        Some(d) => d,
        None => (reverse(&make_sqrt_slit(1.0 / 3.0, 2.0)?).extended_to(3.0)?, false),
    };
    let profile = hitting_profile(&source, config.grid_or(64), &StepPolicy::default())?;
    let mut rows = Vec::new();
    let mut plot = Plot::new("oscillating welders").line("source", samples(&source, 2048));
    for n in [4, 16, 64] {
        let out = make_oscillating_welder(&profile, n, 3.0 / (8.0 * n as f64))?;
        rows.push(MeshRow {
            n,
            epsilon: out.epsilon,
            refinements: out.refinements,
            sup_distance: sup_distance(&out.driver, &source, 8192),
            weld_time: out.weld_times.last().copied().unwrap_or(0.0),
        });
        plot = plot.line(format!("n = {n}"), samples(&out.driver, 4096));
    }
    let mut table = Table::new(&["n", "epsilon", "refinements", "sup_distance", "weld_time"]);
    for r in &rows {
        table.push(vec![r.n.to_string(), num(r.epsilon), r.refinements.to_string(), num(r.sup_distance), num(r.weld_time)]);
    }
    table.write(&config.out, "oscillating.csv")?;
    plot.write(&config.out, "oscillating.svg")?;
    let dists: Vec<f64> = rows.iter().map(|r| r.sup_distance).collect();
    let checks = vec![Check::flag("sup_distance strictly decreasing", strictly_decreasing(&dists))];
    finish(config, checks, Oscillating { source_reversed: reversed, meshes: rows })
}

#[derive(Serialize)]
struct Counterexample {
    n: usize,
    epsilon: f64,
    refinements: u32,
    sup_abs_driver: f64,
    total_time: f64,
    max_residual: f64,
    welding_distance_to_reflection: f64,
}

/// Driver of sup norm about 1 − 3/n welding n pairs close to the zero
/// driver's welding; n = --grid (20), ε = 1/(2n³).
fn counterexample(config: &RunConfig) -> CliResult<()> {
    let n = config.grid_or(20);
    let tol = config.tol_or(1e-3);
    let policy = StepPolicy::default();
    let out = make_counterexample_welder(n, 0.5 / (n as f64).powi(3), &policy)?;
    // The outermost pair welds at the very end; hold the driver up to 2/n².
    let driver = out.driver.extended_to(2.0 / (n * n) as f64)?;
    let problem = PartitionWeldingProblem::new(out.pairs.clone())?;
    let residuals = welding_residuals(&driver, &problem, &policy)?;
    let w = compute_welding(&driver, 64, &policy)?;
    let dist = loewner::welding::sup_distance_to(&w, |x| -x, -1.0, 0.0);
    let mut table = Table::new(&["j", "x", "y", "weld_time", "residual"]);
    for (j, ((&(x, y), &t), &r)) in out.pairs.iter().zip(&out.weld_times).zip(&residuals).enumerate() {
        table.push(vec![(j + 1).to_string(), num(x), num(y), num(t), num(r)]);
    }
    table.write(&config.out, "counterexample.csv")?;
    Plot::new("counterexample driver").line("ξ", samples(&out.driver, 8192)).write(&config.out, "counterexample.svg")?;
    Plot::new("counterexample welding")
        .line("φ", w.samples.iter().map(|s| (s.x, s.phi)).collect())
        .line("−x", vec![(-1.0, 1.0), (1.0, -1.0)])
        .write(&config.out, "counterexample_welding.svg")?;
    let sup = out.driver.sup_norm();
    let max_residual = max_of(residuals.iter().copied());
    let total_time = out.weld_times.last().copied().unwrap_or(f64::INFINITY);
    let checks = vec![
        Check::at_least("sup |ξ|", sup, 1.0 - 3.0 / n as f64),
        Check::at_most("welding residual", max_residual, tol),
        Check::at_most("total time", total_time, 2.0 / (n * n) as f64),
    ];
    let results = Counterexample {
        n,
        epsilon: out.epsilon,
        refinements: out.refinements,
        sup_abs_driver: sup,
        total_time,
        max_residual,
        welding_distance_to_reflection: dist,
    };
    finish(config, checks, results)
}

#[derive(Serialize)]
struct Perturbation {
    mode: PerturbationMode,
    rows: Vec<loewner::welding::PerturbationRow>,
}

/// Sinusoidal perturbations of size δ ∈ {0.2, 0.1, 0.05, 0.025}; default base
/// driver is zero on [0, 1].
fn perturbation(config: &RunConfig) -> CliResult<()> {
    let base = match config.driver()? {
        Some((d, _)) => d,
        None => make_constant(0.0, 1.0)?,
    };
    let deltas = [0.2, 0.1, 0.05, 0.025];
    let pc = PerturbationConfig { samples: config.grid_or(64), seed: config.seed, ..PerturbationConfig::default() };
    let mode = PerturbationMode::Sinusoid;
    let rows = driver_perturbation_experiment(&base, &deltas, mode, &pc, &StepPolicy::default())?;
    let mut table = Table::new(&["delta", "driver_distance", "welding_distance", "left_gap", "right_gap"]);
    for r in &rows {
        table.push(vec![num(r.delta), num(r.driver_distance), num(r.welding_distance), num(r.left_gap), num(r.right_gap)]);
    }
    table.write(&config.out, "perturbation.csv")?;
    Plot::new("welding distance against δ")
        .line("welding distance", rows.iter().map(|r| (r.delta, r.welding_distance)).collect())
        .line("max endpoint gap", rows.iter().map(|r| (r.delta, r.left_gap.max(r.right_gap))).collect())
        .write(&config.out, "perturbation.svg")?;
    let dists: Vec<f64> = rows.iter().map(|r| r.welding_distance).collect();
    let gap = max_of(rows.iter().map(|r| r.left_gap.max(r.right_gap) - r.delta));
    let checks = vec![
        Check::flag("welding distance strictly decreasing", strictly_decreasing(&dists)),
        Check::at_most("endpoint gap − δ", gap, config.tol_or(1e-6)),
    ];
    finish(config, checks, Perturbation { mode, rows })
}

#[derive(Serialize)]
struct EnergyRefinement {
    trace_steps: usize,
    minimization: MinimizationConfig,
    rows: Vec<loewner::energy::RefinementRow>,
}

/// Minimal-energy drivers for N ∈ {2, 4, 8} pairs welded by a source driver.
fn energy_refinement(config: &RunConfig) -> CliResult<()> {
    let source = match config.driver()? {
        Some((d, _)) => d,
        None => make_piecewise_linear(&[(0.0, 0.0), (0.1, 0.3), (0.2, 0.1), (0.3, 0.4)])?,
    };
    let trace_steps = config.steps.unwrap_or(2000);
    let cfg = MinimizationConfig::default();
    let rows = partition_refinement_experiment(&source, &[2, 4, 8], &cfg, trace_steps)?;
    let mut table = Table::new(&["pairs", "energy", "source_energy", "curve_distance", "max_residual", "converged"]);
    for r in &rows {
        table.push(vec![
            r.pairs.to_string(),
            num(r.energy),
            num(r.source_energy),
            num(r.curve_distance),
            num(r.max_residual),
            r.converged.to_string(),
        ]);
    }
    table.write(&config.out, "energy-refinement.csv")?;
    Plot::new("minimal energy against N")
        .line("energy", rows.iter().map(|r| (r.pairs as f64, r.energy)).collect())
        .line("source", rows.iter().map(|r| (r.pairs as f64, r.source_energy)).collect())
        .write(&config.out, "energy-refinement.svg")?;
    let tol = config.tol_or(1e-3);
    let energies: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    let drop = max_of(energies.windows(2).map(|w| w[0] - w[1]).chain([0.0]));
    let excess = max_of(rows.iter().map(|r| r.energy - r.source_energy));
    let checks = vec![
        Check::at_most("energy decrease under refinement", drop, tol),
        Check::at_most("energy above source", excess, tol),
        Check::at_most("welding residual", max_of(rows.iter().map(|r| r.max_residual)), cfg.tolerance),
    ];
    finish(config, checks, EnergyRefinement { trace_steps, minimization: cfg, rows })
}

#[derive(Serialize)]
struct Lipschitz {
    count: usize,
    max_distance: f64,
    n_t: usize,
    max_ratio: f64,
    rows: Vec<loewner::hitting::PairSweepRow>,
    sandwich: Vec<loewner::hitting::PairSweepRow>,
}

/// Seeded pairs at sup distance δ ≤ 0.3: sup gap of the inverse hitting
/// times against δ, and the hitting-time sandwich on the same pairs.
fn lipschitz(config: &RunConfig) -> CliResult<()> {
    let count = config.count.unwrap_or(200);
    let n_t = config.grid_or(64);
    let policy = StepPolicy::default();
    let rows = lipschitz_sweep(count, config.seed, 0.3, n_t, &policy)?;
    let sandwich = sandwich_sweep(count, config.seed, 0.3, n_t, &policy)?;
    let mut table = Table::new(&["index", "delta", "gap", "ratio", "sandwich_violation", "sandwich_skipped"]);
    for (r, s) in rows.iter().zip(&sandwich) {
        table.push(vec![
            r.index.to_string(),
            num(r.delta),
            num(r.value),
            num(r.value / r.delta),
            num(s.value),
            s.skipped.to_string(),
        ]);
    }
    table.write(&config.out, "lipschitz.csv")?;
    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.delta, r.value)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dmax = max_of(rows.iter().map(|r| r.delta).chain([0.0]));
    Plot::new("inverse hitting time gap against δ")
        .line("gap", pts)
        .line("δ", vec![(0.0, 0.0), (dmax, dmax)])
        .write(&config.out, "lipschitz.svg")?;
    let max_ratio = max_of(rows.iter().map(|r| r.value / r.delta).chain([0.0]));
    let checks = vec![
        Check::at_most("max gap/δ", max_ratio, 1.0 + config.tol_or(1e-5)),
        Check::at_most("sandwich violation", max_of(sandwich.iter().map(|s| s.value).chain([0.0])), 1e-6),
    ];
    finish(config, checks, Lipschitz { count, max_distance: 0.3, n_t, max_ratio, rows, sandwich })
}

#[derive(Serialize)]
struct IdentityRow {
    index: usize,
    x0: f64,
    y0: f64,
    tau: f64,
    bound: f64,
    interval_width: f64,
    identity_1: f64,
    identity_2: f64,
}

#[derive(Serialize)]
struct Identities {
    count: usize,
    rows: Vec<IdentityRow>,
    faster_times: Vec<loewner::identities::FasterTimesRow>,
}

/// Seeded piecewise-linear drivers on [0, 1] with the pair (−1/2, φ(−1/2)):
/// interval-width and integral identity residuals, the maximal welding time,
/// and the faster-times bound on drivers welding (−1, 1).
fn identities(config: &RunConfig) -> CliResult<()> {
    let count = config.count.unwrap_or(50);
    let tol = config.tol_or(1e-4);
    let policy = StepPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut drivers = Vec::with_capacity(count);
    while drivers.len() < count {
        let d = random_piecewise_linear(&mut rng, 1.0, 9, 0.0, 0.6)?;
        let f = Flow::new(&d, &policy)?;
        let Some(tau) = f.hitting_time(-0.5)? else { continue };
        let y = inverse_hitting_flow(&f, tau, Side::Right)?;
        drivers.push((d, -0.5, y));
    }
    let rows = par::map_range(count, |i| -> loewner::Result<IdentityRow> {
        let (d, x, y) = &drivers[i];
        let v = max_time_check(d, &[(*x, *y)], &policy)?[0];
        Ok(IdentityRow {
            index: i,
            x0: *x,
            y0: *y,
            tau: v.tau,
            bound: v.bound,
            interval_width: interval_width_residual(d, *x, *y, &policy)?,
            identity_1: appendix_identity_1(d, *x, &policy)?,
            identity_2: appendix_identity_2(d, *x, &policy)?,
        })
    })
    .into_iter()
    .collect::<loewner::Result<Vec<_>>>()?;
    let faster = faster_times_sweep(count, config.seed, &policy)?;
    let mut table = Table::new(&["index", "x0", "y0", "tau", "bound", "interval_width", "identity_1", "identity_2"]);
    for r in &rows {
        table.push(vec![
            r.index.to_string(),
            num(r.x0),
            num(r.y0),
            num(r.tau),
            num(r.bound),
            num(r.interval_width),
            num(r.identity_1),
            num(r.identity_2),
        ]);
    }
    table.write(&config.out, "identities.csv")?;
    let mut ft = Table::new(&["index", "tau", "delta", "bound"]);
    for r in &faster {
        ft.push(vec![r.index.to_string(), num(r.tau), num(r.delta), num(r.bound)]);
    }
    ft.write(&config.out, "faster_times.csv")?;
    let mut pts: Vec<(f64, f64)> = faster.iter().map(|r| (r.delta, r.tau)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let bound: Vec<(f64, f64)> = (0..=64)
        .map(|k| {
            let delta = k as f64 / 64.0;
            (delta, loewner::identities::faster_times_bound(1.0, delta).map(|b| b.f).unwrap_or(f64::NAN))
        })
        .collect();
    Plot::new("welding time of (−1, 1) against δ")
        .line("τ", pts)
        .line("f(δ)", bound)
        .write(&config.out, "identities.svg")?;
    let worst = |f: fn(&IdentityRow) -> f64| max_of(rows.iter().map(f).chain([0.0]));
    let checks = vec![
        Check::at_most("interval_width", worst(|r| r.interval_width), tol),
        Check::at_most("identity_1", worst(|r| r.identity_1), tol),
        Check::at_most("identity_2", worst(|r| r.identity_2), tol),
        Check::at_most("max_time", max_of(rows.iter().map(|r| r.tau - r.bound)), 1e-9),
        Check::at_most("faster_times", max_of(faster.iter().map(|r| r.tau - r.bound)), 1e-6),
    ];
    finish(config, checks, Identities { count, rows, faster_times: faster })
}
