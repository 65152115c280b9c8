//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every line is printed
//! whether or not the criterion passes. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use ksdrift_core::config::{parse_config, ScenarioConfig};
use ksdrift_core::diagnostics::{self, DiagnosticsRecord};
use ksdrift_core::kernel::{self, SolverState};
use ksdrift_core::profiles::{mass_relation_p, solve_alpha_for_mass, stationary_profile};
use ksdrift_core::scenario::{execute_scenario, preset, sweep_mass, ScenarioOutcome, SWEEP_T_FINAL};
use ksdrift_core::{DensityField, Grid, StepControl};

/// Allowance for floating-point evaluation noise when checking that a
/// recorded functional never increases. The relative entropy is a sum of
/// thousands of O(1) terms that cancel down to ~1e-11, so successive
/// evaluations of a stationary state differ by a few ulps of the terms.
const EVALUATION_NOISE: f64 = 1e-12;

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: usize, name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { id, name, pass, detail }
}

/// Largest increase between consecutive values.
fn max_increment(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

fn run(config: &ScenarioConfig) -> ScenarioOutcome {
    execute_scenario(config).unwrap_or_else(|e| panic!("{} failed: {e}", config.seed_label))
}

struct Runs {
    critical: ScenarioOutcome,
    subcritical: ScenarioOutcome,
    supercritical: ScenarioOutcome,
    coupled: ScenarioOutcome,
    physical_half: ScenarioOutcome,
}

fn physical_half_mass() -> ScenarioConfig {
    parse_config("regime = physical\nM = 0.5\ninitial = exponential 1\nT_final = 20\n")
        .unwrap()
        .with_label("physical M=0.5")
}

fn mass_conservation(runs: &Runs) -> Verdict {
    let all = [&runs.critical, &runs.subcritical, &runs.supercritical, &runs.coupled, &runs.physical_half];
    let worst = all.iter().map(|o| o.summary.mass_drift).fold(0.0, f64::max);
    verdict(1, "mass conservation", worst <= 1e-12, format!("max relative drift {worst:.2e} over 5 scenarios (tol 1e-12)"))
}

fn dichotomy_sweep() -> Verdict {
    let grid = Grid::uniform(40.0, 4000).unwrap();
    let start = Instant::now();
    let entries = sweep_mass(0.6, 1.6, 11, &grid, &StepControl::default(), SWEEP_T_FINAL).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let mut problems = Vec::new();
    for e in &entries {
        let subcritical = e.mass <= 1.0 + 1e-12;
        if subcritical && (e.blew_up() || e.final_time < SWEEP_T_FINAL) {
            problems.push(format!("M={} did not reach T_final", e.mass));
        }
        if !subcritical && !(e.blew_up() && e.within_bound() && e.blowup_time_bound.is_some()) {
            problems.push(format!("M={} detection {:?} bound {:?}", e.mass, e.detection_time, e.blowup_time_bound));
        }
    }
    if elapsed > 300.0 {
        problems.push(format!("took {elapsed:.0} s"));
    }
    let slack = entries
        .iter()
        .filter_map(|e| Some(e.blowup_time_bound? / e.detection_time?))
        .fold(f64::INFINITY, f64::min);
    verdict(
        2,
        "global existence vs blow-up sweep",
        problems.is_empty(),
        if problems.is_empty() {
            format!("M<=1 global, M>=1.1 detected before T*, min T*/t_detect {slack:.2}, {elapsed:.1} s")
        } else {
            problems.join("; ")
        },
    )
}

fn moment_inequality(runs: &Runs) -> Verdict {
    let m = 1.5;
    let bound = m * m * (1.0 - m) + 1e-3;
    let recs = &runs.supercritical.records;
    let slopes: Vec<f64> = recs
        .windows(2)
        .map(|w| (w[1].moment1.powi(2) - w[0].moment1.powi(2)) / (w[1].t - w[0].t))
        .collect();
    let worst = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = runs.supercritical.summary.blowup_detected && worst <= bound && worst <= 0.0;
    verdict(3, "first-moment inequality", pass, format!("max J^2 slope {worst:.4} <= {bound:.4} over {} intervals", slopes.len()))
}

fn critical_convergence(runs: &Runs) -> Verdict {
    let recs = &runs.critical.records;
    let j0 = recs[0].moment1;
    let drift = recs.iter().map(|r| (r.moment1 - j0).abs()).fold(0.0, f64::max);
    let t_end = recs.last().unwrap().t;
    let h_final = recs.last().unwrap().relative_entropy.unwrap();
    let tail = recs.iter().filter(|r| r.t >= 0.05 * t_end).map(|r| r.relative_entropy.unwrap());
    let inc = max_increment(tail);
    let pass = (j0 - 1.0).abs() < 1e-12 && drift <= 1e-4 && h_final <= 1e-3 && inc <= EVALUATION_NOISE && t_end >= 50.0;
    verdict(
        4,
        "critical mass: J conserved, H -> 0",
        pass,
        format!("|J-1| max {drift:.2e}, final H {h_final:.2e}, max H increase after 5% {inc:.1e}"),
    )
}

fn stationarity_residual() -> Verdict {
    let dt = 1e-4;
    let mut residuals = Vec::new();
    let mut constants = Vec::new();
    for n in [1000, 2000, 4000] {
        let grid = Arc::new(Grid::uniform(40.0, n).unwrap());
        let h = grid.min_width();
        let field = stationary_profile(1.0, grid).unwrap();
        let state = SolverState::new(field.clone(), dt);
        let next = kernel::step(&state, &StepControl::default()).unwrap();
        assert_eq!(next.dt, dt);
        let res = next
            .field
            .values()
            .iter()
            .zip(field.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        residuals.push(res);
        constants.push(res / (h * h * dt));
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|&r| r >= 3.5) && constants.iter().all(|c| c.is_finite());
    verdict(
        5,
        "stationarity residual",
        pass,
        format!("C = {:.2e} / {:.2e} / {:.2e} at N=1000/2000/4000, refinement ratios {:.1}, {:.1}", constants[0], constants[1], constants[2], ratios[0], ratios[1]),
    )
}

fn selfsimilar_convergence(runs: &Runs) -> Verdict {
    let recs = &runs.subcritical.records;
    let alpha = solve_alpha_for_mass(0.5).unwrap();
    let target = alpha * 0.5;
    let err = (recs.last().unwrap().moment1 - target).abs();
    let inc = max_increment(recs.iter().map(|r| r.lyapunov.unwrap()));
    let pass = err <= 1e-3 && inc <= 1e-7 && recs.last().unwrap().t >= 15.0;
    verdict(
        6,
        "self-similar convergence",
        pass,
        format!("alpha {alpha:.6}, |J - alpha(1-M)| {err:.2e}, max Lyapunov increase {inc:.1e}"),
    )
}

fn trace_inequality(runs: &Runs) -> Verdict {
    let check = |o: &ScenarioOutcome, width: f64| -> f64 {
        o.records
            .iter()
            .map(|r: &DiagnosticsRecord| r.trace_residual / (width * (1.0 + r.fisher)))
            .fold(f64::INFINITY, f64::min)
    };
    let width = 0.01;
    let sub_width = runs.subcritical.final_field.grid().min_width();
    let worst = check(&runs.critical, width)
        .min(check(&runs.physical_half, width))
        .min(check(&runs.subcritical, sub_width));
    let grid = Arc::new(Grid::uniform(40.0, 4000).unwrap());
    let h = stationary_profile(1.0, grid).unwrap();
    let b = diagnostics::boundary_value(&h);
    let equality = diagnostics::trace_residual(&h, b).abs();
    let pass = worst >= -1.0 && equality <= 5.0 * width;
    verdict(
        7,
        "trace inequality",
        pass,
        format!("min residual / (width (1+I)) {worst:.2e} (>= -1), |residual| on h_1 {equality:.2e} <= {:.2e}", 5.0 * width),
    )
}

fn entropy_monotone(runs: &Runs) -> Verdict {
    let inc = max_increment(runs.physical_half.records.iter().map(|r| r.entropy));
    verdict(8, "entropy decay (M=0.5)", inc <= 1e-8, format!("max entropy increase {inc:.2e} over {} records", runs.physical_half.records.len()))
}

fn coupled_convergence(runs: &Runs) -> Verdict {
    let recs = &runs.coupled.records;
    let last = recs.last().unwrap();
    let mu_err = (last.mu.unwrap() - 1.0).abs();
    let m_err = (last.m.unwrap() - 1.0).abs();
    let t_end = last.t;
    let inc = max_increment(recs.iter().filter(|r| r.t >= 0.2 * t_end).map(|r| r.relative_entropy.unwrap()));
    let pass = mu_err <= 1e-3 && m_err <= 1e-3 && inc <= EVALUATION_NOISE && t_end >= 60.0;
    verdict(
        9,
        "coupled convergence (M=2)",
        pass,
        format!("|mu-1| {mu_err:.2e}, |m-1| {m_err:.2e}, max H increase over last 80% {inc:.1e}"),
    )
}

/// Drift-free solver against the Neumann cosine mode on `[0, 1]`.
fn heat_mode() -> Verdict {
    let length = 1.0;
    let k = std::f64::consts::PI / length;
    let t_final = 0.1;
    let mode = |grid: &Grid, amplitude: f64| -> Vec<f64> {
        // Exact cell averages of 1 + amplitude cos(k x).
        grid.edges()
            .windows(2)
            .map(|e| 1.0 + amplitude * ((k * e[1]).sin() - (k * e[0]).sin()) / (k * (e[1] - e[0])))
            .collect()
    };
    let mut errors = Vec::new();
    let mut rate = 0.0;
    for n in [25usize, 50, 100, 200] {
        let grid = Arc::new(Grid::uniform(length, n).unwrap());
        let h = grid.min_width();
        let steps = (t_final / (0.2 * h * h)).ceil() as usize;
        let dt = t_final / steps as f64;
        let mut field = DensityField::new(grid.clone(), mode(&grid, 0.5)).unwrap();
        for _ in 0..steps {
            let values = kernel::advance_with_drift(&field, 0.0, dt);
            field = DensityField::new(grid.clone(), values).unwrap();
        }
        let exact = mode(&grid, 0.5 * (-k * k * t_final).exp());
        let err = field.values().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        errors.push(err);
        // Amplitude of the cosine mode, projected on the discrete mode shape.
        let basis = mode(&grid, 1.0);
        let project = |v: &[f64]| -> f64 {
            let num: f64 = v.iter().zip(&basis).map(|(a, b)| (a - 1.0) * (b - 1.0)).sum();
            let den: f64 = basis.iter().map(|b| (b - 1.0) * (b - 1.0)).sum();
            num / den
        };
        let a0 = project(&mode(&grid, 0.5));
        let a1 = project(field.values());
        rate = -(a1 / a0).ln() / t_final;
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let rate_err = (rate / (k * k) - 1.0).abs();
    let pass = rate_err <= 0.01 && orders.iter().all(|&p| (p - 2.0).abs() <= 0.2);
    verdict(
        10,
        "drift-free heat mode",
        pass,
        format!(
            "decay rate {rate:.5} vs (pi/L)^2 {:.5} ({:.2e} rel), observed orders {}",
            k * k,
            rate_err,
            orders.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn profile_round_trips() -> Verdict {
    let alphas = [0.1, 0.5, 1.0, 2.0, 5.0];
    let worst = alphas
        .iter()
        .map(|&a| (solve_alpha_for_mass(mass_relation_p(a)).unwrap() - a).abs())
        .fold(0.0, f64::max);
    // Gaussian tail closed form: P(a) = a e^{a^2/2} sqrt(pi/2) erfc(a / sqrt 2).
    let oracle = std::f64::consts::FRAC_PI_2.sqrt() * 0.5f64.exp() * statrs::function::erf::erfc(std::f64::consts::FRAC_1_SQRT_2);
    let diff = (mass_relation_p(1.0) - oracle).abs();
    verdict(
        11,
        "profile round trips",
        worst <= 1e-7 && diff <= 1e-9,
        format!("max |alpha - solve(P(alpha))| {worst:.1e} over 5 values, |P(1) - oracle| {diff:.1e}"),
    )
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; none apply here.
    let start = Instant::now();
    let runs = Runs {
        critical: run(&preset("critical").unwrap()),
        subcritical: run(&preset("subcritical").unwrap()),
        supercritical: run(&preset("supercritical").unwrap()),
        coupled: run(&preset("coupled").unwrap()),
        physical_half: run(&physical_half_mass()),
    };
    let verdicts = vec![
        mass_conservation(&runs),
        dichotomy_sweep(),
        moment_inequality(&runs),
        critical_convergence(&runs),
        stationarity_residual(),
        selfsimilar_convergence(&runs),
        trace_inequality(&runs),
        entropy_monotone(&runs),
        coupled_convergence(&runs),
        heat_mode(),
        profile_round_trips(),
    ];
    let mut failed = 0;
    for v in &verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {}: {}", v.id, v.name, v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        verdicts.len() - failed,
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
