//! Runs configured scenarios and writes their outputs.
//!
//! Each run writes `timeseries.csv`, `summary.json` and `final_profile.csv`
//! into the configured output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{gaussian_bump, InitialProfile, Regime, ScenarioConfig, DEFAULT_CELLS, DEFAULT_DIAG_EVERY, DEFAULT_LENGTH};
use crate::coupled::run_coupled;
use crate::diagnostics::{first_moment, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::kernel::{self, BlowupReason, StepControl};
use crate::selfsimilar::{default_rescaled_length, run_rescaled};

pub const PRESETS: [&str; 4] = ["critical", "subcritical", "supercritical", "coupled"];

pub const TIMESERIES_HEADER: &str = "t,mass,J,moment2,b,entropy,fisher,trace_residual,H,lyapunov,mu,m";

/// Scalar summary of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub regime: String,
    /// Reached the final time without a blow-up verdict.
    pub completed: bool,
    pub blowup_detected: bool,
    pub blowup_reason: Option<String>,
    pub detection_time: Option<f64>,
    /// Moment bound `T*` when it applies.
    pub blowup_time_bound: Option<f64>,
    pub steps: u64,
    /// Largest relative deviation of the conserved mass over the records.
    pub mass_drift: f64,
    pub final_t: f64,
    pub final_mass: f64,
    pub final_moment1: f64,
    pub final_moment2: f64,
    pub final_boundary_value: f64,
    pub final_entropy: f64,
    pub final_fisher: f64,
    pub final_trace_residual: f64,
    pub final_relative_entropy: Option<f64>,
    pub final_lyapunov: Option<f64>,
    pub final_mu: Option<f64>,
    pub final_m: Option<f64>,
    /// Expected limit of the first moment, when there is one.
    pub target_moment: Option<f64>,
    pub moment_error: Option<f64>,
    pub mu_bar: Option<f64>,
    pub mu_error: Option<f64>,
}

/// Everything a run produced, before anything is written.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub summary: RunSummary,
    pub records: Vec<DiagnosticsRecord>,
    pub final_field: DensityField,
}

fn summarize(
    config: &ScenarioConfig,
    records: &[DiagnosticsRecord],
    conserved: f64,
    steps: u64,
) -> RunSummary {
    let last = records.last().expect("runs always record their final state");
    let mass_drift = records
        .iter()
        .map(|r| (r.mass + r.mu.unwrap_or(0.0) - conserved).abs() / conserved)
        .fold(0.0, f64::max);
    RunSummary {
        label: config.seed_label.clone(),
        regime: config.regime.as_str().into(),
        completed: true,
        blowup_detected: false,
        blowup_reason: None,
        detection_time: None,
        blowup_time_bound: None,
        steps,
        mass_drift,
        final_t: last.t,
        final_mass: last.mass,
        final_moment1: last.moment1,
        final_moment2: last.moment2,
        final_boundary_value: last.boundary_value,
        final_entropy: last.entropy,
        final_fisher: last.fisher,
        final_trace_residual: last.trace_residual,
        final_relative_entropy: last.relative_entropy,
        final_lyapunov: last.lyapunov,
        final_mu: last.mu,
        final_m: last.m,
        target_moment: None,
        moment_error: None,
        mu_bar: None,
        mu_error: None,
    }
}

/// Runs `config` without touching the file system.
pub fn execute_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    config.validate()?;
    let initial = config.initial_field()?;
    match config.regime {
        Regime::Physical => {
            let j0 = first_moment(&initial);
            let run = kernel::run(initial, config.final_time, &config.control, config.diag_every)?;
            let mut summary = summarize(config, &run.records, run.state.mass, run.state.step_index);
            let cert = &run.certificate;
            summary.completed = !cert.detected;
            summary.blowup_detected = cert.detected;
            summary.blowup_reason = cert.detected.then(|| cert.reason.as_str().to_string());
            summary.detection_time = cert.detection_time;
            summary.blowup_time_bound = cert.moment_bound.filter(|_| cert.bound_applies);
            if run.reference_alpha.is_some() {
                summary.target_moment = Some(j0);
                summary.moment_error = Some((summary.final_moment1 - j0).abs());
            }
            Ok(ScenarioOutcome {
                summary,
                records: run.records,
                final_field: run.state.field,
            })
        }
        Regime::SelfSimilar => {
            let run = run_rescaled(initial, config.final_time, &config.control, config.diag_every)?;
            let mut summary = summarize(config, &run.records, run.state.mass, run.state.step_index);
            summary.target_moment = Some(run.target_moment);
            summary.moment_error = Some((summary.final_moment1 - run.target_moment).abs());
            Ok(ScenarioOutcome {
                summary,
                records: run.records,
                final_field: run.state.field,
            })
        }
        Regime::Coupled => {
            let run = run_coupled(initial, config.mu0, config.final_time, &config.control, config.diag_every)?;
            let mut summary = summarize(config, &run.records, run.total_mass, run.state.step_index);
            summary.mu_bar = run.mu_bar;
            summary.mu_error = run.mu_bar.map(|mb| (run.state.mu - mb).abs());
            Ok(ScenarioOutcome {
                summary,
                records: run.records,
                final_field: run.state.field,
            })
        }
    }
}

/// Runs `config` and writes its outputs under `config.output_path`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunSummary> {
    info!("running {} ({})", config.seed_label, config.regime.as_str());
    let outcome = execute_scenario(config)?;
    write_outputs(&config.output_path, &outcome)?;
    Ok(outcome.summary)
}

pub fn write_outputs(dir: &Path, outcome: &ScenarioOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    emit_timeseries(&outcome.records, &dir.join("timeseries.csv"))?;
    write_summary(&outcome.summary, &dir.join("summary.json"))?;
    emit_profile(&outcome.final_field, &dir.join("final_profile.csv"))
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    write_file(path, &(text + "\n"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Time-series CSV text; absent columns are left empty.
pub fn timeseries_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.mass,
            r.moment1,
            r.moment2,
            r.boundary_value,
            r.entropy,
            r.fisher,
            r.trace_residual,
            opt(r.relative_entropy),
            opt(r.lyapunov),
            opt(r.mu),
            opt(r.m)
        );
    }
    out
}

pub fn emit_timeseries(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    write_file(path, &timeseries_csv(records))
}

pub fn emit_profile(field: &DensityField, path: &Path) -> Result<()> {
    let mut out = String::from("x,n\n");
    for (x, n) in field.grid().centers().iter().zip(field.values()) {
        let _ = writeln!(out, "{x},{n}");
    }
    write_file(path, &out)
}

/// Center of a Gaussian bump of width `sigma` whose normalized cell
/// averages on `grid` have first moment `target` per unit mass.
pub fn bump_center_for_moment(grid: &std::sync::Arc<Grid>, sigma: f64, target: f64) -> Result<f64> {
    let moment = |c: f64| -> Result<f64> {
        let f = gaussian_bump(grid.clone(), c, sigma)?.normalized_to(1.0)?;
        Ok(first_moment(&f))
    };
    // The normalized moment increases with the center.
    let (mut lo, mut hi) = (0.0, target.max(1.0) * 2.0);
    if moment(lo)? > target || moment(hi)? < target {
        return Err(Error::InvalidParameter(format!(
            "no bump of width {sigma} has first moment {target}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if moment(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Configuration of a named acceptance scenario.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let base = |regime, mass, initial, final_time| ScenarioConfig {
        regime,
        mass,
        mu0: 0.0,
        initial,
        length: DEFAULT_LENGTH,
        cells: DEFAULT_CELLS,
        control: StepControl::default(),
        final_time,
        diag_every: DEFAULT_DIAG_EVERY,
        output_path: PathBuf::from("out").join(name),
        seed_label: name.to_string(),
    };
    let config = match name {
        "critical" => {
            let sigma = 0.5;
            let grid = std::sync::Arc::new(Grid::uniform(DEFAULT_LENGTH, DEFAULT_CELLS)?);
            let center = bump_center_for_moment(&grid, sigma, 1.0)?;
            base(Regime::Physical, 1.0, InitialProfile::GaussianBump { center, sigma }, 50.0)
        }
        "subcritical" => {
            let mut c = base(Regime::SelfSimilar, 0.5, InitialProfile::Exponential { alpha: 1.0 }, 15.0);
            c.length = default_rescaled_length(crate::profiles::solve_alpha_for_mass(0.5)?);
            c
        }
        "supercritical" => {
            // Short run; record densely to resolve the moment decay.
            let mut c = base(Regime::Physical, 1.5, InitialProfile::Exponential { alpha: 1.0 }, 20.0);
            c.diag_every = 10;
            c
        }
        "coupled" => {
            let mut c = base(Regime::Coupled, 2.0, InitialProfile::Exponential { alpha: 1.0 }, 60.0);
            c.mu0 = 0.5;
            c
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset `{other}`; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    config.validate()?;
    Ok(config)
}

/// Verdict for one mass in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub mass: f64,
    pub verdict: BlowupReason,
    pub detection_time: Option<f64>,
    pub blowup_time_bound: Option<f64>,
    pub final_time: f64,
    pub final_boundary_value: f64,
}

impl SweepEntry {
    pub fn blew_up(&self) -> bool {
        self.verdict != BlowupReason::NotDetected
    }

    /// Detection happened no later than the moment bound (vacuous otherwise).
    pub fn within_bound(&self) -> bool {
        match (self.detection_time, self.blowup_time_bound) {
            (Some(t), Some(bound)) => t <= bound,
            _ => true,
        }
    }
}

pub const SWEEP_T_FINAL: f64 = 20.0;

/// Physical runs from `n_0 = M e^{-x}` for `steps` evenly spaced masses in
/// `[from, to]`, executed in parallel.
pub fn sweep_mass(from: f64, to: f64, steps: usize, grid: &Grid, control: &StepControl, t_final: f64) -> Result<Vec<SweepEntry>> {
    if steps == 0 || !(from > 0.0) || !(to >= from) {
        return Err(Error::InvalidParameter(format!(
            "sweep needs 0 < from <= to and steps >= 1, got {from}, {to}, {steps}"
        )));
    }
    let grid = std::sync::Arc::new(grid.clone());
    let masses: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                from
            } else {
                let k = (steps - 1) as f64;
                (from * (k - i as f64) + to * i as f64) / k
            }
        })
        .collect();
    masses
        .par_iter()
        .map(|&mass| {
            let initial = DensityField::from_fn(grid.clone(), |x| (-x).exp())?.normalized_to(mass)?;
            let run = kernel::run(initial, t_final, control, usize::MAX)?;
            let cert = run.certificate;
            Ok(SweepEntry {
                mass,
                verdict: cert.reason,
                detection_time: cert.detection_time,
                blowup_time_bound: cert.moment_bound.filter(|_| cert.bound_applies),
                final_time: run.state.time,
                final_boundary_value: run.state.boundary_value,
            })
        })
        .collect()
}

pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::from("M,verdict,detection_time,blowup_time_bound,final_time,final_b\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.mass,
            e.verdict.as_str(),
            opt(e.detection_time),
            opt(e.blowup_time_bound),
            e.final_time,
            e.final_boundary_value
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(mu: Option<f64>) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t: 0.1,
            mass: 1.0,
            moment1: 0.5,
            moment2: 0.25,
            boundary_value: 2.0,
            entropy: -0.3,
            fisher: 4.0,
            trace_residual: 0.0,
            relative_entropy: None,
            lyapunov: None,
            mu,
            m: mu.map(|_| 1.0),
        }
    }

    #[test]
    fn empty_timeseries_is_header_only() {
        assert_eq!(timeseries_csv(&[]), format!("{TIMESERIES_HEADER}\n"));
    }

    #[test]
    fn timeseries_rows() {
        let text = timeseries_csv(&[record(None)]);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "0.1,1,0.5,0.25,2,-0.3,4,0,,,,");
        let text = timeseries_csv(&[record(Some(0.75))]);
        assert!(text.lines().nth(1).unwrap().ends_with(",,,0.75,1"));
    }

    #[test]
    fn floats_round_trip() {
        let mut r = record(None);
        r.t = 0.1 + 0.2;
        r.entropy = std::f64::consts::PI * 1e-17;
        let text = timeseries_csv(&[r.clone()]);
        let cols: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(cols[0].parse::<f64>().unwrap(), r.t);
        assert_eq!(cols[5].parse::<f64>().unwrap(), r.entropy);
    }

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            assert_eq!(c.seed_label, name);
        }
        assert!(preset("hypercritical").is_err());
        let c = preset("coupled").unwrap();
        assert_eq!(c.bulk_mass(), 1.5);
    }

    #[test]
    fn critical_preset_has_unit_moment() {
        let c = preset("critical").unwrap();
        let f = c.initial_field().unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-14);
        assert!((first_moment(&f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_scenarios_write_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "regime = coupled\nM = 2\nmu0 = 0.5\nL = 10\nN = 100\nT_final = 0.05\ndiag_every = 10\nout = {}\n",
            dir.path().display()
        );
        let config = crate::config::parse_config(&text).unwrap();
        let summary = run_scenario(&config).unwrap();
        assert!(summary.completed);
        assert!(summary.mass_drift < 1e-12);
        assert_eq!(summary.mu_bar, Some(1.0));
        let ts = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
        assert!(ts.starts_with(TIMESERIES_HEADER));
        let profile = std::fs::read_to_string(dir.path().join("final_profile.csv")).unwrap();
        assert_eq!(profile.lines().count(), 101);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert!(json.as_object().unwrap().values().all(|v| !v.is_object() && !v.is_array()));
    }
}
