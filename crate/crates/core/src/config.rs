//! Flat `key = value` scenario files.
//!
//! One assignment per line; `#` starts a comment. Unknown or repeated keys
//! are rejected, as are parameters that the chosen regime or initial profile
//! does not use.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::kernel::StepControl;
use crate::profiles::{coupled_equilibrium, solve_alpha_for_mass, SelfSimilarProfile, StationaryProfile};
use crate::selfsimilar::default_rescaled_length;

pub const KEYS: [&str; 18] = [
    "regime",
    "M",
    "mu0",
    "initial",
    "alpha",
    "center",
    "sigma",
    "table_path",
    "L",
    "N",
    "dt_initial",
    "dt_min",
    "safety_factor",
    "B_max",
    "T_final",
    "tau_final",
    "diag_every",
    "out",
];

pub const DEFAULT_LENGTH: f64 = 40.0;
pub const DEFAULT_CELLS: usize = 4000;
pub const DEFAULT_T_FINAL: f64 = 20.0;
pub const DEFAULT_TAU_FINAL: f64 = 15.0;
pub const DEFAULT_DIAG_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Physical,
    SelfSimilar,
    Coupled,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Physical => "physical",
            Regime::SelfSimilar => "selfsimilar",
            Regime::Coupled => "coupled",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "physical" => Some(Regime::Physical),
            "selfsimilar" => Some(Regime::SelfSimilar),
            "coupled" => Some(Regime::Coupled),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// `e^{-αx}`.
    Exponential { alpha: f64 },
    /// The regime's reference profile: `h_α` (physical, `α` defaults to 1),
    /// `g_α` with `P(α) = M` (self-similar) or `h_{M-1}` (coupled).
    ScaledEquilibrium { alpha: Option<f64> },
    /// `exp(-(x - center)² / (2 sigma²))`.
    GaussianBump { center: f64, sigma: f64 },
    /// Two-column `x,n` table, linearly interpolated at cell centers.
    CustomTable { path: PathBuf },
}

impl InitialProfile {
    fn name(&self) -> &'static str {
        match self {
            InitialProfile::Exponential { .. } => "exponential",
            InitialProfile::ScaledEquilibrium { .. } => "scaled_equilibrium",
            InitialProfile::GaussianBump { .. } => "gaussian_bump",
            InitialProfile::CustomTable { .. } => "custom_table",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub regime: Regime,
    /// Total mass (bulk plus reservoir in the coupled regime).
    pub mass: f64,
    pub mu0: f64,
    pub initial: InitialProfile,
    pub length: f64,
    pub cells: usize,
    pub control: StepControl,
    /// `T_final`, or `tau_final` in the self-similar regime.
    pub final_time: f64,
    pub diag_every: usize,
    pub output_path: PathBuf,
    pub seed_label: String,
}

impl ScenarioConfig {
    /// Mass carried by the density (excludes the reservoir).
    pub fn bulk_mass(&self) -> f64 {
        self.mass - self.mu0
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::uniform(self.length, self.cells)?))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.seed_label = label.into();
        self
    }

    /// Checks the cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidParameter(m));
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return invalid(format!("M must be positive, got {}", self.mass));
        }
        if self.regime == Regime::SelfSimilar && !(self.mass < 1.0) {
            return invalid(format!(
                "regime selfsimilar needs M < 1, got M = {}",
                self.mass
            ));
        }
        if self.regime == Regime::Coupled {
            if !(self.mu0 >= 0.0) || !(self.mu0 < self.mass) {
                return invalid(format!(
                    "mu0 must lie in [0, M), got mu0 = {} with M = {}",
                    self.mu0, self.mass
                ));
            }
        } else if self.mu0 != 0.0 {
            return invalid("mu0 is only meaningful for regime coupled".into());
        }
        if !(self.length > 0.0) || self.cells < 4 {
            return invalid(format!(
                "grid needs L > 0 and N >= 4, got L = {}, N = {}",
                self.length, self.cells
            ));
        }
        if !(self.final_time >= 0.0) || !self.final_time.is_finite() {
            return invalid(format!("final time must be nonnegative, got {}", self.final_time));
        }
        if self.diag_every == 0 {
            return invalid("diag_every must be at least 1".into());
        }
        match &self.initial {
            InitialProfile::Exponential { alpha } if !(*alpha > 0.0) => {
                return invalid(format!("alpha must be positive, got {alpha}"))
            }
            InitialProfile::ScaledEquilibrium { alpha: Some(a) } if !(*a > 0.0) => {
                return invalid(format!("alpha must be positive, got {a}"))
            }
            InitialProfile::ScaledEquilibrium { alpha: Some(_) } if self.regime != Regime::Physical => {
                return invalid("alpha of scaled_equilibrium is fixed by M outside the physical regime".into())
            }
            InitialProfile::ScaledEquilibrium { .. } if self.regime == Regime::Coupled && !(self.mass > 1.0) => {
                return invalid("the coupled equilibrium needs M > 1".into())
            }
            InitialProfile::GaussianBump { sigma, center } if !(*sigma > 0.0) || !center.is_finite() => {
                return invalid(format!("gaussian_bump needs sigma > 0, got {sigma}"))
            }
            _ => {}
        }
        self.control.validate()
    }

    /// Builds the initial density, normalized to the bulk mass.
    pub fn initial_field(&self) -> Result<DensityField> {
        let grid = self.grid()?;
        let raw = match &self.initial {
            InitialProfile::Exponential { alpha } => {
                DensityField::from_fn(grid, |x| (-alpha * x).exp())?
            }
            InitialProfile::ScaledEquilibrium { alpha } => match self.regime {
                Regime::Physical => StationaryProfile::new(alpha.unwrap_or(1.0))?.field(grid),
                Regime::SelfSimilar => {
                    SelfSimilarProfile::new(solve_alpha_for_mass(self.mass)?)?.field(grid)
                }
                Regime::Coupled => coupled_equilibrium(self.mass)?.1.field(grid),
            },
            InitialProfile::GaussianBump { center, sigma } => gaussian_bump(grid, *center, *sigma)?,
            InitialProfile::CustomTable { path } => {
                let (xs, ns) = read_table(path)?;
                let values = grid
                    .centers()
                    .iter()
                    .map(|&x| interpolate(&xs, &ns, x))
                    .collect();
                DensityField::new(grid, values)?
            }
        };
        raw.normalized_to(self.bulk_mass())
    }

    /// Canonical text form; `parse_config` of it returns `self` (up to the label).
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("regime", self.regime.as_str().into());
        put("M", self.mass.to_string());
        if self.regime == Regime::Coupled {
            put("mu0", self.mu0.to_string());
        }
        put("initial", self.initial.name().into());
        match &self.initial {
            InitialProfile::Exponential { alpha } => put("alpha", alpha.to_string()),
            InitialProfile::ScaledEquilibrium { alpha: Some(a) } => put("alpha", a.to_string()),
            InitialProfile::ScaledEquilibrium { alpha: None } => {}
            InitialProfile::GaussianBump { center, sigma } => {
                put("center", center.to_string());
                put("sigma", sigma.to_string());
            }
            InitialProfile::CustomTable { path } => put("table_path", path.display().to_string()),
        }
        put("L", self.length.to_string());
        put("N", self.cells.to_string());
        put("dt_initial", self.control.dt_initial.to_string());
        put("dt_min", self.control.dt_min.to_string());
        put("safety_factor", self.control.safety_factor.to_string());
        put("B_max", self.control.blowup_threshold.to_string());
        if self.regime == Regime::SelfSimilar {
            put("tau_final", self.final_time.to_string());
        } else {
            put("T_final", self.final_time.to_string());
        }
        put("diag_every", self.diag_every.to_string());
        put("out", self.output_path.display().to_string());
        out
    }
}

/// Normalized-shape Gaussian bump on `grid` (unit peak, not yet mass-scaled).
pub fn gaussian_bump(grid: Arc<Grid>, center: f64, sigma: f64) -> Result<DensityField> {
    let inv = 0.5 / (sigma * sigma);
    DensityField::from_fn(grid, |x| (-(x - center) * (x - center) * inv).exp())
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading table {}", path.display()), e))?;
    let mut xs = Vec::new();
    let mut ns = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty());
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(Error::InvalidInitialData(format!(
                "{}:{}: expected two columns",
                path.display(),
                i + 1
            )));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(n)) => {
                if n < 0.0 {
                    return Err(Error::InvalidInitialData(format!(
                        "{}:{}: negative density {n}",
                        path.display(),
                        i + 1
                    )));
                }
                if xs.last().is_some_and(|&last| x <= last) {
                    return Err(Error::InvalidInitialData(format!(
                        "{}:{}: x must be strictly increasing",
                        path.display(),
                        i + 1
                    )));
                }
                xs.push(x);
                ns.push(n);
            }
            // Header line.
            _ if xs.is_empty() => continue,
            _ => {
                return Err(Error::InvalidInitialData(format!(
                    "{}:{}: cannot parse `{line}`",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInitialData(format!(
            "{}: table needs at least two rows",
            path.display()
        )));
    }
    Ok((xs, ns))
}

/// Linear interpolation, constant before the first node and zero after the last.
fn interpolate(xs: &[f64], ns: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ns[0];
    }
    if x > xs[xs.len() - 1] {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v < x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    ns[k - 1] * (1.0 - t) + ns[k] * t
}

fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

/// Parses and validates a scenario file, applying defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut entries: HashMap<&str, (usize, String)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        // Several assignments may share a line, separated by commas; a piece
        // without `=` continues the previous value.
        let mut pairs: Vec<(String, String)> = Vec::new();
        for piece in line.split(',') {
            match piece.split_once('=') {
                Some((k, v)) => pairs.push((k.trim().to_string(), v.trim().to_string())),
                None => match pairs.last_mut() {
                    Some((_, v)) => {
                        v.push(',');
                        v.push_str(piece);
                    }
                    None => {
                        return Err(config_error(
                            line_no,
                            format!("expected `key = value`, got `{line}`"),
                        ))
                    }
                },
            }
        }
        for (key, value) in pairs {
            let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
                return Err(config_error(line_no, format!("unknown key `{key}`")));
            };
            let value = value.trim();
            if value.is_empty() {
                return Err(config_error(line_no, format!("empty value for `{key}`")));
            }
            if entries.insert(known, (line_no, value.to_string())).is_some() {
                return Err(config_error(line_no, format!("duplicate key `{key}`")));
            }
        }
    }

    let take = |entries: &mut HashMap<&str, (usize, String)>, key: &str| entries.remove(key);
    fn num<T: std::str::FromStr>(entry: Option<(usize, String)>, key: &str) -> Result<Option<T>> {
        match entry {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| config_error(line, format!("cannot parse `{v}` for `{key}`"))),
        }
    }

    let regime = match take(&mut entries, "regime") {
        None => return Err(config_error(0, "missing required key `regime`")),
        Some((line, v)) => Regime::parse(&v)
            .ok_or_else(|| config_error(line, format!("unknown regime `{v}`")))?,
    };
    let mass: f64 = num(take(&mut entries, "M"), "M")?
        .ok_or_else(|| config_error(0, "missing required key `M`"))?;
    let mu0_entry = take(&mut entries, "mu0");
    if regime != Regime::Coupled {
        if let Some((line, _)) = mu0_entry {
            return Err(config_error(line, "`mu0` is only valid with regime = coupled"));
        }
    }
    let mu0: f64 = num(mu0_entry, "mu0")?.unwrap_or(0.0);

    // `initial` may carry its parameters inline, e.g. `exponential 0.5`.
    let (initial_line, initial_text) = take(&mut entries, "initial")
        .unwrap_or((0, "exponential".to_string()));
    let mut words = initial_text.split_whitespace();
    let kind = words.next().unwrap_or("exponential").to_string();
    let inline: Vec<String> = words.map(str::to_string).collect();
    let mut param = |key: &str, pos: usize| -> Result<Option<(usize, String)>> {
        let from_key = entries.remove(key);
        match (from_key, inline.get(pos)) {
            (Some((line, _)), Some(_)) => Err(config_error(
                line,
                format!("`{key}` given both inline in `initial` and as a key"),
            )),
            (Some(e), None) => Ok(Some(e)),
            (None, Some(v)) => Ok(Some((initial_line, v.clone()))),
            (None, None) => Ok(None),
        }
    };
    let inline_limit = match kind.as_str() {
        "exponential" | "scaled_equilibrium" | "custom_table" => 1,
        "gaussian_bump" => 2,
        _ => 0,
    };
    if inline.len() > inline_limit {
        return Err(config_error(initial_line, format!("too many parameters in `{initial_text}`")));
    }
    let initial = match kind.as_str() {
        "exponential" => InitialProfile::Exponential {
            alpha: num(param("alpha", 0)?, "alpha")?.unwrap_or(1.0),
        },
        "scaled_equilibrium" => InitialProfile::ScaledEquilibrium {
            alpha: num(param("alpha", 0)?, "alpha")?,
        },
        "gaussian_bump" => {
            let center = num(param("center", 0)?, "center")?
                .ok_or_else(|| config_error(initial_line, "gaussian_bump needs `center`"))?;
            let sigma = num(param("sigma", 1)?, "sigma")?
                .ok_or_else(|| config_error(initial_line, "gaussian_bump needs `sigma`"))?;
            InitialProfile::GaussianBump { center, sigma }
        }
        "custom_table" => {
            let (_, path) = param("table_path", 0)?
                .ok_or_else(|| config_error(initial_line, "custom_table needs `table_path`"))?;
            InitialProfile::CustomTable { path: path.into() }
        }
        other => {
            return Err(config_error(initial_line, format!("unknown initial profile `{other}`")))
        }
    };
    for key in ["alpha", "center", "sigma", "table_path"] {
        if let Some((line, _)) = entries.get(key) {
            return Err(config_error(
                *line,
                format!("`{key}` is not used by initial = {kind}"),
            ));
        }
    }

    let length: Option<f64> = num(take(&mut entries, "L"), "L")?;
    let cells: usize = num(take(&mut entries, "N"), "N")?.unwrap_or(DEFAULT_CELLS);
    let defaults = StepControl::default();
    let control = StepControl {
        dt_initial: num(take(&mut entries, "dt_initial"), "dt_initial")?.unwrap_or(defaults.dt_initial),
        dt_min: num(take(&mut entries, "dt_min"), "dt_min")?.unwrap_or(defaults.dt_min),
        safety_factor: num(take(&mut entries, "safety_factor"), "safety_factor")?
            .unwrap_or(defaults.safety_factor),
        blowup_threshold: num(take(&mut entries, "B_max"), "B_max")?.unwrap_or(defaults.blowup_threshold),
        resolution_limit: defaults.resolution_limit,
    };
    let t_final = take(&mut entries, "T_final");
    let tau_final = take(&mut entries, "tau_final");
    let final_time = if regime == Regime::SelfSimilar {
        if let Some((line, _)) = t_final {
            return Err(config_error(line, "regime selfsimilar uses `tau_final`, not `T_final`"));
        }
        num(tau_final, "tau_final")?.unwrap_or(DEFAULT_TAU_FINAL)
    } else {
        if let Some((line, _)) = tau_final {
            return Err(config_error(line, "`tau_final` is only valid with regime = selfsimilar"));
        }
        num(t_final, "T_final")?.unwrap_or(DEFAULT_T_FINAL)
    };
    let diag_every = num(take(&mut entries, "diag_every"), "diag_every")?.unwrap_or(DEFAULT_DIAG_EVERY);
    let output_path: PathBuf = take(&mut entries, "out")
        .map(|(_, v)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("out"));
    debug_assert!(entries.is_empty(), "unconsumed keys: {:?}", entries.keys());

    if regime == Regime::SelfSimilar && !(mass > 0.0 && mass < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "regime selfsimilar needs 0 < M < 1, got M = {mass}"
        )));
    }
    let length = match length {
        Some(l) => l,
        None if regime == Regime::SelfSimilar => {
            default_rescaled_length(solve_alpha_for_mass(mass)?)
        }
        None => DEFAULT_LENGTH,
    };

    let config = ScenarioConfig {
        regime,
        mass,
        mu0,
        initial,
        length,
        cells,
        control,
        final_time,
        diag_every,
        output_path,
        seed_label: "scenario".into(),
    };
    config.validate()?;
    Ok(config)
}

/// Reads and parses a scenario file; the label is the file stem.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    Ok(parse_config(&text)?.with_label(label))
}
