//! Flat key-value experiment configuration.
//!
//! One `key = value` per line, `#` starts a comment. Every key has a default
//! taken from the measured parameter set, so an empty config is valid. The
//! fully resolved configuration is echoed into every JSON summary for exact
//! replay.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use cvteleport::interaction::{
    PhysicalParams, DEFAULT_ETA_A, DEFAULT_ETA_B, DEFAULT_GAMMA_EXTRA, DEFAULT_GAMMA_TOTAL,
    DEFAULT_NOISE_MULTIPLIER, DEFAULT_OMEGA_LARMOR, DEFAULT_READOUT_PULSE, DEFAULT_TELEPORT_PULSE,
    DEFAULT_Z_SQUARED,
};

/// Configuration problem tied to a specific field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.to_string(), message: message.into() }
}

/// Gain request: an explicit value or per-alphabet optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GainSpec {
    Fixed(f64),
    Optimal,
}

/// Output format selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[clap(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// Waveform selection for the sequence command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WaveformSpec {
    /// Built-in amplitude/phase-modulated illustrative waveform.
    Lookalike,
    /// CSV file with one `x,p` pair per line.
    File(PathBuf),
}

/// Fully resolved experiment configuration: every default expanded.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub gamma_s: f64,
    pub gamma_extra: f64,
    pub z: f64,
    pub m: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub omega_larmor: f64,
    pub teleport_t: f64,
    pub readout_t: f64,
    pub gain: GainSpec,
    /// Transfer-ratio request; when set it overrides `gain` via `g = c_A/κ`.
    pub transfer: Option<f64>,
    pub nbar: f64,
    pub nbar_grid: Vec<f64>,
    pub gains_grid: Vec<f64>,
    pub n_runs: usize,
    pub seed: u64,
    pub input_x: f64,
    pub input_p: f64,
    pub cycle_rate: f64,
    pub n_cycles: usize,
    pub window: usize,
    pub amplitude: f64,
    pub waveform: WaveformSpec,
    /// Output directory; delivery knob, not part of the replayable
    /// experiment definition, so it is omitted from the JSON echo.
    #[serde(skip)]
    pub out: PathBuf,
    /// Output format selection; likewise omitted from the echo.
    #[serde(skip)]
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gamma_s: DEFAULT_GAMMA_TOTAL - DEFAULT_GAMMA_EXTRA,
            gamma_extra: DEFAULT_GAMMA_EXTRA,
            z: DEFAULT_Z_SQUARED.sqrt(),
            m: DEFAULT_NOISE_MULTIPLIER,
            eta_a: DEFAULT_ETA_A,
            eta_b: DEFAULT_ETA_B,
            omega_larmor: DEFAULT_OMEGA_LARMOR,
            teleport_t: DEFAULT_TELEPORT_PULSE,
            readout_t: DEFAULT_READOUT_PULSE,
            gain: GainSpec::Optimal,
            transfer: None,
            nbar: 5.0,
            nbar_grid: (0..=10).map(f64::from).collect(),
            gains_grid: (0..=12).map(|i| f64::from(i) * 0.1).collect(),
            n_runs: 20_000,
            seed: 1,
            input_x: 5.0,
            input_p: 0.0,
            cycle_rate: 50.0,
            n_cycles: 10_000,
            window: 250,
            amplitude: 5.0,
            waveform: WaveformSpec::Lookalike,
            out: PathBuf::from("out"),
            format: OutputFormat::Both,
        }
    }
}

fn parse_f64(field: &str, value: &str) -> Result<f64, ConfigError> {
    value.trim().parse::<f64>().map_err(|_| err(field, format!("expected a number, got `{value}`")))
}

fn parse_grid(field: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    let grid: Result<Vec<f64>, _> = value
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect();
    let grid = grid.map_err(|_| err(field, format!("expected comma-separated numbers, got `{value}`")))?;
    if grid.is_empty() {
        return Err(err(field, "grid must not be empty"));
    }
    Ok(grid)
}

pub fn parse_gain(field: &str, value: &str) -> Result<GainSpec, ConfigError> {
    if value.trim() == "optimal" {
        return Ok(GainSpec::Optimal);
    }
    Ok(GainSpec::Fixed(parse_f64(field, value)?))
}

impl ExperimentConfig {
    /// Parse a flat key-value file and resolve it over the defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut raw: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("config", format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_string();
            if raw.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(err(&key, "duplicate key"));
            }
        }
        Self::from_map(raw)
    }

    fn from_map(raw: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();

        // decay-rate entry forms: exactly one of gamma / gamma_s
        let gamma = raw.get("gamma").map(|v| parse_f64("gamma", v)).transpose()?;
        let gamma_s = raw.get("gamma_s").map(|v| parse_f64("gamma_s", v)).transpose()?;
        if gamma.is_some() && gamma_s.is_some() {
            return Err(err("gamma", "supply exactly one of `gamma` or `gamma_s`, not both"));
        }
        if let Some(ge) = raw.get("gamma_extra") {
            cfg.gamma_extra = parse_f64("gamma_extra", ge)?;
        }
        cfg.gamma_s = match (gamma, gamma_s) {
            (Some(g), None) => g - cfg.gamma_extra,
            (None, Some(gs)) => gs,
            (None, None) => DEFAULT_GAMMA_TOTAL - cfg.gamma_extra,
            (Some(_), Some(_)) => unreachable!(),
        };

        // coupling asymmetry entry forms: z or z2
        let z = raw.get("z").map(|v| parse_f64("z", v)).transpose()?;
        let z2 = raw.get("z2").map(|v| parse_f64("z2", v)).transpose()?;
        cfg.z = match (z, z2) {
            (Some(_), Some(_)) => {
                return Err(err("z", "supply exactly one of `z` or `z2`, not both"))
            }
            (Some(z), None) => z,
            (None, Some(z2)) => {
                if z2 <= 0.0 {
                    return Err(err("z2", "must be positive"));
                }
                z2.sqrt()
            }
            (None, None) => DEFAULT_Z_SQUARED.sqrt(),
        };

        for (key, value) in &raw {
            match key.as_str() {
                "gamma" | "gamma_s" | "gamma_extra" | "z" | "z2" => {}
                "m" => cfg.m = parse_f64(key, value)?,
                "eta_a" => cfg.eta_a = parse_f64(key, value)?,
                "eta_b" => cfg.eta_b = parse_f64(key, value)?,
                "omega_larmor" => cfg.omega_larmor = parse_f64(key, value)?,
                "teleport_t" => cfg.teleport_t = parse_f64(key, value)?,
                "readout_t" => cfg.readout_t = parse_f64(key, value)?,
                "gain" => cfg.gain = parse_gain(key, value)?,
                "transfer" => cfg.transfer = Some(parse_f64(key, value)?),
                "nbar" => cfg.nbar = parse_f64(key, value)?,
                "nbar_grid" => cfg.nbar_grid = parse_grid(key, value)?,
                "gains_grid" => cfg.gains_grid = parse_grid(key, value)?,
                "n_runs" => {
                    cfg.n_runs = value
                        .parse()
                        .map_err(|_| err(key, format!("expected a count, got `{value}`")))?
                }
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| err(key, format!("expected an unsigned integer, got `{value}`")))?
                }
                "input_x" => cfg.input_x = parse_f64(key, value)?,
                "input_p" => cfg.input_p = parse_f64(key, value)?,
                "cycle_rate" => cfg.cycle_rate = parse_f64(key, value)?,
                "n_cycles" => {
                    cfg.n_cycles = value
                        .parse()
                        .map_err(|_| err(key, format!("expected a count, got `{value}`")))?
                }
                "window" => {
                    cfg.window = value
                        .parse()
                        .map_err(|_| err(key, format!("expected a count, got `{value}`")))?
                }
                "amplitude" => cfg.amplitude = parse_f64(key, value)?,
                "waveform" => {
                    cfg.waveform = if value == "lookalike" {
                        WaveformSpec::Lookalike
                    } else if let Some(path) = value.strip_prefix("file:") {
                        WaveformSpec::File(PathBuf::from(path))
                    } else {
                        return Err(err(key, "expected `lookalike` or `file:<path>`"));
                    }
                }
                "out" => cfg.out = PathBuf::from(value),
                "format" => {
                    cfg.format = match value.as_str() {
                        "csv" => OutputFormat::Csv,
                        "json" => OutputFormat::Json,
                        "both" => OutputFormat::Both,
                        other => return Err(err(key, format!("expected csv|json|both, got `{other}`"))),
                    }
                }
                other => return Err(err(other, "unknown key")),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma_s.is_finite() && self.gamma_s > 0.0) {
            return Err(err("gamma_s", "collective decay rate (gamma - gamma_extra) must be positive"));
        }
        if !(self.gamma_extra.is_finite() && self.gamma_extra >= 0.0) {
            return Err(err("gamma_extra", "must be non-negative"));
        }
        if !(self.z.is_finite() && self.z > 1.0) {
            return Err(err("z", "must exceed 1"));
        }
        if self.nbar < 0.0 {
            return Err(err("nbar", "must be non-negative"));
        }
        if self.nbar_grid.is_empty() {
            return Err(err("nbar_grid", "must not be empty"));
        }
        if self.gains_grid.is_empty() {
            return Err(err("gains_grid", "must not be empty"));
        }
        if self.cycle_rate <= 0.0 {
            return Err(err("cycle_rate", "must be positive"));
        }
        if self.n_cycles == 0 {
            return Err(err("n_cycles", "must be positive"));
        }
        if self.window == 0 {
            return Err(err("window", "must be positive"));
        }
        // parameter-level validation, surfaced with the offending field
        self.teleport_params().map(|_| ())?;
        self.readout_params().map(|_| ())
    }

    pub fn teleport_params(&self) -> Result<PhysicalParams, ConfigError> {
        self.params_with(self.teleport_t, "teleport_t")
    }

    pub fn readout_params(&self) -> Result<PhysicalParams, ConfigError> {
        self.params_with(self.readout_t, "readout_t")
    }

    fn params_with(&self, t: f64, field: &str) -> Result<PhysicalParams, ConfigError> {
        let mut p = PhysicalParams::new(self.gamma_s, self.gamma_extra, self.z, t)
            .map_err(|e| err(field, e.to_string()))?;
        p.noise_multiplier = self.m;
        p.eta_a = self.eta_a;
        p.eta_b = self.eta_b;
        p.omega_larmor = self.omega_larmor;
        if !(self.m.is_finite() && self.m >= 1.0) {
            return Err(err("m", "must be at least 1"));
        }
        for (name, eta) in [("eta_a", self.eta_a), ("eta_b", self.eta_b)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(err(name, "must lie in (0, 1]"));
            }
        }
        Ok(p)
    }
}
