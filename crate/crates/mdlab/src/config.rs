//! Run configuration: a flat sections + key = value text format.
//!
//! Grammar: section headers in brackets (`[grid]`), `key = value` pairs,
//! `#` starts a comment (full-line or trailing). Unknown sections or keys are
//! errors, not warnings. Lists are whitespace-separated. `dt = auto` defers
//! to the grid-derived default step.

use serde::Serialize;

use crate::error::MdError;
use crate::evolve::{Coupling, IntegratorConfig, Scheme};
use crate::scattering::{DriftSpec, PaperConstants};
use crate::state::DataRecipe;
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    // [grid]
    pub n: usize,
    pub box_length: f64,
    pub mass: f64,
    // [data]
    pub recipe: DataRecipe,
    // [integrator]
    pub dt: Option<f64>,
    pub scheme: Scheme,
    pub dealias: bool,
    pub coupling: Coupling,
    // [run]
    pub t_end: f64,
    pub observer_stride: usize,
    pub checkpoint_times: Vec<f64>,
    pub checkpoint_period: f64,
    pub output_dir: String,
    pub allow_past_horizon: bool,
    // [constants]
    pub constants: PaperConstants,
    // [phase]
    pub phase_enabled: bool,
    pub phase_mode_budget: usize,
    pub phase_dense_modes: usize,
    pub phase_coarse_ds: f64,
    // [scan]
    pub scan_samples: usize,
    pub scan_log2_r_min: f64,
    pub scan_log2_r_max: f64,
    pub scan_seed: u64,
    pub scan_export_phase_grid: bool,
    // [drift]
    pub drift: DriftSpec,
    pub drift_checkpoint_a: String,
    pub drift_checkpoint_b: String,
    // [identity]
    pub identity_samples: usize,
    pub identity_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 32,
            box_length: 40.0,
            mass: 1.0,
            recipe: DataRecipe::default(),
            dt: None,
            scheme: Scheme::IfRk4,
            dealias: true,
            coupling: Coupling::Full,
            t_end: 10.0,
            observer_stride: 10,
            checkpoint_times: Vec::new(),
            checkpoint_period: 0.0,
            output_dir: "out".into(),
            allow_past_horizon: false,
            constants: PaperConstants::default(),
            phase_enabled: true,
            phase_mode_budget: 1 << 22,
            phase_dense_modes: 4096,
            phase_coarse_ds: 1.0,
            scan_samples: 200_000,
            scan_log2_r_min: -10.0,
            scan_log2_r_max: 10.0,
            scan_seed: 0xD1AC,
            scan_export_phase_grid: false,
            drift: DriftSpec::default(),
            drift_checkpoint_a: String::new(),
            drift_checkpoint_b: String::new(),
            identity_samples: 10_000,
            identity_seed: 5,
        }
    }
}

impl RunConfig {
    /// Data radius used by the horizon guard.
    pub fn data_radius(&self) -> f64 {
        self.recipe.data_radius()
    }

    /// Horizon L/2 - r0 beyond which decay measurements are contaminated by
    /// wrap-around (group speed <= 1).
    pub fn horizon(&self) -> f64 {
        self.box_length / 2.0 - self.data_radius()
    }

    pub fn integrator(&self, grid: &crate::grid::FourierGrid) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.dt.unwrap_or_else(|| IntegratorConfig::auto_dt(grid)),
            scheme: self.scheme,
            dealias: self.dealias,
            coupling: self.coupling,
            horizon: Some(self.horizon()),
        }
    }

    /// Constants that differ from the defaults, for the report header.
    pub fn constant_overrides(&self) -> Vec<String> {
        let d = PaperConstants::default();
        let mut out = Vec::new();
        if self.constants.delta != d.delta {
            out.push(format!("delta = {:e}", self.constants.delta));
        }
        if self.constants.zeta != d.zeta {
            out.push(format!("zeta = {:e}", self.constants.zeta));
        }
        if self.constants.delta_bar != d.delta_bar {
            out.push(format!("delta_bar = {:e}", self.constants.delta_bar));
        }
        if self.constants.n_table != d.n_table {
            out.push(format!("n_table = {:?}", self.constants.n_table));
        }
        if self.constants.h_table != d.h_table {
            out.push(format!("h_table = {:?}", self.constants.h_table));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || self.n % 2 != 0 {
            return Err(MdError::Validation {
                field: "grid.n".into(),
                msg: format!("n must be an even integer >= 4 (got {})", self.n),
            });
        }
        if !(self.box_length > 0.0) {
            return Err(MdError::Validation {
                field: "grid.L".into(),
                msg: "box length must be positive".into(),
            });
        }
        crate::dirac::validate_mass(self.mass)?;
        if !(self.recipe.epsilon.is_finite()) || self.recipe.width <= 0.0 {
            return Err(MdError::Validation {
                field: "data".into(),
                msg: "epsilon must be finite and width positive".into(),
            });
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(MdError::Validation {
                    field: "integrator.dt".into(),
                    msg: "dt must be positive".into(),
                });
            }
        }
        if self.t_end < 0.0 {
            return Err(MdError::Validation {
                field: "run.T".into(),
                msg: "T must be nonnegative".into(),
            });
        }
        if self.t_end > self.horizon() && !self.allow_past_horizon {
            return Err(MdError::Validation {
                field: "run.T".into(),
                msg: format!(
                    "T = {} exceeds the horizon L/2 - r0 = {:.3}; set run.allow_past_horizon = true to override (measurements past the horizon are flagged)",
                    self.t_end,
                    self.horizon()
                ),
            });
        }
        if self.observer_stride == 0 {
            return Err(MdError::Validation {
                field: "run.observer_stride".into(),
                msg: "stride must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Parse a configuration file. Empty input gives the defaults.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        if stripped.starts_with('[') {
            if !stripped.ends_with(']') {
                return Err(MdError::Config { line, msg: "unterminated section header".into() });
            }
            section = stripped[1..stripped.len() - 1].trim().to_lowercase();
            const SECTIONS: [&str; 8] =
                ["grid", "data", "integrator", "run", "constants", "phase", "scan", "drift"];
            if !SECTIONS.contains(&section.as_str()) && section != "identity" {
                return Err(MdError::Config {
                    line,
                    msg: format!("unknown section [{section}]"),
                });
            }
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or_else(|| MdError::Config {
            line,
            msg: format!("expected `key = value`, got `{stripped}`"),
        })?;
        let key = key.trim().to_lowercase();
        let value = value.trim();
        apply_key(&mut cfg, &section, &key, value, line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_f64(value: &str, line: usize) -> Result<f64> {
    value.parse::<f64>().map_err(|_| MdError::Config {
        line,
        msg: format!("expected a number, got `{value}`"),
    })
}

fn parse_usize(value: &str, line: usize) -> Result<usize> {
    value.parse::<usize>().map_err(|_| MdError::Config {
        line,
        msg: format!("expected a nonnegative integer, got `{value}`"),
    })
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value.to_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(MdError::Config {
            line,
            msg: format!("expected a boolean, got `{value}`"),
        }),
    }
}

fn parse_f64_list(value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|v| parse_f64(v, line))
        .collect()
}

fn apply_key(cfg: &mut RunConfig, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
    let unknown = || -> MdError {
        MdError::Config {
            line,
            msg: format!("unknown key `{key}` in section [{section}]"),
        }
    };
    match section {
        "grid" => match key {
            "n" => cfg.n = parse_usize(value, line)?,
            "l" => cfg.box_length = parse_f64(value, line)?,
            "mass" => cfg.mass = parse_f64(value, line)?,
            _ => return Err(unknown()),
        },
        "data" => match key {
            "epsilon" => cfg.recipe.epsilon = parse_f64(value, line)?,
            "width" => cfg.recipe.width = parse_f64(value, line)?,
            "xi_shift" => {
                let v = parse_f64_list(value, line)?;
                if v.len() != 3 {
                    return Err(MdError::Config { line, msg: "xi_shift needs 3 numbers".into() });
                }
                cfg.recipe.xi_shift = [v[0], v[1], v[2]];
            }
            "polarization" => {
                let v = parse_f64_list(value, line)?;
                if v.len() != 8 {
                    return Err(MdError::Config {
                        line,
                        msg: "polarization needs 8 numbers (re, im per component)".into(),
                    });
                }
                for c in 0..4 {
                    cfg.recipe.polarization[c] = [v[2 * c], v[2 * c + 1]];
                }
            }
            "gauge_amp" => cfg.recipe.gauge_amp = parse_f64(value, line)?,
            "gauge_width" => cfg.recipe.gauge_width = parse_f64(value, line)?,
            "seed" => cfg.recipe.seed = parse_usize(value, line)? as u64,
            _ => return Err(unknown()),
        },
        "integrator" => match key {
            "dt" => {
                cfg.dt = if value.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse_f64(value, line)?)
                }
            }
            "scheme" => {
                cfg.scheme = match value.to_lowercase().as_str() {
                    "ifrk4" | "rk4" => Scheme::IfRk4,
                    "strang2" | "strang" => Scheme::Strang2,
                    _ => {
                        return Err(MdError::Config {
                            line,
                            msg: format!("unknown scheme `{value}` (ifrk4 | strang2)"),
                        })
                    }
                }
            }
            "dealias" => cfg.dealias = parse_bool(value, line)?,
            "coupling" => {
                cfg.coupling = match value.to_lowercase().as_str() {
                    "full" | "on" => Coupling::Full,
                    "off" => Coupling::Off,
                    _ => {
                        return Err(MdError::Config {
                            line,
                            msg: format!("unknown coupling `{value}` (full | off)"),
                        })
                    }
                }
            }
            _ => return Err(unknown()),
        },
        "run" => match key {
            "t" => cfg.t_end = parse_f64(value, line)?,
            "observer_stride" => cfg.observer_stride = parse_usize(value, line)?,
            "checkpoint_times" => cfg.checkpoint_times = parse_f64_list(value, line)?,
            "checkpoint_period" => cfg.checkpoint_period = parse_f64(value, line)?,
            "output_dir" => cfg.output_dir = value.to_string(),
            "allow_past_horizon" => cfg.allow_past_horizon = parse_bool(value, line)?,
            _ => return Err(unknown()),
        },
        "constants" => match key {
            "delta" => {
                cfg.constants.delta = parse_f64(value, line)?;
            }
            "zeta" => cfg.constants.zeta = parse_f64(value, line)?,
            "delta_bar" => cfg.constants.delta_bar = parse_f64(value, line)?,
            "n_table" => {
                let v = parse_f64_list(value, line)?;
                if v.len() != 4 {
                    return Err(MdError::Config { line, msg: "n_table needs 4 numbers".into() });
                }
                cfg.constants.n_table = [v[0], v[1], v[2], v[3]];
            }
            "h_table" => {
                let v = parse_f64_list(value, line)?;
                if v.len() != 4 {
                    return Err(MdError::Config { line, msg: "h_table needs 4 numbers".into() });
                }
                cfg.constants.h_table = [v[0], v[1], v[2], v[3]];
            }
            _ => return Err(unknown()),
        },
        "phase" => match key {
            "enabled" => cfg.phase_enabled = parse_bool(value, line)?,
            "mode_budget" => cfg.phase_mode_budget = parse_usize(value, line)?,
            "dense_modes" => cfg.phase_dense_modes = parse_usize(value, line)?,
            "coarse_ds" => cfg.phase_coarse_ds = parse_f64(value, line)?,
            _ => return Err(unknown()),
        },
        "scan" => match key {
            "samples" => cfg.scan_samples = parse_usize(value, line)?,
            "log2_r_min" => cfg.scan_log2_r_min = parse_f64(value, line)?,
            "log2_r_max" => cfg.scan_log2_r_max = parse_f64(value, line)?,
            "seed" => cfg.scan_seed = parse_usize(value, line)? as u64,
            "export_phase_grid" => cfg.scan_export_phase_grid = parse_bool(value, line)?,
            _ => return Err(unknown()),
        },
        "drift" => match key {
            "k_lo" => cfg.drift.k_lo = parse_f64(value, line)? as i32,
            "k_hi" => cfg.drift.k_hi = parse_f64(value, line)? as i32,
            "top_modes" => cfg.drift.top_modes = parse_usize(value, line)?,
            "checkpoint_a" => cfg.drift_checkpoint_a = value.to_string(),
            "checkpoint_b" => cfg.drift_checkpoint_b = value.to_string(),
            _ => return Err(unknown()),
        },
        "identity" => match key {
            "samples" => cfg.identity_samples = parse_usize(value, line)?,
            "seed" => cfg.identity_seed = parse_usize(value, line)? as u64,
            _ => return Err(unknown()),
        },
        "" => {
            return Err(MdError::Config {
                line,
                msg: format!("key `{key}` outside any section"),
            })
        }
        _ => return Err(unknown()),
    }
    Ok(())
}
