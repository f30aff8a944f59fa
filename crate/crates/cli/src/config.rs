//! Flat `key = value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::{Path, PathBuf};

use prbox_core::{GaussianTwoModeState, MeasurementSettings};

use crate::error::{CliError, CliResult};

const KEYS: &[&str] = &[
    "delta",
    "gamma",
    "scale_s_mm",
    "swap_widths",
    "alpha",
    "alpha_prime",
    "beta",
    "beta_prime",
    "r",
    "r_unit",
    "n",
    "seed",
    "beta_min",
    "beta_max",
    "steps",
    "reference",
    "reference_phase",
    "format",
    "path",
    "precision",
    "target",
    "inventory",
    "max_stages",
    "angle_tol",
    "stages",
    "grid_step",
    "refine_tol",
    "target_fidelity",
    "r_max",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RUnit {
    Dimensionless,
    Mm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateConfig {
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub scale_s_mm: f64,
    pub swap_widths: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingsConfig {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub r: Vec<f64>,
    pub r_unit: Option<RUnit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    pub steps: usize,
    pub reference: bool,
    pub reference_phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub format: Format,
    pub path: Option<PathBuf>,
    pub precision: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub target: Option<f64>,
    pub inventory: Vec<f64>,
    pub max_stages: usize,
    pub angle_tol: f64,
    /// Explicit `(order, focal_cm)` stages to tabulate instead of planning.
    pub stages: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub grid_step: f64,
    pub refine_tol: f64,
    pub target_fidelity: Option<f64>,
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub state: StateConfig,
    pub settings: SettingsConfig,
    pub mc: McConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub plan: PlanConfig,
    pub optimize: OptimizeConfig,
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

/// Parses an angle in radians, accepting multiples of pi such as `pi`, `-pi/2`, `5pi/4` or `0.5*pi`.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(idx) = s.find("pi") else {
        return parse_real(&s);
    };
    let coef_text = s[..idx].trim_end_matches('*');
    let coef = match coef_text {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => parse_real(c)?,
    };
    let rest = &s[idx + 2..];
    let denom = if rest.is_empty() {
        1.0
    } else if let Some(d) = rest.strip_prefix('/') {
        let d = parse_real(d)?;
        if d == 0.0 {
            return Err(format!("zero denominator in `{text}`"));
        }
        d
    } else {
        return Err(format!("cannot parse angle `{text}`"));
    };
    Ok(coef * PI / denom)
}

fn parse_real(text: &str) -> Result<f64, String> {
    let v: f64 = text.trim().parse().map_err(|_| format!("`{text}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{text}` is not finite"))
    }
}

/// Correlation width; `inf` selects the separable state.
fn parse_gamma(text: &str) -> Result<f64, String> {
    match text.trim() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => parse_real(other),
    }
}

fn parse_bool(text: &str) -> Result<bool, String> {
    match text.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

fn parse_list<T>(text: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|t| item(t.trim())).collect()
}

fn parse_stage(text: &str) -> Result<(f64, f64), String> {
    let (theta, f) = text.split_once('@').ok_or_else(|| format!("stage `{text}` must look like `theta@f_cm`"))?;
    Ok((parse_angle(theta)?, parse_real(f)?))
}

struct Raw {
    values: BTreeMap<String, String>,
}

impl Raw {
    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> CliResult<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => parse(v).map(Some).map_err(|e| config_err(key, e)),
        }
    }

    fn or<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> CliResult<T> {
        Ok(self.get(key, parse)?.unwrap_or(default))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let raw = Raw { values };

        let parse_u64 = |t: &str| t.parse::<u64>().map_err(|_| format!("`{t}` is not a non-negative integer"));
        let parse_usize = |t: &str| t.parse::<usize>().map_err(|_| format!("`{t}` is not a non-negative integer"));

        let config = RunConfig {
            state: StateConfig {
                delta: raw.get("delta", parse_real)?,
                gamma: raw.get("gamma", parse_gamma)?,
                scale_s_mm: raw.or("scale_s_mm", 1.0, parse_real)?,
                swap_widths: raw.or("swap_widths", false, parse_bool)?,
            },
            settings: SettingsConfig {
                alpha: raw.or("alpha", PI, parse_angle)?,
                alpha_prime: raw.or("alpha_prime", FRAC_PI_2, parse_angle)?,
                beta: raw.or("beta", 5.0 * PI / 4.0, parse_angle)?,
                beta_prime: raw.or("beta_prime", 3.0 * PI / 4.0, parse_angle)?,
                r: raw.or("r", Vec::new(), |t| parse_list(t, parse_real))?,
                r_unit: raw.get("r_unit", |t| match t {
                    "dimensionless" => Ok(RUnit::Dimensionless),
                    "mm" => Ok(RUnit::Mm),
                    other => Err(format!("`{other}` is not one of dimensionless, mm")),
                })?,
            },
            mc: McConfig { n: raw.or("n", 1_000_000, parse_u64)?, seed: raw.or("seed", 0, parse_u64)? },
            sweep: SweepConfig {
                beta_min: raw.or("beta_min", 0.0, parse_angle)?,
                beta_max: raw.or("beta_max", TAU, parse_angle)?,
                steps: raw.or("steps", 201, parse_usize)?,
                reference: raw.or("reference", false, parse_bool)?,
                reference_phase: raw.or("reference_phase", 0.0, parse_angle)?,
            },
            output: OutputConfig {
                format: raw.or("format", Format::Csv, |t| match t {
                    "csv" => Ok(Format::Csv),
                    "json" => Ok(Format::Json),
                    other => Err(format!("`{other}` is not one of csv, json")),
                })?,
                path: raw.get("path", |t| Ok(PathBuf::from(t)))?,
                precision: raw.or("precision", 6, parse_usize)?,
            },
            plan: PlanConfig {
                target: raw.get("target", parse_angle)?,
                inventory: raw.or("inventory", Vec::new(), |t| parse_list(t, parse_real))?,
                max_stages: raw.or("max_stages", 2, parse_usize)?,
                angle_tol: raw.or("angle_tol", 1e-6, parse_real)?,
                stages: raw.or("stages", Vec::new(), |t| parse_list(t, parse_stage))?,
            },
            optimize: OptimizeConfig {
                grid_step: raw.or("grid_step", PI / 8.0, parse_angle)?,
                refine_tol: raw.or("refine_tol", 1e-4, parse_real)?,
                target_fidelity: raw.get("target_fidelity", parse_real)?,
                r_max: raw.or("r_max", 3.0, parse_real)?,
            },
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        if !(self.state.scale_s_mm > 0.0) {
            return Err(config_err("scale_s_mm", "must be positive"));
        }
        if !self.settings.r.is_empty() && self.settings.r_unit.is_none() {
            return Err(config_err("r_unit", "required when `r` is given (dimensionless or mm)"));
        }
        if let Some(bad) = self.settings.r.iter().find(|r| **r < 0.0) {
            return Err(config_err("r", format!("{bad} is negative")));
        }
        if self.mc.n == 0 {
            return Err(config_err("n", "must be at least 1"));
        }
        if self.sweep.steps == 0 {
            return Err(config_err("steps", "must be at least 1"));
        }
        if self.sweep.beta_max < self.sweep.beta_min {
            return Err(config_err("beta_max", "must not be below beta_min"));
        }
        if !(1..=17).contains(&self.output.precision) {
            return Err(config_err("precision", "must lie in 1..=17"));
        }
        if self.plan.max_stages == 0 {
            return Err(config_err("max_stages", "must be at least 1"));
        }
        if !(self.plan.angle_tol >= 0.0) {
            return Err(config_err("angle_tol", "must be >= 0"));
        }
        if !(self.optimize.grid_step > 0.0 && self.optimize.grid_step <= TAU) {
            return Err(config_err("grid_step", "must lie in (0, 2pi]"));
        }
        if !(self.optimize.refine_tol > 0.0) {
            return Err(config_err("refine_tol", "must be positive"));
        }
        if let Some(t) = self.optimize.target_fidelity {
            if !(t > 0.0 && t < 1.0) {
                return Err(config_err("target_fidelity", "must lie in (0, 1)"));
            }
        }
        if !(self.optimize.r_max > 0.0) {
            return Err(config_err("r_max", "must be positive"));
        }
        Ok(())
    }

    /// The state, with widths exchanged first when `swap_widths` is set.
    pub fn state(&self) -> CliResult<GaussianTwoModeState> {
        let delta = self.state.delta.ok_or_else(|| config_err("delta", "missing"))?;
        let gamma = self.state.gamma.ok_or_else(|| config_err("gamma", "missing"))?;
        let (delta, gamma) = if self.state.swap_widths { (gamma, delta) } else { (delta, gamma) };
        Ok(GaussianTwoModeState::with_scale(delta, gamma, self.state.scale_s_mm)?)
    }

    /// Dark-region half-widths converted to dimensionless units.
    pub fn r_values(&self, state: &GaussianTwoModeState) -> CliResult<Vec<f64>> {
        if self.settings.r.is_empty() {
            return Err(config_err("r", "missing"));
        }
        Ok(match self.settings.r_unit {
            Some(RUnit::Mm) => self.settings.r.iter().map(|&mm| state.mm_to_dimensionless(mm)).collect(),
            _ => self.settings.r.clone(),
        })
    }

    pub fn measurement_settings(&self, r: f64) -> CliResult<MeasurementSettings> {
        let s = &self.settings;
        Ok(MeasurementSettings::new(s.alpha, s.alpha_prime, s.beta, s.beta_prime, r)?)
    }

    pub fn beta_grid(&self) -> Vec<f64> {
        let s = &self.sweep;
        if s.steps == 1 {
            return vec![s.beta_min];
        }
        let step = (s.beta_max - s.beta_min) / (s.steps - 1) as f64;
        (0..s.steps).map(|i| s.beta_min + step * i as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_in_pi_notation() {
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("5pi/4").unwrap(), 5.0 * PI / 4.0);
        assert_eq!(parse_angle("37 pi / 50").unwrap(), 37.0 * PI / 50.0);
        assert_eq!(parse_angle("0.5*pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_angle("1.25").unwrap(), 1.25);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("2pix").is_err());
        assert!(parse_angle("abc").is_err());
    }

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::parse(
            "# comment\ndelta = 1.25\ngamma = 0.75 # trailing\nswap_widths = true\nr = 0.75, 1, 2\nr_unit = dimensionless\nbeta = 5pi/4\n",
        )
        .unwrap();
        let state = cfg.state().unwrap();
        assert_eq!((state.delta(), state.gamma()), (0.75, 1.25));
        assert_eq!(cfg.settings.r, vec![0.75, 1.0, 2.0]);
        assert_eq!(cfg.settings.beta, 5.0 * PI / 4.0);
        assert_eq!(cfg.output.precision, 6);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "bogus = 1",
            "delta = 1\ndelta = 2",
            "delta",
            "r = 1",
            "r = 1\nr_unit = furlong",
            "steps = 0",
            "precision = 0",
            "n = -4",
            "target_fidelity = 1.2",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn millimetres_are_scaled() {
        let cfg = RunConfig::parse("delta=0.75\ngamma=1.25\nscale_s_mm=0.25\nr=0.1,0.5\nr_unit=mm").unwrap();
        let state = cfg.state().unwrap();
        let r = cfg.r_values(&state).unwrap();
        assert!((r[0] - 0.4).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn beta_grid_endpoints() {
        let cfg = RunConfig::parse("beta_min = 0\nbeta_max = pi\nsteps = 5").unwrap();
        let grid = cfg.beta_grid();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], 0.0);
        assert!((grid[4] - PI).abs() < 1e-15);
        let single = RunConfig::parse("steps = 1\nbeta_min = 1").unwrap().beta_grid();
        assert_eq!(single, vec![1.0]);
    }
}
