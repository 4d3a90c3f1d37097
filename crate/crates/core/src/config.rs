//! Run configuration: flat `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! [run]
//! seed = 1
//!
//! [acquisition]
//! f_us_hz = 1250000
//! mode = coded:79
//!
//! [phantom]
//! mu_s_prime_per_cm = 15
//! ```
//!
//! Every key is optional and falls back to the experimental defaults; unknown sections,
//! unknown keys and repeated keys are errors. `#` starts a comment line. The
//! [`Display`](std::fmt::Display) form lists every resolved key and parses back to
//! the same configuration, which is what run manifests rely on.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::demux::InverseKind;
use crate::error::{Error, Result};
use crate::pipeline::{ReferenceRate, SnrOptions};
use crate::simulator::{AcquisitionConfig, Boundary, Mode, Phantom, ScanGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub orders: Vec<usize>,
    pub reference: ReferenceRate,
    pub solver: InverseKind,
    pub subtract_noise_floor: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trials: 30,
            orders: vec![79],
            reference: ReferenceRate::Matched,
            solver: InverseKind::Spectral,
            subtract_noise_floor: false,
        }
    }
}

impl ExperimentConfig {
    pub fn snr_options(&self) -> SnrOptions {
        SnrOptions {
            n_trials: self.trials,
            solver: self.solver,
            subtract_noise_floor: self.subtract_noise_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub acquisition: AcquisitionConfig,
    pub phantom: Phantom,
    pub experiment: ExperimentConfig,
    pub scan: ScanGrid,
    pub output_dir: Option<String>,
}

fn parse<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{raw}` for `{key}`")))
}

fn parse_orders(raw: &str) -> Result<Vec<usize>> {
    let orders = raw
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse::<usize>("orders", s.trim()))
        .collect::<Result<Vec<_>>>()?;
    if orders.is_empty() {
        return Err(Error::InvalidConfig("`orders` must list at least one code order".into()));
    }
    Ok(orders)
}

impl RunConfig {
    fn set(&mut self, section: &str, key: &str, raw: &str) -> Result<()> {
        let a = &mut self.acquisition;
        let p = &mut self.phantom;
        let e = &mut self.experiment;
        let g = &mut self.scan;
        match (section, key) {
            ("run", "seed") => a.seed = parse(key, raw)?,
            ("run", "output_dir") => self.output_dir = Some(raw.to_string()),
            ("acquisition", "f_us_hz") => a.f_us_hz = parse(key, raw)?,
            ("acquisition", "f_s_hz") => a.f_s_hz = parse(key, raw)?,
            ("acquisition", "mode") => a.mode = raw.parse::<Mode>()?,
            ("acquisition", "duration_s") => a.duration_s = parse(key, raw)?,
            ("acquisition", "noise_sigma") => a.noise_sigma = parse(key, raw)?,
            ("acquisition", "modulation_efficiency") => a.modulation_efficiency = parse(key, raw)?,
            ("acquisition", "sample_phase") => a.sample_phase = parse(key, raw)?,
            ("acquisition", "probe_x_m") => a.probe_xy_m[0] = parse(key, raw)?,
            ("acquisition", "probe_y_m") => a.probe_xy_m[1] = parse(key, raw)?,
            ("acquisition", "water_path_m") => a.water_path_m = parse(key, raw)?,
            ("phantom", "mu_s_prime_per_cm") => p.mu_s_prime_per_cm = parse(key, raw)?,
            ("phantom", "mu_a_per_cm") => p.mu_a_per_cm = parse(key, raw)?,
            ("phantom", "src_x_m") => p.src_pos_m[0] = parse(key, raw)?,
            ("phantom", "src_y_m") => p.src_pos_m[1] = parse(key, raw)?,
            ("phantom", "src_z_m") => p.src_pos_m[2] = parse(key, raw)?,
            ("phantom", "det_x_m") => p.det_pos_m[0] = parse(key, raw)?,
            ("phantom", "det_y_m") => p.det_pos_m[1] = parse(key, raw)?,
            ("phantom", "det_z_m") => p.det_pos_m[2] = parse(key, raw)?,
            ("phantom", "sound_speed_m_s") => p.sound_speed_m_s = parse(key, raw)?,
            ("phantom", "depth_extent_m") => p.depth_extent_m = parse(key, raw)?,
            ("phantom", "boundary") => p.boundary = raw.parse::<Boundary>()?,
            ("experiment", "trials") => e.trials = parse(key, raw)?,
            ("experiment", "orders") => e.orders = parse_orders(raw)?,
            ("experiment", "reference") => e.reference = raw.parse()?,
            ("experiment", "solver") => e.solver = raw.parse()?,
            ("experiment", "subtract_noise_floor") => e.subtract_noise_floor = parse(key, raw)?,
            ("scan", "x0_m") => g.x0_m = parse(key, raw)?,
            ("scan", "y0_m") => g.y0_m = parse(key, raw)?,
            ("scan", "nx") => g.nx = parse(key, raw)?,
            ("scan", "ny") => g.ny = parse(key, raw)?,
            ("scan", "step_m") => g.step_m = parse(key, raw)?,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown key `{key}` in section [{section}]"
                )))
            }
        }
        Ok(())
    }

    /// Cross-field checks: acquisition and phantom invariants, trial count, grid.
    pub fn validate(&self) -> Result<()> {
        self.acquisition.validate()?;
        self.phantom.validate()?;
        if self.experiment.trials < 2 {
            return Err(Error::InvalidConfig("experiment.trials must be at least 2".into()));
        }
        if self.scan.nx == 0 || self.scan.ny == 0 || !(self.scan.step_m > 0.0) {
            return Err(Error::InvalidConfig("scan grid must be non-empty with a positive step".into()));
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        let mut seen = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !matches!(name, "run" | "acquisition" | "phantom" | "experiment" | "scan") {
                    return Err(Error::InvalidConfig(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let sec = section
                .as_deref()
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: key outside any section", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert((sec.to_string(), key.to_string())) {
                return Err(Error::InvalidConfig(format!("duplicate key `{key}` in [{sec}]")));
            }
            cfg.set(sec, key, value.trim())?;
        }
        cfg.acquisition.sound_speed_m_s = cfg.phantom.sound_speed_m_s;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = &self.acquisition;
        let p = &self.phantom;
        let e = &self.experiment;
        let g = &self.scan;
        writeln!(f, "[run]")?;
        writeln!(f, "seed = {}", a.seed)?;
        if let Some(dir) = &self.output_dir {
            writeln!(f, "output_dir = {dir}")?;
        }
        writeln!(f, "\n[acquisition]")?;
        writeln!(f, "f_us_hz = {}", a.f_us_hz)?;
        writeln!(f, "f_s_hz = {}", a.f_s_hz)?;
        writeln!(f, "mode = {}", a.mode)?;
        writeln!(f, "duration_s = {}", a.duration_s)?;
        writeln!(f, "noise_sigma = {}", a.noise_sigma)?;
        writeln!(f, "modulation_efficiency = {}", a.modulation_efficiency)?;
        writeln!(f, "sample_phase = {}", a.sample_phase)?;
        writeln!(f, "probe_x_m = {}", a.probe_xy_m[0])?;
        writeln!(f, "probe_y_m = {}", a.probe_xy_m[1])?;
        writeln!(f, "water_path_m = {}", a.water_path_m)?;
        writeln!(f, "\n[phantom]")?;
        writeln!(f, "mu_s_prime_per_cm = {}", p.mu_s_prime_per_cm)?;
        writeln!(f, "mu_a_per_cm = {}", p.mu_a_per_cm)?;
        writeln!(f, "src_x_m = {}", p.src_pos_m[0])?;
        writeln!(f, "src_y_m = {}", p.src_pos_m[1])?;
        writeln!(f, "src_z_m = {}", p.src_pos_m[2])?;
        writeln!(f, "det_x_m = {}", p.det_pos_m[0])?;
        writeln!(f, "det_y_m = {}", p.det_pos_m[1])?;
        writeln!(f, "det_z_m = {}", p.det_pos_m[2])?;
        writeln!(f, "sound_speed_m_s = {}", p.sound_speed_m_s)?;
        writeln!(f, "depth_extent_m = {}", p.depth_extent_m)?;
        writeln!(f, "boundary = {}", p.boundary)?;
        writeln!(f, "\n[experiment]")?;
        writeln!(f, "trials = {}", e.trials)?;
        let orders: Vec<String> = e.orders.iter().map(|n| n.to_string()).collect();
        writeln!(f, "orders = {}", orders.join(","))?;
        writeln!(f, "reference = {}", e.reference)?;
        writeln!(f, "solver = {}", e.solver)?;
        writeln!(f, "subtract_noise_floor = {}", e.subtract_noise_floor)?;
        writeln!(f, "\n[scan]")?;
        writeln!(f, "x0_m = {}", g.x0_m)?;
        writeln!(f, "y0_m = {}", g.y0_m)?;
        writeln!(f, "nx = {}", g.nx)?;
        writeln!(f, "ny = {}", g.ny)?;
        writeln!(f, "step_m = {}", g.step_m)
    }
}
