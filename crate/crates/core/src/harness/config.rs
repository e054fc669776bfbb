//! Flat `key = value` sweep configuration.
//!
//! ```text
//! # comments start with '#'
//! sigma_tr2_db = 30        # any key ending in _db is given in decibels
//! inr_db = -10             # sets sigma_s2 from sigma_sr2 and sigma_w2
//! n_samples = 50
//! sweep_variable = alpha
//! sweep_values = 0.1, 0.2, 0.5, 1.0
//! detectors = direct, indirect, energy
//! trials = 1000000
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{db_to_linear, SystemParams};
use crate::detectors::DetectorId;
use crate::error::{Error, Result};
use crate::lut::Fallback;

/// The parameter a sweep walks over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Alpha,
    SirDb,
    InrDb,
    NSamples,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Alpha => "alpha",
            SweepVariable::SirDb => "sir_db",
            SweepVariable::InrDb => "inr_db",
            SweepVariable::NSamples => "n_samples",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "alpha" => Ok(SweepVariable::Alpha),
            "sir_db" => Ok(SweepVariable::SirDb),
            "inr_db" => Ok(SweepVariable::InrDb),
            "n_samples" => Ok(SweepVariable::NSamples),
            other => Err(format!(
                "unknown sweep variable '{other}' (expected alpha, sir_db, inr_db or n_samples)"
            )),
        }
    }
}

/// How an SIR setpoint is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SirControl {
    /// Scale σ_tr², keeping α.
    SigmaTr2,
    /// Scale α, keeping σ_tr².
    Alpha,
}

impl FromStr for SirControl {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sigma_tr2" => Ok(SirControl::SigmaTr2),
            "alpha" => Ok(SirControl::Alpha),
            other => Err(format!("sir_via must be sigma_tr2 or alpha, got '{other}'")),
        }
    }
}

/// Table settings for the per-point statistic caches.
#[derive(Debug, Clone, PartialEq)]
pub struct LutSettings {
    pub enabled: bool,
    pub delta: f64,
    /// Grid end. When `z_max_per_sample` is set this is ignored and the
    /// grid end is that value times N.
    pub z_max: f64,
    pub z_max_per_sample: Option<f64>,
    /// `None` picks per detector: quadrature for Λ₁ and Λ₃, the Bessel
    /// form for the Λ₂ kernel.
    pub fallback: Option<Fallback>,
    /// Grid steps per σ_sr² for the inner `I_1` table.
    pub inner_steps: f64,
    /// Directory of saved tables, reused when their definition matches.
    pub cache_dir: Option<PathBuf>,
}

impl Default for LutSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            delta: 0.1,
            z_max: 2000.0,
            z_max_per_sample: None,
            fallback: None,
            inner_steps: 200.0,
            cache_dir: None,
        }
    }
}

impl LutSettings {
    pub fn z_max_for(&self, n_samples: usize) -> f64 {
        match self.z_max_per_sample {
            Some(per) => per * n_samples as f64,
            None => self.z_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Parameters with every setpoint applied, before the sweep variable.
    pub base_params: SystemParams,
    pub sir_db: Option<f64>,
    pub inr_db: Option<f64>,
    pub sir_via: SirControl,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub detectors: Vec<DetectorId>,
    pub trials: u64,
    pub master_seed: u64,
    pub quad_tol: f64,
    pub lut: LutSettings,
    pub output_path: Option<PathBuf>,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base_params: SystemParams::default(),
            sir_db: None,
            inr_db: None,
            sir_via: SirControl::SigmaTr2,
            sweep_variable: SweepVariable::Alpha,
            sweep_values: vec![1.0],
            detectors: DetectorId::ALL.to_vec(),
            trials: 1_000_000,
            master_seed: 1,
            quad_tol: 1e-6,
            lut: LutSettings::default(),
            output_path: None,
            workers: 0,
        }
    }
}

fn config_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        reason: reason.into(),
    }
}

/// `sigma_s2_db` and `sigma_s2` name the same setting.
fn canonical_key(key: &str) -> &str {
    key.strip_suffix("_db").filter(|k| k.starts_with("sigma_")).unwrap_or(key)
}

fn split_entry(line_no: usize, raw_line: &str) -> Result<Option<(String, String)>> {
    let line = raw_line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| config_err(line_no, format!("expected 'key = value', got '{line}'")))?;
    let (key, value) = (key.trim(), value.trim());
    if value.is_empty() {
        return Err(config_err(line_no, format!("{key} has no value")));
    }
    Ok(Some((key.to_string(), value.to_string())))
}

fn parse_num<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| config_err(line, format!("{key}: cannot parse '{raw}'")))
}

/// Parse a comma-separated detector list such as `direct, energy`.
pub fn parse_detectors(raw: &str) -> std::result::Result<Vec<DetectorId>, String> {
    let mut out = Vec::new();
    for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let id: DetectorId = item.parse().map_err(|e: Error| e.to_string())?;
        if out.contains(&id) {
            return Err(format!("detector '{item}' listed twice"));
        }
        out.push(id);
    }
    if out.is_empty() {
        return Err("detector list is empty".into());
    }
    Ok(out)
}

impl SweepConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parse `text`, then apply `key = value` overrides, each replacing any
    /// setting of the same key. Override errors report line 0.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw_line) in text.lines().enumerate() {
            if let Some((key, value)) = split_entry(idx + 1, raw_line)? {
                if !seen.insert(canonical_key(&key).to_string()) {
                    return Err(config_err(idx + 1, format!("{} set twice", canonical_key(&key))));
                }
                entries.push((idx + 1, key, value));
            }
        }
        for raw in overrides {
            if let Some((key, value)) = split_entry(0, raw)? {
                entries.retain(|(_, k, _)| canonical_key(k) != canonical_key(&key));
                entries.push((0, key, value));
            }
        }
        let mut cfg = SweepConfig::default();
        for (line, key, value) in &entries {
            cfg.apply(*line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let p = &mut self.base_params;
        let variance = |v: f64, db: bool| if db { db_to_linear(v) } else { v };
        match key {
            "sigma_s2" | "sigma_s2_db" => p.sigma_s2 = variance(parse_num(line, key, value)?, key.ends_with("_db")),
            "sigma_st2" | "sigma_st2_db" => p.sigma_st2 = variance(parse_num(line, key, value)?, key.ends_with("_db")),
            "sigma_tr2" | "sigma_tr2_db" => p.sigma_tr2 = variance(parse_num(line, key, value)?, key.ends_with("_db")),
            "sigma_sr2" | "sigma_sr2_db" => p.sigma_sr2 = variance(parse_num(line, key, value)?, key.ends_with("_db")),
            "sigma_w2" | "sigma_w2_db" => p.sigma_w2 = variance(parse_num(line, key, value)?, key.ends_with("_db")),
            "alpha" => p.alpha = parse_num(line, key, value)?,
            "n_samples" => p.n_samples = parse_num(line, key, value)?,
            "sir_db" => self.sir_db = Some(parse_num(line, key, value)?),
            "inr_db" => self.inr_db = Some(parse_num(line, key, value)?),
            "sir_via" => self.sir_via = value.parse().map_err(|e: String| config_err(line, e))?,
            "sweep_variable" => {
                self.sweep_variable = value.parse().map_err(|e: String| config_err(line, e))?
            }
            "sweep_values" => {
                self.sweep_values = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num(line, key, s))
                    .collect::<Result<_>>()?
            }
            "detectors" => self.detectors = parse_detectors(value).map_err(|e| config_err(line, e))?,
            "trials" => self.trials = parse_num(line, key, value)?,
            "master_seed" => self.master_seed = parse_num(line, key, value)?,
            "quad_tol" => self.quad_tol = parse_num(line, key, value)?,
            "workers" => self.workers = parse_num(line, key, value)?,
            "output" => self.output_path = Some(PathBuf::from(value)),
            "lut" => {
                self.lut.enabled = match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    _ => return Err(config_err(line, "lut must be on or off")),
                }
            }
            "lut_delta" => self.lut.delta = parse_num(line, key, value)?,
            "lut_z_max" => self.lut.z_max = parse_num(line, key, value)?,
            "lut_z_max_per_sample" => self.lut.z_max_per_sample = Some(parse_num(line, key, value)?),
            "lut_fallback" => {
                self.lut.fallback = match value {
                    "auto" => None,
                    other => Some(other.parse().map_err(|e: Error| config_err(line, e.to_string()))?),
                }
            }
            "inner_lut_steps" => self.lut.inner_steps = parse_num(line, key, value)?,
            "lut_cache" => self.lut.cache_dir = Some(PathBuf::from(value)),
            other => return Err(config_err(line, format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Check everything that can be checked without simulating, including
    /// that every sweep point yields valid detector parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| config_err(0, reason);
        if self.trials < 1 {
            return Err(bad("trials must be at least 1".into()));
        }
        if self.sweep_values.is_empty() {
            return Err(bad("sweep_values is empty".into()));
        }
        if self.sweep_values.iter().any(|v| !v.is_finite()) {
            return Err(bad("sweep_values must be finite".into()));
        }
        if self.sweep_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("sweep_values must be strictly increasing".into()));
        }
        if self.detectors.is_empty() {
            return Err(bad("no detectors selected".into()));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol <= crate::special_fn::MAX_TOL) {
            return Err(bad(format!("quad_tol must lie in (0, {}]", crate::special_fn::MAX_TOL)));
        }
        if !(self.lut.delta > 0.0 && self.lut.delta.is_finite()) {
            return Err(bad("lut_delta must be positive".into()));
        }
        if !(self.lut.inner_steps >= 1.0 && self.lut.inner_steps.is_finite()) {
            return Err(bad("inner_lut_steps must be at least 1".into()));
        }
        if self.sweep_variable == SweepVariable::NSamples
            && self.sweep_values.iter().any(|v| v.fract() != 0.0 || *v < 1.0)
        {
            return Err(bad("n_samples sweep values must be positive integers".into()));
        }
        for &v in &self.sweep_values {
            let p = self.params_at(v)?;
            p.validate_for_detection()
                .map_err(|e| bad(format!("{} = {v}: {e}", self.sweep_variable)))?;
            let z_max = self.lut.z_max_for(p.n_samples);
            if self.lut.enabled && !(z_max > self.lut.delta && z_max.is_finite()) {
                return Err(bad(format!("lut grid end {z_max} must exceed lut_delta")));
            }
        }
        Ok(())
    }

    /// Parameters at one sweep point, with the SIR and INR setpoints applied.
    pub fn params_at(&self, value: f64) -> Result<SystemParams> {
        let mut p = self.base_params;
        let mut sir_db = self.sir_db;
        let mut inr_db = self.inr_db;
        match self.sweep_variable {
            SweepVariable::Alpha => p.alpha = value,
            SweepVariable::NSamples => p.n_samples = value as usize,
            SweepVariable::SirDb => sir_db = Some(value),
            SweepVariable::InrDb => inr_db = Some(value),
        }
        if let Some(db) = sir_db {
            if p.sigma_st2 != p.sigma_sr2 {
                return Err(config_err(0, "an SIR setpoint needs sigma_st2 = sigma_sr2"));
            }
            let sir = db_to_linear(db);
            match self.sir_via {
                SirControl::SigmaTr2 => {
                    if !(p.alpha > 0.0) {
                        return Err(config_err(0, "an SIR setpoint via sigma_tr2 needs alpha > 0"));
                    }
                    p.sigma_tr2 = sir * p.sigma_sr2 / (p.alpha * p.alpha * p.sigma_st2);
                }
                SirControl::Alpha => {
                    let alpha = (sir * p.sigma_sr2 / (p.sigma_st2 * p.sigma_tr2)).sqrt();
                    if alpha > 1.0 {
                        return Err(config_err(
                            0,
                            format!("SIR {db} dB would need alpha = {alpha} > 1"),
                        ));
                    }
                    p.alpha = alpha;
                }
            }
        }
        if let Some(db) = inr_db {
            p.sigma_s2 = db_to_linear(db) * p.sigma_w2 / p.sigma_sr2;
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::derive_ratios;

    #[test]
    fn parses_and_converts_decibels() {
        let cfg = SweepConfig::parse(
            "# fig 2\nsigma_tr2_db = 30\ninr_db = -10 # comment\nn_samples = 50\n\
             sweep_variable = alpha\nsweep_values = 0.1, 0.5, 1\ndetectors = direct, energy\n\
             trials = 100\nlut_fallback = auto\n",
        )
        .unwrap();
        assert!((cfg.base_params.sigma_tr2 - 1000.0).abs() < 1e-9);
        assert_eq!(cfg.detectors, vec![DetectorId::Direct, DetectorId::Energy]);
        assert_eq!(cfg.sweep_values, vec![0.1, 0.5, 1.0]);
        let p = cfg.params_at(0.5).unwrap();
        assert_eq!(p.alpha, 0.5);
        assert!((derive_ratios(&p).inr - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sir_setpoints() {
        let mut cfg = SweepConfig::parse("sweep_variable = sir_db\nsweep_values = 0, 10, 20").unwrap();
        let p = cfg.params_at(20.0).unwrap();
        assert!((derive_ratios(&p).sir - 100.0).abs() < 1e-9);
        cfg.sir_via = SirControl::Alpha;
        assert!(cfg.params_at(20.0).is_err());
        let p = cfg.params_at(-6.0).unwrap();
        assert!((linear_db(derive_ratios(&p).sir) + 6.0).abs() < 1e-9);
        assert_eq!(p.sigma_tr2, 1.0);
    }

    fn linear_db(x: f64) -> f64 {
        10.0 * x.log10()
    }

    #[test]
    fn rejections_carry_line_numbers() {
        let err = SweepConfig::parse("trials = 10\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = SweepConfig::parse("sigma_s2 = 1\nsigma_s2_db = 0\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        assert!(SweepConfig::parse("sweep_values = 1, 1").is_err());
        assert!(SweepConfig::parse("trials = 0").is_err());
        assert!(SweepConfig::parse("sweep_values = 0, 1").is_err(), "alpha = 0 cannot be detected");
        assert!(SweepConfig::parse("sigma_st2 = 2\nsweep_variable = sir_db\nsweep_values = 1").is_err());
        assert!(SweepConfig::parse("sweep_variable = n_samples\nsweep_values = 1.5").is_err());
        assert!(SweepConfig::parse("detectors = direct, direct").is_err());
        assert!(SweepConfig::parse("trials").is_err());
    }

    #[test]
    fn overrides_replace_file_settings() {
        let text = "sigma_s2_db = 10\ntrials = 5\n";
        let cfg = SweepConfig::parse_with_overrides(text, &["sigma_s2 = 2".into(), "trials=7".into()]).unwrap();
        assert_eq!(cfg.base_params.sigma_s2, 2.0);
        assert_eq!(cfg.trials, 7);
        assert!(SweepConfig::parse_with_overrides(text, &["nonsense".into()]).is_err());
    }
}
