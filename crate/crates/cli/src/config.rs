//! Run configuration: a TOML file with one table per subcommand.
//!
//! Every key has a default, unknown keys are rejected, and any key can be
//! overridden on the command line as `--section.key value`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spatent_core::analysis::{linear_grid, log_grid, PhysicalityGate, TcOptions, TcRoute};
use spatent_core::modes::{DetectorProfile, TruncationSpec, HARD_CAP, RESIDUAL_GATE};
use spatent_core::selftest::SelfTestOptions;
use spatent_core::ThermalFieldConfig;

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub box_length: f64,
    pub mass: f64,
    pub hbar: f64,
    pub k_b: f64,
    pub temperature: f64,
    pub chemical_potential: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            box_length: 1.0,
            mass: 0.5,
            hbar: 1.0,
            k_b: 1.0,
            temperature: 0.0,
            chemical_potential: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    /// Highest mode index summed by the series truncation.
    pub l_max: usize,
    pub convergence_tol: f64,
    pub hard_cap: usize,
    pub residual_gate: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            l_max: 1000,
            convergence_tol: TruncationSpec::DEFAULT_TOL,
            hard_cap: HARD_CAP,
            residual_gate: RESIDUAL_GATE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Gaussian,
    TopHat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationName {
    /// Sum to `numerics.l_max` and check convergence.
    Series,
    /// Sum to `numerics.hard_cap`.
    Untruncated,
    /// Keep modes `1..=window` only.
    Window,
}

/// Mode construction keys shared by `[verdict]` and `[sweep]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeChoice {
    pub profile: ProfileName,
    /// Gaussian modulation width; defaults to the region width.
    pub modulation_width: Option<f64>,
    pub inverse_k: bool,
    pub truncation: TruncationName,
    /// Window size for `truncation = "window"`.
    pub window: usize,
    pub gate: Option<PhysicalityGate>,
}

impl Default for ModeChoice {
    fn default() -> Self {
        Self {
            profile: ProfileName::Gaussian,
            modulation_width: None,
            inverse_k: false,
            truncation: TruncationName::Series,
            window: 16,
            gate: None,
        }
    }
}

impl ModeChoice {
    pub fn profile(&self) -> DetectorProfile {
        match self.profile {
            ProfileName::Gaussian => DetectorProfile::GaussianModulated {
                width: self.modulation_width,
                inverse_k: self.inverse_k,
            },
            ProfileName::TopHat => DetectorProfile::TopHat,
        }
    }

    pub fn truncation(&self, numerics: &NumericsSection) -> TruncationSpec {
        let mut t = match self.truncation {
            TruncationName::Series => TruncationSpec::series(numerics.l_max),
            TruncationName::Untruncated => TruncationSpec::series(numerics.hard_cap),
            TruncationName::Window => TruncationSpec::window(self.window),
        };
        t.convergence_tol = numerics.convergence_tol;
        t.hard_cap = numerics.hard_cap;
        t
    }

    /// Windowed top-hat modes default to the as-constructed gate.
    pub fn gate(&self) -> PhysicalityGate {
        self.gate.unwrap_or(match self.truncation {
            TruncationName::Window => PhysicalityGate::AsConstructed,
            _ => PhysicalityGate::Canonical,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerdictSection {
    pub profile: ProfileName,
    /// Gaussian modulation width; defaults to the region width.
    pub modulation_width: Option<f64>,
    pub inverse_k: bool,
    pub truncation: TruncationName,
    /// Window size for `truncation = "window"`.
    pub window: usize,
    /// Defaults to `as_constructed` for windows, `canonical` otherwise.
    pub gate: Option<PhysicalityGate>,
    /// Explicit regions `[x1, x2]`; override `width`/`separation` when both are set.
    pub region_r: Option<[f64; 2]>,
    pub region_q: Option<[f64; 2]>,
    pub width: f64,
    pub separation: f64,
    pub centre: Option<f64>,
}

impl Default for VerdictSection {
    fn default() -> Self {
        Self {
            profile: ProfileName::Gaussian,
            modulation_width: None,
            inverse_k: false,
            truncation: TruncationName::Series,
            window: 16,
            gate: None,
            region_r: None,
            region_q: None,
            width: 0.1,
            separation: 0.05,
            centre: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub profile: ProfileName,
    /// Gaussian modulation width; defaults to the region width.
    pub modulation_width: Option<f64>,
    pub inverse_k: bool,
    pub truncation: TruncationName,
    /// Window size for `truncation = "window"`.
    pub window: usize,
    /// Defaults to `as_constructed` for windows, `canonical` otherwise.
    pub gate: Option<PhysicalityGate>,
    pub width: f64,
    pub centre: Option<f64>,
    pub separation_min: f64,
    pub separation_max: f64,
    pub separation_count: usize,
    pub temperature_min: f64,
    pub temperature_max: f64,
    pub temperature_count: usize,
    pub temperature_spacing: Spacing,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            profile: ProfileName::Gaussian,
            modulation_width: None,
            inverse_k: false,
            truncation: TruncationName::Series,
            window: 16,
            gate: None,
            width: 0.1,
            centre: None,
            separation_min: 0.0,
            separation_max: 0.76,
            separation_count: 20,
            temperature_min: 0.01,
            temperature_max: 1000.0,
            temperature_count: 20,
            temperature_spacing: Spacing::Log,
        }
    }
}

impl VerdictSection {
    pub fn modes(&self) -> ModeChoice {
        ModeChoice {
            profile: self.profile,
            modulation_width: self.modulation_width,
            inverse_k: self.inverse_k,
            truncation: self.truncation,
            window: self.window,
            gate: self.gate,
        }
    }
}

impl SweepSection {
    pub fn modes(&self) -> ModeChoice {
        ModeChoice {
            profile: self.profile,
            modulation_width: self.modulation_width,
            inverse_k: self.inverse_k,
            truncation: self.truncation,
            window: self.window,
            gate: self.gate,
        }
    }

    pub fn separations(&self) -> Vec<f64> {
        linear_grid(self.separation_min, self.separation_max, self.separation_count)
    }

    pub fn temperatures(&self) -> Vec<f64> {
        match self.temperature_spacing {
            Spacing::Linear => linear_grid(self.temperature_min, self.temperature_max, self.temperature_count),
            Spacing::Log => log_grid(self.temperature_min, self.temperature_max, self.temperature_count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub widths: Vec<f64>,
    pub temperature: f64,
    pub cap: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            widths: vec![1.0 / 4.0, 1.0 / 6.0, 1.0 / 8.0, 1.0 / 12.0, 1.0 / 16.0],
            temperature: 0.0,
            cap: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcSection {
    pub widths: Vec<f64>,
    pub routes: Vec<TcRoute>,
    pub window_cap: usize,
    pub rel_width: f64,
    pub t_start: f64,
    pub t_limit: f64,
}

impl Default for TcSection {
    fn default() -> Self {
        let d = TcOptions::default();
        Self {
            widths: vec![
                1.0 / 4.0,
                1.0 / 5.0,
                1.0 / 6.0,
                1.0 / 8.0,
                1.0 / 10.0,
                1.0 / 12.0,
                1.0 / 16.0,
                1.0 / 20.0,
            ],
            routes: vec![TcRoute::TruncatedTopHat, TcRoute::GaussianModulated],
            window_cap: 200,
            rel_width: d.rel_width,
            t_start: d.t_start,
            t_limit: d.t_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    pub gamma_eff: f64,
    /// Probe ground-state width; defaults to the sweep region width.
    pub probe_width: Option<f64>,
}

impl Default for ExtractSection {
    fn default() -> Self {
        Self {
            gamma_eff: 0.05,
            probe_width: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldSection,
    pub numerics: NumericsSection,
    pub verdict: VerdictSection,
    pub sweep: SweepSection,
    pub window: WindowSection,
    pub tc: TcSection,
    pub extract: ExtractSection,
    pub selftest: SelfTestOptions,
    pub output: OutputSection,
}

/// A value as written on the command line: TOML literal if it parses, bare string otherwise.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Splits `--a.b value` / `--a.b=value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, toml::Value)>, Failure> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            return Err(Failure::Validation(format!("expected --section.key, found `{arg}`")));
        };
        let (key, raw) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Failure::Validation(format!("override --{key} has no value")))?;
                (key.to_string(), v.clone())
            }
        };
        if !key.contains('.') {
            return Err(Failure::Validation(format!(
                "override --{key} must name a section, e.g. --field.temperature"
            )));
        }
        out.push((key, parse_value(&raw)));
    }
    Ok(out)
}

fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), Failure> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Failure::Validation(format!("override --{key}: `{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self, Failure> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::Io(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Failure::Validation(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            apply_override(&mut table, k, v.clone())?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Failure::Validation(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.field_config()?;
        let v = |msg: String| Err(Failure::Validation(msg));
        if self.numerics.l_max == 0 || self.numerics.hard_cap == 0 || self.numerics.l_max > self.numerics.hard_cap {
            return v("numerics.l_max must be in 1..=numerics.hard_cap".into());
        }
        if !(self.numerics.convergence_tol > 0.0) || !(self.numerics.residual_gate > 0.0) {
            return v("numerics tolerances must be positive".into());
        }
        for (name, w) in [("verdict.width", self.verdict.width), ("sweep.width", self.sweep.width)] {
            if !(w > 0.0 && w.is_finite()) {
                return v(format!("{name} must be positive"));
            }
        }
        if self.sweep.separation_count == 0 || self.sweep.temperature_count == 0 {
            return v("sweep grid counts must be positive".into());
        }
        if self.sweep.temperature_spacing == Spacing::Log && !(self.sweep.temperature_min > 0.0) {
            return v("sweep.temperature_min must be positive for log spacing".into());
        }
        if self.window.widths.is_empty() || self.window.widths.iter().any(|w| !(*w > 0.0)) {
            return v("window.widths must be non-empty and positive".into());
        }
        if self.window.cap == 0 || self.tc.window_cap < 2 {
            return v("window caps must be at least 1 (window) and 2 (tc)".into());
        }
        if self.tc.routes.is_empty() {
            return v("tc.routes must name at least one route".into());
        }
        if self.tc.widths.iter().any(|w| !(*w > 0.0)) {
            return v("tc.widths must be positive".into());
        }
        if !(self.tc.rel_width > 0.0 && self.tc.rel_width < 1.0) || !(self.tc.t_start > 0.0) || !(self.tc.t_limit > self.tc.t_start) {
            return v("tc bracket settings must satisfy 0 < rel_width < 1 and 0 < t_start < t_limit".into());
        }
        if !(self.extract.gamma_eff > 0.0 && self.extract.gamma_eff < spatent_core::extraction::MAX_GAMMA) {
            return v(format!(
                "extract.gamma_eff must lie in (0, {})",
                spatent_core::extraction::MAX_GAMMA
            ));
        }
        if !(self.selftest.tolerance > 0.0) || self.selftest.cm_samples == 0 || self.selftest.mc_samples < 2 {
            return v("selftest settings must be positive".into());
        }
        Ok(())
    }

    pub fn field_config(&self) -> Result<ThermalFieldConfig, Failure> {
        let f = &self.field;
        ThermalFieldConfig::new(f.box_length, f.mass, f.hbar, f.k_b, f.temperature, f.chemical_potential)
            .map_err(Failure::from)
    }

    pub fn tc_options(&self) -> TcOptions {
        TcOptions {
            window_cap: self.tc.window_cap,
            series_l_max: self.numerics.l_max,
            rel_width: self.tc.rel_width,
            t_start: self.tc.t_start,
            t_limit: self.tc.t_limit,
        }
    }

    /// SHA-256 of the effective configuration, serialised as TOML.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::load(None, &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sweep.separations().len(), 20);
    }

    #[test]
    fn overrides_are_typed() {
        let o = parse_overrides(&strings(&[
            "--field.temperature",
            "5",
            "--sweep.profile=top_hat",
            "--window.widths",
            "[0.25, 0.125]",
        ]))
        .unwrap();
        let cfg = RunConfig::load(None, &o).unwrap();
        assert_eq!(cfg.field.temperature, 5.0);
        assert_eq!(cfg.sweep.profile, ProfileName::TopHat);
        assert_eq!(cfg.window.widths, vec![0.25, 0.125]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let o = parse_overrides(&strings(&["--field.temprature", "5"])).unwrap();
        assert!(matches!(RunConfig::load(None, &o), Err(Failure::Validation(_))));
        assert!(parse_overrides(&strings(&["--temperature", "5"])).is_err());
        assert!(parse_overrides(&strings(&["--field.temperature"])).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for (k, v) in [("field.temperature", "-1"), ("extract.gamma_eff", "0.5"), ("numerics.l_max", "0")] {
            let o = parse_overrides(&[format!("--{k}"), v.to_string()]).unwrap();
            assert!(RunConfig::load(None, &o).is_err(), "{k}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.field.temperature = 1.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn window_defaults_to_as_constructed_gate() {
        let mut m = ModeChoice::default();
        assert_eq!(m.gate(), PhysicalityGate::Canonical);
        m.truncation = TruncationName::Window;
        assert_eq!(m.gate(), PhysicalityGate::AsConstructed);
    }
}
