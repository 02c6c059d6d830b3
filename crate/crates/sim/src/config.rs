//! Run configuration (TOML).
//!
//! Every key carries its unit in the name. Unknown keys are rejected. Scan
//! axes (`incident.energy_meV`, `pulse.length_nm`) accept one value or a list.
//! [`Config::resolve`] fills in verb-specific defaults; the result is what
//! gets written to the manifest, so that re-running it reproduces the outputs.
//! Defaults that depend on the scan entry (end time, box padding) stay unset
//! in the manifest and are derived identically on every run.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    StaticScan,
    Calibrate,
    Switch,
    Pulse,
    Superpose,
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verb::StaticScan => "static-scan",
            Verb::Calibrate => "calibrate",
            Verb::Switch => "switch",
            Verb::Pulse => "pulse",
            Verb::Superpose => "superpose",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Verb the file was written for; checked against the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Verb>,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub incident: Incident,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<SwitchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseConfig>,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_scan: Option<StaticScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superpose: Option<SuperposeConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    /// Effective mass in units of the free-electron mass.
    pub mass_ratio: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self { mass_ratio: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_nm: Option<f64>,
    /// Extent of region II beyond the excitation support on each side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin_nm: Option<f64>,
    /// Box extent beyond region II.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad_left_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad_right_nm: Option<f64>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Incident {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_meV: Option<OneOrMany<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_per_nm: Option<OneOrMany<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Smooth,
    Rectangular,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    #[serde(default = "default_barrier_length")]
    pub length_nm: f64,
    #[serde(default)]
    pub x_start_nm: f64,
    /// Plateau height; calibrated to `transmission_target` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_max_V: Option<f64>,
    #[serde(default = "default_target")]
    pub transmission_target: f64,
    #[serde(default = "default_shape")]
    pub shape: Shape,
}

fn default_barrier_length() -> f64 {
    4.0
}
fn default_target() -> f64 {
    0.5
}
fn default_shape() -> Shape {
    Shape::Smooth
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            length_nm: default_barrier_length(),
            x_start_nm: 0.0,
            phi_max_V: None,
            transmission_target: default_target(),
            shape: Shape::Smooth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    #[serde(default = "default_ramp")]
    pub ramp_on_fs: f64,
    /// Plateau length; the barrier stays on forever when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_off_fs: Option<f64>,
}

fn default_ramp() -> f64 {
    5.0
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            ramp_on_fs: default_ramp(),
            plateau_fs: None,
            ramp_off_fs: None,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    #[serde(default = "default_f0")]
    pub f0_V_per_nm: f64,
    #[serde(default = "default_lambda")]
    pub lambda0_nm: f64,
    /// Duration in carrier periods; 10 unless `tau_fs` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_fs: Option<f64>,
    #[serde(default = "default_pulse_length")]
    pub length_nm: OneOrMany<f64>,
    #[serde(default)]
    pub x_start_nm: f64,
    /// Dipole approximation: drop the spatial profile (periodic box only).
    #[serde(default)]
    pub uniform: bool,
}

fn default_f0() -> f64 {
    1.0
}
fn default_lambda() -> f64 {
    800.0
}
fn default_pulse_length() -> OneOrMany<f64> {
    OneOrMany::One(160.0)
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            f0_V_per_nm: default_f0(),
            lambda0_nm: default_lambda(),
            cycles: None,
            tau_fs: None,
            length_nm: default_pulse_length(),
            x_start_nm: 0.0,
            uniform: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    CnOnly,
    CnThenSpectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Transparent,
    Reflecting,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension_factor: Option<usize>,
    /// Upper bound on the time step; derived from the energy scale when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_interval_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster_interval_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster_stride_nm: Option<f64>,
    /// Last raster time; the whole run when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster_until_fs: Option<f64>,
    /// Current probes; one default probe per scenario when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes_nm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Signed,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<Distance>,
    /// D(t) counts as settled below this fraction of |D(0)|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settle_fraction: Option<f64>,
    /// Density level whose last downward crossing marks the front.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub front_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub front_spacing_nm: Option<f64>,
    /// Distance beyond the barrier covered by the front positions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub front_span_nm: Option<f64>,
    /// Half-width of the envelope used to count dominant spectral peaks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_per_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_prominence_decades: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    None,
    Hann,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Subtract the incident current before transforming.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad_factor: Option<usize>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticScanConfig {
    pub energy_min_meV: f64,
    pub energy_max_meV: f64,
    pub points: usize,
}

impl Default for StaticScanConfig {
    fn default() -> Self {
        Self {
            energy_min_meV: 1.0,
            energy_max_meV: 200.0,
            points: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperposeConfig {
    /// Occupation weight of each incident energy, in scan order.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub plots: bool,
    /// Dump the final scattered wave of every run.
    #[serde(default)]
    pub checkpoint: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            plots: true,
            checkpoint: false,
        }
    }
}

fn config_err(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// Reads `path` and applies `key=value` overrides (dotted keys, TOML
    /// values; bare words are taken as strings).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, AppError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| AppError::io(p, e))?,
            None => String::new(),
        };
        let mut value: toml::Table = toml::from_str(&text).map_err(|e| config_err(e.to_string()))?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, AppError> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Checks the verb against the blocks present and fills in every default
    /// that does not depend on the scan entry.
    pub fn resolve(mut self, verb: Verb) -> Result<Self, AppError> {
        if let Some(s) = self.scenario {
            if s != verb {
                return Err(config_err(format!("config is for `{s}`, not `{verb}`")));
            }
        }
        self.scenario = Some(verb);
        let pulse_like = matches!(verb, Verb::Pulse | Verb::Superpose);
        if pulse_like {
            if self.barrier.is_some() || self.switch.is_some() {
                return Err(config_err(format!(
                    "`{verb}` takes a [pulse] block, not [barrier]/[switch]"
                )));
            }
            self.pulse.get_or_insert_with(PulseConfig::default);
        } else {
            if self.pulse.is_some() {
                return Err(config_err(format!("`{verb}` takes a [barrier] block, not [pulse]")));
            }
            self.barrier.get_or_insert_with(BarrierConfig::default);
            if verb == Verb::Switch {
                self.switch.get_or_insert_with(SwitchConfig::default);
            }
        }
        if self.physics.mass_ratio <= 0.0 || !self.physics.mass_ratio.is_finite() {
            return Err(config_err("physics.mass_ratio must be positive"));
        }

        let inc = &mut self.incident;
        match (&inc.energy_meV, &inc.k_per_nm) {
            (Some(_), Some(_)) => return Err(config_err("give incident.energy_meV or incident.k_per_nm, not both")),
            (None, None) => inc.energy_meV = Some(OneOrMany::One(54.0)),
            _ => {}
        }
        let n_incident = self.incident_values().len();
        if n_incident == 0 {
            return Err(config_err("empty incident scan"));
        }
        if self.incident_values().iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(config_err("incident energies and wavenumbers must be positive"));
        }

        let g = &mut self.grid;
        positive(*g.spacing_nm.get_or_insert(0.05), "grid.spacing_nm")?;
        let margin = g.margin_nm.get_or_insert(if pulse_like { 0.5 } else { 50.0 });
        non_negative(*margin, "grid.margin_nm")?;
        if !pulse_like {
            non_negative(*g.pad_left_nm.get_or_insert(120.0), "grid.pad_left_nm")?;
            non_negative(*g.pad_right_nm.get_or_insert(400.0), "grid.pad_right_nm")?;
        }

        if let Some(b) = &self.barrier {
            positive(b.length_nm, "barrier.length_nm")?;
            if !(b.transmission_target > 0.0 && b.transmission_target <= 1.0) {
                return Err(config_err("barrier.transmission_target must lie in (0, 1]"));
            }
        }
        if let Some(s) = &mut self.switch {
            positive(s.ramp_on_fs, "switch.ramp_on_fs")?;
            if let Some(p) = s.plateau_fs {
                non_negative(p, "switch.plateau_fs")?;
                s.ramp_off_fs.get_or_insert(s.ramp_on_fs);
            } else if s.ramp_off_fs.is_some() {
                return Err(config_err("switch.ramp_off_fs needs switch.plateau_fs"));
            }
        }
        if let Some(p) = &mut self.pulse {
            if p.tau_fs.is_none() {
                p.cycles.get_or_insert(10.0);
            } else if p.cycles.is_some() {
                return Err(config_err("give pulse.cycles or pulse.tau_fs, not both"));
            }
            if p.length_nm.values().is_empty() {
                return Err(config_err("empty pulse.length_nm scan"));
            }
        }

        let switch_ends = self.switch.as_ref().is_some_and(|s| s.plateau_fs.is_some());
        let e = &mut self.engine;
        let policy = *e.policy.get_or_insert(match verb {
            Verb::Pulse | Verb::Superpose => Policy::CnThenSpectral,
            _ => Policy::CnOnly,
        });
        if policy == Policy::CnThenSpectral {
            if verb == Verb::Switch && !switch_ends {
                return Err(config_err(
                    "cn_then_spectral needs an excitation that ends (set switch.plateau_fs)",
                ));
            }
            if *e.extension_factor.get_or_insert(10) < 2 {
                return Err(config_err("engine.extension_factor must be at least 2"));
            }
        }
        let uniform = self.pulse.as_ref().is_some_and(|p| p.uniform);
        let boundary = *e.boundary.get_or_insert(if uniform {
            Boundary::Periodic
        } else {
            Boundary::Transparent
        });
        if uniform && boundary != Boundary::Periodic {
            return Err(config_err("a uniform pulse needs engine.boundary = \"periodic\""));
        }
        if let Some(dt) = e.dt_fs {
            positive(dt, "engine.dt_fs")?;
        }

        let s = &mut self.sampling;
        let (trace, raster, stride) = if pulse_like { (0.2, 10.0, 1.0) } else { (1.0, 5.0, 1.0) };
        positive(*s.trace_interval_fs.get_or_insert(trace), "sampling.trace_interval_fs")?;
        positive(
            *s.raster_interval_fs.get_or_insert(raster),
            "sampling.raster_interval_fs",
        )?;
        positive(*s.raster_stride_nm.get_or_insert(stride), "sampling.raster_stride_nm")?;
        if !pulse_like {
            positive(*s.t_end_fs.get_or_insert(3000.0), "sampling.t_end_fs")?;
        } else if let Some(t) = s.t_end_fs {
            positive(t, "sampling.t_end_fs")?;
        }
        positive(*s.prune.get_or_insert(1e-14), "sampling.prune")?;

        let a = &mut self.analysis;
        a.distance.get_or_insert(Distance::Signed);
        positive(*a.settle_fraction.get_or_insert(0.05), "analysis.settle_fraction")?;
        positive(*a.front_level.get_or_insert(0.9), "analysis.front_level")?;
        positive(*a.front_spacing_nm.get_or_insert(25.0), "analysis.front_spacing_nm")?;
        positive(*a.front_span_nm.get_or_insert(350.0), "analysis.front_span_nm")?;
        positive(*a.envelope_per_fs.get_or_insert(0.06), "analysis.envelope_per_fs")?;
        positive(
            *a.peak_prominence_decades.get_or_insert(0.5),
            "analysis.peak_prominence_decades",
        )?;

        let sp = &mut self.spectrum;
        sp.baseline.get_or_insert(true);
        sp.window.get_or_insert(WindowKind::None);
        if *sp.pad_factor.get_or_insert(4) < 1 {
            return Err(config_err("spectrum.pad_factor must be at least 1"));
        }

        if verb == Verb::StaticScan {
            let sc = self.static_scan.get_or_insert_with(StaticScanConfig::default);
            if !(sc.energy_min_meV > 0.0 && sc.energy_max_meV > sc.energy_min_meV && sc.points >= 2) {
                return Err(config_err(
                    "static_scan needs 0 < energy_min_meV < energy_max_meV and points >= 2",
                ));
            }
        }
        if verb == Verb::Superpose {
            let w = self.superpose.get_or_insert_with(|| SuperposeConfig {
                weights: vec![1.0; n_incident],
            });
            if w.weights.len() != n_incident {
                return Err(config_err("superpose.weights needs one weight per incident entry"));
            }
            if self.pulse.as_ref().is_some_and(|p| p.length_nm.values().len() != 1) {
                return Err(config_err("superpose runs a single pulse length"));
            }
        }
        Ok(self)
    }

    /// The incident scan as given (meV or nm⁻¹).
    pub fn incident_values(&self) -> Vec<f64> {
        match (&self.incident.energy_meV, &self.incident.k_per_nm) {
            (Some(e), _) => e.values(),
            (None, Some(k)) => k.values(),
            (None, None) => Vec::new(),
        }
    }
}

fn positive(v: f64, key: &str) -> Result<(), AppError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{key} must be positive")))
    }
}

fn non_negative(v: f64, key: &str) -> Result<(), AppError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{key} must be non-negative")))
    }
}

fn apply_override(root: &mut toml::Table, item: &str) -> Result<(), AppError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{item}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().ok_or_else(|| config_err("empty override key"))?;
    let mut table = root;
    for p in path {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| config_err(format!("`{p}` in `{key}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
