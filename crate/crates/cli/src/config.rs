//! JSON run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use cauchy_core::faadibruno::MAX_ORDER;
use cauchy_core::field::MIN_CHANNEL_NZ;
use cauchy_core::weights::{EstimateConstants, WeightKind, WeightSequence};
use cauchy_core::{Geometry, LabelGrid};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_ORDER: usize = 8;
pub const DEFAULT_CFL: f64 = 0.25;
pub const DEFAULT_RESIDUAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub geometry: GeometryConfig,
    pub preset: PresetConfig,
    #[serde(default = "default_order")]
    pub taylor_order: usize,
    pub time: TimeConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Largest Cauchy, Jacobian or boundary residual a step may report.
    #[serde(default = "default_residual_tolerance")]
    pub residual_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Periodic3d,
    Channel,
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeometryKind::Periodic3d => "periodic3d",
            GeometryKind::Channel => "channel",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(rename = "type")]
    pub kind: GeometryKind,
    pub dims: [usize; 3],
    pub lengths: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    Abc,
    Shear,
    ChannelVortex,
    Zero,
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Abc => "abc",
            PresetName::Shear => "shear",
            PresetName::ChannelVortex => "channel-vortex",
            PresetName::Zero => "zero",
        }
    }

    /// Parameter names and defaults.
    pub fn params(self) -> &'static [(&'static str, f64)] {
        match self {
            PresetName::Abc => &[("A", 1.0), ("B", 1.0), ("C", 1.0)],
            PresetName::Shear => &[("U0", 1.0)],
            PresetName::ChannelVortex => &[("scale", 1.0)],
            PresetName::Zero => &[],
        }
    }

    fn required_geometry(self) -> Option<GeometryKind> {
        match self {
            PresetName::Abc => Some(GeometryKind::Periodic3d),
            PresetName::Shear | PresetName::ChannelVortex => Some(GeometryKind::Channel),
            PresetName::Zero => None,
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetConfig {
    pub name: PresetName,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl PresetConfig {
    /// Value of `key`, falling back to the preset default.
    pub fn param(&self, key: &str) -> f64 {
        self.params.get(key).copied().unwrap_or_else(|| {
            self.name
                .params()
                .iter()
                .find(|(k, _)| *k == key)
                .map_or(0.0, |(_, v)| *v)
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_fraction: f64,
    #[serde(default)]
    pub max_dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightsConfig {
    #[default]
    Analytic,
    Gevrey {
        r: f64,
    },
}

impl WeightsConfig {
    pub fn sequence(self, kmax: usize) -> Result<WeightSequence, CliError> {
        let kind = match self {
            WeightsConfig::Analytic => WeightKind::Analytic,
            WeightsConfig::Gevrey { r } => WeightKind::Gevrey { r },
        };
        WeightSequence::new(kind, kmax).map_err(|e| CliError::Config(format!("weights: {e}")))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub constants: Option<EstimateConstants>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write a velocity snapshot every this many steps; 0 disables them.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "default_diagnostics")]
    pub diagnostics_file: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            snapshot_every: 0,
            diagnostics_file: default_diagnostics(),
        }
    }
}

fn default_order() -> usize {
    DEFAULT_ORDER
}
fn default_cfl() -> f64 {
    DEFAULT_CFL
}
fn default_residual_tolerance() -> f64 {
    DEFAULT_RESIDUAL_TOLERANCE
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_diagnostics() -> String {
    "diagnostics.csv".into()
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                CliError::Config(e.into_inner().to_string())
            } else {
                CliError::Config(format!("{path}: {}", e.into_inner()))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<LabelGrid, CliError> {
        let geometry = match self.geometry.kind {
            GeometryKind::Periodic3d => Geometry::Periodic3D,
            GeometryKind::Channel => Geometry::Channel,
        };
        LabelGrid::new(geometry, self.geometry.dims, self.geometry.lengths)
            .map_err(|e| CliError::Config(format!("geometry: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(2..=MAX_ORDER).contains(&self.taylor_order) {
            return bad(format!("taylor_order out of range [2,{MAX_ORDER}]"));
        }
        let g = &self.geometry;
        let periodic_axes = match g.kind {
            GeometryKind::Periodic3d => 3,
            GeometryKind::Channel => 2,
        };
        for (axis, &n) in g.dims.iter().enumerate().take(periodic_axes) {
            if !n.is_power_of_two() {
                return bad(format!(
                    "geometry.dims[{axis}] must be a power of two, got {n}"
                ));
            }
        }
        if g.kind == GeometryKind::Channel && g.dims[2] < MIN_CHANNEL_NZ {
            return bad(format!(
                "geometry.dims[2] must be at least {MIN_CHANNEL_NZ} for a channel, got {}",
                g.dims[2]
            ));
        }
        for (axis, &l) in g.lengths.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!(
                    "geometry.lengths[{axis}] must be positive, got {l}"
                ));
            }
        }
        if let Some(need) = self.preset.name.required_geometry() {
            if need != g.kind {
                return bad(format!(
                    "preset \"{}\" requires geometry \"{need}\", got \"{}\"",
                    self.preset.name, g.kind
                ));
            }
        }
        let known = self.preset.name.params();
        for (key, v) in &self.preset.params {
            if !known.iter().any(|(k, _)| k == key) {
                return bad(format!(
                    "preset.params.{key}: unknown parameter for preset \"{}\"",
                    self.preset.name
                ));
            }
            if !v.is_finite() {
                return bad(format!("preset.params.{key} must be finite"));
            }
        }
        let t = &self.time;
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
            return bad(format!("time.t_end must be non-negative, got {}", t.t_end));
        }
        if !(t.cfl_fraction > 0.0 && t.cfl_fraction <= 0.5) {
            return bad(format!(
                "time.cfl_fraction must lie in (0, 0.5], got {}",
                t.cfl_fraction
            ));
        }
        if let Some(m) = t.max_dt {
            if !(m > 0.0 && m.is_finite()) {
                return bad(format!("time.max_dt must be positive, got {m}"));
            }
        }
        if let WeightsConfig::Gevrey { r } = self.weights {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("weights.r must be positive, got {r}"));
            }
        }
        self.weights.sequence(self.taylor_order)?;
        if let Some(k) = &self.estimator.constants {
            k.validate()
                .map_err(|e| CliError::Config(format!("estimator.constants: {e}")))?;
        }
        if !(self.residual_tolerance > 0.0) {
            return bad(format!(
                "residual_tolerance must be positive, got {}",
                self.residual_tolerance
            ));
        }
        if self.output.diagnostics_file.is_empty() {
            return bad("output.diagnostics_file must not be empty".into());
        }
        Ok(())
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<SimulationConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    SimulationConfig::from_json(&text)
}
