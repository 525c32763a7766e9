//! Experiment manifests.
//!
//! A manifest is a TOML document with a `schema_version` key. Everything that
//! influences results is covered by [`ExperimentConfig::digest`]; the
//! `[output]` table is excluded so the same experiment written to a different
//! directory keeps its digest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environment::{greedy_trap, AdaptiveStrategy, AdversaryKind, NoiseKind};
use crate::error::{LabError, Result};
use crate::policy::{ConstantOverrides, Policy, SamplerConfig, VMode};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VModeSetting {
    #[default]
    Anytime,
    /// Uses the experiment's own horizon.
    FixedHorizon,
}

/// Context generator as written in a manifest; dimensions come from `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversarySetting {
    FixedSlate { contexts: Vec<Vec<f64>> },
    SphereIid { arms: usize },
    RotatingBasis,
    OrthogonalDrift { arms: usize },
    /// Two-arm trap instance; also fixes `μ` unless the manifest sets one.
    GreedyTrap,
    UnitBall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSetting {
    /// Explicit parameter. When absent, each replication draws a uniform
    /// direction scaled to `mu_norm`.
    #[serde(default)]
    pub mu_star: Option<Vec<f64>>,
    #[serde(default = "default_mu_norm")]
    pub mu_norm: f64,
}

fn default_mu_norm() -> f64 {
    1.0
}

impl Default for InstanceSetting {
    fn default() -> Self {
        InstanceSetting {
            mu_star: None,
            mu_norm: default_mu_norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSetting {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default)]
    pub format: OutputFormat,
    /// Keep per-arm vectors every `thin` rounds.
    #[serde(default = "default_thin")]
    pub thin: u64,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_thin() -> u64 {
    1
}

impl Default for OutputSetting {
    fn default() -> Self {
        OutputSetting {
            dir: default_out_dir(),
            format: OutputFormat::default(),
            thin: default_thin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSetting {
    pub dims: Vec<usize>,
    pub horizons: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSetting {
    #[serde(default = "default_event_rounds")]
    pub event_rounds: Vec<u64>,
    #[serde(default = "default_drift_rounds")]
    pub drift_rounds: Vec<u64>,
}

fn default_event_rounds() -> Vec<u64> {
    vec![5, 20, 100]
}

fn default_drift_rounds() -> Vec<u64> {
    vec![10, 50, 200]
}

impl Default for AuditSetting {
    fn default() -> Self {
        AuditSetting {
            event_rounds: default_event_rounds(),
            drift_rounds: default_drift_rounds(),
        }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dim: usize,
    pub horizon: u64,
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub assert_unit_gaps: bool,
    #[serde(default)]
    pub v_mode: VModeSetting,
    /// `R` assumed by the sampler; defaults to the noise scale.
    #[serde(default)]
    pub sub_gaussian_scale: Option<f64>,
    pub noise: NoiseKind,
    pub policy: Policy,
    pub adversary: AdversarySetting,
    #[serde(default)]
    pub instance: InstanceSetting,
    #[serde(default)]
    pub constants: ConstantOverrides,
    #[serde(default)]
    pub audit: AuditSetting,
    #[serde(default)]
    pub scaling: Option<ScalingSetting>,
    #[serde(default)]
    pub output: OutputSetting,
}

fn default_replications() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(LabError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.horizon < 1 {
            return Err(LabError::Config("horizon must be >= 1".into()));
        }
        if self.replications < 1 {
            return Err(LabError::Config("replications must be >= 1".into()));
        }
        if self.output.thin < 1 {
            return Err(LabError::Config("thin stride must be >= 1".into()));
        }
        if !(self.instance.mu_norm >= 0.0 && self.instance.mu_norm <= 1.0) {
            return Err(LabError::Config("mu_norm must lie in [0, 1]".into()));
        }
        if let Some(mu) = &self.instance.mu_star {
            if mu.len() != self.dim {
                return Err(LabError::Dimension {
                    expected: self.dim,
                    got: mu.len(),
                });
            }
        }
        self.noise.validate()?;
        self.policy.validate()?;
        self.sampler()?;
        let adv = self.adversary_kind()?;
        adv.validate()?;
        if adv.dim() != self.dim {
            return Err(LabError::Dimension {
                expected: self.dim,
                got: adv.dim(),
            });
        }
        if adv.arms().is_none() && !self.policy.supports_unit_ball() {
            return Err(LabError::Config(format!(
                "policy {} needs a finite slate",
                self.policy.name()
            )));
        }
        if let Some(s) = &self.scaling {
            if s.dims.is_empty() || s.horizons.is_empty() {
                return Err(LabError::Config("scaling grids must be non-empty".into()));
            }
            if s.dims.contains(&0) || s.horizons.contains(&0) {
                return Err(LabError::Config("scaling grid values must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<SamplerConfig> {
        let r = self.sub_gaussian_scale.unwrap_or_else(|| self.noise.scale());
        let v_mode = match self.v_mode {
            VModeSetting::Anytime => VMode::Anytime,
            VModeSetting::FixedHorizon => VMode::FixedHorizon {
                horizon: self.horizon,
            },
        };
        let mut cfg = SamplerConfig::new(r, self.delta, self.dim, v_mode)?;
        cfg.overrides = self.constants;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn adversary_kind(&self) -> Result<AdversaryKind> {
        let dim = self.dim;
        Ok(match &self.adversary {
            AdversarySetting::FixedSlate { contexts } => AdversaryKind::FixedSlate {
                contexts: contexts.clone(),
            },
            AdversarySetting::SphereIid { arms } => AdversaryKind::SphereIid { arms: *arms, dim },
            AdversarySetting::RotatingBasis => AdversaryKind::RotatingBasis { dim },
            AdversarySetting::OrthogonalDrift { arms } => AdversaryKind::HistoryAdaptive {
                strategy: AdaptiveStrategy::OrthogonalDrift,
                arms: *arms,
                dim,
            },
            AdversarySetting::GreedyTrap => greedy_trap(dim)?.0,
            AdversarySetting::UnitBall => AdversaryKind::UnitBall { dim },
        })
    }

    /// Parameter fixed by the manifest or by the instance preset, if any.
    pub fn fixed_mu_star(&self) -> Result<Option<Vec<f64>>> {
        if let Some(mu) = &self.instance.mu_star {
            return Ok(Some(mu.clone()));
        }
        if let AdversarySetting::GreedyTrap = self.adversary {
            return Ok(Some(greedy_trap(self.dim)?.1));
        }
        Ok(None)
    }

    /// SHA-256 over the canonical JSON form of every result-relevant field.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputSetting::default();
        let json = serde_json::to_string(&canonical).expect("config serializes to JSON");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
