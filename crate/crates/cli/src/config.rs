//! Versioned experiment configuration. Every subcommand is lowered to one of
//! these before it runs, and the manifest embeds it for replay.

use std::path::{Path, PathBuf};

use nilwalk_core::lie::AlgebraDoc;
use nilwalk_core::norms::GaugeParams;
use nilwalk_core::semidirect::{GroupDoc, StepDistributionDoc};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_BOOTSTRAP: usize = 1000;
/// Walks with at least this many replicates are fitted automatically.
pub const AUTO_FIT_REPS: usize = 1000;
/// Smallest checkpoint that enters the automatic fit.
pub const DEFAULT_FIT_MIN_N: u64 = 64;
pub const DEFAULT_CALIBRATION_PAIRS: usize = 20_000;
pub const DEFAULT_CHECK_PAIRS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    AlgebraCheck,
    Walk,
    Fit,
    SplitScan,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: Kind,
    /// Step preset (walk), algebra or step preset (algebra-check), scan
    /// preset (split-scan).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<AlgebraDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<StepDistributionDoc>,
    /// Inline action for split-scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    /// Exponent `a` in `M_n / n^a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_min_n: Option<u64>,
    /// Walk CSV read by `fit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Left out of manifests so that replays into another directory are
    /// byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            preset: None,
            algebra: None,
            mu: None,
            group: None,
            gauge: None,
            eps: None,
            n: None,
            reps: None,
            seed: 0,
            checkpoints: None,
            scaling: None,
            bootstrap: None,
            fit_min_n: None,
            input: None,
            out_dir: None,
            max_steps: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Structural checks that do not need the presets.
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Schema(m.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match self.kind {
            Kind::AlgebraCheck => {
                if self.preset.is_some() == self.algebra.is_some() {
                    return bad("algebra-check needs exactly one of `preset` and `algebra`");
                }
            }
            Kind::Walk => {
                if self.preset.is_some() == self.mu.is_some() {
                    return bad("walk needs exactly one of `preset` and `mu`");
                }
                if self.mu.is_some() && self.algebra.is_none() {
                    return bad("an inline `mu` needs an inline `algebra`");
                }
                if self.n.is_none() || self.reps.is_none() {
                    return bad("walk needs `n` and `reps`");
                }
            }
            Kind::Fit => {
                if self.input.is_none() {
                    return bad("fit needs `input`");
                }
            }
            Kind::SplitScan => {
                if self.preset.is_some() == self.group.is_some() {
                    return bad("split-scan needs exactly one of `preset` and `group`");
                }
                if self.reps.is_none() {
                    return bad("split-scan needs `reps`");
                }
            }
        }
        if self.n == Some(0) || self.reps == Some(0) {
            return bad("`n` and `reps` must be positive");
        }
        if let Some(s) = self.scaling {
            if !(s.is_finite() && s > 0.0) {
                return bad("`scaling` must be positive");
            }
        }
        Ok(())
    }

    pub fn with_out_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.out_dir = dir;
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn gauge_params(&self) -> GaugeParams {
        self.gauge.clone().unwrap_or_else(|| GaugeParams {
            calibration_pairs: DEFAULT_CALIBRATION_PAIRS,
            seed: self.seed,
            ..Default::default()
        })
    }

    /// Explicit checkpoints, else the powers of two from 16 up to `n`, and `n`.
    pub fn checkpoint_list(&self) -> Vec<u64> {
        if let Some(c) = &self.checkpoints {
            return c.clone();
        }
        let n = self.n.unwrap_or(1);
        let mut c: Vec<u64> = (4..64).map(|k| 1u64 << k).take_while(|&p| p < n).collect();
        c.push(n);
        c
    }

    /// The config as recorded in a manifest.
    pub fn for_manifest(&self) -> Self {
        Self {
            out_dir: None,
            ..self.clone()
        }
    }
}
