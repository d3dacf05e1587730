//! Run manifests: the embedded config plus every derived constant and the
//! SHA-256 of every artifact. No timestamps or host data, so identical
//! configs give identical manifests.

use std::path::Path;

use nilwalk_core::lie::FiltrationKind;
use nilwalk_core::norms::{GaugeMode, HomogeneousNorm};
use nilwalk_core::semidirect::DerivedConstants;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivedBlock {
    #[serde(flatten)]
    pub constants: DerivedConstants,
    /// `2 R_mu / kappa_mu`, present when the walk was run on the conjugated
    /// measure.
    pub conjugation_offset: Option<f64>,
    pub centred: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeBlock {
    pub hash: String,
    pub mode: GaugeMode,
    pub filtration: FiltrationKind,
    pub layer_dims: Vec<usize>,
    pub kappa: Vec<f64>,
    pub bilinearity_bound: f64,
    pub fallback_layers: Vec<usize>,
}

impl GaugeBlock {
    pub fn of(norm: &HomogeneousNorm) -> Self {
        let d = norm.descriptor();
        Self {
            hash: norm.descriptor_hash(),
            mode: d.mode,
            filtration: d.filtration,
            layer_dims: d.layer_dims,
            kappa: d.kappa,
            bilinearity_bound: d.bilinearity_bound,
            fallback_layers: d.fallback_layers,
        }
    }
}

/// Probability that every one of the `n` steps draws atom 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstantAtomBlock {
    pub atom: usize,
    pub p_atom: f64,
    pub exact: f64,
    pub observed: f64,
    pub hits: usize,
    pub reps: usize,
    /// Binomial standard deviation of the observed fraction at `exact`.
    pub sigma: f64,
    pub within_3sigma: bool,
    pub clopper_pearson_95: (f64, f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_atom: Option<ConstantAtomBlock>,
    pub summary: serde_json::Value,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: format!("nilwalk {}", env!("CARGO_PKG_VERSION")),
            config: config.for_manifest(),
            derived: None,
            gauge: None,
            constant_atom: None,
            summary: serde_json::Value::Null,
            files: Vec::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = serde_json::to_vec_pretty(self).expect("manifest serializes");
        b.push(b'\n');
        b
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let m = serde_json::from_slice(&bytes).map_err(|e| CliError::Schema(format!("manifest: {e}")))?;
        Ok((m, bytes))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Artifact files of one run, kept in memory until the single write pass.
#[derive(Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn entries(&self) -> Vec<FileEntry> {
        self.files
            .iter()
            .map(|(name, b)| FileEntry {
                name: name.clone(),
                bytes: b.len(),
                sha256: sha256_hex(b),
            })
            .collect()
    }

    pub fn write(&self, dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, bytes) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        }
        let p = dir.join(MANIFEST_NAME);
        std::fs::write(&p, manifest.to_bytes()).map_err(|e| CliError::io(&p, e))
    }
}
