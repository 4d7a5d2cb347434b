//! Run manifests: resolved settings, input digest, output digests, timings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Everything needed to repeat a `run` and check its outputs. Only
/// `timings` and `threads` may differ between two runs of one manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// Every resolved setting; usable as a config file.
    pub config: BTreeMap<String, String>,
    pub input: InputRecord,
    pub split_index: usize,
    pub artifacts: Vec<Artifact>,
    pub threads: usize,
    pub timings: Vec<Timing>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("invalid manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read manifest {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn json_round_trip() {
        let m = RunManifest {
            tool: "tricast".into(),
            version: "0.1.0".into(),
            seed: 7,
            config: [("seed".to_string(), "7".to_string())].into_iter().collect(),
            input: InputRecord {
                path: "data.csv".into(),
                sha256: sha256_hex(b""),
            },
            split_index: 798,
            artifacts: vec![Artifact {
                path: "combined.csv".into(),
                sha256: sha256_hex(b"x"),
                bytes: 1,
            }],
            threads: 0,
            timings: vec![Timing {
                stage: "lstm".into(),
                seconds: 0.25,
            }],
        };
        assert_eq!(RunManifest::from_json(&m.to_json()).unwrap(), m);
        assert!(RunManifest::from_json("{}").is_err());
    }
}
