use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shiftkit::models::{Hyperparams, ModelKind};

use crate::error::CliError;
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Calibration,
    Quantification,
    Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftKind {
    #[serde(rename = "LS")]
    Label,
    #[serde(rename = "CS")]
    Covariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub params: Hyperparams,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { kind: ModelKind::LogisticRegression, params: Hyperparams::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub n_samples: usize,
    pub size: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { n_samples: 100, size: 250 }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// One experiment: a task, a shift type, datasets and the methods to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub shift: ShiftKind,
    /// Label-shift dataset.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Covariate-shift source dataset.
    #[serde(default)]
    pub source: Option<PathBuf>,
    /// Covariate-shift target dataset.
    #[serde(default)]
    pub target: Option<PathBuf>,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    pub methods: Vec<String>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Reads a JSON config; relative dataset paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.source, &mut cfg.target].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.shift {
            ShiftKind::Label if self.dataset.is_none() => {
                return Err(CliError::Config("LS experiments need `dataset`".into()));
            }
            ShiftKind::Covariate if self.source.is_none() || self.target.is_none() => {
                return Err(CliError::Config("CS experiments need both `source` and `target`".into()));
            }
            _ => {}
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("`methods` is empty".into()));
        }
        if self.protocol.n_samples == 0 || self.protocol.size == 0 {
            return Err(CliError::Config("protocol needs n_samples >= 1 and size >= 1".into()));
        }
        if self.classifier.params.k == 0 {
            return Err(CliError::Config("classifier k must be >= 1".into()));
        }
        let registry = Registry::new(self.shift, self.seed);
        for m in &self.methods {
            if !registry.contains(self.task, m) {
                return Err(CliError::Config(format!(
                    "unknown {:?} method `{m}`; valid methods: {}",
                    self.task,
                    registry.names(self.task).join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Name used for the `dataset` column.
    pub fn dataset_name(&self) -> String {
        let stem = |p: &Option<PathBuf>| {
            p.as_deref()
                .and_then(Path::file_stem)
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        };
        match self.shift {
            ShiftKind::Label => stem(&self.dataset),
            ShiftKind::Covariate => format!("{}->{}", stem(&self.source), stem(&self.target)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"task":"quantification","shift":"LS","dataset":"d.csv","methods":["CC"],"classifier":{"kind":"knn","k":5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.classifier.kind, ModelKind::KNearestNeighbor);
        assert_eq!(cfg.classifier.params.k, 5);
        assert_eq!(cfg.protocol, ProtocolConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_fields_and_methods() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"task":"accuracy","shift":"LS","methods":[],"bogus":1}"#).is_err());
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"task":"accuracy","shift":"LS","dataset":"d.csv","methods":["FOO"]}"#).unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("FOO") && msg.contains("ATC") && msg.contains("DoC"), "{msg}");
    }

    #[test]
    fn covariate_shift_needs_two_datasets() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"task":"calibration","shift":"CS","source":"a.csv","methods":["Platt"]}"#).unwrap();
        assert_eq!(cfg.validate().unwrap_err().code(), 1);
    }
}
