//! Run configuration. Paths are resolved against the config file's
//! directory; every field a command needs is checked up front and all
//! missing ones are reported together.

use std::path::{Path, PathBuf};

use condgen::generation::{AgeDistribution, GenerationMode};
use condgen::health_index::HiConfig;
use condgen::stochastic::{DEFAULT_FALLBACK_FRACTION, DEFAULT_NEIGHBOR_WINDOW};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub interval: Option<u32>,
    pub model_spec: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default)]
    pub hi: HiConfig,
    pub hi_model: Option<PathBuf>,
    pub assumptions: Option<PathBuf>,
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub fitting: FittingSection,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_label_column() -> String {
    "health_index".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FittingSection {
    pub fallback_fraction: f64,
    pub neighbor_window: u32,
    pub non_negative: bool,
}

impl Default for FittingSection {
    fn default() -> Self {
        Self {
            fallback_fraction: DEFAULT_FALLBACK_FRACTION,
            neighbor_window: DEFAULT_NEIGHBOR_WINDOW,
            non_negative: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hypothetical {
    pub count: usize,
    pub ages: AgeDistribution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSection {
    pub steps: Option<u32>,
    pub mode: GenerationMode,
    pub diversify: bool,
    pub hypothetical: Option<Hypothetical>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            steps: None,
            mode: GenerationMode::Full,
            diversify: true,
            hypothetical: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSection {
    pub bins: usize,
    pub sizes: Vec<usize>,
    pub seeds: usize,
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self {
            bins: condgen::metrics::DEFAULT_BINS,
            sizes: vec![50, 100, 250, 500, 1000],
            seeds: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub iterations: Option<usize>,
    pub annual_replacements: usize,
    pub candidates: Option<Vec<usize>>,
    pub replacement_cohort: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            iterations: None,
            annual_replacements: 0,
            candidates: None,
            replacement_cohort: 200,
        }
    }
}

/// Config fields a command may require.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Schema,
    Dataset,
    Interval,
    ModelSpec,
    Labels,
    HiModel,
    LabelsOrHiModel,
    Assumptions,
    MasterSeed,
    Steps,
    Iterations,
    Candidates,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Fails with one error naming every absent field, then checks that
    /// every referenced file exists.
    pub fn require(&self, fields: &[Field]) -> Result<(), CliError> {
        let mut missing = Vec::new();
        for f in fields {
            let (present, name) = match f {
                Field::Schema => (self.schema.is_some(), "schema"),
                Field::Dataset => (self.dataset.is_some(), "dataset"),
                Field::Interval => (self.interval.is_some(), "interval"),
                Field::ModelSpec => (self.model_spec.is_some(), "model_spec"),
                Field::Labels => (self.labels.is_some(), "labels"),
                Field::HiModel => (self.hi_model.is_some(), "hi_model"),
                Field::LabelsOrHiModel => {
                    (self.labels.is_some() || self.hi_model.is_some(), "labels or hi_model")
                }
                Field::Assumptions => (self.assumptions.is_some(), "assumptions"),
                Field::MasterSeed => (self.master_seed.is_some(), "master_seed (or --seed)"),
                Field::Steps => (self.generation.steps.is_some(), "generation.steps"),
                Field::Iterations => (self.simulation.iterations.is_some(), "simulation.iterations"),
                Field::Candidates => (self.simulation.candidates.is_some(), "simulation.candidates"),
            };
            if !present {
                missing.push(name);
            }
        }
        if !missing.is_empty() {
            return Err(CliError::Invalid(format!(
                "missing config fields: {}",
                missing.join(", ")
            )));
        }
        let files = [
            &self.schema,
            &self.dataset,
            &self.model_spec,
            &self.labels,
            &self.hi_model,
            &self.assumptions,
        ];
        let absent: Vec<String> = files
            .into_iter()
            .flatten()
            .map(|p| self.resolve(p))
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if !absent.is_empty() {
            return Err(CliError::Invalid(format!("files not found: {}", absent.join(", "))));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_fields_reported_together() {
        let cfg: RunConfig = serde_json::from_str(r#"{"interval": 3}"#).unwrap();
        let err = cfg
            .require(&[Field::Schema, Field::Dataset, Field::Interval, Field::Iterations])
            .unwrap_err();
        assert_eq!(
            err.to_string(),
            "missing config fields: schema, dataset, simulation.iterations"
        );
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"intervall": 3}"#).is_err());
    }
}
