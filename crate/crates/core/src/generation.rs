//! Synthetic condition generation: one inspection step ahead, sequential
//! multi-step rollouts, and hypothetical cohorts built from scratch.
//!
//! Each asset in each step draws from its own stream keyed by
//! `(master_seed, step, asset_id)`, so output does not depend on iteration
//! order or thread count.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combination::{
    self, CombineError, CombinedModel, EstimateDiagnostics, EstimateOptions, ModelSpec, RatingPath,
};
use crate::data::{
    AttributeKind, ConditionValue, DataError, InspectionDataset, InspectionRecord, Schema,
};
use crate::seed::{Stream, StreamKey};
use crate::stochastic::{
    self, CategoricalAgeModel, SigmaTable, StochasticError, DEFAULT_FALLBACK_FRACTION,
    DEFAULT_NEIGHBOR_WINDOW,
};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("attributes without a model: {}", .0.join(", "))]
    Uncovered(Vec<String>),
    #[error("asset {asset}: {source}")]
    Asset {
        asset: String,
        #[source]
        source: Box<GenerationError>,
    },
    #[error("step {step}: {source}")]
    Step {
        step: u32,
        #[source]
        source: Box<GenerationError>,
    },
    #[error("{attribute}: {source}")]
    Attribute {
        attribute: String,
        #[source]
        source: Box<GenerationError>,
    },
    #[error(transparent)]
    Combine(#[from] CombineError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    /// Age plus the previous inspection's conditions.
    #[default]
    Full,
    /// Age only; models must not need the previous record.
    AgeOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub start_year: i32,
    pub steps: u32,
    pub interval: u32,
    #[serde(default)]
    pub mode: GenerationMode,
    pub master_seed: u64,
    /// Add Gaussian variation to numerical values; otherwise emit the model
    /// expectation.
    #[serde(default = "default_true")]
    pub diversify: bool,
}

fn default_true() -> bool {
    true
}

/// Everything needed to generate every attribute of a schema.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSet {
    pub combined: BTreeMap<String, CombinedModel>,
    pub sigma: BTreeMap<String, SigmaTable>,
    pub categorical: BTreeMap<String, CategoricalAgeModel>,
    pub rating_paths: BTreeMap<String, RatingPath>,
}

impl ModelSet {
    /// Attributes of `schema` that this set cannot generate.
    pub fn uncovered(&self, schema: &Schema) -> Vec<String> {
        schema
            .attributes()
            .iter()
            .filter(|a| match a.kind {
                AttributeKind::Numerical => !self.combined.contains_key(&a.name),
                AttributeKind::Rating => match self.rating_path(&a.name) {
                    RatingPath::Categorical => !self.categorical.contains_key(&a.name),
                    RatingPath::Converted => !self.combined.contains_key(&a.name),
                },
            })
            .map(|a| a.name.clone())
            .collect()
    }

    pub fn rating_path(&self, attr: &str) -> RatingPath {
        self.rating_paths.get(attr).copied().unwrap_or_default()
    }

    pub fn needs_previous(&self) -> bool {
        self.combined.values().any(|m| m.needs_previous())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitSetOptions {
    pub estimate: EstimateOptions,
    pub fallback_fraction: f64,
    pub neighbor_window: u32,
}

impl Default for FitSetOptions {
    fn default() -> Self {
        Self {
            estimate: EstimateOptions::default(),
            fallback_fraction: DEFAULT_FALLBACK_FRACTION,
            neighbor_window: DEFAULT_NEIGHBOR_WINDOW,
        }
    }
}

/// Fits a full [`ModelSet`] for `training.schema()` from a model spec.
/// Returns the per-condition estimation diagnostics alongside.
pub fn fit_models(
    spec: &ModelSpec,
    training: &InspectionDataset,
    opts: FitSetOptions,
) -> Result<(ModelSet, BTreeMap<String, EstimateDiagnostics>), GenerationError> {
    let schema = training.schema();
    let mut unknown: Vec<String> = Vec::new();
    for cond in &spec.conditions {
        for name in cond.referenced_attributes() {
            if schema.get(name).is_none() && !unknown.iter().any(|u| u == name) {
                unknown.push(name.to_string());
            }
        }
    }
    if !unknown.is_empty() {
        return Err(GenerationError::Config(format!(
            "model spec references unknown attributes: {}",
            unknown.join(", ")
        )));
    }
    let mut set = ModelSet::default();
    let mut diags = BTreeMap::new();
    let mut uncovered = Vec::new();
    for attr in schema.attributes() {
        let cond = spec.get(&attr.name);
        let path = match attr.kind {
            AttributeKind::Numerical => None,
            AttributeKind::Rating => Some(cond.and_then(|c| c.rating_path).unwrap_or_default()),
        };
        if path == Some(RatingPath::Categorical) {
            let m = stochastic::fit_categorical(training, &attr.name, opts.neighbor_window)?;
            set.categorical.insert(attr.name.clone(), m);
            set.rating_paths.insert(attr.name.clone(), RatingPath::Categorical);
            continue;
        }
        let Some(cond) = cond.filter(|c| c.has_terms()) else {
            uncovered.push(attr.name.clone());
            continue;
        };
        let wrap = |e: CombineError| GenerationError::Attribute {
            attribute: attr.name.clone(),
            source: Box::new(e.into()),
        };
        let (model, diag) = combination::estimate(cond, training, opts.estimate).map_err(wrap)?;
        let sigma = stochastic::estimate_sigma(training, &model, opts.fallback_fraction)?;
        if let Some(p) = path {
            set.rating_paths.insert(attr.name.clone(), p);
        }
        set.sigma.insert(attr.name.clone(), sigma);
        set.combined.insert(attr.name.clone(), model);
        diags.insert(attr.name.clone(), diag);
    }
    if !uncovered.is_empty() {
        return Err(GenerationError::Uncovered(uncovered));
    }
    Ok((set, diags))
}

/// Generates one record at `age`, given the previous inspection's values
/// (required when any model needs them).
#[allow(clippy::too_many_arguments)]
pub fn generate_record<R: Rng + ?Sized>(
    models: &ModelSet,
    schema: &Schema,
    asset_id: &str,
    year: i32,
    age: f64,
    previous: Option<&BTreeMap<String, f64>>,
    diversify: bool,
    rng: &mut R,
) -> Result<InspectionRecord, GenerationError> {
    let mut rec = InspectionRecord::new(asset_id, year, age);
    for attr in schema.attributes() {
        let value = generate_value(models, attr, age, previous, diversify, rng).map_err(|e| {
            GenerationError::Attribute {
                attribute: attr.name.clone(),
                source: Box::new(e),
            }
        })?;
        rec.values.insert(attr.name.clone(), value);
    }
    Ok(rec)
}

fn generate_value<R: Rng + ?Sized>(
    models: &ModelSet,
    attr: &crate::data::ConditionAttribute,
    age: f64,
    previous: Option<&BTreeMap<String, f64>>,
    diversify: bool,
    rng: &mut R,
) -> Result<ConditionValue, GenerationError> {
    let name = attr.name.as_str();
    if attr.kind == AttributeKind::Rating && models.rating_path(name) == RatingPath::Categorical {
        let m = models
            .categorical
            .get(name)
            .ok_or_else(|| GenerationError::Uncovered(vec![name.to_string()]))?;
        return Ok(ConditionValue::Rating(stochastic::sample_categorical(m, age, rng)?));
    }
    let combined = models
        .combined
        .get(name)
        .ok_or_else(|| GenerationError::Uncovered(vec![name.to_string()]))?;
    let expected = combined.evaluate(age, previous)?;
    let value = if diversify {
        let sigma = models
            .sigma
            .get(name)
            .map(|t| t.lookup(age, expected))
            .unwrap_or(DEFAULT_FALLBACK_FRACTION * expected.abs());
        if attr.kind == AttributeKind::Numerical && !attr.allow_negative {
            stochastic::diversify_non_negative(expected, sigma, rng)?
        } else {
            stochastic::diversify(expected, sigma, rng)?
        }
    } else if attr.kind == AttributeKind::Numerical && !attr.allow_negative {
        expected.max(0.0)
    } else {
        expected
    };
    Ok(match attr.kind {
        AttributeKind::Numerical => ConditionValue::Numeric(value),
        AttributeKind::Rating => {
            let n = attr.rating_levels.expect("rating attributes carry levels");
            ConditionValue::Rating(stochastic::numeric_to_rating(value, n))
        }
    })
}

fn check_models(models: &ModelSet, schema: &Schema, mode: GenerationMode) -> Result<(), GenerationError> {
    let uncovered = models.uncovered(schema);
    if !uncovered.is_empty() {
        return Err(GenerationError::Uncovered(uncovered));
    }
    if mode == GenerationMode::AgeOnly {
        let needing: Vec<&str> = models
            .combined
            .iter()
            .filter(|(_, m)| m.needs_previous())
            .map(|(k, _)| k.as_str())
            .collect();
        if !needing.is_empty() {
            return Err(GenerationError::Config(format!(
                "age-only generation with models that need the previous inspection: {}",
                needing.join(", ")
            )));
        }
    }
    Ok(())
}

fn step_stream(seed: u64, step: u32, asset: &str) -> Stream {
    StreamKey::new(seed, "generate").index(step as u64).name(asset).stream()
}

/// Advances every asset of `current` (its latest record) by one inspection
/// interval. `step` selects the random streams.
pub fn generate_step(
    models: &ModelSet,
    current: &InspectionDataset,
    plan: &GenerationPlan,
    step: u32,
) -> Result<InspectionDataset, GenerationError> {
    let schema = current.schema();
    check_models(models, schema, plan.mode)?;
    if plan.interval == 0 {
        return Err(GenerationError::Config("interval must be positive".into()));
    }
    let latest = current.latest_by_asset();
    let records: Result<Vec<InspectionRecord>, GenerationError> = latest
        .par_iter()
        .map(|prev| {
            let mut rng = step_stream(plan.master_seed, step, &prev.asset_id);
            let view = match plan.mode {
                GenerationMode::Full => Some(prev.numeric_view(schema)),
                GenerationMode::AgeOnly => None,
            };
            generate_record(
                models,
                schema,
                &prev.asset_id,
                prev.inspection_year + plan.interval as i32,
                prev.age_years + plan.interval as f64,
                view.as_ref(),
                plan.diversify,
                &mut rng,
            )
            .map_err(|e| GenerationError::Asset {
                asset: prev.asset_id.clone(),
                source: Box::new(e),
            })
        })
        .collect();
    Ok(InspectionDataset::new(schema.clone(), records?, plan.interval)?)
}

/// `plan.steps` successive steps, each consuming the previous output.
pub fn generate_sequence(
    models: &ModelSet,
    seed_dataset: &InspectionDataset,
    plan: &GenerationPlan,
) -> Result<Vec<InspectionDataset>, GenerationError> {
    let mut out: Vec<InspectionDataset> = Vec::with_capacity(plan.steps as usize);
    for step in 0..plan.steps {
        let input = out.last().unwrap_or(seed_dataset);
        let next = generate_step(models, input, plan, step).map_err(|e| GenerationError::Step {
            step,
            source: Box::new(e),
        })?;
        out.push(next);
    }
    Ok(out)
}

/// Initial age distribution of a hypothetical cohort. Drawn ages are whole
/// years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgeDistribution {
    Fixed { age: f64 },
    /// Integer ages uniform on `[min, max]`.
    Uniform { min: u32, max: u32 },
    Discrete { ages: Vec<f64>, weights: Vec<f64> },
}

impl AgeDistribution {
    fn validate(&self) -> Result<(), GenerationError> {
        match self {
            AgeDistribution::Fixed { age } if !(*age >= 0.0) => {
                Err(GenerationError::Config(format!("negative initial age {age}")))
            }
            AgeDistribution::Uniform { min, max } if min > max => Err(GenerationError::Config(
                format!("uniform age range [{min}, {max}] is empty"),
            )),
            AgeDistribution::Discrete { ages, weights }
                if ages.len() != weights.len()
                    || ages.is_empty()
                    || ages.iter().any(|a| !(*a >= 0.0))
                    || weights.iter().any(|w| !(*w >= 0.0))
                    || weights.iter().sum::<f64>() <= 0.0 =>
            {
                Err(GenerationError::Config("invalid discrete age distribution".into()))
            }
            _ => Ok(()),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AgeDistribution::Fixed { age } => *age,
            AgeDistribution::Uniform { min, max } => rng.random_range(*min..=*max) as f64,
            AgeDistribution::Discrete { ages, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (a, w) in ages.iter().zip(weights) {
                    if u < *w {
                        return *a;
                    }
                    u -= w;
                }
                *ages.last().expect("validated non-empty")
            }
        }
    }
}

/// Builds a cohort of `asset_count` assets at `plan.start_year` from age
/// alone, then rolls it forward `plan.steps` inspections. The first dataset
/// of the result is the initial cohort.
pub fn generate_hypothetical(
    schema: &Schema,
    models: &ModelSet,
    asset_count: usize,
    ages: &AgeDistribution,
    plan: &GenerationPlan,
) -> Result<Vec<InspectionDataset>, GenerationError> {
    ages.validate()?;
    check_models(models, schema, GenerationMode::AgeOnly)?;
    let records: Result<Vec<InspectionRecord>, GenerationError> = (0..asset_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamKey::new(plan.master_seed, "cohort").index(i as u64).stream();
            let age = ages.draw(&mut rng);
            let id = format!("H{:06}", i + 1);
            generate_record(models, schema, &id, plan.start_year, age, None, plan.diversify, &mut rng)
        })
        .collect();
    let initial = InspectionDataset::new(schema.clone(), records?, plan.interval.max(1))?;
    let mut out = vec![initial];
    out.extend(generate_sequence(models, &out[0], plan)?);
    Ok(out)
}
