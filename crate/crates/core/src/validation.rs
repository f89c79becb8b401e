//! Validation harness: one-step generation scored against held-out
//! inspections (full information and age only), health-index agreement, and
//! accuracy as a function of training size.
//!
//! Models are fitted on direction-normalized data; every score is computed on
//! the original scale.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combination::ModelSpec;
use crate::data::{
    normalize_direction, AttributeKind, DataError, DirectionTransform, InspectionDataset,
    InspectionRecord,
};
use crate::generation::{
    self, FitSetOptions, GenerationError, GenerationMode, GenerationPlan, ModelSet,
};
use crate::health_index::{self, HealthIndexError, HealthIndexModel, HiMode};
use crate::metrics::{self, MetricsError, DEFAULT_BINS};
use crate::seed::StreamKey;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("need at least two inspection years, found {0}")]
    TooFewYears(usize),
    #[error("no asset has both of the last two inspections")]
    NoTestPairs,
    #[error("training size {requested} exceeds the {available} available assets")]
    TrainingSize { requested: usize, available: usize },
    #[error("{condition}: {source}")]
    Metric {
        condition: String,
        #[source]
        source: MetricsError,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    HealthIndex(#[from] HealthIndexError),
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    pub fit: FitSetOptions,
    pub master_seed: u64,
    pub bins: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            fit: FitSetOptions::default(),
            master_seed: 0,
            bins: DEFAULT_BINS,
        }
    }
}

/// Train/test split on the last inspection cycle.
#[derive(Debug, Clone)]
pub struct Split {
    /// Every record before the last year, direction-normalized.
    pub training: InspectionDataset,
    /// Second-to-last inspection of each test asset, direction-normalized.
    pub previous: InspectionDataset,
    /// Last inspection of each test asset, original scale.
    pub actual: InspectionDataset,
    pub transform: DirectionTransform,
}

impl Split {
    pub fn new(dataset: &InspectionDataset) -> Result<Self, ValidationError> {
        let years = dataset.years();
        if years.len() < 2 {
            return Err(ValidationError::TooFewYears(years.len()));
        }
        let last = years[years.len() - 1];
        let prev_year = last - dataset.interval() as i32;
        let (normalized, transform) = normalize_direction(dataset)?;
        let has = |year: i32| -> BTreeMap<&str, usize> {
            dataset
                .records()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.inspection_year == year)
                .map(|(i, r)| (r.asset_id.as_str(), i))
                .collect()
        };
        let at_last = has(last);
        let at_prev = has(prev_year);
        let mut previous = Vec::new();
        let mut actual = Vec::new();
        for (id, i) in &at_last {
            if let Some(j) = at_prev.get(id) {
                actual.push(dataset.records()[*i].clone());
                previous.push(normalized.records()[*j].clone());
            }
        }
        if actual.is_empty() {
            return Err(ValidationError::NoTestPairs);
        }
        let training: Vec<InspectionRecord> = normalized
            .records()
            .iter()
            .filter(|r| r.inspection_year < last)
            .cloned()
            .collect();
        Ok(Self {
            training: normalized.with_records(training)?,
            previous: normalized.with_records(previous)?,
            actual: dataset.with_records(actual)?,
            transform,
        })
    }

    /// Same split with training restricted to the given assets.
    pub fn restrict_training(&self, assets: &[&str]) -> Result<Self, ValidationError> {
        let keep: std::collections::BTreeSet<&str> = assets.iter().copied().collect();
        let records = self
            .training
            .records()
            .iter()
            .filter(|r| keep.contains(r.asset_id.as_str()))
            .cloned()
            .collect();
        Ok(Self {
            training: self.training.with_records(records)?,
            ..self.clone()
        })
    }

    pub fn training_assets(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.training.records().iter().map(|r| r.asset_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionScore {
    pub condition: String,
    pub kind: AttributeKind,
    pub kl: f64,
    pub benchmark_kl: f64,
    /// Diversified generation against actual values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mape: Option<f64>,
    /// Deterministic expectation against actual values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mape_expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cmp: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OneStep {
    pub scores: Vec<ConditionScore>,
    pub models: ModelSet,
    /// Diversified generated conditions, original scale, aligned with
    /// `Split::actual`.
    pub generated: InspectionDataset,
}

fn plan(split: &Split, mode: GenerationMode, seed: u64, diversify: bool) -> GenerationPlan {
    GenerationPlan {
        start_year: split.previous.years().first().copied().unwrap_or_default(),
        steps: 1,
        interval: split.previous.interval(),
        mode,
        master_seed: seed,
        diversify,
    }
}

/// Aligns `generated` with `actual` by asset id.
fn align<'a>(actual: &InspectionDataset, generated: &'a InspectionDataset) -> Vec<&'a InspectionRecord> {
    let by_id: BTreeMap<&str, &InspectionRecord> =
        generated.records().iter().map(|r| (r.asset_id.as_str(), r)).collect();
    actual
        .records()
        .iter()
        .map(|r| *by_id.get(r.asset_id.as_str()).expect("generated every test asset"))
        .collect()
}

/// Generates the last inspection from the one before and scores it per
/// condition. `AgeOnly` fits and generates from age alone.
pub fn one_step(
    split: &Split,
    spec: &ModelSpec,
    mode: GenerationMode,
    opts: &ValidationOptions,
) -> Result<OneStep, ValidationError> {
    let mut fit = opts.fit;
    fit.estimate.age_only = mode == GenerationMode::AgeOnly;
    let (models, _) = generation::fit_models(spec, &split.training, fit)?;
    let generated = generation::generate_step(&models, &split.previous, &plan(split, mode, opts.master_seed, true), 0)?;
    let expected = generation::generate_step(&models, &split.previous, &plan(split, mode, opts.master_seed, false), 0)?;
    let generated = split.transform.invert(&generated)?;
    let expected = split.transform.invert(&expected)?;
    let gen_rows = align(&split.actual, &generated);
    let exp_rows = align(&split.actual, &expected);
    let schema = split.actual.schema();
    let mut scores = Vec::new();
    for attr in schema.attributes() {
        let name = attr.name.as_str();
        let wrap = |source| ValidationError::Metric { condition: name.to_string(), source };
        let mut bench_rng = StreamKey::new(opts.master_seed, "benchmark").name(name).stream();
        let score = match attr.kind {
            AttributeKind::Numerical => {
                let actual: Vec<f64> = split.actual.records().iter().filter_map(|r| r.numeric(schema, name)).collect();
                let pick = |rows: &[&InspectionRecord]| -> Vec<f64> {
                    rows.iter().filter_map(|r| r.numeric(schema, name)).collect()
                };
                let (gen, exp) = (pick(&gen_rows), pick(&exp_rows));
                let (lo, hi) = min_max(&actual);
                let bench = metrics::benchmark_uniform(lo, hi, actual.len(), &mut bench_rng).map_err(wrap)?;
                ConditionScore {
                    condition: name.to_string(),
                    kind: attr.kind,
                    kl: metrics::kl_divergence(&actual, &gen, opts.bins).map_err(wrap)?,
                    benchmark_kl: metrics::kl_divergence(&actual, &bench, opts.bins).map_err(wrap)?,
                    mape: Some(metrics::mape(&actual, &gen).map_err(wrap)?),
                    mape_expected: Some(metrics::mape(&actual, &exp).map_err(wrap)?),
                    r_squared: metrics::r_squared(&actual, &exp).ok(),
                    cmp: None,
                }
            }
            AttributeKind::Rating => {
                let levels = attr.rating_levels.expect("rating attributes carry levels");
                let ratings = |rows: Vec<&InspectionRecord>| -> Vec<u32> {
                    rows.into_iter().filter_map(|r| r.get(name).and_then(|v| v.as_rating())).collect()
                };
                let actual = ratings(split.actual.records().iter().collect());
                let gen = ratings(gen_rows.clone());
                let lo = actual.iter().copied().min().unwrap_or(1);
                let hi = actual.iter().copied().max().unwrap_or(levels);
                let bench: Vec<u32> = (0..actual.len()).map(|_| bench_rng.random_range(lo..=hi)).collect();
                ConditionScore {
                    condition: name.to_string(),
                    kind: attr.kind,
                    kl: metrics::kl_categorical(&actual, &gen, levels).map_err(wrap)?,
                    benchmark_kl: metrics::kl_categorical(&actual, &bench, levels).map_err(wrap)?,
                    mape: None,
                    mape_expected: None,
                    r_squared: None,
                    cmp: Some(metrics::cmp(&actual, &gen).map_err(wrap)?),
                }
            }
        };
        scores.push(score);
    }
    Ok(OneStep { scores, models, generated })
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiScore {
    pub mode: HiMode,
    pub records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub himp: Option<f64>,
}

/// Compares a health-index model's predictions on actual and on generated
/// last-year conditions.
pub fn health_index_agreement(
    split: &Split,
    spec: &ModelSpec,
    model: &HealthIndexModel,
    opts: &ValidationOptions,
) -> Result<HiScore, ValidationError> {
    let step = one_step(split, spec, GenerationMode::Full, opts)?;
    let on_actual = health_index::predict_dataset(model, &split.actual)?;
    let generated = split.actual.with_records(align(&split.actual, &step.generated).into_iter().cloned().collect())?;
    let on_generated = health_index::predict_dataset(model, &generated)?;
    let wrap = |source| ValidationError::Metric { condition: "health_index".into(), source };
    let (mape, himp) = match model.mode {
        HiMode::Continuous => (Some(metrics::mape(&on_actual, &on_generated).map_err(wrap)?), None),
        HiMode::Discrete { .. } => {
            let lv = |xs: &[f64]| xs.iter().map(|x| *x as u32).collect::<Vec<_>>();
            (None, Some(metrics::himp(&lv(&on_actual), &lv(&on_generated)).map_err(wrap)?))
        }
    };
    Ok(HiScore { mode: model.mode, records: on_actual.len(), mape, himp })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub size: usize,
    /// Mean over numerical conditions of the expectation MAPE, per seed.
    pub errors: Vec<f64>,
    pub mean_error: f64,
    /// `100 - mean_error`.
    pub accuracy: f64,
}

/// Accuracy of one-step generation as the number of training assets grows.
/// Each seed draws its own random subset of training assets per size.
pub fn training_size_sweep(
    split: &Split,
    spec: &ModelSpec,
    sizes: &[usize],
    seeds: usize,
    opts: &ValidationOptions,
) -> Result<Vec<SizePoint>, ValidationError> {
    let pool = split.training_assets();
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        if size > pool.len() {
            return Err(ValidationError::TrainingSize { requested: size, available: pool.len() });
        }
        let mut errors = Vec::with_capacity(seeds);
        for s in 0..seeds {
            let mut rng = StreamKey::new(opts.master_seed, "training-size").index(size as u64).index(s as u64).stream();
            let mut ids = pool.clone();
            ids.shuffle(&mut rng);
            let sub = split.restrict_training(&ids[..size])?;
            let step = one_step(&sub, spec, GenerationMode::Full, opts)?;
            let mapes: Vec<f64> = step.scores.iter().filter_map(|c| c.mape_expected).collect();
            errors.push(mapes.iter().sum::<f64>() / mapes.len().max(1) as f64);
        }
        let mean_error = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
        points.push(SizePoint { size, errors, mean_error, accuracy: 100.0 - mean_error });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn split_shapes_and_scale() {
        let fx = fixture::cable_cohort(40, 1);
        let split = Split::new(&fx.dataset).unwrap();
        assert_eq!(split.training.years(), vec![2010, 2013, 2016]);
        assert_eq!(split.previous.years(), vec![2016]);
        assert_eq!(split.actual.years(), vec![2019]);
        assert_eq!(split.actual.len(), 40);
        // thickness is flipped in the model space only
        let orig = split.actual.records()[0].get("thk").unwrap().as_numeric().unwrap();
        assert!(orig <= 10.0 && orig > 0.0);
        assert!(!split.transform.is_identity());
    }

    #[test]
    fn one_step_scores_every_condition() {
        let fx = fixture::cable_cohort(600, 2);
        let split = Split::new(&fx.dataset).unwrap();
        let opts = ValidationOptions::default();
        let full = one_step(&split, &fx.spec, GenerationMode::Full, &opts).unwrap();
        assert_eq!(full.scores.len(), 5);
        for s in &full.scores {
            assert!(s.kl < s.benchmark_kl, "{s:?}");
        }
        let again = one_step(&split, &fx.spec, GenerationMode::Full, &opts).unwrap();
        assert_eq!(full.scores, again.scores);
    }

    #[test]
    fn sweep_rejects_oversized_requests() {
        let fx = fixture::cable_cohort(30, 2);
        let split = Split::new(&fx.dataset).unwrap();
        assert!(matches!(
            training_size_sweep(&split, &fx.spec, &[31], 1, &ValidationOptions::default()),
            Err(ValidationError::TrainingSize { .. })
        ));
    }

    #[test]
    fn health_index_agreement_scores() {
        let fx = fixture::cable_cohort(200, 4);
        let split = Split::new(&fx.dataset).unwrap();
        let training = split.transform.invert(&split.training).unwrap();
        let samples = health_index::labeled_samples(&training, &fx.labels).unwrap();
        let model = health_index::train(&samples, &crate::health_index::HiConfig::default()).unwrap();
        let score = health_index_agreement(&split, &fx.spec, &model, &ValidationOptions::default()).unwrap();
        assert_eq!(score.records, 200);
        let mape = score.mape.unwrap();
        assert!(mape > 0.0 && mape < 20.0, "{mape}");
    }

    #[test]
    fn too_few_years() {
        let fx = fixture::cable_cohort(5, 2);
        let one_year: Vec<_> = fx.dataset.records().iter().filter(|r| r.inspection_year == 2010).cloned().collect();
        let ds = fx.dataset.with_records(one_year).unwrap();
        assert!(matches!(Split::new(&ds), Err(ValidationError::TooFewYears(1))));
    }
}
