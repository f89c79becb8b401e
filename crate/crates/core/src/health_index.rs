//! Health-index rules learned by gradient-boosted regression trees.
//!
//! Plain squared-error boosting: every tree fits the residuals of the
//! ensemble so far with greedy variance-reduction splits over all distinct
//! thresholds. Discrete health indices are treated as ordinal targets and
//! rounded at prediction time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, InspectionDataset};

pub const MIN_TRAINING_RECORDS: usize = 10;
pub const HI_MAX: f64 = 100.0;

#[derive(Debug, Error)]
pub enum HealthIndexError {
    #[error("need at least {required} labeled records, got {available}")]
    InsufficientData { required: usize, available: usize },
    #[error("record is missing attribute {0:?}")]
    MissingAttribute(String),
    #[error("non-finite value for {0:?}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no label for asset {asset} in {year}")]
    MissingLabel { asset: String, year: i32 },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HiMode {
    /// Real-valued index on `[0, 100]`.
    Continuous,
    /// Ordered levels `1..=levels`.
    Discrete { levels: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HiConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub mode: HiMode,
}

impl Default for HiConfig {
    fn default() -> Self {
        Self {
            trees: 50,
            max_depth: 3,
            learning_rate: 0.1,
            mode: HiMode::Continuous,
        }
    }
}

impl HiConfig {
    fn validate(&self) -> Result<(), HealthIndexError> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(HealthIndexError::Config(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if let HiMode::Discrete { levels } = self.mode {
            if levels < 2 {
                return Err(HealthIndexError::Config("discrete mode needs at least 2 levels".into()));
            }
        }
        Ok(())
    }
}

/// A regression tree. Records with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Tree {
    Leaf {
        value: f64,
    },
    Split {
        attribute: String,
        threshold: f64,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    pub fn evaluate(&self, record: &BTreeMap<String, f64>) -> Result<f64, HealthIndexError> {
        let mut node = self;
        loop {
            match node {
                Tree::Leaf { value } => return Ok(*value),
                Tree::Split { attribute, threshold, left, right } => {
                    let x = *record
                        .get(attribute)
                        .ok_or_else(|| HealthIndexError::MissingAttribute(attribute.clone()))?;
                    if !x.is_finite() {
                        return Err(HealthIndexError::NonFinite(attribute.clone()));
                    }
                    node = if x <= *threshold { left } else { right };
                }
            }
        }
    }

    fn collect_attributes<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        if let Tree::Split { attribute, left, right, .. } = self {
            out.insert(attribute);
            left.collect_attributes(out);
            right.collect_attributes(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthIndexModel {
    pub mode: HiMode,
    pub features: Vec<String>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Labels were constant, so the model is the base score alone.
    #[serde(default)]
    pub constant_labels: bool,
}

impl HealthIndexModel {
    /// Attributes that some tree splits on.
    pub fn split_attributes(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for t in &self.trees {
            t.collect_attributes(&mut out);
        }
        out
    }

    /// Unclamped ensemble output.
    pub fn raw(&self, record: &BTreeMap<String, f64>) -> Result<f64, HealthIndexError> {
        if let Some(missing) = self.split_attributes().into_iter().find(|a| !record.contains_key(*a)) {
            return Err(HealthIndexError::MissingAttribute(missing.to_string()));
        }
        let mut sum = 0.0;
        for t in &self.trees {
            sum += t.evaluate(record)?;
        }
        Ok(self.base_score + self.learning_rate * sum)
    }

    /// Health index: clamped to `[0, 100]` in continuous mode, rounded to the
    /// nearest level in `[1, L]` in discrete mode.
    pub fn predict(&self, record: &BTreeMap<String, f64>) -> Result<f64, HealthIndexError> {
        Ok(finalize(self.mode, self.raw(record)?))
    }
}

fn finalize(mode: HiMode, raw: f64) -> f64 {
    match mode {
        HiMode::Continuous => raw.clamp(0.0, HI_MAX),
        HiMode::Discrete { levels } => raw.round().clamp(1.0, levels as f64),
    }
}

/// Feature values keyed by attribute, with the health-index label.
pub type Sample = (BTreeMap<String, f64>, f64);

/// Trains on feature maps paired with labels. Every record must carry every
/// attribute of the first record.
pub fn train(
    samples: &[Sample],
    config: &HiConfig,
) -> Result<HealthIndexModel, HealthIndexError> {
    config.validate()?;
    if samples.len() < MIN_TRAINING_RECORDS {
        return Err(HealthIndexError::InsufficientData {
            required: MIN_TRAINING_RECORDS,
            available: samples.len(),
        });
    }
    let features: Vec<String> = samples[0].0.keys().cloned().collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(samples.len()); features.len()];
    let mut labels = Vec::with_capacity(samples.len());
    for (record, label) in samples {
        for (col, f) in columns.iter_mut().zip(&features) {
            let x = *record.get(f).ok_or_else(|| HealthIndexError::MissingAttribute(f.clone()))?;
            if !x.is_finite() {
                return Err(HealthIndexError::NonFinite(f.clone()));
            }
            col.push(x);
        }
        if !label.is_finite() {
            return Err(HealthIndexError::NonFinite("label".into()));
        }
        labels.push(*label);
    }
    let n = labels.len() as f64;
    let base_score = labels.iter().sum::<f64>() / n;
    let constant_labels = labels.iter().all(|y| *y == labels[0]);
    let mut model = HealthIndexModel {
        mode: config.mode,
        features: features.clone(),
        base_score: if constant_labels { labels[0] } else { base_score },
        learning_rate: config.learning_rate,
        trees: Vec::new(),
        constant_labels,
    };
    if constant_labels {
        return Ok(model);
    }
    // per-feature row orderings, reused by every split search
    let orders: Vec<Vec<usize>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..col.len()).collect();
            idx.sort_by(|a, b| col[*a].total_cmp(&col[*b]).then(a.cmp(b)));
            idx
        })
        .collect();
    let mut prediction = vec![model.base_score; labels.len()];
    let mut residual = vec![0.0; labels.len()];
    let ctx = Grower { features: &features, columns: &columns, orders: &orders };
    for _ in 0..config.trees {
        for i in 0..labels.len() {
            residual[i] = labels[i] - prediction[i];
        }
        let rows: Vec<bool> = vec![true; labels.len()];
        let tree = ctx.grow(&residual, rows, config.max_depth);
        for (i, p) in prediction.iter_mut().enumerate() {
            let row: BTreeMap<String, f64> =
                features.iter().zip(&columns).map(|(f, c)| (f.clone(), c[i])).collect();
            *p += config.learning_rate * tree.evaluate(&row)?;
        }
        model.trees.push(tree);
    }
    Ok(model)
}

struct Grower<'a> {
    features: &'a [String],
    columns: &'a [Vec<f64>],
    orders: &'a [Vec<usize>],
}

impl Grower<'_> {
    fn grow(&self, residual: &[f64], rows: Vec<bool>, depth: usize) -> Tree {
        let count = rows.iter().filter(|r| **r).count();
        let total: f64 = residual.iter().zip(&rows).filter(|(_, r)| **r).map(|(v, _)| v).sum();
        let leaf = Tree::Leaf { value: total / count as f64 };
        if depth == 0 || count < 2 {
            return leaf;
        }
        let parent = total * total / count as f64;
        // (gain, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, (col, order)) in self.columns.iter().zip(self.orders).enumerate() {
            let mut left_sum = 0.0;
            let mut left_n = 0usize;
            let members: Vec<usize> = order.iter().copied().filter(|i| rows[*i]).collect();
            for w in members.windows(2) {
                left_sum += residual[w[0]];
                left_n += 1;
                let (lo, hi) = (col[w[0]], col[w[1]]);
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let right_n = count - left_n;
                let gain = left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64 - parent;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        let Some((gain, f, threshold)) = best else {
            return leaf;
        };
        if !(gain > 1e-12 * parent.abs().max(f64::MIN_POSITIVE)) {
            return leaf;
        }
        let col = &self.columns[f];
        let left_rows: Vec<bool> = rows.iter().enumerate().map(|(i, r)| *r && col[i] <= threshold).collect();
        let right_rows: Vec<bool> = rows.iter().enumerate().map(|(i, r)| *r && col[i] > threshold).collect();
        Tree::Split {
            attribute: self.features[f].clone(),
            threshold,
            left: Box::new(self.grow(residual, left_rows, depth - 1)),
            right: Box::new(self.grow(residual, right_rows, depth - 1)),
        }
    }
}

/// Training samples from a dataset and labels keyed by `(asset_id, year)`.
/// Ratings enter as their numeric conversion.
pub fn labeled_samples(
    dataset: &InspectionDataset,
    labels: &BTreeMap<(String, i32), f64>,
) -> Result<Vec<Sample>, HealthIndexError> {
    dataset
        .records()
        .iter()
        .map(|r| {
            let y = labels
                .get(&(r.asset_id.clone(), r.inspection_year))
                .ok_or_else(|| HealthIndexError::MissingLabel {
                    asset: r.asset_id.clone(),
                    year: r.inspection_year,
                })?;
            Ok((r.numeric_view(dataset.schema()), *y))
        })
        .collect()
}

/// Predicted health index of every record, in dataset order.
pub fn predict_dataset(
    model: &HealthIndexModel,
    dataset: &InspectionDataset,
) -> Result<Vec<f64>, HealthIndexError> {
    dataset
        .records()
        .iter()
        .map(|r| model.predict(&r.numeric_view(dataset.schema())))
        .collect()
}
