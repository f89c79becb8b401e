//! Probabilistic diversification of numerical predictions, rating/real
//! conversion, and per-age categorical distributions for rating conditions.
//!
//! Ages are bucketed to whole years (`age.round()`) wherever a per-age table
//! is involved.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combination::{CombineError, CombinedModel};
use crate::data::{AttributeKind, InspectionDataset};

pub const DEFAULT_FALLBACK_FRACTION: f64 = 0.05;
pub const DEFAULT_NEIGHBOR_WINDOW: u32 = 2;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("standard deviation must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("rating level {level} outside [1, {levels}]")]
    LevelOutOfRange { level: u32, levels: u32 },
    #[error("attribute `{0}` is not a rating attribute")]
    NotRating(String),
    #[error(
        "no categorical distribution resolvable at age {age}; supply an empirical distribution"
    )]
    NoDistribution { age: f64 },
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error("fallback fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error(transparent)]
    Combine(#[from] CombineError),
}

/// Whole-year bucket for an age.
pub fn age_key(age: f64) -> u32 {
    if age.is_finite() && age > 0.0 {
        age.round().min(u32::MAX as f64) as u32
    } else {
        0
    }
}

/// Per-age standard deviations for Gaussian diversification.
///
/// Lookup resolves an absent age to the nearest age with an entry (the mean
/// of both when two are equally near), and to `fallback_fraction·|C|` when
/// the table is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaTable {
    pub by_age: BTreeMap<u32, f64>,
    pub fallback_fraction: f64,
}

impl Default for SigmaTable {
    fn default() -> Self {
        Self::fractional(DEFAULT_FALLBACK_FRACTION)
    }
}

impl SigmaTable {
    pub fn fractional(fallback_fraction: f64) -> Self {
        Self {
            by_age: BTreeMap::new(),
            fallback_fraction,
        }
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        if !(self.fallback_fraction > 0.0 && self.fallback_fraction <= 1.0) {
            return Err(StochasticError::InvalidFraction(self.fallback_fraction));
        }
        if let Some(s) = self.by_age.values().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(StochasticError::NegativeSigma(*s));
        }
        Ok(())
    }

    /// σ at `age` for a model expectation `expected`.
    pub fn lookup(&self, age: f64, expected: f64) -> f64 {
        let key = age_key(age);
        if let Some(s) = self.by_age.get(&key) {
            return *s;
        }
        let below = self.by_age.range(..key).next_back();
        let above = self.by_age.range(key..).next();
        match (below, above) {
            (Some((kb, sb)), Some((ka, sa))) => {
                let (db, da) = (key - kb, ka - key);
                if db < da {
                    *sb
                } else if da < db {
                    *sa
                } else {
                    0.5 * (sb + sa)
                }
            }
            (Some((_, s)), None) | (None, Some((_, s))) => *s,
            (None, None) => self.fallback_fraction * expected.abs(),
        }
    }
}

/// Residuals `actual - prediction` of `model` on the training data, keyed by
/// age. Uses consecutive pairs when the model needs the previous record.
pub fn residuals(
    training: &InspectionDataset,
    model: &CombinedModel,
) -> Result<Vec<(f64, f64)>, CombineError> {
    let schema = training.schema();
    let target = model.target.as_str();
    let mut out = Vec::new();
    if model.needs_previous() {
        let required = model.required_previous();
        for (prev, cur) in training.consecutive_pairs() {
            let Some(actual) = cur.numeric(schema, target) else { continue };
            let view = prev.numeric_view(schema);
            if required.iter().any(|r| !view.contains_key(r)) {
                continue;
            }
            let pred = model.evaluate(cur.age_years, Some(&view))?;
            out.push((cur.age_years, actual - pred));
        }
    } else {
        for rec in training.records() {
            let Some(actual) = rec.numeric(schema, target) else { continue };
            out.push((rec.age_years, actual - model.evaluate(rec.age_years, None)?));
        }
    }
    Ok(out)
}

/// Population standard deviation of residuals per age; ages with fewer than
/// two residuals are left to the lookup fallback.
pub fn estimate_sigma(
    training: &InspectionDataset,
    model: &CombinedModel,
    fallback_fraction: f64,
) -> Result<SigmaTable, StochasticError> {
    let table = SigmaTable::fractional(fallback_fraction);
    table.validate()?;
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (age, r) in residuals(training, model)? {
        groups.entry(age_key(age)).or_default().push(r);
    }
    let by_age = groups
        .into_iter()
        .filter(|(_, rs)| rs.len() >= 2)
        .map(|(age, rs)| (age, population_std(&rs)))
        .collect();
    Ok(SigmaTable { by_age, ..table })
}

fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// One Gaussian draw around `value`. `sigma == 0` returns `value` exactly.
pub fn diversify<R: Rng + ?Sized>(value: f64, sigma: f64, rng: &mut R) -> Result<f64, StochasticError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(StochasticError::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(value);
    }
    let normal = Normal::new(value, sigma).map_err(|_| StochasticError::NegativeSigma(sigma))?;
    Ok(normal.sample(rng))
}

/// [`diversify`] for physically non-negative conditions: a negative draw is
/// redrawn once, then clamped to zero.
pub fn diversify_non_negative<R: Rng + ?Sized>(
    value: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<f64, StochasticError> {
    let first = diversify(value, sigma, rng)?;
    if first >= 0.0 {
        return Ok(first);
    }
    Ok(diversify(value, sigma, rng)?.max(0.0))
}

/// Rating level `i` of `N` to the real `(i - 1/2) / N`.
pub fn rating_to_numeric(level: u32, levels: u32) -> Result<f64, StochasticError> {
    if level < 1 || level > levels {
        return Err(StochasticError::LevelOutOfRange { level, levels });
    }
    Ok((level as f64 - 0.5) / levels as f64)
}

/// Nearest level to `x` on the `(i - 1/2) / N` grid, clamped to `[1, N]`.
/// Equidistant values go to the lower level.
pub fn numeric_to_rating(x: f64, levels: u32) -> u32 {
    let n = levels.max(1);
    if x.is_nan() {
        return 1;
    }
    let center = |i: u32| (i as f64 - 0.5) / n as f64;
    let guess = (x * n as f64).ceil().clamp(1.0, n as f64) as u32;
    let lo = guess.saturating_sub(1).max(1);
    let hi = (guess + 1).min(n);
    let mut best = lo;
    let mut best_d = (x - center(lo)).abs();
    for i in lo + 1..=hi {
        let d = (x - center(i)).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Per-age probability vectors over rating levels `1..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalAgeModel {
    pub levels: u32,
    pub by_age: BTreeMap<u32, Vec<f64>>,
    pub neighbor_window: u32,
    /// Expert distribution used when no observed age is within the window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<Vec<f64>>,
}

impl CategoricalAgeModel {
    pub fn new(levels: u32, neighbor_window: u32) -> Self {
        Self {
            levels,
            by_age: BTreeMap::new(),
            neighbor_window,
            empirical: None,
        }
    }

    pub fn with_age(mut self, age: u32, p: Vec<f64>) -> Result<Self, StochasticError> {
        check_distribution(&p, self.levels)?;
        self.by_age.insert(age, p);
        Ok(self)
    }

    pub fn with_empirical(mut self, p: Vec<f64>) -> Result<Self, StochasticError> {
        check_distribution(&p, self.levels)?;
        self.empirical = Some(p);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        for p in self.by_age.values().chain(self.empirical.iter()) {
            check_distribution(p, self.levels)?;
        }
        Ok(())
    }

    /// Distribution at `age`: the observed vector, else the average of the
    /// nearest observed ages within the neighbor window, else the empirical
    /// distribution, else the average of the nearest observed ages overall.
    pub fn resolve(&self, age: f64) -> Result<Vec<f64>, StochasticError> {
        let key = age_key(age);
        if let Some(p) = self.by_age.get(&key) {
            return Ok(p.clone());
        }
        for d in 1..=self.neighbor_window {
            let near: Vec<&Vec<f64>> = [key.checked_sub(d), key.checked_add(d)]
                .into_iter()
                .flatten()
                .filter_map(|k| self.by_age.get(&k))
                .collect();
            if !near.is_empty() {
                return Ok(average(&near));
            }
        }
        if let Some(p) = &self.empirical {
            return Ok(p.clone());
        }
        let below = self.by_age.range(..key).next_back();
        let above = self.by_age.range(key..).next();
        let near: Vec<&Vec<f64>> = match (below, above) {
            (Some((kb, pb)), Some((ka, pa))) => match (key - kb).cmp(&(ka - key)) {
                std::cmp::Ordering::Less => vec![pb],
                std::cmp::Ordering::Greater => vec![pa],
                std::cmp::Ordering::Equal => vec![pb, pa],
            },
            (Some((_, p)), None) | (None, Some((_, p))) => vec![p],
            (None, None) => return Err(StochasticError::NoDistribution { age }),
        };
        Ok(average(&near))
    }

    /// The most probable level at `age` (lowest on ties).
    pub fn mode(&self, age: f64) -> Result<u32, StochasticError> {
        let p = self.resolve(age)?;
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        Ok(best as u32 + 1)
    }
}

fn average(vectors: &[&Vec<f64>]) -> Vec<f64> {
    let n = vectors.len() as f64;
    let mut out = vec![0.0; vectors[0].len()];
    for v in vectors {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x;
        }
    }
    for o in &mut out {
        *o /= n;
    }
    out
}

fn check_distribution(p: &[f64], levels: u32) -> Result<(), StochasticError> {
    if p.len() != levels as usize {
        return Err(StochasticError::InvalidDistribution(format!(
            "{} entries for {levels} levels",
            p.len()
        )));
    }
    if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(StochasticError::InvalidDistribution("negative or non-finite entry".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(StochasticError::InvalidDistribution(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Per-age level frequencies: `p_i(age) = n_age^i / n_age`.
pub fn fit_categorical(
    training: &InspectionDataset,
    attribute: &str,
    neighbor_window: u32,
) -> Result<CategoricalAgeModel, StochasticError> {
    let attr = training
        .schema()
        .get(attribute)
        .filter(|a| a.kind == AttributeKind::Rating)
        .ok_or_else(|| StochasticError::NotRating(attribute.to_string()))?;
    let levels = attr.rating_levels.expect("rating attributes carry levels");
    let mut counts: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for rec in training.records() {
        if let Some(level) = rec.get(attribute).and_then(|v| v.as_rating()) {
            counts.entry(age_key(rec.age_years)).or_insert_with(|| vec![0; levels as usize])
                [level as usize - 1] += 1;
        }
    }
    let by_age = counts
        .into_iter()
        .map(|(age, c)| {
            let total: u64 = c.iter().sum();
            (age, c.iter().map(|k| *k as f64 / total as f64).collect())
        })
        .collect();
    Ok(CategoricalAgeModel {
        levels,
        by_age,
        neighbor_window,
        empirical: None,
    })
}

pub fn sample_categorical<R: Rng + ?Sized>(
    model: &CategoricalAgeModel,
    age: f64,
    rng: &mut R,
) -> Result<u32, StochasticError> {
    let p = model.resolve(age)?;
    let dist = WeightedIndex::new(&p)
        .map_err(|e| StochasticError::InvalidDistribution(e.to_string()))?;
    Ok(dist.sample(rng) as u32 + 1)
}
