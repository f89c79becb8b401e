//! Weighted combination of degradation, correlation, and expert-supplied
//! models into one predictor per condition attribute:
//!
//! ```text
//! C_combo = Σ λ_n·C_n^a(t) + Σ λ_m·C_m^c(previous) + Σ λ_e·C_e
//! ```
//!
//! Estimation runs in two steps. First every unlocked sub-model is fitted on
//! its own; then the free weights are solved by least squares with the
//! sub-model outputs as features, holding fixed weights constant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlation::{self, CorrelationDiagnostics, CorrelationError, CorrelationModel, Pair};
use crate::data::{DataError, InspectionDataset, InspectionRecord};
use crate::degradation::{self, DegradationError, DegradationModel, Family, FitDiagnostics, FitOptions};
use crate::lstsq;

#[derive(Debug, Error)]
pub enum CombineError {
    #[error(transparent)]
    Degradation(#[from] DegradationError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("`{target}` has active correlation terms but no previous inspection record")]
    NeedsPrevious { target: String },
    #[error("combined model for `{0}` has no terms")]
    NoTerms(String),
    #[error("attribute `{0}` is not in the dataset schema")]
    UnknownAttribute(String),
    #[error("no training records with a value for `{0}`")]
    NoTrainingData(String),
    #[error("weight {value} on a term of `{target}` is not finite")]
    NonFiniteWeight { target: String, value: f64 },
}

/// How a term's weight is treated by estimation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPolicy {
    #[default]
    Free,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmpiricalForm {
    Degradation(DegradationModel),
    Correlation(CorrelationModel),
}

/// An expert-supplied model. Locked models are never refitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalModel {
    #[serde(default)]
    pub description: String,
    pub form: EmpiricalForm,
    #[serde(default = "default_locked")]
    pub locked: bool,
}

fn default_locked() -> bool {
    true
}

impl EmpiricalModel {
    fn needs_previous(&self) -> bool {
        matches!(self.form, EmpiricalForm::Correlation(_))
    }

    fn evaluate(&self, age: f64, previous: Option<&BTreeMap<String, f64>>) -> Result<Option<f64>, CombineError> {
        match &self.form {
            EmpiricalForm::Degradation(m) => Ok(Some(m.evaluate(age)?)),
            EmpiricalForm::Correlation(m) => match previous {
                Some(p) => Ok(Some(m.predict(p)?)),
                None => Ok(None),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term<M> {
    pub model: M,
    pub weight: f64,
    #[serde(default)]
    pub policy: WeightPolicy,
}

impl<M> Term<M> {
    pub fn free(model: M, weight: f64) -> Self {
        Self {
            model,
            weight,
            policy: WeightPolicy::Free,
        }
    }

    pub fn fixed(model: M, weight: f64) -> Self {
        Self {
            model,
            weight,
            policy: WeightPolicy::Fixed(weight),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedModel {
    pub target: String,
    #[serde(default)]
    pub degradation_terms: Vec<Term<DegradationModel>>,
    #[serde(default)]
    pub correlation_terms: Vec<Term<CorrelationModel>>,
    #[serde(default)]
    pub empirical_terms: Vec<Term<EmpiricalModel>>,
}

impl CombinedModel {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            degradation_terms: Vec::new(),
            correlation_terms: Vec::new(),
            empirical_terms: Vec::new(),
        }
    }

    pub fn with_degradation(mut self, model: DegradationModel, weight: f64) -> Self {
        self.degradation_terms.push(Term::free(model, weight));
        self
    }

    pub fn with_correlation(mut self, model: CorrelationModel, weight: f64) -> Self {
        self.correlation_terms.push(Term::free(model, weight));
        self
    }

    pub fn with_empirical(mut self, model: EmpiricalModel, weight: f64) -> Self {
        self.empirical_terms.push(Term::free(model, weight));
        self
    }

    pub fn term_count(&self) -> usize {
        self.degradation_terms.len() + self.correlation_terms.len() + self.empirical_terms.len()
    }

    /// True if evaluation needs the previous inspection record.
    pub fn needs_previous(&self) -> bool {
        self.correlation_terms.iter().any(|t| t.weight != 0.0)
            || self
                .empirical_terms
                .iter()
                .any(|t| t.weight != 0.0 && t.model.needs_previous())
    }

    /// Attributes the previous record must supply.
    pub fn required_previous(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let corr = self
            .correlation_terms
            .iter()
            .filter(|t| t.weight != 0.0)
            .map(|t| &t.model)
            .chain(self.empirical_terms.iter().filter(|t| t.weight != 0.0).filter_map(|t| {
                match &t.model.form {
                    EmpiricalForm::Correlation(m) => Some(m),
                    EmpiricalForm::Degradation(_) => None,
                }
            }));
        for m in corr {
            for r in &m.regressors {
                if !out.contains(r) {
                    out.push(r.clone());
                }
            }
        }
        out
    }

    /// Weighted sum of all terms with non-zero weight. Correlation terms
    /// need `previous`; without it every correlation weight must be zero.
    pub fn evaluate(
        &self,
        age: f64,
        previous: Option<&BTreeMap<String, f64>>,
    ) -> Result<f64, CombineError> {
        if self.term_count() == 0 {
            return Err(CombineError::NoTerms(self.target.clone()));
        }
        let mut acc = 0.0;
        for t in &self.degradation_terms {
            if t.weight != 0.0 {
                acc += t.weight * t.model.evaluate(age)?;
            }
        }
        for t in &self.correlation_terms {
            if t.weight != 0.0 {
                let p = previous.ok_or_else(|| CombineError::NeedsPrevious {
                    target: self.target.clone(),
                })?;
                acc += t.weight * t.model.predict(p)?;
            }
        }
        for t in &self.empirical_terms {
            if t.weight != 0.0 {
                let v = t.model.evaluate(age, previous)?.ok_or_else(|| CombineError::NeedsPrevious {
                    target: self.target.clone(),
                })?;
                acc += t.weight * v;
            }
        }
        Ok(acc)
    }

    /// Outputs of every term (unweighted), in degradation, correlation,
    /// empirical order.
    fn term_outputs(
        &self,
        age: f64,
        previous: Option<&BTreeMap<String, f64>>,
    ) -> Result<Option<Vec<f64>>, CombineError> {
        let mut out = Vec::with_capacity(self.term_count());
        for t in &self.degradation_terms {
            out.push(t.model.evaluate(age)?);
        }
        for t in &self.correlation_terms {
            let Some(p) = previous else { return Ok(None) };
            match t.model.predict(p) {
                Ok(v) => out.push(v),
                Err(CorrelationError::MissingRegressor(_)) => return Ok(None),
                Err(e) => return Err(e.into()),
            }
        }
        for t in &self.empirical_terms {
            match t.model.evaluate(age, previous) {
                Ok(Some(v)) => out.push(v),
                Ok(None) | Err(CombineError::Correlation(CorrelationError::MissingRegressor(_))) => {
                    return Ok(None)
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Some(out))
    }

    fn policies(&self) -> Vec<WeightPolicy> {
        self.degradation_terms
            .iter()
            .map(|t| t.policy)
            .chain(self.correlation_terms.iter().map(|t| t.policy))
            .chain(self.empirical_terms.iter().map(|t| t.policy))
            .collect()
    }

    fn set_weights(&mut self, weights: &[f64]) {
        let mut it = weights.iter();
        for t in &mut self.degradation_terms {
            t.weight = *it.next().expect("weight count");
        }
        for t in &mut self.correlation_terms {
            t.weight = *it.next().expect("weight count");
        }
        for t in &mut self.empirical_terms {
            t.weight = *it.next().expect("weight count");
        }
    }
}

/// How a rating attribute is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingPath {
    /// Draw from the per-age categorical distribution.
    #[default]
    Categorical,
    /// Convert to a real, predict with the combined model, convert back.
    Converted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationTermSpec {
    pub family: Family,
    #[serde(default)]
    pub weight: WeightPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTermSpec {
    pub regressors: Vec<String>,
    #[serde(default)]
    pub weight: WeightPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTermSpec {
    #[serde(flatten)]
    pub model: EmpiricalModel,
    #[serde(default)]
    pub weight: WeightPolicy,
}

/// Per-condition recipe: which families and correlated sets to combine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub target: String,
    #[serde(default)]
    pub degradation: Vec<DegradationTermSpec>,
    #[serde(default)]
    pub correlation: Vec<CorrelationTermSpec>,
    #[serde(default)]
    pub empirical: Vec<EmpiricalTermSpec>,
    /// Only meaningful for rating attributes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating_path: Option<RatingPath>,
}

impl ConditionSpec {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            degradation: Vec::new(),
            correlation: Vec::new(),
            empirical: Vec::new(),
            rating_path: None,
        }
    }

    pub fn family(mut self, family: Family) -> Self {
        self.degradation.push(DegradationTermSpec {
            family,
            weight: WeightPolicy::Free,
        });
        self
    }

    pub fn fixed_family(mut self, family: Family, weight: f64) -> Self {
        self.degradation.push(DegradationTermSpec {
            family,
            weight: WeightPolicy::Fixed(weight),
        });
        self
    }

    pub fn correlated(mut self, regressors: &[&str]) -> Self {
        self.correlation.push(CorrelationTermSpec {
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            weight: WeightPolicy::Free,
        });
        self
    }

    pub fn has_terms(&self) -> bool {
        !(self.degradation.is_empty() && self.correlation.is_empty() && self.empirical.is_empty())
    }

    pub fn uses_correlation(&self) -> bool {
        !self.correlation.is_empty()
            || self
                .empirical
                .iter()
                .any(|e| matches!(e.model.form, EmpiricalForm::Correlation(_)))
    }

    /// Every attribute this spec refers to.
    pub fn referenced_attributes(&self) -> Vec<&str> {
        let mut out = vec![self.target.as_str()];
        for c in &self.correlation {
            out.extend(c.regressors.iter().map(String::as_str));
        }
        for e in &self.empirical {
            if let EmpiricalForm::Correlation(m) = &e.model.form {
                out.extend(m.regressors.iter().map(String::as_str));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    pub conditions: Vec<ConditionSpec>,
}

impl ModelSpec {
    pub fn get(&self, target: &str) -> Option<&ConditionSpec> {
        self.conditions.iter().find(|c| c.target == target)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EstimateOptions {
    /// Drop every term that needs the previous inspection (age-only models).
    pub age_only: bool,
    /// Constrain free weights to be non-negative.
    pub non_negative: bool,
    pub degradation: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TermDiagnostics {
    Degradation(FitDiagnostics),
    Correlation(CorrelationDiagnostics),
    Locked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    pub terms: Vec<TermDiagnostics>,
    /// Rows used by the weight solve.
    pub weight_rows: usize,
    pub weights_rank_deficient: bool,
    /// Root mean squared error of the combined model on the weight rows.
    pub training_rmse: f64,
    /// Correlation terms were dropped (age-only mode or no consecutive pairs).
    pub correlation_disabled: bool,
    pub warnings: Vec<String>,
}

/// Two-step estimation of the combined model for one condition.
pub fn estimate(
    spec: &ConditionSpec,
    training: &InspectionDataset,
    opts: EstimateOptions,
) -> Result<(CombinedModel, EstimateDiagnostics), CombineError> {
    let schema = training.schema();
    for name in spec.referenced_attributes() {
        if schema.get(name).is_none() {
            return Err(CombineError::UnknownAttribute(name.to_string()));
        }
    }
    let target = spec.target.as_str();
    let mut warnings = Vec::new();
    let mut terms_diag = Vec::new();

    let samples: Vec<(f64, f64)> = training
        .records()
        .iter()
        .filter_map(|r| r.numeric(schema, target).map(|v| (r.age_years, v)))
        .collect();
    if samples.is_empty() {
        return Err(CombineError::NoTrainingData(target.to_string()));
    }

    let pairs: Vec<(BTreeMap<String, f64>, &InspectionRecord)> = training
        .consecutive_pairs()
        .into_iter()
        .filter(|(_, cur)| cur.values.contains_key(target))
        .map(|(prev, cur)| (prev.numeric_view(schema), cur))
        .collect();
    let correlation_disabled = spec.uses_correlation() && (opts.age_only || pairs.is_empty());
    if correlation_disabled && !opts.age_only {
        warnings.push(format!(
            "no consecutive inspection pairs for `{target}`; correlation weights fixed to 0"
        ));
    }

    let mut model = CombinedModel::new(target);

    // step 1: individual sub-models
    for t in &spec.degradation {
        let fit = degradation::fit_with(t.family, &samples, opts.degradation)?;
        terms_diag.push(TermDiagnostics::Degradation(fit.diagnostics));
        model.degradation_terms.push(initial_term(fit.model, t.weight));
    }
    let corr_pairs: Vec<Pair> = pairs
        .iter()
        .map(|(p, cur)| (p.clone(), cur.numeric(schema, target).expect("filtered on target")))
        .collect();
    if !correlation_disabled {
        for t in &spec.correlation {
            let (m, d) = correlation::fit(target, &t.regressors, &corr_pairs)?;
            terms_diag.push(TermDiagnostics::Correlation(d));
            if d.rank_deficient {
                warnings.push(format!(
                    "correlation design for `{target}` on {:?} is rank deficient; minimum-norm coefficients used",
                    t.regressors
                ));
            }
            model.correlation_terms.push(initial_term(m, t.weight));
        }
    }
    for e in &spec.empirical {
        if correlation_disabled && e.model.needs_previous() {
            continue;
        }
        let mut em = e.model.clone();
        if em.locked {
            terms_diag.push(TermDiagnostics::Locked);
        } else {
            match &em.form {
                EmpiricalForm::Degradation(d) => {
                    let fit = degradation::fit_with(d.family, &samples, opts.degradation)?;
                    terms_diag.push(TermDiagnostics::Degradation(fit.diagnostics));
                    em.form = EmpiricalForm::Degradation(fit.model);
                }
                EmpiricalForm::Correlation(c) => {
                    let (m, d) = correlation::fit(target, &c.regressors, &corr_pairs)?;
                    terms_diag.push(TermDiagnostics::Correlation(d));
                    em.form = EmpiricalForm::Correlation(m);
                }
            }
        }
        model.empirical_terms.push(initial_term(em, e.weight));
    }
    if model.term_count() == 0 {
        return Err(CombineError::NoTerms(target.to_string()));
    }

    // step 2: weights
    let use_pairs = model.needs_previous_any();
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    if use_pairs {
        for (prev, cur) in &pairs {
            if let Some(out) = model.term_outputs(cur.age_years, Some(prev))? {
                rows.push(out);
                ys.push(cur.numeric(schema, target).expect("filtered on target"));
            }
        }
    } else {
        for &(age, v) in &samples {
            if let Some(out) = model.term_outputs(age, None)? {
                rows.push(out);
                ys.push(v);
            }
        }
    }

    let policies = model.policies();
    let free: Vec<usize> = (0..policies.len())
        .filter(|&j| policies[j] == WeightPolicy::Free)
        .collect();
    let mut weights: Vec<f64> = policies
        .iter()
        .map(|p| match p {
            WeightPolicy::Fixed(w) => *w,
            WeightPolicy::Free => 0.0,
        })
        .collect();
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(CombineError::NonFiniteWeight {
            target: target.to_string(),
            value: *w,
        });
    }
    let mut weights_rank_deficient = false;
    if free.is_empty() {
        let all_locked = terms_diag.iter().all(|d| matches!(d, TermDiagnostics::Locked));
        if all_locked {
            warnings.push(format!(
                "`{target}`: all terms locked and all weights fixed; nothing to estimate"
            ));
        }
    } else if rows.is_empty() {
        return Err(CombineError::NoTrainingData(target.to_string()));
    } else {
        let residual: Vec<f64> = rows
            .iter()
            .zip(&ys)
            .map(|(row, y)| {
                y - row
                    .iter()
                    .zip(&weights)
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(f, w)| f * w)
                    .sum::<f64>()
            })
            .collect();
        let free_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| free.iter().map(|&j| row[j]).collect())
            .collect();
        let design = lstsq::design(&free_rows, free.len());
        let sol = if opts.non_negative {
            lstsq::solve_non_negative(&design, &residual)
        } else {
            lstsq::solve(&design, &residual)
        };
        weights_rank_deficient = sol.is_rank_deficient();
        if weights_rank_deficient {
            warnings.push(format!(
                "`{target}`: sub-model outputs are collinear; minimum-norm weights used"
            ));
        }
        for (k, &j) in free.iter().enumerate() {
            weights[j] = sol.coefficients[k];
        }
    }
    model.set_weights(&weights);

    let mut sse = 0.0;
    for (row, y) in rows.iter().zip(&ys) {
        let pred: f64 = row
            .iter()
            .zip(&weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(f, w)| f * w)
            .sum();
        sse += (y - pred).powi(2);
    }
    let training_rmse = if rows.is_empty() {
        0.0
    } else {
        (sse / rows.len() as f64).sqrt()
    };

    Ok((
        model,
        EstimateDiagnostics {
            terms: terms_diag,
            weight_rows: rows.len(),
            weights_rank_deficient,
            training_rmse,
            correlation_disabled,
            warnings,
        },
    ))
}

impl CombinedModel {
    /// Like [`CombinedModel::needs_previous`] but ignoring current weights.
    fn needs_previous_any(&self) -> bool {
        !self.correlation_terms.is_empty()
            || self.empirical_terms.iter().any(|t| t.model.needs_previous())
    }
}

fn initial_term<M>(model: M, policy: WeightPolicy) -> Term<M> {
    let weight = match policy {
        WeightPolicy::Fixed(w) => w,
        WeightPolicy::Free => 0.0,
    };
    Term {
        model,
        weight,
        policy,
    }
}
