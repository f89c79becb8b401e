//! Age-driven degradation curves and their least-squares fits.
//!
//! | family      | curve              |
//! |-------------|--------------------|
//! | linear      | `C(t) = a·t + b`   |
//! | exponential | `C(t) = b·e^(a·t)` |
//! | logarithmic | `C(t) = a·ln t + b`|
//! | power       | `C(t) = b·t^a`     |
//!
//! Logarithmic curves (and power curves with `a < 0`) are only defined from
//! [`MIN_LOG_AGE`] onward; ages below that are rejected, never clamped.
//! Exponential and power fits start from a linear regression in log space
//! and are then refined by damped Gauss-Newton on the original residuals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lstsq;

/// Smallest age accepted by the logarithmic family.
pub const MIN_LOG_AGE: f64 = 1.0;

const DEFAULT_REFINE_STEPS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum DegradationError {
    #[error("{family} model undefined at age {age} (minimum age {min_age})")]
    Domain {
        family: Family,
        age: f64,
        min_age: f64,
    },
    #[error("{family} fit needs at least 2 distinct ages, got {distinct}")]
    InsufficientData { family: Family, distinct: usize },
    #[error("{family} fit requires {requirement}; offending samples at indices {indices:?}")]
    SampleDomain {
        family: Family,
        requirement: &'static str,
        indices: Vec<usize>,
    },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    Exponential,
    Logarithmic,
    Power,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Linear,
        Family::Exponential,
        Family::Logarithmic,
        Family::Power,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Exponential => "exponential",
            Family::Logarithmic => "logarithmic",
            Family::Power => "power",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationModel {
    pub family: Family,
    pub a: f64,
    pub b: f64,
}

impl DegradationModel {
    pub fn new(family: Family, a: f64, b: f64) -> Self {
        Self { family, a, b }
    }

    pub fn linear(a: f64, b: f64) -> Self {
        Self::new(Family::Linear, a, b)
    }

    pub fn exponential(a: f64, b: f64) -> Self {
        Self::new(Family::Exponential, a, b)
    }

    pub fn logarithmic(a: f64, b: f64) -> Self {
        Self::new(Family::Logarithmic, a, b)
    }

    pub fn power(a: f64, b: f64) -> Self {
        Self::new(Family::Power, a, b)
    }

    /// Lower end of the evaluation domain.
    pub fn min_age(&self) -> f64 {
        match self.family {
            Family::Linear | Family::Exponential => 0.0,
            Family::Logarithmic => MIN_LOG_AGE,
            Family::Power if self.a < 0.0 => MIN_LOG_AGE,
            Family::Power => 0.0,
        }
    }

    pub fn evaluate(&self, age: f64) -> Result<f64, DegradationError> {
        let min_age = self.min_age();
        if !(age >= min_age) || !age.is_finite() {
            return Err(DegradationError::Domain {
                family: self.family,
                age,
                min_age,
            });
        }
        Ok(self.curve(age))
    }

    fn curve(&self, t: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        match self.family {
            Family::Linear => a * t + b,
            Family::Exponential => b * (a * t).exp(),
            Family::Logarithmic => a * t.ln() + b,
            Family::Power => b * t.powf(a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub residual_ss: f64,
    pub samples: usize,
    /// All observed values were equal; the model is a flat line at that value.
    pub degenerate: bool,
    /// Accepted Gauss-Newton steps after the log-space estimate.
    pub refine_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub model: DegradationModel,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Upper bound on Gauss-Newton refinement steps for exponential and
    /// power fits; zero keeps the pure log-space estimate.
    pub max_refine_steps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_refine_steps: DEFAULT_REFINE_STEPS,
        }
    }
}

/// Least-squares fit of `family` to `(age, value)` samples.
pub fn fit(family: Family, samples: &[(f64, f64)]) -> Result<Fit, DegradationError> {
    fit_with(family, samples, FitOptions::default())
}

pub fn fit_with(
    family: Family,
    samples: &[(f64, f64)],
    opts: FitOptions,
) -> Result<Fit, DegradationError> {
    if let Some(i) = samples.iter().position(|(t, c)| !t.is_finite() || !c.is_finite()) {
        return Err(DegradationError::NonFinite(i));
    }
    let distinct = distinct_ages(samples);
    if distinct < 2 {
        return Err(DegradationError::InsufficientData { family, distinct });
    }
    match family {
        Family::Logarithmic | Family::Power => {
            let (bound, requirement) = match family {
                Family::Logarithmic => (MIN_LOG_AGE, "ages >= 1"),
                _ => (f64::MIN_POSITIVE, "ages > 0"),
            };
            let bad: Vec<usize> = samples
                .iter()
                .enumerate()
                .filter(|(_, (t, _))| *t < bound)
                .map(|(i, _)| i)
                .collect();
            if !bad.is_empty() {
                return Err(DegradationError::SampleDomain {
                    family,
                    requirement,
                    indices: bad,
                });
            }
        }
        _ => {}
    }

    let first = samples[0].1;
    if samples.iter().all(|(_, c)| *c == first) {
        let model = DegradationModel::new(family, 0.0, first);
        return Ok(Fit {
            model,
            diagnostics: FitDiagnostics {
                residual_ss: 0.0,
                samples: samples.len(),
                degenerate: true,
                refine_steps: 0,
            },
        });
    }

    let model = match family {
        Family::Linear => {
            let (slope, intercept) = regress(samples.iter().map(|&(t, c)| (t, c)));
            DegradationModel::linear(slope, intercept)
        }
        Family::Logarithmic => {
            let (slope, intercept) = regress(samples.iter().map(|&(t, c)| (t.ln(), c)));
            DegradationModel::logarithmic(slope, intercept)
        }
        Family::Exponential | Family::Power => {
            let bad: Vec<usize> = samples
                .iter()
                .enumerate()
                .filter(|(_, (_, c))| *c <= 0.0)
                .map(|(i, _)| i)
                .collect();
            if !bad.is_empty() {
                return Err(DegradationError::SampleDomain {
                    family,
                    requirement: "strictly positive values",
                    indices: bad,
                });
            }
            let (slope, ln_b) = if family == Family::Exponential {
                regress(samples.iter().map(|&(t, c)| (t, c.ln())))
            } else {
                regress(samples.iter().map(|&(t, c)| (t.ln(), c.ln())))
            };
            DegradationModel::new(family, slope, ln_b.exp())
        }
    };

    let (model, refine_steps) = match family {
        Family::Exponential | Family::Power => refine(model, samples, opts.max_refine_steps),
        _ => (model, 0),
    };
    Ok(Fit {
        model,
        diagnostics: FitDiagnostics {
            residual_ss: residual_ss(&model, samples),
            samples: samples.len(),
            degenerate: false,
            refine_steps,
        },
    })
}

fn distinct_ages(samples: &[(f64, f64)]) -> usize {
    let mut ages: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ages.sort_by(f64::total_cmp);
    ages.dedup();
    ages.len()
}

/// Ordinary least-squares line through `(x, y)`; returns `(slope, intercept)`.
/// Centered sums keep two-point and exactly collinear inputs exact.
fn regress(points: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = points.collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in &pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn residual_ss(model: &DegradationModel, samples: &[(f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|&(t, c)| {
            let r = c - model.curve(t);
            r * r
        })
        .sum()
}

/// Damped Gauss-Newton on `sum (c - b·g(t; a))²`. A step is accepted only if
/// it lowers the residual sum of squares.
fn refine(
    start: DegradationModel,
    samples: &[(f64, f64)],
    max_steps: usize,
) -> (DegradationModel, usize) {
    let mut model = start;
    let mut rss = residual_ss(&model, samples);
    let mut accepted = 0;
    for _ in 0..max_steps {
        let mut rows = Vec::with_capacity(samples.len());
        let mut resid = Vec::with_capacity(samples.len());
        for &(t, c) in samples {
            let (da, db) = match model.family {
                Family::Exponential => {
                    let e = (model.a * t).exp();
                    (model.b * t * e, e)
                }
                _ => {
                    let p = t.powf(model.a);
                    (model.b * p * t.ln(), p)
                }
            };
            rows.push(vec![da, db]);
            resid.push(c - model.curve(t));
        }
        let step = lstsq::solve(&lstsq::design(&rows, 2), &resid).coefficients;
        if !step.iter().all(|s| s.is_finite()) {
            break;
        }
        let mut scale = 1.0;
        let mut improved = None;
        for _ in 0..30 {
            let trial = DegradationModel::new(
                model.family,
                model.a + scale * step[0],
                model.b + scale * step[1],
            );
            let trial_rss = residual_ss(&trial, samples);
            if trial_rss.is_finite() && trial_rss < rss {
                improved = Some((trial, trial_rss));
                break;
            }
            scale *= 0.5;
        }
        match improved {
            Some((trial, trial_rss)) => {
                let gain = rss - trial_rss;
                model = trial;
                rss = trial_rss;
                accepted += 1;
                if gain <= rss * 1e-15 {
                    break;
                }
            }
            None => break,
        }
    }
    (model, accepted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(model: &DegradationModel, ages: impl Iterator<Item = f64>) -> Vec<(f64, f64)> {
        ages.map(|t| (t, model.evaluate(t).unwrap())).collect()
    }

    #[test]
    fn evaluates_reference_curves() {
        assert_eq!(DegradationModel::linear(2.0, 3.0).evaluate(10.0).unwrap(), 23.0);
        assert_eq!(DegradationModel::exponential(0.08, 0.1).evaluate(0.0).unwrap(), 0.1);
        let p = DegradationModel::power(1.0, 4.0).evaluate(7.0).unwrap();
        assert_eq!(p, 28.0);
        assert_eq!(p, DegradationModel::linear(4.0, 0.0).evaluate(7.0).unwrap());
        let l = DegradationModel::logarithmic(25.0, 1.5).evaluate(1.0).unwrap();
        assert_eq!(l, 1.5);
    }

    #[test]
    fn logarithmic_domain_is_enforced() {
        let m = DegradationModel::logarithmic(25.0, 1.5);
        assert!(matches!(m.evaluate(0.5), Err(DegradationError::Domain { .. })));
        assert!(m.evaluate(0.0).is_err());
        assert!(DegradationModel::power(-0.5, 1.0).evaluate(0.5).is_err());
        assert!(DegradationModel::power(0.5, 1.0).evaluate(0.0).is_ok());
        assert!(DegradationModel::linear(1.0, 0.0).evaluate(-1.0).is_err());
        assert!(DegradationModel::linear(1.0, 0.0).evaluate(f64::NAN).is_err());
    }

    #[test]
    fn two_point_line() {
        let f = fit(Family::Linear, &[(1.0, 5.0), (3.0, 9.0)]).unwrap();
        assert_eq!(f.model.a, 2.0);
        assert_eq!(f.model.b, 3.0);
    }

    #[test]
    fn recovers_linear_exactly() {
        let truth = DegradationModel::linear(2.0, 3.0);
        let f = fit(Family::Linear, &sample(&truth, (0..20).map(f64::from))).unwrap();
        assert!((f.model.a - 2.0).abs() < 1e-9);
        assert!((f.model.b - 3.0).abs() < 1e-9);
        assert!(f.diagnostics.residual_ss < 1e-18);
    }

    #[test]
    fn recovers_power() {
        let truth = DegradationModel::power(2.0, 0.5);
        let f = fit(Family::Power, &sample(&truth, (1..=20).map(f64::from))).unwrap();
        assert!((f.model.a - 2.0).abs() < 1e-6);
        assert!((f.model.b - 0.5).abs() < 1e-6);
    }

    #[test]
    fn recovers_every_family_noiseless() {
        let truths = [
            DegradationModel::linear(2.0, 3.0),
            DegradationModel::exponential(0.08, 0.1),
            DegradationModel::logarithmic(25.0, 1.5),
            DegradationModel::power(1.7, 0.3),
            DegradationModel::power(0.6, 4.0),
        ];
        for truth in truths {
            let f = fit(truth.family, &sample(&truth, (1..=20).map(f64::from))).unwrap();
            assert!(((f.model.a - truth.a) / truth.a).abs() < 1e-6, "{truth:?} -> {f:?}");
            assert!(((f.model.b - truth.b) / truth.b).abs() < 1e-6, "{truth:?} -> {f:?}");
        }
    }

    #[test]
    fn linear_fit_matches_closed_form() {
        let pts = [(1.0, 2.3), (2.0, 2.9), (4.0, 6.1), (7.0, 9.8), (8.5, 12.0)];
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let f = fit(Family::Linear, &pts).unwrap();
        assert!((f.model.a - slope).abs() < 1e-12);
        assert!((f.model.b - intercept).abs() < 1e-12);
        // and the SVD least-squares route on the same design
        let rows: Vec<Vec<f64>> = pts.iter().map(|(x, _)| vec![*x, 1.0]).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let svd = lstsq::solve(&lstsq::design(&rows, 2), &ys).coefficients;
        assert!((f.model.a - svd[0]).abs() < 1e-10);
        assert!((f.model.b - svd[1]).abs() < 1e-10);
    }

    #[test]
    fn insufficient_distinct_ages() {
        let err = fit(Family::Linear, &[(2.0, 1.0), (2.0, 3.0)]).unwrap_err();
        assert_eq!(
            err,
            DegradationError::InsufficientData {
                family: Family::Linear,
                distinct: 1
            }
        );
        assert!(fit(Family::Linear, &[(2.0, 1.0)]).is_err());
    }

    #[test]
    fn log_space_fit_rejects_non_positive_values() {
        let err = fit(Family::Exponential, &[(1.0, 1.0), (2.0, -1.0), (3.0, 0.0)]).unwrap_err();
        match err {
            DegradationError::SampleDomain { indices, .. } => assert_eq!(indices, vec![1, 2]),
            other => panic!("{other:?}"),
        }
        let err = fit(Family::Logarithmic, &[(0.0, 1.0), (2.0, 2.0)]).unwrap_err();
        assert!(matches!(err, DegradationError::SampleDomain { .. }));
    }

    #[test]
    fn flat_data_is_degenerate() {
        for family in Family::ALL {
            let f = fit(family, &[(1.0, 4.0), (2.0, 4.0), (5.0, 4.0)]).unwrap();
            assert!(f.diagnostics.degenerate);
            assert_eq!(f.model.a, 0.0);
            assert_eq!(f.model.b, 4.0);
            assert_eq!(f.model.evaluate(3.0).unwrap(), 4.0);
        }
    }

    #[test]
    fn refinement_does_not_worsen_fit() {
        let pts = [(1.0, 1.2), (2.0, 1.9), (3.0, 3.4), (4.0, 5.1), (5.0, 9.0)];
        let raw = fit_with(Family::Exponential, &pts, FitOptions { max_refine_steps: 0 }).unwrap();
        let refined = fit(Family::Exponential, &pts).unwrap();
        assert!(refined.diagnostics.residual_ss <= raw.diagnostics.residual_ss);
        assert!(refined.diagnostics.refine_steps > 0);
    }

    #[test]
    fn json_shape() {
        let m = DegradationModel::linear(2.0, 3.0);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"family":"linear","a":2.0,"b":3.0}"#);
        assert_eq!(serde_json::from_str::<DegradationModel>(&json).unwrap(), m);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn family() -> impl Strategy<Value = Family> {
            prop::sample::select(Family::ALL.to_vec())
        }

        proptest! {
            #[test]
            fn monotone_for_positive_slope(fam in family(), a in 0.01f64..2.0, b in 0.1f64..10.0) {
                let m = DegradationModel::new(fam, a, b);
                let mut prev = f64::NEG_INFINITY;
                let mut t = m.min_age();
                while t <= 60.0 {
                    let v = m.evaluate(t).unwrap();
                    prop_assert!(v >= prev);
                    prev = v;
                    t += 0.25;
                }
            }

            #[test]
            fn fit_of_generated_recovers(fam in family(), a in 0.05f64..1.5, b in 0.5f64..5.0) {
                let truth = DegradationModel::new(fam, a, b);
                let pts: Vec<(f64, f64)> =
                    (1..=25).map(|t| (t as f64, truth.evaluate(t as f64).unwrap())).collect();
                let f = fit(fam, &pts).unwrap();
                prop_assert!(((f.model.a - a) / a).abs() < 1e-6);
                prop_assert!(((f.model.b - b) / b).abs() < 1e-6);
            }
        }
    }
}
