//! Second-degree polynomial correlation between consecutive inspections.
//!
//! The current value of a target attribute is regressed on the previous
//! inspection's values of a correlated attribute set `x` (which always
//! contains the target itself):
//!
//! ```text
//! C_t = β₀ + Σ_j β_j·x_j + Σ_j β′_j·x_j²
//! ```
//!
//! There are no cross terms `x_i·x_j`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lstsq;

#[derive(Debug, Error, PartialEq)]
pub enum CorrelationError {
    #[error("previous record has no value for regressor `{0}`")]
    MissingRegressor(String),
    #[error("regressors of `{target}` must include the target itself")]
    TargetNotRegressor { target: String },
    #[error("coefficient vectors have {linear}/{quadratic} entries for {regressors} regressors")]
    ShapeMismatch {
        regressors: usize,
        linear: usize,
        quadratic: usize,
    },
    #[error("duplicate regressor `{0}`")]
    DuplicateRegressor(String),
    #[error("correlation fit for `{target}` needs at least {required} usable pairs, got {available}")]
    InsufficientPairs {
        target: String,
        required: usize,
        available: usize,
    },
    #[error(
        "design matrix for `{target}` is rank deficient (rank {rank} of {columns}); \
         consider removing collinear regressors"
    )]
    RankDeficient {
        target: String,
        rank: usize,
        columns: usize,
    },
    #[error("more than one correlation model targets `{0}`")]
    DuplicateTarget(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    pub target: String,
    /// Ordered regressor attributes; coefficient vectors follow this order.
    pub regressors: Vec<String>,
    pub intercept: f64,
    pub linear: Vec<f64>,
    pub quadratic: Vec<f64>,
}

impl CorrelationModel {
    pub fn new(
        target: impl Into<String>,
        regressors: Vec<String>,
        intercept: f64,
        linear: Vec<f64>,
        quadratic: Vec<f64>,
    ) -> Result<Self, CorrelationError> {
        let model = Self {
            target: target.into(),
            regressors,
            intercept,
            linear,
            quadratic,
        };
        model.validate()?;
        Ok(model)
    }

    /// `C_t = C_{t-1}` for the target alone.
    pub fn persistence(target: impl Into<String>) -> Self {
        let target = target.into();
        Self {
            regressors: vec![target.clone()],
            target,
            intercept: 0.0,
            linear: vec![1.0],
            quadratic: vec![0.0],
        }
    }

    pub fn validate(&self) -> Result<(), CorrelationError> {
        let n = self.regressors.len();
        if self.linear.len() != n || self.quadratic.len() != n {
            return Err(CorrelationError::ShapeMismatch {
                regressors: n,
                linear: self.linear.len(),
                quadratic: self.quadratic.len(),
            });
        }
        check_regressors(&self.target, &self.regressors)
    }

    pub fn predict(&self, previous: &BTreeMap<String, f64>) -> Result<f64, CorrelationError> {
        let mut acc = self.intercept;
        for (j, name) in self.regressors.iter().enumerate() {
            let x = *previous
                .get(name)
                .ok_or_else(|| CorrelationError::MissingRegressor(name.clone()))?;
            acc += self.linear[j] * x + self.quadratic[j] * x * x;
        }
        Ok(acc)
    }
}

fn check_regressors(target: &str, regressors: &[String]) -> Result<(), CorrelationError> {
    let mut seen = BTreeSet::new();
    for r in regressors {
        if !seen.insert(r.as_str()) {
            return Err(CorrelationError::DuplicateRegressor(r.clone()));
        }
    }
    if !seen.contains(target) {
        return Err(CorrelationError::TargetNotRegressor {
            target: target.to_string(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDiagnostics {
    pub pairs: usize,
    pub residual_ss: f64,
    pub rank: usize,
    pub columns: usize,
    /// The minimum-norm solution was used because the design was singular.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CorrelationFitOptions {
    /// Fail on a rank-deficient design instead of returning the
    /// minimum-norm solution.
    pub strict_rank: bool,
}

/// One observation: previous-inspection values and the current target value.
pub type Pair = (BTreeMap<String, f64>, f64);

/// Fits `target` on `regressors` by ordinary least squares over the design
/// `[1, x_j, x_j²]`. Pairs lacking any regressor are skipped.
pub fn fit(
    target: &str,
    regressors: &[String],
    pairs: &[Pair],
) -> Result<(CorrelationModel, CorrelationDiagnostics), CorrelationError> {
    fit_with(target, regressors, pairs, CorrelationFitOptions::default())
}

pub fn fit_with(
    target: &str,
    regressors: &[String],
    pairs: &[Pair],
    opts: CorrelationFitOptions,
) -> Result<(CorrelationModel, CorrelationDiagnostics), CorrelationError> {
    check_regressors(target, regressors)?;
    let k = regressors.len();
    let columns = 2 * k + 1;
    let mut rows = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for (prev, cur) in pairs {
        if let Some(row) = design_row(regressors, prev) {
            rows.push(row);
            ys.push(*cur);
        }
    }
    if rows.len() < columns {
        return Err(CorrelationError::InsufficientPairs {
            target: target.to_string(),
            required: columns,
            available: rows.len(),
        });
    }
    let sol = lstsq::solve(&lstsq::design(&rows, columns), &ys);
    if sol.is_rank_deficient() && opts.strict_rank {
        return Err(CorrelationError::RankDeficient {
            target: target.to_string(),
            rank: sol.rank,
            columns,
        });
    }
    let c = &sol.coefficients;
    let model = CorrelationModel {
        target: target.to_string(),
        regressors: regressors.to_vec(),
        intercept: c[0],
        linear: (0..k).map(|j| c[1 + 2 * j]).collect(),
        quadratic: (0..k).map(|j| c[2 + 2 * j]).collect(),
    };
    let diag = CorrelationDiagnostics {
        pairs: rows.len(),
        residual_ss: sol.residual_ss,
        rank: sol.rank,
        columns,
        rank_deficient: sol.is_rank_deficient(),
    };
    Ok((model, diag))
}

/// `[1, x_1, x_1², x_2, x_2², ...]`, or `None` if a regressor is missing.
pub(crate) fn design_row(regressors: &[String], prev: &BTreeMap<String, f64>) -> Option<Vec<f64>> {
    let mut row = Vec::with_capacity(2 * regressors.len() + 1);
    row.push(1.0);
    for name in regressors {
        let x = *prev.get(name)?;
        row.push(x);
        row.push(x * x);
    }
    Some(row)
}

/// Evaluates a system of correlation models, one per target, each on the
/// same previous record. Rows do not interact.
pub fn predict_joint(
    models: &[CorrelationModel],
    previous: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, CorrelationError> {
    let mut out = BTreeMap::new();
    for m in models {
        if out.contains_key(&m.target) {
            return Err(CorrelationError::DuplicateTarget(m.target.clone()));
        }
        out.insert(m.target.clone(), m.predict(previous)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prev(values: &[(&str, f64)]) -> BTreeMap<String, f64> {
        values.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    /// Term-by-term evaluation used as an oracle for `predict`.
    fn brute_force(m: &CorrelationModel, p: &BTreeMap<String, f64>) -> f64 {
        let mut terms = vec![m.intercept];
        for (j, r) in m.regressors.iter().enumerate() {
            terms.push(m.linear[j] * p[r]);
            terms.push(m.quadratic[j] * p[r].powi(2));
        }
        terms.into_iter().sum()
    }

    #[test]
    fn constant_model() {
        let m = CorrelationModel::new("c1", names(&["c1"]), 5.0, vec![0.0], vec![0.0]).unwrap();
        assert_eq!(m.predict(&prev(&[("c1", 123.0)])).unwrap(), 5.0);
    }

    #[test]
    fn persistence_model() {
        let m = CorrelationModel::persistence("c1");
        assert_eq!(m.predict(&prev(&[("c1", 3.7)])).unwrap(), 3.7);
    }

    #[test]
    fn hand_evaluated_two_regressors() {
        let m = CorrelationModel::new("c1", names(&["c1", "c2"]), 1.0, vec![2.0, 0.0], vec![0.0, 1.0])
            .unwrap();
        let p = prev(&[("c1", 2.0), ("c2", 3.0)]);
        assert_eq!(m.predict(&p).unwrap(), 14.0);
        assert_eq!(brute_force(&m, &p), 14.0);
    }

    #[test]
    fn missing_regressor_is_named() {
        let m = CorrelationModel::new("c1", names(&["c1", "c2"]), 0.0, vec![1.0, 1.0], vec![0.0, 0.0])
            .unwrap();
        assert_eq!(
            m.predict(&prev(&[("c1", 1.0)])).unwrap_err(),
            CorrelationError::MissingRegressor("c2".into())
        );
    }

    #[test]
    fn invariants_enforced() {
        assert!(matches!(
            CorrelationModel::new("c1", names(&["c2"]), 0.0, vec![1.0], vec![0.0]),
            Err(CorrelationError::TargetNotRegressor { .. })
        ));
        assert!(matches!(
            CorrelationModel::new("c1", names(&["c1"]), 0.0, vec![1.0, 2.0], vec![0.0]),
            Err(CorrelationError::ShapeMismatch { .. })
        ));
    }

    fn grid_pairs(f: impl Fn(f64, f64) -> f64) -> Vec<Pair> {
        let mut out = Vec::new();
        for i in 0..6 {
            for j in 0..5 {
                let (a, b) = (1.0 + i as f64 * 1.3, 2.0 + j as f64 * 0.7 + 0.05 * i as f64);
                out.push((prev(&[("c1", a), ("c2", b)]), f(a, b)));
            }
        }
        out
    }

    #[test]
    fn recovers_known_coefficients() {
        let pairs = grid_pairs(|a, b| 0.5 + 1.1 * a - 0.3 * b + 0.02 * a * a + 0.07 * b * b);
        let (m, d) = fit("c1", &names(&["c1", "c2"]), &pairs).unwrap();
        assert!(!d.rank_deficient);
        let expect = [(m.intercept, 0.5), (m.linear[0], 1.1), (m.linear[1], -0.3)];
        for (got, want) in expect {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        assert!((m.quadratic[0] - 0.02).abs() < 1e-6);
        assert!((m.quadratic[1] - 0.07).abs() < 1e-6);
    }

    #[test]
    fn persistence_data_recovers_identity() {
        let pairs = grid_pairs(|a, _| a);
        let (m, _) = fit("c1", &names(&["c1", "c2"]), &pairs).unwrap();
        assert!((m.linear[0] - 1.0).abs() < 1e-8);
        for c in [m.intercept, m.linear[1], m.quadratic[0], m.quadratic[1]] {
            assert!(c.abs() < 1e-8);
        }
    }

    #[test]
    fn constant_target_gives_intercept_only() {
        let pairs = grid_pairs(|_, _| 7.5);
        let (m, _) = fit("c1", &names(&["c1", "c2"]), &pairs).unwrap();
        assert!((m.intercept - 7.5).abs() < 1e-8);
        for c in m.linear.iter().chain(&m.quadratic) {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let pairs = grid_pairs(|a, b| (a * 1.7).sin() * 3.0 + b.sqrt());
        let regs = names(&["c1", "c2"]);
        let (m, _) = fit("c1", &regs, &pairs).unwrap();
        let mut dots = [0.0; 5];
        for (p, y) in &pairs {
            let row = design_row(&regs, p).unwrap();
            let r = y - m.predict(p).unwrap();
            for (d, x) in dots.iter_mut().zip(&row) {
                *d += r * x;
            }
        }
        for d in dots {
            assert!(d.abs() < 1e-8, "{d}");
        }
    }

    #[test]
    fn insufficient_pairs() {
        let pairs = grid_pairs(|a, _| a);
        let err = fit("c1", &names(&["c1", "c2"]), &pairs[..4]).unwrap_err();
        assert_eq!(
            err,
            CorrelationError::InsufficientPairs {
                target: "c1".into(),
                required: 5,
                available: 4
            }
        );
    }

    #[test]
    fn rank_deficiency_min_norm_or_strict() {
        // c2 is an exact copy of c1
        let pairs: Vec<Pair> = (0..10)
            .map(|i| {
                let v = i as f64;
                (prev(&[("c1", v), ("c2", v)]), 2.0 * v)
            })
            .collect();
        let regs = names(&["c1", "c2"]);
        let (m, d) = fit("c1", &regs, &pairs).unwrap();
        assert!(d.rank_deficient);
        assert!((m.linear[0] - 1.0).abs() < 1e-8 && (m.linear[1] - 1.0).abs() < 1e-8);
        let strict = fit_with("c1", &regs, &pairs, CorrelationFitOptions { strict_rank: true });
        assert!(matches!(strict, Err(CorrelationError::RankDeficient { .. })));
    }

    #[test]
    fn joint_prediction() {
        let models: Vec<_> = ["c1", "c2", "c3"].iter().map(|t| CorrelationModel::persistence(*t)).collect();
        let p = prev(&[("c1", 1.5), ("c2", 2.5), ("c3", 3.5)]);
        assert_eq!(predict_joint(&models, &p).unwrap(), p);

        let all = names(&["c1", "c2", "c3"]);
        let consts: Vec<_> = (1..=3)
            .map(|i| {
                CorrelationModel::new(format!("c{i}"), all.clone(), i as f64, vec![0.0; 3], vec![0.0; 3])
                    .unwrap()
            })
            .collect();
        let out = predict_joint(&consts, &p).unwrap();
        assert_eq!(out.values().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);

        // 2x2 system at (1, 1): [1 2; 3 4]·[1 1] + [0.5 0; 0 -1]·[1 1] + [10 20]
        let two = names(&["c1", "c2"]);
        let sys = vec![
            CorrelationModel::new("c1", two.clone(), 10.0, vec![1.0, 2.0], vec![0.5, 0.0]).unwrap(),
            CorrelationModel::new("c2", two.clone(), 20.0, vec![3.0, 4.0], vec![0.0, -1.0]).unwrap(),
        ];
        let out = predict_joint(&sys, &prev(&[("c1", 1.0), ("c2", 1.0)])).unwrap();
        assert_eq!(out["c1"], 13.5);
        assert_eq!(out["c2"], 26.0);

        let dup = vec![CorrelationModel::persistence("c1"), CorrelationModel::persistence("c1")];
        assert!(matches!(predict_joint(&dup, &p), Err(CorrelationError::DuplicateTarget(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn predict_matches_term_sum(
                b0 in -10.0f64..10.0,
                lin in prop::collection::vec(-3.0f64..3.0, 3),
                quad in prop::collection::vec(-1.0f64..1.0, 3),
                xs in prop::collection::vec(-20.0f64..20.0, 3),
            ) {
                let regs = names(&["c1", "c2", "c3"]);
                let m = CorrelationModel::new("c1", regs.clone(), b0, lin, quad).unwrap();
                let p: BTreeMap<String, f64> = regs.into_iter().zip(xs).collect();
                let got = m.predict(&p).unwrap();
                let want = brute_force(&m, &p);
                prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }

            #[test]
            fn joint_equals_independent(xs in prop::collection::vec(0.0f64..5.0, 2)) {
                let two = names(&["c1", "c2"]);
                let sys = vec![
                    CorrelationModel::new("c1", two.clone(), 1.0, vec![0.3, 0.2], vec![0.1, 0.0]).unwrap(),
                    CorrelationModel::new("c2", two.clone(), -1.0, vec![0.0, 1.1], vec![0.0, 0.05]).unwrap(),
                ];
                let p: BTreeMap<String, f64> = two.into_iter().zip(xs).collect();
                let joint = predict_joint(&sys, &p).unwrap();
                for m in &sys {
                    prop_assert_eq!(joint[&m.target], m.predict(&p).unwrap());
                }
            }
        }
    }
}
