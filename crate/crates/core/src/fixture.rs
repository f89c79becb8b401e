//! Synthetic cable-like inspection cohort with known generating curves.
//!
//! Every asset carries a persistent frailty factor, so its successive
//! inspections are correlated beyond what age alone explains. Health-index
//! labels are a fixed function of the conditions.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::combination::{ConditionSpec, ModelSpec};
use crate::data::{ConditionAttribute, ConditionValue, InspectionDataset, InspectionRecord, Schema};
use crate::degradation::Family;
use crate::seed::StreamKey;

pub const FIXTURE_YEARS: [i32; 4] = [2010, 2013, 2016, 2019];
pub const FIXTURE_INTERVAL: u32 = 3;
pub const VC_LEVELS: u32 = 5;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub dataset: InspectionDataset,
    /// Continuous health index keyed by `(asset_id, year)`.
    pub labels: BTreeMap<(String, i32), f64>,
    pub spec: ModelSpec,
}

pub fn schema() -> Schema {
    Schema::new(vec![
        ConditionAttribute::numerical("pd"),
        ConditionAttribute::numerical("tds"),
        ConditionAttribute::numerical("nc"),
        ConditionAttribute::numerical("thk").decreasing(),
        ConditionAttribute::rating("vc", VC_LEVELS),
    ])
    .expect("fixture schema is valid")
}

/// Each numerical condition gets its true family plus a persistence
/// correlation term; the rating is categorical.
pub fn model_spec() -> ModelSpec {
    ModelSpec {
        conditions: vec![
            ConditionSpec::new("pd").family(Family::Exponential).correlated(&["pd"]),
            ConditionSpec::new("tds").family(Family::Power).correlated(&["tds"]),
            ConditionSpec::new("nc").family(Family::Logarithmic).correlated(&["nc"]),
            ConditionSpec::new("thk").family(Family::Linear).correlated(&["thk"]),
        ],
    }
}

/// Health index of a condition vector, on `[0, 100]`.
pub fn health_index(pd: f64, tds: f64, nc: f64, thk: f64, vc: u32) -> f64 {
    let wear = 0.3 * (pd / 40.0).min(1.0)
        + 0.2 * (tds / 5.0).min(1.0)
        + 0.2 * (nc / 40.0).min(1.0)
        + 0.15 * ((10.0 - thk) / 6.0).clamp(0.0, 1.0)
        + 0.15 * (vc - 1) as f64 / (VC_LEVELS - 1) as f64;
    (100.0 * (1.0 - wear)).clamp(0.0, 100.0)
}

/// `assets` cables aged 1 to 40 in the first year, inspected every three
/// years.
pub fn cable_cohort(assets: usize, seed: u64) -> Fixture {
    let frailty = LogNormal::new(0.0, 0.2).expect("valid parameters");
    let noise = Normal::new(0.0, 0.04).expect("valid parameters");
    let mut records = Vec::with_capacity(assets * FIXTURE_YEARS.len());
    let mut labels = BTreeMap::new();
    for i in 0..assets {
        let id = format!("C{:05}", i + 1);
        let mut rng = StreamKey::new(seed, "fixture").name(&id).stream();
        let f: f64 = frailty.sample(&mut rng);
        let age0 = rng.random_range(1..=40u32) as f64;
        let vc_bias: f64 = rng.random_range(-1.0..1.0);
        for (k, year) in FIXTURE_YEARS.iter().enumerate() {
            let t = age0 + (k as u32 * FIXTURE_INTERVAL) as f64;
            let mut jitter = || 1.0 + noise.sample(&mut rng);
            let pd = 2.0 * f * (0.06 * t).exp() * jitter();
            let tds = 0.5 * f * t.powf(0.5) * jitter();
            let nc = (8.0 * t.ln() + 2.0) * f * jitter();
            let thk = (10.0 - 0.08 * t * f * jitter()).max(0.5);
            let vc = ((t / 12.0 + vc_bias + f).floor() as i64).clamp(1, VC_LEVELS as i64) as u32;
            labels.insert((id.clone(), *year), health_index(pd, tds, nc, thk, vc));
            records.push(
                InspectionRecord::new(id.clone(), *year, t)
                    .with("pd", ConditionValue::Numeric(pd))
                    .with("tds", ConditionValue::Numeric(tds))
                    .with("nc", ConditionValue::Numeric(nc))
                    .with("thk", ConditionValue::Numeric(thk))
                    .with("vc", ConditionValue::Rating(vc)),
            );
        }
    }
    let dataset = InspectionDataset::new(schema(), records, FIXTURE_INTERVAL)
        .expect("fixture records are valid");
    Fixture { dataset, labels, spec: model_spec() }
}
