//! Multi-year health-index trajectories and yearly sequential Monte Carlo
//! simulation of aging failures, replacements, and ownership cost.
//!
//! Total ownership cost is `TOC = PRC + RRC + FC`: proactive replacement
//! cost, reactive (post-failure) replacement cost, and the value of energy
//! lost to failures.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DirectionTransform, InspectionDataset};
use crate::generation::{
    self, AgeDistribution, GenerationError, GenerationMode, GenerationPlan, ModelSet,
};
use crate::health_index::{self, HealthIndexError, HealthIndexModel, HiMode, HI_MAX};
use crate::seed::StreamKey;

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("invalid assumptions: {0}")]
    Assumptions(String),
    #[error("invalid trajectories: {0}")]
    Trajectories(String),
    #[error("at least one Monte Carlo iteration is required")]
    NoIterations,
    #[error("no replacement candidates given")]
    NoCandidates,
    #[error("no served load for asset {0}")]
    MissingLoad(String),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    HealthIndex(#[from] HealthIndexError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

/// Annual aging failure probability for health indices in `(lower, upper]`,
/// where `lower` is the previous band's upper bound (0 for the first band,
/// which also takes HI exactly 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiBand {
    pub upper: f64,
    pub probability: f64,
}

/// Load interrupted by a failure, in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServedLoad {
    Uniform(f64),
    PerAsset(BTreeMap<String, f64>),
}

impl ServedLoad {
    pub fn for_asset(&self, asset: &str) -> Result<f64, ReliabilityError> {
        match self {
            ServedLoad::Uniform(v) => Ok(*v),
            ServedLoad::PerAsset(m) => {
                m.get(asset).copied().ok_or_else(|| ReliabilityError::MissingLoad(asset.to_string()))
            }
        }
    }
}

fn default_bands() -> Vec<HiBand> {
    [(20.0, 0.10), (40.0, 0.05), (60.0, 0.02), (80.0, 0.01), (100.0, 0.005)]
        .into_iter()
        .map(|(upper, probability)| HiBand { upper, probability })
        .collect()
}

fn default_voll() -> f64 {
    10_000.0
}

fn default_restoration_hours() -> f64 {
    1.0
}

fn default_unit_cost() -> f64 {
    500.0
}

fn default_horizon() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationAssumptions {
    #[serde(default = "default_bands")]
    pub hi_band_failure_prob: Vec<HiBand>,
    /// Currency per MWh.
    #[serde(default = "default_voll")]
    pub value_of_lost_energy: f64,
    #[serde(default = "default_restoration_hours")]
    pub restoration_hours: f64,
    #[serde(default = "default_unit_cost")]
    pub unit_replacement_cost: f64,
    #[serde(default = "default_horizon")]
    pub horizon_years: usize,
    pub served_load_mw: ServedLoad,
}

impl SimulationAssumptions {
    /// Default bands and costs with the given load.
    pub fn with_load(served_load_mw: ServedLoad) -> Self {
        Self {
            hi_band_failure_prob: default_bands(),
            value_of_lost_energy: default_voll(),
            restoration_hours: default_restoration_hours(),
            unit_replacement_cost: default_unit_cost(),
            horizon_years: default_horizon(),
            served_load_mw,
        }
    }

    pub fn validate(&self) -> Result<(), ReliabilityError> {
        let bad = |m: String| Err(ReliabilityError::Assumptions(m));
        let bands = &self.hi_band_failure_prob;
        if bands.is_empty() {
            return bad("no health-index bands".into());
        }
        let mut lower = 0.0;
        for b in bands {
            if !(b.upper > lower) {
                return bad(format!("band upper bounds must ascend from 0, got {}", b.upper));
            }
            if !(0.0..=1.0).contains(&b.probability) {
                return bad(format!("failure probability {} outside [0, 1]", b.probability));
            }
            lower = b.upper;
        }
        if lower != HI_MAX {
            return bad(format!("bands must end at {HI_MAX}, last ends at {lower}"));
        }
        for (name, v) in [
            ("value_of_lost_energy", self.value_of_lost_energy),
            ("restoration_hours", self.restoration_hours),
            ("unit_replacement_cost", self.unit_replacement_cost),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if self.horizon_years < 1 {
            return bad("horizon must be at least one year".into());
        }
        let loads: Vec<f64> = match &self.served_load_mw {
            ServedLoad::Uniform(v) => vec![*v],
            ServedLoad::PerAsset(m) => m.values().copied().collect(),
        };
        if loads.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("served load must be non-negative".into());
        }
        Ok(())
    }

    /// Annual failure probability at health index `hi`.
    pub fn failure_probability(&self, hi: f64) -> f64 {
        let bands = &self.hi_band_failure_prob;
        bands
            .iter()
            .find(|b| hi <= b.upper)
            .unwrap_or(&bands[bands.len() - 1])
            .probability
    }

    /// Failure cost of one failure at `load_mw`.
    pub fn failure_cost(&self, load_mw: f64) -> f64 {
        self.value_of_lost_energy * load_mw * self.restoration_hours
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiSource {
    /// Predicted from the starting conditions.
    Observed,
    /// Predicted from generated conditions at an inspection year.
    Generated,
    Interpolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetTrajectory {
    pub asset_id: String,
    /// Health index for each year of the horizon, starting at the start year.
    pub hi: Vec<f64>,
    pub source: Vec<HiSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub start_year: i32,
    pub years: usize,
    pub assets: Vec<AssetTrajectory>,
    /// Health index of a newly installed asset by age in years; entry 0 is
    /// 100.
    pub replacement_curve: Vec<f64>,
}

impl TrajectorySet {
    pub fn validate(&self) -> Result<(), ReliabilityError> {
        let bad = |m: String| Err(ReliabilityError::Trajectories(m));
        if self.years < 1 {
            return bad("no years".into());
        }
        if self.replacement_curve.len() < self.years {
            return bad(format!(
                "replacement curve covers {} years, horizon is {}",
                self.replacement_curve.len(),
                self.years
            ));
        }
        let in_range = |h: &f64| (0.0..=HI_MAX).contains(h);
        if !self.replacement_curve.iter().all(in_range) {
            return bad("replacement curve outside [0, 100]".into());
        }
        for a in &self.assets {
            if a.hi.len() != self.years || a.source.len() != self.years {
                return bad(format!("asset {} has {} entries, expected {}", a.asset_id, a.hi.len(), self.years));
            }
            if !a.hi.iter().all(in_range) {
                return bad(format!("asset {} has a health index outside [0, 100]", a.asset_id));
            }
        }
        Ok(())
    }
}

/// Linear interpolation of yearly values between `(0, v0)` and `(span, v1)`.
/// Returns the `span - 1` interior values.
pub fn interpolate(v0: f64, v1: f64, span: usize) -> Vec<f64> {
    (1..span).map(|k| v0 + (v1 - v0) * k as f64 / span as f64).collect()
}

/// Health index on the 0 to 100 scale. Discrete level `k` of `L` maps to the
/// middle of the `k`-th equal band.
pub fn hi_scale(mode: HiMode, predicted: f64) -> f64 {
    match mode {
        HiMode::Continuous => predicted,
        HiMode::Discrete { levels } => (predicted - 0.5) * HI_MAX / levels as f64,
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryOptions {
    pub master_seed: u64,
    pub diversify: bool,
    /// Size of the age-only cohort used for the replacement curve.
    pub replacement_cohort: usize,
    /// Maps generated conditions back to the scale the HI model was trained on.
    pub transform: DirectionTransform,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            master_seed: 0,
            diversify: true,
            replacement_cohort: 200,
            transform: DirectionTransform::default(),
        }
    }
}

fn predict_scaled(
    hi_model: &HealthIndexModel,
    dataset: &InspectionDataset,
    transform: &DirectionTransform,
) -> Result<Vec<f64>, ReliabilityError> {
    let ds = if transform.is_identity() { dataset.clone() } else { transform.invert(dataset)? };
    Ok(health_index::predict_dataset(hi_model, &ds)?
        .into_iter()
        .map(|h| hi_scale(hi_model.mode, h))
        .collect())
}

/// Generates conditions at each future inspection year from the latest record
/// of every asset, predicts health indices there, and interpolates the years
/// in between. All assets must share the same latest inspection year.
///
/// The replacement curve comes from a cohort generated by `age_models`, which
/// must be evaluable from age alone; without them a new asset stays at 100.
pub fn build_trajectories(
    seed: &InspectionDataset,
    models: &ModelSet,
    age_models: Option<&ModelSet>,
    hi_model: &HealthIndexModel,
    horizon_years: usize,
    opts: &TrajectoryOptions,
) -> Result<TrajectorySet, ReliabilityError> {
    let interval = seed.interval() as usize;
    if horizon_years < interval || horizon_years < 1 {
        return Err(ReliabilityError::Trajectories(format!(
            "horizon of {horizon_years} years is shorter than the {interval}-year inspection interval"
        )));
    }
    let latest: Vec<_> = seed.latest_by_asset().into_iter().cloned().collect();
    let start_year = latest.iter().map(|r| r.inspection_year).max().unwrap_or_default();
    if let Some(r) = latest.iter().find(|r| r.inspection_year != start_year) {
        return Err(ReliabilityError::Trajectories(format!(
            "asset {} was last inspected in {}, others in {start_year}",
            r.asset_id, r.inspection_year
        )));
    }
    let current = seed.with_records(latest)?;
    let steps = (horizon_years - 1).div_ceil(interval);
    let plan = GenerationPlan {
        start_year,
        steps: steps as u32,
        interval: interval as u32,
        mode: GenerationMode::Full,
        master_seed: opts.master_seed,
        diversify: opts.diversify,
    };
    let generated = generation::generate_sequence(models, &current, &plan)?;
    let mut anchors = vec![predict_scaled(hi_model, &current, &opts.transform)?];
    for ds in &generated {
        anchors.push(predict_scaled(hi_model, ds, &opts.transform)?);
    }
    let assets = current
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let points: Vec<f64> = anchors.iter().map(|a| a[i]).collect();
            let (hi, source) = fill_years(&points, interval, horizon_years);
            AssetTrajectory { asset_id: r.asset_id.clone(), hi, source }
        })
        .collect();

    let replacement_curve = match age_models {
        Some(age_models) => {
            let cohort_plan = GenerationPlan {
                steps: steps as u32,
                mode: GenerationMode::AgeOnly,
                master_seed: opts.master_seed,
                ..plan
            };
            let cohort = generation::generate_hypothetical(
                current.schema(),
                age_models,
                opts.replacement_cohort,
                &AgeDistribution::Fixed { age: interval as f64 },
                &cohort_plan,
            )?;
            let mut points = vec![HI_MAX];
            for ds in &cohort {
                let hi = predict_scaled(hi_model, ds, &opts.transform)?;
                let mean = if hi.is_empty() { HI_MAX } else { hi.iter().sum::<f64>() / hi.len() as f64 };
                points.push(mean);
            }
            fill_years(&points, interval, horizon_years).0
        }
        None => vec![HI_MAX; horizon_years],
    };
    Ok(TrajectorySet { start_year, years: horizon_years, assets, replacement_curve })
}

/// Expands values at years `0, interval, 2·interval, ...` to every year of
/// the horizon.
fn fill_years(points: &[f64], interval: usize, years: usize) -> (Vec<f64>, Vec<HiSource>) {
    let mut hi = Vec::with_capacity(years);
    let mut source = Vec::with_capacity(years);
    for (k, w) in points.windows(2).enumerate() {
        hi.push(w[0]);
        source.push(if k == 0 { HiSource::Observed } else { HiSource::Generated });
        for v in interpolate(w[0], w[1], interval) {
            hi.push(v);
            source.push(HiSource::Interpolated);
        }
    }
    if let Some(last) = points.last() {
        hi.push(*last);
        source.push(if points.len() == 1 { HiSource::Observed } else { HiSource::Generated });
    }
    hi.truncate(years);
    source.truncate(years);
    (hi, source)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std_error = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Self { mean, std_error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLine {
    pub prc: Estimate,
    pub rrc: Estimate,
    pub fc: Estimate,
    /// Sum of the PRC, RRC, and FC means; its standard error comes from the
    /// per-iteration totals.
    pub toc: Estimate,
    pub failures: Estimate,
    pub proactive_replacements: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearCost {
    pub year: i32,
    #[serde(flatten)]
    pub cost: CostLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub iterations: usize,
    pub annual_replacements: usize,
    pub master_seed: u64,
    pub years: Vec<YearCost>,
    pub total: CostLine,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Per-iteration, per-year outcome: prc, rrc, fc, failures.
type YearOutcome = [f64; 4];

fn run_iteration(
    traj: &TrajectorySet,
    assumptions: &SimulationAssumptions,
    failure_costs: &[f64],
    x: usize,
    master_seed: u64,
    iteration: usize,
) -> Vec<YearOutcome> {
    let mut rng = StreamKey::new(master_seed, "simulate").index(iteration as u64).stream();
    let n = traj.assets.len();
    let mut installed: Vec<Option<usize>> = vec![None; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut hi = vec![0.0; n];
    let unit = assumptions.unit_replacement_cost;
    (0..traj.years)
        .map(|y| {
            for (i, h) in hi.iter_mut().enumerate() {
                *h = match installed[i] {
                    Some(at) => traj.replacement_curve[y - at],
                    None => traj.assets[i].hi[y],
                };
            }
            let mut out = [0.0; 4];
            if x > 0 {
                order.sort_by(|a, b| hi[*a].total_cmp(&hi[*b]).then(a.cmp(b)));
                for &i in &order[..x] {
                    installed[i] = Some(y);
                    hi[i] = traj.replacement_curve[0];
                }
                out[0] = x as f64 * unit;
            }
            for i in 0..n {
                let u: f64 = rng.random();
                if u < assumptions.failure_probability(hi[i]) {
                    installed[i] = Some(y);
                    out[1] += unit;
                    out[2] += failure_costs[i];
                    out[3] += 1.0;
                }
            }
            out
        })
        .collect()
}

fn summarize(samples: &[YearOutcome], x: usize) -> CostLine {
    let col = |k: usize| samples.iter().map(|s| s[k]).collect::<Vec<f64>>();
    let (prc, rrc, fc, failures) = (
        Estimate::from_samples(&col(0)),
        Estimate::from_samples(&col(1)),
        Estimate::from_samples(&col(2)),
        Estimate::from_samples(&col(3)),
    );
    let totals: Vec<f64> = samples.iter().map(|s| s[0] + s[1] + s[2]).collect();
    let toc = Estimate {
        mean: prc.mean + rrc.mean + fc.mean,
        std_error: Estimate::from_samples(&totals).std_error,
    };
    CostLine { prc, rrc, fc, toc, failures, proactive_replacements: x as f64 }
}

/// Yearly sequential Monte Carlo simulation with `annual_replacements`
/// lowest-health assets replaced at the start of each year.
///
/// Every iteration draws one uniform per asset per year in a fixed order from
/// a stream keyed on the iteration, so runs with different replacement
/// counts share random numbers.
pub fn simulate(
    traj: &TrajectorySet,
    assumptions: &SimulationAssumptions,
    annual_replacements: usize,
    iterations: usize,
    master_seed: u64,
) -> Result<CostReport, ReliabilityError> {
    assumptions.validate()?;
    traj.validate()?;
    if iterations == 0 {
        return Err(ReliabilityError::NoIterations);
    }
    let mut warnings = Vec::new();
    let n = traj.assets.len();
    let x = if annual_replacements > n {
        let msg = format!("annual replacement count {annual_replacements} exceeds fleet size {n}; clamped");
        log::warn!("{msg}");
        warnings.push(msg);
        n
    } else {
        annual_replacements
    };
    let failure_costs: Vec<f64> = traj
        .assets
        .iter()
        .map(|a| assumptions.served_load_mw.for_asset(&a.asset_id).map(|l| assumptions.failure_cost(l)))
        .collect::<Result<_, _>>()?;
    let runs: Vec<Vec<YearOutcome>> = (0..iterations)
        .into_par_iter()
        .map(|it| run_iteration(traj, assumptions, &failure_costs, x, master_seed, it))
        .collect();
    let years = (0..traj.years)
        .map(|y| {
            let samples: Vec<YearOutcome> = runs.iter().map(|r| r[y]).collect();
            YearCost { year: traj.start_year + y as i32, cost: summarize(&samples, x) }
        })
        .collect();
    let totals: Vec<YearOutcome> = runs
        .iter()
        .map(|r| {
            r.iter().fold([0.0; 4], |mut acc, o| {
                for k in 0..4 {
                    acc[k] += o[k];
                }
                acc
            })
        })
        .collect();
    let mut total = summarize(&totals, x);
    total.proactive_replacements = (x * traj.years) as f64;
    Ok(CostReport {
        iterations,
        annual_replacements: x,
        master_seed,
        years,
        total,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimization {
    pub reports: Vec<CostReport>,
    pub best_replacements: usize,
    pub best_toc: f64,
}

/// Simulates each candidate replacement count with the same seed and returns
/// the one with the lowest mean total cost (the smaller count on ties).
pub fn optimize_replacement(
    traj: &TrajectorySet,
    assumptions: &SimulationAssumptions,
    candidates: &[usize],
    iterations: usize,
    master_seed: u64,
) -> Result<Optimization, ReliabilityError> {
    if candidates.is_empty() {
        return Err(ReliabilityError::NoCandidates);
    }
    let reports = candidates
        .iter()
        .map(|x| simulate(traj, assumptions, *x, iterations, master_seed))
        .collect::<Result<Vec<_>, _>>()?;
    let best = reports
        .iter()
        .min_by(|a, b| {
            a.total
                .toc
                .mean
                .total_cmp(&b.total.toc.mean)
                .then(a.annual_replacements.cmp(&b.annual_replacements))
        })
        .expect("candidates are non-empty");
    Ok(Optimization {
        best_replacements: best.annual_replacements,
        best_toc: best.total.toc.mean,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(his: &[f64], years: usize) -> TrajectorySet {
        TrajectorySet {
            start_year: 2019,
            years,
            assets: his
                .iter()
                .enumerate()
                .map(|(i, h)| AssetTrajectory {
                    asset_id: format!("A{i}"),
                    hi: vec![*h; years],
                    source: vec![HiSource::Observed; years],
                })
                .collect(),
            replacement_curve: vec![HI_MAX; years],
        }
    }

    fn zero_risk() -> SimulationAssumptions {
        let mut a = SimulationAssumptions::with_load(ServedLoad::Uniform(1.0));
        for b in &mut a.hi_band_failure_prob {
            b.probability = 0.0;
        }
        a
    }

    #[test]
    fn interpolation_by_hand() {
        assert_eq!(interpolate(90.0, 60.0, 3), vec![80.0, 70.0]);
        let (hi, src) = fill_years(&[90.0, 60.0, 30.0, 0.0], 3, 10);
        assert_eq!(hi, vec![90.0, 80.0, 70.0, 60.0, 50.0, 40.0, 30.0, 20.0, 10.0, 0.0]);
        assert_eq!(src[0], HiSource::Observed);
        assert_eq!(src[3], HiSource::Generated);
        assert_eq!(src[9], HiSource::Generated);
        assert_eq!(src[1], HiSource::Interpolated);
    }

    #[test]
    fn band_lookup() {
        let a = SimulationAssumptions::with_load(ServedLoad::Uniform(1.0));
        assert_eq!(a.failure_probability(0.0), 0.10);
        assert_eq!(a.failure_probability(20.0), 0.10);
        assert_eq!(a.failure_probability(20.000001), 0.05);
        assert_eq!(a.failure_probability(80.0), 0.01);
        assert_eq!(a.failure_probability(100.0), 0.005);
    }

    #[test]
    fn no_risk_no_cost() {
        let traj = flat(&[5.0, 50.0, 95.0], 10);
        let r = simulate(&traj, &zero_risk(), 0, 50, 1).unwrap();
        assert_eq!(r.total.toc.mean, 0.0);
        assert!(r.years.iter().all(|y| y.cost.toc.mean == 0.0 && y.cost.failures.mean == 0.0));
        let opt = optimize_replacement(&traj, &zero_risk(), &[3, 0, 1, 2], 20, 1).unwrap();
        assert_eq!(opt.best_replacements, 0);
    }

    #[test]
    fn proactive_cost_identity_and_clamp() {
        let traj = flat(&[5.0; 8], 10);
        let r = simulate(&traj, &zero_risk(), 3, 5, 9).unwrap();
        assert_eq!(r.total.prc.mean, 3.0 * 500.0 * 10.0);
        let clamped = simulate(&traj, &zero_risk(), 20, 5, 9).unwrap();
        assert_eq!(clamped.annual_replacements, 8);
        assert_eq!(clamped.warnings.len(), 1);
        assert!(matches!(simulate(&traj, &zero_risk(), 0, 0, 9), Err(ReliabilityError::NoIterations)));
    }

    #[test]
    fn toc_identity_per_year() {
        let traj = flat(&[10.0, 30.0, 50.0, 70.0, 90.0], 5);
        let a = SimulationAssumptions::with_load(ServedLoad::Uniform(2.0));
        let r = simulate(&traj, &a, 1, 200, 3).unwrap();
        for y in r.years.iter().map(|y| &y.cost).chain([&r.total]) {
            assert_eq!(y.toc.mean, y.prc.mean + y.rrc.mean + y.fc.mean);
        }
    }

    #[test]
    fn replaced_assets_follow_new_curve() {
        // one doomed asset; after failing in year 0 it follows the safe curve
        let mut traj = flat(&[10.0], 4);
        traj.replacement_curve = vec![100.0, 90.0, 80.0, 70.0];
        let mut a = zero_risk();
        a.hi_band_failure_prob[0].probability = 1.0;
        let r = simulate(&traj, &a, 0, 10, 0).unwrap();
        assert_eq!(r.years[0].cost.failures.mean, 1.0);
        assert!(r.years[1..].iter().all(|y| y.cost.failures.mean == 0.0));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let traj = flat(&(0..40).map(|i| (i * 5 % 100) as f64).collect::<Vec<_>>(), 6);
        let a = SimulationAssumptions::with_load(ServedLoad::Uniform(1.0));
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(&traj, &a, 2, 300, 11).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one, run(3));
    }

    #[test]
    fn per_asset_load() {
        let traj = flat(&[10.0, 10.0], 1);
        let mut a = zero_risk();
        a.hi_band_failure_prob[0].probability = 1.0;
        a.served_load_mw = ServedLoad::PerAsset([("A0".to_string(), 1.0), ("A1".into(), 3.0)].into());
        let r = simulate(&traj, &a, 0, 2, 0).unwrap();
        assert_eq!(r.total.fc.mean, 40_000.0);
        a.served_load_mw = ServedLoad::PerAsset([("A0".to_string(), 1.0)].into());
        assert!(matches!(simulate(&traj, &a, 0, 2, 0), Err(ReliabilityError::MissingLoad(_))));
    }

    #[test]
    fn assumptions_json_defaults() {
        let a: SimulationAssumptions = serde_json::from_str(r#"{"served_load_mw":{"uniform":0.5}}"#).unwrap();
        assert_eq!(a, SimulationAssumptions::with_load(ServedLoad::Uniform(0.5)));
        assert!(serde_json::from_str::<SimulationAssumptions>("{}").is_err());
        let mut bad = a.clone();
        bad.hi_band_failure_prob.pop();
        assert!(bad.validate().is_err());
    }
}
