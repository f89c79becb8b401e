use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use condgen::combination::{CombinedModel, EstimateOptions, ModelSpec};
use condgen::data::{
    self, normalize_direction, AttributeKind, DirectionTransform, InspectionDataset, Schema,
};
use condgen::fixture;
use condgen::generation::{
    self, FitSetOptions, GenerationMode, GenerationPlan, ModelSet,
};
use condgen::health_index::{self, HealthIndexModel};
use condgen::reliability::{
    self, CostLine, CostReport, ServedLoad, SimulationAssumptions, TrajectoryOptions, TrajectorySet,
};
use condgen::validation::{self, Split, ValidationOptions};
use serde::Serialize;

use crate::config::{Field, RunConfig};
use crate::error::CliError;
use crate::output::{num, opt, sha256_file, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TestKind {
    Test1,
    Test2,
    Test3,
    Test4,
}

impl TestKind {
    fn name(self) -> &'static str {
        match self {
            TestKind::Test1 => "test1",
            TestKind::Test2 => "test2",
            TestKind::Test3 => "test3",
            TestKind::Test4 => "test4",
        }
    }
}

/// A loaded run: configuration plus the manifest under construction.
pub struct Run {
    pub cfg: RunConfig,
    pub config_path: PathBuf,
    command: &'static str,
    inputs: BTreeMap<&'static str, InputRecord>,
    assumptions: Option<SimulationAssumptions>,
    pub out: Outputs,
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: String,
    master_seed: Option<u64>,
    settings: &'a RunConfig,
    inputs: &'a BTreeMap<&'static str, InputRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    assumptions: Option<&'a SimulationAssumptions>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(command: &'static str, config_path: &Path, seed: Option<u64>) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(config_path)?;
        if seed.is_some() {
            cfg.master_seed = seed;
        }
        Ok(Self {
            cfg,
            config_path: config_path.to_path_buf(),
            command,
            inputs: BTreeMap::new(),
            assumptions: None,
            out: Outputs::default(),
        })
    }

    fn input(&mut self, role: &'static str, rel: &Path) -> Result<PathBuf, CliError> {
        let path = self.cfg.resolve(rel);
        let sha256 = sha256_file(&path)?;
        self.inputs.insert(role, InputRecord { path: rel.display().to_string(), sha256 });
        Ok(path)
    }

    fn seed(&self) -> u64 {
        self.cfg.master_seed.expect("required before use")
    }

    pub fn finish(mut self, out_dir: &Path) -> Result<(), CliError> {
        let mut outputs = self.out.names();
        outputs.push("manifest.json".into());
        outputs.sort();
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config: self.config_path.display().to_string(),
            master_seed: self.cfg.master_seed,
            settings: &self.cfg,
            inputs: &self.inputs,
            assumptions: self.assumptions.as_ref(),
            outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::Runtime(format!("serializing manifest: {e}")))?;
        bytes.push(b'\n');
        self.out.add("manifest.json", bytes);
        let written = self.out.commit(out_dir)?;
        log::info!("wrote {} files to {}", written.len(), out_dir.display());
        Ok(())
    }

    fn load_dataset(&mut self) -> Result<InspectionDataset, CliError> {
        let schema_path = self.input("schema", &self.cfg.schema.clone().expect("required"))?;
        let data_path = self.input("dataset", &self.cfg.dataset.clone().expect("required"))?;
        let schema = Schema::from_json_file(&schema_path)
            .map_err(|e| CliError::Invalid(format!("schema {}: {e}", schema_path.display())))?;
        let interval = self.cfg.interval.expect("required");
        if interval == 0 {
            return Err(CliError::Invalid("interval must be positive".into()));
        }
        data::ingest_csv(&data_path, &schema, interval)
            .map_err(|e| CliError::Invalid(format!("dataset {}: {e}", data_path.display())))
    }

    fn load_spec(&mut self) -> Result<ModelSpec, CliError> {
        let path = self.input("model_spec", &self.cfg.model_spec.clone().expect("required"))?;
        read_json(&path)
    }

    fn load_assumptions(&mut self) -> Result<SimulationAssumptions, CliError> {
        let path = self.input("assumptions", &self.cfg.assumptions.clone().expect("required"))?;
        let a: SimulationAssumptions = read_json(&path)?;
        a.validate()?;
        self.assumptions = Some(a.clone());
        Ok(a)
    }

    fn load_labels(&mut self) -> Result<BTreeMap<(String, i32), f64>, CliError> {
        let path = self.input("labels", &self.cfg.labels.clone().expect("required"))?;
        let file = std::fs::File::open(&path)
            .map_err(|e| CliError::Invalid(format!("labels {}: {e}", path.display())))?;
        data::read_labels(file, &self.cfg.label_column)
            .map_err(|e| CliError::Invalid(format!("labels {}: {e}", path.display())))
    }

    /// Parses the configured HI model, or the labels to train one from.
    fn load_hi_input(&mut self) -> Result<HiInput, CliError> {
        match self.cfg.hi_model.clone() {
            Some(p) => {
                let path = self.input("hi_model", &p)?;
                Ok(HiInput::Model(read_json(&path)?))
            }
            None => Ok(HiInput::Labels(self.load_labels()?)),
        }
    }

    /// The loaded HI model, or one trained on `training` (original scale).
    fn hi_model(&self, input: HiInput, training: &InspectionDataset) -> Result<HealthIndexModel, CliError> {
        match input {
            HiInput::Model(m) => Ok(m),
            HiInput::Labels(labels) => {
                let samples = health_index::labeled_samples(training, &labels)?;
                Ok(health_index::train(&samples, &self.cfg.hi)?)
            }
        }
    }

    fn fit_options(&self, age_only: bool) -> FitSetOptions {
        let f = &self.cfg.fitting;
        FitSetOptions {
            estimate: EstimateOptions {
                age_only,
                non_negative: f.non_negative,
                ..Default::default()
            },
            fallback_fraction: f.fallback_fraction,
            neighbor_window: f.neighbor_window,
        }
    }

    fn validation_options(&self) -> ValidationOptions {
        ValidationOptions {
            fit: self.fit_options(false),
            master_seed: self.seed(),
            bins: self.cfg.validation.bins,
        }
    }
}

enum HiInput {
    Model(HealthIndexModel),
    Labels(BTreeMap<(String, i32), f64>),
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn age_only_requested(run: &Run) -> bool {
    run.cfg.generation.mode == GenerationMode::AgeOnly
}

/// Correlation terms need consecutive inspections; single-year data can only
/// be fitted age-only.
fn check_years(spec: &ModelSpec, ds: &InspectionDataset, age_only: bool) -> Result<(), CliError> {
    let correlated: Vec<&str> = spec
        .conditions
        .iter()
        .filter(|c| c.uses_correlation())
        .map(|c| c.target.as_str())
        .collect();
    if !age_only && !correlated.is_empty() && ds.consecutive_pairs().is_empty() {
        return Err(CliError::Invalid(format!(
            "correlation terms for {} need consecutive inspections from at least two years; \
             the dataset has none (set generation.mode to \"age_only\" to fit age terms only)",
            correlated.join(", ")
        )));
    }
    Ok(())
}

struct Fitted {
    normalized: InspectionDataset,
    transform: DirectionTransform,
    models: ModelSet,
    age_models: ModelSet,
    diagnostics: BTreeMap<String, condgen::combination::EstimateDiagnostics>,
}

fn load_for_fit(run: &mut Run) -> Result<(InspectionDataset, ModelSpec), CliError> {
    let ds = run.load_dataset()?;
    let spec = run.load_spec()?;
    check_years(&spec, &ds, age_only_requested(run))?;
    Ok((ds, spec))
}

fn fit_all(run: &Run, ds: &InspectionDataset, spec: &ModelSpec) -> Result<Fitted, CliError> {
    let (normalized, transform) = normalize_direction(ds)?;
    let age_only = age_only_requested(run);
    let (models, diagnostics) = generation::fit_models(spec, &normalized, run.fit_options(age_only))?;
    let (age_models, _) = generation::fit_models(spec, &normalized, run.fit_options(true))?;
    Ok(Fitted { normalized, transform, models, age_models, diagnostics })
}

pub fn fit(run: &mut Run) -> Result<(), CliError> {
    run.cfg.require(&[Field::Schema, Field::Dataset, Field::Interval, Field::ModelSpec])?;
    let (ds, spec) = load_for_fit(run)?;
    let f = fit_all(run, &ds, &spec)?;
    run.out.json("models.json", &f.models)?;
    run.out.json("age_models.json", &f.age_models)?;
    run.out.json("direction.json", &f.transform)?;
    run.out.json("fit_report.json", &f.diagnostics)?;
    run.out.add("fit_report.txt", fit_report(ds.schema(), &f).into_bytes());
    Ok(())
}

fn describe_model(out: &mut String, m: &CombinedModel) {
    for t in &m.degradation_terms {
        let _ = writeln!(
            out,
            "  {:.6} x {}(a = {}, b = {})",
            t.weight, t.model.family, t.model.a, t.model.b
        );
    }
    for t in &m.correlation_terms {
        let c = &t.model;
        let _ = writeln!(
            out,
            "  {:.6} x correlation on [{}]: intercept = {}, linear = {:?}, quadratic = {:?}",
            t.weight,
            c.regressors.join(", "),
            c.intercept,
            c.linear,
            c.quadratic
        );
    }
    for t in &m.empirical_terms {
        let _ = writeln!(out, "  {:.6} x empirical: {}", t.weight, t.model.description);
    }
}

fn fit_report(schema: &Schema, f: &Fitted) -> String {
    let mut out = String::new();
    if !f.transform.is_identity() {
        let _ = writeln!(out, "direction-normalized attributes (fitted as max - value):");
        for (name, max) in &f.transform.maxima {
            let _ = writeln!(out, "  {name}: max {max}");
        }
        for (name, levels) in &f.transform.flipped_ratings {
            let _ = writeln!(out, "  {name}: levels reversed (1..{levels})");
        }
        out.push('\n');
    }
    for attr in schema.attributes() {
        let name = &attr.name;
        match (attr.kind, f.models.categorical.get(name)) {
            (AttributeKind::Rating, Some(cat)) => {
                let _ = writeln!(
                    out,
                    "{name} (rating, {} levels): categorical by age, {} observed ages",
                    cat.levels,
                    cat.by_age.len()
                );
            }
            _ => {
                let _ = writeln!(out, "{name} ({:?}):", attr.kind);
                if let Some(m) = f.models.combined.get(name) {
                    describe_model(&mut out, m);
                }
                if let Some(d) = f.diagnostics.get(name) {
                    let _ = writeln!(out, "  training rmse = {}", d.training_rmse);
                    for w in &d.warnings {
                        let _ = writeln!(out, "  warning: {w}");
                    }
                }
                if let Some(s) = f.models.sigma.get(name) {
                    let _ = writeln!(
                        out,
                        "  sigma: {} ages, fallback fraction {}",
                        s.by_age.len(),
                        s.fallback_fraction
                    );
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn generate(run: &mut Run) -> Result<(), CliError> {
    run.cfg.require(&[
        Field::Schema,
        Field::Dataset,
        Field::Interval,
        Field::ModelSpec,
        Field::MasterSeed,
        Field::Steps,
    ])?;
    let (ds, spec) = load_for_fit(run)?;
    let f = fit_all(run, &ds, &spec)?;
    let gen = &run.cfg.generation;
    let start_year = ds.years().last().copied().unwrap_or_default();
    let plan = GenerationPlan {
        start_year,
        steps: gen.steps.expect("required"),
        interval: ds.interval(),
        mode: gen.mode,
        master_seed: run.seed(),
        diversify: gen.diversify,
    };
    let hypothetical = gen.hypothetical.clone();
    for step in generation::generate_sequence(&f.models, &f.normalized, &plan)? {
        let original = f.transform.invert(&step)?;
        let year = original.years().first().copied().unwrap_or_default();
        run.out.add(format!("generated_{year}.csv"), data::to_csv_bytes(&original)?);
    }
    if let Some(h) = hypothetical {
        let cohort = generation::generate_hypothetical(
            f.normalized.schema(),
            &f.age_models,
            h.count,
            &h.ages,
            &GenerationPlan { mode: GenerationMode::AgeOnly, ..plan },
        )?;
        for (k, step) in cohort.iter().enumerate() {
            let original = f.transform.invert(step)?;
            let year = start_year + (k as i32) * ds.interval() as i32;
            run.out.add(format!("hypothetical_{year}.csv"), data::to_csv_bytes(&original)?);
        }
    }
    Ok(())
}

pub fn validate(run: &mut Run, test: TestKind) -> Result<(), CliError> {
    let mut fields = vec![Field::Schema, Field::Dataset, Field::Interval, Field::ModelSpec, Field::MasterSeed];
    if test == TestKind::Test3 {
        fields.push(Field::LabelsOrHiModel);
    }
    run.cfg.require(&fields)?;
    let ds = run.load_dataset()?;
    let spec = run.load_spec()?;
    let hi_input = if test == TestKind::Test3 { Some(run.load_hi_input()?) } else { None };
    check_years(&spec, &ds, false)?;
    let split = Split::new(&ds)?;
    let opts = run.validation_options();
    let name = test.name();
    match test {
        TestKind::Test1 | TestKind::Test2 => {
            let mode = if test == TestKind::Test1 { GenerationMode::Full } else { GenerationMode::AgeOnly };
            let step = validation::one_step(&split, &spec, mode, &opts)?;
            let rows: Vec<Vec<String>> = step
                .scores
                .iter()
                .map(|s| {
                    vec![
                        s.condition.clone(),
                        format!("{:?}", s.kind).to_lowercase(),
                        num(s.kl),
                        num(s.benchmark_kl),
                        opt(s.mape),
                        opt(s.mape_expected),
                        opt(s.r_squared),
                        opt(s.cmp),
                    ]
                })
                .collect();
            let header = ["condition", "kind", "kl", "benchmark_kl", "mape", "mape_expected", "r_squared", "cmp"];
            run.out.csv(&format!("{name}.csv"), &header, &rows)?;
            run.out.json(&format!("{name}.json"), &step.scores)?;
        }
        TestKind::Test3 => {
            let training = split.transform.invert(&split.training)?;
            let model = run.hi_model(hi_input.expect("loaded for test3"), &training)?;
            let score = validation::health_index_agreement(&split, &spec, &model, &opts)?;
            let row = vec![score.records.to_string(), opt(score.mape), opt(score.himp)];
            run.out.csv("test3.csv", &["records", "mape", "himp"], &[row])?;
            run.out.json("test3.json", &score)?;
        }
        TestKind::Test4 => {
            let v = run.cfg.validation.clone();
            let points = validation::training_size_sweep(&split, &spec, &v.sizes, v.seeds, &opts)?;
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| vec![p.size.to_string(), num(p.mean_error), num(p.accuracy)])
                .collect();
            run.out.csv("test4.csv", &["size", "mean_error", "accuracy"], &rows)?;
            run.out.json("test4.json", &points)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    records: usize,
    trees: usize,
    constant_labels: bool,
    training_mse: f64,
}

pub fn hi_train(run: &mut Run) -> Result<(), CliError> {
    run.cfg.require(&[Field::Schema, Field::Dataset, Field::Interval, Field::Labels])?;
    let ds = run.load_dataset()?;
    let labels = run.load_labels()?;
    let samples = health_index::labeled_samples(&ds, &labels)?;
    let model = health_index::train(&samples, &run.cfg.hi)?;
    let mut sse = 0.0;
    for (x, y) in &samples {
        sse += (model.raw(x)? - y).powi(2);
    }
    let report = TrainReport {
        records: samples.len(),
        trees: model.trees.len(),
        constant_labels: model.constant_labels,
        training_mse: sse / samples.len() as f64,
    };
    run.out.json("hi_model.json", &model)?;
    run.out.json("hi_train_report.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct HiPrediction<'a> {
    asset_id: &'a str,
    inspection_year: i32,
    health_index: f64,
}

pub fn hi_apply(run: &mut Run) -> Result<(), CliError> {
    run.cfg.require(&[Field::Schema, Field::Dataset, Field::Interval, Field::HiModel])?;
    let ds = run.load_dataset()?;
    let input = run.load_hi_input()?;
    let model = run.hi_model(input, &ds)?;
    let hi = health_index::predict_dataset(&model, &ds)?;
    let rows: Vec<Vec<String>> = ds
        .records()
        .iter()
        .zip(&hi)
        .map(|(r, h)| vec![r.asset_id.clone(), r.inspection_year.to_string(), num(*h)])
        .collect();
    run.out.csv("hi_predictions.csv", &[data::ID_COLUMN, data::YEAR_COLUMN, "health_index"], &rows)?;
    let json: Vec<HiPrediction> = ds
        .records()
        .iter()
        .zip(&hi)
        .map(|(r, h)| HiPrediction { asset_id: &r.asset_id, inspection_year: r.inspection_year, health_index: *h })
        .collect();
    run.out.json("hi_predictions.json", &json)?;
    Ok(())
}

fn trajectories(run: &mut Run, assumptions: &SimulationAssumptions) -> Result<TrajectorySet, CliError> {
    let (ds, spec) = load_for_fit(run)?;
    let hi_input = run.load_hi_input()?;
    let f = fit_all(run, &ds, &spec)?;
    let hi_model = run.hi_model(hi_input, &ds)?;
    let opts = TrajectoryOptions {
        master_seed: run.seed(),
        diversify: run.cfg.generation.diversify,
        replacement_cohort: run.cfg.simulation.replacement_cohort,
        transform: f.transform.clone(),
    };
    let traj = reliability::build_trajectories(
        &f.normalized,
        &f.models,
        Some(&f.age_models),
        &hi_model,
        assumptions.horizon_years,
        &opts,
    )?;
    if let ServedLoad::PerAsset(loads) = &assumptions.served_load_mw {
        let missing: Vec<&str> = traj
            .assets
            .iter()
            .map(|a| a.asset_id.as_str())
            .filter(|id| !loads.contains_key(*id))
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Invalid(format!("no served load for assets: {}", missing.join(", "))));
        }
    }
    run.out.json("trajectories.json", &traj)?;
    let mut rows = Vec::new();
    for a in &traj.assets {
        for (k, (h, s)) in a.hi.iter().zip(&a.source).enumerate() {
            rows.push(vec![
                a.asset_id.clone(),
                (traj.start_year + k as i32).to_string(),
                num(*h),
                format!("{s:?}").to_lowercase(),
            ]);
        }
    }
    run.out.csv("trajectories.csv", &["asset_id", "year", "health_index", "source"], &rows)?;
    Ok(traj)
}

fn cost_cells(c: &CostLine) -> Vec<String> {
    vec![
        num(c.prc.mean),
        num(c.rrc.mean),
        num(c.fc.mean),
        num(c.toc.mean),
        num(c.failures.mean),
        num(c.toc.std_error),
        num(c.failures.std_error),
    ]
}

const COST_HEADER: [&str; 7] = ["prc", "rrc", "fc", "toc", "failures", "toc_std_error", "failures_std_error"];

fn cost_table(report: &CostReport) -> Vec<Vec<String>> {
    report
        .years
        .iter()
        .map(|y| {
            let mut row = vec![y.year.to_string()];
            row.extend(cost_cells(&y.cost));
            row
        })
        .collect()
}

fn simulation_fields(extra: &[Field]) -> Vec<Field> {
    let mut f = vec![
        Field::Schema,
        Field::Dataset,
        Field::Interval,
        Field::ModelSpec,
        Field::MasterSeed,
        Field::Assumptions,
        Field::Iterations,
        Field::LabelsOrHiModel,
    ];
    f.extend_from_slice(extra);
    f
}

pub fn simulate(run: &mut Run) -> Result<(), CliError> {
    run.cfg.require(&simulation_fields(&[]))?;
    let assumptions = run.load_assumptions()?;
    let traj = trajectories(run, &assumptions)?;
    let sim = run.cfg.simulation.clone();
    let report = reliability::simulate(
        &traj,
        &assumptions,
        sim.annual_replacements,
        sim.iterations.expect("required"),
        run.seed(),
    )?;
    let mut header = vec!["year"];
    header.extend(COST_HEADER);
    run.out.csv("cost_by_year.csv", &header, &cost_table(&report))?;
    run.out.json("cost_report.json", &report)?;
    Ok(())
}

pub fn optimize(run: &mut Run) -> Result<(), CliError> {
    run.cfg.require(&simulation_fields(&[Field::Candidates]))?;
    let assumptions = run.load_assumptions()?;
    let traj = trajectories(run, &assumptions)?;
    let sim = run.cfg.simulation.clone();
    let result = reliability::optimize_replacement(
        &traj,
        &assumptions,
        &sim.candidates.expect("required"),
        sim.iterations.expect("required"),
        run.seed(),
    )?;
    let rows: Vec<Vec<String>> = result
        .reports
        .iter()
        .map(|r| {
            let mut row = vec![r.annual_replacements.to_string()];
            row.extend(cost_cells(&r.total));
            row
        })
        .collect();
    let mut header = vec!["annual_replacements"];
    header.extend(COST_HEADER);
    run.out.csv("optimization.csv", &header, &rows)?;
    run.out.json("optimization.json", &result)?;
    Ok(())
}

/// Writes a synthetic cohort with a ready-to-run config.
pub fn write_fixture(out_dir: &Path, assets: usize, seed: u64) -> Result<(), CliError> {
    let fx = fixture::cable_cohort(assets, seed);
    let mut out = Outputs::default();
    out.json("schema.json", fx.dataset.schema())?;
    out.add("inspections.csv", data::to_csv_bytes(&fx.dataset)?);
    let rows: Vec<Vec<String>> = fx
        .labels
        .iter()
        .map(|((id, year), h)| vec![id.clone(), year.to_string(), num(*h)])
        .collect();
    out.csv("labels.csv", &[data::ID_COLUMN, data::YEAR_COLUMN, "health_index"], &rows)?;
    out.json("model_spec.json", &fx.spec)?;
    out.json("assumptions.json", &SimulationAssumptions::with_load(ServedLoad::Uniform(0.5)))?;
    let config = serde_json::json!({
        "schema": "schema.json",
        "dataset": "inspections.csv",
        "interval": fixture::FIXTURE_INTERVAL,
        "model_spec": "model_spec.json",
        "labels": "labels.csv",
        "assumptions": "assumptions.json",
        "master_seed": seed,
        "generation": { "steps": 3 },
        "validation": { "sizes": [50, 100, 250], "seeds": 3 },
        "simulation": {
            "iterations": 500,
            "annual_replacements": 10,
            "candidates": [0, 10, 20, 40, 80]
        }
    });
    out.json("config.json", &config)?;
    out.commit(out_dir)?;
    Ok(())
}
