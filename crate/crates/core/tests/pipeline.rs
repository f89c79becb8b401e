use std::collections::BTreeMap;

use condgen::combination::{CombinedModel, EstimateOptions, RatingPath};
use condgen::correlation::CorrelationModel;
use condgen::data::{normalize_direction, read_csv, to_csv_bytes};
use condgen::degradation::DegradationModel;
use condgen::fixture;
use condgen::generation::{self, FitSetOptions, ModelSet};
use condgen::health_index::{self, HiConfig};
use condgen::reliability::{
    build_trajectories, simulate, HiSource, ServedLoad, SimulationAssumptions, TrajectoryOptions,
};

#[test]
fn csv_round_trip_is_exact() {
    let fx = fixture::cable_cohort(60, 5);
    let bytes = to_csv_bytes(&fx.dataset).unwrap();
    let back = read_csv(bytes.as_slice(), fx.dataset.schema(), fixture::FIXTURE_INTERVAL).unwrap();
    assert_eq!(back, fx.dataset);
    assert_eq!(to_csv_bytes(&back).unwrap(), bytes);
}

#[test]
fn fixture_to_cost_report() {
    let fx = fixture::cable_cohort(300, 11);
    let (normalized, transform) = normalize_direction(&fx.dataset).unwrap();
    let (models, diags) = generation::fit_models(&fx.spec, &normalized, FitSetOptions::default()).unwrap();
    assert!(diags.values().all(|d| !d.correlation_disabled));
    let age_opts = FitSetOptions {
        estimate: EstimateOptions { age_only: true, ..Default::default() },
        ..Default::default()
    };
    let (age_models, _) = generation::fit_models(&fx.spec, &normalized, age_opts).unwrap();
    assert!(!age_models.needs_previous());

    let samples = health_index::labeled_samples(&fx.dataset, &fx.labels).unwrap();
    let hi_model = health_index::train(&samples, &HiConfig::default()).unwrap();

    let opts = TrajectoryOptions { master_seed: 3, transform, ..Default::default() };
    let traj = build_trajectories(&normalized, &models, Some(&age_models), &hi_model, 10, &opts).unwrap();
    assert_eq!(traj.start_year, 2019);
    assert_eq!(traj.assets.len(), 300);
    assert_eq!(traj.replacement_curve[0], 100.0);
    for a in &traj.assets {
        assert_eq!(a.hi.len(), 10);
        for (k, s) in a.source.iter().enumerate() {
            let expected = match k {
                0 => HiSource::Observed,
                3 | 6 | 9 => HiSource::Generated,
                _ => HiSource::Interpolated,
            };
            assert_eq!(*s, expected);
        }
        // interior years lie on the chord between inspection years
        let chord = a.hi[3] + (a.hi[6] - a.hi[3]) / 3.0;
        assert!((a.hi[4] - chord).abs() < 1e-9);
    }
    // the fleet ages: mean health at the horizon is below the start
    let mean = |k: usize| traj.assets.iter().map(|a| a.hi[k]).sum::<f64>() / 300.0;
    assert!(mean(9) < mean(0));

    let again = build_trajectories(&normalized, &models, Some(&age_models), &hi_model, 10, &opts).unwrap();
    assert_eq!(again, traj);

    let assumptions = SimulationAssumptions::with_load(ServedLoad::Uniform(0.5));
    let report = simulate(&traj, &assumptions, 5, 200, 9).unwrap();
    assert_eq!(report.years.len(), 10);
    assert_eq!(report.years[0].year, 2019);
    for line in report.years.iter().map(|y| &y.cost).chain([&report.total]) {
        assert_eq!(line.toc.mean, line.prc.mean + line.rrc.mean + line.fc.mean);
    }
    assert_eq!(report.total.prc.mean, 5.0 * 500.0 * 10.0);
}

#[test]
fn frozen_world_gives_flat_trajectories() {
    let fx = fixture::cable_cohort(40, 2);
    let (normalized, transform) = normalize_direction(&fx.dataset).unwrap();
    let mut models = ModelSet::default();
    for name in ["pd", "tds", "nc", "thk", "vc"] {
        let m = CombinedModel::new(name)
            .with_degradation(DegradationModel::linear(1.0, 0.0), 0.0)
            .with_correlation(CorrelationModel::persistence(name), 1.0);
        models.combined.insert(name.to_string(), m);
    }
    models.rating_paths.insert("vc".into(), RatingPath::Converted);
    let samples = health_index::labeled_samples(&fx.dataset, &fx.labels).unwrap();
    let hi_model = health_index::train(&samples, &HiConfig::default()).unwrap();
    let opts = TrajectoryOptions { diversify: false, transform, ..Default::default() };
    let traj = build_trajectories(&normalized, &models, None, &hi_model, 10, &opts).unwrap();
    for a in &traj.assets {
        assert!(a.hi.iter().all(|h| *h == a.hi[0]), "{:?}", a.hi);
    }
    assert!(traj.replacement_curve.iter().all(|h| *h == 100.0));
}

#[test]
fn short_horizon_rejected() {
    let fx = fixture::cable_cohort(12, 2);
    let (normalized, _) = normalize_direction(&fx.dataset).unwrap();
    let (models, _) = generation::fit_models(&fx.spec, &normalized, FitSetOptions::default()).unwrap();
    let samples = health_index::labeled_samples(&fx.dataset, &fx.labels).unwrap();
    let hi_model = health_index::train(&samples, &HiConfig::default()).unwrap();
    let r = build_trajectories(&normalized, &models, None, &hi_model, 2, &TrajectoryOptions::default());
    assert!(r.is_err());
    let labels: BTreeMap<(String, i32), f64> = BTreeMap::new();
    assert!(health_index::labeled_samples(&fx.dataset, &labels).is_err());
}
