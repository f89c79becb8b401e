use std::path::Path;
use std::process::{Command, Output};

fn condgen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condgen"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture(dir: &Path, assets: &str) {
    let out = condgen(dir, &["fixture", "--assets", assets, "--seed", "3", "--out", "fx"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn pipeline_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "120");
    let cfg = ["--config", "fx/config.json"];
    let steps: [(&[&str], &[&str]); 6] = [
        (&["fit"], &["models.json", "age_models.json", "direction.json", "fit_report.json", "fit_report.txt"]),
        (&["generate"], &["generated_2022.csv", "generated_2025.csv", "generated_2028.csv"]),
        (&["validate", "--test", "test1"], &["test1.csv", "test1.json"]),
        (&["hi-train"], &["hi_model.json", "hi_train_report.json"]),
        (&["simulate"], &["trajectories.json", "trajectories.csv", "cost_report.json", "cost_by_year.csv"]),
        (&["optimize"], &["optimization.json", "optimization.csv"]),
    ];
    for (k, (cmd, files)) in steps.iter().enumerate() {
        let out_dir = format!("out{k}");
        let mut args = cmd.to_vec();
        args.extend(cfg);
        args.extend(["--out", &out_dir]);
        let out = condgen(dir, &args);
        assert!(out.status.success(), "{cmd:?}: {}", stderr(&out));
        for f in files.iter().chain(&["manifest.json"]) {
            assert!(dir.join(&out_dir).join(f).is_file(), "{cmd:?} did not write {f}");
        }
    }

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("out4/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["master_seed"], 3);
    assert_eq!(manifest["assumptions"]["unit_replacement_cost"], 500.0);
    assert_eq!(manifest["assumptions"]["value_of_lost_energy"], 10_000.0);
    let bands: Vec<(f64, f64)> = manifest["assumptions"]["hi_band_failure_prob"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| (b["upper"].as_f64().unwrap(), b["probability"].as_f64().unwrap()))
        .collect();
    assert_eq!(bands, [(20.0, 0.10), (40.0, 0.05), (60.0, 0.02), (80.0, 0.01), (100.0, 0.005)]);
    assert_eq!(manifest["inputs"]["dataset"]["sha256"].as_str().unwrap().len(), 64);

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("out4/cost_report.json")).unwrap()).unwrap();
    let t = &report["total"];
    let sum = t["prc"]["mean"].as_f64().unwrap() + t["rrc"]["mean"].as_f64().unwrap() + t["fc"]["mean"].as_f64().unwrap();
    assert_eq!(t["toc"]["mean"].as_f64().unwrap(), sum);
}

#[test]
fn generated_values_are_on_the_original_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "60");
    let out = condgen(dir, &["generate", "--config", "fx/config.json", "--out", "gen"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(dir.join("gen/generated_2022.csv")).unwrap();
    let thk = rdr.headers().unwrap().iter().position(|h| h == "thk").unwrap();
    // thickness decreases with age from about 10; flipped values would sit near 0
    let mean: f64 = rdr
        .records()
        .map(|r| r.unwrap()[thk].parse::<f64>().unwrap())
        .sum::<f64>()
        / 60.0;
    assert!(mean > 5.0, "mean thickness {mean}");
}

#[test]
fn missing_fields_are_reported_together() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), r#"{"interval": 3}"#).unwrap();
    let out = condgen(tmp.path(), &["simulate", "--config", "c.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(
        err.contains("missing config fields: schema, dataset, model_spec, master_seed (or --seed), assumptions, simulation.iterations, labels or hi_model"),
        "{err}"
    );
    assert!(!tmp.path().join("condgen-out").exists());
}

#[test]
fn usage_and_help_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(condgen(tmp.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(condgen(tmp.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(condgen(tmp.path(), &["fit"]).status.code(), Some(1));
    assert_eq!(condgen(tmp.path(), &["validate", "--test", "test9", "--config", "x"]).status.code(), Some(1));
}

#[test]
fn single_year_data_needs_age_only_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "40");
    let text = std::fs::read_to_string(dir.join("fx/inspections.csv")).unwrap();
    let mut lines = text.lines();
    let mut single = format!("{}\n", lines.next().unwrap());
    for l in lines.filter(|l| l.contains(",2019,")) {
        single.push_str(l);
        single.push('\n');
    }
    std::fs::write(dir.join("fx/inspections.csv"), single).unwrap();

    let out = condgen(dir, &["fit", "--config", "fx/config.json", "--out", "a"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("age_only"), "{}", stderr(&out));

    let mut cfg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("fx/config.json")).unwrap()).unwrap();
    cfg["generation"]["mode"] = "age_only".into();
    std::fs::write(dir.join("fx/age.json"), cfg.to_string()).unwrap();
    let out = condgen(dir, &["fit", "--config", "fx/age.json", "--out", "b"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "60");
    for out in ["r1", "r2"] {
        let o = condgen(dir, &["generate", "--config", "fx/config.json", "--seed", "99", "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["generated_2022.csv", "generated_2028.csv", "manifest.json"] {
        assert_eq!(std::fs::read(dir.join("r1").join(f)).unwrap(), std::fs::read(dir.join("r2").join(f)).unwrap(), "{f}");
    }
    let o = condgen(dir, &["generate", "--config", "fx/config.json", "--seed", "100", "--out", "r3"]);
    assert!(o.status.success());
    assert_ne!(
        std::fs::read(dir.join("r1/generated_2022.csv")).unwrap(),
        std::fs::read(dir.join("r3/generated_2022.csv")).unwrap()
    );
}

#[test]
fn fit_report_shows_linear_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("schema.json"), r#"{"attributes": [{"name": "c", "kind": "numerical"}]}"#).unwrap();
    let mut csv = String::from("asset_id,inspection_year,age_years,c\n");
    for i in 0..30 {
        let age = 1 + i % 25;
        csv.push_str(&format!("A{i:02},2020,{age},{}\n", 2.0 * age as f64 + 3.0));
    }
    std::fs::write(dir.join("data.csv"), csv).unwrap();
    std::fs::write(
        dir.join("spec.json"),
        r#"{"conditions": [{"target": "c", "degradation": [{"family": "linear", "weight": "free"}]}]}"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("config.json"),
        r#"{"schema": "schema.json", "dataset": "data.csv", "interval": 3, "model_spec": "spec.json"}"#,
    )
    .unwrap();
    let out = condgen(dir, &["fit", "--config", "config.json", "--out", "fit"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.join("fit/fit_report.txt")).unwrap();
    let line = report.lines().find(|l| l.contains("linear(")).expect("linear term in report");
    let field = |key: &str| -> f64 {
        let rest = &line[line.find(key).unwrap() + key.len()..];
        rest[..rest.find([',', ')']).unwrap()].parse().unwrap()
    };
    assert!((field("a = ") - 2.0).abs() < 1e-9, "{line}");
    assert!((field("b = ") - 3.0).abs() < 1e-9, "{line}");

    let first = std::fs::read(dir.join("fit/models.json")).unwrap();
    let out = condgen(dir, &["fit", "--config", "config.json", "--out", "fit2"]);
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(dir.join("fit2/models.json")).unwrap());
}

#[test]
fn unknown_spec_attribute_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "30");
    let spec = std::fs::read_to_string(dir.join("fx/model_spec.json")).unwrap();
    std::fs::write(dir.join("fx/model_spec.json"), spec.replacen("\"pd\"\n", "\"px\"\n", 1)).unwrap();
    let out = condgen(dir, &["fit", "--config", "fx/config.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("px"), "{}", stderr(&out));
    assert!(!dir.join("o").exists());
}
