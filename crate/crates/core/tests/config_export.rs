//! Configuration round trips, hashing, experiment lookup and table export.

use proptest::prelude::*;
use serde_json::Value;
use vlcsim::config::{load_config, save_config, ConfigError, SimulationConfig};
use vlcsim::experiment::{run_experiment, ExperimentError};
use vlcsim::table::{export, Cell, Format, Provenance, ResultTable, RESULT_TABLE_SCHEMA};

fn provenance(config: &SimulationConfig) -> Provenance {
    Provenance {
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: "rms-patterns".into(),
        seed: config.ensemble.seed,
        config_hash: config.hash(),
    }
}

/// Paths to every numeric leaf of a JSON value.
fn numeric_leaves(v: &Value, path: Vec<String>, out: &mut Vec<Vec<String>>) {
    match v {
        Value::Number(_) => out.push(path),
        Value::Object(m) => {
            for (k, x) in m {
                let mut p = path.clone();
                p.push(k.clone());
                numeric_leaves(x, p, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                let mut p = path.clone();
                p.push(i.to_string());
                numeric_leaves(x, p, out);
            }
        }
        _ => {}
    }
}

fn leaf_mut<'a>(v: &'a mut Value, path: &[String]) -> &'a mut Value {
    path.iter().fold(v, |v, k| match v {
        Value::Array(a) => &mut a[k.parse::<usize>().unwrap()],
        other => &mut other[k.as_str()],
    })
}

#[test]
fn every_numeric_field_changes_the_hash() {
    let base = SimulationConfig::default();
    let value = serde_json::to_value(&base).unwrap();
    let mut leaves = Vec::new();
    numeric_leaves(&value, Vec::new(), &mut leaves);
    assert!(leaves.len() > 50);
    for path in leaves {
        let mut v = value.clone();
        let leaf = leaf_mut(&mut v, &path);
        *leaf = match leaf.as_u64() {
            Some(n) => Value::from(n + 1),
            None => Value::from(leaf.as_f64().unwrap() + 0.5),
        };
        let changed: SimulationConfig = serde_json::from_value(v).unwrap();
        assert_ne!(changed.hash(), base.hash(), "field {}", path.join("."));
    }
    assert_eq!(SimulationConfig::default().hash(), base.hash());
}

#[test]
fn unknown_experiment_lists_known_names() {
    let err = run_experiment(&SimulationConfig::default(), "no-such-thing").unwrap_err();
    assert!(matches!(err, ExperimentError::UnknownExperiment(_)));
    assert!(err.to_string().contains("acf-time"));
}

#[test]
fn invalid_values_are_rejected() {
    let err = SimulationConfig::from_toml_str("[receiver]\nfov_deg = 120.0\n").unwrap_err();
    assert!(matches!(err, ConfigError::Validation(_)));
    let err = SimulationConfig::from_toml_str("[ensemble]\nsize = 0\n").unwrap_err();
    assert!(matches!(err, ConfigError::Validation(_)));
    let err = SimulationConfig::from_toml_str("[receiver\n").unwrap_err();
    assert!(matches!(err, ConfigError::Parse(_)));
}

#[test]
fn pattern_file_is_loaded() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = dir.path().join("pattern.csv");
    let mut text = String::from("elevation_deg,azimuth_deg,intensity_cd\n");
    // cosine-shaped beam on the forward hemisphere
    for el in (-90..=90).step_by(10) {
        for az in (-90..=90).step_by(10) {
            let (e, a) = ((el as f64).to_radians(), (az as f64).to_radians());
            text.push_str(&format!("{el},{az},{}\n", 100.0 * (e.cos() * a.cos()).max(0.0)));
        }
    }
    std::fs::write(&pattern, text).unwrap();
    let mut c = SimulationConfig::default();
    c.array.pattern_file = Some(pattern);
    let path = dir.path().join("c.toml");
    save_config(&c, &path).unwrap();
    let loaded = load_config(&path).unwrap();
    assert_eq!(loaded, c);
    let params = loaded.scene_params().unwrap();
    assert!(params.array.pattern().intensity(0.0, 0.0) > 0.0);
}

#[test]
fn json_export_matches_schema() {
    let schema: Value = serde_json::from_str(RESULT_TABLE_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let mut c = SimulationConfig::default();
    c.ensemble.size = 4;
    c.clusters.scatterers_per_cluster = 10;
    let tables = run_experiment(&c, "rms-patterns").unwrap();
    assert!(!tables.is_empty());
    for t in &tables {
        let doc = t.to_json_value(&provenance(&c));
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{}: {errors:?}", t.name);
    }
    let mut bad = tables[0].to_json_value(&provenance(&c));
    bad["provenance"]["config_hash"] = Value::from("not-a-hash");
    assert!(!validator.is_valid(&bad));
}

#[test]
fn csv_export_reads_back() {
    let c = SimulationConfig::default();
    let mut t = ResultTable::new("mixed", &[("label", ""), ("count", "1"), ("value", "s")]);
    t.push(vec!["a, \"quoted\"".into(), 3usize.into(), 1.25e-9.into()]);
    t.push(vec!["b".into(), 0usize.into(), f64::INFINITY.into()]);
    t.push(vec!["c".into(), 7usize.into(), (0.1 + 0.2).into()]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.csv");
    export(&t, &provenance(&c), &path, Format::Csv).unwrap();

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["label", "count [1]", "value [s]"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), t.rows.len());
    for (got, want) in rows.iter().zip(&t.rows) {
        assert_eq!(got.len(), want.len());
        match (&want[0], &want[2]) {
            (Cell::Text(s), Cell::Float(v)) => {
                assert_eq!(&got[0], s);
                assert_eq!(got[2].parse::<f64>().unwrap(), *v);
            }
            _ => unreachable!(),
        }
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains(&format!("# config_hash: {}", c.hash())));
}

fn config_strategy() -> impl Strategy<Value = SimulationConfig> {
    (
        (1usize..8, 1usize..8, 0.05..2.0f64, 0.05..2.0f64),
        (0.5..6.0f64, 1.0..90.0f64, 0.0..360.0f64, 1usize..4),
        (1.0..100.0f64, 1.0..10.0f64, 0.0..=1.0f64, 1usize..200),
        (1usize..1000, any::<u64>()),
    )
        .prop_map(|(a, r, e, n)| {
            let mut c = SimulationConfig::default();
            (c.array.rows, c.array.cols, c.array.spacing_h_m, c.array.spacing_v_m) = a;
            (c.receiver.distance_m, c.receiver.fov_deg, c.receiver.azimuth_deg, c.receiver.pd_count) = r;
            (c.evolution.birth_rate_per_m, c.evolution.death_rate_per_m, c.clusters.sb_ratio) = (e.0, e.1, e.2);
            c.clusters.scatterers_per_cluster = e.3;
            (c.ensemble.size, c.ensemble.seed) = n;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_then_load_is_identity(c in config_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        save_config(&c, &path).unwrap();
        let back = load_config(&path).unwrap();
        prop_assert_eq!(back.hash(), c.hash());
        prop_assert_eq!(back, c);
    }
}
