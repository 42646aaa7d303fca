use antfdtd::config::RunConfig;
use serde_json::Value;

fn schema() -> Value {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/config.schema.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Every key present in `v` must be declared by the (possibly `oneOf`) schema node.
fn covered(schema: &Value, v: &Value, path: &str) -> Vec<String> {
    let mut missing = Vec::new();
    if let Some(alts) = schema.get("oneOf").and_then(Value::as_array) {
        let best = alts.iter().map(|a| covered(a, v, path)).min_by_key(Vec::len).unwrap_or_default();
        return best;
    }
    if let Value::Object(map) = v {
        let props = schema.get("properties").and_then(Value::as_object);
        assert_eq!(schema.get("additionalProperties"), Some(&Value::Bool(false)), "{path} allows unknown keys");
        for (k, child) in map {
            match props.and_then(|p| p.get(k)) {
                Some(s) => missing.extend(covered(s, child, &format!("{path}.{k}"))),
                None => missing.push(format!("{path}.{k}")),
            }
        }
    }
    missing
}

#[test]
fn schema_declares_every_default_key() {
    let mut c = RunConfig::default();
    c.solver.feed_load_ohms = Some(50.0);
    c.train.n_train = Some(10);
    c.dataset.ranges = Some(vec![[18.0, 42.0], [7.2, 16.8]]);
    let v = serde_json::to_value(&c).unwrap();
    assert_eq!(covered(&schema(), &v, ""), Vec::<String>::new());
}

#[test]
fn every_window_mode_is_declared() {
    for w in [r#"{ mode = "full" }"#, r#"{ mode = "steps", steps = 10 }"#] {
        let c = RunConfig::from_toml(&format!("[solver]\nwindow = {w}\n")).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(covered(&schema(), &v, ""), Vec::<String>::new());
    }
}

#[test]
fn default_config_round_trips_through_toml() {
    let c = RunConfig::default();
    let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn shipped_configs_load_and_are_declared() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = RunConfig::load(&path).unwrap();
            c.validate().unwrap();
            let text = std::fs::read_to_string(&path).unwrap();
            let raw: toml::Value = toml::from_str(&text).unwrap();
            let v = serde_json::to_value(raw).unwrap();
            assert_eq!(covered(&schema(), &v, ""), Vec::<String>::new(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
