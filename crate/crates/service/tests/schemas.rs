//! The published JSON Schemas must describe exactly the keys the service
//! emits and accepts.

mod common;

use std::collections::BTreeSet;

use cotagree_core::selfplay::shortcut_batch;
use cotagree_core::Config;
use cotagree_service::{ApiError, ConfigOverrides, ScoreRequest, Scorer};
use serde_json::Value;

fn schema(name: &str) -> Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

/// Every key of `value` is declared, every required key is present, and
/// nested objects are checked the same way.
fn conforms(schema: &Value, value: &Value, at: &str) {
    if let Some(alts) = schema.get("oneOf") {
        let alt = alts.as_array().unwrap().iter().find(|s| s.get("type") != Some(&Value::from("null"))).unwrap();
        if !value.is_null() {
            conforms(alt, value, at);
        }
        return;
    }
    match value {
        Value::Object(map) => {
            if let Some(props) = schema.get("properties") {
                let declared = keys(props);
                for k in map.keys() {
                    assert!(declared.contains(k), "{at}: undeclared key {k}");
                    conforms(&props[k], &map[k], &format!("{at}.{k}"));
                }
                for r in schema["required"].as_array().unwrap() {
                    assert!(map.contains_key(r.as_str().unwrap()), "{at}: missing required {r}");
                }
            }
        }
        Value::Array(items) => {
            if let Some(s) = schema.get("items") {
                items.iter().for_each(|x| conforms(s, x, &format!("{at}[]")));
            }
        }
        _ => {}
    }
}

#[test]
fn request_schema_matches_wire_type() {
    let s = schema("score_request");
    let full = ScoreRequest {
        question: "q".into(),
        rollouts: vec!["r".into()],
        step: Some(3),
        config_overrides: Some(ConfigOverrides {
            alpha: Some(1.0),
            gamma: Some(1.0),
            delta: Some(0.5),
            eta_len: Some(0.1),
            lambda: Some(0.2),
            warmup_steps: Some(1),
            ramp_steps: Some(2),
            lambda_max: Some(0.7),
            embed_seed: Some(4),
        }),
    };
    let v = serde_json::to_value(&full).unwrap();
    conforms(&s, &v, "request");
    assert_eq!(keys(&s["properties"]), keys(&v));
    let ov = s["properties"]["config_overrides"]["oneOf"][1]["properties"].clone();
    assert_eq!(keys(&ov), keys(&v["config_overrides"]));
    for r in common::corpus() {
        conforms(&s, &serde_json::to_value(&r).unwrap(), "request");
    }
}

#[test]
fn response_schemas_match_outputs() {
    let scorer = Scorer::new(Config::default()).unwrap();
    let s = schema("score_response");
    for r in common::corpus() {
        let v = serde_json::to_value(scorer.score(&r).unwrap()).unwrap();
        conforms(&s, &v, "score");
        assert_eq!(keys(&s["properties"]), keys(&v));
    }
    let d = schema("diagnose_response");
    let req = ScoreRequest { question: "q".into(), rollouts: shortcut_batch(1, 0.05).texts, step: None, config_overrides: None };
    let v = serde_json::to_value(scorer.diagnose(&req).unwrap()).unwrap();
    conforms(&d, &v, "diagnose");
    assert_eq!(keys(&d["properties"]), keys(&v));

    let h = schema("healthz");
    let v = serde_json::to_value(scorer.health()).unwrap();
    conforms(&h, &v, "healthz");

    let e = schema("error");
    let kinds: BTreeSet<String> =
        e["properties"]["error"]["enum"].as_array().unwrap().iter().map(|k| k.as_str().unwrap().to_string()).collect();
    for err in [
        ApiError::MalformedBody { field: None, message: "m".into() },
        ApiError::InvalidOverride { field: "f".into(), message: "m".into() },
        ApiError::EmptyRollouts,
        ApiError::NoParsedRollouts(1),
        ApiError::GroupTooSmall,
        ApiError::Internal("x".into()),
    ] {
        let v = serde_json::to_value(err.body()).unwrap();
        conforms(&e, &v, "error");
        assert!(kinds.contains(err.kind()));
    }
}
