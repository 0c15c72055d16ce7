use kahler_lab::jobs::{self, JobConfig};
use proptest::prelude::*;
use serde_json::{json, Map, Value};

fn config(v: &Value) -> JobConfig {
    jobs::parse_config(&v.to_string()).unwrap()
}

/// Same object with keys inserted in reverse order.
fn reversed(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut out = Map::new();
            for (k, x) in m.iter().rev() {
                out.insert(k.clone(), reversed(x));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.iter().map(reversed).collect()),
        x => x.clone(),
    }
}

proptest! {
    #[test]
    fn hash_ignores_presentation(beta in 1u32..=4, area in 1u32..50, seed in any::<u64>(), dir in "[a-z]{1,8}") {
        let b = beta as f64 / 4.0;
        let plain = json!({"command": "ke", "seed": seed,
            "inputs": {"beta0": b, "beta_inf": b, "area": area, "options": {"nodes": 256}}});
        let floats = json!({"command": "ke", "seed": seed, "output_dir": dir,
            "inputs": {"beta0": b, "beta_inf": b, "area": area as f64, "options": {"nodes": 256.0}}});
        let h = jobs::config_hash(&config(&plain));
        prop_assert_eq!(&h, &jobs::config_hash(&config(&floats)));
        prop_assert_eq!(&h, &jobs::config_hash(&config(&reversed(&plain))));
        prop_assert_eq!(h.len(), 64);
    }

    #[test]
    fn hash_separates_different_jobs(a in 1i64..100, b in 1i64..100, s in any::<u64>()) {
        prop_assume!(a != b);
        let at = |x: i64, seed: u64| config(&json!({"command": "cm", "seed": seed,
            "inputs": {"data": {"relcanonical_term": x.to_string(), "polarization_term": "1", "n": 1, "eta": "2"}}}));
        prop_assert_ne!(jobs::config_hash(&at(a, s)), jobs::config_hash(&at(b, s)));
        prop_assert_ne!(jobs::config_hash(&at(a, s)), jobs::config_hash(&at(a, s.wrapping_add(1))));
    }
}

#[test]
fn unknown_fields_and_tolerances_are_rejected() {
    assert!(jobs::parse_config(r#"{"command": "cm", "inputs": {}, "extra": 1}"#).is_err());
    assert!(jobs::parse_config(r#"{"command": "nope"}"#).is_err());
    let cfg = config(&json!({"command": "ke", "inputs": {"beta0": 1, "beta_inf": 1}, "tolerances": {"newtn": 1e-9}}));
    let r = jobs::run(&cfg, None, kahler_lab::exec::Exec::Sequential);
    assert_eq!(r.exit_code, jobs::EXIT_VALIDATION);
}
