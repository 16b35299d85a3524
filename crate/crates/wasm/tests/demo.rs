use ringsched_wasm::{compare_policies_json, rar_curve_json, slot_vs_oracle_json};
use serde_json::Value;

const PARAMS: &str = r#"{"gradient_elems":1e6,"link_rate":1e9,"reduce_rate":1e10,"forward_per_sample":0.001,"batch_size":32,"backward":0.05,"comm_latency":0.001}"#;

#[test]
fn curve_rises_to_its_asymptote() {
    let v: Value = serde_json::from_str(&rar_curve_json(PARAMS, 8).unwrap()).unwrap();
    let secs: Vec<f64> = v["seconds"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(secs.len(), 8);
    assert!(secs.windows(2).all(|w| w[0] <= w[1]));
    assert!(secs[7] <= v["asymptote"].as_f64().unwrap());
    // w = 1: no ring traffic, 0.001 * 32 + 0.05 + 0.001
    assert!((secs[0] - 0.083).abs() < 1e-12);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(rar_curve_json("{}", 4).is_err());
    assert!(rar_curve_json(PARAMS, 0).is_err());
    assert!(compare_policies_json("servers=0", "", 5, 1).is_err());
    assert!(compare_policies_json("", "", 0, 1).is_err());
}

#[test]
fn all_policies_reported() {
    let v: Value = serde_json::from_str(&compare_policies_json("servers=4", "jobs=5,utility=sqrt", 4, 2).unwrap()).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["policy"].as_str().unwrap()).collect();
    assert_eq!(names, ["gadget", "fifo", "drf", "las"]);
    for r in v.as_array().unwrap() {
        let by_slot = r["utility_by_slot"].as_array().unwrap();
        assert_eq!(by_slot.len(), 4);
        assert_eq!(by_slot[3].as_f64(), r["utility"].as_f64());
    }
}

#[test]
fn oracle_bounds_gadget_within_factor_three() {
    for seed in 1..=3 {
        let v: Value = serde_json::from_str(&slot_vs_oracle_json(seed).unwrap()).unwrap();
        let g = v["gadget_utility"].as_f64().unwrap();
        let o = v["oracle_utility"].as_f64().unwrap();
        assert!(o > 0.0 && g >= o / 3.0, "seed {seed}: {g} vs {o}");
    }
}
