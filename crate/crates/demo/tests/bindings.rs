use serde_json::Value;

fn config() -> String {
    std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/quench_n100.cfg"
    ))
    .unwrap()
}

#[test]
fn negativity_trace_grows_from_the_vacuum() {
    let out =
        ionring_demo::negativity(&config(), 0.0).unwrap_or_else(|_| panic!("negativity failed"));
    let v: Value = serde_json::from_str(&out).unwrap();
    let en: Vec<f64> = v["negativity"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(en.len() > 5);
    assert!(en[en.len() - 1] > en[0]);
}

#[test]
fn post_quench_profile_has_a_black_hole_horizon() {
    let out = ionring_demo::profile(&config(), 64).unwrap_or_else(|_| panic!("profile failed"));
    let v: Value = serde_json::from_str(&out).unwrap();
    let kinds: Vec<&str> = v["horizons"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["horizon"]["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["black-hole", "white-hole"]);
}
