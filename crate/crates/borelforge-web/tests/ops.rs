use borelforge_web::{filtration_json, flat_chain_json, realize_jet_json};

#[test]
fn realized_jet_matches_its_derivatives() {
    let v = realize_jet_json("1/2", "1, -2, 6, 0, 24", "0", "1").unwrap();
    assert!(v["max_rel_error"].as_f64().unwrap() <= 1e-9, "{}", v["max_rel_error"]);
    let got: Vec<f64> = serde_json::from_value(v["derivatives"].clone()).unwrap();
    assert_eq!(got.len(), 5);
    assert_eq!(v["xs"].as_array().unwrap().len(), 601);
}

#[test]
fn bad_input_is_an_error_not_a_panic() {
    assert!(realize_jet_json("1/2", "1, x", "0", "1").is_err());
    assert!(realize_jet_json("1/2", "", "0", "1").is_err());
    assert!(realize_jet_json("1/2", "1", "1", "0").is_err());
    assert!(filtration_json("cubic", "0", "1", "0", 5).is_err());
    assert!(flat_chain_json(0).is_err());
}

#[test]
fn filtration_verdicts() {
    let h = filtration_json("harmonic", "0", "1", "0", 8).unwrap();
    assert_eq!(h["verdict"]["verdict"], "FORM-FAIL");
    let w = h["witness"].as_array().expect("witness for a failing filtration");
    assert_eq!(w.len(), 8);
    let mut fact = 1u64;
    for (i, t) in w.iter().enumerate() {
        fact *= i as u64 + 1;
        assert_eq!(t["partial_sum"], fact.to_string(), "{t}");
    }
    let p = filtration_json("power", "-1", "1", "0", 8).unwrap();
    assert_eq!(p["verdict"]["verdict"], "FORM-OK");
    assert!(p["witness"].is_null());
}

#[test]
fn flat_chain_is_positive_off_its_zero_set() {
    let v = flat_chain_json(4).unwrap();
    let xs = v["xs"].as_array().unwrap();
    let lg = v["log10"].as_array().unwrap();
    for (x, l) in xs.iter().zip(lg) {
        let x = x.as_f64().unwrap();
        let on_z = x == 0.0 || (1..=4).any(|n| (x - 1.0 / n as f64).abs() < 1e-12);
        if !on_z {
            assert!(l.as_f64().is_some(), "not finite at {x}: {l}");
        }
    }
    assert_eq!(v["infinite_at_0"], true);
    for o in v["orders"].as_array().unwrap() {
        let d = o["depth"].as_f64().unwrap();
        let ord = o["order"].as_f64().unwrap_or(f64::INFINITY);
        assert!(ord >= d - 0.1, "{o}");
    }
}
