// The page reads these JSON fields; renaming one breaks it silently.
use serde_json::Value;

fn keys(v: &Value) -> Vec<&str> {
    let mut k: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    k.sort_unstable();
    k
}

#[test]
fn scan_fields() {
    let v = serde_json::to_value(dpdr_web::scan("VI", 200, 5, 2, "sir", 0.0, 9).unwrap()).unwrap();
    assert_eq!(keys(&v), ["h", "points"]);
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 9);
    assert_eq!(keys(&pts[0]), ["d_true", "r2", "singular_values", "w"]);
    assert_eq!(pts[0]["w"].as_array().unwrap().len(), 2);
}

#[test]
fn ladle_fields() {
    let v = serde_json::to_value(dpdr_web::ladle("III", 200, 5, 2, "save", 0.0, 0.5, 20).unwrap()).unwrap();
    for k in ["basis", "d_hat", "d_true", "f", "g", "ks", "phi", "r2", "true_basis"] {
        assert!(v.get(k).is_some(), "{k}");
    }
}

#[test]
fn bandwidth_fields() {
    let v = serde_json::to_value(dpdr_web::bandwidth("I", 150, 5, 2, "sir").unwrap()).unwrap();
    for k in ["grid", "h_opt", "h_rot", "per_slice_cv"] {
        assert!(v.get(k).is_some(), "{k}");
    }
    assert_eq!(v["per_slice_cv"].as_array().unwrap().len(), 5);
}
