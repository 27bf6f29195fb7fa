use hdqrng_wasm::{dimension_scan, fringe_scan, throughput_curve, MAX_LOG2_ND};
use serde_json::Value;

fn parse(out: Result<String, String>) -> Value {
    serde_json::from_str(&out.expect("export succeeds")).expect("valid json")
}

#[test]
fn fringe_fit_recovers_visibility() {
    let v = parse(fringe_scan(0.95, 4e5, 8, 0.5, 3));
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 8);
    let fit = &v["fit"];
    let vis = fit["visibility"].as_f64().unwrap();
    let err = fit["stderr"].as_f64().unwrap();
    assert!(err > 0.0 && err < 0.01);
    // Accidentals pull the raw visibility slightly below the true value.
    assert!(vis < 0.95 + 4.0 * err && vis > 0.93, "V = {vis} +- {err}");

    assert_eq!(fringe_scan(0.95, 4e5, 8, 0.5, 3), fringe_scan(0.95, 4e5, 8, 0.5, 3));
}

#[test]
fn fringe_rejects_bad_parameters() {
    assert!(fringe_scan(1.2, 4e5, 8, 0.5, 1).is_err());
    assert!(fringe_scan(0.9, 4e5, 3, 0.5, 1).is_err());
    assert!(fringe_scan(0.9, -1.0, 8, 0.5, 1).is_err());
    assert!(fringe_scan(0.9, 4e5, 8, 0.0, 1).is_err());
}

#[test]
fn throughput_rises_towards_its_asymptote() {
    let v = parse(throughput_curve(0.985, 2048, 1.5e6, 60.0, 60));
    let asymptote = v["asymptote_bps"].as_f64().unwrap();
    let tp: Vec<f64> = v["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["throughput_bps"].as_f64().unwrap())
        .collect();
    assert_eq!(tp.len(), 60);
    assert!(tp.windows(2).all(|w| w[1] >= w[0]));
    assert!(tp[59] < asymptote && tp[59] > 0.5 * asymptote);

    let low = parse(throughput_curve(0.98, 2048, 1.5e6, 60.0, 60));
    assert!(low["asymptote_bps"].as_f64().unwrap() < asymptote);

    assert!(throughput_curve(0.985, 2048, 0.0, 60.0, 10).is_err());
    assert!(throughput_curve(0.985, 2048, 1e6, 60.0, 0).is_err());
    assert!(throughput_curve(0.985, 3000, 1e6, 60.0, 10).is_err());
    assert!(throughput_curve(0.4, 2048, 1e6, 60.0, 10).is_err());
}

#[test]
fn dimension_scan_has_an_interior_optimum() {
    let v = parse(dimension_scan(0.985, 9e7, 250.0));
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), MAX_LOG2_ND as usize);
    let best = v["best_n_d"].as_u64().unwrap();
    // Too few bins waste entropy; too many leave the finite-size term dominant.
    assert!(best > 2 && best < 1 << MAX_LOG2_ND, "best N_d {best}");
    let best_h = v["best_h_min"].as_f64().unwrap();
    for p in points {
        if let Some(h) = p["h_min"].as_f64() {
            assert!(h <= best_h || !p["allowed"].as_bool().unwrap());
            assert!(h <= p["h_min_asymptotic"].as_f64().unwrap());
        }
    }

    // More data pushes the optimum to larger alphabets.
    let more = parse(dimension_scan(0.985, 9e9, 250.0));
    assert!(more["best_n_d"].as_u64().unwrap() >= best);

    assert!(dimension_scan(0.985, 0.0, 250.0).is_err());
    assert!(dimension_scan(0.985, 1e8, 0.0).is_err());
}
