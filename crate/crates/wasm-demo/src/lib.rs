//! Browser bindings for three explorations of the QRNG model: a simulated
//! Franson fringe with its visibility fit, certified throughput against
//! collection time, and min-entropy against alphabet size.
//!
//! Every export returns a JSON string, or an error message on bad input.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use hdqrng::config::RunConfig;
use hdqrng::entropy::{corrected_bits, hmin_asymptotic, hmin_for, EntropyInputs};
use hdqrng::pipeline::sweep_bits;
use hdqrng::sim::franson::even_phases;
use hdqrng::sim::{estimate_visibility, scan_fringe, FransonModel, FringePoint, VisibilityEstimate};
use hdqrng::Error;

/// Largest alphabet offered by the dimension scan.
pub const MAX_LOG2_ND: u32 = 14;

type Out = Result<String, String>;

fn to_json<T: Serialize>(value: &T) -> Out {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn msg(e: Error) -> String {
    e.to_string()
}

fn inputs(cfg: &RunConfig, v0: f64, n_d: u32, n_t: u64) -> Result<EntropyInputs, String> {
    let inputs = EntropyInputs {
        v0,
        n_d,
        ..cfg.entropy_inputs(n_t)
    };
    inputs.validate().map_err(msg)?;
    Ok(inputs)
}

#[derive(Serialize)]
struct FringeScan {
    points: Vec<FringePoint>,
    fit: VisibilityEstimate,
}

/// Simulates a fringe scan at laboratory detector settings and fits it.
#[wasm_bindgen]
pub fn fringe_scan(v_true: f64, pair_rate: f64, points: usize, duration_per_point: f64, seed: u64) -> Out {
    let cfg = RunConfig::default();
    if !(4..=64).contains(&points) {
        return Err(format!("points must lie in 4..=64, got {points}"));
    }
    let franson = FransonModel {
        v_true,
        ..cfg.franson.model()
    };
    franson.validate().map_err(msg)?;
    let source = hdqrng::sim::SourceModel {
        pair_rate,
        ..cfg.source
    };
    let scan = scan_fringe(
        &source,
        &franson,
        (&cfg.detector.model, &cfg.idler_detector),
        &even_phases(points),
        duration_per_point,
        seed,
    )
    .map_err(msg)?;
    let fit = estimate_visibility(&scan).map_err(msg)?;
    to_json(&FringeScan { points: scan, fit })
}

#[derive(Serialize)]
struct CurvePoint {
    duration_s: f64,
    n_t: u64,
    bits_per_sample: f64,
    throughput_bps: f64,
}

#[derive(Serialize)]
struct Curve {
    asymptote_bits: f64,
    asymptote_bps: f64,
    points: Vec<CurvePoint>,
}

/// Certified bits per sample and throughput for `steps` collection times
/// spread evenly up to `max_duration` seconds.
#[wasm_bindgen]
pub fn throughput_curve(v0: f64, n_d: u32, symbol_rate: f64, max_duration: f64, steps: usize) -> Out {
    let cfg = RunConfig::default();
    if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
        return Err(format!("symbol rate must be positive, got {symbol_rate}"));
    }
    if !(max_duration.is_finite() && max_duration > 0.0) || steps == 0 || steps > 10_000 {
        return Err("need a positive duration and 1..=10000 steps".into());
    }
    if !n_d.is_power_of_two() || n_d < 2 {
        return Err(format!("alphabet size must be a power of two >= 2, got {n_d}"));
    }
    let ratio = cfg.accidentals.ratio().map_err(msg)?;
    let base = inputs(&cfg, v0, n_d, 1)?;
    let asymptote_bits = corrected_bits(hmin_asymptotic(&base), ratio);
    let mut points = Vec::with_capacity(steps);
    for i in 1..=steps {
        let duration_s = max_duration * i as f64 / steps as f64;
        let n_t = (symbol_rate * duration_s).round() as u64;
        let bits = if n_t == 0 {
            0.0
        } else {
            sweep_bits(&EntropyInputs { n_t, ..base }, ratio).map_err(msg)?
        };
        points.push(CurvePoint {
            duration_s,
            n_t,
            bits_per_sample: bits,
            throughput_bps: bits * symbol_rate,
        });
    }
    to_json(&Curve {
        asymptote_bits,
        asymptote_bps: asymptote_bits * symbol_rate,
        points,
    })
}

#[derive(Serialize)]
struct DimensionPoint {
    n_d: u32,
    /// Finite-size min-entropy per symbol, `None` where the bound is undefined.
    h_min: Option<f64>,
    h_min_asymptotic: f64,
    /// Frame fits inside the pump coherence time.
    allowed: bool,
}

#[derive(Serialize)]
struct DimensionScan {
    best_n_d: Option<u32>,
    best_h_min: Option<f64>,
    points: Vec<DimensionPoint>,
}

/// Min-entropy per symbol for `N_d = 2 .. 2^14` at `n_t` framed detections.
#[wasm_bindgen]
pub fn dimension_scan(v0: f64, n_t: f64, delta_ps: f64) -> Out {
    let cfg = RunConfig::default();
    if !(n_t.is_finite() && n_t >= 1.0) {
        return Err(format!("n_t must be at least 1, got {n_t}"));
    }
    if !(delta_ps.is_finite() && delta_ps > 0.0) {
        return Err(format!("bin width must be positive, got {delta_ps}"));
    }
    let mut points = Vec::new();
    for k in 1..=MAX_LOG2_ND {
        let n_d = 1u32 << k;
        let inp = EntropyInputs {
            delta_ps,
            ..inputs(&cfg, v0, n_d, n_t as u64)?
        };
        let h_min = match hmin_for(&inp) {
            Ok(h) => Some(h),
            Err(Error::FiniteSizeBoundInvalid { .. }) => None,
            Err(e) => return Err(msg(e)),
        };
        points.push(DimensionPoint {
            n_d,
            h_min,
            h_min_asymptotic: hmin_asymptotic(&inp),
            allowed: n_d as f64 * delta_ps * 1e-12 < cfg.source.sigma_coh,
        });
    }
    let best = points
        .iter()
        .filter(|p| p.allowed)
        .filter_map(|p| p.h_min.map(|h| (p.n_d, h)))
        .fold(None, |acc: Option<(u32, f64)>, (n, h)| match acc {
            Some((_, b)) if b >= h => acc,
            _ => Some((n, h)),
        });
    to_json(&DimensionScan {
        best_n_d: best.map(|b| b.0),
        best_h_min: best.map(|b| b.1),
        points,
    })
}
