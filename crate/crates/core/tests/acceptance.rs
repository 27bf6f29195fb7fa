//! Acceptance criteria, one line per criterion. Exits nonzero if any fail.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hdqrng::config::RunConfig;
use hdqrng::entropy::{
    accidental_ratio, hmin_for, l1_distance_bound, pump_bandwidth_w0, throughput, time_variance_bound,
    EntropyInputs,
};
use hdqrng::extractor::{
    extract_block, extract_block_naive, plan_extraction, ExtractionPlan, ToeplitzHasher,
};
use hdqrng::pipeline::{calibrate_symbol_rate, cmd_pipeline, cmd_sweep, EXIT_ABORT};
use hdqrng::sim::franson::{estimate_visibility, even_phases, scan_fringe};
use hdqrng::sim::SourceModel;
use hdqrng::stattests::{run_battery, BatteryConfig};
use hdqrng::BitString;

type Check = Result<String, String>;

fn ensure(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> BitString {
    let words = (0..len.div_ceil(64)).map(|_| rng.gen()).collect();
    BitString::from_words(words, len)
}

fn paper_inputs(n_t: u64) -> EntropyInputs {
    EntropyInputs {
        sigma_coh: 2.2e-6,
        sigma_cor: 2e-12,
        delta_ps: 250.0,
        delta_t_ps: 3200.0,
        v0: 0.985,
        n_d: 2048,
        q: 0.9,
        n_t,
        p_alpha: 0.0,
        epsilon1: 1e-10,
    }
}

fn c1_accidental_ratio() -> Check {
    let r = accidental_ratio(420e3, 850e3, 0.494, 0.503).map_err(|e| e.to_string())?;
    ensure((r - 0.018).abs() <= 0.001, format!("ratio = {r:.6}"))
}

fn c2_extraction_size() -> Check {
    let m = plan_extraction(4096, 5.9, 11).map_err(|e| e.to_string())?;
    ensure(m == 2196, format!("m = {m}"))
}

fn c3_throughput_identity() -> Check {
    let t = throughput(5.9, 4.1e6);
    ensure((t - 24.2e6).abs() <= 0.1e6, format!("{:.3} Mbit/s", t / 1e6))
}

fn c4_entropy_band() -> Check {
    // Framed detections of a 60 s run at laboratory rates.
    let cfg = RunConfig::default();
    let rate = calibrate_symbol_rate(&cfg).map_err(|e| e.to_string())?;
    let n_t = (rate * 60.0).round() as u64;
    let h = hmin_for(&paper_inputs(n_t)).map_err(|e| e.to_string())?;
    ensure(
        (5.0..=7.5).contains(&h),
        format!("n_T = {n_t} ({:.3e}/s framed), h_min = {h:.4} bits", rate),
    )
}

fn c5_sweep_shape() -> Check {
    let cfg = RunConfig::default();
    let durations: Vec<f64> = (1..=60).map(f64::from).collect();
    let v0s = [0.980, 0.985, 0.990];
    let table = cmd_sweep(&cfg, &durations, &v0s).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    let mut fractions = Vec::new();
    for &v0 in &v0s {
        let curve = table.curve(v0);
        if curve.len() != durations.len() {
            problems.push(format!("V0={v0}: {} rows", curve.len()));
            continue;
        }
        if !curve.windows(2).all(|w| w[1].throughput_bps >= w[0].throughput_bps) {
            problems.push(format!("V0={v0}: not monotone"));
        }
        let last = curve.last().unwrap();
        let frac = last.throughput_bps / last.asymptote_bps;
        fractions.push(format!(
            "V0={v0}: {:.2}/{:.2} Mbit/s = {:.1}%",
            last.throughput_bps / 1e6,
            last.asymptote_bps / 1e6,
            100.0 * frac
        ));
        if frac < 0.90 {
            problems.push(format!("V0={v0}: {:.1}% of asymptote at 60 s", 100.0 * frac));
        }
    }
    for (i, &d) in durations.iter().enumerate() {
        let at: Vec<f64> = v0s.iter().map(|&v| table.curve(v)[i].throughput_bps).collect();
        if !at.windows(2).all(|w| w[1] >= w[0]) {
            problems.push(format!("not ordered in V0 at {d} s"));
        }
    }
    let last: Vec<f64> = v0s.iter().map(|&v| table.curve(v)[59].throughput_bps).collect();
    if !last.windows(2).all(|w| w[1] > w[0]) {
        problems.push("not strictly ordered in V0 at 60 s".into());
    }
    let detail = format!(
        "symbol rate {:.3e}/s; {}{}",
        table.symbol_rate,
        fractions.join(", "),
        if problems.is_empty() {
            String::new()
        } else {
            format!("; {}", problems.join("; "))
        }
    );
    ensure(problems.is_empty(), detail)
}

fn c6_visibility_recovery() -> Check {
    let cfg = RunConfig::default();
    let source = SourceModel {
        pair_rate: cfg.franson.pair_rate,
        ..cfg.source
    };
    let points = scan_fringe(
        &source,
        &cfg.franson.model(),
        (&cfg.detector.model, &cfg.idler_detector),
        &even_phases(cfg.franson.points),
        cfg.franson.duration_per_point,
        42,
    )
    .map_err(|e| e.to_string())?;
    let mean = points.iter().map(|p| p.coincidences as f64).sum::<f64>() / points.len() as f64;
    let est = estimate_visibility(&points).map_err(|e| e.to_string())?;
    ensure(
        mean >= 1e5 && (est.visibility - 0.988).abs() <= 0.005,
        format!(
            "V = {:.4} +- {:.4}, mean {:.0} coincidences per point",
            est.visibility, est.stderr, mean
        ),
    )
}

fn c7_extractor_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=64);
        let m = rng.gen_range(1..=n);
        let plan = ExtractionPlan::new(n, m, random_bits(&mut rng, n + m - 1)).unwrap();
        let x = random_bits(&mut rng, n);
        if extract_block(&plan, &x).unwrap() != extract_block_naive(&plan, &x).unwrap() {
            mismatches += 1;
        }
    }
    let m = plan_extraction(4096, 5.9, 11).unwrap();
    let plan = ExtractionPlan::new(4096, m, random_bits(&mut rng, 4096 + m - 1)).unwrap();
    let hasher = ToeplitzHasher::new(&plan);
    let mut nonlinear = 0;
    for _ in 0..1_000 {
        let x = random_bits(&mut rng, 4096);
        let y = random_bits(&mut rng, 4096);
        let lhs = hasher.hash_block(&x.xor(&y)).unwrap();
        let rhs = hasher.hash_block(&x).unwrap().xor(&hasher.hash_block(&y).unwrap());
        if lhs != rhs {
            nonlinear += 1;
        }
    }
    ensure(
        mismatches == 0 && nonlinear == 0,
        format!("{mismatches} oracle mismatches in 10^4, {nonlinear} linearity failures in 10^3"),
    )
}

fn c8_extractor_speed() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = plan_extraction(4096, 5.9, 11).unwrap();
    let plan = ExtractionPlan::new(4096, m, random_bits(&mut rng, 4096 + m - 1)).unwrap();
    let hasher = ToeplitzHasher::new(&plan);
    let blocks = 8192;
    let input = random_bits(&mut rng, blocks * 4096);
    // Single thread, raw input bits per second.
    let mut best = 0.0f64;
    for _ in 0..3 {
        let start = Instant::now();
        let mut ones = 0usize;
        for b in 0..blocks {
            ones += hasher.hash_words(&input.words()[b * 64..(b + 1) * 64]).count_ones();
        }
        let secs = start.elapsed().as_secs_f64();
        std::hint::black_box(ones);
        best = best.max((blocks * 4096) as f64 / secs);
    }
    ensure(best >= 24e6, format!("{:.1} Mbit/s raw input on one thread", best / 1e6))
}

fn c9_battery() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        output_dir: dir.path().to_string_lossy().into_owned(),
        ..RunConfig::default()
    };
    let outcome = cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
    let meta = outcome.extracted.ok_or("no bits extracted")?;
    let battery = outcome.battery.ok_or("battery not run")?;
    let finals: Vec<String> = battery
        .rerun
        .as_ref()
        .unwrap_or(&battery.first)
        .tests
        .iter()
        .map(|t| format!("{:.3}", t.final_p))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let biased = BitString::from_bools((0..10_000_000).map(|_| rng.gen_bool(0.6)));
    let planted = run_battery(&biased, &BatteryConfig::default()).map_err(|e| e.to_string())?;
    ensure(
        meta.bits >= 10_000_000 && battery.success && !planted.success,
        format!(
            "{} extracted bits, final P [{}]{}, biased stream {}",
            meta.bits,
            finals.join(", "),
            if battery.rerun.is_some() { " after re-run" } else { "" },
            if planted.success { "passed" } else { "failed" }
        ),
    )
}

fn c10_chain_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let sigma_coh = 10f64.powf(rng.gen_range(-8.0..-4.0));
        let sigma_cor = 10f64.powf(rng.gen_range(-13.0..-10.0));
        let inputs = EntropyInputs {
            sigma_coh,
            sigma_cor,
            delta_ps: rng.gen_range(10.0..2000.0),
            delta_t_ps: rng.gen_range(500.0..20_000.0),
            v0: rng.gen_range(0.5000001..1.0),
            ..paper_inputs(1)
        };
        let w0 = pump_bandwidth_w0(sigma_coh, sigma_cor);
        let var_t = time_variance_bound(inputs.v0, inputs.delta_t_ps * 1e-12, w0);
        let composed = var_t.sqrt() * (2.0 / std::f64::consts::PI).sqrt() / (inputs.delta_ps * 1e-12);
        let direct = l1_distance_bound(&inputs);
        worst = worst.max(((composed - direct) / direct).abs());
    }
    ensure(worst <= 1e-12, format!("max relative error {worst:.2e} over 10^4 draws"))
}

fn c11_abort() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("run");
    let status = Command::new(env!("CARGO_BIN_EXE_hdqrng"))
        .args(["pipeline", "--set", "franson.v_true=0.90", "--set", "protocol.duration=0.2", "--out"])
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    let code = status.status.code();
    let emitted = ["random.bin", "symbols.sym", "seed.bin"]
        .iter()
        .filter(|f| out.join(f).exists())
        .count();
    let cert: serde_json::Value = serde_json::from_slice(
        &std::fs::read(out.join("certificate.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let bits = cert["certificate"]["bits_per_sample_corrected"].as_f64();
    ensure(
        code == Some(EXIT_ABORT) && emitted == 0 && bits == Some(0.0) && cert["verdict"] == "abort",
        format!(
            "exit {:?}, verdict {}, {emitted} downstream artifacts",
            code, cert["verdict"]
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "accidentals ratio", c1_accidental_ratio),
        (2, "extraction sizing", c2_extraction_size),
        (3, "throughput identity", c3_throughput_identity),
        (4, "entropy band", c4_entropy_band),
        (5, "throughput sweep shape", c5_sweep_shape),
        (6, "visibility recovery", c6_visibility_recovery),
        (7, "extractor correctness", c7_extractor_correctness),
        (8, "extractor performance", c8_extractor_speed),
        (9, "battery behaviour", c9_battery),
        (10, "entropy chain consistency", c10_chain_consistency),
        (11, "abort semantics", c11_abort),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {id:>2} {name:<28} {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name:<28} {detail} [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
