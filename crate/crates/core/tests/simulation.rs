use hdqrng::config::RunConfig;
use hdqrng::protocol::{frame_symbols, split_rounds};
use hdqrng::sim::{simulate_arms, simulate_pairs, DetectorModel, Provenance};

fn lossy_ideal(efficiency: f64) -> DetectorModel {
    DetectorModel {
        efficiency,
        ..DetectorModel::ideal()
    }
}

#[test]
fn pair_counts_are_poissonian() {
    let cfg = RunConfig::default();
    let stream = simulate_pairs(&cfg.source, 0.02, 11).unwrap();
    let bin_ps = 1_000_000u64;
    let bins = (stream.duration_ps / bin_ps) as usize;
    let mut counts = vec![0f64; bins];
    for p in &stream.pairs {
        let b = (p.signal_ps / bin_ps) as usize;
        if b < bins {
            counts[b] += 1.0;
        }
    }
    let mean = counts.iter().sum::<f64>() / bins as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (bins - 1) as f64;
    assert!((mean - 8.5).abs() < 0.1, "mean per microsecond {mean}");
    // Index of dispersion has standard error sqrt(2 / bins) ~ 0.01.
    assert!((var / mean - 1.0).abs() < 0.05, "dispersion {}", var / mean);

    let gaps: Vec<f64> = stream
        .pairs
        .windows(2)
        .map(|w| (w[1].signal_ps - w[0].signal_ps) as f64)
        .collect();
    let gap_mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let gap_sd = (gaps.iter().map(|g| (g - gap_mean).powi(2)).sum::<f64>() / gaps.len() as f64).sqrt();
    assert!((gap_mean * 8.5e6 / 1e12 - 1.0).abs() < 0.01);
    // Exponential gaps have unit coefficient of variation.
    assert!((gap_sd / gap_mean - 1.0).abs() < 0.02);
}

#[test]
fn fluorescence_ratio_is_recovered() {
    let cfg = RunConfig::default();
    let stream = simulate_pairs(&cfg.source, 0.05, 12).unwrap();
    let ratio = stream.fluorescence.len() as f64 / stream.pairs.len() as f64;
    // About 7.6e3 fluorescence photons; relative error ~1.1%.
    assert!((ratio - 0.018).abs() < 0.018 * 0.05, "ratio {ratio}");

    let arms = simulate_arms(&cfg.source, &[lossy_ideal(0.494); 2], None, 0.05, 12).unwrap();
    let fluor = arms
        .signal
        .iter()
        .filter(|t| t.provenance == Provenance::Fluorescence)
        .count() as f64;
    let share = fluor / arms.signal.len() as f64;
    let expected = 0.018 / 1.018;
    assert!((share - expected).abs() < expected * 0.06, "share {share}");
}

#[test]
fn framed_rate_matches_poisson_occupancy() {
    // Without dead time or dark counts each channel carries a Poisson stream
    // at rate R (1 + r) eta / k, thinned by q for generation rounds.
    let cfg = RunConfig::default();
    let p = cfg.protocol.protocol;
    let k = 2usize;
    let eta = 0.494;
    let duration = 0.05;
    let arms = simulate_arms(&cfg.source, &vec![lossy_ideal(eta); k], None, duration, 13).unwrap();
    let (generation, _) = split_rounds(&arms.signal, p.q, 13).unwrap();
    let symbols = frame_symbols(&generation, &p).unwrap();

    let rate = cfg.source.pair_rate * (1.0 + cfg.source.fluorescence_ratio) * eta / k as f64 * p.q;
    let mu = rate * p.frame_ps() as f64 * 1e-12;
    let frames = symbols.frames_total as f64;
    let expected = frames * mu * (-mu).exp();
    let rel = symbols.n_t as f64 / expected - 1.0;
    assert!(rel.abs() < 0.02, "n_t {} vs {expected:.0} (mu {mu:.3})", symbols.n_t);

    let p_multi = 1.0 - (-mu).exp() - mu * (-mu).exp();
    let p_occupied = 1.0 - (-mu).exp();
    assert!((symbols.p_alpha_est - p_multi / p_occupied).abs() < 0.01);
    assert!(((symbols.frames_empty as f64 / frames) - (-mu).exp()).abs() < 0.01);

    // Bins are uniform over the frame: every symbol below n_d, mean near the middle.
    assert!(symbols.symbols.iter().all(|&s| s < p.n_d));
    let mean = symbols.symbols.iter().map(|&s| s as f64).sum::<f64>() / symbols.n_t as f64;
    assert!((mean / (p.n_d as f64 - 1.0) - 0.5).abs() < 0.01);
}

#[test]
fn dead_time_holds_per_channel() {
    let cfg = RunConfig::default();
    let arms = simulate_arms(
        &cfg.source,
        &cfg.signal_detectors(),
        Some(&cfg.idler_detector),
        0.01,
        14,
    )
    .unwrap();
    for ch in 0..cfg.detector.count {
        let times: Vec<u64> = arms.signal.iter().filter(|t| t.channel == ch).map(|t| t.time_ps).collect();
        assert!(times.len() > 10_000);
        assert!(times.windows(2).all(|w| w[1] - w[0] >= cfg.detector.model.dead_time_ps));
    }
    assert!(arms.idler.windows(2).all(|w| w[1].time_ps - w[0].time_ps >= cfg.idler_detector.dead_time_ps));
    assert!(arms.signal.windows(2).all(|w| w[1].time_ps >= w[0].time_ps));
}

#[test]
fn simulation_ignores_thread_count() {
    let cfg = RunConfig::default();
    let run = || {
        simulate_arms(&cfg.source, &cfg.signal_detectors(), Some(&cfg.idler_detector), 0.01, 15).unwrap()
    };
    let many = run();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(many.signal, single.signal);
    assert_eq!(many.idler, single.idler);
}
