//! Statistical battery for extracted output.
//!
//! The stream is cut into segments; every test runs on every segment and the
//! per-segment P-values of a test are combined with a Kolmogorov-Smirnov
//! uniformity test. A battery passes when every final P-value lies in
//! `[0.01, 0.99]`.
//!
//! A single marginal failure (one test, final P within `[1e-4, 0.01)` or
//! `(0.99, 1 - 1e-4]`) earns one re-run on fresh data; see
//! [`run_battery_with_rerun`].

pub mod ks;
pub mod single;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use ks::{kolmogorov_sf, ks_combine, ks_statistic};
pub use single::{birthday_spacings, block_frequency, monobit, runs_test, serial_autocorrelation};

use crate::bits::BitString;
use crate::error::Result;

pub const PASS_LOW: f64 = 0.01;
pub const PASS_HIGH: f64 = 0.99;
pub const MARGINAL_LOW: f64 = 1e-4;
pub const MARGINAL_HIGH: f64 = 1.0 - 1e-4;
/// Below this many bits a report is flagged non-conclusive.
pub const CONCLUSIVE_BITS: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub segment_bits: usize,
    pub block: usize,
    pub lags: Vec<usize>,
    /// Birthday samples per P-value.
    pub birthday_samples: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            segment_bits: 1_000_000,
            block: 128,
            lags: vec![1, 2, 3, 8, 16, 32],
            birthday_samples: single::BIRTHDAY_MIN_SAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub name: String,
    pub p_values: Vec<f64>,
    pub final_p: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub tests: Vec<TestRecord>,
    pub success: bool,
    pub bits: usize,
    pub conclusive: bool,
    /// Tests skipped for lack of data.
    pub skipped: Vec<String>,
}

pub fn passes(p: f64) -> bool {
    (PASS_LOW..=PASS_HIGH).contains(&p)
}

fn is_marginal_p(p: f64) -> bool {
    (MARGINAL_LOW..PASS_LOW).contains(&p) || (p > PASS_HIGH && p <= MARGINAL_HIGH)
}

impl TestReport {
    pub fn failures(&self) -> impl Iterator<Item = &TestRecord> {
        self.tests.iter().filter(|t| !t.passed)
    }

    /// Exactly one failing test, and only just outside the pass band.
    pub fn is_marginal_failure(&self) -> bool {
        let failed: Vec<_> = self.failures().collect();
        failed.len() == 1 && is_marginal_p(failed[0].final_p)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<28} {:>10}  result", "test", "P-value");
        for t in &self.tests {
            let verdict = if t.passed { "success" } else { "failure" };
            let _ = writeln!(s, "{:<28} {:>10.5}  {}", t.name, t.final_p, verdict);
        }
        for name in &self.skipped {
            let _ = writeln!(s, "{name:<28} {:>10}  skipped", "-");
        }
        let _ = writeln!(
            s,
            "battery: {} ({} bits{})",
            if self.success { "success" } else { "failure" },
            self.bits,
            if self.conclusive { "" } else { ", non-conclusive" }
        );
        s
    }
}

fn segments(bits: &BitString, segment_bits: usize) -> Vec<BitString> {
    let count = bits.len() / segment_bits.max(1);
    let (count, size) = if count >= 2 {
        (count, segment_bits)
    } else {
        (2, bits.len() / 2)
    };
    (0..count).map(|i| bits.slice(i * size, size)).collect()
}

fn par_map<T: Sync, F: Fn(&T) -> Result<f64> + Sync + Send>(items: &[T], f: F) -> Result<Vec<f64>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

fn record(name: String, p_values: Vec<f64>) -> Result<TestRecord> {
    let final_p = if p_values.len() >= 2 {
        ks_combine(&p_values)?
    } else {
        p_values[0]
    };
    Ok(TestRecord {
        name,
        passed: passes(final_p),
        p_values,
        final_p,
    })
}

/// Runs every test once over `bits`.
pub fn run_battery(bits: &BitString, config: &BatteryConfig) -> Result<TestReport> {
    let segs = segments(bits, config.segment_bits);
    let mut tests = Vec::new();
    let mut skipped = Vec::new();

    let mut add = |name: String, result: Result<Vec<f64>>| -> Result<()> {
        match result {
            Ok(ps) => tests.push(record(name, ps)?),
            Err(crate::Error::InsufficientData { .. }) => skipped.push(name),
            Err(e) => return Err(e),
        }
        Ok(())
    };

    add("frequency".into(), par_map(&segs, monobit))?;
    add(
        format!("block frequency (M={})", config.block),
        par_map(&segs, |s| block_frequency(s, config.block)),
    )?;
    add("runs".into(), par_map(&segs, runs_test))?;
    {
        let pairs: Vec<(usize, &BitString)> = config
            .lags
            .iter()
            .flat_map(|&lag| segs.iter().map(move |s| (lag, s)))
            .collect();
        add(
            "serial autocorrelation".into(),
            par_map(&pairs, |(lag, s)| serial_autocorrelation(s, *lag)),
        )?;
    }
    {
        let group_bits = config.birthday_samples.max(single::BIRTHDAY_MIN_SAMPLES) * single::BIRTHDAY_SAMPLE_BITS;
        let groups: Vec<BitString> = (0..bits.len() / group_bits)
            .map(|g| bits.slice(g * group_bits, group_bits))
            .collect();
        let result = if groups.is_empty() {
            birthday_spacings(bits).map(|p| vec![p])
        } else {
            par_map(&groups, birthday_spacings)
        };
        add("birthday spacings".into(), result)?;
    }

    let conclusive = bits.len() >= CONCLUSIVE_BITS && skipped.is_empty();
    let success = !tests.is_empty() && skipped.is_empty() && tests.iter().all(|t| t.passed);
    Ok(TestReport {
        tests,
        success,
        bits: bits.len(),
        conclusive,
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryOutcome {
    pub first: TestReport,
    pub rerun: Option<TestReport>,
    pub success: bool,
}

/// Runs the battery and, after a single marginal failure, once more on the
/// data produced by `fresh`. No fresh data means the failure stands.
pub fn run_battery_with_rerun(
    bits: &BitString,
    config: &BatteryConfig,
    fresh: impl FnOnce() -> Result<Option<BitString>>,
) -> Result<BatteryOutcome> {
    let first = run_battery(bits, config)?;
    if first.success || !first.is_marginal_failure() {
        return Ok(BatteryOutcome {
            success: first.success,
            first,
            rerun: None,
        });
    }
    let rerun = match fresh()? {
        Some(more) => Some(run_battery(&more, config)?),
        None => None,
    };
    Ok(BatteryOutcome {
        success: rerun.as_ref().is_some_and(|r| r.success),
        first,
        rerun,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(seed: u64, len: usize) -> BitString {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let words = (0..len.div_ceil(64)).map(|_| rng.gen()).collect();
        BitString::from_words(words, len)
    }

    fn small_config() -> BatteryConfig {
        BatteryConfig {
            segment_bits: 200_000,
            ..Default::default()
        }
    }

    #[test]
    fn uniform_stream_passes() {
        let bits = random(5, 2_500_000);
        let report = run_battery(&bits, &small_config()).unwrap();
        assert_eq!(report.tests.len(), 5);
        assert!(report.skipped.is_empty());
        assert!(!report.conclusive);
        for t in &report.tests {
            assert!((0.0..=1.0).contains(&t.final_p));
        }
        assert!(report.success, "{}", report.table());
    }

    #[test]
    fn biased_stream_fails() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let bits = BitString::from_bools((0..2_000_000).map(|_| rng.gen_bool(0.6)));
        let report = run_battery(&bits, &small_config()).unwrap();
        assert!(!report.success);
        assert!(!report.is_marginal_failure());
        let freq = &report.tests[0];
        assert_eq!(freq.name, "frequency");
        assert!(freq.final_p < 1e-9);
    }

    #[test]
    fn counter_fails() {
        let mut bits = BitString::new();
        for i in 0..70_000u64 {
            bits.push_bits(i, 32);
        }
        let report = run_battery(&bits, &small_config()).unwrap();
        assert!(!report.success);
    }

    #[test]
    fn short_stream_is_partial() {
        let report = run_battery(&random(7, 10_000), &BatteryConfig::default()).unwrap();
        assert!(!report.conclusive);
        assert!(!report.success);
        assert_eq!(report.skipped, vec!["birthday spacings".to_string()]);
        assert!(report.table().contains("skipped"));
    }

    #[test]
    fn verdict_rule() {
        assert!(passes(0.01) && passes(0.99) && passes(0.5));
        assert!(!passes(0.0099) && !passes(0.9901));
        let rec = |p| TestRecord {
            name: "t".into(),
            p_values: vec![p],
            final_p: p,
            passed: passes(p),
        };
        let report = |ps: &[f64]| TestReport {
            tests: ps.iter().map(|&p| rec(p)).collect(),
            success: ps.iter().all(|&p| passes(p)),
            bits: 0,
            conclusive: true,
            skipped: vec![],
        };
        assert!(report(&[0.5, 0.005]).is_marginal_failure());
        assert!(report(&[0.5, 0.995]).is_marginal_failure());
        assert!(!report(&[0.5, 1e-6]).is_marginal_failure());
        assert!(!report(&[0.005, 0.005]).is_marginal_failure());
    }

    #[test]
    fn deterministic() {
        let bits = random(8, 1_500_000);
        let a = run_battery(&bits, &small_config()).unwrap();
        let b = run_battery(&bits, &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rerun_only_on_marginal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let biased = BitString::from_bools((0..1_500_000).map(|_| rng.gen_bool(0.6)));
        let mut called = false;
        let out = run_battery_with_rerun(&biased, &small_config(), || {
            called = true;
            Ok(None)
        })
        .unwrap();
        assert!(!called && !out.success && out.rerun.is_none());

        let good = random(10, 1_500_000);
        let out = run_battery_with_rerun(&good, &small_config(), || panic!("no re-run expected")).unwrap();
        assert!(out.success);
    }
}
