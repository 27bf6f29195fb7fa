//! Individual tests. Each returns a P-value under the null of i.i.d. fair bits.
//!
//! Minimum lengths:
//!
//! | test                    | minimum bits                      |
//! |-------------------------|-----------------------------------|
//! | monobit                 | 100                               |
//! | block frequency         | 100 and at least one full block   |
//! | runs                    | 100                               |
//! | serial autocorrelation  | 100 + lag                         |
//! | birthday spacings       | 100 samples of 512 x 24 bits      |

use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const MIN_BITS: usize = 100;

pub const BIRTHDAY_DAY_BITS: u32 = 24;
pub const BIRTHDAY_COUNT: usize = 512;
pub const BIRTHDAY_MIN_SAMPLES: usize = 100;
/// `m^3 / (4 n)` with `m = 512`, `n = 2^24`.
pub const BIRTHDAY_LAMBDA: f64 = 2.0;
pub const BIRTHDAY_SAMPLE_BITS: usize = BIRTHDAY_COUNT * BIRTHDAY_DAY_BITS as usize;

fn need(test: &'static str, needed: usize, got: usize) -> Result<()> {
    if got < needed {
        return Err(Error::InsufficientData { test, needed, got });
    }
    Ok(())
}

pub fn monobit(bits: &BitString) -> Result<f64> {
    let n = bits.len();
    need("monobit", MIN_BITS, n)?;
    let s = 2.0 * bits.count_ones() as f64 - n as f64;
    Ok(erfc(s.abs() / (2.0 * n as f64).sqrt()))
}

pub fn block_frequency(bits: &BitString, block: usize) -> Result<f64> {
    if block == 0 {
        return Err(Error::invalid("block length must be positive"));
    }
    need("block_frequency", MIN_BITS.max(block), bits.len())?;
    let blocks = bits.len() / block;
    let chi2: f64 = (0..blocks)
        .map(|b| {
            let pi = bits.slice(b * block, block).count_ones() as f64 / block as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * block as f64;
    Ok(gamma_ur(blocks as f64 / 2.0, chi2 / 2.0))
}

/// Number of runs of identical bits.
fn run_count(bits: &BitString) -> usize {
    let n = bits.len();
    let words = bits.words();
    // Transitions between bit i and i + 1, for i + 1 < n.
    let mut transitions = 0usize;
    for (w, &word) in words.iter().enumerate() {
        let next = words.get(w + 1).copied().unwrap_or(0);
        let diff = word ^ ((word >> 1) | (next << 63));
        let valid = n.saturating_sub(w * 64 + 1).min(64);
        let mask = if valid == 64 { u64::MAX } else { (1u64 << valid) - 1 };
        transitions += (diff & mask).count_ones() as usize;
    }
    transitions + 1
}

pub fn runs_test(bits: &BitString) -> Result<f64> {
    let n = bits.len();
    need("runs", MIN_BITS, n)?;
    let nf = n as f64;
    let pi = bits.count_ones() as f64 / nf;
    if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        // Frequency prerequisite failed.
        return Ok(0.0);
    }
    let v = run_count(bits) as f64;
    let num = (v - 2.0 * nf * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi);
    Ok(erfc(num / den))
}

pub fn serial_autocorrelation(bits: &BitString, lag: usize) -> Result<f64> {
    if lag == 0 {
        return Err(Error::invalid("lag must be positive"));
    }
    need("serial_autocorrelation", MIN_BITS + lag, bits.len())?;
    let len = bits.len() - lag;
    let a = bits.slice(0, len).xor(&bits.slice(lag, len)).count_ones() as f64;
    let z = 2.0 * (a - len as f64 / 2.0) / (len as f64).sqrt();
    Ok(erfc(z.abs() / std::f64::consts::SQRT_2))
}

/// Duplicate-spacing count for one sample of 512 birthdays in a 2^24-day year.
pub fn birthday_duplicates(bits: &BitString, start: usize) -> u32 {
    let mut days: Vec<u32> = (0..BIRTHDAY_COUNT)
        .map(|i| bits.read_bits(start + i * BIRTHDAY_DAY_BITS as usize, BIRTHDAY_DAY_BITS) as u32)
        .collect();
    days.sort_unstable();
    let mut spacings = Vec::with_capacity(BIRTHDAY_COUNT);
    spacings.push(days[0]);
    spacings.extend(days.windows(2).map(|w| w[1] - w[0]));
    spacings.sort_unstable();
    let distinct = 1 + spacings.windows(2).filter(|w| w[0] != w[1]).count();
    (BIRTHDAY_COUNT - distinct) as u32
}

fn poisson_pmf(k: u32, lambda: f64) -> f64 {
    let mut p = (-lambda).exp();
    for i in 1..=k {
        p *= lambda / i as f64;
    }
    p
}

/// Chi-square of duplicate counts against Poisson(2) over bins 0..=4 and >= 5.
pub fn birthday_spacings(bits: &BitString) -> Result<f64> {
    let samples = bits.len() / BIRTHDAY_SAMPLE_BITS;
    need(
        "birthday_spacings",
        BIRTHDAY_MIN_SAMPLES * BIRTHDAY_SAMPLE_BITS,
        bits.len(),
    )?;
    let mut observed = [0u64; 6];
    for s in 0..samples {
        let j = birthday_duplicates(bits, s * BIRTHDAY_SAMPLE_BITS) as usize;
        observed[j.min(5)] += 1;
    }
    let mut expected = [0.0; 6];
    for (k, e) in expected.iter_mut().enumerate().take(5) {
        *e = poisson_pmf(k as u32, BIRTHDAY_LAMBDA);
    }
    expected[5] = 1.0 - expected[..5].iter().sum::<f64>();
    let chi2: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, p)| {
            let e = p * samples as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    Ok(gamma_ur(2.5, chi2 / 2.0))
}
