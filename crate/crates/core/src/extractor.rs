//! Toeplitz hashing over GF(2).
//!
//! An `m x n` Toeplitz matrix is fixed by a seed of `n + m - 1` bits through
//! `T[i][j] = seed[i - j + n - 1]`. Output bit `i` of a block `x` is
//! `XOR_j T[i][j] x[j]`.
//!
//! With `y` the bit-reversed input (`y[k] = x[n - 1 - k]`), row `i` becomes
//! the dot product of `y` with the seed window `seed[i .. i + n]`.
//! [`ToeplitzHasher`] precomputes the seed at all 64 bit offsets, so every
//! output bit costs `n / 64` AND-XOR word operations and one popcount.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Block size used for extraction.
pub const DEFAULT_BLOCK_BITS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionPlan {
    n: usize,
    m: usize,
    seed: BitString,
}

/// Plan dimensions as recorded in run metadata.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanShape {
    pub n: usize,
    pub m: usize,
    pub seed_bits: usize,
}

impl ExtractionPlan {
    pub fn new(n: usize, m: usize, seed: BitString) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::invalid(format!("need 1 <= m <= n, got n = {n}, m = {m}")));
        }
        let expected = Self::seed_len(n, m);
        if seed.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: seed.len(),
            });
        }
        Ok(Self { n, m, seed })
    }

    pub fn seed_len(n: usize, m: usize) -> usize {
        n + m - 1
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> &BitString {
        &self.seed
    }

    pub fn shape(&self) -> PlanShape {
        PlanShape {
            n: self.n,
            m: self.m,
            seed_bits: self.seed.len(),
        }
    }
}

/// Output length `floor(n * bits_per_sample / sample_bits)`.
pub fn plan_extraction(n: usize, bits_per_sample: f64, sample_bits: u32) -> Result<usize> {
    if sample_bits == 0 || n == 0 {
        return Err(Error::invalid(format!(
            "block length {n} and sample width {sample_bits} must be positive"
        )));
    }
    if bits_per_sample.is_nan() || bits_per_sample <= 0.0 {
        return Err(Error::ZeroOutput);
    }
    if bits_per_sample > sample_bits as f64 {
        return Err(Error::invalid(format!(
            "bits per sample {bits_per_sample} exceeds sample width {sample_bits}"
        )));
    }
    // Guards against n * 5.9 / 11 landing a hair under an integer.
    let exact = n as f64 * bits_per_sample / sample_bits as f64;
    let m = (exact * (1.0 + 4.0 * f64::EPSILON)).floor() as usize;
    if m == 0 {
        return Err(Error::ZeroOutput);
    }
    Ok(m.min(n))
}

pub fn toeplitz_entry(plan: &ExtractionPlan, i: usize, j: usize) -> Result<bool> {
    if i >= plan.m || j >= plan.n {
        return Err(Error::IndexOutOfRange {
            row: i,
            col: j,
            rows: plan.m,
            cols: plan.n,
        });
    }
    Ok(plan.seed.get(i + plan.n - 1 - j))
}

/// Reference implementation: explicit matrix-vector product, one entry at a time.
pub fn extract_block_naive(plan: &ExtractionPlan, input: &BitString) -> Result<BitString> {
    if input.len() != plan.n {
        return Err(Error::LengthMismatch {
            expected: plan.n,
            got: input.len(),
        });
    }
    let mut out = BitString::zeros(plan.m);
    for i in 0..plan.m {
        let mut acc = false;
        for j in 0..plan.n {
            acc ^= toeplitz_entry(plan, i, j)? & input.get(j);
        }
        out.set(i, acc);
    }
    Ok(out)
}

/// Precomputed fast hasher for one plan.
#[derive(Clone, Debug)]
pub struct ToeplitzHasher {
    n: usize,
    m: usize,
    in_words: usize,
    /// `shifted[s][w]` holds seed bits `64 w + s .. 64 w + s + 64`.
    shifted: Vec<Vec<u64>>,
}

impl ToeplitzHasher {
    pub fn new(plan: &ExtractionPlan) -> Self {
        let in_words = plan.n.div_ceil(64);
        let rows_words = (plan.m - 1) / 64 + in_words;
        let mut seed = plan.seed.words().to_vec();
        seed.resize(rows_words + 1, 0);
        let shifted = (0..64)
            .map(|s| {
                (0..rows_words)
                    .map(|w| {
                        if s == 0 {
                            seed[w]
                        } else {
                            (seed[w] >> s) | (seed[w + 1] << (64 - s))
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            n: plan.n,
            m: plan.m,
            in_words,
            shifted,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Reverses the low `n` bits held in `words` into `out`.
    fn reverse_into(&self, words: &[u64], out: &mut [u64]) {
        let w = self.in_words;
        for k in 0..w {
            out[k] = words[w - 1 - k].reverse_bits();
        }
        let pad = w * 64 - self.n;
        if pad > 0 {
            for k in 0..w {
                let hi = if k + 1 < w { out[k + 1] << (64 - pad) } else { 0 };
                out[k] = (out[k] >> pad) | hi;
            }
        }
    }

    /// Hashes one block given as `n` bits packed into `ceil(n / 64)` words.
    /// Bits past `n` in the last word must be zero.
    pub fn hash_words(&self, words: &[u64]) -> BitString {
        debug_assert_eq!(words.len(), self.in_words);
        let mut y = vec![0u64; self.in_words];
        self.reverse_into(words, &mut y);
        let mut out = vec![0u64; self.m.div_ceil(64)];
        for i in 0..self.m {
            let window = &self.shifted[i % 64][i / 64..i / 64 + self.in_words];
            let acc = window
                .iter()
                .zip(&y)
                .fold(0u64, |acc, (s, x)| acc ^ (s & x));
            out[i / 64] |= u64::from(acc.count_ones() & 1) << (i % 64);
        }
        BitString::from_words(out, self.m)
    }

    pub fn hash_block(&self, input: &BitString) -> Result<BitString> {
        if input.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: input.len(),
            });
        }
        Ok(self.hash_words(input.words()))
    }
}

/// Fast single-block extraction.
pub fn extract_block(plan: &ExtractionPlan, input: &BitString) -> Result<BitString> {
    ToeplitzHasher::new(plan).hash_block(input)
}

/// Packs symbols, `sample_bits` each, least significant bit first.
pub fn pack_symbols(symbols: &[u32], sample_bits: u32) -> Result<BitString> {
    if sample_bits == 0 || sample_bits > 32 {
        return Err(Error::invalid(format!("sample width {sample_bits} out of range 1..=32")));
    }
    let mut out = BitString::with_capacity(symbols.len() * sample_bits as usize);
    for &s in symbols {
        if sample_bits < 32 && s >> sample_bits != 0 {
            return Err(Error::invalid(format!("symbol {s} does not fit in {sample_bits} bits")));
        }
        out.push_bits(s as u64, sample_bits);
    }
    Ok(out)
}

/// Hashes a raw bit stream block by block with one plan. A trailing partial
/// block is dropped.
pub fn extract_stream(plan: &ExtractionPlan, raw: &BitString) -> BitString {
    let hasher = ToeplitzHasher::new(plan);
    let blocks = raw.len() / plan.n;
    let hash = |b: usize| hasher.hash_words(raw.slice(b * plan.n, plan.n).words());
    #[cfg(feature = "parallel")]
    let outputs: Vec<BitString> = {
        use rayon::prelude::*;
        (0..blocks).into_par_iter().map(hash).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outputs: Vec<BitString> = (0..blocks).map(hash).collect();

    let mut out = BitString::with_capacity(blocks * plan.m);
    for o in &outputs {
        out.extend_from(o);
    }
    out
}

/// Packs symbols and hashes them: output length is `m * floor(total_bits / n)`.
pub fn stream_extract(plan: &ExtractionPlan, symbols: &[u32], sample_bits: u32) -> Result<BitString> {
    let raw = pack_symbols(symbols, sample_bits)?;
    Ok(extract_stream(plan, &raw))
}
