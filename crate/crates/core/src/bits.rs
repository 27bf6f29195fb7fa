//! Packed bit strings.
//!
//! Bit `k` of a stream lives in bit `k % 64` of word `k / 64`, which is the
//! same as bit `k % 8` of byte `k / 8` once the words are written
//! little-endian. Bits past `len` are always zero.

use std::fmt;

#[derive(Clone, Default, PartialEq, Eq)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(words_for(bits)),
            len: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    /// Builds from a slice of 0/1 values; any nonzero byte counts as 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                out.words[i / 64] |= 1 << (i % 64);
            }
        }
        out
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut out = Self::new();
        for b in bits {
            out.push(b);
        }
        out
    }

    /// Takes the first `len` bits of `bytes` in little-endian bit order.
    ///
    /// Panics if `bytes` holds fewer than `len` bits.
    pub fn from_bytes_le(bytes: &[u8], len: usize) -> Self {
        assert!(bytes.len() * 8 >= len, "byte buffer too short");
        let mut words = vec![0u64; words_for(len)];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *w = u64::from_le_bytes(buf);
        }
        let mut out = Self { words, len };
        out.clear_tail();
        out
    }

    /// Wraps raw words; bits beyond `len` are cleared.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        assert!(words.len() * 64 >= len, "word buffer too short");
        words.truncate(words_for(len));
        let mut out = Self { words, len };
        out.clear_tail();
        out
    }

    pub fn to_bytes_le(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len.div_ceil(8));
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if value {
            self.words[self.len / 64] |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    /// Appends the low `count` bits of `value`, least significant first.
    pub fn push_bits(&mut self, value: u64, count: u32) {
        assert!(count <= 64);
        if count == 0 {
            return;
        }
        let value = if count == 64 {
            value
        } else {
            value & ((1u64 << count) - 1)
        };
        let offset = (self.len % 64) as u32;
        if offset == 0 {
            self.words.push(value);
        } else {
            let last = self.words.len() - 1;
            self.words[last] |= value << offset;
            if offset + count > 64 {
                self.words.push(value >> (64 - offset));
            }
        }
        self.len += count as usize;
    }

    pub fn extend_from(&mut self, other: &BitString) {
        let full = other.len / 64;
        for &w in &other.words[..full] {
            self.push_bits(w, 64);
        }
        let rem = (other.len % 64) as u32;
        if rem > 0 {
            self.push_bits(other.words[full], rem);
        }
    }

    /// Copies `len` bits starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len, "slice out of range");
        let mut out = BitString::with_capacity(len);
        let mut pos = start;
        let end = start + len;
        while pos < end {
            let take = (end - pos).min(64) as u32;
            out.push_bits(self.read_bits(pos, take), take);
            pos += take as usize;
        }
        out
    }

    /// Reads up to 64 bits starting at `start`, least significant first.
    pub fn read_bits(&self, start: usize, count: u32) -> u64 {
        assert!(count <= 64 && start + count as usize <= self.len);
        if count == 0 {
            return 0;
        }
        let word = start / 64;
        let offset = (start % 64) as u32;
        let mut v = self.words[word] >> offset;
        if offset > 0 && offset + count > 64 {
            v |= self.words[word + 1] << (64 - offset);
        }
        if count < 64 {
            v &= (1u64 << count) - 1;
        }
        v
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        BitString {
            words,
            len: self.len,
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString[{}](", self.len)?;
        for (i, b) in self.iter().take(128).enumerate() {
            if i > 0 && i % 8 == 0 {
                f.write_str("_")?;
            }
            f.write_str(if b { "1" } else { "0" })?;
        }
        if self.len > 128 {
            f.write_str("..")?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn byte_order_is_little_endian() {
        let bits = BitString::from_bits(&[1, 0, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(bits.to_bytes_le(), vec![0x01, 0x02]);
    }

    #[test]
    fn push_bits_across_word_boundary() {
        let mut b = BitString::new();
        b.push_bits(0, 60);
        b.push_bits(0b1011, 4);
        b.push_bits(0b11, 2);
        assert_eq!(b.len(), 66);
        assert!(b.get(60) && b.get(61) && !b.get(62) && b.get(63));
        assert!(b.get(64) && b.get(65));
        assert_eq!(b.read_bits(60, 6), 0b111011);
    }

    proptest! {
        #[test]
        fn bytes_roundtrip(bits in proptest::collection::vec(0u8..2, 0..300)) {
            let b = BitString::from_bits(&bits);
            let back = BitString::from_bytes_le(&b.to_bytes_le(), bits.len());
            prop_assert_eq!(&back, &b);
            let collected: Vec<u8> = back.iter().map(u8::from).collect();
            prop_assert_eq!(collected, bits);
        }

        #[test]
        fn slice_and_extend_agree(bits in proptest::collection::vec(0u8..2, 1..400), cut in 0usize..400) {
            let b = BitString::from_bits(&bits);
            let cut = cut % (bits.len() + 1);
            let mut joined = b.slice(0, cut);
            joined.extend_from(&b.slice(cut, bits.len() - cut));
            prop_assert_eq!(joined, b);
        }
    }
}
