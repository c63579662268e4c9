//! Packed bit strings.
//!
//! Bit `k` of a stream lives in bit `k % 64` of word `k / 64`, least
//! significant first. Serialised to bytes the same rule applies per byte, so
//! the on-disk layout is bit `k % 8` of byte `k / 8`.

use std::io::{self, Read, Write};

/// A packed sequence of bits with an explicit length.
///
/// Storage beyond `len` is always zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = BitString::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                out.words[i / 64] |= 1 << (i % 64);
            }
        }
        out
    }

    /// Builds a bit string from packed words, clearing any bits past `len`.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.resize(words_for(len), 0);
        let mut out = BitString { words, len };
        out.clear_tail();
        out
    }

    /// Decodes `len` bits from an LSB-first byte stream. Missing bytes read as
    /// zero; extra bytes are ignored.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        let mut words = vec![0u64; words_for(len)];
        for (i, chunk) in bytes.chunks(8).take(words.len()).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            words[i] = u64::from_le_bytes(buf);
        }
        BitString::from_words(words, len)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(n);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(n);
        out
    }

    pub fn read_raw<R: Read>(mut reader: R, len: usize) -> io::Result<Self> {
        let mut bytes = vec![0u8; len.div_ceil(8)];
        reader.read_exact(&mut bytes)?;
        Ok(BitString::from_bytes(&bytes, len))
    }

    pub fn write_raw<W: Write>(&self, mut writer: W) -> io::Result<()> {
        writer.write_all(&self.to_bytes())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        if value {
            self.words[(self.len - 1) / 64] |= 1 << ((self.len - 1) % 64);
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Appends all bits of `other`.
    pub fn extend(&mut self, other: &BitString) {
        let shift = self.len % 64;
        if shift == 0 {
            self.words.extend_from_slice(&other.words);
        } else {
            for &w in &other.words {
                *self.words.last_mut().unwrap() |= w << shift;
                self.words.push(w >> (64 - shift));
            }
        }
        self.len += other.len;
        self.words.truncate(words_for(self.len));
        self.clear_tail();
    }

    /// Copies `len` bits starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len, "slice out of range");
        let mut words = vec![0u64; words_for(len)];
        xor_window(&mut words, &self.words, start, len);
        BitString { words, len }
    }

    /// XOR-assign another bit string of the same length.
    pub fn xor_assign(&mut self, other: &BitString) {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut out = BitString::default();
        for b in iter {
            out.push(b);
        }
        out
    }
}

/// Word `k` of the bit window of `src` starting at bit `offset`.
#[inline(always)]
pub(crate) fn window_word(src: &[u64], offset: usize, k: usize) -> u64 {
    let w = offset / 64 + k;
    let s = offset % 64;
    let lo = src.get(w).copied().unwrap_or(0);
    if s == 0 {
        lo
    } else {
        let hi = src.get(w + 1).copied().unwrap_or(0);
        (lo >> s) | (hi << (64 - s))
    }
}

/// `acc[0..len) ^= src[offset..offset+len)`. Bits of `acc` beyond `len` are
/// left untouched.
pub(crate) fn xor_window(acc: &mut [u64], src: &[u64], offset: usize, len: usize) {
    let full = len / 64;
    let s = offset % 64;
    let base = offset / 64;
    if s == 0 {
        for (a, &w) in acc[..full].iter_mut().zip(&src[base..base + full]) {
            *a ^= w;
        }
    } else if full > 0 {
        let win = &src[base..=base + full];
        for (k, a) in acc[..full].iter_mut().enumerate() {
            *a ^= (win[k] >> s) | (win[k + 1] << (64 - s));
        }
    }
    let rem = len % 64;
    if rem != 0 {
        acc[full] ^= window_word(src, offset, full) & ((1u64 << rem) - 1);
    }
}
