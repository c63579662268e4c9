//! Toeplitz hashing over GF(2).
//!
//! An `m x n` Toeplitz matrix is fixed by `m + n - 1` seed bits through
//! `T[i][j] = seed[(n - 1) + i - j]`. Column `j` of `T` is therefore the
//! contiguous seed slice starting at `n - 1 - j`, and row `i` is the reversed
//! seed read from `m - 1 - i`. The unblocked hash walks rows, the blocked hash
//! walks columns tile by tile; both reduce to word-wide XOR/popcount.

use serde::{Deserialize, Serialize};

use crate::bits::{window_word, words_for, xor_window, BitString};
use crate::error::{Error, Result};

/// Seed material for one `m x n` Toeplitz matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToeplitzSeed {
    seed: BitString,
    reversed: BitString,
    m: usize,
    n: usize,
}

impl ToeplitzSeed {
    pub fn new(seed: BitString, m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::param("m/n", "matrix dimensions must be positive"));
        }
        let expected = m + n - 1;
        if seed.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: seed.len(),
            });
        }
        let reversed = reverse(&seed);
        Ok(ToeplitzSeed {
            seed,
            reversed,
            m,
            n,
        })
    }

    /// Output length in bits.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Input length in bits.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &BitString {
        &self.seed
    }

    /// Matrix entry `T[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.seed.get(self.n - 1 + i - j)
    }
}

/// Tile shape for the iterative multiplication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingParams {
    pub m_prime: usize,
    pub n_prime: usize,
}

impl BlockingParams {
    pub fn new(m_prime: usize, n_prime: usize) -> Result<Self> {
        if m_prime == 0 {
            return Err(Error::param("m_prime", "must be at least 1"));
        }
        if n_prime == 0 {
            return Err(Error::param("n_prime", "must be at least 1"));
        }
        Ok(BlockingParams { m_prime, n_prime })
    }
}

impl Default for BlockingParams {
    fn default() -> Self {
        BlockingParams {
            m_prime: 2000,
            n_prime: 1,
        }
    }
}

fn reverse(bits: &BitString) -> BitString {
    let len = bits.len();
    let words = bits.words();
    let pad = words.len() * 64 - len;
    let flipped: Vec<u64> = words.iter().rev().map(|w| w.reverse_bits()).collect();
    let mut out = vec![0u64; words_for(len)];
    xor_window(&mut out, &flipped, pad, len);
    BitString::from_words(out, len)
}

fn check_input(seed: &ToeplitzSeed, input: &BitString) -> Result<()> {
    if input.len() != seed.n {
        return Err(Error::Dimension {
            expected: seed.n,
            actual: input.len(),
        });
    }
    Ok(())
}

/// Computes `T . input` over GF(2).
pub fn toeplitz_hash(seed: &ToeplitzSeed, input: &BitString) -> Result<BitString> {
    check_input(seed, input)?;
    let x = input.words();
    let rev = seed.reversed.words();
    let mut out = BitString::zeros(seed.m);
    for i in 0..seed.m {
        let offset = seed.m - 1 - i;
        let mut acc = 0u64;
        for (k, &xw) in x.iter().enumerate() {
            if xw != 0 {
                acc ^= xw & window_word(rev, offset, k);
            }
        }
        if acc.count_ones() & 1 == 1 {
            out.set(i, true);
        }
    }
    Ok(out)
}

/// Computes `T . input` by splitting `T` into `m' x n'` tiles and
/// accumulating partial products, consuming the input `n'` bits at a time.
///
/// Tiles are visited row-major. The result is identical to [`toeplitz_hash`].
pub fn blocked_toeplitz_hash(
    seed: &ToeplitzSeed,
    input: &BitString,
    blocking: BlockingParams,
) -> Result<BitString> {
    check_input(seed, input)?;
    if blocking.m_prime == 0 || blocking.n_prime == 0 {
        return Err(Error::param("blocking", "tile dimensions must be positive"));
    }
    let (m, n) = (seed.m, seed.n);
    let s = seed.seed.words();
    let x = input.words();
    let mut out = BitString::zeros(m);
    let mut tile = vec![0u64; words_for(blocking.m_prime.min(m))];

    let mut row0 = 0;
    while row0 < m {
        let rows = blocking.m_prime.min(m - row0);
        let tile = &mut tile[..words_for(rows)];
        tile.fill(0);
        let mut col0 = 0;
        while col0 < n {
            let cols = blocking.n_prime.min(n - col0);
            for j in set_bits(x, col0, col0 + cols) {
                xor_window(tile, s, n - 1 - j + row0, rows);
            }
            col0 += cols;
        }
        for i in 0..rows {
            if (tile[i / 64] >> (i % 64)) & 1 == 1 {
                out.set(row0 + i, true);
            }
        }
        row0 += rows;
    }
    Ok(out)
}

/// Indices of set bits in `[start, end)`.
fn set_bits(words: &[u64], start: usize, end: usize) -> impl Iterator<Item = usize> + '_ {
    let first = start / 64;
    let last = end.div_ceil(64);
    (first..last).flat_map(move |w| {
        let mut word = words[w];
        let base = w * 64;
        if base < start {
            word &= !0u64 << (start - base);
        }
        if base + 64 > end {
            let keep = end - base;
            if keep < 64 {
                word &= (1u64 << keep) - 1;
            }
        }
        std::iter::from_fn(move || {
            if word == 0 {
                None
            } else {
                let t = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(base + t)
            }
        })
    })
}

/// Clock cycles to hash `input_len` bits down to `output_len` bits with an
/// `m'`-row pipelined multiplier:
/// `input + output + (input + m') * ceil(output / m')`.
pub fn cycle_estimate(input_len: u64, output_len: u64, m_prime: u64) -> Result<u128> {
    if m_prime == 0 {
        return Err(Error::param("m_prime", "must be at least 1"));
    }
    let (i, o, mp) = (input_len as u128, output_len as u128, m_prime as u128);
    Ok(i + o + (i + mp) * o.div_ceil(mp))
}
