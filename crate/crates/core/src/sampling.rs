//! Random assignment of rounds to sub-blocks and the per-block size cap.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::{KeyedStream, MasterSeed};

const SAMPLING_TAG: &str = "sampling";
const CHUNK: usize = 1 << 16;

/// Sub-block sampling configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    pub n_subblocks: u32,
    /// Probability budget for the oversize-block abort, `eps_abort`.
    pub eps_abort: f64,
    /// Per-block length cap; `None` until computed.
    pub block_limit: Option<u64>,
    pub master_seed: MasterSeed,
}

impl SamplingPlan {
    pub fn new(n_subblocks: u32, eps_abort: f64, master_seed: MasterSeed) -> Result<Self> {
        if n_subblocks == 0 {
            return Err(Error::param("n_subblocks", "must be at least 1"));
        }
        if !(eps_abort > 0.0 && eps_abort < 1.0) {
            return Err(Error::domain("eps_abort", eps_abort, "(0, 1)"));
        }
        Ok(SamplingPlan {
            n_subblocks,
            eps_abort,
            block_limit: None,
            master_seed,
        })
    }

    /// Sampling probability `1 / N_S`.
    pub fn p_sample(&self) -> f64 {
        1.0 / self.n_subblocks as f64
    }

    /// Fills in `block_limit` for `n_rounds` rounds whose per-round chance of
    /// landing in a given sifted sub-block is `p_sift`. The abort budget is
    /// split evenly over the `N_S` blocks.
    pub fn with_block_limit(mut self, n_rounds: u64, p_sift: f64) -> Result<Self> {
        let limit = if self.n_subblocks == 1 && p_sift >= 1.0 {
            n_rounds
        } else {
            block_limit(n_rounds, p_sift, self.eps_abort, self.n_subblocks as u64)?
        };
        self.block_limit = Some(limit.max(1));
        Ok(self)
    }
}

/// Assignment of every round to a sub-block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    /// Zero-based block index per round (the one-based label is `index + 1`).
    pub assignments: Vec<u32>,
    /// Raw (unsifted) round count per block.
    pub raw_counts: Vec<u64>,
}

impl Partition {
    pub fn n_subblocks(&self) -> usize {
        self.raw_counts.len()
    }

    pub fn n_rounds(&self) -> usize {
        self.assignments.len()
    }
}

/// Draws `V_i` uniformly on the `n_subblocks` blocks for every round.
///
/// Round `i` uses value `i` of the `"sampling"` stream, so the partition does
/// not depend on how the work is scheduled.
pub fn assign_subblocks(n_rounds: usize, n_subblocks: u32, seed: &MasterSeed) -> Result<Partition> {
    if n_subblocks == 0 {
        return Err(Error::param("n_subblocks", "must be at least 1"));
    }
    let mut assignments = vec![0u32; n_rounds];
    if n_subblocks > 1 {
        assignments
            .par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let mut stream = KeyedStream::at(seed, SAMPLING_TAG, (c * CHUNK) as u64);
                for v in chunk.iter_mut() {
                    *v = stream.next_below(n_subblocks as u64) as u32;
                }
            });
    }
    let mut raw_counts = vec![0u64; n_subblocks as usize];
    for &v in &assignments {
        raw_counts[v as usize] += 1;
    }
    Ok(Partition {
        assignments,
        raw_counts,
    })
}

/// Sifted index sets, one per sub-block, each in round order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiftedBlocks {
    pub blocks: Vec<Vec<usize>>,
}

impl SiftedBlocks {
    pub fn lengths(&self) -> Vec<u64> {
        self.blocks.iter().map(|b| b.len() as u64).collect()
    }

    pub fn max_len(&self) -> u64 {
        self.blocks.iter().map(|b| b.len() as u64).max().unwrap_or(0)
    }
}

/// `S'_j = { i : V_i = j and keep[i] }`.
pub fn sift_partition(keep: &[bool], partition: &Partition) -> Result<SiftedBlocks> {
    if keep.len() != partition.n_rounds() {
        return Err(Error::param(
            "round_flags",
            format!(
                "{} flags for a partition of {} rounds",
                keep.len(),
                partition.n_rounds()
            ),
        ));
    }
    let mut blocks = vec![Vec::new(); partition.n_subblocks()];
    for (i, (&k, &v)) in keep.iter().zip(&partition.assignments).enumerate() {
        if k {
            blocks[v as usize].push(i);
        }
    }
    Ok(SiftedBlocks { blocks })
}

/// Writes `round_index,V_i,kept` rows (one-based `V_i`).
pub fn write_partition_csv<W: Write>(mut w: W, partition: &Partition, keep: &[bool]) -> io::Result<()> {
    writeln!(w, "round_index,V_i,kept")?;
    for (i, &v) in partition.assignments.iter().enumerate() {
        let kept = keep.get(i).copied().unwrap_or(false) as u8;
        writeln!(w, "{},{},{}", i, v + 1, kept)?;
    }
    Ok(())
}

/// Binary relative entropy in nats,
/// `x ln(x/p) + (1-x) ln((1-x)/(1-p))`.
pub fn relative_entropy(x: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("p", p, "(0, 1)"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("x", x, "[0, 1]"));
    }
    let a = if x == 0.0 { 0.0 } else { x * (x / p).ln() };
    let b = if x == 1.0 {
        0.0
    } else {
        (1.0 - x) * ((1.0 - x) / (1.0 - p)).ln()
    };
    Ok((a + b).max(0.0))
}

/// Upper bound on `Pr[Bin(n, p) > limit]`.
///
/// For `limit >= n p` this is `1 - Phi(sqrt(2 n H(limit/n, p)))`, evaluated
/// as `erfc(sqrt(n H)) / 2`. Below the mean only the trivial bound 1 holds.
pub fn binomial_tail_bound(n_rounds: u64, p: f64, limit: u64) -> Result<f64> {
    if limit >= n_rounds {
        return Ok(0.0);
    }
    let n = n_rounds as f64;
    let x = limit as f64 / n;
    if x < p {
        return Ok(1.0);
    }
    if x == p {
        return Ok(0.5);
    }
    let h = relative_entropy(x, p)?;
    Ok(0.5 * erfc((n * h).sqrt()))
}

/// Smallest `L >= ceil(n p)` whose tail bound is at most `eps_abort / m_blocks`.
pub fn block_limit(n_rounds: u64, p_sift: f64, eps_abort: f64, m_blocks: u64) -> Result<u64> {
    if !(p_sift > 0.0 && p_sift < 1.0) {
        return Err(Error::domain("p_sift", p_sift, "(0, 1)"));
    }
    if !(eps_abort > 0.0 && eps_abort < 1.0) {
        return Err(Error::domain("eps_abort", eps_abort, "(0, 1)"));
    }
    if m_blocks == 0 {
        return Err(Error::param("m_blocks", "must be at least 1"));
    }
    if n_rounds == 0 {
        return Err(Error::param("n_rounds", "must be at least 1"));
    }
    let target = eps_abort / m_blocks as f64;
    if target < 1e-300 {
        return Err(Error::Infeasible(format!(
            "abort threshold {target:e} is below double-precision range"
        )));
    }
    let mut lo = (n_rounds as f64 * p_sift).ceil() as u64;
    if binomial_tail_bound(n_rounds, p_sift, lo)? <= target {
        return Ok(lo);
    }
    // a block can never exceed n, so the tail at n is exactly zero
    let mut hi = n_rounds;
    // invariant: bound(lo) > target >= bound(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if binomial_tail_bound(n_rounds, p_sift, mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortCheck {
    Pass,
    Abort { block: usize, length: u64 },
}

/// Aborts iff some block is strictly longer than the limit.
pub fn abort_check(lengths: &[u64], block_limit: u64) -> AbortCheck {
    match lengths.iter().position(|&l| l > block_limit) {
        Some(block) => AbortCheck::Abort {
            block,
            length: lengths[block],
        },
        None => AbortCheck::Pass,
    }
}
