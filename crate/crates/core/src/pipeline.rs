//! Simulated BBM92 runs, sampled sub-block extraction and the throughput
//! model.

use std::io::{self, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbm92::{self, Bbm92Params, Scenario, ScenarioKind};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rng::{KeyedStream, MasterSeed};
use crate::sampling::{self, AbortCheck, SamplingPlan};
use crate::toeplitz::{self, BlockingParams, ToeplitzSeed};

const CHUNK: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

/// One protocol round. Bits are `None` when nothing was detected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub basis_a: Basis,
    pub basis_b: Basis,
    pub detected: bool,
    pub bit_a: Option<bool>,
    pub bit_b: Option<bool>,
    pub is_test: bool,
}

impl RoundRecord {
    /// Detected, both in Z: contributes to the raw key.
    pub fn is_key(&self) -> bool {
        self.detected && self.basis_a == Basis::Z && self.basis_b == Basis::Z
    }

    pub fn mismatch(&self) -> bool {
        matches!((self.bit_a, self.bit_b), (Some(a), Some(b)) if a != b)
    }
}

struct RoundStreams {
    basis_a: KeyedStream,
    basis_b: KeyedStream,
    detect: KeyedStream,
    bit_a: KeyedStream,
    flip: KeyedStream,
    phase: KeyedStream,
    bit_b: KeyedStream,
}

impl RoundStreams {
    fn at(seed: &MasterSeed, index: u64) -> Self {
        let s = |tag| KeyedStream::at(seed, tag, index);
        RoundStreams {
            basis_a: s("basis-a"),
            basis_b: s("basis-b"),
            detect: s("detect"),
            bit_a: s("bit-a"),
            flip: s("flip"),
            phase: s("phase"),
            bit_b: s("bit-b"),
        }
    }

    // every stream advances exactly once per round
    fn next(&mut self, p: &Bbm92Params) -> RoundRecord {
        let basis = |x: bool| if x { Basis::X } else { Basis::Z };
        let basis_a = basis(self.basis_a.bernoulli(p.p_x));
        let basis_b = basis(self.basis_b.bernoulli(p.p_x));
        let detected = self.detect.bernoulli(p.p_det);
        let a = self.bit_a.next_u64() & 1 == 1;
        let flip = self.flip.bernoulli(p.e_bit);
        let phase = self.phase.bernoulli(p.e_ph);
        let other = self.bit_b.next_u64() & 1 == 1;
        let b = match (basis_a, basis_b) {
            (Basis::Z, Basis::Z) => a ^ flip,
            (Basis::X, Basis::X) => a ^ phase,
            _ => other,
        };
        RoundRecord {
            basis_a,
            basis_b,
            detected,
            bit_a: detected.then_some(a),
            bit_b: detected.then_some(b),
            is_test: basis_a == Basis::X && basis_b == Basis::X,
        }
    }
}

/// Generates `params.n_rounds` rounds. Round `i` reads position `i` of each
/// purpose-tagged stream, so output is independent of scheduling.
pub fn simulate_rounds(params: &Bbm92Params, master_seed: &MasterSeed) -> Result<Vec<RoundRecord>> {
    // p_x = 1 is a legitimate simulation input even though no key can follow
    let check = Bbm92Params {
        p_x: params.p_x.clamp(1e-300, 0.5),
        ..params.clone()
    };
    check.validate()?;
    if !(0.0..=1.0).contains(&params.p_x) {
        return Err(Error::domain("p_x", params.p_x, "[0, 1]"));
    }
    let n = params.n_rounds as usize;
    let placeholder = RoundRecord {
        basis_a: Basis::Z,
        basis_b: Basis::Z,
        detected: false,
        bit_a: None,
        bit_b: None,
        is_test: false,
    };
    let mut rounds = vec![placeholder; n];
    rounds.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut streams = RoundStreams::at(master_seed, (c * CHUNK) as u64);
        for r in chunk.iter_mut() {
            *r = streams.next(params);
        }
    });
    Ok(rounds)
}

/// Observed counts after a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub key_rounds: u64,
    pub key_errors: u64,
    pub test_rounds: u64,
    pub test_errors: u64,
}

impl RoundStats {
    pub fn collect(rounds: &[RoundRecord]) -> Self {
        let mut s = RoundStats::default();
        for r in rounds.iter().filter(|r| r.detected) {
            if r.is_test {
                s.test_rounds += 1;
                s.test_errors += r.mismatch() as u64;
            } else if r.is_key() {
                s.key_rounds += 1;
                s.key_errors += r.mismatch() as u64;
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AbortReason {
    /// A sifted sub-block exceeded the length cap.
    Oversize { block: usize, length: u64, limit: u64 },
    /// Observed error counts above tolerance.
    Statistics(String),
}

/// Knobs that are not security parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractionOptions {
    pub blocking: BlockingParams,
    /// Allowed excess of observed error counts, in binomial standard
    /// deviations above the tolerated rate.
    pub stat_sigma: f64,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            blocking: BlockingParams::default(),
            stat_sigma: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionReport {
    pub key: BitString,
    pub per_block_lengths: Vec<u64>,
    /// Output bits per block, `l~`.
    pub block_output: u64,
    pub block_limit: u64,
    pub total_epsilon: f64,
    pub aborted: Option<AbortReason>,
    pub stats: RoundStats,
    pub cycle_count: u128,
    pub wall_time: f64,
}

fn excess(count: u64, trials: u64, rate: f64, sigma: f64) -> bool {
    let n = trials as f64;
    let sd = (n * rate * (1.0 - rate)).sqrt();
    count as f64 > n * rate + sigma * sd.max(1.0)
}

fn statistics_check(stats: &RoundStats, sec: &Bbm92Params, sigma: f64) -> Option<AbortReason> {
    if excess(stats.test_errors, stats.test_rounds, sec.q_tol, sigma) {
        return Some(AbortReason::Statistics(format!(
            "{} phase errors in {} test rounds exceeds tolerance {}",
            stats.test_errors, stats.test_rounds, sec.q_tol
        )));
    }
    if excess(stats.key_errors, stats.key_rounds, sec.e_bit, sigma) {
        return Some(AbortReason::Statistics(format!(
            "{} bit errors in {} key rounds exceeds the error-correction budget {}",
            stats.key_errors, stats.key_rounds, sec.e_bit
        )));
    }
    None
}

/// Seed for block `j`, from the `"toeplitz-seed/{j}"` stream.
pub fn block_seed(master_seed: &MasterSeed, block: usize, m: usize, n: usize) -> Result<ToeplitzSeed> {
    let bits = KeyedStream::new(master_seed, &format!("toeplitz-seed/{block}")).bits(m + n - 1);
    ToeplitzSeed::new(bits, m, n)
}

/// Sifts, partitions, checks, hashes every block to `l~` bits and
/// concatenates.
pub fn run_extraction(rounds: &[RoundRecord], plan: &SamplingPlan, sec: &Bbm92Params) -> Result<ExtractionReport> {
    run_extraction_with(rounds, plan, sec, &ExtractionOptions::default())
}

pub fn run_extraction_with(
    rounds: &[RoundRecord],
    plan: &SamplingPlan,
    sec: &Bbm92Params,
    opts: &ExtractionOptions,
) -> Result<ExtractionReport> {
    let start = Instant::now();
    if sec.n_rounds as usize != rounds.len() {
        return Err(Error::param(
            "n_rounds",
            format!("security parameters for {} rounds, {} supplied", sec.n_rounds, rounds.len()),
        ));
    }
    let limit = plan
        .block_limit
        .ok_or_else(|| Error::param("block_limit", "sampling plan has no block limit"))?;
    let scenario = Scenario::splitting(plan.n_subblocks)?;
    let sec = Bbm92Params {
        eps_abort: plan.eps_abort,
        ..sec.clone()
    };
    let key_len = bbm92::key_length(&sec, &scenario)?;
    if !key_len.feasible {
        return Err(Error::Infeasible(format!(
            "no key at N = {} with N_S = {}",
            sec.n_rounds, plan.n_subblocks
        )));
    }
    let out_len = key_len.per_block as usize;
    let total_epsilon = bbm92::block_secrecy_budget(&sec, &scenario) * plan.n_subblocks as f64 + plan.eps_abort;

    let keep: Vec<bool> = rounds.iter().map(|r| r.is_key()).collect();
    let partition = sampling::assign_subblocks(rounds.len(), plan.n_subblocks, &plan.master_seed)?;
    let blocks = sampling::sift_partition(&keep, &partition)?;
    let lengths = blocks.lengths();
    let stats = RoundStats::collect(rounds);
    let sifted: u64 = lengths.iter().sum();
    let cycle_count = timing_model(sifted, out_len as u64 * plan.n_subblocks as u64, &scenario, opts.blocking, Some(limit))?;

    let mut report = ExtractionReport {
        key: BitString::zeros(0),
        per_block_lengths: lengths.clone(),
        block_output: out_len as u64,
        block_limit: limit,
        total_epsilon,
        aborted: None,
        stats,
        cycle_count,
        wall_time: 0.0,
    };
    if let AbortCheck::Abort { block, length } = sampling::abort_check(&lengths, limit) {
        report.aborted = Some(AbortReason::Oversize { block, length, limit });
    } else if let Some(reason) = statistics_check(&stats, &sec, opts.stat_sigma) {
        report.aborted = Some(reason);
    }
    if report.aborted.is_some() {
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok(report);
    }

    let inputs: Vec<BitString> = blocks
        .blocks
        .iter()
        .map(|idx| idx.iter().map(|&i| rounds[i].bit_a == Some(true)).collect())
        .collect();
    report.key = hash_blocks(&inputs, &plan.master_seed, out_len, opts.blocking)?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Hashes block `j` with the seed from [`block_seed`] and concatenates.
pub fn hash_blocks(inputs: &[BitString], master_seed: &MasterSeed, out_len: usize, blocking: BlockingParams) -> Result<BitString> {
    let outputs: Vec<BitString> = inputs
        .par_iter()
        .enumerate()
        .map(|(j, input)| {
            if input.is_empty() || out_len == 0 {
                return Ok(BitString::zeros(out_len));
            }
            let seed = block_seed(master_seed, j, out_len, input.len())?;
            toeplitz::blocked_toeplitz_hash(&seed, input, blocking)
        })
        .collect::<Result<_>>()?;
    let mut key = BitString::zeros(0);
    for o in &outputs {
        key.extend(o);
    }
    Ok(key)
}

/// Outcome of extracting from an already sifted string.
#[derive(Clone, Debug, PartialEq)]
pub struct SiftedExtraction {
    pub key: BitString,
    pub per_block_lengths: Vec<u64>,
    pub aborted: Option<AbortReason>,
}

/// Samples every bit of `sifted` into a block, applies the length cap and
/// hashes each block to `out_len` bits. No test statistics are available here.
pub fn extract_sifted(sifted: &BitString, plan: &SamplingPlan, out_len: usize, blocking: BlockingParams) -> Result<SiftedExtraction> {
    let limit = plan
        .block_limit
        .ok_or_else(|| Error::param("block_limit", "sampling plan has no block limit"))?;
    let partition = sampling::assign_subblocks(sifted.len(), plan.n_subblocks, &plan.master_seed)?;
    let mut inputs = vec![BitString::zeros(0); plan.n_subblocks as usize];
    for (i, &v) in partition.assignments.iter().enumerate() {
        inputs[v as usize].push(sifted.get(i));
    }
    let per_block_lengths: Vec<u64> = inputs.iter().map(|b| b.len() as u64).collect();
    if let AbortCheck::Abort { block, length } = sampling::abort_check(&per_block_lengths, limit) {
        return Ok(SiftedExtraction {
            key: BitString::zeros(0),
            per_block_lengths,
            aborted: Some(AbortReason::Oversize { block, length, limit }),
        });
    }
    Ok(SiftedExtraction {
        key: hash_blocks(&inputs, &plan.master_seed, out_len, blocking)?,
        per_block_lengths,
        aborted: None,
    })
}

/// Cap used when timing a splitting run over `input_len` sifted bits.
pub fn splitting_block_limit(input_len: u64, n_subblocks: u32, eps_abort: f64) -> Result<u64> {
    if n_subblocks <= 1 {
        return Ok(input_len);
    }
    sampling::block_limit(input_len, 1.0 / n_subblocks as f64, eps_abort, n_subblocks as u64)
}

/// Default abort budget for the timing cap.
pub const DEFAULT_EPS_ABORT: f64 = 1e-8;

/// Modeled cycles to hash `input_len` sifted bits to `output_len` key bits.
///
/// Splitting pads each block to the cap `block_limit` (computed with
/// [`DEFAULT_EPS_ABORT`] when `None`) and hashes the blocks sequentially.
pub fn timing_model(
    input_len: u64,
    output_len: u64,
    scenario: &Scenario,
    blocking: BlockingParams,
    block_limit: Option<u64>,
) -> Result<u128> {
    let mp = blocking.m_prime as u64;
    let ns = scenario.n_subblocks as u64;
    match scenario.kind {
        ScenarioKind::Full => toeplitz::cycle_estimate(input_len, output_len, mp),
        ScenarioKind::Splitting => {
            let limit = match block_limit {
                Some(l) => l,
                None => splitting_block_limit(input_len, scenario.n_subblocks, DEFAULT_EPS_ABORT)?,
            };
            Ok(ns as u128 * toeplitz::cycle_estimate(limit, output_len.div_ceil(ns), mp)?)
        }
        ScenarioKind::SmallBlock => Ok(ns as u128 * toeplitz::cycle_estimate(input_len / ns, output_len / ns, mp)?),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Ok,
    Infeasible,
    Error(String),
}

impl PointStatus {
    pub fn as_str(&self) -> &str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Infeasible => "infeasible",
            PointStatus::Error(_) => "error",
        }
    }
}

/// One row of a scenario sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: ScenarioKind,
    pub n_subblocks: u32,
    pub p_x: f64,
    pub length: u64,
    pub rate: f64,
    pub epsilon: f64,
    pub cycles: u128,
    pub rate_per_cycle: f64,
    pub status: PointStatus,
}

/// Evaluates one sweep point. Never fails; problems land in `status`.
pub fn evaluate_point(params: &Bbm92Params, scenario: &Scenario, optimize_px: bool, blocking: BlockingParams) -> ScenarioResult {
    let mut row = ScenarioResult {
        scenario: scenario.kind,
        n_subblocks: scenario.n_subblocks,
        p_x: params.p_x,
        length: 0,
        rate: 0.0,
        epsilon: params.eps_sec,
        cycles: 0,
        rate_per_cycle: 0.0,
        status: PointStatus::Ok,
    };
    let solved = if optimize_px {
        bbm92::optimize_px(params, scenario).map(|o| (o.p_x, o.key))
    } else {
        bbm92::key_length(params, scenario).map(|k| (params.p_x, k))
    };
    let (p_x, key) = match solved {
        Ok(v) => v,
        Err(Error::Infeasible(_)) => {
            row.status = PointStatus::Infeasible;
            return row;
        }
        Err(e) => {
            row.status = PointStatus::Error(e.to_string());
            return row;
        }
    };
    row.p_x = p_x;
    row.length = key.length;
    row.rate = key.length as f64 / params.n_rounds;
    if !key.feasible {
        row.status = PointStatus::Infeasible;
        return row;
    }
    let tuned = Bbm92Params { p_x, ..params.clone() };
    let sifted = (params.n_rounds * tuned.p_z() * tuned.p_z() * tuned.p_det).round() as u64;
    let limit = match scenario.kind {
        ScenarioKind::Splitting => splitting_block_limit(sifted, scenario.n_subblocks, scenario.eps_abort(params).max(f64::MIN_POSITIVE)).ok(),
        _ => None,
    };
    match timing_model(sifted, key.length, scenario, blocking, limit) {
        Ok(c) => {
            row.cycles = c;
            row.rate_per_cycle = key.length as f64 / c as f64;
        }
        Err(e) => row.status = PointStatus::Error(e.to_string()),
    }
    row
}

/// Full once, then Splitting and SmallBlock for each `N_S` in order.
pub fn scenario_compare(params: &Bbm92Params, ns_range: &[u32], optimize_px: bool, blocking: BlockingParams) -> Vec<ScenarioResult> {
    let mut points = Vec::new();
    if !ns_range.is_empty() {
        points.push(Ok(Scenario::full()));
    }
    for kind in [ScenarioKind::Splitting, ScenarioKind::SmallBlock] {
        points.extend(ns_range.iter().map(|&ns| Scenario::new(kind, ns).map_err(|e| (kind, ns, e))));
    }
    points
        .par_iter()
        .map(|p| match p {
            Ok(s) => evaluate_point(params, s, optimize_px, blocking),
            Err((kind, ns, e)) => ScenarioResult {
                scenario: *kind,
                n_subblocks: *ns,
                p_x: params.p_x,
                length: 0,
                rate: 0.0,
                epsilon: params.eps_sec,
                cycles: 0,
                rate_per_cycle: 0.0,
                status: PointStatus::Error(e.to_string()),
            },
        })
        .collect()
}

pub const CSV_HEADER: &str = "scenario,N_S,p_X,l,l_per_signal,epsilon,cycles,rate_per_cycle,status";

pub fn write_results_csv<W: Write>(mut w: W, rows: &[ScenarioResult]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.n_subblocks,
            r.p_x,
            r.length,
            r.rate,
            r.epsilon,
            r.cycles,
            r.rate_per_cycle,
            r.status.as_str()
        )?;
    }
    Ok(())
}

/// Monobit statistic `(ones - zeros) / sqrt(n)`, standard normal for
/// uniform bits.
pub fn monobit_z(bits: &BitString) -> f64 {
    let n = bits.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    (2.0 * bits.count_ones() as f64 - n) / n.sqrt()
}

/// Simulates `params.n_rounds` rounds and extracts with `N_S` blocks.
pub fn simulate_and_extract(
    params: &Bbm92Params,
    n_subblocks: u32,
    master_seed: &MasterSeed,
    opts: &ExtractionOptions,
) -> Result<ExtractionReport> {
    let rounds = simulate_rounds(params, master_seed)?;
    let p_sift = params.p_z() * params.p_z() * params.p_det / n_subblocks as f64;
    let plan = SamplingPlan::new(n_subblocks, params.eps_abort, *master_seed)?.with_block_limit(rounds.len() as u64, p_sift)?;
    run_extraction_with(&rounds, &plan, params, opts)
}
