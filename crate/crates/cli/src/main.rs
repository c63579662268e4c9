use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use subhash::bbm92::{self, Scenario, ScenarioKind};
use subhash::pipeline::{self, AbortReason, ExtractionOptions};
use subhash::rng::KeyedStream;
use subhash::sampling::{self, SamplingPlan};
use subhash::toeplitz::{self, ToeplitzSeed};
use subhash::BitString;

mod config;

use config::RunConfig;

#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Infeasible(String),
    Abort(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Abort(_) => 4,
            Failure::Io(_) => 5,
        }
    }
}

impl From<subhash::Error> for Failure {
    fn from(e: subhash::Error) -> Self {
        match e {
            subhash::Error::Infeasible(m) => Failure::Infeasible(m),
            other => Failure::Parse(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "subhash", version, about = "Sampled sub-block Toeplitz hashing and finite-key calculators")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config, or a report carrying a `# config:` header
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, up to 64 hex digits
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    scenario: Option<ScenarioKind>,
    #[arg(long, global = true, conflicts_with = "ns_range")]
    ns: Option<u32>,
    /// Inclusive range `A..B`
    #[arg(long, global = true)]
    ns_range: Option<String>,
    #[arg(long, global = true)]
    optimize_px: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Secure key length for one scenario
    Keylen,
    /// Scenario comparison over a range of N_S, as CSV
    Sweep,
    /// Extract a key from simulated rounds or a sifted raw-bit file
    Extract {
        #[arg(long, conflicts_with = "input")]
        simulate: bool,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Input length in bits (default: whole file)
        #[arg(long)]
        input_len: Option<u64>,
    },
    /// Software hashing time, Full against Splitting
    Bench {
        /// Comma-separated input sizes in bits
        #[arg(long, value_delimiter = ',', default_value = "1000000")]
        sizes: Vec<u64>,
        /// Output bits per input bit
        #[arg(long, default_value_t = 6.054 / 96.04)]
        compression: f64,
    },
    /// Per-block length cap
    Limit {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        p_sift: f64,
        #[arg(long)]
        eps_abort: Option<f64>,
        #[arg(long)]
        m: Option<u64>,
    },
}

fn parse_range(s: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::Parse(format!("--ns-range expects A..B, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    Ok((a..=b).collect())
}

fn resolve(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &common.seed {
        cfg.seed = s.clone();
    }
    if let Some(k) = common.scenario {
        cfg.scenario = k;
    }
    if let Some(ns) = common.ns {
        cfg.n_subblocks = ns;
    }
    if common.out.is_some() {
        cfg.output = common.out.clone();
    }
    cfg.master_seed()?;
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string())),
    }
}

fn keylen(common: &Common, cfg: &RunConfig) -> Result<(), Failure> {
    let params = cfg.params()?;
    let scenario = cfg.scenario()?;
    let (p_x, key) = if common.optimize_px {
        let o = bbm92::optimize_px(&params, &scenario)?;
        (o.p_x, o.key)
    } else {
        (params.p_x, bbm92::key_length(&params, &scenario)?)
    };
    let mut r = String::new();
    writeln!(r, "# subhash keylen").unwrap();
    writeln!(r, "{}", cfg.header()).unwrap();
    writeln!(r, "scenario = {}", scenario.kind).unwrap();
    writeln!(r, "n_subblocks = {}", scenario.n_subblocks).unwrap();
    writeln!(r, "p_x = {p_x}").unwrap();
    writeln!(r, "length = {}", key.length).unwrap();
    writeln!(r, "rate = {}", key.length as f64 / params.n_rounds).unwrap();
    writeln!(r, "per_block = {}", key.per_block).unwrap();
    match key.alpha {
        Some(a) => writeln!(r, "alpha = {a}").unwrap(),
        None => writeln!(r, "alpha = none").unwrap(),
    }
    writeln!(r, "e_tangent = {}", key.e_tangent).unwrap();
    writeln!(r, "eps_smooth = {}", key.eps_smooth).unwrap();
    writeln!(r, "feasible = {}", key.feasible).unwrap();
    if !key.feasible {
        writeln!(r, "note = no positive key length at these parameters").unwrap();
    }
    emit(&r, cfg.output.as_deref())?;
    if key.feasible {
        Ok(())
    } else {
        Err(Failure::Infeasible("no positive key length".into()))
    }
}

fn sweep(common: &Common, cfg: &RunConfig) -> Result<(), Failure> {
    let params = cfg.params()?;
    let ns: Vec<u32> = match (&common.ns_range, common.ns) {
        (Some(r), _) => parse_range(r)?,
        (None, Some(n)) => vec![n],
        (None, None) => vec![cfg.n_subblocks],
    };
    eprintln!("{}", cfg.header());
    let rows = pipeline::scenario_compare(&params, &ns, common.optimize_px, cfg.blocking()?);
    let mut buf = Vec::new();
    pipeline::write_results_csv(&mut buf, &rows).map_err(|e| Failure::Io(e.to_string()))?;
    emit(std::str::from_utf8(&buf).expect("csv is ascii"), cfg.output.as_deref())
}

fn abort_text(reason: &AbortReason) -> String {
    match reason {
        AbortReason::Oversize { block, length, limit } => {
            format!("oversize block {} ({length} > {limit})", block + 1)
        }
        AbortReason::Statistics(m) => format!("statistics: {m}"),
    }
}

fn extract(cfg: &RunConfig, simulate: bool, input: Option<PathBuf>, input_len: Option<u64>) -> Result<(), Failure> {
    let params = cfg.params()?;
    let seed = cfg.master_seed()?;
    let ns = if cfg.scenario == ScenarioKind::Full { 1 } else { cfg.n_subblocks };
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| Failure::Parse("extract needs --out for the key file".into()))?;
    let opts = ExtractionOptions {
        blocking: cfg.blocking()?,
        stat_sigma: cfg.stat_sigma,
    };
    let input = input.or_else(|| cfg.input.clone());
    let mut r = String::new();
    writeln!(r, "# subhash extract").unwrap();
    writeln!(r, "{}", cfg.header()).unwrap();

    let (key, lengths, aborted) = if simulate || input.is_none() {
        if !simulate {
            return Err(Failure::Parse("extract needs --simulate or --input".into()));
        }
        let rep = pipeline::simulate_and_extract(&params, ns, &seed, &opts)?;
        writeln!(r, "block_limit = {}", rep.block_limit).unwrap();
        writeln!(r, "block_output = {}", rep.block_output).unwrap();
        writeln!(r, "total_epsilon = {}", rep.total_epsilon).unwrap();
        writeln!(r, "cycles = {}", rep.cycle_count).unwrap();
        writeln!(
            r,
            "test_errors = {} / {}\nkey_errors = {} / {}",
            rep.stats.test_errors, rep.stats.test_rounds, rep.stats.key_errors, rep.stats.key_rounds
        )
        .unwrap();
        writeln!(r, "wall_time = {:.3}", rep.wall_time).unwrap();
        (rep.key, rep.per_block_lengths, rep.aborted)
    } else {
        let path = input.unwrap();
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let len = input_len.or(cfg.input_len).unwrap_or(bytes.len() as u64 * 8);
        if len > bytes.len() as u64 * 8 {
            return Err(Failure::Io(format!("{}: shorter than {len} bits", path.display())));
        }
        let sifted = BitString::from_bytes(&bytes, len as usize);
        let key = bbm92::key_length(&params, &Scenario::splitting(ns)?)?;
        if !key.feasible {
            return Err(Failure::Infeasible(format!("no key at N = {} with N_S = {ns}", params.n_rounds)));
        }
        let plan = SamplingPlan::new(ns, params.eps_abort, seed)?.with_block_limit(len, 1.0 / ns as f64)?;
        let start = Instant::now();
        let x = pipeline::extract_sifted(&sifted, &plan, key.per_block as usize, opts.blocking)?;
        writeln!(r, "block_limit = {}", plan.block_limit.unwrap_or(0)).unwrap();
        writeln!(r, "block_output = {}", key.per_block).unwrap();
        writeln!(r, "wall_time = {:.3}", start.elapsed().as_secs_f64()).unwrap();
        (x.key, x.per_block_lengths, x.aborted)
    };
    let lengths: Vec<String> = lengths.iter().map(u64::to_string).collect();
    writeln!(r, "n_subblocks = {ns}").unwrap();
    writeln!(r, "per_block_lengths = {}", lengths.join(" ")).unwrap();
    if let Some(reason) = aborted {
        let why = abort_text(&reason);
        writeln!(r, "status = aborted: {why}").unwrap();
        print!("{r}");
        return Err(Failure::Abort(why));
    }
    writeln!(r, "key_bits = {}", key.len()).unwrap();
    writeln!(r, "monobit_z = {:.3}", pipeline::monobit_z(&key)).unwrap();
    writeln!(r, "status = ok").unwrap();
    let f = File::create(&out).map_err(io_err(&out))?;
    let mut w = BufWriter::new(f);
    key.write_raw(&mut w).and_then(|_| w.flush()).map_err(io_err(&out))?;
    print!("{r}");
    Ok(())
}

fn bench(cfg: &RunConfig, sizes: &[u64], compression: f64) -> Result<(), Failure> {
    let seed = cfg.master_seed()?;
    let blocking = cfg.blocking()?;
    let ns = cfg.n_subblocks.max(1);
    let mut r = String::from("input_bits,output_bits,N_S,full_seconds,split_seconds,measured_ratio,modeled_ratio\n");
    for &size in sizes {
        if size == 0 {
            return Err(Failure::Parse("bench sizes must be positive".into()));
        }
        let out = ((size as f64 * compression).round() as usize).max(ns as usize);
        let input = KeyedStream::new(&seed, "bench-input").bits(size as usize);

        let t = Instant::now();
        let full_seed = ToeplitzSeed::new(KeyedStream::new(&seed, "bench-seed").bits(out + size as usize - 1), out, size as usize)?;
        toeplitz::blocked_toeplitz_hash(&full_seed, &input, blocking)?;
        let full_s = t.elapsed().as_secs_f64();

        let plan = SamplingPlan::new(ns, cfg.eps_abort, seed)?.with_block_limit(size, 1.0 / ns as f64)?;
        let t = Instant::now();
        pipeline::extract_sifted(&input, &plan, out.div_ceil(ns as usize), blocking)?;
        let split_s = t.elapsed().as_secs_f64();

        let full_c = pipeline::timing_model(size, out as u64, &Scenario::full(), blocking, None)?;
        let split_c = pipeline::timing_model(size, out as u64, &Scenario::splitting(ns)?, blocking, plan.block_limit)?;
        writeln!(
            r,
            "{size},{out},{ns},{full_s:.6},{split_s:.6},{:.4},{:.4}",
            full_s / split_s,
            full_c as f64 / split_c as f64
        )
        .unwrap();
    }
    emit(&r, cfg.output.as_deref())
}

fn limit(cfg: &RunConfig, n: u64, p_sift: f64, eps_abort: Option<f64>, m: Option<u64>) -> Result<(), Failure> {
    let eps = eps_abort.unwrap_or(cfg.eps_abort);
    let m = m.unwrap_or(cfg.n_subblocks as u64);
    let l = sampling::block_limit(n, p_sift, eps, m)?;
    emit(&format!("{l}\n"), cfg.output.as_deref())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(&cli.common)?;
    match cli.command {
        Command::Keylen => keylen(&cli.common, &cfg),
        Command::Sweep => sweep(&cli.common, &cfg),
        Command::Extract {
            simulate,
            input,
            input_len,
        } => extract(&cfg, simulate, input, input_len),
        Command::Bench { sizes, compression } => bench(&cfg, &sizes, compression),
        Command::Limit { n, p_sift, eps_abort, m } => limit(&cfg, n, p_sift, eps_abort, m),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Parse(m) => eprintln!("error: {m}"),
                Failure::Infeasible(m) => eprintln!("infeasible: {m}"),
                Failure::Abort(m) => eprintln!("aborted: {m}"),
                Failure::Io(m) => eprintln!("i/o error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
