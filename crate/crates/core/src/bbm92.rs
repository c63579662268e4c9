//! Finite-key security model for entanglement-based BBM92.
//!
//! The key length and secrecy solvers cover three ways of processing `N`
//! rounds:
//!
//! * `Full`: one hash over the whole sifted string.
//! * `Splitting`: sampled sub-block hashing. Each of the `N_S` blocks sees the
//!   min-tradeoff function scaled by `p_S = 1/N_S` over all `N` rounds, and a
//!   secrecy share `(eps_sec - eps_abort) / N_S`.
//! * `SmallBlock`: `N_S` independent runs of `N / N_S` rounds, each with
//!   secrecy `eps_sec / N_S`.
//!
//! All optimisation is deterministic: fixed grids refined by golden section.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geat::{self, full_bound_raw, g_from_log2, simplified_bound_raw, MinTradeoff};
use crate::search::maximize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageModel {
    /// `N p_Z^2 p_det f_EC h(e_bit)`: syndrome proportional to the sifted length.
    SiftedScaled,
    /// `N f_EC h(e_bit)`.
    Unscaled,
}

/// How `p_Omega` enters the entropy bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum POmega {
    /// Worst case over `p_Omega >= eps`, i.e. `p_Omega = eps` where `eps` is
    /// the secrecy budget of the run owning the abort event.
    WorstCase,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// Explicit Renyi order, optimised over `alpha`.
    Full,
    /// `N h - v1 sqrt(N) - v0`.
    Simplified,
}

/// Protocol and security parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bbm92Params {
    pub n_rounds: f64,
    /// Test-basis probability; `p_z = 1 - p_x`.
    pub p_x: f64,
    pub e_ph: f64,
    pub e_bit: f64,
    pub q_tol: f64,
    pub eta_tol: f64,
    pub f_ec: f64,
    pub p_det: f64,
    pub d_x: u32,
    pub eps_sec: f64,
    /// Oversize-block abort budget charged to the splitting scenario.
    pub eps_abort: f64,
    pub leakage: LeakageModel,
    /// Charge each sub-block only its own share of the syndrome.
    pub per_block_syndrome: bool,
    pub p_omega: POmega,
    pub bound: BoundForm,
}

impl Default for Bbm92Params {
    fn default() -> Self {
        Bbm92Params {
            n_rounds: 1e9,
            p_x: 0.02,
            e_ph: 0.0082,
            e_bit: 0.058,
            q_tol: 0.0082,
            eta_tol: 1.0,
            f_ec: 1.16,
            p_det: 1.0,
            d_x: 2,
            eps_sec: 1e-6,
            eps_abort: 1e-8,
            leakage: LeakageModel::SiftedScaled,
            per_block_syndrome: true,
            p_omega: POmega::WorstCase,
            bound: BoundForm::Full,
        }
    }
}

impl Bbm92Params {
    pub fn p_z(&self) -> f64 {
        1.0 - self.p_x
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::domain(name, v, "[0, 1]"))
            }
        };
        if !(self.n_rounds >= 1.0) {
            return Err(Error::domain("n_rounds", self.n_rounds, "[1, inf)"));
        }
        if !(self.p_x > 0.0 && self.p_x < 1.0) {
            return Err(Error::domain("p_x", self.p_x, "(0, 1)"));
        }
        for (name, v) in [("e_ph", self.e_ph), ("e_bit", self.e_bit)] {
            if !(0.0..=0.5).contains(&v) {
                return Err(Error::domain(name, v, "[0, 0.5]"));
            }
        }
        unit("q_tol", self.q_tol)?;
        unit("eta_tol", self.eta_tol)?;
        unit("p_det", self.p_det)?;
        unit("eps_abort", self.eps_abort)?;
        if !(self.f_ec >= 1.0) {
            return Err(Error::domain("f_ec", self.f_ec, "[1, inf)"));
        }
        if self.d_x < 2 {
            return Err(Error::param("d_x", "dimension must be at least 2"));
        }
        if !(self.eps_sec > 0.0 && self.eps_sec < 1.0) {
            return Err(Error::domain("eps_sec", self.eps_sec, "(0, 1)"));
        }
        if let POmega::Fixed(p) = self.p_omega {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::domain("p_omega", p, "(0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Full,
    Splitting,
    SmallBlock,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Full, ScenarioKind::Splitting, ScenarioKind::SmallBlock];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Full => "full",
            ScenarioKind::Splitting => "splitting",
            ScenarioKind::SmallBlock => "smallblock",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(ScenarioKind::Full),
            "splitting" | "split" => Ok(ScenarioKind::Splitting),
            "smallblock" | "small-block" | "small" => Ok(ScenarioKind::SmallBlock),
            other => Err(Error::param("scenario", format!("unknown scenario {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub n_subblocks: u32,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, n_subblocks: u32) -> Result<Self> {
        if n_subblocks == 0 {
            return Err(Error::param("n_subblocks", "must be at least 1"));
        }
        if kind == ScenarioKind::Full && n_subblocks != 1 {
            return Err(Error::param("n_subblocks", "the full scenario uses a single block"));
        }
        Ok(Scenario { kind, n_subblocks })
    }

    pub fn full() -> Self {
        Scenario {
            kind: ScenarioKind::Full,
            n_subblocks: 1,
        }
    }

    pub fn splitting(n_subblocks: u32) -> Result<Self> {
        Scenario::new(ScenarioKind::Splitting, n_subblocks)
    }

    pub fn small_block(n_subblocks: u32) -> Result<Self> {
        Scenario::new(ScenarioKind::SmallBlock, n_subblocks)
    }

    /// Abort budget charged to this scenario.
    pub fn eps_abort(&self, params: &Bbm92Params) -> f64 {
        if self.kind == ScenarioKind::Splitting {
            params.eps_abort
        } else {
            0.0
        }
    }
}

/// `h_b(x)` in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("x", x, "[0, 1]"));
    }
    Ok(h_b(x))
}

fn h_b(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Affine min-tradeoff function tangent to `1 - h(e_ph)` at `e_tangent`.
pub fn min_tradeoff(params: &Bbm92Params, e_tangent: f64) -> Result<MinTradeoff> {
    if !(e_tangent > 0.0 && e_tangent < 0.5) {
        return Err(Error::domain("e_tangent", e_tangent, "(0, 0.5)"));
    }
    Ok(tradeoff_unchecked(params, e_tangent))
}

fn tradeoff_unchecked(params: &Bbm92Params, e: f64) -> MinTradeoff {
    let pz2 = params.p_z() * params.p_z();
    let top = 1.0 + (1.0 - e).log2();
    let slope = (1.0 / e - 1.0).log2();
    MinTradeoff {
        h: pz2 * params.eta_tol * (1.0 - h_b(e) - (params.q_tol - e) * slope),
        max_f: pz2 * top,
        min_f: pz2 * (1.0 + e.log2()),
        var_f: pz2 * pz2 / (params.p_x * params.p_x) * top * top,
    }
}

/// Error-correction leakage for the whole run.
pub fn ec_leakage(params: &Bbm92Params) -> f64 {
    leakage_for(params, params.n_rounds)
}

fn leakage_for(params: &Bbm92Params, n: f64) -> f64 {
    let base = n * params.f_ec * h_b(params.e_bit);
    match params.leakage {
        LeakageModel::SiftedScaled => base * params.p_z() * params.p_z() * params.p_det,
        LeakageModel::Unscaled => base,
    }
}

/// The entropy bound one block is entitled to.
#[derive(Clone, Copy, Debug)]
struct BlockProblem {
    n: f64,
    scale: f64,
    leak: f64,
}

impl BlockProblem {
    fn new(params: &Bbm92Params, scenario: &Scenario) -> Self {
        let ns = scenario.n_subblocks as f64;
        match scenario.kind {
            ScenarioKind::Full => BlockProblem {
                n: params.n_rounds,
                scale: 1.0,
                leak: ec_leakage(params),
            },
            ScenarioKind::Splitting => BlockProblem {
                n: params.n_rounds,
                scale: 1.0 / ns,
                leak: if params.per_block_syndrome {
                    ec_leakage(params) / ns
                } else {
                    ec_leakage(params)
                },
            },
            ScenarioKind::SmallBlock => {
                let n = params.n_rounds / ns;
                BlockProblem {
                    n,
                    scale: 1.0,
                    leak: leakage_for(params, n),
                }
            }
        }
    }

    /// Smooth min-entropy of one block after leakage, in bits.
    fn entropy(&self, params: &Bbm92Params, t: &MinTradeoff, alpha: Option<f64>, log2_eps_sm: f64, log2_inv_p_omega: f64) -> f64 {
        let g = g_from_log2(log2_eps_sm);
        let body = match alpha {
            Some(a) => full_bound_raw(self.n, params.d_x, g, log2_inv_p_omega, a, t),
            None => simplified_bound_raw(self.n, params.d_x, g, log2_inv_p_omega, t).bound,
        };
        body - self.leak
    }
}

const LN_TANGENT_RANGE: (f64, f64) = (-9.210_340_371_976_182, -0.713_349_887_877_465); // [1e-4, 0.49]
const TANGENT_GRID: usize = 16;
const ALPHA_GRID: usize = 16;
const SMOOTH_GRID: usize = 16;
const LN_TOL: f64 = 1e-5;

/// Maximiser over the tangent point and (for the full form) `alpha`.
/// `inner` returns the best score for fixed `(tradeoff, alpha)` and the
/// smoothing choice attaining it.
fn optimise<F>(params: &Bbm92Params, scale: f64, mut inner: F) -> Optimum
where
    F: FnMut(&MinTradeoff, Option<f64>) -> (f64, f64),
{
    let (alo, ahi) = geat::LN_ALPHA_MINUS_ONE_RANGE;
    let mut over_alpha = |t: &MinTradeoff| -> (f64, Option<f64>) {
        match params.bound {
            BoundForm::Full => {
                let (la, v) = maximize(|la| inner(t, Some(1.0 + la.exp())).0, alo, ahi, ALPHA_GRID, LN_TOL);
                (v, Some(1.0 + la.exp()))
            }
            BoundForm::Simplified => (inner(t, None).0, None),
        }
    };
    let (lo, hi) = LN_TANGENT_RANGE;
    let (le, _) = maximize(
        |le| over_alpha(&tradeoff_unchecked(params, le.exp()).scaled(scale)).0,
        lo,
        hi,
        TANGENT_GRID,
        LN_TOL,
    );
    let e_tangent = le.exp();
    let t = tradeoff_unchecked(params, e_tangent).scaled(scale);
    let (_, alpha) = over_alpha(&t);
    let (value, log2_eps_smooth) = inner(&t, alpha);
    Optimum {
        value,
        e_tangent,
        alpha,
        log2_eps_smooth,
    }
}

#[derive(Clone, Copy, Debug)]
struct Optimum {
    value: f64,
    e_tangent: f64,
    alpha: Option<f64>,
    log2_eps_smooth: f64,
}

/// Result of a key-length solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyLength {
    pub scenario: Scenario,
    /// Total key length in bits.
    pub length: u64,
    /// Length produced by each block.
    pub per_block: u64,
    /// Unrounded per-block bound.
    pub per_block_bound: f64,
    pub alpha: Option<f64>,
    pub e_tangent: f64,
    pub eps_smooth: f64,
    pub feasible: bool,
}

impl KeyLength {
    pub fn rate(&self, n_rounds: f64) -> f64 {
        self.length as f64 / n_rounds
    }
}

/// Secrecy budget of a single block.
pub fn block_secrecy_budget(params: &Bbm92Params, scenario: &Scenario) -> f64 {
    block_budget(params, scenario).0
}

/// Secrecy budget per block and the `p_Omega` used with it.
fn block_budget(params: &Bbm92Params, scenario: &Scenario) -> (f64, f64) {
    let ns = scenario.n_subblocks as f64;
    let (budget, owner) = match scenario.kind {
        ScenarioKind::Full => (params.eps_sec, params.eps_sec),
        ScenarioKind::Splitting => ((params.eps_sec - scenario.eps_abort(params)) / ns, params.eps_sec),
        ScenarioKind::SmallBlock => (params.eps_sec / ns, params.eps_sec / ns),
    };
    let p_omega = match params.p_omega {
        POmega::WorstCase => owner,
        POmega::Fixed(p) => p,
    };
    (budget, p_omega)
}

/// Maximum per-block key length bound (unrounded) and its optimiser.
fn block_key_bound(params: &Bbm92Params, scenario: &Scenario) -> Option<Optimum> {
    let (budget, p_omega) = block_budget(params, scenario);
    if !(budget > 0.0) {
        return None;
    }
    let problem = BlockProblem::new(params, scenario);
    let lip = -p_omega.log2();
    let log2_budget = budget.log2();
    // eps_sm = budget (1 - u) / 2, remaining gap budget * u
    let inner = |t: &MinTradeoff, alpha: Option<f64>| -> (f64, f64) {
        let f = |lu: f64| {
            let u = lu.exp();
            let log2_sm = log2_budget + (-u).ln_1p() / LN_2 - 1.0;
            problem.entropy(params, t, alpha, log2_sm, lip) + 1.0 + log2_budget + lu / LN_2
        };
        let (lu, v) = maximize(f, -34.5, -1e-9, SMOOTH_GRID, LN_TOL);
        (v, log2_budget + (-lu.exp()).ln_1p() / LN_2 - 1.0)
    };
    Some(optimise(params, problem.scale, inner))
}

/// Secure key length for `scenario`, maximised over the tangent point,
/// `alpha` and the smoothing parameter. Infeasible points give length 0.
pub fn key_length(params: &Bbm92Params, scenario: &Scenario) -> Result<KeyLength> {
    params.validate()?;
    let Some(opt) = block_key_bound(params, scenario) else {
        return Ok(KeyLength {
            scenario: *scenario,
            length: 0,
            per_block: 0,
            per_block_bound: f64::NEG_INFINITY,
            alpha: None,
            e_tangent: f64::NAN,
            eps_smooth: 0.0,
            feasible: false,
        });
    };
    let per_block = if opt.value.is_finite() && opt.value >= 1.0 {
        opt.value.floor() as u64
    } else {
        0
    };
    Ok(KeyLength {
        scenario: *scenario,
        length: per_block * scenario.n_subblocks as u64,
        per_block,
        per_block_bound: opt.value,
        alpha: opt.alpha,
        e_tangent: opt.e_tangent,
        eps_smooth: opt.log2_eps_smooth.exp2(),
        feasible: per_block > 0,
    })
}

/// Unrounded total bound, used as a smooth objective.
fn total_key_bound(params: &Bbm92Params, scenario: &Scenario) -> f64 {
    block_key_bound(params, scenario)
        .map(|o| o.value * scenario.n_subblocks as f64)
        .unwrap_or(f64::NEG_INFINITY)
}

/// Optimised secrecy for a fixed key length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Secrecy {
    pub scenario: Scenario,
    pub length: u64,
    /// `log2` of the total secrecy parameter (may be far below the `f64`
    /// range).
    pub log2_epsilon: f64,
    pub alpha: Option<f64>,
    pub e_tangent: f64,
    pub log2_eps_smooth: f64,
    pub feasible: bool,
}

impl Secrecy {
    pub fn epsilon(&self) -> f64 {
        self.log2_epsilon.exp2()
    }
}

fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp2().ln_1p() / LN_2
}

/// `log2` of the per-block leftover-hash error, minimised, for a given
/// `log2(1/p_Omega)`.
fn block_secrecy(params: &Bbm92Params, problem: &BlockProblem, block_len: f64, lip: f64) -> Optimum {
    let inner = |t: &MinTradeoff, alpha: Option<f64>| -> (f64, f64) {
        let f = |log2_sm: f64| {
            let h = problem.entropy(params, t, alpha, log2_sm, lip);
            -log2_add(1.0 + log2_sm, -1.0 - 0.5 * (h - block_len))
        };
        match alpha {
            Some(a) => {
                // H = A - g / x with g ~ 1 - 2 log2 eps_sm: stationary point
                // of 2 eps_sm + 2^(-1 - (H - l) / 2) in closed form
                let x = a - 1.0;
                let deep = -1024.0;
                let base = problem.entropy(params, t, alpha, deep, lip) + g_from_log2(deep) / x;
                let d = base - block_len;
                let seed = ((-2.0 - x.log2() - 0.5 * d + 0.5 / x) * x / (1.0 + x)).min(-1.0);
                let (s, v) = maximize(f, seed - 2.0, (seed + 2.0).min(-1.0), 3, 1e-6);
                (v, s)
            }
            None => {
                // eps_sm = 2^(-exp(lt))
                let (lt, v) = maximize(|lt: f64| f(-lt.exp()), 0.0, 15.9, SMOOTH_GRID * 2, LN_TOL);
                (v, -lt.exp())
            }
        }
    };
    let mut opt = optimise(params, problem.scale, inner);
    opt.value = -opt.value;
    opt
}

/// Smallest secrecy parameter at which `length` bits can be extracted.
///
/// With [`POmega::WorstCase`] the abort probability entering the bound is tied
/// to the secrecy being solved for; the fixed point in `log2 eps` is found by
/// false position on a bracket.
pub fn secrecy_for_length(params: &Bbm92Params, length: u64, scenario: &Scenario) -> Result<Secrecy> {
    params.validate()?;
    let problem = BlockProblem::new(params, scenario);
    let ns = scenario.n_subblocks as f64;
    let block_len = length as f64 / ns;
    let eps_abort = scenario.eps_abort(params);
    let log2_abort = if eps_abort > 0.0 { eps_abort.log2() } else { f64::NEG_INFINITY };
    let log2_ns = ns.log2();

    let total_at = |log2_p_omega: f64| -> (f64, Optimum) {
        let o = block_secrecy(params, &problem, block_len, -log2_p_omega);
        (log2_add(log2_ns + o.value, log2_abort), o)
    };
    let p_omega_for = |log2_eps: f64| match scenario.kind {
        ScenarioKind::SmallBlock => log2_eps - log2_ns,
        _ => log2_eps,
    };

    let (log2_eps, opt) = match params.p_omega {
        POmega::Fixed(p) => total_at(p.log2()),
        POmega::WorstCase => {
            // gap(l) = total(l) - l is decreasing
            let gap = |l: f64| {
                let (t, o) = total_at(p_omega_for(l).min(0.0));
                (t - l, t, o)
            };
            let (g_hi, t_hi, o_hi) = gap(0.0);
            if g_hi > 0.0 {
                (t_hi.max(0.0), o_hi)
            } else {
                let (mut hi, mut g_b) = (0.0, g_hi);
                let mut best = (t_hi, o_hi);
                let mut lo = t_hi.min(-1.0);
                let mut g_a;
                loop {
                    let (g, t, o) = gap(lo);
                    if g > 0.0 || lo < -((1u64 << 40) as f64) {
                        g_a = g;
                        break;
                    }
                    hi = lo;
                    g_b = g;
                    best = (t, o);
                    lo *= 2.0;
                }
                let mut side = 0i8;
                for _ in 0..100 {
                    if hi - lo <= 1e-7 * (1.0 + hi.abs()) {
                        break;
                    }
                    let mut mid = hi - g_b * (hi - lo) / (g_b - g_a);
                    if !(mid > lo && mid < hi) {
                        mid = 0.5 * (lo + hi);
                    }
                    let (g, t, o) = gap(mid);
                    if g > 0.0 {
                        lo = mid;
                        g_a = g;
                        if side == -1 {
                            g_b *= 0.5;
                        }
                        side = -1;
                    } else {
                        hi = mid;
                        g_b = g;
                        best = (t, o);
                        if side == 1 {
                            g_a *= 0.5;
                        }
                        side = 1;
                    }
                    if g == 0.0 {
                        break;
                    }
                }
                best
            }
        }
    };
    let feasible = log2_eps < 0.0;
    Ok(Secrecy {
        scenario: *scenario,
        length,
        log2_epsilon: log2_eps.min(0.0),
        alpha: opt.alpha,
        e_tangent: opt.e_tangent,
        log2_eps_smooth: opt.log2_eps_smooth,
        feasible,
    })
}

/// Result of optimising the test-basis probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimisedPx {
    pub p_x: f64,
    pub key: KeyLength,
}

/// Search range for `p_X`.
pub const P_X_RANGE: (f64, f64) = (1e-3, 0.5);

/// `argmax` of the key length over `p_X`: log-spaced grid, then golden
/// section on `ln p_X`. Ties go to the smaller `p_X`.
pub fn optimize_px(params: &Bbm92Params, scenario: &Scenario) -> Result<OptimisedPx> {
    params.validate()?;
    let objective = |lp: f64| {
        let p = Bbm92Params {
            p_x: lp.exp(),
            ..params.clone()
        };
        total_key_bound(&p, scenario)
    };
    let (lo, hi) = (P_X_RANGE.0.ln(), P_X_RANGE.1.ln());
    let (lp, best) = maximize(objective, lo, hi, 24, 1e-4);
    if !(best >= 1.0) {
        return Err(Error::Infeasible(format!(
            "no p_X in [{}, {}] yields a positive key for {}",
            P_X_RANGE.0, P_X_RANGE.1, scenario.kind
        )));
    }
    let p_x = lp.exp();
    let tuned = Bbm92Params { p_x, ..params.clone() };
    Ok(OptimisedPx {
        p_x,
        key: key_length(&tuned, scenario)?,
    })
}
