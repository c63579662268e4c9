//! Lower bounds on smooth min-entropy from generalised entropy accumulation.
//!
//! Two forms are provided: the full bound with an explicit Renyi order
//! `alpha` in `(1, 3/2)`, and the simplified `N h - v1 sqrt(N) - v0` form.
//! Terms with exponential growth are assembled in log space.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search;

/// Summary of an affine min-tradeoff function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinTradeoff {
    /// Entropy rate at the abort threshold, bits per round.
    pub h: f64,
    pub max_f: f64,
    /// `Min_Sigma(f)`.
    pub min_f: f64,
    /// Upper bound on `Var(f)`.
    pub var_f: f64,
}

impl MinTradeoff {
    pub fn new(h: f64, max_f: f64, min_f: f64, var_f: f64) -> Result<Self> {
        if !(max_f >= min_f) {
            return Err(Error::param("max_f", format!("Max(f) = {max_f} below Min(f) = {min_f}")));
        }
        if !(var_f >= 0.0) {
            return Err(Error::domain("var_f", var_f, "[0, inf)"));
        }
        Ok(MinTradeoff {
            h,
            max_f,
            min_f,
            var_f,
        })
    }

    /// Tradeoff of `scale * f`: `h`, `Max`, `Min` scale linearly, the
    /// variance bound quadratically.
    pub fn scaled(&self, scale: f64) -> MinTradeoff {
        MinTradeoff {
            h: self.h * scale,
            max_f: self.max_f * scale,
            min_f: self.min_f * scale,
            var_f: self.var_f * scale * scale,
        }
    }

    /// `nu = 2 log2 d_X + Max(f) - Min(f)`.
    pub fn nu(&self, d_x: u32) -> f64 {
        2.0 * (d_x as f64).log2() + self.max_f - self.min_f
    }
}

/// Parameters of a single bound evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeatInput {
    pub n_rounds: f64,
    pub d_x: u32,
    pub eps_smooth: f64,
    /// Probability of the non-abort event.
    pub p_omega: f64,
}

impl GeatInput {
    fn validate(&self) -> Result<()> {
        if !(self.n_rounds >= 0.0) {
            return Err(Error::domain("n_rounds", self.n_rounds, "[0, inf)"));
        }
        if self.d_x < 2 {
            return Err(Error::param("d_x", "dimension must be at least 2"));
        }
        if !(self.eps_smooth > 0.0 && self.eps_smooth < 1.0) {
            return Err(Error::domain("eps_smooth", self.eps_smooth, "(0, 1)"));
        }
        if !(self.p_omega > 0.0 && self.p_omega <= 1.0) {
            return Err(Error::domain("p_omega", self.p_omega, "(0, 1]"));
        }
        Ok(())
    }

    fn log2_inv_p_omega(&self) -> f64 {
        -self.p_omega.log2()
    }
}

/// `g(eps) = -log2(1 - sqrt(1 - eps^2))`.
pub fn g_eps(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain("eps", eps, "(0, 1)"));
    }
    Ok(g_from_log2(eps.log2()))
}

/// `g` evaluated at `eps = 2^log2_eps`, valid far below `f64::MIN_POSITIVE`.
pub(crate) fn g_from_log2(log2_eps: f64) -> f64 {
    // 1 - sqrt(1 - e^2) = e^2 / (1 + sqrt(1 - e^2))
    if log2_eps < -510.0 {
        return 1.0 - 2.0 * log2_eps;
    }
    let e = log2_eps.exp2();
    let root = (1.0 - e * e).max(0.0).sqrt();
    -2.0 * log2_eps + (1.0 + root).log2()
}

/// `V = log2(2 d_X^2 + 1) + sqrt(2 + Var(f))`.
pub fn v_of(tradeoff: &MinTradeoff, d_x: u32) -> f64 {
    let d = d_x as f64;
    (2.0 * d * d + 1.0).log2() + (2.0 + tradeoff.var_f).sqrt()
}

/// `ln(2^nu + e^2)`.
fn ln_two_pow_plus_e2(nu: f64) -> f64 {
    let a = nu * LN_2;
    let b = 2.0;
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln K'(alpha)`.
fn ln_k_prime(alpha: f64, nu: f64) -> f64 {
    let y = 2.0 - alpha;
    3.0 * y.ln() - 6f64.ln() - 3.0 * (3.0 - 2.0 * alpha).ln() - LN_2.ln()
        + ((alpha - 1.0) / y) * nu * LN_2
        + 3.0 * ln_two_pow_plus_e2(nu).ln()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < 1.5) {
        return Err(Error::domain("alpha", alpha, "(1, 3/2)"));
    }
    Ok(())
}

/// Full bound body with `g(eps)` and `log2(1/p_Omega)` supplied directly.
pub(crate) fn full_bound_raw(
    n: f64,
    d_x: u32,
    g: f64,
    log2_inv_p_omega: f64,
    alpha: f64,
    t: &MinTradeoff,
) -> f64 {
    let x = alpha - 1.0;
    let y = 2.0 - alpha;
    let v = v_of(t, d_x);
    let second = n * x * LN_2 / (2.0 * y) * v * v;
    let third = (g + alpha * log2_inv_p_omega) / x;
    let fourth = if n > 0.0 {
        (n.ln() + 2.0 * (x / y).ln() + ln_k_prime(alpha, t.nu(d_x))).exp()
    } else {
        0.0
    };
    n * t.h - second - third - fourth
}

/// Full-form bound at Renyi order `alpha`.
pub fn geat_full_bound(input: &GeatInput, alpha: f64, tradeoff: &MinTradeoff) -> Result<f64> {
    input.validate()?;
    check_alpha(alpha)?;
    Ok(full_bound_raw(
        input.n_rounds,
        input.d_x,
        g_eps(input.eps_smooth)?,
        input.log2_inv_p_omega(),
        alpha,
        tradeoff,
    ))
}

/// Search bounds for `ln(alpha - 1)`.
pub(crate) const LN_ALPHA_MINUS_ONE_RANGE: (f64, f64) = (-23.0, -0.693_147_180_56 - 1e-6);

/// Maximises the full bound over `alpha`; returns `(alpha, bound)`.
pub(crate) fn optimal_full_bound_raw(n: f64, d_x: u32, g: f64, log2_inv_p_omega: f64, t: &MinTradeoff) -> (f64, f64) {
    let (lo, hi) = LN_ALPHA_MINUS_ONE_RANGE;
    let (la, v) = search::maximize(
        |la| full_bound_raw(n, d_x, g, log2_inv_p_omega, 1.0 + la.exp(), t),
        lo,
        hi,
        24,
        1e-6,
    );
    (1.0 + la.exp(), v)
}

/// Full-form bound maximised over `alpha` in `(1, 3/2)`; returns `(alpha, bound)`.
pub fn geat_full_bound_optimal(input: &GeatInput, tradeoff: &MinTradeoff) -> Result<(f64, f64)> {
    input.validate()?;
    Ok(optimal_full_bound_raw(
        input.n_rounds,
        input.d_x,
        g_eps(input.eps_smooth)?,
        input.log2_inv_p_omega(),
        tradeoff,
    ))
}

/// `xi = 2 ln 2 / (1 + 2 ln 2)`.
pub fn xi() -> f64 {
    2.0 * LN_2 / (1.0 + 2.0 * LN_2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedBound {
    pub v0: f64,
    pub v1: f64,
    pub bound: f64,
}

pub(crate) fn simplified_bound_raw(n: f64, d_x: u32, g: f64, log2_inv_p_omega: f64, t: &MinTradeoff) -> SimplifiedBound {
    let xi = xi();
    let v = v_of(t, d_x);
    let nu = t.nu(d_x);
    let beta = ((2.0 - xi) * xi * xi * log2_inv_p_omega + xi * xi * g)
        / (3.0 * LN_2 * LN_2 * (2.0 * xi - 1.0).powi(3));
    let gamma = (2.0 * LN_2 / xi * (g + (2.0 - xi) * log2_inv_p_omega)).sqrt();
    let v0 = if beta > 0.0 {
        (beta.ln() - 2.0 * v.ln() + (1.0 - xi) / xi * nu * LN_2 + 3.0 * ln_two_pow_plus_e2(nu).ln()).exp()
    } else {
        0.0
    };
    let v1 = gamma * v;
    SimplifiedBound {
        v0,
        v1,
        bound: n * t.h - v1 * n.sqrt() - v0,
    }
}

/// Simplified form `N h - v1 sqrt(N) - v0`.
pub fn geat_simplified_bound(input: &GeatInput, tradeoff: &MinTradeoff) -> Result<SimplifiedBound> {
    input.validate()?;
    Ok(simplified_bound_raw(
        input.n_rounds,
        input.d_x,
        g_eps(input.eps_smooth)?,
        input.log2_inv_p_omega(),
        tradeoff,
    ))
}
