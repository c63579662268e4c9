//! One-dimensional maximisation: uniform grid, then golden-section refinement
//! inside the bracket around the best grid point.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[inline]
fn score(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Returns `(argmax, max)` of `f` over `[lo, hi]`.
///
/// The grid has `grid` points (at least 2). Refinement stops once the bracket
/// is narrower than `tol`. Ties on the grid resolve to the smaller argument.
pub(crate) fn maximize<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> (f64, f64) {
    let grid = grid.max(2);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    let mut best_k = 0;
    for k in 0..grid {
        let x = if k + 1 == grid { hi } else { lo + step * k as f64 };
        let v = score(f(x));
        if v > best.1 {
            best = (x, v);
            best_k = k;
        }
    }
    if best.1 == f64::NEG_INFINITY {
        return best;
    }
    let mut a = lo + step * best_k.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_k + 1) as f64).min(hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = score(f(c));
    let mut fd = score(f(d));
    let mut iter = 0;
    while b - a > tol && iter < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = score(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = score(f(d));
        }
        iter += 1;
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}
