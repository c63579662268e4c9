use astro_float::{BigFloat, Consts, RoundingMode};
use rand::{rngs::StdRng, Rng, SeedableRng};
use subhash::geat::{self, GeatInput, MinTradeoff};

const P: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

pub struct Big {
    cc: Consts,
}

impl Big {
    pub fn new() -> Self {
        Big {
            cc: Consts::new().expect("constants cache"),
        }
    }
    fn f(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, P)
    }
    fn ln(&mut self, x: &BigFloat) -> BigFloat {
        x.ln(P, RM, &mut self.cc)
    }
    fn log2(&mut self, x: &BigFloat) -> BigFloat {
        x.log2(P, RM, &mut self.cc)
    }
    fn exp(&mut self, x: &BigFloat) -> BigFloat {
        x.exp(P, RM, &mut self.cc)
    }
    fn pow2(&mut self, x: &BigFloat) -> BigFloat {
        let ln2 = self.ln(&self.f(2.0));
        self.exp(&x.mul(&ln2, P, RM))
    }
}

pub struct Point {
    pub n: f64,
    pub d: u32,
    pub eps: f64,
    pub p_omega: f64,
    pub alpha: f64,
    pub t: MinTradeoff,
}

/// Returns (full bound, v0, v1, simplified bound).
pub fn oracle(b: &mut Big, pt: &Point) -> (BigFloat, BigFloat, BigFloat, BigFloat) {
    let one = b.f(1.0);
    let two = b.f(2.0);
    let n = b.f(pt.n);
    let d = b.f(pt.d as f64);
    let eps = b.f(pt.eps);
    let alpha = b.f(pt.alpha);
    let h = b.f(pt.t.h);
    let ln2 = b.ln(&two);
    let e2 = b.exp(&two);

    // g = -log2(1 - sqrt(1 - eps^2))
    let root = one.sub(&eps.mul(&eps, P, RM), P, RM).sqrt(P, RM);
    let g = b.log2(&one.sub(&root, P, RM)).neg();
    let lip = b.log2(&one.div(&b.f(pt.p_omega), P, RM));
    // V = log2(2 d^2 + 1) + sqrt(2 + Var)
    let dd = two.mul(&d.mul(&d, P, RM), P, RM).add(&one, P, RM);
    let v = b.log2(&dd).add(&two.add(&b.f(pt.t.var_f), P, RM).sqrt(P, RM), P, RM);
    // nu = 2 log2 d + Max - Min
    let nu = two
        .mul(&b.log2(&d), P, RM)
        .add(&b.f(pt.t.max_f), P, RM)
        .sub(&b.f(pt.t.min_f), P, RM);
    let ln3 = {
        let inner = b.pow2(&nu).add(&e2, P, RM);
        let l = b.ln(&inner);
        l.mul(&l, P, RM).mul(&l, P, RM)
    };

    let am1 = alpha.sub(&one, P, RM);
    let tma = two.sub(&alpha, P, RM);
    let three_m = b.f(3.0).sub(&two.mul(&alpha, P, RM), P, RM);
    let ratio = am1.div(&tma, P, RM);
    let k = tma
        .powi(3, P, RM)
        .div(&b.f(6.0).mul(&three_m.powi(3, P, RM), P, RM).mul(&ln2, P, RM), P, RM)
        .mul(&b.pow2(&ratio.mul(&nu, P, RM)), P, RM)
        .mul(&ln3, P, RM);
    let second = n
        .mul(&am1, P, RM)
        .mul(&ln2, P, RM)
        .div(&two.mul(&tma, P, RM), P, RM)
        .mul(&v.mul(&v, P, RM), P, RM);
    let third = g.add(&alpha.mul(&lip, P, RM), P, RM).div(&am1, P, RM);
    let fourth = n.mul(&ratio.mul(&ratio, P, RM), P, RM).mul(&k, P, RM);
    let full = n
        .mul(&h, P, RM)
        .sub(&second, P, RM)
        .sub(&third, P, RM)
        .sub(&fourth, P, RM);

    let two_ln2 = two.mul(&ln2, P, RM);
    let xi = two_ln2.div(&one.add(&two_ln2, P, RM), P, RM);
    let xi2 = xi.mul(&xi, P, RM);
    let beta = two
        .sub(&xi, P, RM)
        .mul(&xi2, P, RM)
        .mul(&lip, P, RM)
        .add(&xi2.mul(&g, P, RM), P, RM)
        .div(
            &b.f(3.0)
                .mul(&ln2.mul(&ln2, P, RM), P, RM)
                .mul(&two.mul(&xi, P, RM).sub(&one, P, RM).powi(3, P, RM), P, RM),
            P,
            RM,
        );
    let gamma = two_ln2
        .div(&xi, P, RM)
        .mul(&g.add(&two.sub(&xi, P, RM).mul(&lip, P, RM), P, RM), P, RM)
        .sqrt(P, RM);
    let expo = one.sub(&xi, P, RM).div(&xi, P, RM).mul(&nu, P, RM);
    let v0 = beta
        .div(&v.mul(&v, P, RM), P, RM)
        .mul(&b.pow2(&expo), P, RM)
        .mul(&ln3, P, RM);
    let v1 = gamma.mul(&v, P, RM);
    let simp = n
        .mul(&h, P, RM)
        .sub(&v1.mul(&n.sqrt(P, RM), P, RM), P, RM)
        .sub(&v0, P, RM);
    (full, v0, v1, simp)
}

pub fn assert_digits(b: &Big, got: f64, want: &BigFloat, what: &str) {
    let g = b.f(got);
    let diff = g.sub(want, P, RM).abs();
    let scale = want.abs();
    let tol = scale.mul(&b.f(1e-10), P, RM);
    assert!(
        diff.cmp(&tol).map_or(false, |c| c <= 0),
        "{what}: got {got:e}, oracle {}",
        want.format(astro_float::Radix::Dec, RM, &mut Consts::new().unwrap()).unwrap()
    );
}

pub fn check(b: &mut Big, pt: &Point) {
    let input = GeatInput {
        n_rounds: pt.n,
        d_x: pt.d,
        eps_smooth: pt.eps,
        p_omega: pt.p_omega,
    };
    let (full, v0, v1, simp) = oracle(b, pt);
    let got = geat::geat_full_bound(&input, pt.alpha, &pt.t).unwrap();
    assert_digits(b, got, &full, "full bound");
    let s = geat::geat_simplified_bound(&input, &pt.t).unwrap();
    assert_digits(b, s.v0, &v0, "v0");
    assert_digits(b, s.v1, &v1, "v1");
    assert_digits(b, s.bound, &simp, "simplified bound");
}

pub fn reference_point() -> Point {
    Point {
        n: 1e9,
        d: 2,
        eps: 1e-9,
        p_omega: 1.0,
        alpha: 1.05,
        t: MinTradeoff::new(0.8, 1.0, -1.0, 10.0).unwrap(),
    }
}

pub fn random_points(count: usize, rng_seed: u64) -> Vec<Point> {
    let mut rng = StdRng::seed_from_u64(rng_seed);
    let log_uniform = |rng: &mut StdRng, lo: f64, hi: f64| 10f64.powf(rng.gen_range(lo.log10()..hi.log10()));
    (0..count)
        .map(|_| {
            let max_f = rng.gen_range(0.0..2.0);
            Point {
                n: log_uniform(&mut rng, 1e4, 1e12),
                d: rng.gen_range(2..5),
                eps: log_uniform(&mut rng, 1e-15, 0.5),
                p_omega: log_uniform(&mut rng, 1e-12, 1.0),
                alpha: 1.0 + log_uniform(&mut rng, 1e-6, 0.2),
                t: MinTradeoff::new(
                    rng.gen_range(0.3..1.0),
                    max_f,
                    max_f - rng.gen_range(0.5..20.0),
                    rng.gen_range(0.0..1e4),
                )
                .unwrap(),
            }
        })
        .collect()
}
