use rand::{rngs::StdRng, Rng, SeedableRng};
use subhash::toeplitz::{blocked_toeplitz_hash, toeplitz_hash, BlockingParams, ToeplitzSeed};
use subhash::BitString;

/// `y_i = XOR_j seed[(n - 1) + i - j] & x_j`, entry by entry.
pub fn dense(seed: &[bool], x: &[bool], m: usize) -> Vec<bool> {
    let n = x.len();
    (0..m)
        .map(|i| (0..n).fold(false, |acc, j| acc ^ (seed[n - 1 + i - j] & x[j])))
        .collect()
}

pub fn bits_of(v: u64, len: usize) -> Vec<bool> {
    (0..len).map(|k| (v >> k) & 1 == 1).collect()
}

pub fn hashes(seed: &[bool], x: &[bool], m: usize, blocking: BlockingParams) -> (Vec<bool>, Vec<bool>) {
    let s = ToeplitzSeed::new(BitString::from_bools(seed), m, x.len()).unwrap();
    let input = BitString::from_bools(x);
    let plain = toeplitz_hash(&s, &input).unwrap().iter().collect();
    let blocked = blocked_toeplitz_hash(&s, &input, blocking).unwrap().iter().collect();
    (plain, blocked)
}

/// Every seed and input for `m, n <= 6`, rotating through a few tilings.
/// Returns the number of cases checked.
pub fn check_exhaustive() -> usize {
    let tilings = [(1, 1), (2, 3), (4, 1), (2000, 1)];
    let mut cases = 0;
    for m in 1..=6 {
        for n in 1..=6 {
            for sv in 0..1u64 << (m + n - 1) {
                let seed = bits_of(sv, m + n - 1);
                for xv in 0..1u64 << n {
                    let x = bits_of(xv, n);
                    let want = dense(&seed, &x, m);
                    let (mp, np) = tilings[(sv ^ xv) as usize % tilings.len()];
                    let (plain, blocked) = hashes(&seed, &x, m, BlockingParams::new(mp, np).unwrap());
                    assert_eq!(plain, want, "m={m} n={n} seed={sv:b} x={xv:b}");
                    assert_eq!(blocked, want, "m={m} n={n} seed={sv:b} x={xv:b} tile={mp}x{np}");
                    cases += 1;
                }
            }
        }
    }
    cases
}

/// Random `m <= 64`, `n <= 128` cases with random tilings.
pub fn check_random(count: usize, rng_seed: u64) {
    let mut rng = StdRng::seed_from_u64(rng_seed);
    for case in 0..count {
        let m = rng.gen_range(1..=64);
        let n = rng.gen_range(1..=128);
        let seed: Vec<bool> = (0..m + n - 1).map(|_| rng.gen()).collect();
        let x: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let blocking = BlockingParams::new(rng.gen_range(1..=70), rng.gen_range(1..=130)).unwrap();
        let want = dense(&seed, &x, m);
        let (plain, blocked) = hashes(&seed, &x, m, blocking);
        assert_eq!(plain, want, "case {case}");
        assert_eq!(blocked, want, "case {case} {blocking:?}");
    }
}
