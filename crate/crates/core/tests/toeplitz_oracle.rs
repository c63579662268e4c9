mod oracle;

use oracle::dense::{check_exhaustive, check_random, hashes};
use rand::{rngs::StdRng, Rng, SeedableRng};
use proptest::prelude::*;
use subhash::toeplitz::{blocked_toeplitz_hash, cycle_estimate, toeplitz_hash, BlockingParams, ToeplitzSeed};
use subhash::BitString;

#[test]
fn exhaustive_small_matrices() {
    assert!(check_exhaustive() > 0);
}

#[test]
fn thousand_random_cases() {
    check_random(1000, 0x70e9);
}

#[test]
fn documented_two_by_three() {
    let (plain, blocked) = hashes(&[true, false, true, true], &[true, true, false], 2, BlockingParams::default());
    assert_eq!(plain, vec![true, false]);
    assert_eq!(blocked, plain);
}

#[test]
fn large_input_with_default_tiling() {
    let mut rng = StdRng::seed_from_u64(0xb16);
    let (m, n) = (6300, 100_000);
    let seed: BitString = (0..m + n - 1).map(|_| rng.gen::<bool>()).collect();
    let x: BitString = (0..n).map(|_| rng.gen::<bool>()).collect();
    let s = ToeplitzSeed::new(seed, m, n).unwrap();
    assert_eq!(
        blocked_toeplitz_hash(&s, &x, BlockingParams::default()).unwrap(),
        toeplitz_hash(&s, &x).unwrap()
    );
}

fn bools(len: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), len)
}

proptest! {
    #[test]
    fn linear_in_the_input((m, n, seed, x, y) in (1usize..40, 1usize..90).prop_flat_map(|(m, n)| {
        (Just(m), Just(n), bools(m + n - 1), bools(n), bools(n))
    })) {
        let s = ToeplitzSeed::new(BitString::from_bools(&seed), m, n).unwrap();
        let (bx, by) = (BitString::from_bools(&x), BitString::from_bools(&y));
        let mut sum = bx.clone();
        sum.xor_assign(&by);
        let mut expect = toeplitz_hash(&s, &bx).unwrap();
        expect.xor_assign(&toeplitz_hash(&s, &by).unwrap());
        prop_assert_eq!(toeplitz_hash(&s, &sum).unwrap(), expect);
    }

    #[test]
    fn unit_vector_selects_a_column((m, n, seed) in (1usize..30, 1usize..70).prop_flat_map(|(m, n)| {
        (Just(m), Just(n), bools(m + n - 1))
    })) {
        let s = ToeplitzSeed::new(BitString::from_bools(&seed), m, n).unwrap();
        for j in 0..n {
            let mut e = BitString::zeros(n);
            e.set(j, true);
            let col: Vec<bool> = toeplitz_hash(&s, &e).unwrap().iter().collect();
            prop_assert_eq!(&col[..], &seed[n - 1 - j..n - 1 - j + m]);
        }
    }

    #[test]
    fn blocked_matches_plain((m, n, seed, x, mp, np) in (1usize..100, 1usize..300).prop_flat_map(|(m, n)| {
        (Just(m), Just(n), bools(m + n - 1), bools(n), 1usize..120, 1usize..320)
    })) {
        let s = ToeplitzSeed::new(BitString::from_bools(&seed), m, n).unwrap();
        let x = BitString::from_bools(&x);
        let b = BlockingParams::new(mp, np).unwrap();
        prop_assert_eq!(blocked_toeplitz_hash(&s, &x, b).unwrap(), toeplitz_hash(&s, &x).unwrap());
    }

    #[test]
    fn cycles_monotone(i in 0u64..1 << 40, o in 0u64..1 << 30, di in 0u64..1 << 20, d_o in 0u64..1 << 20, mp in 1u64..5000) {
        let base = cycle_estimate(i, o, mp).unwrap();
        prop_assert!(cycle_estimate(i + di, o, mp).unwrap() >= base);
        prop_assert!(cycle_estimate(i, o + d_o, mp).unwrap() >= base);
    }

    #[test]
    fn raw_format_round_trip(bits in prop::collection::vec(any::<bool>(), 0..300)) {
        let b = BitString::from_bools(&bits);
        let mut buf = Vec::new();
        b.write_raw(&mut buf).unwrap();
        prop_assert_eq!(buf.len(), bits.len().div_ceil(8));
        prop_assert_eq!(BitString::read_raw(&buf[..], bits.len()).unwrap(), b);
    }
}
