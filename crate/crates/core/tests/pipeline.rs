use subhash::bbm92::{self, Bbm92Params, Scenario, ScenarioKind};
use subhash::pipeline::{
    block_seed, extract_sifted, monobit_z, run_extraction, scenario_compare, simulate_and_extract, simulate_rounds,
    write_results_csv, AbortReason, ExtractionOptions, PointStatus, RoundStats,
};
use subhash::rng::MasterSeed;
use subhash::sampling::{self, SamplingPlan};
use subhash::toeplitz::{toeplitz_hash, BlockingParams};
use subhash::BitString;

fn honest(n: f64) -> Bbm92Params {
    Bbm92Params {
        n_rounds: n,
        p_x: 0.09,
        ..Default::default()
    }
}

fn within_sigma(count: u64, n: u64, p: f64, k: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= k * sd
}

#[test]
fn key_basis_error_rate() {
    let p = Bbm92Params {
        n_rounds: 1e6,
        ..Default::default()
    };
    let s = RoundStats::collect(&simulate_rounds(&p, &MasterSeed::from_u64(11)).unwrap());
    assert!(within_sigma(s.key_errors, s.key_rounds, 0.058, 5.0), "{s:?}");
}

#[test]
fn sifted_length_is_binomial() {
    let p = Bbm92Params {
        n_rounds: 100_000.0,
        p_det: 0.7,
        ..Default::default()
    };
    let q = p.p_z() * p.p_z() * p.p_det;
    for seed in 0..8 {
        let rounds = simulate_rounds(&p, &MasterSeed::from_u64(seed)).unwrap();
        let kept = rounds.iter().filter(|r| r.is_key()).count() as u64;
        assert!(within_sigma(kept, 100_000, q, 5.0), "seed {seed}: {kept}");
    }
}

#[test]
fn single_block_equals_direct_hashing() {
    let p = honest(200_000.0);
    let seed = MasterSeed::from_u64(21);
    let rounds = simulate_rounds(&p, &seed).unwrap();
    let plan = SamplingPlan::new(1, p.eps_abort, seed)
        .unwrap()
        .with_block_limit(200_000, p.p_z() * p.p_z())
        .unwrap();
    let rep = run_extraction(&rounds, &plan, &p).unwrap();
    assert!(rep.aborted.is_none());
    let sifted: BitString = rounds.iter().filter(|r| r.is_key()).map(|r| r.bit_a == Some(true)).collect();
    let t = block_seed(&seed, 0, rep.block_output as usize, sifted.len()).unwrap();
    assert_eq!(rep.key, toeplitz_hash(&t, &sifted).unwrap());

    // same through the sifted-string entry point
    let plan = SamplingPlan::new(1, 1e-8, seed).unwrap().with_block_limit(sifted.len() as u64, 1.0).unwrap();
    let x = extract_sifted(&sifted, &plan, rep.block_output as usize, BlockingParams::default()).unwrap();
    assert_eq!(x.key, rep.key);
}

#[test]
fn extraction_is_deterministic() {
    let p = honest(300_000.0);
    let opts = ExtractionOptions::default();
    let a = simulate_and_extract(&p, 3, &MasterSeed::from_u64(5), &opts).unwrap();
    let b = simulate_and_extract(&p, 3, &MasterSeed::from_u64(5), &opts).unwrap();
    let c = simulate_and_extract(&p, 3, &MasterSeed::from_u64(6), &opts).unwrap();
    assert_eq!(a.key, b.key);
    assert_ne!(a.key, c.key);
}

#[test]
fn million_rounds_four_blocks() {
    let p = honest(1e6);
    let rep = simulate_and_extract(&p, 4, &MasterSeed::from_u64(1234), &ExtractionOptions::default()).unwrap();
    assert!(rep.aborted.is_none(), "{:?}", rep.aborted);
    let l = bbm92::key_length(&p, &Scenario::splitting(4).unwrap()).unwrap();
    assert_eq!(rep.block_output, l.per_block);
    assert_eq!(rep.key.len() as u64, 4 * l.per_block);
    assert!(monobit_z(&rep.key).abs() <= 5.0);
    // same budget rule as the key-length solver
    let rule = bbm92::block_secrecy_budget(&p, &Scenario::splitting(4).unwrap()) * 4.0 + p.eps_abort;
    assert_eq!(rep.total_epsilon, rule);
    assert!((rep.total_epsilon - p.eps_sec).abs() < 1e-18);
}

#[test]
fn no_oversize_aborts_at_honest_parameters() {
    let p = Bbm92Params {
        n_rounds: 20_000.0,
        ..Default::default()
    };
    let ns = 17;
    let p_sift = p.p_z() * p.p_z() * p.p_det / ns as f64;
    let limit = sampling::block_limit(20_000, p_sift, 1e-8, ns as u64).unwrap();
    let mut aborts = 0;
    for trial in 0..1000u64 {
        let seed = MasterSeed::from_u64(trial);
        let rounds = simulate_rounds(&p, &seed).unwrap();
        let keep: Vec<bool> = rounds.iter().map(|r| r.is_key()).collect();
        let part = sampling::assign_subblocks(rounds.len(), ns, &seed).unwrap();
        let blocks = sampling::sift_partition(&keep, &part).unwrap();
        if sampling::abort_check(&blocks.lengths(), limit) != sampling::AbortCheck::Pass {
            aborts += 1;
        }
    }
    assert_eq!(aborts, 0);
}

#[test]
fn abort_reasons_are_distinguished() {
    let p = honest(1e6);
    let seed = MasterSeed::from_u64(8);
    let rounds = simulate_rounds(&p, &seed).unwrap();
    let mut plan = SamplingPlan::new(4, p.eps_abort, seed).unwrap();
    plan.block_limit = Some(1000);
    let rep = run_extraction(&rounds, &plan, &p).unwrap();
    assert!(matches!(rep.aborted, Some(AbortReason::Oversize { limit: 1000, .. })));
    assert!(rep.key.is_empty());

    let noisy = Bbm92Params { e_ph: 0.05, ..p.clone() };
    let rounds = simulate_rounds(&noisy, &seed).unwrap();
    let plan = SamplingPlan::new(4, p.eps_abort, seed)
        .unwrap()
        .with_block_limit(1_000_000, p.p_z() * p.p_z() / 4.0)
        .unwrap();
    let rep = run_extraction(&rounds, &plan, &p).unwrap();
    assert!(matches!(rep.aborted, Some(AbortReason::Statistics(_))), "{:?}", rep.aborted);
}

#[test]
fn splitting_throughput_beats_full() {
    let rows = scenario_compare(&Bbm92Params::default(), &(1..=30).collect::<Vec<_>>(), false, BlockingParams::default());
    assert_eq!(rows.len(), 61);
    let full = rows.iter().find(|r| r.scenario == ScenarioKind::Full).unwrap();
    for r in rows.iter().filter(|r| r.scenario == ScenarioKind::Splitting && r.n_subblocks >= 2) {
        assert_eq!(r.status, PointStatus::Ok);
        assert!(r.rate_per_cycle >= full.rate_per_cycle, "N_S = {}", r.n_subblocks);
    }
    // N_S = 1 rows coincide with direct hashing up to the abort budget
    let one = |k| rows.iter().find(|r| r.scenario == k && r.n_subblocks == 1).unwrap().length;
    assert_eq!(one(ScenarioKind::SmallBlock), full.length);
    assert!(full.length - one(ScenarioKind::Splitting) < full.length / 10_000);

    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_results_csv(&mut a, &rows).unwrap();
    let again = scenario_compare(&Bbm92Params::default(), &(1..=30).collect::<Vec<_>>(), false, BlockingParams::default());
    write_results_csv(&mut b, &again).unwrap();
    assert_eq!(a, b);
}

#[test]
fn infeasible_points_are_flagged_not_fatal() {
    let p = Bbm92Params {
        n_rounds: 1e5,
        ..Default::default()
    };
    let rows = scenario_compare(&p, &[1, 50], false, BlockingParams::default());
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().any(|r| r.status == PointStatus::Infeasible));
}
