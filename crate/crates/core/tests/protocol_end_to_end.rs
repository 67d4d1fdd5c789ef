use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zkvalue_core::data::{l2_normalize, quantize_features, QuantizedDataset, RawDataset, DEFAULT_SCALE};
use zkvalue_core::pcs::PcsConfig;
use zkvalue_core::protocol::{prove, provider_verify, verify, verify_bytes, ValuationProof, SECTIONS};
use zkvalue_core::sumcheck::ProverOptions;
use zkvalue_core::valuation::simhash::HashParams;
use zkvalue_core::valuation::{harmonic_table, lsh_shapley, DEFAULT_HARMONIC_SCALE};
use zkvalue_core::witness::{
    build_oracle_set, partition_and_commit, BuyerShard, OracleSet, ProviderShard, PublicCommitments, PublicParams,
    PROTOCOL_VERSION,
};
use zkvalue_core::{Error, Fp};

struct Setup {
    pp: PublicParams,
    train: QuantizedDataset,
    val: QuantizedDataset,
    oracles: OracleSet,
    shards: Vec<ProviderShard>,
    buyer: BuyerShard,
    commitments: PublicCommitments,
}

fn data(rng: &mut ChaCha8Rng, n: usize, d: usize, c: usize) -> QuantizedDataset {
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let mut row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        l2_normalize(&mut row);
        feats.extend(row);
        labels.push(rng.gen_range(0..c as u32));
    }
    quantize_features(&RawDataset::new(d, c, feats, labels).unwrap(), DEFAULT_SCALE).unwrap()
}

#[allow(clippy::too_many_arguments)]
fn setup(seed: u64, n: usize, t: usize, d: usize, c: usize, l: usize, k: usize, m: usize, batching: bool) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = data(&mut rng, n, d, c);
    let val = data(&mut rng, t, d, c);
    let pp = PublicParams {
        version: PROTOCOL_VERSION,
        hash: HashParams::generate(l, k, d, seed, DEFAULT_SCALE).unwrap(),
        harmonic_scale: DEFAULT_HARMONIC_SCALE,
        feature_scale: DEFAULT_SCALE,
        num_classes: c,
        providers: m,
        n_train: n,
        n_test: t,
        pcs: PcsConfig::default(),
        batching,
    };
    let ht = harmonic_table(n, pp.harmonic_scale).unwrap();
    let oracles = build_oracle_set(&train, &val, &pp.hash, &ht, m).unwrap();
    let (_, shards, buyer, commitments) = partition_and_commit(&train, &val, &pp, seed ^ 7).unwrap();
    Setup { pp, train, val, oracles, shards, buyer, commitments }
}

fn proof_of(s: &Setup) -> ValuationProof {
    prove(&s.oracles, &s.shards, &s.buyer, &s.pp, ProverOptions::default()).unwrap().0
}

#[test]
fn honest_proofs_certify_the_plaintext_scores() {
    for (i, &(n, t, d, c, l, k, m, b)) in [
        (16, 4, 2, 2, 1, 2, 2, true),
        (32, 8, 4, 3, 2, 3, 4, true),
        (32, 8, 4, 3, 2, 3, 4, false),
        (64, 16, 8, 5, 4, 4, 8, true),
        (64, 2, 4, 2, 2, 6, 1, false),
    ]
    .iter()
    .enumerate()
    {
        let s = setup(100 + i as u64, n, t, d, c, l, k, m, b);
        let ht = harmonic_table(n, s.pp.harmonic_scale).unwrap();
        let plain = lsh_shapley(&s.train, &s.val, &s.pp.hash, &ht).unwrap();
        let expect: Vec<Fp> = plain.svavg.iter().map(|v| v.field_encoding().unwrap()).collect();
        assert_eq!(s.oracles.svavg, expect);
        let (proof, stats) = prove(&s.oracles, &s.shards, &s.buyer, &s.pp, ProverOptions::default()).unwrap();
        let bytes = proof.to_bytes();
        assert_eq!(bytes.len(), stats.total_bytes);
        verify_bytes(&bytes, &s.commitments, &expect, &s.pp).unwrap();
        let slice = n / m;
        for shard in &s.shards {
            let r = shard.index * slice..(shard.index + 1) * slice;
            let report = provider_verify(shard, &expect[r], &proof, &s.commitments, &expect, &s.pp);
            assert!(report.accepted(), "{report}");
        }
    }
}

#[test]
fn proofs_do_not_transfer_between_instances() {
    let a = setup(1, 32, 8, 4, 3, 2, 3, 4, true);
    let b = setup(2, 32, 8, 4, 3, 2, 3, 4, true);
    let proof = proof_of(&a);
    assert!(verify(&proof, &b.commitments, &a.oracles.svavg, &a.pp).is_err());
    assert!(verify(&proof, &a.commitments, &a.oracles.svavg, &b.pp).is_err());
    assert!(verify(&proof, &a.commitments, &b.oracles.svavg, &a.pp).is_err());
}

#[test]
fn truncated_or_padded_proofs_fail_to_parse() {
    let s = setup(3, 16, 4, 2, 2, 1, 2, 2, true);
    let bytes = proof_of(&s).to_bytes();
    for cut in [0, 4, bytes.len() / 2, bytes.len() - 1] {
        let err = verify_bytes(&bytes[..cut], &s.commitments, &s.oracles.svavg, &s.pp).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }
    let mut long = bytes.clone();
    long.push(0);
    assert!(verify_bytes(&long, &s.commitments, &s.oracles.svavg, &s.pp).is_err());
}

#[test]
fn sparse_and_dense_provers_agree() {
    let s = setup(4, 64, 8, 4, 3, 2, 8, 4, true);
    let (a, sa) = prove(&s.oracles, &s.shards, &s.buyer, &s.pp, ProverOptions::default()).unwrap();
    let (b, sb) = prove(&s.oracles, &s.shards, &s.buyer, &s.pp, ProverOptions::dense()).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert!(sa.counters.total() < sb.counters.total());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_byte_flip_is_rejected(section in 0usize..SECTIONS, at in any::<usize>(), bit in 0u8..8) {
        let s = setup(5, 16, 4, 2, 2, 1, 2, 2, true);
        let mut proof = proof_of(&s);
        let sec = &mut proof.sections[section];
        let i = at % sec.len();
        sec[i] ^= 1 << bit;
        prop_assert!(verify(&proof, &s.commitments, &s.oracles.svavg, &s.pp).is_err());
    }

    #[test]
    fn any_published_score_edit_is_rejected(i in 0usize..16, delta in 1u64..u64::MAX) {
        let s = setup(6, 16, 4, 2, 2, 1, 2, 2, true);
        let proof = proof_of(&s);
        let mut published = s.oracles.svavg.clone();
        published[i] += Fp::new(delta);
        prop_assume!(published != s.oracles.svavg);
        prop_assert!(verify(&proof, &s.commitments, &published, &s.pp).is_err());
    }
}
