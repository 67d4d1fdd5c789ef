use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zkvalue_core::codec::{ByteReader, ByteWriter};
use zkvalue_core::mle::mle_eval_base;
use zkvalue_core::pcs::{commit, open, setup, verify_opening, OpeningProof, PcsConfig};
use zkvalue_core::super_oracle::{commit_family, verify_members, PackMode};
use zkvalue_core::transcript::Transcript;
use zkvalue_core::{Ext, Fp};

fn table(rng: &mut ChaCha8Rng, n: usize) -> Vec<Fp> {
    (0..1 << n).map(|_| Fp::random(rng)).collect()
}

fn point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Ext> {
    (0..n).map(|_| Ext::random(rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn openings_verify_and_evaluate(seed in any::<u64>(), n in 1usize..11, checks in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = PcsConfig { num_column_checks: checks, ..PcsConfig::default() };
        let params = setup(n, &cfg).unwrap();
        let vals = table(&mut rng, n);
        let c = commit(&vals, &params, None).unwrap();
        let x = point(&mut rng, n);
        let proof = open(&c, &x, &mut Transcript::new(b"pcs")).unwrap();
        prop_assert_eq!(proof.claimed, mle_eval_base(&vals, &x));
        verify_opening(c.digest(), &x, proof.claimed, &proof, &mut Transcript::new(b"pcs")).unwrap();

        let mut w = ByteWriter::new();
        proof.write(&mut w);
        let bytes = w.into_bytes();
        prop_assert_eq!(bytes.len(), proof.byte_len());
        let back = OpeningProof::read(&mut ByteReader::new(&bytes), c.digest()).unwrap();
        prop_assert_eq!(back, proof);
    }

    #[test]
    fn single_edits_are_rejected(seed in any::<u64>(), n in 2usize..9, which in 0usize..5, at in any::<usize>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = setup(n, &PcsConfig::default()).unwrap();
        let vals = table(&mut rng, n);
        let c = commit(&vals, &params, None).unwrap();
        let x = point(&mut rng, n);
        let proof = open(&c, &x, &mut Transcript::new(b"pcs")).unwrap();
        let mut bad = proof.clone();
        let mut claimed = proof.claimed;
        match which {
            0 => { let i = at % bad.test_row.len(); bad.test_row[i] += Ext::ONE; }
            1 => { let i = at % bad.eval_row.len(); bad.eval_row[i] += Ext::ONE; }
            2 => { let col = &mut bad.columns[at % proof.columns.len()]; let i = at % col.values.len(); col.values[i] += Fp::ONE; }
            3 => claimed += Ext::ONE,
            _ => { bad.claimed += Ext::ONE; claimed = bad.claimed; }
        }
        prop_assert!(verify_opening(c.digest(), &x, claimed, &bad, &mut Transcript::new(b"pcs")).is_err());
    }

    #[test]
    fn commitments_bind_tables(seed in any::<u64>(), n in 1usize..9, at in any::<usize>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = setup(n, &PcsConfig::default()).unwrap();
        let vals = table(&mut rng, n);
        let mut other = vals.clone();
        other[at % vals.len()] += Fp::ONE;
        let a = commit(&vals, &params, None).unwrap();
        let same = commit(&vals, &params, None).unwrap();
        let changed = commit(&other, &params, None).unwrap();
        prop_assert_eq!(a.digest(), same.digest());
        prop_assert_ne!(a.digest(), changed.digest());
    }

    #[test]
    fn packed_recovery_matches_split(seed in any::<u64>(), members in 1usize..9, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family: Vec<Vec<Fp>> = (0..members).map(|_| table(&mut rng, n)).collect();
        let x = point(&mut rng, n);
        let mut seen = Vec::new();
        for mode in [PackMode::Packed, PackMode::Split] {
            let f = commit_family(family.clone(), mode, &PcsConfig::default()).unwrap();
            let (proof, values) = f.open_members(&x, &mut Transcript::new(b"fam")).unwrap();
            let checked = verify_members(&f.digest, &x, &proof, &mut Transcript::new(b"fam")).unwrap();
            prop_assert_eq!(&checked, &values);
            seen.push(checked);
        }
        prop_assert_eq!(&seen[0], &seen[1]);
        for (j, m) in family.iter().enumerate() {
            prop_assert_eq!(seen[0][j], mle_eval_base(m, &x));
        }
    }
}

#[test]
fn salted_commitments_hide_equal_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = setup(6, &PcsConfig::default()).unwrap();
    let vals = table(&mut rng, 6);
    let salt_a: Vec<Fp> = (0..params.cols()).map(|_| Fp::random(&mut rng)).collect();
    let salt_b: Vec<Fp> = (0..params.cols()).map(|_| Fp::random(&mut rng)).collect();
    let a = commit(&vals, &params, Some(salt_a)).unwrap();
    let b = commit(&vals, &params, Some(salt_b)).unwrap();
    assert_ne!(a.digest(), b.digest());
    let x = point(&mut rng, 6);
    let proof = open(&a, &x, &mut Transcript::new(b"s")).unwrap();
    verify_opening(a.digest(), &x, mle_eval_base(&vals, &x), &proof, &mut Transcript::new(b"s")).unwrap();
}
