use proptest::prelude::*;
use zkvalue_core::codec::{ByteReader, ByteWriter};
use zkvalue_core::field::MODULUS;
use zkvalue_core::ntt::{ntt, Direction, RsEncoder};
use zkvalue_core::{Ext, Field, Fp};

fn fp() -> impl Strategy<Value = Fp> {
    any::<u64>().prop_map(Fp::new)
}

fn ext() -> impl Strategy<Value = Ext> {
    (fp(), fp()).prop_map(|(a, b)| Ext::new(a, b))
}

proptest! {
    #[test]
    fn base_field_ring_laws(a in fp(), b in fp(), c in fp()) {
        prop_assert_eq!(a + b, b + a);
        prop_assert_eq!(a * b, b * a);
        prop_assert_eq!((a + b) + c, a + (b + c));
        prop_assert_eq!((a * b) * c, a * (b * c));
        prop_assert_eq!(a * (b + c), a * b + a * c);
        prop_assert_eq!(a - a, Fp::ZERO);
        prop_assert_eq!(-a + a, Fp::ZERO);
    }

    #[test]
    fn base_field_matches_u128_reference(a in any::<u64>(), b in any::<u64>()) {
        let m = MODULUS as u128;
        let (x, y) = (a as u128 % m, b as u128 % m);
        prop_assert_eq!((Fp::new(a) * Fp::new(b)).value() as u128, x * y % m);
        prop_assert_eq!((Fp::new(a) + Fp::new(b)).value() as u128, (x + y) % m);
    }

    #[test]
    fn inverses(a in fp(), e in ext()) {
        if a != Fp::ZERO {
            prop_assert_eq!(a * a.inverse().unwrap(), Fp::ONE);
        }
        if e != Ext::ZERO {
            prop_assert_eq!(e * e.inverse().unwrap(), Ext::ONE);
        }
    }

    #[test]
    fn extension_ring_laws(a in ext(), b in ext(), c in ext(), s in fp()) {
        prop_assert_eq!(a * b, b * a);
        prop_assert_eq!((a * b) * c, a * (b * c));
        prop_assert_eq!(a * (b + c), a * b + a * c);
        prop_assert_eq!(a.mul_base(s), a * Ext::from(s));
    }

    #[test]
    fn signed_embedding(v in -(1i64 << 40)..(1i64 << 40)) {
        prop_assert_eq!(Fp::from_i64(v).to_i64_centered(), v as i128);
        prop_assert_eq!(Fp::from_i64(v) + Fp::from_i64(-v), Fp::ZERO);
    }

    #[test]
    fn codec_round_trip(xs in prop::collection::vec(fp(), 0..20), es in prop::collection::vec(ext(), 0..20)) {
        let mut w = ByteWriter::new();
        w.fp_vec(&xs);
        w.ext_vec(&es);
        let bytes = w.into_bytes();
        let mut r = ByteReader::new(&bytes);
        prop_assert_eq!(r.fp_vec().unwrap(), xs);
        prop_assert_eq!(r.ext_vec().unwrap(), es);
        prop_assert!(r.is_exhausted());
    }

    #[test]
    fn ntt_round_trip(log_n in 0usize..8, seed in any::<u64>()) {
        let vals: Vec<Fp> = (0..1u64 << log_n).map(|i| Fp::new(seed.wrapping_mul(i + 1))).collect();
        let back = ntt(&ntt(&vals, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        prop_assert_eq!(back, vals);
    }

    #[test]
    fn rs_code_is_linear(log_k in 0usize..6, a in prop::collection::vec(fp(), 32), b in prop::collection::vec(fp(), 32), s in fp()) {
        let k = 1 << log_k;
        let enc = RsEncoder::new(k, 1).unwrap();
        let comb: Vec<Fp> = a[..k].iter().zip(&b[..k]).map(|(x, y)| *x + s * *y).collect();
        let lhs = enc.encode(&comb).unwrap();
        let ea = enc.encode(&a[..k]).unwrap();
        let eb = enc.encode(&b[..k]).unwrap();
        let rhs: Vec<Fp> = ea.iter().zip(&eb).map(|(x, y)| *x + s * *y).collect();
        prop_assert_eq!(lhs, rhs);
    }
}

#[test]
fn non_canonical_bytes_are_rejected() {
    assert!(Fp::from_le_bytes(MODULUS.to_le_bytes()).is_err());
    assert!(Fp::from_le_bytes((MODULUS - 1).to_le_bytes()).is_ok());
    assert!(Fp::ZERO.inverse().is_err());
}
