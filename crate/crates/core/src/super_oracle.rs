//! Families of same-shape oracles opened at one shared point.
//!
//! A family `{f_j}` is packed into `F(j, x) = f_j(x)` (cell `j · 2^n + x`, so
//! the family index occupies the top variables). To open every member at
//! `x*`, the prover sends `v_j = f_j(x*)`, the verifier draws `r` after
//! absorbing them, and one opening of `F` at `(x*, r)` must equal
//! `Σ_j eq(r, j) v_j`. In split mode each member is committed and opened
//! separately instead.

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::field::{Ext, Fp};
use crate::mle::{eq_at_index, eq_table, mle_eval_base, MleOracle};
use crate::pcs::{self, CodeParams, CommitmentDigest, Committed, OpeningProof, PcsConfig};
use crate::transcript::Transcript;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperOracle {
    /// Number of real members before padding.
    pub members: usize,
    pub log_q: usize,
    pub sub_vars: usize,
    pub oracle: MleOracle,
}

/// Packs a family, zero-padding the member count to a power of two.
pub fn pack(family: &[MleOracle]) -> Result<SuperOracle> {
    let first = family.first().ok_or_else(|| Error::Size("cannot pack an empty family".into()))?;
    let n = first.num_vars();
    if family.iter().any(|f| f.num_vars() != n) {
        return Err(Error::Size("family members have different variable counts".into()));
    }
    let q = family.len().next_power_of_two();
    let mut values = Vec::with_capacity(q << n);
    for f in family {
        values.extend_from_slice(f.values());
    }
    values.resize(q << n, Fp::ZERO);
    Ok(SuperOracle {
        members: family.len(),
        log_q: q.trailing_zeros() as usize,
        sub_vars: n,
        oracle: MleOracle::new(values)?,
    })
}

/// Recovery check `opened = Σ_j eq(r, j) v_j`.
pub fn verify_recovery(opened: Ext, r: &[Ext], values: &[Ext]) -> Result<()> {
    if values.len() != 1 << r.len() {
        return Err(Error::Size(format!("{} values for a {}-bit family index", values.len(), r.len())));
    }
    let expect: Ext = eq_table(r).iter().zip(values).map(|(e, v)| *e * *v).sum();
    if expect != opened {
        return Err(Error::Opening {
            kind: crate::error::OpeningFailure::Evaluation,
            detail: "packed opening disagrees with the supplied member values".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackMode {
    Packed,
    Split,
}

/// Commitment(s) of a family: one digest when packed, one per member when split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyDigest {
    pub mode: PackMode,
    pub members: usize,
    pub log_q: usize,
    pub digests: Vec<CommitmentDigest>,
}

impl FamilyDigest {
    pub fn sub_vars(&self) -> usize {
        let n = self.digests[0].params.num_vars;
        match self.mode {
            PackMode::Packed => n - self.log_q,
            PackMode::Split => n,
        }
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.u8(matches!(self.mode, PackMode::Packed) as u8);
        w.u32(self.members as u32);
        w.u32(self.log_q as u32);
        w.u32(self.digests.len() as u32);
        for d in &self.digests {
            d.write(w);
        }
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        let mode = match r.u8()? {
            1 => PackMode::Packed,
            0 => PackMode::Split,
            b => return Err(Error::Parse(format!("invalid family mode {b}"))),
        };
        let members = r.u32()? as usize;
        let log_q = r.u32()? as usize;
        let count = r.u32()? as usize;
        let expected = match mode {
            PackMode::Packed => 1,
            PackMode::Split => members,
        };
        if members == 0 || members > 1 << log_q || log_q > 20 || count != expected {
            return Err(Error::Parse("inconsistent family header".into()));
        }
        let digests = (0..count).map(|_| CommitmentDigest::read(r)).collect::<Result<Vec<_>>>()?;
        if mode == PackMode::Packed && digests[0].params.num_vars < log_q {
            return Err(Error::Parse("packed family smaller than its index".into()));
        }
        Ok(FamilyDigest { mode, members, log_q, digests })
    }

    pub fn absorb_into(&self, t: &mut Transcript, label: &[u8]) {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        t.absorb(label, w.as_bytes());
    }
}

/// Prover-side family.
#[derive(Debug, Clone)]
pub struct FamilyCommitted {
    pub digest: FamilyDigest,
    members: Vec<Vec<Fp>>,
    commitments: Vec<Committed>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyOpening {
    /// `v_j` for every padded index `j < Q` (packed) or every member (split).
    pub values: Vec<Ext>,
    pub openings: Vec<OpeningProof>,
}

impl FamilyOpening {
    pub fn write(&self, w: &mut ByteWriter) {
        for v in &self.values {
            w.ext(*v);
        }
        for o in &self.openings {
            o.write(w);
        }
    }

    pub fn read(r: &mut ByteReader, d: &FamilyDigest, with_values: bool) -> Result<Self> {
        let nvals = match (d.mode, with_values) {
            (PackMode::Packed, true) => 1 << d.log_q,
            (PackMode::Packed, false) => 0,
            (PackMode::Split, _) => 0,
        };
        let values = (0..nvals).map(|_| r.ext()).collect::<Result<_>>()?;
        let openings = d.digests.iter().map(|dg| OpeningProof::read(r, dg)).collect::<Result<_>>()?;
        Ok(FamilyOpening { values, openings })
    }

    pub fn byte_len(&self) -> usize {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        w.len()
    }

    pub fn opening_bytes(&self) -> usize {
        self.openings.iter().map(OpeningProof::byte_len).sum()
    }
}

/// Commits a family of equally sized tables.
pub fn commit_family(members: Vec<Vec<Fp>>, mode: PackMode, config: &PcsConfig) -> Result<FamilyCommitted> {
    commit_family_inner(members, mode, config, None)
}

/// Packed commitment with a salt row appended to the packed matrix.
pub fn commit_family_salted(members: Vec<Vec<Fp>>, config: &PcsConfig, salt: Vec<Fp>) -> Result<FamilyCommitted> {
    commit_family_inner(members, PackMode::Packed, config, Some(salt))
}

/// Column count of the packed matrix for `members` tables of `2^sub_vars` cells.
pub fn packed_params(members: usize, sub_vars: usize, config: &PcsConfig) -> Result<CodeParams> {
    pcs::setup(sub_vars + members.next_power_of_two().trailing_zeros() as usize, config)
}

fn commit_family_inner(
    members: Vec<Vec<Fp>>,
    mode: PackMode,
    config: &PcsConfig,
    salt: Option<Vec<Fp>>,
) -> Result<FamilyCommitted> {
    let first = members.first().ok_or_else(|| Error::Size("empty family".into()))?;
    let len = first.len();
    if !len.is_power_of_two() || members.iter().any(|m| m.len() != len) {
        return Err(Error::Size("family members must share a power-of-two length".into()));
    }
    let n = len.trailing_zeros() as usize;
    let q = members.len().next_power_of_two();
    let log_q = q.trailing_zeros() as usize;
    let commitments = match mode {
        PackMode::Packed => {
            let params = pcs::setup(n + log_q, config)?;
            let mut packed = Vec::with_capacity(q * len);
            for m in &members {
                packed.extend_from_slice(m);
            }
            packed.resize(q * len, Fp::ZERO);
            vec![pcs::commit(&packed, &params, salt)?]
        }
        PackMode::Split => {
            let params = pcs::setup(n, config)?;
            members.iter().map(|m| pcs::commit(m, &params, None)).collect::<Result<_>>()?
        }
    };
    let digest = FamilyDigest {
        mode,
        members: members.len(),
        log_q,
        digests: commitments.iter().map(|c| *c.digest()).collect(),
    };
    Ok(FamilyCommitted { digest, members, commitments })
}

impl FamilyCommitted {
    pub fn member(&self, j: usize) -> &[Fp] {
        &self.members[j]
    }

    pub fn members(&self) -> &[Vec<Fp>] {
        &self.members
    }

    pub fn sub_vars(&self) -> usize {
        self.members[0].len().trailing_zeros() as usize
    }

    /// Opens every member at `x`; returns the opening and the member values.
    pub fn open_members(&self, x: &[Ext], t: &mut Transcript) -> Result<(FamilyOpening, Vec<Ext>)> {
        let q = 1usize << self.digest.log_q;
        let mut values: Vec<Ext> = self.members.iter().map(|m| mle_eval_base(m, x)).collect();
        values.resize(q, Ext::ZERO);
        t.begin_scope(b"family-open");
        let out = match self.digest.mode {
            PackMode::Packed => {
                t.absorb_ext(b"family-values", &values);
                let r = t.challenge_ext(b"family-r", self.digest.log_q);
                let mut point = x.to_vec();
                point.extend_from_slice(&r);
                let opening = pcs::open(&self.commitments[0], &point, t)?;
                FamilyOpening { values: values.clone(), openings: vec![opening] }
            }
            PackMode::Split => {
                let openings = self.commitments.iter().map(|c| pcs::open(c, x, t)).collect::<Result<Vec<_>>>()?;
                FamilyOpening { values: Vec::new(), openings }
            }
        };
        t.end_scope();
        Ok((out, values))
    }

    /// Opens the packed polynomial `F` at `(x, r)` for a caller-chosen `r`.
    pub fn open_point(&self, x: &[Ext], r: &[Ext], t: &mut Transcript) -> Result<(FamilyOpening, Ext)> {
        t.begin_scope(b"family-point");
        let out = match self.digest.mode {
            PackMode::Packed => {
                let mut point = x.to_vec();
                point.extend_from_slice(r);
                let opening = pcs::open(&self.commitments[0], &point, t)?;
                let v = opening.claimed;
                (FamilyOpening { values: Vec::new(), openings: vec![opening] }, v)
            }
            PackMode::Split => {
                let openings = self.commitments.iter().map(|c| pcs::open(c, x, t)).collect::<Result<Vec<_>>>()?;
                let v = openings.iter().enumerate().map(|(j, o)| eq_at_index(r, j) * o.claimed).sum();
                (FamilyOpening { values: Vec::new(), openings }, v)
            }
        };
        t.end_scope();
        Ok(out)
    }
}

/// Verifies a member opening at `x`; returns `v_j` for every padded index.
pub fn verify_members(d: &FamilyDigest, x: &[Ext], proof: &FamilyOpening, t: &mut Transcript) -> Result<Vec<Ext>> {
    let q = 1usize << d.log_q;
    t.begin_scope(b"family-open");
    let values = match d.mode {
        PackMode::Packed => {
            if proof.values.len() != q || proof.openings.len() != 1 {
                return Err(Error::Size("packed opening has the wrong shape".into()));
            }
            if proof.values[d.members..].iter().any(|v| *v != Ext::ZERO) {
                return Err(Error::Opening {
                    kind: crate::error::OpeningFailure::Evaluation,
                    detail: "padding member with nonzero value".into(),
                });
            }
            t.absorb_ext(b"family-values", &proof.values);
            let r = t.challenge_ext(b"family-r", d.log_q);
            let mut point = x.to_vec();
            point.extend_from_slice(&r);
            let o = &proof.openings[0];
            pcs::verify_opening(&d.digests[0], &point, o.claimed, o, t)?;
            verify_recovery(o.claimed, &r, &proof.values)?;
            proof.values.clone()
        }
        PackMode::Split => {
            if proof.openings.len() != d.members {
                return Err(Error::Size("split opening has the wrong member count".into()));
            }
            let mut values = Vec::with_capacity(q);
            for (dg, o) in d.digests.iter().zip(&proof.openings) {
                pcs::verify_opening(dg, x, o.claimed, o, t)?;
                values.push(o.claimed);
            }
            values.resize(q, Ext::ZERO);
            values
        }
    };
    t.end_scope();
    Ok(values)
}

/// Verifies an opening of `F` at `(x, r)` and returns its value.
pub fn verify_point(d: &FamilyDigest, x: &[Ext], r: &[Ext], proof: &FamilyOpening, t: &mut Transcript) -> Result<Ext> {
    t.begin_scope(b"family-point");
    let v = match d.mode {
        PackMode::Packed => {
            let o = proof.openings.first().ok_or_else(|| Error::Size("missing opening".into()))?;
            let mut point = x.to_vec();
            point.extend_from_slice(r);
            pcs::verify_opening(&d.digests[0], &point, o.claimed, o, t)?;
            o.claimed
        }
        PackMode::Split => {
            if proof.openings.len() != d.members {
                return Err(Error::Size("split opening has the wrong member count".into()));
            }
            let mut acc = Ext::ZERO;
            for (j, (dg, o)) in d.digests.iter().zip(&proof.openings).enumerate() {
                pcs::verify_opening(dg, x, o.claimed, o, t)?;
                acc += eq_at_index(r, j) * o.claimed;
            }
            acc
        }
    };
    t.end_scope();
    Ok(v)
}

/// Shape-only helper used when the verifier needs the code parameters.
pub fn family_params(d: &FamilyDigest) -> &CodeParams {
    &d.digests[0].params
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mle::mle_eval;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_oracle(rng: &mut ChaCha8Rng, n: usize) -> MleOracle {
        MleOracle::new((0..1 << n).map(|_| Fp::random(rng)).collect()).unwrap()
    }

    #[test]
    fn pack_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let f0 = rand_oracle(&mut rng, 3);
        let one = pack(std::slice::from_ref(&f0)).unwrap();
        assert_eq!((one.log_q, one.oracle.values()), (0, f0.values()));

        let f1 = rand_oracle(&mut rng, 3);
        let two = pack(&[f0.clone(), f1.clone()]).unwrap();
        let x: Vec<Ext> = (0..3).map(|_| Ext::random(&mut rng)).collect();
        let r = Ext::random(&mut rng);
        let mut p = x.clone();
        p.push(r);
        let expect = (Ext::ONE - r) * f0.evaluate(&x).unwrap() + r * f1.evaluate(&x).unwrap();
        assert_eq!(two.oracle.evaluate(&p).unwrap(), expect);

        let three = pack(&[f0.clone(), f1, f0]).unwrap();
        assert_eq!(three.log_q, 2);
        assert!(three.oracle.values()[3 * 8..].iter().all(|v| *v == Fp::ZERO));
        assert!(matches!(pack(&[]), Err(Error::Size(_))));
    }

    #[test]
    fn recovery_soundness() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for log_q in [2usize, 4, 5] {
            let q = 1 << log_q;
            let vals: Vec<Ext> = (0..q).map(|_| Ext::random(&mut rng)).collect();
            let mut accepted = 0;
            for _ in 0..1000 {
                let r: Vec<Ext> = (0..log_q).map(|_| Ext::random(&mut rng)).collect();
                let opened = mle_eval(&vals, &r);
                verify_recovery(opened, &r, &vals).unwrap();
                let mut bad = vals.clone();
                bad[rng.gen_range(0..q)] += Ext::random_nonzero(&mut rng);
                if verify_recovery(opened, &r, &bad).is_ok() {
                    accepted += 1;
                }
            }
            assert_eq!(accepted, 0);
        }
        let v = Ext::from_u64(5);
        verify_recovery(v, &[], &[v]).unwrap();
    }

    #[test]
    fn packed_and_split_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let members: Vec<Vec<Fp>> = (0..5).map(|_| (0..64).map(|_| Fp::random(&mut rng)).collect()).collect();
        let x: Vec<Ext> = (0..6).map(|_| Ext::random(&mut rng)).collect();
        let cfg = PcsConfig::default();
        let mut got = Vec::new();
        for mode in [PackMode::Packed, PackMode::Split] {
            let fam = commit_family(members.clone(), mode, &cfg).unwrap();
            let (proof, vals) = fam.open_members(&x, &mut Transcript::new(b"f")).unwrap();
            let checked = verify_members(&fam.digest, &x, &proof, &mut Transcript::new(b"f")).unwrap();
            assert_eq!(vals, checked);
            got.push(checked);

            let r: Vec<Ext> = (0..3).map(|_| Ext::random(&mut rng)).collect();
            let (po, v) = fam.open_point(&x, &r, &mut Transcript::new(b"g")).unwrap();
            assert_eq!(verify_point(&fam.digest, &x, &r, &po, &mut Transcript::new(b"g")).unwrap(), v);
            assert_eq!(v, mle_eval(&vals, &r));
        }
        assert_eq!(got[0], got[1]);
        for (j, m) in members.iter().enumerate() {
            assert_eq!(got[0][j], mle_eval_base(m, &x));
        }
    }

    #[test]
    fn tampered_member_value_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let members: Vec<Vec<Fp>> = (0..4).map(|_| (0..16).map(|_| Fp::random(&mut rng)).collect()).collect();
        let fam = commit_family(members, PackMode::Packed, &PcsConfig::default()).unwrap();
        let x: Vec<Ext> = (0..4).map(|_| Ext::random(&mut rng)).collect();
        let (mut proof, _) = fam.open_members(&x, &mut Transcript::new(b"f")).unwrap();
        proof.values[2] += Ext::ONE;
        assert!(verify_members(&fam.digest, &x, &proof, &mut Transcript::new(b"f")).is_err());
    }
}
