//! Zero-knowledge-style proof that published scores are the LSH-Shapley
//! values of the committed provider and buyer data.
//!
//! A proof is a header echoing the public parameters followed by seven
//! sections: witness commitments, published scores, hash binding, the
//! Shapley layers, packed family openings, other openings, and the
//! provider reconstruction.

mod flow;
mod roles;

use std::collections::HashMap;

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result, Section};
use crate::field::Fp;
use crate::sumcheck::{OpCounter, ProverOptions};
use crate::transcript::Transcript;
use crate::witness::{
    score_slice_digest, BuyerShard, OracleSet, ProviderShard, PublicCommitments, PublicParams, Side, PROTOCOL_VERSION,
};

use flow::Inputs;
use roles::{DigestHandle, Handle, ProverRole, VerifierRole};

pub const SECTIONS: usize = 7;
const MAGIC: &[u8; 4] = b"ZKVL";
const HASH_ID: &str = "sha256";
const DOMAIN: &[u8] = b"zkvalue-lsh-shapley-v1";
const MAX_SECTION: usize = 1 << 34;

/// Every committed or referenced table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleId {
    XTr,
    YInd,
    Dp(Side),
    Sign(Side),
    Abs(Side),
    Limbs(Side),
    Histogram,
    Lookup,
    Mhat,
    Harm,
    Edge,
    D,
    DInv,
    W,
    WtNum,
    TMatch,
    SvSum,
    SvAvg,
    MRange,
    MHarm,
    ScoreSlice(usize),
    BucketWeights,
    QRange(Side),
    HRange,
    QHarm,
    HHarm,
    ProviderFeatures(usize),
    ProviderLabels(usize),
    BuyerFeatures,
    BuyerLabels,
}

impl OracleId {
    pub fn name(self) -> String {
        let side = |s: Side| String::from_utf8_lossy(s.tag()).into_owned();
        match self {
            OracleId::XTr => "x_tr".into(),
            OracleId::YInd => "y_ind".into(),
            OracleId::Dp(s) => format!("dp_{}", side(s)),
            OracleId::Sign(s) => format!("sign_{}", side(s)),
            OracleId::Abs(s) => format!("abs_{}", side(s)),
            OracleId::Limbs(s) => format!("limbs_{}", side(s)),
            OracleId::Histogram => "histograms".into(),
            OracleId::Lookup => "bucket_lookups".into(),
            OracleId::Mhat => "mhat".into(),
            OracleId::Harm => "harm".into(),
            OracleId::Edge => "edge".into(),
            OracleId::D => "d".into(),
            OracleId::DInv => "d_inv".into(),
            OracleId::W => "w".into(),
            OracleId::WtNum => "wt_num".into(),
            OracleId::TMatch => "t_match".into(),
            OracleId::SvSum => "svsum".into(),
            OracleId::SvAvg => "svavg".into(),
            OracleId::MRange => "m_range".into(),
            OracleId::MHarm => "m_harm".into(),
            OracleId::ScoreSlice(p) => format!("score_slice_{p}"),
            OracleId::BucketWeights => "bucket_weights".into(),
            OracleId::QRange(s) => format!("range_inverses_{}", side(s)),
            OracleId::HRange => "range_table_inverses".into(),
            OracleId::QHarm => "harmonic_inverses".into(),
            OracleId::HHarm => "harmonic_table_inverses".into(),
            OracleId::ProviderFeatures(p) => format!("provider_{p}_features"),
            OracleId::ProviderLabels(p) => format!("provider_{p}_labels"),
            OracleId::BuyerFeatures => "buyer_features".into(),
            OracleId::BuyerLabels => "buyer_labels".into(),
        }
    }
}

/// Prover work buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    /// Hash binding and range checks.
    Hash,
    /// Histogram and bucket-lookup batches.
    Lookups,
    /// Harmonic lookup, aggregation and normalization.
    Weights,
    /// Validation-side histogram binding.
    V3,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LayerCounters {
    pub hash: OpCounter,
    pub lookups: OpCounter,
    pub weights: OpCounter,
    pub v3: OpCounter,
}

impl LayerCounters {
    pub fn get_mut(&mut self, layer: Layer) -> &mut OpCounter {
        match layer {
            Layer::Hash => &mut self.hash,
            Layer::Lookups => &mut self.lookups,
            Layer::Weights => &mut self.weights,
            Layer::V3 => &mut self.v3,
        }
    }

    /// Shapley-layer work without V3.
    pub fn shapley_layers(&self) -> u64 {
        self.lookups.total() + self.weights.total()
    }

    pub fn total(&self) -> u64 {
        self.hash.total() + self.shapley_layers() + self.v3.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValuationProof {
    pub params: PublicParams,
    pub sections: Vec<Vec<u8>>,
}

impl ValuationProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u32(PROTOCOL_VERSION);
        w.str(HASH_ID);
        w.blob(&self.params.to_bytes());
        for s in &self.sections {
            w.blob(s);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Parse("not a valuation proof".into()));
        }
        let version = r.u32()?;
        if version != PROTOCOL_VERSION {
            return Err(Error::Parse(format!("unsupported proof version {version}")));
        }
        let hash = r.str()?;
        if hash != HASH_ID {
            return Err(Error::Parse(format!("unsupported hash {hash}")));
        }
        let params = PublicParams::from_bytes(r.blob()?)?;
        let mut sections = Vec::with_capacity(SECTIONS);
        for _ in 0..SECTIONS {
            let len = r.len_prefix(MAX_SECTION)?;
            sections.push(r.take(len)?.to_vec());
        }
        r.expect_end("proof")?;
        Ok(ValuationProof { params, sections })
    }

    pub fn byte_len(&self) -> usize {
        self.to_bytes().len()
    }

    pub fn section(&self, s: Section) -> &[u8] {
        &self.sections[roles::section_index(s)]
    }

    pub fn section_mut(&mut self, s: Section) -> &mut Vec<u8> {
        &mut self.sections[roles::section_index(s)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofStats {
    pub section_bytes: Vec<usize>,
    pub total_bytes: usize,
    /// Openings of the sign, histogram and lookup families.
    pub family_opening_bytes: usize,
    /// Every PCS opening in the proof.
    pub opening_bytes: usize,
    pub counters: LayerCounters,
}

fn initial_transcript(pp: &PublicParams, commitments: &PublicCommitments) -> Transcript {
    let mut t = Transcript::new(DOMAIN);
    t.absorb(b"public-params", &pp.to_bytes());
    let mut w = ByteWriter::new();
    commitments.write(&mut w);
    t.absorb(b"public-commitments", w.as_bytes());
    t
}

/// Audits the witness, then proves.
pub fn prove(
    oracles: &OracleSet,
    shards: &[ProviderShard],
    buyer: &BuyerShard,
    pp: &PublicParams,
    opts: ProverOptions,
) -> Result<(ValuationProof, ProofStats)> {
    oracles.self_audit()?;
    prove_unchecked(oracles, shards, buyer, pp, opts)
}

/// Proves without auditing; a dishonest witness yields a rejected proof.
pub fn prove_unchecked(
    oracles: &OracleSet,
    shards: &[ProviderShard],
    buyer: &BuyerShard,
    pp: &PublicParams,
    opts: ProverOptions,
) -> Result<(ValuationProof, ProofStats)> {
    pp.validate()?;
    let shape = pp.shape();
    if oracles.shape != shape || oracles.harmonic_scale != pp.harmonic_scale {
        return Err(Error::Size("witness does not match the public parameters".into()));
    }
    if shards.len() != shape.providers || shards.iter().enumerate().any(|(p, s)| s.index != p) {
        return Err(Error::Partition(format!("expected {} ordered provider shards", shape.providers)));
    }
    let mut provider_digests = Vec::with_capacity(shards.len());
    let mut handles = HashMap::new();
    for s in shards {
        let (f, l) = s.commit(pp)?;
        provider_digests.push(crate::witness::ProviderDigests { features: *f.digest(), labels: *l.digest() });
        handles.insert(OracleId::ProviderFeatures(s.index), Handle::Single(f));
        handles.insert(OracleId::ProviderLabels(s.index), Handle::Single(l));
    }
    let (bf, bl) = buyer.commit(pp)?;
    let commitments = PublicCommitments {
        providers: provider_digests,
        buyer: crate::witness::BuyerDigests { features: *bf.digest(), labels: bl.digest.clone() },
    };
    handles.insert(OracleId::BuyerFeatures, Handle::Single(bf));
    handles.insert(OracleId::BuyerLabels, Handle::Family(bl));

    let mut role = ProverRole::new(initial_transcript(pp, &commitments), opts, pp.pcs);
    role.handles = handles;
    let inputs = Inputs { pp, wit: Some(oracles), shards: Some(shards), buyer: Some(buyer), published: &oracles.svavg };
    flow::run(&mut role, &inputs)?;

    let sections: Vec<Vec<u8>> = role.out.into_iter().map(ByteWriter::into_bytes).collect();
    let proof = ValuationProof { params: pp.clone(), sections };
    let stats = ProofStats {
        section_bytes: proof.sections.iter().map(Vec::len).collect(),
        total_bytes: proof.byte_len(),
        family_opening_bytes: role.family_opening_bytes,
        opening_bytes: role.opening_bytes,
        counters: role.counters,
    };
    Ok((proof, stats))
}

fn check_public_commitments(c: &PublicCommitments, pp: &PublicParams) -> Result<()> {
    let sh = pp.shape();
    let bad = |what: &str| Err(Error::verify(Section::Commitments, format!("public commitment: {what}")));
    if c.providers.len() != sh.providers {
        return bad("provider count");
    }
    let (fp, lp) = (pp.provider_feature_params()?, pp.provider_label_params()?);
    if c.providers.iter().any(|d| d.features.params != fp || d.labels.params != lp) {
        return bad("provider commitment shape");
    }
    if c.buyer.features.params != pp.buyer_feature_params()? {
        return bad("buyer feature shape");
    }
    let l = &c.buyer.labels;
    let cp = sh.classes_padded();
    if l.mode != crate::super_oracle::PackMode::Packed
        || l.members != cp
        || l.log_q != sh.log_c()
        || l.digests.len() != 1
        || l.digests[0].params != pp.buyer_label_params()?
    {
        return bad("buyer label shape");
    }
    Ok(())
}

/// Replays the proof; the digests read before any failure are returned too.
fn verify_collect(
    proof: &ValuationProof,
    commitments: &PublicCommitments,
    published: &[Fp],
    pp: &PublicParams,
) -> (HashMap<OracleId, DigestHandle>, Result<()>) {
    if proof.params != *pp {
        return (HashMap::new(), Err(Error::verify(Section::Header, "echoed public parameters differ")));
    }
    let pre = pp.validate().and_then(|_| {
        if proof.sections.len() != SECTIONS {
            return Err(Error::Parse(format!("{} proof sections", proof.sections.len())));
        }
        if published.len() != pp.n_train {
            return Err(Error::verify(Section::PublishedScores, "published score count"));
        }
        check_public_commitments(commitments, pp)
    });
    if let Err(e) = pre {
        return (HashMap::new(), Err(e));
    }
    let mut role = VerifierRole::new(initial_transcript(pp, commitments), &proof.sections, pp.pcs);
    for (p, d) in commitments.providers.iter().enumerate() {
        role.digests.insert(OracleId::ProviderFeatures(p), DigestHandle::Single(d.features));
        role.digests.insert(OracleId::ProviderLabels(p), DigestHandle::Single(d.labels));
    }
    role.digests.insert(OracleId::BuyerFeatures, DigestHandle::Single(commitments.buyer.features));
    role.digests.insert(OracleId::BuyerLabels, DigestHandle::Family(commitments.buyer.labels.clone()));
    let inputs = Inputs { pp, wit: None, shards: None, buyer: None, published };
    let outcome = flow::run(&mut role, &inputs).and_then(|_| role.finish());
    (role.digests, outcome)
}

/// Accepts iff the proof certifies `published` for the committed inputs.
pub fn verify(
    proof: &ValuationProof,
    commitments: &PublicCommitments,
    published: &[Fp],
    pp: &PublicParams,
) -> Result<()> {
    verify_collect(proof, commitments, published, pp).1
}

pub fn verify_bytes(bytes: &[u8], commitments: &PublicCommitments, published: &[Fp], pp: &PublicParams) -> Result<()> {
    verify(&ValuationProof::from_bytes(bytes)?, commitments, published, pp)
}

/// Outcome of a provider's three checks; `None` means the check passed.
#[derive(Debug)]
pub struct ProviderReport {
    pub provider: usize,
    /// Input binding: the shard recommits to the published digests.
    pub input_binding: Option<Error>,
    /// Score binding: the received slice recommits to the slice digest in the proof.
    pub score_binding: Option<Error>,
    /// Full verification.
    pub proof: Option<Error>,
}

impl ProviderReport {
    pub fn accepted(&self) -> bool {
        self.input_binding.is_none() && self.score_binding.is_none() && self.proof.is_none()
    }

    /// Failed checks as `(letter, error)`, in A, B, C order.
    pub fn failures(&self) -> Vec<(char, &Error)> {
        [('A', &self.input_binding), ('B', &self.score_binding), ('C', &self.proof)]
            .into_iter()
            .filter_map(|(c, e)| e.as_ref().map(|e| (c, e)))
            .collect()
    }
}

impl std::fmt::Display for ProviderReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "provider {}:", self.provider)?;
        for (c, e) in [('A', &self.input_binding), ('B', &self.score_binding), ('C', &self.proof)] {
            match e {
                None => write!(f, " {c} ok")?,
                Some(e) => write!(f, " {c} failed ({e})")?,
            }
        }
        Ok(())
    }
}

/// A provider's view: its own shard, the slice of scores it was paid on,
/// the public scores and the proof.
pub fn provider_verify(
    shard: &ProviderShard,
    received: &[Fp],
    proof: &ValuationProof,
    commitments: &PublicCommitments,
    published: &[Fp],
    pp: &PublicParams,
) -> ProviderReport {
    let p = shard.index;
    let input_binding = match shard.digests(pp) {
        Ok(own) if commitments.providers.get(p) == Some(&own) => None,
        Ok(_) => Some(Error::verify(Section::Commitments, format!("provider {p} input commitment mismatch"))),
        Err(e) => Some(e),
    };
    let (digests, outcome) = verify_collect(proof, commitments, published, pp);
    let score_binding = match score_slice_digest(received, pp) {
        Ok(d) => match digests.get(&OracleId::ScoreSlice(p)) {
            Some(DigestHandle::Single(c)) if *c == d => None,
            _ => Some(Error::verify(Section::Reconstruction, format!("provider {p} score slice mismatch"))),
        },
        Err(e) => Some(e),
    };
    ProviderReport { provider: p, input_binding, score_binding, proof: outcome.err() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{quantize_features, QuantizedDataset, RawDataset, DEFAULT_SCALE};
    use crate::pcs::PcsConfig;
    use crate::sumcheck::ProverOptions;
    use crate::valuation::simhash::HashParams;
    use crate::valuation::{harmonic_table, lsh_shapley, DEFAULT_HARMONIC_SCALE};
    use crate::witness::{build_oracle_set, partition_and_commit};

    fn q(dim: usize, classes: usize, feats: Vec<f64>, labels: Vec<u32>) -> QuantizedDataset {
        quantize_features(&RawDataset::new(dim, classes, feats, labels).unwrap(), DEFAULT_SCALE).unwrap()
    }

    struct Instance {
        pp: PublicParams,
        oracles: OracleSet,
        shards: Vec<ProviderShard>,
        buyer: BuyerShard,
        commitments: PublicCommitments,
    }

    fn instance(train: &QuantizedDataset, val: &QuantizedDataset, h: HashParams, providers: usize) -> Instance {
        let pp = PublicParams {
            version: PROTOCOL_VERSION,
            hash: h,
            harmonic_scale: DEFAULT_HARMONIC_SCALE,
            feature_scale: DEFAULT_SCALE,
            num_classes: train.num_classes(),
            providers,
            n_train: train.len(),
            n_test: val.len(),
            pcs: PcsConfig::default(),
            batching: true,
        };
        let ht = harmonic_table(train.len(), pp.harmonic_scale).unwrap();
        let oracles = build_oracle_set(train, val, &pp.hash, &ht, providers).unwrap();
        let (_, shards, buyer, commitments) = partition_and_commit(train, val, &pp, 7).unwrap();
        Instance { pp, oracles, shards, buyer, commitments }
    }

    fn toy() -> Instance {
        let train = q(2, 2, vec![1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0], vec![0, 1, 0, 1]);
        let val = q(2, 2, vec![1.0, 0.0], vec![0]);
        let h = HashParams::from_projections(1, 1, 2, DEFAULT_SCALE, vec![DEFAULT_SCALE, 0]).unwrap();
        instance(&train, &val, h, 2)
    }

    #[test]
    fn toy_instance_round_trip() {
        let inst = toy();
        let (proof, stats) =
            prove(&inst.oracles, &inst.shards, &inst.buyer, &inst.pp, ProverOptions::default()).unwrap();
        verify(&proof, &inst.commitments, &inst.oracles.svavg, &inst.pp).unwrap();
        let bytes = proof.to_bytes();
        assert_eq!(bytes.len(), stats.total_bytes);
        verify_bytes(&bytes, &inst.commitments, &inst.oracles.svavg, &inst.pp).unwrap();
        for shard in &inst.shards {
            let r = shard.index * 2..shard.index * 2 + 2;
            let report = provider_verify(
                shard,
                &inst.oracles.svavg[r],
                &proof,
                &inst.commitments,
                &inst.oracles.svavg,
                &inst.pp,
            );
            assert!(report.accepted(), "{report}");
        }
        let mut paid = inst.oracles.svavg[..2].to_vec();
        paid[0] += Fp::ONE;
        let report = provider_verify(&inst.shards[0], &paid, &proof, &inst.commitments, &inst.oracles.svavg, &inst.pp);
        assert_eq!(report.failures().iter().map(|f| f.0).collect::<Vec<_>>(), vec!['B']);
        let half = crate::valuation::rational_to_field(&num_rational::BigRational::new(1.into(), 2.into())).unwrap();
        assert_eq!(inst.oracles.svavg, vec![half, Fp::ZERO, half, Fp::ZERO]);
    }

    #[test]
    fn toy_rejects_wrong_scores() {
        let inst = toy();
        let (proof, _) = prove(&inst.oracles, &inst.shards, &inst.buyer, &inst.pp, ProverOptions::default()).unwrap();
        let mut bad = inst.oracles.svavg.clone();
        bad[1] += Fp::ONE;
        let err = verify(&proof, &inst.commitments, &bad, &inst.pp).unwrap_err();
        assert!(matches!(err, Error::Verify { section: Section::PublishedScores, .. }), "{err}");
    }

    #[test]
    fn random_instance_completes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut gen = |count: usize| {
            let mut feats = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..count {
                let mut row: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                crate::data::l2_normalize(&mut row);
                feats.extend(row);
                labels.push(rng.gen_range(0..3));
            }
            q(4, 3, feats, labels)
        };
        let train = gen(32);
        let val = gen(8);
        let h = HashParams::generate(2, 3, 4, 11, DEFAULT_SCALE).unwrap();
        let inst = instance(&train, &val, h.clone(), 4);
        let ht = harmonic_table(32, DEFAULT_HARMONIC_SCALE).unwrap();
        let plain = lsh_shapley(&train, &val, &h, &ht).unwrap();
        let expect: Vec<Fp> = plain.svavg.iter().map(|s| s.field_encoding().unwrap()).collect();
        assert_eq!(inst.oracles.svavg, expect);
        for opts in [ProverOptions::default(), ProverOptions::dense()] {
            let (proof, _) = prove(&inst.oracles, &inst.shards, &inst.buyer, &inst.pp, opts).unwrap();
            verify(&proof, &inst.commitments, &expect, &inst.pp).unwrap();
        }
    }

    fn rejects(inst: &Instance, oracles: &OracleSet) -> bool {
        let (proof, _) =
            prove_unchecked(oracles, &inst.shards, &inst.buyer, &inst.pp, ProverOptions::default()).unwrap();
        verify(&proof, &inst.commitments, &oracles.svavg, &inst.pp).is_err()
    }

    fn rescore(o: &mut OracleSet) {
        let sh = o.shape;
        let norm = crate::witness::score_normalizer(&sh, o.harmonic_scale).unwrap();
        for i in 0..sh.n_train {
            o.svsum[i] = (0..sh.tables).map(|l| o.w[l * sh.n_train + i]).sum();
            o.svavg[i] = o.svsum[i] * norm;
        }
    }

    #[test]
    fn witness_tampering_is_rejected() {
        let inst = toy();
        let lambda = Fp::new(inst.pp.harmonic_scale);

        let mut o = inst.oracles.clone();
        o.w[1] += lambda;
        rescore(&mut o);
        assert!(rejects(&inst, &o), "weight tamper");

        let mut o = inst.oracles.clone();
        o.cnt[0] += Fp::ONE;
        assert!(rejects(&inst, &o), "histogram tamper");

        let mut o = inst.oracles.clone();
        o.x_tr[2] += Fp::ONE;
        assert!(rejects(&inst, &o), "data substitution");

        let mut o = inst.oracles.clone();
        o.svavg[0] += Fp::ONE;
        assert!(rejects(&inst, &o), "score tamper");

        let mut o = inst.oracles.clone();
        o.train.sign[0] = Fp::ONE - o.train.sign[0];
        assert!(rejects(&inst, &o), "sign flip");
    }

    #[test]
    fn proof_byte_flips_are_rejected() {
        let inst = toy();
        let (proof, _) = prove(&inst.oracles, &inst.shards, &inst.buyer, &inst.pp, ProverOptions::default()).unwrap();
        for s in 0..SECTIONS {
            let len = proof.sections[s].len();
            for pos in [0, len / 3, len / 2, len - 1] {
                let mut p = proof.clone();
                p.sections[s][pos] ^= 0x10;
                assert!(
                    verify(&p, &inst.commitments, &inst.oracles.svavg, &inst.pp).is_err(),
                    "section {s} byte {pos}"
                );
            }
            let mut p = proof.clone();
            p.sections[s].push(0);
            assert!(verify(&p, &inst.commitments, &inst.oracles.svavg, &inst.pp).is_err());
        }
    }
}
