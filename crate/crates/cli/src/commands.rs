//! The four protocol phases, public and provider verification, and benchmarks.
//!
//! Every artifact lives under the configured work directory:
//!
//! ```text
//! params.bin                      public parameters (setup)
//! data/provider_P.csv, buyer.csv  each party's prepared rows (setup)
//! commitments/provider_P.bin      params echo + digests (commit)
//! commitments/buyer.bin
//! scores.bin, scores.txt          published scores (valuate)
//! proof.bin
//! open/provider_P.bin             score slice bundle (open)
//! metrics.txt                     append-only metrics log
//! ```

use crate::config::{DataSource, RunConfig};
use crate::dataset::{corrupt_dataset, ingest_csv, pad_dimension, read_prepared, synth_gaussian, write_prepared, Task};
use crate::error::{CliError, Result};
use crate::metrics::{auroc, MetricsReport, Record};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;
use zkvalue_core::codec::{ByteReader, ByteWriter};
use zkvalue_core::data::{quantize_features, QuantizedDataset, RawDataset};
use zkvalue_core::error::Error as CoreError;
use zkvalue_core::field::Fp;
use zkvalue_core::protocol::{self, ProofStats, ValuationProof};
use zkvalue_core::sumcheck::ProverOptions;
use zkvalue_core::valuation::knn::knn_shapley_baseline;
use zkvalue_core::valuation::simhash::HashParams;
use zkvalue_core::valuation::{harmonic_table, lsh_shapley, lsh_shapley_f64};
use zkvalue_core::witness::{
    build_oracle_set, BuyerDigests, BuyerShard, ProviderDigests, ProviderShard, PublicCommitments, PublicParams,
};

const COMMITMENT_TAG: &str = "zkvalue-commitment";
const OPENING_TAG: &str = "zkvalue-score-slice";

/// Paths of every artifact in a work directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn params(&self) -> PathBuf {
        self.root.join("params.bin")
    }

    pub fn provider_data(&self, p: usize) -> PathBuf {
        self.root.join("data").join(format!("provider_{p}.csv"))
    }

    pub fn buyer_data(&self) -> PathBuf {
        self.root.join("data").join("buyer.csv")
    }

    pub fn provider_commitment(&self, p: usize) -> PathBuf {
        self.root.join("commitments").join(format!("provider_{p}.bin"))
    }

    pub fn buyer_commitment(&self) -> PathBuf {
        self.root.join("commitments").join("buyer.bin")
    }

    pub fn scores(&self) -> PathBuf {
        self.root.join("scores.bin")
    }

    pub fn scores_text(&self) -> PathBuf {
        self.root.join("scores.txt")
    }

    pub fn proof(&self) -> PathBuf {
        self.root.join("proof.bin")
    }

    pub fn opening(&self, p: usize) -> PathBuf {
        self.root.join("open").join(format!("provider_{p}.bin"))
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.txt")
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(CliError::Missing(path.to_path_buf()));
    }
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn concat(parts: &[RawDataset]) -> Result<RawDataset> {
    let first = parts.first().ok_or_else(|| CliError::Phase("no provider data".into()))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for p in parts {
        features.extend_from_slice(&p.features);
        labels.extend_from_slice(&p.labels);
    }
    Ok(RawDataset::new(first.dim, first.num_classes, features, labels)?)
}

fn with_classes(d: &RawDataset, classes: usize) -> Result<RawDataset> {
    Ok(RawDataset::new(d.dim, classes, d.features.clone(), d.labels.clone())?)
}

/// A party's commitment file: the parameters it committed under and its digests.
#[derive(Debug, Clone, PartialEq)]
pub enum CommitmentFile {
    Provider { index: usize, params: Vec<u8>, digests: ProviderDigests },
    Buyer { params: Vec<u8>, digests: BuyerDigests },
}

impl CommitmentFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.str(COMMITMENT_TAG);
        match self {
            CommitmentFile::Provider { index, params, digests } => {
                w.blob(params);
                w.u8(0);
                w.u32(*index as u32);
                digests.write(&mut w);
            }
            CommitmentFile::Buyer { params, digests } => {
                w.blob(params);
                w.u8(1);
                w.u32(0);
                digests.write(&mut w);
            }
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> zkvalue_core::error::Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.str()? != COMMITMENT_TAG {
            return Err(CoreError::Parse("not a commitment file".into()));
        }
        let params = r.blob()?.to_vec();
        let kind = r.u8()?;
        let index = r.u32()? as usize;
        let out = match kind {
            0 => CommitmentFile::Provider { index, params, digests: ProviderDigests::read(&mut r)? },
            1 => CommitmentFile::Buyer { params, digests: BuyerDigests::read(&mut r)? },
            k => return Err(CoreError::Parse(format!("unknown commitment kind {k}"))),
        };
        r.expect_end("commitment file")?;
        Ok(out)
    }

    fn params(&self) -> &[u8] {
        match self {
            CommitmentFile::Provider { params, .. } | CommitmentFile::Buyer { params, .. } => params,
        }
    }
}

/// What the operator sends provider `p`: its slice, bound to one proof.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceBundle {
    pub provider: usize,
    pub proof_hash: [u8; 32],
    pub scores: Vec<Fp>,
}

impl SliceBundle {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.str(OPENING_TAG);
        w.u32(self.provider as u32);
        w.bytes(&self.proof_hash);
        w.fp_vec(&self.scores);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> zkvalue_core::error::Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.str()? != OPENING_TAG {
            return Err(CoreError::Parse("not a score slice bundle".into()));
        }
        let provider = r.u32()? as usize;
        let proof_hash = r.take(32)?.try_into().expect("32 bytes");
        let scores = r.fp_vec()?;
        r.expect_end("score slice bundle")?;
        Ok(SliceBundle { provider, proof_hash, scores })
    }
}

pub fn encode_scores(scores: &[Fp]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.fp_vec(scores);
    w.into_bytes()
}

pub fn decode_scores(bytes: &[u8]) -> zkvalue_core::error::Result<Vec<Fp>> {
    let mut r = ByteReader::new(bytes);
    let v = r.fp_vec()?;
    r.expect_end("scores")?;
    Ok(v)
}

fn load_params(layout: &Layout) -> Result<PublicParams> {
    Ok(PublicParams::from_bytes(&read_file(&layout.params())?)?)
}

fn load_party(path: &Path, pp: &PublicParams) -> Result<QuantizedDataset> {
    Ok(quantize_features(&read_prepared(path, pp.num_classes)?, pp.feature_scale)?)
}

fn provider_shard(
    cfg: &RunConfig,
    layout: &Layout,
    pp: &PublicParams,
    p: usize,
) -> Result<(QuantizedDataset, ProviderShard)> {
    if p >= pp.providers {
        return Err(CliError::Phase(format!("provider {p} out of range, there are {}", pp.providers)));
    }
    let rows = load_party(&layout.provider_data(p), pp)?;
    let shard = ProviderShard::from_rows(&rows, pp, p, cfg.salt_seed)?;
    Ok((rows, shard))
}

fn read_commitments(layout: &Layout, pp: &PublicParams) -> Result<PublicCommitments> {
    let echo = pp.to_bytes();
    let mut providers = Vec::with_capacity(pp.providers);
    for p in 0..pp.providers {
        let path = layout.provider_commitment(p);
        match CommitmentFile::from_bytes(&read_file(&path)?)? {
            CommitmentFile::Provider { index, params, digests } if index == p && params == echo => {
                providers.push(digests)
            }
            _ => {
                return Err(CliError::Phase(format!(
                    "{} does not match provider {p} under these parameters",
                    path.display()
                )))
            }
        }
    }
    let path = layout.buyer_commitment();
    let buyer = match CommitmentFile::from_bytes(&read_file(&path)?)? {
        CommitmentFile::Buyer { params, digests } if params == echo => digests,
        _ => {
            return Err(CliError::Phase(format!("{} does not match the buyer under these parameters", path.display())))
        }
    };
    Ok(PublicCommitments { providers, buyer })
}

#[derive(Debug, Clone)]
pub struct SetupSummary {
    pub params: PublicParams,
    pub warnings: Vec<String>,
}

/// Prepares datasets, derives the public parameters and splits rows by party.
pub fn cmd_setup(cfg: &RunConfig) -> Result<SetupSummary> {
    let layout = Layout::new(&cfg.workdir);
    let mut warnings = Vec::new();
    let (train, val) = match &cfg.data {
        DataSource::Synthetic => synth_gaussian(cfg.n_train, cfg.n_test, cfg.dim, cfg.classes, cfg.seed)?,
        DataSource::Csv { train, val } => {
            let tr = ingest_csv(train, cfg.seed)?;
            let va = ingest_csv(val, cfg.seed)?;
            for (name, i) in [("train", &tr), ("val", &va)] {
                warnings.extend(i.warnings().into_iter().map(|w| format!("{name}: {w}")));
            }
            if tr.data.dim != va.data.dim {
                return Err(CliError::Ingest(format!(
                    "train keeps {} columns but val keeps {}",
                    tr.data.dim, va.data.dim
                )));
            }
            let classes = tr.data.num_classes.max(va.data.num_classes);
            (pad_dimension(&with_classes(&tr.data, classes)?), pad_dimension(&with_classes(&va.data, classes)?))
        }
    };
    let pp = cfg.public_params(train.len(), val.len(), train.dim, train.num_classes)?;
    let s = train.len() / pp.providers;
    for p in 0..pp.providers {
        let idx: Vec<usize> = (p * s..(p + 1) * s).collect();
        write_atomic(&layout.provider_data(p), &write_prepared(&train.select(&idx)))?;
    }
    write_atomic(&layout.buyer_data(), &write_prepared(&val))?;
    write_atomic(&layout.params(), &pp.to_bytes())?;
    Ok(SetupSummary { params: pp, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Provider(usize),
    Buyer,
    All,
}

/// Commits the chosen parties' rows; returns the files written.
pub fn cmd_commit(cfg: &RunConfig, party: Party) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(&cfg.workdir);
    let pp = load_params(&layout)?;
    let echo = pp.to_bytes();
    let parties: Vec<Party> = match party {
        Party::All => (0..pp.providers).map(Party::Provider).chain([Party::Buyer]).collect(),
        one => vec![one],
    };
    let mut written = Vec::new();
    for party in parties {
        let (path, file) = match party {
            Party::Provider(p) => {
                let (_, shard) = provider_shard(cfg, &layout, &pp, p)?;
                let digests = shard.digests(&pp)?;
                (layout.provider_commitment(p), CommitmentFile::Provider { index: p, params: echo.clone(), digests })
            }
            Party::Buyer => {
                let val = load_party(&layout.buyer_data(), &pp)?;
                let digests = BuyerShard::from_rows(&val, &pp, cfg.salt_seed)?.digests(&pp)?;
                (layout.buyer_commitment(), CommitmentFile::Buyer { params: echo.clone(), digests })
            }
            Party::All => unreachable!("expanded above"),
        };
        write_atomic(&path, &file.to_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct ValuateSummary {
    pub scores: Vec<f64>,
    pub stats: ProofStats,
    pub prove_secs: f64,
}

/// Computes the scores, proves them and publishes scores and proof.
pub fn cmd_valuate(cfg: &RunConfig) -> Result<ValuateSummary> {
    let layout = Layout::new(&cfg.workdir);
    let pp = load_params(&layout)?;
    let commitments = read_commitments(&layout, &pp)?;
    let mut rows = Vec::with_capacity(pp.providers);
    let mut shards = Vec::with_capacity(pp.providers);
    for p in 0..pp.providers {
        let (q, shard) = provider_shard(cfg, &layout, &pp, p)?;
        if shard.digests(&pp)? != commitments.providers[p] {
            return Err(CliError::Phase(format!("provider {p} rows do not match its commitment")));
        }
        rows.push(q.raw);
        shards.push(shard);
    }
    let train = quantize_features(&concat(&rows)?, pp.feature_scale)?;
    let val = load_party(&layout.buyer_data(), &pp)?;
    let buyer = BuyerShard::from_rows(&val, &pp, cfg.salt_seed)?;
    if buyer.digests(&pp)? != commitments.buyer {
        return Err(CliError::Phase("buyer rows do not match the buyer commitment".into()));
    }
    let ht = harmonic_table(train.len(), pp.harmonic_scale)?;
    let oracles = build_oracle_set(&train, &val, &pp.hash, &ht, pp.providers)?;
    let exact = lsh_shapley(&train, &val, &pp.hash, &ht)?;
    for (i, (s, f)) in exact.svavg.iter().zip(&oracles.svavg).enumerate() {
        if s.field_encoding()? != *f {
            return Err(CliError::Phase(format!("witness score {i} disagrees with the plaintext score")));
        }
    }
    let opts = if cfg.sparse { ProverOptions::default() } else { ProverOptions::dense() };
    let t0 = Instant::now();
    let (proof, stats) = protocol::prove(&oracles, &shards, &buyer, &pp, opts)?;
    let prove_secs = t0.elapsed().as_secs_f64();
    let scores: Vec<f64> = exact.svavg.iter().map(|s| s.to_f64()).collect();
    write_atomic(&layout.proof(), &proof.to_bytes())?;
    write_atomic(&layout.scores(), &encode_scores(&oracles.svavg))?;
    write_atomic(&layout.scores_text(), scores.iter().map(|s| format!("{s}\n")).collect::<String>().as_bytes())?;
    let mut report = MetricsReport::new(cfg.hash());
    report.push(
        Record::new("valuate")
            .with("n_train", pp.n_train)
            .with("n_test", pp.n_test)
            .with("prove_secs", format!("{prove_secs:.3}"))
            .with("proof_bytes", stats.total_bytes)
            .with("opening_bytes", stats.opening_bytes)
            .with("hash_ops", stats.counters.hash.total())
            .with("lookup_ops", stats.counters.lookups.total())
            .with("weight_ops", stats.counters.weights.total())
            .with("v3_ops", stats.counters.v3.total()),
    );
    report.append_to(&layout.metrics())?;
    Ok(ValuateSummary { scores, stats, prove_secs })
}

/// Writes provider `p`'s score slice, bound to the current proof.
pub fn cmd_open(cfg: &RunConfig, p: usize) -> Result<PathBuf> {
    let layout = Layout::new(&cfg.workdir);
    let pp = load_params(&layout)?;
    if p >= pp.providers {
        return Err(CliError::Phase(format!("provider {p} out of range, there are {}", pp.providers)));
    }
    let proof = read_file(&layout.proof())?;
    let scores = decode_scores(&read_file(&layout.scores())?)?;
    let s = pp.shape().slice_len();
    let slice = scores
        .get(p * s..(p + 1) * s)
        .ok_or_else(|| CliError::Phase(format!("{} scores for N_train = {}", scores.len(), pp.n_train)))?;
    let bundle = SliceBundle { provider: p, proof_hash: sha256(&proof), scores: slice.to_vec() };
    let path = layout.opening(p);
    write_atomic(&path, &bundle.to_bytes())?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accept => f.write_str("accept"),
            Verdict::Reject(why) => write!(f, "reject: {why}"),
        }
    }
}

/// Verification outcome before it becomes a verdict: missing files stay
/// errors, anything malformed or wrong is a rejection.
enum Fail {
    Err(CliError),
    Reject(String),
}

impl From<CliError> for Fail {
    fn from(e: CliError) -> Self {
        Fail::Err(e)
    }
}

fn reject(e: impl fmt::Display) -> Fail {
    Fail::Reject(e.to_string())
}

fn public_inputs(layout: &Layout) -> std::result::Result<(PublicParams, PublicCommitments, Vec<Fp>, Vec<u8>), Fail> {
    let pp_bytes = read_file(&layout.params())?;
    let pp = PublicParams::from_bytes(&pp_bytes).map_err(reject)?;
    let mut files = Vec::with_capacity(pp.providers + 1);
    for p in 0..pp.providers {
        files.push(read_file(&layout.provider_commitment(p))?);
    }
    files.push(read_file(&layout.buyer_commitment())?);
    let mut providers = Vec::with_capacity(pp.providers);
    let mut buyer = None;
    for (i, bytes) in files.iter().enumerate() {
        let file = CommitmentFile::from_bytes(bytes).map_err(reject)?;
        if file.params() != pp_bytes.as_slice() {
            return Err(Fail::Reject(format!("commitment file {i} echoes different parameters")));
        }
        match file {
            CommitmentFile::Provider { index, digests, .. } if index == i && i < pp.providers => {
                providers.push(digests)
            }
            CommitmentFile::Buyer { digests, .. } if i == pp.providers => buyer = Some(digests),
            _ => return Err(Fail::Reject(format!("commitment file {i} belongs to another party"))),
        }
    }
    let commitments = PublicCommitments { providers, buyer: buyer.expect("buyer file read last") };
    let published = decode_scores(&read_file(&layout.scores())?).map_err(reject)?;
    let proof = read_file(&layout.proof())?;
    Ok((pp, commitments, published, proof))
}

fn verify_inner(cfg: &RunConfig, provider: Option<usize>) -> std::result::Result<(), Fail> {
    let layout = Layout::new(&cfg.workdir);
    let (pp, commitments, published, proof_bytes) = public_inputs(&layout)?;
    let proof = ValuationProof::from_bytes(&proof_bytes).map_err(reject)?;
    let Some(p) = provider else {
        return protocol::verify(&proof, &commitments, &published, &pp).map_err(reject);
    };
    let (_, shard) = provider_shard(cfg, &layout, &pp, p)?;
    let bundle = SliceBundle::from_bytes(&read_file(&layout.opening(p))?).map_err(reject)?;
    if bundle.provider != p {
        return Err(Fail::Reject(format!("slice bundle is for provider {}", bundle.provider)));
    }
    if bundle.proof_hash != sha256(&proof_bytes) {
        return Err(Fail::Reject("slice bundle was issued for a different proof".into()));
    }
    let report = protocol::provider_verify(&shard, &bundle.scores, &proof, &commitments, &published, &pp);
    if report.accepted() {
        Ok(())
    } else {
        Err(Fail::Reject(report.to_string()))
    }
}

/// Public verification, or provider `p`'s three checks. Reads no one else's rows.
pub fn cmd_verify(cfg: &RunConfig, provider: Option<usize>) -> Result<Verdict> {
    match verify_inner(cfg, provider) {
        Ok(()) => Ok(Verdict::Accept),
        Err(Fail::Reject(why)) => Ok(Verdict::Reject(why)),
        Err(Fail::Err(e)) => Err(e),
    }
}

/// One in-memory prove and verify run.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub proof: Vec<u8>,
    pub stats: ProofStats,
    pub prove_secs: f64,
    pub verify_secs: f64,
}

/// Proves and verifies `train`/`val` under `pp`; a rejection is an error.
pub fn prove_and_verify(
    train: &QuantizedDataset,
    val: &QuantizedDataset,
    pp: &PublicParams,
    salt_seed: u64,
    opts: ProverOptions,
) -> Result<ProtocolRun> {
    let ht = harmonic_table(train.len(), pp.harmonic_scale)?;
    let oracles = build_oracle_set(train, val, &pp.hash, &ht, pp.providers)?;
    let (_, shards, buyer, commitments) = zkvalue_core::witness::partition_and_commit(train, val, pp, salt_seed)?;
    let t0 = Instant::now();
    let (proof, stats) = protocol::prove(&oracles, &shards, &buyer, pp, opts)?;
    let prove_secs = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    protocol::verify(&proof, &commitments, &oracles.svavg, pp)?;
    let verify_secs = t1.elapsed().as_secs_f64();
    Ok(ProtocolRun { proof: proof.to_bytes(), stats, prove_secs, verify_secs })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// AUROC of LSH-Shapley and the KNN-Shapley baseline on one corrupted synthetic instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityRun {
    pub lsh: f64,
    pub knn: f64,
    pub lsh_secs: f64,
    pub knn_secs: f64,
}

pub fn quality_run(cfg: &RunConfig, task: Task, seed: u64) -> Result<QualityRun> {
    let (train, val) = synth_gaussian(cfg.n_train, cfg.n_test, cfg.dim, cfg.classes, seed)?;
    let (bad, mask) = corrupt_dataset(&train, task, cfg.corruption, seed.wrapping_add(0x5eed))?;
    let q_train = quantize_features(&bad, cfg.feature_scale)?;
    let q_val = quantize_features(&val, cfg.feature_scale)?;
    let h = HashParams::generate(cfg.tables, cfg.depth, cfg.dim, seed, cfg.projection_scale)?;
    let t0 = Instant::now();
    let lsh = lsh_shapley_f64(&q_train, &q_val, &h)?;
    let lsh_secs = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let knn = knn_shapley_baseline(&bad, &val, cfg.knn_k)?;
    let knn_secs = t1.elapsed().as_secs_f64();
    Ok(QualityRun { lsh: auroc(&lsh, &mask)?, knn: auroc(&knn, &mask)?, lsh_secs, knn_secs })
}

fn scale_record(axis: &str, value: usize, run: &ProtocolRun) -> Record {
    let c = &run.stats.counters;
    Record::new("scale")
        .with("axis", axis)
        .with("value", value)
        .with("prove_secs", format!("{:.3}", run.prove_secs))
        .with("verify_secs", format!("{:.3}", run.verify_secs))
        .with("proof_bytes", run.stats.total_bytes)
        .with("opening_bytes", run.stats.opening_bytes)
        .with("hash_ops", c.hash.total())
        .with("lookup_ops", c.lookups.total())
        .with("weight_ops", c.weights.total())
        .with("v3_ops", c.v3.total())
}

struct Bench<'a> {
    cfg: &'a RunConfig,
    opts: ProverOptions,
}

impl Bench<'_> {
    fn run(
        &self,
        n_train: usize,
        n_test: usize,
        dim: usize,
        classes: usize,
        batching: bool,
        opts: ProverOptions,
    ) -> Result<ProtocolRun> {
        let mut cfg = self.cfg.clone();
        cfg.batching = batching;
        let (train, val) = synth_gaussian(n_train, n_test, dim, classes, cfg.seed)?;
        let pp = cfg.public_params(n_train, n_test, dim, classes)?;
        let train = quantize_features(&train, pp.feature_scale)?;
        let val = quantize_features(&val, pp.feature_scale)?;
        prove_and_verify(&train, &val, &pp, cfg.salt_seed, opts)
    }
}

/// Quality, scalability and ablation sweeps around the configured point.
pub fn cmd_bench(cfg: &RunConfig) -> Result<MetricsReport> {
    let mut report = MetricsReport::new(cfg.hash());
    for task in [Task::Mislabel, Task::Noisy] {
        let (mut gaps, mut lsh) = (Vec::new(), Vec::new());
        for s in 0..cfg.bench_seeds as u64 {
            let seed = cfg.seed + s;
            let q = quality_run(cfg, task, seed)?;
            report.push(
                Record::new("quality")
                    .with("task", task)
                    .with("seed", seed)
                    .with("auroc_lsh", format!("{:.4}", q.lsh))
                    .with("auroc_knn", format!("{:.4}", q.knn))
                    .with("lsh_secs", format!("{:.3}", q.lsh_secs))
                    .with("knn_secs", format!("{:.3}", q.knn_secs)),
            );
            gaps.push((q.lsh - q.knn).abs());
            lsh.push(q.lsh);
        }
        report.push(
            Record::new("quality_summary")
                .with("task", task)
                .with("median_gap", format!("{:.4}", median(gaps)))
                .with("median_auroc_lsh", format!("{:.4}", median(lsh))),
        );
    }

    let b = Bench { cfg, opts: if cfg.sparse { ProverOptions::default() } else { ProverOptions::dense() } };
    let (n, t, d, c) = (cfg.n_train, cfg.n_test, cfg.dim, cfg.classes);
    let mut axes: Vec<(&str, usize, [usize; 4])> = Vec::new();
    for v in [n / 2, n, n * 2] {
        axes.push(("n_train", v, [v, t, d, c]));
    }
    for v in [d / 2, d, d * 2].into_iter().filter(|&v| v > 0) {
        axes.push(("dim", v, [n, t, v, c]));
    }
    let mut class_values = vec![2, c, c * 2];
    class_values.dedup();
    for v in class_values {
        axes.push(("classes", v, [n, t, d, v]));
    }
    for (axis, value, [n, t, d, c]) in axes {
        let run = b.run(n, t, d, c, cfg.batching, b.opts)?;
        report.push(scale_record(axis, value, &run));
    }
    let mut flat = Vec::new();
    for &v in &cfg.bench_n_test {
        let run = b.run(n, v, d, c, cfg.batching, b.opts)?;
        report.push(scale_record("n_test", v, &run));
        flat.push(run.stats.counters.shapley_layers());
    }
    report.push(
        Record::new("flatness")
            .with("axis", "n_test")
            .with("shapley_layer_ops", flat.first().copied().unwrap_or(0))
            .with("constant", flat.windows(2).all(|w| w[0] == w[1])),
    );

    let on = b.run(n, t, d, 10, true, b.opts)?;
    let off = b.run(n, t, d, 10, false, b.opts)?;
    report.push(
        Record::new("ablation")
            .with("name", "batching")
            .with("classes", 10)
            .with("opening_bytes_on", on.stats.opening_bytes)
            .with("opening_bytes_off", off.stats.opening_bytes)
            .with("ratio", format!("{:.3}", off.stats.opening_bytes as f64 / on.stats.opening_bytes as f64)),
    );
    let sparse = b.run(n, t, d, c, cfg.batching, ProverOptions::default())?;
    let dense = b.run(n, t, d, c, cfg.batching, ProverOptions::dense())?;
    report.push(
        Record::new("ablation")
            .with("name", "sparsity")
            .with("identical_proofs", sparse.proof == dense.proof)
            .with("ops_sparse", sparse.stats.counters.total())
            .with("ops_dense", dense.stats.counters.total())
            .with("prove_secs_sparse", format!("{:.3}", sparse.prove_secs))
            .with("prove_secs_dense", format!("{:.3}", dense.prove_secs)),
    );
    std::fs::create_dir_all(&cfg.workdir).map_err(|e| CliError::io(&cfg.workdir, e))?;
    report.append_to(&Layout::new(&cfg.workdir).metrics())?;
    Ok(report)
}
