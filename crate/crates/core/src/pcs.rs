//! Ligero-shaped multilinear polynomial commitment.
//!
//! A table of `2^n` cells is viewed as a `rows × cols` matrix (cell index
//! `row · cols + col`, so the low `log cols` variables select the column).
//! Rows are encoded with a systematic Reed-Solomon code and the codeword
//! columns are Merkle-hashed. An opening at `z = (z_low, z_high)` sends a
//! random test combination of the rows and the row combination
//! `eq(z_high)ᵀ M`; the verifier re-encodes both and spot-checks them against
//! `t` authenticated columns.
//!
//! Commitments to provider data append one random salt row, which enters the
//! test combination but never the evaluation.

use rand::Rng;

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, OpeningFailure, Result};
use crate::field::{Ext, Fp};
use crate::hash::{hash_leaf, verify_path, Digest, MerkleTree};
use crate::mle::{eq_table, mle_eval_base};
use crate::ntt::RsEncoder;
use crate::transcript::Transcript;

pub const CODE_ID: u8 = 1;
pub const DEFAULT_COLUMN_CHECKS: usize = 100;
pub const DEFAULT_MAX_VARS: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcsConfig {
    pub max_vars: usize,
    pub num_column_checks: usize,
    /// Codeword length is `cols << log_blowup` (rate `2^-log_blowup`).
    pub log_blowup: u32,
}

impl Default for PcsConfig {
    fn default() -> Self {
        PcsConfig { max_vars: DEFAULT_MAX_VARS, num_column_checks: DEFAULT_COLUMN_CHECKS, log_blowup: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeParams {
    pub num_vars: usize,
    pub log_rows: usize,
    pub log_cols: usize,
    pub log_blowup: u32,
    pub num_column_checks: usize,
}

impl CodeParams {
    pub fn rows(&self) -> usize {
        1 << self.log_rows
    }

    pub fn cols(&self) -> usize {
        1 << self.log_cols
    }

    pub fn codeword_len(&self) -> usize {
        self.cols() << self.log_blowup
    }

    pub fn rate(&self) -> f64 {
        1.0 / (1u64 << self.log_blowup) as f64
    }

    /// Columns an opening reveals; queries are independent, so repeats are possible.
    pub fn opened_columns(&self) -> usize {
        self.num_column_checks
    }
}

/// Shape for `num_vars`: rows `2^⌊n/2⌋`, columns `2^⌈n/2⌉` (odd sizes are wide).
pub fn setup(num_vars: usize, config: &PcsConfig) -> Result<CodeParams> {
    if num_vars > config.max_vars {
        return Err(Error::Capacity(format!("{num_vars} variables exceed the configured maximum {}", config.max_vars)));
    }
    if config.num_column_checks == 0 || config.log_blowup == 0 {
        return Err(Error::Domain("column checks and blowup must be positive".into()));
    }
    Ok(CodeParams {
        num_vars,
        log_rows: num_vars / 2,
        log_cols: num_vars - num_vars / 2,
        log_blowup: config.log_blowup,
        num_column_checks: config.num_column_checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CommitmentDigest {
    pub root: Digest,
    pub params: CodeParams,
    pub salted: bool,
}

impl std::hash::Hash for CodeParams {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        (self.num_vars, self.log_rows, self.log_cols, self.log_blowup, self.num_column_checks).hash(state);
    }
}

impl CommitmentDigest {
    pub const BYTE_LEN: usize = 32 + 1 + 4 * 5 + 1;

    pub fn write(&self, w: &mut ByteWriter) {
        w.digest(&self.root);
        w.u8(CODE_ID);
        w.u32(self.params.num_vars as u32);
        w.u32(self.params.log_rows as u32);
        w.u32(self.params.log_cols as u32);
        w.u32(self.params.log_blowup);
        w.u32(self.params.num_column_checks as u32);
        w.u8(self.salted as u8);
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        let root = r.digest()?;
        let code = r.u8()?;
        if code != CODE_ID {
            return Err(Error::Parse(format!("unknown code identifier {code}")));
        }
        let num_vars = r.u32()? as usize;
        let log_rows = r.u32()? as usize;
        let log_cols = r.u32()? as usize;
        let log_blowup = r.u32()?;
        let num_column_checks = r.u32()? as usize;
        let salted = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::Parse(format!("invalid salt flag {b}"))),
        };
        if log_rows + log_cols != num_vars || log_cols + log_blowup as usize > 32 || num_column_checks == 0 {
            return Err(Error::Parse("inconsistent commitment shape".into()));
        }
        let params = CodeParams { num_vars, log_rows, log_cols, log_blowup, num_column_checks };
        Ok(CommitmentDigest { root, params, salted })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        w.into_bytes()
    }

    pub fn absorb_into(&self, t: &mut Transcript, label: &[u8]) {
        t.absorb(label, &self.to_bytes());
    }

    fn matrix_rows(&self) -> usize {
        self.params.rows() + self.salted as usize
    }
}

/// Prover-side state of one commitment.
#[derive(Debug, Clone)]
pub struct Committed {
    digest: CommitmentDigest,
    /// Message rows, salt row last when present.
    rows: Vec<Vec<Fp>>,
    /// Codeword columns (`codeword_len` of them, each `rows` long).
    columns: Vec<Vec<Fp>>,
    tree: MerkleTree,
}

fn column_bytes(col: &[Fp]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(col.len() * 8);
    for v in col {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Commits to `values` (length `2^num_vars`), optionally appending a salt row.
pub fn commit(values: &[Fp], params: &CodeParams, salt: Option<Vec<Fp>>) -> Result<Committed> {
    if values.len() != 1 << params.num_vars {
        return Err(Error::Size(format!(
            "table of {} cells committed with a 2^{} shape",
            values.len(),
            params.num_vars
        )));
    }
    let cols = params.cols();
    let mut rows: Vec<Vec<Fp>> = values.chunks_exact(cols).map(<[Fp]>::to_vec).collect();
    let salted = salt.is_some();
    if let Some(s) = salt {
        if s.len() != cols {
            return Err(Error::Size(format!("salt row of length {} (expected {cols})", s.len())));
        }
        rows.push(s);
    }
    let enc = RsEncoder::new(cols, params.log_blowup)?;
    let width = enc.codeword_len();
    let mut columns = vec![Vec::with_capacity(rows.len()); width];
    for row in &rows {
        let cw = enc.encode(row)?;
        for (c, v) in columns.iter_mut().zip(cw) {
            c.push(v);
        }
    }
    let leaves = columns.iter().map(|c| hash_leaf(&column_bytes(c))).collect();
    let tree = MerkleTree::from_leaves(leaves)?;
    let digest = CommitmentDigest { root: tree.root(), params: *params, salted };
    Ok(Committed { digest, rows, columns, tree })
}

/// Commits with a fresh random salt row.
pub fn commit_salted<R: Rng + ?Sized>(values: &[Fp], params: &CodeParams, rng: &mut R) -> Result<(Committed, Vec<Fp>)> {
    let salt: Vec<Fp> = (0..params.cols()).map(|_| Fp::random(rng)).collect();
    Ok((commit(values, params, Some(salt.clone()))?, salt))
}

impl Committed {
    pub fn digest(&self) -> &CommitmentDigest {
        &self.digest
    }

    pub fn params(&self) -> &CodeParams {
        &self.digest.params
    }

    /// The committed table (salt row excluded).
    pub fn table(&self) -> Vec<Fp> {
        self.rows[..self.digest.params.rows()].concat()
    }

    pub fn evaluate(&self, point: &[Ext]) -> Result<Ext> {
        if point.len() != self.digest.params.num_vars {
            return Err(Error::Size("opening point has the wrong dimension".into()));
        }
        Ok(mle_eval_base(&self.table(), point))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenedColumn {
    pub values: Vec<Fp>,
    pub path: Vec<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpeningProof {
    pub test_row: Vec<Ext>,
    pub eval_row: Vec<Ext>,
    pub claimed: Ext,
    pub columns: Vec<OpenedColumn>,
}

impl OpeningProof {
    pub fn write(&self, w: &mut ByteWriter) {
        for v in &self.test_row {
            w.ext(*v);
        }
        for v in &self.eval_row {
            w.ext(*v);
        }
        w.ext(self.claimed);
        for c in &self.columns {
            for v in &c.values {
                w.fp(*v);
            }
            for d in &c.path {
                w.digest(d);
            }
        }
    }

    /// Reads an opening whose shape is fixed by the commitment it opens.
    pub fn read(r: &mut ByteReader, digest: &CommitmentDigest) -> Result<Self> {
        let p = &digest.params;
        let test_row = (0..p.cols()).map(|_| r.ext()).collect::<Result<_>>()?;
        let eval_row = (0..p.cols()).map(|_| r.ext()).collect::<Result<_>>()?;
        let claimed = r.ext()?;
        let depth = p.codeword_len().trailing_zeros() as usize;
        let columns = (0..p.opened_columns())
            .map(|_| {
                let values = (0..digest.matrix_rows()).map(|_| r.fp()).collect::<Result<_>>()?;
                let path = (0..depth).map(|_| r.digest()).collect::<Result<_>>()?;
                Ok(OpenedColumn { values, path })
            })
            .collect::<Result<_>>()?;
        Ok(OpeningProof { test_row, eval_row, claimed, columns })
    }

    pub fn byte_len(&self) -> usize {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        w.len()
    }
}

fn split_point<'a>(point: &'a [Ext], params: &CodeParams) -> (&'a [Ext], &'a [Ext]) {
    point.split_at(params.log_cols)
}

fn opening_challenges(t: &mut Transcript, digest: &CommitmentDigest, point: &[Ext]) -> Vec<Ext> {
    digest.absorb_into(t, b"pcs-commitment");
    t.absorb_ext(b"pcs-point", point);
    t.challenge_ext(b"pcs-test", digest.matrix_rows())
}

fn combine_rows(rows: &[Vec<Fp>], coeffs: &[Ext], cols: usize) -> Vec<Ext> {
    let mut out = vec![Ext::ZERO; cols];
    for (row, c) in rows.iter().zip(coeffs) {
        if *c == Ext::ZERO {
            continue;
        }
        for (o, v) in out.iter_mut().zip(row) {
            *o += c.mul_base(*v);
        }
    }
    out
}

/// Opens the committed table's multilinear extension at `point`.
pub fn open(c: &Committed, point: &[Ext], t: &mut Transcript) -> Result<OpeningProof> {
    let p = c.digest.params;
    if point.len() != p.num_vars {
        return Err(Error::Size(format!(
            "opening point of dimension {} for a {}-variable commitment",
            point.len(),
            p.num_vars
        )));
    }
    t.begin_scope(b"pcs-open");
    let u = opening_challenges(t, &c.digest, point);
    let test_row = combine_rows(&c.rows, &u, p.cols());
    let (low, high) = split_point(point, &p);
    let eq_high = eq_table(high);
    let eval_row = combine_rows(&c.rows[..p.rows()], &eq_high, p.cols());
    let claimed: Ext = eval_row.iter().zip(eq_table(low)).map(|(a, b)| *a * b).sum();
    t.absorb_ext(b"pcs-test-row", &test_row);
    t.absorb_ext(b"pcs-eval-row", &eval_row);
    t.absorb_ext(b"pcs-claimed", &[claimed]);
    let indices = t.challenge_indices(b"pcs-columns", p.num_column_checks, p.codeword_len());
    t.end_scope();
    let columns =
        indices.iter().map(|&i| OpenedColumn { values: c.columns[i].clone(), path: c.tree.path(i) }).collect();
    Ok(OpeningProof { test_row, eval_row, claimed, columns })
}

fn encode_ext(enc: &RsEncoder, row: &[Ext]) -> Result<Vec<Ext>> {
    let c0: Vec<Fp> = row.iter().map(|v| v.c0).collect();
    let c1: Vec<Fp> = row.iter().map(|v| v.c1).collect();
    let e0 = enc.encode(&c0)?;
    let e1 = enc.encode(&c1)?;
    Ok(e0.into_iter().zip(e1).map(|(a, b)| Ext::new(a, b)).collect())
}

fn reject(kind: OpeningFailure, detail: impl Into<String>) -> Error {
    Error::Opening { kind, detail: detail.into() }
}

/// Checks an opening of `digest` at `point` with value `claimed`.
pub fn verify_opening(
    digest: &CommitmentDigest,
    point: &[Ext],
    claimed: Ext,
    proof: &OpeningProof,
    t: &mut Transcript,
) -> Result<()> {
    let p = digest.params;
    if point.len() != p.num_vars
        || proof.test_row.len() != p.cols()
        || proof.eval_row.len() != p.cols()
        || proof.columns.len() != p.opened_columns()
    {
        return Err(reject(OpeningFailure::Shape, "opening does not match the commitment shape"));
    }
    t.begin_scope(b"pcs-open");
    let u = opening_challenges(t, digest, point);
    t.absorb_ext(b"pcs-test-row", &proof.test_row);
    t.absorb_ext(b"pcs-eval-row", &proof.eval_row);
    t.absorb_ext(b"pcs-claimed", &[proof.claimed]);
    let indices = t.challenge_indices(b"pcs-columns", p.num_column_checks, p.codeword_len());
    t.end_scope();

    for (&i, col) in indices.iter().zip(&proof.columns) {
        if col.values.len() != digest.matrix_rows() {
            return Err(reject(OpeningFailure::Shape, format!("column {i} has the wrong height")));
        }
        if !verify_path(&digest.root, i, hash_leaf(&column_bytes(&col.values)), &col.path) {
            return Err(reject(OpeningFailure::Merkle, format!("authentication path for column {i}")));
        }
    }

    let enc = RsEncoder::new(p.cols(), p.log_blowup)?;
    let test_cw = encode_ext(&enc, &proof.test_row)?;
    let eval_cw = encode_ext(&enc, &proof.eval_row)?;
    let (low, high) = split_point(point, &p);
    let eq_high = eq_table(high);
    for (&i, col) in indices.iter().zip(&proof.columns) {
        let folded: Ext = col.values.iter().zip(&u).map(|(v, c)| c.mul_base(*v)).sum();
        if folded != test_cw[i] {
            return Err(reject(OpeningFailure::Code, format!("test row disagrees with column {i}")));
        }
        let folded: Ext = col.values.iter().zip(&eq_high).map(|(v, c)| c.mul_base(*v)).sum();
        if folded != eval_cw[i] {
            return Err(reject(OpeningFailure::Code, format!("evaluation row disagrees with column {i}")));
        }
    }

    let value: Ext = proof.eval_row.iter().zip(eq_table(low)).map(|(a, b)| *a * b).sum();
    if value != proof.claimed || proof.claimed != claimed {
        return Err(reject(OpeningFailure::Evaluation, "claimed evaluation does not match the evaluation row"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mle::index_to_point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(rng: &mut ChaCha8Rng, n: usize) -> Vec<Fp> {
        (0..1 << n).map(|_| Fp::random(rng)).collect()
    }

    #[test]
    fn shapes() {
        let cfg = PcsConfig::default();
        let p4 = setup(4, &cfg).unwrap();
        assert_eq!((p4.rows(), p4.cols()), (4, 4));
        let p5 = setup(5, &cfg).unwrap();
        assert_eq!((p5.rows(), p5.cols()), (4, 8));
        assert_eq!(setup(6, &cfg).unwrap().codeword_len(), 16);
        assert!(matches!(setup(40, &cfg), Err(Error::Capacity(_))));
    }

    #[test]
    fn open_verify_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 0..=12 {
            let params = setup(n, &PcsConfig::default()).unwrap();
            let vals = table(&mut rng, n);
            let c = commit(&vals, &params, None).unwrap();
            let point: Vec<Ext> = (0..n).map(|_| Ext::random(&mut rng)).collect();
            let mut tp = Transcript::new(b"pcs");
            let proof = open(&c, &point, &mut tp).unwrap();
            assert_eq!(proof.claimed, mle_eval_base(&vals, &point));
            let mut tv = Transcript::new(b"pcs");
            verify_opening(c.digest(), &point, proof.claimed, &proof, &mut tv).unwrap();
            assert_eq!(tp, tv);
        }
    }

    #[test]
    fn boolean_point_and_salt() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let params = setup(6, &PcsConfig::default()).unwrap();
        let vals = table(&mut rng, 6);
        let (c, _) = commit_salted(&vals, &params, &mut rng).unwrap();
        let point = index_to_point(37, 6);
        let proof = open(&c, &point, &mut Transcript::new(b"p")).unwrap();
        assert_eq!(proof.claimed, Ext::from(vals[37]));
        verify_opening(c.digest(), &point, proof.claimed, &proof, &mut Transcript::new(b"p")).unwrap();
        let (c2, _) = commit_salted(&vals, &params, &mut rng).unwrap();
        assert_ne!(c.digest().root, c2.digest().root);
    }

    #[test]
    fn determinism_and_binding() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let params = setup(8, &PcsConfig::default()).unwrap();
        let vals = table(&mut rng, 8);
        let a = commit(&vals, &params, None).unwrap();
        let b = commit(&vals, &params, None).unwrap();
        assert_eq!(a.digest(), b.digest());
        let mut other = vals.clone();
        other[17] += Fp::ONE;
        assert_ne!(commit(&other, &params, None).unwrap().digest().root, a.digest().root);
    }

    #[test]
    fn zero_table_reference_root() {
        let params = setup(4, &PcsConfig::default()).unwrap();
        let c = commit(&[Fp::ZERO; 16], &params, None).unwrap();
        assert_eq!(c.digest().root.to_hex(), "dcc995ad7e4c442877c1f381f5e9532822114c527a2cb1669696a42105488a5d");
    }

    #[test]
    fn tampering_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let params = setup(8, &PcsConfig::default()).unwrap();
        let vals = table(&mut rng, 8);
        let c = commit(&vals, &params, None).unwrap();
        let point: Vec<Ext> = (0..8).map(|_| Ext::random(&mut rng)).collect();
        let proof = open(&c, &point, &mut Transcript::new(b"p")).unwrap();

        let mut bad = proof.clone();
        bad.columns[3].values[1] += Fp::ONE;
        let err = verify_opening(c.digest(), &point, proof.claimed, &bad, &mut Transcript::new(b"p")).unwrap_err();
        assert!(matches!(err, Error::Opening { kind: OpeningFailure::Merkle, .. }));

        let err = verify_opening(c.digest(), &point, proof.claimed + Ext::ONE, &proof, &mut Transcript::new(b"p"))
            .unwrap_err();
        assert!(matches!(err, Error::Opening { kind: OpeningFailure::Evaluation, .. }));

        let other = commit(&table(&mut rng, 8), &params, None).unwrap();
        let foreign = open(&other, &point, &mut Transcript::new(b"p")).unwrap();
        assert!(verify_opening(c.digest(), &point, foreign.claimed, &foreign, &mut Transcript::new(b"p")).is_err());
    }
}
