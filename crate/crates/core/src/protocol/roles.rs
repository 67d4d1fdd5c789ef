//! Prover and verifier sides of one shared protocol flow.
//!
//! The flow is written once against [`Role`]. The prover evaluates the
//! closures it is handed and writes the results; the verifier reads the same
//! items back from the proof. Both absorb identical bytes into the transcript.

use std::collections::HashMap;

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result, Section};
use crate::field::{Ext, Fp};
use crate::pcs::{self, CodeParams, CommitmentDigest, Committed, OpeningProof};
use crate::sumcheck::{self, Combiner, Factor, OpCounter, ProverOptions, SumcheckClaim, SumcheckProof};
use crate::super_oracle::{self, FamilyCommitted, FamilyDigest, FamilyOpening, PackMode};
use crate::transcript::Transcript;

use super::{Layer, LayerCounters, OracleId, SECTIONS};

pub(crate) fn section_index(s: Section) -> usize {
    match s {
        Section::Header => unreachable!("the header is not a proof section"),
        Section::Commitments => 0,
        Section::PublishedScores => 1,
        Section::HashBinding => 2,
        Section::Layers => 3,
        Section::PackedOpenings => 4,
        Section::Openings => 5,
        Section::Reconstruction => 6,
    }
}

/// Shape a commitment must have.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Expect {
    Single(CodeParams),
    Family { mode: PackMode, members: usize, sub_vars: usize },
}

pub(crate) enum CommitData {
    Single(Vec<Fp>),
    Family(Vec<Vec<Fp>>),
}

pub(crate) enum Handle {
    Single(Committed),
    Family(FamilyCommitted),
}

#[derive(Debug, Clone)]
pub(crate) enum DigestHandle {
    Single(CommitmentDigest),
    Family(FamilyDigest),
}

impl DigestHandle {
    fn write(&self, w: &mut ByteWriter) {
        match self {
            DigestHandle::Single(d) => d.write(w),
            DigestHandle::Family(d) => d.write(w),
        }
    }

    fn bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        w.into_bytes()
    }
}

impl Handle {
    fn digest(&self) -> DigestHandle {
        match self {
            Handle::Single(c) => DigestHandle::Single(*c.digest()),
            Handle::Family(f) => DigestHandle::Family(f.digest.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum OpenKind {
    Single {
        point: Vec<Ext>,
        value: Ext,
    },
    /// Every member at `point`; `values` padded to the family's power of two.
    Members {
        point: Vec<Ext>,
        values: Vec<Ext>,
    },
    /// The packed polynomial at `(x, r)`.
    Point {
        x: Vec<Ext>,
        r: Vec<Ext>,
        value: Ext,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct OpenRequest {
    pub id: OracleId,
    pub section: Section,
    pub kind: OpenKind,
}

pub(crate) trait Role {
    fn transcript(&mut self) -> &mut Transcript;

    fn commit(&mut self, id: OracleId, expect: Expect, data: impl FnOnce() -> Result<CommitData>) -> Result<()>;

    fn send_ext(&mut self, section: Section, label: &[u8], n: usize, f: impl FnOnce() -> Vec<Ext>) -> Result<Vec<Ext>>;

    fn send_fp(&mut self, section: Section, label: &[u8], n: usize, f: impl FnOnce() -> Vec<Fp>) -> Result<Vec<Fp>>;

    /// Runs one sumcheck; returns the challenge point and the reduced claim.
    #[allow(clippy::too_many_arguments)]
    fn sumcheck(
        &mut self,
        section: Section,
        layer: Layer,
        name: &str,
        claimed: Ext,
        num_vars: usize,
        combiner: &Combiner,
        factors: impl FnOnce() -> Vec<Factor>,
    ) -> Result<(Vec<Ext>, Ext)>;

    /// A verifier-side equality; the prover ignores it.
    fn check(&mut self, ok: bool, section: Section, what: &str) -> Result<()>;

    fn open(&mut self, req: &OpenRequest) -> Result<()>;

    fn challenge(&mut self, label: &[u8], n: usize) -> Vec<Ext> {
        self.transcript().challenge_ext(label, n)
    }

    fn challenge_one(&mut self, label: &[u8]) -> Ext {
        self.transcript().challenge_ext_one(label)
    }
}

fn check_shape(id: OracleId, d: &DigestHandle, expect: &Expect, pcs: &pcs::PcsConfig) -> Result<()> {
    let bad = || Error::verify(Section::Commitments, format!("{} has an unexpected shape", id.name()));
    match (d, expect) {
        (DigestHandle::Single(d), Expect::Single(p)) => {
            if d.params != *p {
                return Err(bad());
            }
        }
        (DigestHandle::Family(d), Expect::Family { mode, members, sub_vars }) => {
            let q = members.next_power_of_two();
            let log_q = q.trailing_zeros() as usize;
            if d.mode != *mode || d.members != *members || d.log_q != log_q {
                return Err(bad());
            }
            let want = match mode {
                PackMode::Packed => pcs::setup(sub_vars + log_q, pcs)?,
                PackMode::Split => pcs::setup(*sub_vars, pcs)?,
            };
            if d.digests.iter().any(|g| g.params != want) {
                return Err(bad());
            }
        }
        _ => return Err(bad()),
    }
    Ok(())
}

pub(crate) struct ProverRole {
    pub t: Transcript,
    pub out: Vec<ByteWriter>,
    pub handles: HashMap<OracleId, Handle>,
    pub opts: ProverOptions,
    pub counters: LayerCounters,
    pub pcs: pcs::PcsConfig,
    pub family_opening_bytes: usize,
    pub opening_bytes: usize,
}

impl ProverRole {
    pub fn new(t: Transcript, opts: ProverOptions, pcs: pcs::PcsConfig) -> Self {
        ProverRole {
            t,
            out: (0..SECTIONS).map(|_| ByteWriter::new()).collect(),
            handles: HashMap::new(),
            opts,
            counters: LayerCounters::default(),
            pcs,
            family_opening_bytes: 0,
            opening_bytes: 0,
        }
    }

    fn w(&mut self, s: Section) -> &mut ByteWriter {
        &mut self.out[section_index(s)]
    }
}

impl Role for ProverRole {
    fn transcript(&mut self) -> &mut Transcript {
        &mut self.t
    }

    fn commit(&mut self, id: OracleId, expect: Expect, data: impl FnOnce() -> Result<CommitData>) -> Result<()> {
        let handle = match (data()?, expect) {
            (CommitData::Single(v), Expect::Single(p)) => Handle::Single(pcs::commit(&v, &p, None)?),
            (CommitData::Family(m), Expect::Family { mode, .. }) => {
                Handle::Family(super_oracle::commit_family(m, mode, &self.pcs)?)
            }
            _ => return Err(Error::Size(format!("{} committed with the wrong kind", id.name()))),
        };
        let d = handle.digest();
        let bytes = d.bytes();
        self.w(Section::Commitments).bytes(&bytes);
        self.t.absorb(id.name().as_bytes(), &bytes);
        self.handles.insert(id, handle);
        Ok(())
    }

    fn send_ext(&mut self, section: Section, label: &[u8], n: usize, f: impl FnOnce() -> Vec<Ext>) -> Result<Vec<Ext>> {
        let v = f();
        assert_eq!(v.len(), n, "prover sent {} values for {n}", v.len());
        for x in &v {
            self.w(section).ext(*x);
        }
        self.t.absorb_ext(label, &v);
        Ok(v)
    }

    fn send_fp(&mut self, section: Section, label: &[u8], n: usize, f: impl FnOnce() -> Vec<Fp>) -> Result<Vec<Fp>> {
        let v = f();
        assert_eq!(v.len(), n, "prover sent {} values for {n}", v.len());
        for x in &v {
            self.w(section).fp(*x);
        }
        self.t.absorb_fp(label, &v);
        Ok(v)
    }

    fn sumcheck(
        &mut self,
        section: Section,
        layer: Layer,
        _name: &str,
        claimed: Ext,
        num_vars: usize,
        combiner: &Combiner,
        factors: impl FnOnce() -> Vec<Factor>,
    ) -> Result<(Vec<Ext>, Ext)> {
        let degree = combiner.degree();
        let claim = SumcheckClaim::new(num_vars, degree, claimed, factors(), combiner.clone())?;
        let mut counter = OpCounter::default();
        let out = sumcheck::prove(claim, &mut self.t, self.opts, &mut counter);
        self.counters.get_mut(layer).add(counter);
        let w = self.w(section);
        for round in &out.proof.rounds {
            for v in round {
                w.ext(*v);
            }
        }
        let reduced = match (out.proof.rounds.last(), out.point.last()) {
            (Some(msg), Some(r)) => sumcheck::interpolate_at(msg, *r),
            _ => claimed,
        };
        Ok((out.point, reduced))
    }

    fn check(&mut self, _ok: bool, _section: Section, _what: &str) -> Result<()> {
        Ok(())
    }

    fn open(&mut self, req: &OpenRequest) -> Result<()> {
        let handle =
            self.handles.get(&req.id).ok_or_else(|| Error::Size(format!("no commitment for {}", req.id.name())))?;
        let proofs: Vec<OpeningProof> = match (handle, &req.kind) {
            (Handle::Single(c), OpenKind::Single { point, .. }) => vec![pcs::open(c, point, &mut self.t)?],
            (Handle::Family(f), OpenKind::Members { point, .. }) => f.open_members(point, &mut self.t)?.0.openings,
            (Handle::Family(f), OpenKind::Point { x, r, .. }) => f.open_point(x, r, &mut self.t)?.0.openings,
            _ => return Err(Error::Size(format!("{} opened with the wrong kind", req.id.name()))),
        };
        let mut w = ByteWriter::new();
        for p in &proofs {
            p.write(&mut w);
        }
        self.opening_bytes += w.len();
        if req.section == Section::PackedOpenings {
            self.family_opening_bytes += w.len();
        }
        self.w(req.section).bytes(w.as_bytes());
        Ok(())
    }
}

pub(crate) struct VerifierRole<'a> {
    pub t: Transcript,
    pub input: Vec<ByteReader<'a>>,
    pub digests: HashMap<OracleId, DigestHandle>,
    pub pcs: pcs::PcsConfig,
}

impl<'a> VerifierRole<'a> {
    pub fn new(t: Transcript, sections: &'a [Vec<u8>], pcs: pcs::PcsConfig) -> Self {
        VerifierRole { t, input: sections.iter().map(|s| ByteReader::new(s)).collect(), digests: HashMap::new(), pcs }
    }

    fn r(&mut self, s: Section) -> &mut ByteReader<'a> {
        &mut self.input[section_index(s)]
    }

    pub fn finish(&self) -> Result<()> {
        for (i, r) in self.input.iter().enumerate() {
            if !r.is_exhausted() {
                return Err(Error::verify(section_at(i), "trailing bytes"));
            }
        }
        Ok(())
    }
}

pub(crate) fn section_at(i: usize) -> Section {
    [
        Section::Commitments,
        Section::PublishedScores,
        Section::HashBinding,
        Section::Layers,
        Section::PackedOpenings,
        Section::Openings,
        Section::Reconstruction,
    ][i]
}

fn parse_in(section: Section) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Parse(m) => Error::Parse(format!("{section}: {m}")),
        other => other,
    }
}

impl Role for VerifierRole<'_> {
    fn transcript(&mut self) -> &mut Transcript {
        &mut self.t
    }

    fn commit(&mut self, id: OracleId, expect: Expect, _data: impl FnOnce() -> Result<CommitData>) -> Result<()> {
        let r = self.r(Section::Commitments);
        let d = match expect {
            Expect::Single(_) => DigestHandle::Single(CommitmentDigest::read(r)?),
            Expect::Family { .. } => DigestHandle::Family(FamilyDigest::read(r)?),
        };
        check_shape(id, &d, &expect, &self.pcs)?;
        self.t.absorb(id.name().as_bytes(), &d.bytes());
        self.digests.insert(id, d);
        Ok(())
    }

    fn send_ext(
        &mut self,
        section: Section,
        label: &[u8],
        n: usize,
        _f: impl FnOnce() -> Vec<Ext>,
    ) -> Result<Vec<Ext>> {
        let r = self.r(section);
        let v = (0..n).map(|_| r.ext()).collect::<Result<Vec<_>>>().map_err(parse_in(section))?;
        self.t.absorb_ext(label, &v);
        Ok(v)
    }

    fn send_fp(&mut self, section: Section, label: &[u8], n: usize, _f: impl FnOnce() -> Vec<Fp>) -> Result<Vec<Fp>> {
        let r = self.r(section);
        let v = (0..n).map(|_| r.fp()).collect::<Result<Vec<_>>>().map_err(parse_in(section))?;
        self.t.absorb_fp(label, &v);
        Ok(v)
    }

    fn sumcheck(
        &mut self,
        section: Section,
        _layer: Layer,
        name: &str,
        claimed: Ext,
        num_vars: usize,
        combiner: &Combiner,
        _factors: impl FnOnce() -> Vec<Factor>,
    ) -> Result<(Vec<Ext>, Ext)> {
        let degree = combiner.degree();
        let r = self.r(section);
        let rounds = (0..num_vars)
            .map(|_| (0..=degree).map(|_| r.ext()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()
            .map_err(parse_in(section))?;
        let out = sumcheck::verify(claimed, num_vars, degree, &SumcheckProof { rounds }, &mut self.t)
            .map_err(|e| e.in_section(section, name))?;
        Ok((out.point, out.reduced_claim))
    }

    fn check(&mut self, ok: bool, section: Section, what: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::verify(section, what))
        }
    }

    fn open(&mut self, req: &OpenRequest) -> Result<()> {
        let what = format!("opening of {}", req.id.name());
        let d = self
            .digests
            .get(&req.id)
            .cloned()
            .ok_or_else(|| Error::verify(req.section, format!("no commitment for {}", req.id.name())))?;
        let section = req.section;
        let r = &mut self.input[section_index(section)];
        let result = match (&d, &req.kind) {
            (DigestHandle::Single(d), OpenKind::Single { point, value }) => {
                let proof = OpeningProof::read(r, d).map_err(parse_in(section))?;
                pcs::verify_opening(d, point, *value, &proof, &mut self.t)
            }
            (DigestHandle::Family(d), OpenKind::Members { point, values }) => {
                let mut proof = FamilyOpening::read(r, d, false).map_err(parse_in(section))?;
                if d.mode == PackMode::Packed {
                    proof.values = values.clone();
                }
                super_oracle::verify_members(d, point, &proof, &mut self.t).and_then(|got| {
                    if got == *values {
                        Ok(())
                    } else {
                        Err(Error::verify(section, format!("{what}: member values differ from the sent ones")))
                    }
                })
            }
            (DigestHandle::Family(d), OpenKind::Point { x, r: rr, value }) => {
                let proof = FamilyOpening::read(r, d, false).map_err(parse_in(section))?;
                super_oracle::verify_point(d, x, rr, &proof, &mut self.t).and_then(|got| {
                    if got == *value {
                        Ok(())
                    } else {
                        Err(Error::verify(section, format!("{what}: value differs from the sent one")))
                    }
                })
            }
            _ => Err(Error::verify(section, format!("{what}: commitment kind mismatch"))),
        };
        result.map_err(|e| match e {
            Error::Parse(_) => e,
            other => other.in_section(section, &what),
        })
    }
}
