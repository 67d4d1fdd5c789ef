//! Committed witness tables, provider partitioning and public parameters.
//!
//! Tensor layouts are row-major with the last index fastest, so a table
//! `[a][b][c]` has multilinear variables ordered `(c, b, a)` from low to high.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::codec::{ByteReader, ByteWriter};
use crate::data::QuantizedDataset;
use crate::error::{Error, Result};
use crate::field::{batch_inverse, Field, Fp};
use crate::pcs::{self, CodeParams, CommitmentDigest, Committed, PcsConfig};
use crate::super_oracle::{self, FamilyCommitted, FamilyDigest, PackMode};
use crate::valuation::simhash::{bucket_statistics, dot_products, HashParams};
use crate::valuation::HarmonicTable;

pub const PROTOCOL_VERSION: u32 = 1;
/// Bits per range limb; the range table has `2^RANGE_BITS` entries.
pub const RANGE_BITS: usize = 16;
/// Limbs used by `|2·dp + 1| − 1`; the limb tensor has a fourth, all-zero slot.
pub const RANGE_LIMBS: usize = 3;
pub const LIMB_SLOTS: usize = 4;

fn log2(v: usize) -> usize {
    v.trailing_zeros() as usize
}

/// Sizes every witness table is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub classes: usize,
    pub tables: usize,
    pub depth: usize,
    pub providers: usize,
}

/// Which dataset a hashing table belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Train,
    Test,
}

impl Side {
    pub fn tag(self) -> &'static [u8] {
        match self {
            Side::Train => b"train",
            Side::Test => b"test",
        }
    }
}

impl Shape {
    /// Shape constraints of the plaintext builder.
    pub fn validate_consistent(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 || self.dim == 0 || self.tables == 0 {
            return Err(Error::Domain("empty dataset, dimension or table count".into()));
        }
        if self.classes < 2 {
            return Err(Error::Domain("at least two classes are required".into()));
        }
        if self.depth == 0 || self.depth > crate::valuation::simhash::MAX_DEPTH {
            return Err(Error::Domain(format!("hash depth {} outside [1, 20]", self.depth)));
        }
        if self.providers == 0 || !self.n_train.is_multiple_of(self.providers) {
            return Err(Error::Partition(format!("{} providers do not divide {} rows", self.providers, self.n_train)));
        }
        Ok(())
    }

    /// Constraints of the proof system: power-of-two sizes, slices of at least two rows.
    pub fn validate(&self) -> Result<()> {
        self.validate_consistent()?;
        let pow2 = [
            ("N_train", self.n_train),
            ("N_test", self.n_test),
            ("d", self.dim),
            ("L", self.tables),
            ("providers", self.providers),
        ];
        for (name, v) in pow2 {
            if v == 0 || !v.is_power_of_two() {
                return Err(Error::Domain(format!("{name} = {v} must be a positive power of two")));
            }
        }
        if self.n_train / self.providers < 2 {
            return Err(Error::Partition(format!(
                "{} providers cannot split {} rows into slices of at least 2",
                self.providers, self.n_train
            )));
        }
        Ok(())
    }

    pub fn classes_padded(&self) -> usize {
        self.classes.next_power_of_two()
    }

    pub fn depth_padded(&self) -> usize {
        self.depth.next_power_of_two()
    }

    pub fn buckets(&self) -> usize {
        1 << self.depth
    }

    pub fn slice_len(&self) -> usize {
        self.n_train / self.providers
    }

    pub fn points(&self, side: Side) -> usize {
        match side {
            Side::Train => self.n_train,
            Side::Test => self.n_test,
        }
    }

    pub fn log_n(&self) -> usize {
        log2(self.n_train)
    }

    pub fn log_t(&self) -> usize {
        log2(self.n_test)
    }

    pub fn log_points(&self, side: Side) -> usize {
        log2(self.points(side))
    }

    pub fn log_d(&self) -> usize {
        log2(self.dim)
    }

    pub fn log_l(&self) -> usize {
        log2(self.tables)
    }

    pub fn log_k(&self) -> usize {
        log2(self.depth_padded())
    }

    pub fn log_c(&self) -> usize {
        log2(self.classes_padded())
    }

    pub fn log_m(&self) -> usize {
        log2(self.providers)
    }

    pub fn log_slice(&self) -> usize {
        log2(self.slice_len())
    }

    /// Variables of a `[k][ℓ][point]` hashing tensor.
    pub fn hash_vars(&self, side: Side) -> usize {
        self.log_k() + self.log_l() + self.log_points(side)
    }

    /// Variables of an `[ℓ][i]` training-side tensor.
    pub fn ln_vars(&self) -> usize {
        self.log_l() + self.log_n()
    }

    /// Variables of an `[ℓ][b]` histogram.
    pub fn lb_vars(&self) -> usize {
        self.log_l() + self.depth
    }
}

/// Hashing witnesses of one side, every tensor laid out `[k][ℓ][point]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideWitness {
    pub dp: Vec<Fp>,
    pub sign: Vec<Fp>,
    pub abs: Vec<Fp>,
    /// `[q][k][ℓ][point]` with `q < LIMB_SLOTS`.
    pub limbs: Vec<Fp>,
}

impl SideWitness {
    /// Member `k` of the sign family: the `[ℓ][point]` slice of bit `k`.
    pub fn sign_member(&self, k: usize, slice: usize) -> &[Fp] {
        &self.sign[k * slice..(k + 1) * slice]
    }

    pub fn limb_members(&self) -> Vec<Vec<Fp>> {
        let len = self.limbs.len() / LIMB_SLOTS;
        self.limbs.chunks_exact(len).map(<[Fp]>::to_vec).collect()
    }
}

fn build_side(data: &QuantizedDataset, h: &HashParams, shape: &Shape) -> Result<SideWitness> {
    let n = data.len();
    let raw = dot_products(data, h)?;
    let kp = shape.depth_padded();
    let size = kp * shape.tables * n;
    let mut dp = vec![Fp::ZERO; size];
    let mut sign = vec![Fp::ONE; size];
    let mut abs = vec![Fp::ONE; size];
    let mut limbs = vec![Fp::ZERO; LIMB_SLOTS * size];
    for l in 0..shape.tables {
        for k in 0..shape.depth {
            for i in 0..n {
                let v = raw[(l * shape.depth + k) * n + i];
                let cell = (k * shape.tables + l) * n + i;
                let twice = 2 * v as i128 + 1;
                let a = twice.unsigned_abs() - 1;
                if a >> (RANGE_BITS * RANGE_LIMBS) != 0 {
                    return Err(Error::Capacity(format!("dot product {v} exceeds the 48-bit range")));
                }
                dp[cell] = Fp::from_i64(v);
                sign[cell] = Fp::new((twice > 0) as u64);
                abs[cell] = Fp::new(a as u64 + 1);
                for q in 0..RANGE_LIMBS {
                    limbs[q * size + cell] = Fp::new(((a >> (RANGE_BITS * q)) & 0xffff) as u64);
                }
            }
        }
    }
    Ok(SideWitness { dp, sign, abs, limbs })
}

/// Every table the operator commits to.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSet {
    pub shape: Shape,
    pub harmonic_scale: u64,
    /// `[i][j]`
    pub x_tr: Vec<Fp>,
    /// `[t][j]`
    pub x_te: Vec<Fp>,
    /// One-hot labels, member `c` is `[i]`.
    pub y_ind: Vec<Vec<Fp>>,
    pub y_test_ind: Vec<Vec<Fp>>,
    pub train: SideWitness,
    pub test: SideWitness,
    /// `[ℓ][b]`
    pub cnt: Vec<Fp>,
    /// Member `c` is `[ℓ][b]`.
    pub cnt_tr: Vec<Vec<Fp>>,
    pub cnt_te: Vec<Vec<Fp>>,
    /// `[ℓ][i]`
    pub mhat: Vec<Fp>,
    /// Member `c` is `[ℓ][i]`.
    pub mchat: Vec<Vec<Fp>>,
    pub tchat: Vec<Vec<Fp>>,
    /// `Λ·H_M` at `M = mhat`.
    pub harm: Vec<Fp>,
    pub edge: Vec<Fp>,
    pub d: Vec<Fp>,
    pub d_inv: Vec<Fp>,
    pub w: Vec<Fp>,
    pub wt_num: Vec<Fp>,
    pub t_match: Vec<Fp>,
    /// `[i]`
    pub svsum: Vec<Fp>,
    pub svavg: Vec<Fp>,
    /// Range-table multiplicities over both sides.
    pub m_range: Vec<Fp>,
    /// Harmonic-table multiplicities, index `M − 1`.
    pub m_harm: Vec<Fp>,
}

/// Public harmonic table in the field: entry `m − 1` is `Λ·H_m`.
pub fn harmonic_field_table(n: usize, scale: u64) -> Result<Vec<Fp>> {
    Ok(crate::valuation::harmonic_table(n, scale)?.field_scaled())
}

fn one_hot(labels: &[u32], classes_padded: usize) -> Vec<Vec<Fp>> {
    let mut out = vec![vec![Fp::ZERO; labels.len()]; classes_padded];
    for (i, &y) in labels.iter().enumerate() {
        out[y as usize][i] = Fp::ONE;
    }
    out
}

pub fn shape_of(train: &QuantizedDataset, val: &QuantizedDataset, h: &HashParams, providers: usize) -> Shape {
    Shape {
        n_train: train.len(),
        n_test: val.len(),
        dim: train.dim(),
        classes: train.num_classes(),
        tables: h.num_tables,
        depth: h.depth,
        providers,
    }
}

/// Builds every witness table from the quantized datasets.
pub fn build_oracle_set(
    train: &QuantizedDataset,
    val: &QuantizedDataset,
    h: &HashParams,
    ht: &HarmonicTable,
    providers: usize,
) -> Result<OracleSet> {
    let shape = shape_of(train, val, h, providers);
    shape.validate_consistent()?;
    if val.dim() != train.dim() || val.num_classes() != train.num_classes() || h.dim != train.dim() {
        return Err(Error::Size("train, validation and projections disagree on shape".into()));
    }
    if ht.len() < shape.n_train {
        return Err(Error::Size("harmonic table shorter than the training set".into()));
    }
    let lambda = Fp::new(ht.scale);
    let harm_table = ht.field_scaled();
    let stats = bucket_statistics(train, val, h)?;
    let (n, l_count, nb) = (shape.n_train, shape.tables, shape.buckets());
    let cp = shape.classes_padded();

    let cnt: Vec<Fp> = stats.cnt.iter().map(|&c| Fp::new(c)).collect();
    let mut cnt_tr = vec![vec![Fp::ZERO; l_count * nb]; cp];
    let mut cnt_te = vec![vec![Fp::ZERO; l_count * nb]; cp];
    for cell in 0..l_count * nb {
        for c in 0..shape.classes {
            cnt_tr[c][cell] = Fp::new(stats.cnt_tr[cell * shape.classes + c]);
            cnt_te[c][cell] = Fp::new(stats.cnt_te[cell * shape.classes + c]);
        }
    }

    let ln = l_count * n;
    let mut mhat = vec![Fp::ZERO; ln];
    let mut mchat = vec![vec![Fp::ZERO; ln]; cp];
    let mut tchat = vec![vec![Fp::ZERO; ln]; cp];
    let mut harm = vec![Fp::ZERO; ln];
    let mut edge = vec![Fp::ZERO; ln];
    let mut d = vec![Fp::ZERO; ln];
    let mut wt_num = vec![Fp::ZERO; ln];
    let mut t_match = vec![Fp::ZERO; ln];
    let mut m_harm = vec![Fp::ZERO; n];
    for l in 0..l_count {
        for i in 0..n {
            let cell = l * n + i;
            let b = stats.train_buckets[l][i] as usize;
            let m = stats.cnt(l, b);
            let y = train.labels()[i] as usize;
            mhat[cell] = Fp::new(m);
            for c in 0..shape.classes {
                mchat[c][cell] = Fp::new(stats.cnt_tr(l, b, c));
                tchat[c][cell] = Fp::new(stats.cnt_te(l, b, c));
            }
            harm[cell] = harm_table[m as usize - 1];
            m_harm[m as usize - 1] += Fp::ONE;
            edge[cell] = Fp::new((m == 1) as u64);
            d[cell] = Fp::new(m * (m - 1));
            t_match[cell] = tchat[y][cell];
            let mf = Fp::new(m);
            let h_minus = harm[cell] - lambda;
            let mut num = tchat[y][cell] * ((mf - Fp::ONE) * harm[cell] - (mchat[y][cell] - Fp::ONE) * h_minus);
            for c in (0..shape.classes).filter(|&c| c != y) {
                num -= tchat[c][cell] * mchat[c][cell] * h_minus;
            }
            wt_num[cell] = num;
        }
    }
    let d_inv = inverse_or_zero(&d);
    let w: Vec<Fp> =
        (0..ln).map(|c| if edge[c] == Fp::ONE { lambda * t_match[c] } else { wt_num[c] * d_inv[c] }).collect();
    let svsum: Vec<Fp> = (0..n).map(|i| (0..l_count).map(|l| w[l * n + i]).sum()).collect();
    let norm = score_normalizer(&shape, ht.scale)?;
    let svavg = svsum.iter().map(|v| *v * norm).collect();

    let train_side = build_side(train, h, &shape)?;
    let test_side = build_side(val, h, &shape)?;
    let mut m_range = vec![Fp::ZERO; 1 << RANGE_BITS];
    for side in [&train_side, &test_side] {
        for v in &side.limbs {
            m_range[v.value() as usize] += Fp::ONE;
        }
    }

    Ok(OracleSet {
        shape,
        harmonic_scale: ht.scale,
        x_tr: train.field_features(),
        x_te: val.field_features(),
        y_ind: one_hot(train.labels(), cp),
        y_test_ind: one_hot(val.labels(), cp),
        train: train_side,
        test: test_side,
        cnt,
        cnt_tr,
        cnt_te,
        mhat,
        mchat,
        tchat,
        harm,
        edge,
        d,
        d_inv,
        w,
        wt_num,
        t_match,
        svsum,
        svavg,
        m_range,
        m_harm,
    })
}

/// `(Λ·L·N_test)^{-1}`.
pub fn score_normalizer(shape: &Shape, harmonic_scale: u64) -> Result<Fp> {
    let v = Fp::new(harmonic_scale) * Fp::new(shape.tables as u64) * Fp::new(shape.n_test as u64);
    v.inverse().map_err(|_| Error::Arithmetic("score normalizer is not invertible".into()))
}

fn audit_fail(what: impl Into<String>) -> Error {
    Error::Audit(what.into())
}

impl OracleSet {
    pub fn side(&self, side: Side) -> &SideWitness {
        match side {
            Side::Train => &self.train,
            Side::Test => &self.test,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut SideWitness {
        match side {
            Side::Train => &mut self.train,
            Side::Test => &mut self.test,
        }
    }

    /// Histogram family members: `cnt_tr_c`, `cnt_te_c`, then `cnt`.
    pub fn histogram_members(&self) -> Vec<Vec<Fp>> {
        let c = self.shape.classes;
        let mut out: Vec<Vec<Fp>> = self.cnt_tr[..c].to_vec();
        out.extend_from_slice(&self.cnt_te[..c]);
        out.push(self.cnt.clone());
        out
    }

    /// Lookup family members: `mchat_c` for every real class, then `tchat_c`.
    pub fn lookup_members(&self) -> Vec<Vec<Fp>> {
        let c = self.shape.classes;
        let mut out = self.mchat[..c].to_vec();
        out.extend_from_slice(&self.tchat[..c]);
        out
    }

    /// Bucket id of training point `i` in table `ℓ`, read off the sign witness.
    fn bucket_of(&self, side: Side, l: usize, i: usize) -> usize {
        let s = self.side(side);
        let n = self.shape.points(side);
        (0..self.shape.depth).map(|k| ((s.sign[(k * self.shape.tables + l) * n + i] == Fp::ONE) as usize) << k).sum()
    }

    /// Linear-time check of every identity the proof relies on.
    pub fn self_audit(&self) -> Result<()> {
        let sh = &self.shape;
        sh.validate_consistent()?;
        let lambda = Fp::new(self.harmonic_scale);
        let harm_table = harmonic_field_table(sh.n_train, self.harmonic_scale)?;
        let two = Fp::new(2);
        for side in [Side::Train, Side::Test] {
            let s = self.side(side);
            let size = sh.depth_padded() * sh.tables * sh.points(side);
            if s.dp.len() != size || s.sign.len() != size || s.abs.len() != size || s.limbs.len() != LIMB_SLOTS * size {
                return Err(audit_fail("hashing tensor sizes"));
            }
            for c in 0..size {
                if s.sign[c] * (Fp::ONE - s.sign[c]) != Fp::ZERO {
                    return Err(audit_fail(format!("sign cell {c} is not boolean")));
                }
                if two * s.dp[c] + Fp::ONE != (two * s.sign[c] - Fp::ONE) * s.abs[c] {
                    return Err(audit_fail(format!("sign identity fails at cell {c}")));
                }
                let mut acc = Fp::ONE;
                for q in 0..LIMB_SLOTS {
                    let limb = s.limbs[q * size + c];
                    if limb.value() >> RANGE_BITS != 0 || (q == RANGE_LIMBS && limb != Fp::ZERO) {
                        return Err(audit_fail(format!("limb {q} of cell {c} out of range")));
                    }
                    acc += limb * Fp::new(1 << (RANGE_BITS * q.min(RANGE_LIMBS)));
                }
                if acc != s.abs[c] {
                    return Err(audit_fail(format!("limb decomposition fails at cell {c}")));
                }
            }
        }

        let (n, nb) = (sh.n_train, sh.buckets());
        let mut cnt = vec![0u64; sh.tables * nb];
        let mut cnt_tr = vec![vec![0u64; sh.tables * nb]; sh.classes];
        let mut cnt_te = vec![vec![0u64; sh.tables * nb]; sh.classes];
        let label = |members: &[Vec<Fp>], i: usize| members.iter().position(|m| m[i] == Fp::ONE);
        for l in 0..sh.tables {
            for i in 0..n {
                let b = self.bucket_of(Side::Train, l, i);
                let y = label(&self.y_ind, i).ok_or_else(|| audit_fail(format!("training point {i} has no label")))?;
                cnt[l * nb + b] += 1;
                cnt_tr[y][l * nb + b] += 1;
            }
            for t in 0..sh.n_test {
                let b = self.bucket_of(Side::Test, l, t);
                let y = label(&self.y_test_ind, t).ok_or_else(|| audit_fail(format!("test point {t} has no label")))?;
                cnt_te[y][l * nb + b] += 1;
            }
        }
        let as_fp = |v: &[u64]| v.iter().map(|&c| Fp::new(c)).collect::<Vec<_>>();
        if as_fp(&cnt) != self.cnt {
            return Err(audit_fail("cnt disagrees with the sign bits"));
        }
        for c in 0..sh.classes {
            if as_fp(&cnt_tr[c]) != self.cnt_tr[c] || as_fp(&cnt_te[c]) != self.cnt_te[c] {
                return Err(audit_fail(format!("class {c} histogram disagrees with the sign bits")));
            }
        }

        let mut m_harm = vec![Fp::ZERO; n];
        for l in 0..sh.tables {
            for i in 0..n {
                let cell = l * n + i;
                let b = self.bucket_of(Side::Train, l, i);
                if self.mhat[cell] != self.cnt[l * nb + b] {
                    return Err(audit_fail(format!("mhat[{l},{i}] is not its bucket count")));
                }
                for c in 0..sh.classes_padded() {
                    let (tr, te) = if c < sh.classes {
                        (self.cnt_tr[c][l * nb + b], self.cnt_te[c][l * nb + b])
                    } else {
                        (Fp::ZERO, Fp::ZERO)
                    };
                    if self.mchat[c][cell] != tr || self.tchat[c][cell] != te {
                        return Err(audit_fail(format!("class lookup [{l},{i},{c}] mismatch")));
                    }
                }
                let m = self.mhat[cell].value() as usize;
                if m == 0 || m > n || self.harm[cell] != harm_table[m - 1] {
                    return Err(audit_fail(format!("harmonic lookup [{l},{i}] mismatch")));
                }
                m_harm[m - 1] += Fp::ONE;
                let (e, d, di, w) = (self.edge[cell], self.d[cell], self.d_inv[cell], self.w[cell]);
                let one_minus = Fp::ONE - e;
                let t_match: Fp = (0..sh.classes_padded()).map(|c| self.y_ind[c][i] * self.tchat[c][cell]).sum();
                let h_minus = self.harm[cell] - lambda;
                let sum_cross: Fp = (0..sh.classes_padded()).map(|c| self.tchat[c][cell] * self.mchat[c][cell]).sum();
                let expected_wt =
                    self.t_match[cell] * (self.mhat[cell] * self.harm[cell] - lambda) - h_minus * sum_cross;
                let checks = [
                    (e * (Fp::ONE - e) == Fp::ZERO, "edge flag boolean"),
                    (e * d == Fp::ZERO, "edge flag on a collision"),
                    (one_minus * (d * di - Fp::ONE) == Fp::ZERO, "interior inverse"),
                    (d == self.mhat[cell] * (self.mhat[cell] - Fp::ONE), "D = M(M-1)"),
                    (e * (w - lambda * self.mhat[cell] * self.t_match[cell]) == Fp::ZERO, "edge weight"),
                    (one_minus * (w * d - self.wt_num[cell]) == Fp::ZERO, "interior weight"),
                    (self.t_match[cell] == t_match, "t_match"),
                    (self.wt_num[cell] == expected_wt, "weight numerator"),
                ];
                if let Some((_, what)) = checks.iter().find(|(ok, _)| !ok) {
                    return Err(audit_fail(format!("{what} fails at [{l},{i}]")));
                }
            }
        }
        if m_harm != self.m_harm {
            return Err(audit_fail("harmonic multiplicities"));
        }
        let mut m_range = vec![Fp::ZERO; 1 << RANGE_BITS];
        for side in [&self.train, &self.test] {
            for v in &side.limbs {
                m_range[v.value() as usize] += Fp::ONE;
            }
        }
        if m_range != self.m_range {
            return Err(audit_fail("range multiplicities"));
        }
        let norm = score_normalizer(sh, self.harmonic_scale)?;
        for i in 0..n {
            let s: Fp = (0..sh.tables).map(|l| self.w[l * n + i]).sum();
            if s != self.svsum[i] || self.svsum[i] * norm != self.svavg[i] {
                return Err(audit_fail(format!("score aggregation fails at {i}")));
            }
        }
        Ok(())
    }
}

/// Public protocol parameters, echoed into every proof.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicParams {
    pub version: u32,
    pub hash: HashParams,
    pub harmonic_scale: u64,
    pub feature_scale: i64,
    pub num_classes: usize,
    pub providers: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub pcs: PcsConfig,
    /// Pack the sign, histogram and lookup families into super-oracles.
    pub batching: bool,
}

impl PublicParams {
    pub fn shape(&self) -> Shape {
        Shape {
            n_train: self.n_train,
            n_test: self.n_test,
            dim: self.hash.dim,
            classes: self.num_classes,
            tables: self.hash.num_tables,
            depth: self.hash.depth,
            providers: self.providers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PROTOCOL_VERSION {
            return Err(Error::Parse(format!("unsupported protocol version {}", self.version)));
        }
        self.shape().validate()?;
        if self.hash.projections.len() != self.hash.num_tables * self.hash.depth * self.hash.dim {
            return Err(Error::Size("projection matrix has the wrong size".into()));
        }
        if self.harmonic_scale < 1 << 10 {
            return Err(Error::Domain("harmonic scale below 2^10".into()));
        }
        Ok(())
    }

    pub fn family_mode(&self) -> PackMode {
        if self.batching {
            PackMode::Packed
        } else {
            PackMode::Split
        }
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.u32(self.version);
        let h = &self.hash;
        for v in [h.num_tables, h.depth, h.dim] {
            w.u32(v as u32);
        }
        w.u64(h.seed);
        w.u64(h.scale as u64);
        for v in &h.projections {
            w.u64(*v as u64);
        }
        w.u64(self.harmonic_scale);
        w.u64(self.feature_scale as u64);
        for v in [self.num_classes, self.providers, self.n_train, self.n_test] {
            w.u32(v as u32);
        }
        w.u32(self.pcs.max_vars as u32);
        w.u32(self.pcs.num_column_checks as u32);
        w.u32(self.pcs.log_blowup);
        w.u8(self.batching as u8);
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        let version = r.u32()?;
        let (num_tables, depth, dim) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let seed = r.u64()?;
        let scale = r.u64()? as i64;
        let count = num_tables
            .checked_mul(depth)
            .and_then(|v| v.checked_mul(dim))
            .filter(|&v| v <= r.remaining() / 8)
            .ok_or_else(|| Error::Parse("projection matrix larger than the input".into()))?;
        let projections = (0..count).map(|_| Ok(r.u64()? as i64)).collect::<Result<Vec<_>>>()?;
        let hash = HashParams { num_tables, depth, dim, seed, scale, projections };
        let harmonic_scale = r.u64()?;
        let feature_scale = r.u64()? as i64;
        let num_classes = r.u32()? as usize;
        let providers = r.u32()? as usize;
        let n_train = r.u32()? as usize;
        let n_test = r.u32()? as usize;
        let pcs = PcsConfig { max_vars: r.u32()? as usize, num_column_checks: r.u32()? as usize, log_blowup: r.u32()? };
        let batching = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::Parse(format!("invalid batching flag {b}"))),
        };
        let pp = PublicParams {
            version,
            hash,
            harmonic_scale,
            feature_scale,
            num_classes,
            providers,
            n_train,
            n_test,
            pcs,
            batching,
        };
        pp.validate().map_err(|e| match e {
            Error::Parse(_) => e,
            other => Error::Parse(format!("invalid public parameters: {other}")),
        })?;
        Ok(pp)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let pp = Self::read(&mut r)?;
        r.expect_end("public parameters")?;
        Ok(pp)
    }

    pub fn provider_feature_params(&self) -> Result<CodeParams> {
        let sh = self.shape();
        pcs::setup(sh.log_slice() + sh.log_d(), &self.pcs)
    }

    pub fn provider_label_params(&self) -> Result<CodeParams> {
        let sh = self.shape();
        pcs::setup(sh.log_slice() + sh.log_c(), &self.pcs)
    }

    pub fn score_slice_params(&self) -> Result<CodeParams> {
        pcs::setup(self.shape().log_slice(), &self.pcs)
    }

    pub fn buyer_feature_params(&self) -> Result<CodeParams> {
        let sh = self.shape();
        pcs::setup(sh.log_t() + sh.log_d(), &self.pcs)
    }

    pub fn buyer_label_params(&self) -> Result<CodeParams> {
        let sh = self.shape();
        super_oracle::packed_params(sh.classes_padded(), sh.log_t(), &self.pcs)
    }
}

/// Salt rows of one provider's two commitments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardSalts {
    pub features: Vec<Fp>,
    pub labels: Vec<Fp>,
}

/// Index sets `I_p = [p·s, (p+1)·s)` and the salts each provider used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderPartition {
    pub providers: usize,
    pub slice_len: usize,
    pub salts: Vec<ShardSalts>,
}

impl ProviderPartition {
    pub fn range(&self, p: usize) -> std::ops::Range<usize> {
        p * self.slice_len..(p + 1) * self.slice_len
    }
}

/// One provider's rows in committed form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderShard {
    pub index: usize,
    /// `[i_low][j]`
    pub features: Vec<Fp>,
    /// `[c][i_low]` one-hot over padded classes.
    pub labels: Vec<Fp>,
    pub salts: ShardSalts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProviderDigests {
    pub features: CommitmentDigest,
    pub labels: CommitmentDigest,
}

impl ProviderDigests {
    pub fn write(&self, w: &mut ByteWriter) {
        self.features.write(w);
        self.labels.write(w);
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        Ok(ProviderDigests { features: CommitmentDigest::read(r)?, labels: CommitmentDigest::read(r)? })
    }
}

fn salt_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_row(rng: &mut ChaCha20Rng, len: usize) -> Vec<Fp> {
    (0..len).map(|_| Fp::random(rng)).collect()
}

impl ProviderShard {
    /// Builds shard `p` with salts drawn from `seed`.
    pub fn from_rows(data: &QuantizedDataset, pp: &PublicParams, p: usize, seed: u64) -> Result<Self> {
        let sh = pp.shape();
        if data.len() != sh.slice_len() || data.dim() != sh.dim {
            return Err(Error::Partition(format!(
                "shard {p} has {} rows of dimension {}, expected {} of {}",
                data.len(),
                data.dim(),
                sh.slice_len(),
                sh.dim
            )));
        }
        let mut rng = salt_rng(seed, 1 + p as u64);
        let salts = ShardSalts {
            features: random_row(&mut rng, pp.provider_feature_params()?.cols()),
            labels: random_row(&mut rng, pp.provider_label_params()?.cols()),
        };
        Ok(ProviderShard {
            index: p,
            features: data.field_features(),
            labels: one_hot(data.labels(), sh.classes_padded()).concat(),
            salts,
        })
    }

    pub fn commit(&self, pp: &PublicParams) -> Result<(Committed, Committed)> {
        Ok((
            pcs::commit(&self.features, &pp.provider_feature_params()?, Some(self.salts.features.clone()))?,
            pcs::commit(&self.labels, &pp.provider_label_params()?, Some(self.salts.labels.clone()))?,
        ))
    }

    pub fn digests(&self, pp: &PublicParams) -> Result<ProviderDigests> {
        let (f, l) = self.commit(pp)?;
        Ok(ProviderDigests { features: *f.digest(), labels: *l.digest() })
    }
}

/// The buyer's validation data in committed form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuyerShard {
    /// `[t][j]`
    pub features: Vec<Fp>,
    pub label_members: Vec<Vec<Fp>>,
    pub feature_salt: Vec<Fp>,
    pub label_salt: Vec<Fp>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuyerDigests {
    pub features: CommitmentDigest,
    pub labels: FamilyDigest,
}

impl BuyerDigests {
    pub fn write(&self, w: &mut ByteWriter) {
        self.features.write(w);
        self.labels.write(w);
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        Ok(BuyerDigests { features: CommitmentDigest::read(r)?, labels: FamilyDigest::read(r)? })
    }
}

impl BuyerShard {
    pub fn from_rows(val: &QuantizedDataset, pp: &PublicParams, seed: u64) -> Result<Self> {
        let sh = pp.shape();
        if val.len() != sh.n_test || val.dim() != sh.dim {
            return Err(Error::Size("validation set does not match the public parameters".into()));
        }
        let mut rng = salt_rng(seed, 0);
        Ok(BuyerShard {
            features: val.field_features(),
            label_members: one_hot(val.labels(), sh.classes_padded()),
            feature_salt: random_row(&mut rng, pp.buyer_feature_params()?.cols()),
            label_salt: random_row(&mut rng, pp.buyer_label_params()?.cols()),
        })
    }

    pub fn commit(&self, pp: &PublicParams) -> Result<(Committed, FamilyCommitted)> {
        Ok((
            pcs::commit(&self.features, &pp.buyer_feature_params()?, Some(self.feature_salt.clone()))?,
            super_oracle::commit_family_salted(self.label_members.clone(), &pp.pcs, self.label_salt.clone())?,
        ))
    }

    pub fn digests(&self, pp: &PublicParams) -> Result<BuyerDigests> {
        let (f, l) = self.commit(pp)?;
        Ok(BuyerDigests { features: *f.digest(), labels: l.digest.clone() })
    }
}

/// Provider shards of a training set split into equal contiguous slices.
pub fn provider_shards(train: &QuantizedDataset, pp: &PublicParams, seed: u64) -> Result<Vec<ProviderShard>> {
    let sh = pp.shape();
    if train.len() != sh.n_train {
        return Err(Error::Partition(format!("{} rows for N_train = {}", train.len(), sh.n_train)));
    }
    let s = sh.slice_len();
    (0..sh.providers)
        .map(|p| {
            let idx: Vec<usize> = (p * s..(p + 1) * s).collect();
            let rows = crate::data::quantize_features(&train.raw.select(&idx), train.scale)?;
            ProviderShard::from_rows(&rows, pp, p, seed)
        })
        .collect()
}

/// All public input commitments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicCommitments {
    pub providers: Vec<ProviderDigests>,
    pub buyer: BuyerDigests,
}

impl PublicCommitments {
    pub fn write(&self, w: &mut ByteWriter) {
        w.u32(self.providers.len() as u32);
        for p in &self.providers {
            p.write(w);
        }
        self.buyer.write(w);
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        let m = r.len_prefix(1 << 16)?;
        let providers = (0..m).map(|_| ProviderDigests::read(r)).collect::<Result<_>>()?;
        Ok(PublicCommitments { providers, buyer: BuyerDigests::read(r)? })
    }
}

/// Splits the training data across providers and commits every party's inputs.
pub fn partition_and_commit(
    train: &QuantizedDataset,
    val: &QuantizedDataset,
    pp: &PublicParams,
    seed: u64,
) -> Result<(ProviderPartition, Vec<ProviderShard>, BuyerShard, PublicCommitments)> {
    pp.validate()?;
    let shards = provider_shards(train, pp, seed)?;
    let buyer = BuyerShard::from_rows(val, pp, seed)?;
    let partition = ProviderPartition {
        providers: shards.len(),
        slice_len: pp.shape().slice_len(),
        salts: shards.iter().map(|s| s.salts.clone()).collect(),
    };
    let providers = shards.iter().map(|s| s.digests(pp)).collect::<Result<Vec<_>>>()?;
    let commitments = PublicCommitments { providers, buyer: buyer.digests(pp)? };
    Ok((partition, shards, buyer, commitments))
}

/// Per-provider commitments of the score slices `svavg[I_p]`, unsalted so a
/// provider can recompute them from the scores it receives.
pub fn commit_score_slices(svavg: &[Fp], pp: &PublicParams) -> Result<Vec<Committed>> {
    let sh = pp.shape();
    if svavg.len() != sh.n_train {
        return Err(Error::Size(format!("{} scores for N_train = {}", svavg.len(), sh.n_train)));
    }
    let params = pp.score_slice_params()?;
    svavg.chunks_exact(sh.slice_len()).map(|s| pcs::commit(s, &params, None)).collect()
}

/// Commitment of one provider's score slice, as the provider recomputes it.
pub fn score_slice_digest(slice: &[Fp], pp: &PublicParams) -> Result<CommitmentDigest> {
    Ok(*pcs::commit(slice, &pp.score_slice_params()?, None)?.digest())
}

/// Field inverses of a batch; zero entries map to zero.
pub fn inverse_or_zero<F: Field>(values: &[F]) -> Vec<F> {
    let nz: Vec<F> = values.iter().map(|v| if v.is_zero() { F::ONE } else { *v }).collect();
    let inv = batch_inverse(&nz).expect("nonzero by construction");
    values.iter().zip(inv).map(|(v, i)| if v.is_zero() { F::ZERO } else { i }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{quantize_features, RawDataset, DEFAULT_SCALE};
    use crate::valuation::{harmonic_table, lsh_shapley, DEFAULT_HARMONIC_SCALE};
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn q(dim: usize, classes: usize, feats: Vec<f64>, labels: Vec<u32>) -> QuantizedDataset {
        quantize_features(&RawDataset::new(dim, classes, feats, labels).unwrap(), DEFAULT_SCALE).unwrap()
    }

    fn axis_hash() -> HashParams {
        HashParams::from_projections(1, 1, 2, DEFAULT_SCALE, vec![DEFAULT_SCALE, 0]).unwrap()
    }

    fn random_instance(
        rng: &mut ChaCha8Rng,
        n: usize,
        t: usize,
        classes: usize,
    ) -> (QuantizedDataset, QuantizedDataset) {
        let mut gen = |count: usize| {
            let mut feats = Vec::new();
            for _ in 0..count {
                let mut row: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                crate::data::l2_normalize(&mut row);
                feats.extend(row);
            }
            let labels = (0..count).map(|_| rng.gen_range(0..classes as u32)).collect();
            q(4, classes, feats, labels)
        };
        (gen(n), gen(t))
    }

    #[test]
    fn three_point_tables() {
        let train = q(2, 2, vec![1.0, 0.0, -1.0, 0.0, 1.0, 0.0], vec![0, 1, 0]);
        let val = q(2, 2, vec![1.0, 0.0], vec![0]);
        let ht = harmonic_table(3, DEFAULT_HARMONIC_SCALE).unwrap();
        let o = build_oracle_set(&train, &val, &axis_hash(), &ht, 1).unwrap();
        assert_eq!(o.cnt, vec![Fp::new(1), Fp::new(2)]);
        assert_eq!(o.mhat, vec![Fp::new(2), Fp::new(1), Fp::new(2)]);
        o.self_audit().unwrap();
        let plain = lsh_shapley(&train, &val, &axis_hash(), &ht).unwrap();
        let enc: Vec<Fp> = plain.svavg.iter().map(|s| s.field_encoding().unwrap()).collect();
        assert_eq!(o.svavg, enc);
    }

    #[test]
    fn random_instances_audit_and_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..25 {
            let classes = 2 + trial % 3;
            let (train, val) = random_instance(&mut rng, 16, 4, classes);
            let h = HashParams::generate(2, 1 + trial % 4, 4, trial as u64, DEFAULT_SCALE).unwrap();
            let ht = harmonic_table(16, DEFAULT_HARMONIC_SCALE).unwrap();
            let o = build_oracle_set(&train, &val, &h, &ht, 2).unwrap();
            o.self_audit().unwrap();
            let plain = lsh_shapley(&train, &val, &h, &ht).unwrap();
            for (f, s) in o.svavg.iter().zip(&plain.svavg) {
                assert_eq!(*f, s.field_encoding().unwrap());
            }
        }
    }

    #[test]
    fn audit_catches_mutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (train, val) = random_instance(&mut rng, 8, 4, 2);
        let h = HashParams::generate(2, 2, 4, 1, DEFAULT_SCALE).unwrap();
        let ht = harmonic_table(8, DEFAULT_HARMONIC_SCALE).unwrap();
        let o = build_oracle_set(&train, &val, &h, &ht, 1).unwrap();
        let mut bad = o.clone();
        bad.cnt[0] += Fp::ONE;
        assert!(matches!(bad.self_audit(), Err(Error::Audit(_))));
        let mut bad = o.clone();
        bad.w[3] += Fp::new(DEFAULT_HARMONIC_SCALE);
        assert!(matches!(bad.self_audit(), Err(Error::Audit(_))));
        let mut bad = o;
        bad.train.sign[0] = Fp::ONE - bad.train.sign[0];
        assert!(matches!(bad.self_audit(), Err(Error::Audit(_))));
    }

    pub(crate) fn params(n: usize, t: usize, providers: usize, h: HashParams) -> PublicParams {
        PublicParams {
            version: PROTOCOL_VERSION,
            hash: h,
            harmonic_scale: DEFAULT_HARMONIC_SCALE,
            feature_scale: DEFAULT_SCALE,
            num_classes: 2,
            providers,
            n_train: n,
            n_test: t,
            pcs: PcsConfig::default(),
            batching: true,
        }
    }

    #[test]
    fn params_round_trip() {
        let pp = params(8, 4, 2, HashParams::generate(2, 3, 4, 9, DEFAULT_SCALE).unwrap());
        assert_eq!(PublicParams::from_bytes(&pp.to_bytes()).unwrap(), pp);
        let bytes = pp.to_bytes();
        assert!(matches!(PublicParams::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Parse(_))));
    }

    #[test]
    fn partitions_and_salts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (train, val) = random_instance(&mut rng, 4, 2, 2);
        let h = HashParams::generate(1, 2, 4, 0, DEFAULT_SCALE).unwrap();
        let pp = params(4, 2, 2, h.clone());
        let (part, shards, _, pubs) = partition_and_commit(&train, &val, &pp, 1).unwrap();
        assert_eq!((part.range(0), part.range(1)), (0..2, 2..4));
        assert_eq!(shards[1].features, train.field_features()[8..].to_vec());
        let (_, _, _, again) = partition_and_commit(&train, &val, &pp, 1).unwrap();
        assert_eq!(pubs, again);
        let (_, _, _, other) = partition_and_commit(&train, &val, &pp, 2).unwrap();
        assert_ne!(pubs.providers[0], other.providers[0]);
        assert_ne!(pubs.buyer, other.buyer);

        let single = params(4, 2, 1, h.clone());
        let (p1, _, _, pubs1) = partition_and_commit(&train, &val, &single, 1).unwrap();
        assert_eq!((p1.providers, pubs1.providers.len()), (1, 1));
        assert!(matches!(params(4, 2, 4, h).shape().validate(), Err(Error::Partition(_))));
    }

    #[test]
    fn score_slices() {
        let h = HashParams::generate(1, 2, 4, 0, DEFAULT_SCALE).unwrap();
        let pp = params(8, 2, 2, h);
        let scores: Vec<Fp> = (1..=8).map(Fp::new).collect();
        let a = commit_score_slices(&scores, &pp).unwrap();
        let mut swapped = scores[4..].to_vec();
        swapped.extend_from_slice(&scores[..4]);
        let b = commit_score_slices(&swapped, &pp).unwrap();
        assert_ne!(a[0].digest(), b[0].digest());
        assert_ne!(a[1].digest(), b[1].digest());
        assert_eq!(a[0].digest().root, b[1].digest().root);
        assert_eq!(score_slice_digest(&scores[..4], &pp).unwrap(), *a[0].digest());
        let zero = score_slice_digest(&[Fp::ZERO; 4], &pp).unwrap();
        assert_eq!(zero.root.to_hex(), "2f60e0143104d3d5ff2b97fc31fa005d84a8e10b3c8c46c6facd8e21781f5b56");
    }
}
