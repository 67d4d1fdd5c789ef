//! SimHash bucket assignment over quantized features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::data::QuantizedDataset;
use crate::error::{Error, Result};

/// Largest supported hash depth.
pub const MAX_DEPTH: usize = 20;

/// Public SimHash parameters; projections are `L × K × d` integers at scale `S_r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashParams {
    pub num_tables: usize,
    pub depth: usize,
    pub dim: usize,
    pub seed: u64,
    pub scale: i64,
    pub projections: Vec<i64>,
}

impl HashParams {
    /// Quantized Box-Muller Gaussians from a ChaCha20 stream keyed by `seed`.
    ///
    /// Tables are generated in order, so the first `L'` tables for a seed do
    /// not depend on `L`.
    pub fn generate(num_tables: usize, depth: usize, dim: usize, seed: u64, scale: i64) -> Result<Self> {
        Self::check_shape(num_tables, depth, dim)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let total = num_tables * depth * dim;
        let mut projections = Vec::with_capacity(total + 1);
        while projections.len() < total {
            let (z0, z1) = box_muller(&mut rng);
            projections.push((z0 * scale as f64).round() as i64);
            projections.push((z1 * scale as f64).round() as i64);
        }
        projections.truncate(total);
        Ok(HashParams { num_tables, depth, dim, seed, scale, projections })
    }

    /// Explicit projections, `[ℓ][k][j]` row-major.
    pub fn from_projections(
        num_tables: usize,
        depth: usize,
        dim: usize,
        scale: i64,
        projections: Vec<i64>,
    ) -> Result<Self> {
        Self::check_shape(num_tables, depth, dim)?;
        if projections.len() != num_tables * depth * dim {
            return Err(Error::Size(format!(
                "{} projection entries for {num_tables}×{depth}×{dim}",
                projections.len()
            )));
        }
        Ok(HashParams { num_tables, depth, dim, seed: 0, scale, projections })
    }

    fn check_shape(num_tables: usize, depth: usize, dim: usize) -> Result<()> {
        if num_tables == 0 || depth == 0 || dim == 0 {
            return Err(Error::Domain("hash tables, depth and dimension must be positive".into()));
        }
        if depth > MAX_DEPTH {
            return Err(Error::Capacity(format!("hash depth {depth} exceeds {MAX_DEPTH}")));
        }
        Ok(())
    }

    pub fn num_buckets(&self) -> usize {
        1 << self.depth
    }

    pub fn projection(&self, table: usize, bit: usize) -> &[i64] {
        let off = (table * self.depth + bit) * self.dim;
        &self.projections[off..off + self.dim]
    }

    /// Keeps the first `tables` tables.
    pub fn truncate_tables(&self, tables: usize) -> HashParams {
        let mut p = self.clone();
        p.num_tables = tables.min(self.num_tables);
        p.projections.truncate(p.num_tables * self.depth * self.dim);
        p
    }
}

fn box_muller<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let radius = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (radius * theta.cos(), radius * theta.sin())
}

/// `⟨r_ℓ^(k), x_i⟩` for every table, bit and point: layout `[ℓ][k][i]`.
pub fn dot_products(data: &QuantizedDataset, h: &HashParams) -> Result<Vec<i64>> {
    if data.dim() != h.dim {
        return Err(Error::Size(format!("data dimension {} vs projection dimension {}", data.dim(), h.dim)));
    }
    let n = data.len();
    let mut out = Vec::with_capacity(h.num_tables * h.depth * n);
    for l in 0..h.num_tables {
        for k in 0..h.depth {
            let r = h.projection(l, k);
            for i in 0..n {
                let x = data.row(i);
                out.push(r.iter().zip(x).map(|(a, b)| a * b).sum());
            }
        }
    }
    Ok(out)
}

/// Sign bit with the `2·dp + 1` tie rule: a zero dot product hashes to 1.
pub fn sign_bit(dp: i64) -> u32 {
    (2 * dp + 1 > 0) as u32
}

/// Bucket id of every point per table: layout `[ℓ][i]`.
pub fn simhash_assign(data: &QuantizedDataset, h: &HashParams) -> Result<Vec<Vec<u32>>> {
    let dp = dot_products(data, h)?;
    let n = data.len();
    let mut out = vec![vec![0u32; n]; h.num_tables];
    for (l, row) in out.iter_mut().enumerate() {
        for k in 0..h.depth {
            let base = (l * h.depth + k) * n;
            for (i, b) in row.iter_mut().enumerate() {
                *b |= sign_bit(dp[base + i]) << k;
            }
        }
    }
    Ok(out)
}

/// Bucket histograms over training and validation points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketStats {
    pub num_tables: usize,
    pub num_buckets: usize,
    pub num_classes: usize,
    /// `[ℓ][b]`
    pub cnt: Vec<u64>,
    /// `[ℓ][b][c]`
    pub cnt_tr: Vec<u64>,
    /// `[ℓ][b][c]`
    pub cnt_te: Vec<u64>,
    pub train_buckets: Vec<Vec<u32>>,
    pub val_buckets: Vec<Vec<u32>>,
}

impl BucketStats {
    pub fn cnt(&self, l: usize, b: usize) -> u64 {
        self.cnt[l * self.num_buckets + b]
    }

    pub fn cnt_tr(&self, l: usize, b: usize, c: usize) -> u64 {
        self.cnt_tr[(l * self.num_buckets + b) * self.num_classes + c]
    }

    pub fn cnt_te(&self, l: usize, b: usize, c: usize) -> u64 {
        self.cnt_te[(l * self.num_buckets + b) * self.num_classes + c]
    }

    /// `M(ℓ, t)`: training points sharing validation point `t`'s bucket.
    pub fn m(&self, l: usize, t: usize) -> u64 {
        self.cnt(l, self.val_buckets[l][t] as usize)
    }

    /// `M⁺(ℓ, t)`: those among them carrying label `y_t`.
    pub fn m_plus(&self, l: usize, t: usize, y_t: u32) -> u64 {
        self.cnt_tr(l, self.val_buckets[l][t] as usize, y_t as usize)
    }
}

pub fn bucket_statistics(train: &QuantizedDataset, val: &QuantizedDataset, h: &HashParams) -> Result<BucketStats> {
    if train.num_classes() != val.num_classes() {
        return Err(Error::Size("train and validation disagree on the class count".into()));
    }
    let train_buckets = simhash_assign(train, h)?;
    let val_buckets = if val.is_empty() { vec![Vec::new(); h.num_tables] } else { simhash_assign(val, h)? };
    let nb = h.num_buckets();
    let c = train.num_classes();
    let mut cnt = vec![0u64; h.num_tables * nb];
    let mut cnt_tr = vec![0u64; h.num_tables * nb * c];
    let mut cnt_te = vec![0u64; h.num_tables * nb * c];
    for l in 0..h.num_tables {
        for (i, &b) in train_buckets[l].iter().enumerate() {
            let b = b as usize;
            cnt[l * nb + b] += 1;
            cnt_tr[(l * nb + b) * c + train.labels()[i] as usize] += 1;
        }
        for (t, &b) in val_buckets[l].iter().enumerate() {
            cnt_te[(l * nb + b as usize) * c + val.labels()[t] as usize] += 1;
        }
    }
    Ok(BucketStats {
        num_tables: h.num_tables,
        num_buckets: nb,
        num_classes: c,
        cnt,
        cnt_tr,
        cnt_te,
        train_buckets,
        val_buckets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{quantize_features, RawDataset, DEFAULT_SCALE};

    fn ds(rows: &[(f64, f64, u32)]) -> QuantizedDataset {
        let feats = rows.iter().flat_map(|r| [r.0, r.1]).collect();
        let labels = rows.iter().map(|r| r.2).collect();
        quantize_features(&RawDataset::new(2, 2, feats, labels).unwrap(), DEFAULT_SCALE).unwrap()
    }

    fn axis_hash() -> HashParams {
        HashParams::from_projections(1, 1, 2, DEFAULT_SCALE, vec![DEFAULT_SCALE, 0]).unwrap()
    }

    #[test]
    fn sign_examples() {
        let h = axis_hash();
        let pts = ds(&[(1.0, 0.0, 0), (-1.0, 0.0, 0), (0.0, 1.0, 0)]);
        assert_eq!(simhash_assign(&pts, &h).unwrap()[0], vec![1, 0, 1]);
        assert_eq!(sign_bit(0), 1);
        assert_eq!(sign_bit(-1), 0);
    }

    #[test]
    fn three_point_histograms() {
        let h = axis_hash();
        let train = ds(&[(1.0, 0.0, 0), (-1.0, 0.0, 1), (1.0, 0.0, 0)]);
        let val = ds(&[(1.0, 0.0, 0)]);
        let s = bucket_statistics(&train, &val, &h).unwrap();
        assert_eq!(s.cnt, vec![1, 2]);
        assert_eq!((s.m(0, 0), s.m_plus(0, 0, 0)), (2, 2));

        let empty = ds(&[]);
        let e = bucket_statistics(&train, &empty, &h).unwrap();
        assert!(e.cnt_te.iter().all(|&c| c == 0));
        assert_eq!((e.cnt, e.cnt_tr), (s.cnt.clone(), s.cnt_tr.clone()));
    }

    #[test]
    fn conservation_and_determinism() {
        let h = HashParams::generate(4, 3, 2, 9, DEFAULT_SCALE).unwrap();
        assert_eq!(h, HashParams::generate(4, 3, 2, 9, DEFAULT_SCALE).unwrap());
        assert_eq!(h.truncate_tables(2), HashParams::generate(2, 3, 2, 9, DEFAULT_SCALE).unwrap());
        let pts: Vec<(f64, f64, u32)> = (0..20)
            .map(|i| {
                let a = i as f64 * 0.7;
                (a.cos(), a.sin(), (i % 2) as u32)
            })
            .collect();
        let train = ds(&pts);
        let s = bucket_statistics(&train, &train, &h).unwrap();
        for l in 0..4 {
            let total: u64 = (0..8).map(|b| s.cnt(l, b)).sum();
            assert_eq!(total, 20);
            for b in 0..8 {
                assert_eq!(s.cnt_tr(l, b, 0) + s.cnt_tr(l, b, 1), s.cnt(l, b));
                assert_eq!(s.cnt_te(l, b, 0) + s.cnt_te(l, b, 1), s.cnt(l, b));
            }
        }
    }
}
