//! Plaintext LSH-Shapley valuation and its exact reference oracles.
//!
//! The utility of a coalition `S` inside one bucket is the fraction of its
//! members sharing the validation label. Its Shapley values depend only on the
//! bucket size `M`, the same-label count `M⁺` and the harmonic number `H_M`.

pub mod knn;
pub mod probe;
pub mod simhash;

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::data::QuantizedDataset;
use crate::error::{Error, Result};
use crate::field::{Field, Fp, MODULUS};

pub use simhash::{bucket_statistics, simhash_assign, BucketStats, HashParams};

/// Default harmonic scale `Λ = 2^20`.
pub const DEFAULT_HARMONIC_SCALE: u64 = 1 << 20;

/// Harmonic numbers `H_1..H_n`, exact and in fixed point at scale `Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicTable {
    pub scale: u64,
    /// `round(Λ·H_m)` at index `m - 1`.
    pub rounded: Vec<u64>,
    /// `H_m` at index `m - 1`.
    pub exact: Vec<BigRational>,
}

pub fn harmonic_table(n: usize, scale: u64) -> Result<HarmonicTable> {
    if n == 0 {
        return Err(Error::Domain("harmonic table needs n >= 1".into()));
    }
    if scale < 1 << 10 {
        return Err(Error::Domain(format!("harmonic scale {scale} below 2^10")));
    }
    let mut exact = Vec::with_capacity(n);
    let mut rounded = Vec::with_capacity(n);
    let mut h = BigRational::zero();
    let lambda = BigInt::from(scale);
    for m in 1..=n {
        h += BigRational::new(BigInt::one(), BigInt::from(m));
        // round(Λ·num/den) = floor((2Λ·num + den) / (2·den))
        let num: BigInt = h.numer() * &lambda * 2 + h.denom();
        let den: BigInt = h.denom() * 2;
        rounded.push(num.div_floor(&den).to_u64().expect("fixed-point harmonic fits in u64"));
        exact.push(h.clone());
    }
    Ok(HarmonicTable { scale, rounded, exact })
}

impl HarmonicTable {
    pub fn len(&self) -> usize {
        self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty()
    }

    pub fn h(&self, m: usize) -> &BigRational {
        &self.exact[m - 1]
    }

    /// Field encodings of `Λ·H_m` for `m = 1..n` (exact rationals, not rounded).
    pub fn field_scaled(&self) -> Vec<Fp> {
        let inv = crate::field::batch_inverse(&(1..=self.len()).map(|m| Fp::new(m as u64)).collect::<Vec<_>>())
            .expect("small integers are invertible");
        let lambda = Fp::new(self.scale);
        let mut acc = Fp::ZERO;
        inv.iter()
            .map(|i| {
                acc += *i;
                acc * lambda
            })
            .collect()
    }
}

/// Exact rational score with its field encoding `num · den^{-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalScore(pub BigRational);

impl RationalScore {
    pub fn numerator(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.0)
    }

    pub fn field_encoding(&self) -> Result<Fp> {
        rational_to_field(&self.0)
    }
}

pub fn bigint_to_field(v: &BigInt) -> Fp {
    let p = BigInt::from(MODULUS);
    let r = v.mod_floor(&p);
    Fp::new(r.to_u64().expect("reduced below p"))
}

pub fn rational_to_field(q: &BigRational) -> Result<Fp> {
    let den = bigint_to_field(q.denom());
    let inv = den.inverse().map_err(|_| Error::Arithmetic(format!("denominator {} is divisible by p", q.denom())))?;
    Ok(bigint_to_field(q.numer()) * inv)
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        let sign = if q.is_negative() { -1.0 } else { 1.0 };
        sign * f64::INFINITY
    })
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Closed-form Shapley value of a bucket member.
///
/// `φ⁺ = H_M/M − (M⁺−1)(H_M−1)/(M(M−1))` for members sharing the validation
/// label, `φ⁻ = −M⁺(H_M−1)/(M(M−1))` otherwise; a singleton receives the full
/// utility.
pub fn phi_closed_form(m: u64, m_plus: u64, same_label: bool, ht: &HarmonicTable) -> Result<BigRational> {
    if m == 0 {
        return Err(Error::Domain("bucket size 0: a training point always occupies its bucket".into()));
    }
    if m as usize > ht.len() {
        return Err(Error::Domain(format!("bucket size {m} beyond harmonic table of {}", ht.len())));
    }
    if m_plus > m || (same_label && m_plus == 0) {
        return Err(Error::Domain(format!("inconsistent counts M={m}, M+={m_plus}, same={same_label}")));
    }
    if m == 1 {
        return Ok(if same_label { BigRational::one() } else { BigRational::zero() });
    }
    let h = ht.h(m as usize);
    let h1 = h - BigRational::one();
    let mm1 = (m * (m - 1)) as i64;
    Ok(if same_label {
        h * ratio(1, m as i64) - h1 * ratio(m_plus as i64 - 1, mm1)
    } else {
        -(h1 * ratio(m_plus as i64, mm1))
    })
}

/// Exact Shapley values of the bucket utility by enumerating all coalitions.
pub fn brute_force_bucket_shapley(bucket_labels: &[u32], y_t: u32) -> Result<Vec<BigRational>> {
    let m = bucket_labels.len();
    if m > 20 {
        return Err(Error::Capacity(format!("{m} players exceed the 20-player enumeration limit")));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let same: Vec<bool> = bucket_labels.iter().map(|&l| l == y_t).collect();
    let den: i128 = (1..=m as i128).fold(1, |acc, k| acc.lcm(&k));
    let fact: Vec<i128> = (0..=m as i128)
        .scan(1i128, |acc, k| {
            if k > 0 {
                *acc *= k;
            }
            Some(*acc)
        })
        .collect();
    let same_mask: u32 = same.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| 1u32 << i).sum();
    let mut out = Vec::with_capacity(m);
    for (i, &same_i) in same.iter().enumerate() {
        let mut total: i128 = 0;
        for s in 0u32..(1u32 << m) {
            if s >> i & 1 == 1 {
                continue;
            }
            let size = s.count_ones() as i128;
            let pos = (s & same_mask).count_ones() as i128;
            let with = (pos + same_i as i128) * den / (size + 1);
            let without = if size == 0 { 0 } else { pos * den / size };
            total += fact[size as usize] * fact[m - 1 - size as usize] * (with - without);
        }
        out.push(BigRational::new(BigInt::from(total), BigInt::from(fact[m] * den)));
    }
    Ok(out)
}

/// Scores of every training point.
#[derive(Debug, Clone, PartialEq)]
pub struct LshScores {
    /// Average over tables and validation points.
    pub svavg: Vec<RationalScore>,
    /// Sum over tables and validation points, `L·N_test·svavg`.
    pub svsum: Vec<BigRational>,
}

/// Exact LSH-Shapley scores.
pub fn lsh_shapley(
    train: &QuantizedDataset,
    val: &QuantizedDataset,
    h: &HashParams,
    ht: &HarmonicTable,
) -> Result<LshScores> {
    if val.is_empty() {
        return Err(Error::Domain("no validation points: score normalization undefined".into()));
    }
    if ht.len() < train.len() {
        return Err(Error::Domain("harmonic table shorter than the training set".into()));
    }
    let stats = bucket_statistics(train, val, h)?;
    let c = stats.num_classes;
    let mut memo: HashMap<(u64, u64, bool), BigRational> = HashMap::new();
    let mut svsum = vec![BigRational::zero(); train.len()];
    for l in 0..h.num_tables {
        for (i, &b) in stats.train_buckets[l].iter().enumerate() {
            let b = b as usize;
            let m = stats.cnt(l, b);
            let y = train.labels()[i] as usize;
            for class in 0..c {
                let visitors = stats.cnt_te(l, b, class);
                if visitors == 0 {
                    continue;
                }
                let key = (m, stats.cnt_tr(l, b, class), class == y);
                let phi = match memo.get(&key) {
                    Some(v) => v.clone(),
                    None => {
                        let v = phi_closed_form(key.0, key.1, key.2, ht)?;
                        memo.insert(key, v.clone());
                        v
                    }
                };
                svsum[i] += phi * BigInt::from(visitors);
            }
        }
    }
    let norm = BigInt::from((h.num_tables * val.len()) as u64);
    let svavg = svsum.iter().map(|s| RationalScore(s / &norm)).collect();
    Ok(LshScores { svavg, svsum })
}

/// Float LSH-Shapley scores on the same buckets; used for metrics only.
pub fn lsh_shapley_f64(train: &QuantizedDataset, val: &QuantizedDataset, h: &HashParams) -> Result<Vec<f64>> {
    if val.is_empty() {
        return Err(Error::Domain("no validation points: score normalization undefined".into()));
    }
    let stats = bucket_statistics(train, val, h)?;
    let c = stats.num_classes;
    let mut harm = vec![0.0f64; train.len() + 1];
    for m in 1..=train.len() {
        harm[m] = harm[m - 1] + 1.0 / m as f64;
    }
    let phi = |m: u64, mp: u64, same: bool| -> f64 {
        if m == 1 {
            return if same { 1.0 } else { 0.0 };
        }
        let (mf, mpf, hm) = (m as f64, mp as f64, harm[m as usize]);
        let d = mf * (mf - 1.0);
        if same {
            hm / mf - (mpf - 1.0) * (hm - 1.0) / d
        } else {
            -mpf * (hm - 1.0) / d
        }
    };
    let mut out = vec![0.0; train.len()];
    for l in 0..h.num_tables {
        for (i, &b) in stats.train_buckets[l].iter().enumerate() {
            let b = b as usize;
            let m = stats.cnt(l, b);
            let y = train.labels()[i] as usize;
            for class in 0..c {
                let visitors = stats.cnt_te(l, b, class);
                if visitors > 0 {
                    out[i] += visitors as f64 * phi(m, stats.cnt_tr(l, b, class), class == y);
                }
            }
        }
    }
    let norm = (h.num_tables * val.len()) as f64;
    Ok(out.into_iter().map(|s| s / norm).collect())
}
