//! Fixed-point datasets shared by the plaintext and proof paths.

use crate::error::{Error, Result};
use crate::field::Fp;

/// Default feature and projection scale `2^12`.
pub const DEFAULT_SCALE: i64 = 1 << 12;

const NORM_SLACK: f64 = 1e-9;

/// Labeled float rows, each row ℓ2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub dim: usize,
    pub num_classes: usize,
    /// Row-major `len × dim`.
    pub features: Vec<f64>,
    pub labels: Vec<u32>,
}

impl RawDataset {
    pub fn new(dim: usize, num_classes: usize, features: Vec<f64>, labels: Vec<u32>) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(Error::Size(format!(
                "{} feature values for {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::Domain(format!("label {l} outside [0, {num_classes})")));
        }
        Ok(RawDataset { dim, num_classes, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Subset of rows in the given order.
    pub fn select(&self, idx: &[usize]) -> RawDataset {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        RawDataset {
            dim: self.dim,
            num_classes: self.num_classes,
            features,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Integer features at scale `S_x`, with the float rows kept for metric paths.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDataset {
    pub scale: i64,
    pub features: Vec<i64>,
    pub raw: RawDataset,
}

impl QuantizedDataset {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.raw.dim
    }

    pub fn num_classes(&self) -> usize {
        self.raw.num_classes
    }

    pub fn labels(&self) -> &[u32] {
        &self.raw.labels
    }

    pub fn row(&self, i: usize) -> &[i64] {
        let d = self.dim();
        &self.features[i * d..(i + 1) * d]
    }

    /// Field embedding of the features, row-major.
    pub fn field_features(&self) -> Vec<Fp> {
        self.features.iter().map(|&v| Fp::from_i64(v)).collect()
    }
}

/// `round(S_x · v)` for every coordinate; rows must be unit-normalized.
pub fn quantize_features(raw: &RawDataset, scale: i64) -> Result<QuantizedDataset> {
    if scale <= 0 {
        return Err(Error::Domain(format!("scale {scale} must be positive")));
    }
    let mut features = Vec::with_capacity(raw.features.len());
    for (i, v) in raw.features.iter().enumerate() {
        if !v.is_finite() || v.abs() > 1.0 + NORM_SLACK {
            return Err(Error::Normalization(format!("feature {v} in row {} exceeds unit magnitude", i / raw.dim)));
        }
        features.push((v * scale as f64).round() as i64);
    }
    Ok(QuantizedDataset { scale, features, raw: raw.clone() })
}

/// Field embedding of a single value, as used by the quantizer.
pub fn quantize_value(v: f64, scale: i64) -> Result<Fp> {
    if !v.is_finite() || v.abs() > 1.0 + NORM_SLACK {
        return Err(Error::Normalization(format!("value {v} exceeds unit magnitude")));
    }
    Ok(Fp::from_i64((v * scale as f64).round() as i64))
}

/// ℓ2-normalizes a row in place; zero rows are left unchanged.
pub fn l2_normalize(row: &mut [f64]) {
    let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in row.iter_mut() {
            *x /= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::MODULUS;

    #[test]
    fn quantizer_examples() {
        assert_eq!(quantize_value(1.0, 4096).unwrap(), Fp::new(4096));
        assert_eq!(quantize_value(-1.0, 4096).unwrap(), Fp::new(MODULUS - 4096));
        assert_eq!(quantize_value(0.5, 4096).unwrap(), Fp::new(2048));
        assert!(matches!(quantize_value(1.5, 4096), Err(Error::Normalization(_))));
    }

    #[test]
    fn dataset_checks() {
        let raw = RawDataset::new(2, 2, vec![1.0, 0.0, 0.0, -1.0], vec![0, 1]).unwrap();
        let q = quantize_features(&raw, DEFAULT_SCALE).unwrap();
        assert_eq!(q.row(1), &[0, -4096]);
        assert!(RawDataset::new(2, 2, vec![1.0], vec![0]).is_err());
        assert!(RawDataset::new(1, 2, vec![1.0], vec![2]).is_err());
        let bad = RawDataset::new(1, 1, vec![2.0], vec![0]).unwrap();
        assert!(matches!(quantize_features(&bad, 4096), Err(Error::Normalization(_))));
    }
}
