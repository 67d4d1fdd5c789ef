//! Rank agreement between LSH-Shapley and KNN-Shapley as the table count grows.

use crate::data::QuantizedDataset;
use crate::error::{Error, Result};

use super::knn::knn_shapley_baseline;
use super::lsh_shapley_f64;
use super::simhash::HashParams;

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        // A constant ranking carries no order; two constant rankings agree.
        return if saa == sbb { 1.0 } else { 0.0 };
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Size(format!(
            "spearman needs two equal series of length >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// Agreement statistic for one table count.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub num_tables: usize,
    pub per_seed: Vec<f64>,
    pub mean: f64,
}

/// Spearman agreement of LSH-Shapley (depth `depth`) with KNN-Shapley (`k`
/// neighbours) for every `L` in `l_grid`, per hash seed.
///
/// For one seed the tables for smaller `L` are a prefix of those for larger `L`.
pub fn rank_concentration_probe(
    train: &QuantizedDataset,
    val: &QuantizedDataset,
    depth: usize,
    k: usize,
    seeds: &[u64],
    l_grid: &[usize],
) -> Result<Vec<ProbeRow>> {
    if l_grid.is_empty() || l_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("table grid must be non-empty and ascending".into()));
    }
    let knn = knn_shapley_baseline(&train.raw, &val.raw, k)?;
    let max_l = *l_grid.last().expect("non-empty grid");
    let mut rows: Vec<ProbeRow> = l_grid
        .iter()
        .map(|&l| ProbeRow { num_tables: l, per_seed: Vec::with_capacity(seeds.len()), mean: 0.0 })
        .collect();
    for &seed in seeds {
        let full = HashParams::generate(max_l, depth, train.dim(), seed, train.scale)?;
        for row in rows.iter_mut() {
            let lsh = lsh_shapley_f64(train, val, &full.truncate_tables(row.num_tables))?;
            row.per_seed.push(spearman(&lsh, &knn)?);
        }
    }
    for row in rows.iter_mut() {
        row.mean = row.per_seed.iter().sum::<f64>() / row.per_seed.len().max(1) as f64;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{quantize_features, RawDataset, DEFAULT_SCALE};

    #[test]
    fn rank_examples() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    fn clusters() -> QuantizedDataset {
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for i in 0..16 {
            let a = 0.02 * i as f64;
            let (x, y) = if i % 2 == 0 { (a.cos(), a.sin()) } else { (-a.cos(), -a.sin()) };
            feats.extend([x, y]);
            labels.push((i % 2) as u32);
        }
        quantize_features(&RawDataset::new(2, 2, feats, labels).unwrap(), DEFAULT_SCALE).unwrap()
    }

    #[test]
    fn probe_is_deterministic() {
        let d = clusters();
        let rows = rank_concentration_probe(&d, &d, 2, 3, &[1, 2], &[1, 4, 4]).unwrap();
        assert_eq!(rows[1].per_seed, rows[2].per_seed);
        assert_eq!(rows, rank_concentration_probe(&d, &d, 2, 3, &[1, 2], &[1, 4, 4]).unwrap());
        assert!(rank_concentration_probe(&d, &d, 2, 3, &[1], &[4, 1]).is_err());
    }
}
