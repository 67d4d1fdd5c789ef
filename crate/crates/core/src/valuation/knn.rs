//! KNN-Shapley baseline on the float feature path.

use crate::data::RawDataset;
use crate::error::{Error, Result};

fn check(train: &RawDataset, val: &RawDataset, k: usize) -> Result<()> {
    if k == 0 || k > train.len() {
        return Err(Error::Domain(format!("k = {k} outside [1, {}]", train.len())));
    }
    if train.dim != val.dim {
        return Err(Error::Size(format!("train dimension {} vs validation {}", train.dim, val.dim)));
    }
    if val.is_empty() {
        return Err(Error::Domain("no validation points".into()));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Training indices by increasing distance to `x`; ties keep index order.
fn neighbor_order(train: &RawDataset, x: &[f64]) -> Vec<usize> {
    let d: Vec<f64> = (0..train.len()).map(|i| sq_dist(train.row(i), x)).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    order
}

/// Exact KNN-Shapley values via the backward recurrence, averaged over validation.
pub fn knn_shapley_baseline(train: &RawDataset, val: &RawDataset, k: usize) -> Result<Vec<f64>> {
    check(train, val, k)?;
    let n = train.len();
    let mut out = vec![0.0; n];
    let mut s = vec![0.0; n];
    for t in 0..val.len() {
        let yt = val.labels[t];
        let order = neighbor_order(train, val.row(t));
        let hit = |j: usize| (train.labels[order[j]] == yt) as u8 as f64;
        s[n - 1] = hit(n - 1) / n as f64;
        for j in (0..n - 1).rev() {
            let rank = (j + 1) as f64;
            s[j] = s[j + 1] + (hit(j) - hit(j + 1)) * (k as f64).min(rank) / (k as f64 * rank);
        }
        for (j, &i) in order.iter().enumerate() {
            out[i] += s[j];
        }
    }
    let nt = val.len() as f64;
    Ok(out.into_iter().map(|v| v / nt).collect())
}

/// Shapley values of the k-NN accuracy utility by coalition enumeration.
pub fn brute_force_knn_shapley(train: &RawDataset, val: &RawDataset, k: usize) -> Result<Vec<f64>> {
    let n = train.len();
    if n > 12 {
        return Err(Error::Capacity(format!("{n} players exceed the 12-player enumeration limit")));
    }
    check(train, val, k)?;
    let mut fact = vec![1.0f64; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut out = vec![0.0; n];
    for t in 0..val.len() {
        let yt = val.labels[t];
        let order = neighbor_order(train, val.row(t));
        let utility = |mask: u32| -> f64 {
            let hits =
                order.iter().filter(|&&i| mask >> i & 1 == 1).take(k).filter(|&&i| train.labels[i] == yt).count();
            hits as f64 / k as f64
        };
        let u: Vec<f64> = (0u32..1 << n).map(utility).collect();
        for (i, acc) in out.iter_mut().enumerate() {
            for s in 0u32..1 << n {
                if s >> i & 1 == 1 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let w = fact[size] * fact[n - 1 - size] / fact[n];
                *acc += w * (u[(s | 1 << i) as usize] - u[s as usize]);
            }
        }
    }
    let nt = val.len() as f64;
    Ok(out.into_iter().map(|v| v / nt).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[(f64, u32)]) -> RawDataset {
        RawDataset::new(1, 3, xs.iter().map(|p| p.0).collect(), xs.iter().map(|p| p.1).collect()).unwrap()
    }

    #[test]
    fn single_player() {
        let val = line(&[(0.0, 1)]);
        for y in [0, 1] {
            let train = line(&[(0.5, y)]);
            let r = knn_shapley_baseline(&train, &val, 1).unwrap();
            assert_eq!(r, vec![(y == 1) as u8 as f64]);
            assert_eq!(r, brute_force_knn_shapley(&train, &val, 1).unwrap());
        }
    }

    #[test]
    fn two_players_nearest_correct() {
        let train = line(&[(0.9, 0), (0.1, 1)]);
        let val = line(&[(0.0, 1)]);
        let a = knn_shapley_baseline(&train, &val, 1).unwrap();
        let b = brute_force_knn_shapley(&train, &val, 1).unwrap();
        assert!((a[1] - 1.0).abs() < 1e-12 && a[0].abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn same_label_symmetry() {
        let train = line(&[(0.1, 2), (0.2, 2), (0.3, 2), (0.4, 2)]);
        let val = line(&[(0.0, 2)]);
        let b = brute_force_knn_shapley(&train, &val, 2).unwrap();
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(b.iter().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn recurrence_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = 8;
            let feats: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let train = RawDataset::new(2, 3, feats, labels).unwrap();
            let val = RawDataset::new(2, 3, vec![rng.gen(), rng.gen(), rng.gen(), rng.gen()], vec![0, 1]).unwrap();
            for k in 1..=3 {
                let a = knn_shapley_baseline(&train, &val, k).unwrap();
                let b = brute_force_knn_shapley(&train, &val, k).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-9, "k={k}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn permutation_invariant() {
        let train = line(&[(0.1, 0), (0.5, 1), (-0.3, 1), (0.8, 0)]);
        let perm = train.select(&[2, 0, 3, 1]);
        let val = line(&[(0.2, 1), (-0.1, 0)]);
        let a = knn_shapley_baseline(&train, &val, 2).unwrap();
        let b = knn_shapley_baseline(&perm, &val, 2).unwrap();
        for (pos, &orig) in [2, 0, 3, 1].iter().enumerate() {
            assert!((a[orig] - b[pos]).abs() < 1e-12);
        }
        assert!(matches!(knn_shapley_baseline(&train, &val, 5), Err(Error::Domain(_))));
    }
}
