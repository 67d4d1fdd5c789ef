//! Dataset ingestion, synthetic workloads and corruption.

use crate::error::{CliError, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;
use zkvalue_core::data::{l2_normalize, RawDataset};

/// Below this standard deviation a column is treated as constant.
const ZERO_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Mislabel,
    Noisy,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Mislabel => "mislabel",
            Task::Noisy => "noisy",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mislabel" => Ok(Task::Mislabel),
            "noisy" => Ok(Task::Noisy),
            _ => Err(format!("unknown task {s:?}, expected mislabel or noisy")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub data: RawDataset,
    /// Indices of zero-variance columns that were dropped.
    pub dropped_columns: Vec<usize>,
    pub rows_read: usize,
}

impl Ingested {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.dropped_columns.is_empty() {
            out.push(format!("dropped zero-variance columns {:?}", self.dropped_columns));
        }
        if self.rows_read != self.data.len() {
            out.push(format!("subsampled {} rows to {}", self.rows_read, self.data.len()));
        }
        out
    }
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let n = header.len();
    if n < 2 || &header[n - 1] != "label" {
        return Err(CliError::Ingest("header must be f0,...,f{d-1},label".into()));
    }
    for (j, name) in header.iter().take(n - 1).enumerate() {
        if name != format!("f{j}") {
            return Err(CliError::Ingest(format!("header column {j} is {name:?}, expected f{j}")));
        }
    }
    Ok(n - 1)
}

/// Rows and labels exactly as written.
fn read_rows<R: Read>(reader: R) -> Result<(usize, Vec<Vec<f64>>, Vec<u32>)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::Ingest(format!("header: {e}")))?.clone();
    let d = check_header(&header)?;
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Ingest(format!("row {}: {e}", i + 1)))?;
        if rec.len() != d + 1 {
            return Err(CliError::Ingest(format!("ragged row {}: {} fields, expected {}", i + 1, rec.len(), d + 1)));
        }
        let row = rec
            .iter()
            .take(d)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Ingest(format!("row {}: bad feature {v:?}", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = rec[d].parse::<u32>().map_err(|_| {
            CliError::Ingest(format!("row {}: label {:?} is not a non-negative integer", i + 1, &rec[d]))
        })?;
        rows.push(row);
        labels.push(label);
    }
    Ok((d, rows, labels))
}

/// Indices of a class-balanced subsample of size `target`, in input order.
fn balanced_subsample(labels: &[u32], target: usize, seed: u64) -> Vec<usize> {
    let classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        pools[l as usize].push(i);
    }
    for p in pools.iter_mut() {
        p.shuffle(&mut rng);
    }
    let mut picked = Vec::with_capacity(target);
    let mut round = 0;
    while picked.len() < target {
        for p in &pools {
            if picked.len() < target && round < p.len() {
                picked.push(p[round]);
            }
        }
        round += 1;
    }
    picked.sort_unstable();
    picked
}

/// Z-scores every column, drops constant ones, ℓ2-normalizes rows and
/// subsamples to the largest power-of-two count with classes balanced.
pub fn ingest_reader<R: Read>(reader: R, seed: u64) -> Result<Ingested> {
    let (d, rows, labels) = read_rows(reader)?;
    if rows.is_empty() {
        return Err(CliError::Ingest("no data rows".into()));
    }
    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(CliError::Ingest("single-class data".into()));
    }
    let n = rows.len() as f64;
    let mut kept = Vec::new();
    let mut dropped_columns = Vec::new();
    let mut stats = Vec::new();
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let sd = (rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd < ZERO_VARIANCE {
            dropped_columns.push(j);
        } else {
            kept.push(j);
            stats.push((mean, sd));
        }
    }
    if kept.is_empty() {
        return Err(CliError::Ingest("every column has zero variance".into()));
    }
    let target = 1usize << (usize::BITS - 1 - rows.len().leading_zeros());
    let idx = if target == rows.len() { (0..rows.len()).collect() } else { balanced_subsample(&labels, target, seed) };
    let mut features = Vec::with_capacity(idx.len() * kept.len());
    for &i in &idx {
        let mut row: Vec<f64> = kept.iter().zip(&stats).map(|(&j, (m, s))| (rows[i][j] - m) / s).collect();
        l2_normalize(&mut row);
        features.extend(row);
    }
    let classes = *distinct.last().expect("two classes") as usize + 1;
    let data = RawDataset::new(kept.len(), classes, features, idx.iter().map(|&i| labels[i]).collect())?;
    Ok(Ingested { data, dropped_columns, rows_read: rows.len() })
}

pub fn ingest_csv(path: &Path, seed: u64) -> Result<Ingested> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    ingest_reader(f, seed)
}

/// Appends zero columns up to the next power-of-two dimension; norms and
/// inner products are unchanged.
pub fn pad_dimension(data: &RawDataset) -> RawDataset {
    let d = data.dim;
    let target = d.next_power_of_two();
    if target == d {
        return data.clone();
    }
    let mut features = Vec::with_capacity(data.len() * target);
    for i in 0..data.len() {
        features.extend_from_slice(data.row(i));
        features.resize((i + 1) * target, 0.0);
    }
    RawDataset { dim: target, num_classes: data.num_classes, features, labels: data.labels.clone() }
}

/// Writes rows verbatim; shortest round-trip formatting keeps them bit-exact.
pub fn write_prepared(data: &RawDataset) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..data.dim).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).expect("in-memory write");
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.labels[i].to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Reads rows written by [`write_prepared`] without any normalization.
pub fn read_prepared(path: &Path, num_classes: usize) -> Result<RawDataset> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let (d, rows, labels) = read_rows(f)?;
    Ok(RawDataset::new(d, num_classes, rows.concat(), labels)?)
}

/// Index of the anchor with the largest cosine to `x`; ties go to the lower index.
pub fn nearest_anchor(anchors: &[Vec<f64>], x: &[f64]) -> usize {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let nx = norm(x);
    let mut best = (0, f64::NEG_INFINITY);
    for (c, a) in anchors.iter().enumerate() {
        let cos = a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() / (norm(a) * nx);
        if cos > best.1 {
            best = (c, cos);
        }
    }
    best.0
}

fn gaussian_row(rng: &mut ChaCha20Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Standard-normal features labelled by the nearest of `c` random unit anchors.
pub fn synth_gaussian(
    n_train: usize,
    n_test: usize,
    d: usize,
    c: usize,
    seed: u64,
) -> Result<(RawDataset, RawDataset)> {
    for (name, v) in [("N_train", n_train), ("N_test", n_test), ("d", d)] {
        if !v.is_power_of_two() {
            return Err(CliError::InvalidConfig(format!("{name} = {v} must be a power of two")));
        }
    }
    if c < 2 {
        return Err(CliError::InvalidConfig("at least two classes are required".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let anchors: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            let mut a = gaussian_row(&mut rng, d);
            l2_normalize(&mut a);
            a
        })
        .collect();
    let mut draw = |n: usize| -> Result<RawDataset> {
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = gaussian_row(&mut rng, d);
            labels.push(nearest_anchor(&anchors, &x) as u32);
            l2_normalize(&mut x);
            features.extend(x);
        }
        Ok(RawDataset::new(d, c, features, labels)?)
    };
    let train = draw(n_train)?;
    let test = draw(n_test)?;
    Ok((train, test))
}

/// Corrupts `round(fraction · N)` rows (at least one) and returns the mask.
pub fn corrupt_dataset(train: &RawDataset, task: Task, fraction: f64, seed: u64) -> Result<(RawDataset, Vec<bool>)> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(CliError::InvalidConfig(format!("corruption fraction {fraction} outside (0, 0.5]")));
    }
    let n = train.len();
    let count = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut mask = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, count) {
        mask[i] = true;
    }
    let mut out = train.clone();
    for i in (0..n).filter(|&i| mask[i]) {
        match task {
            Task::Mislabel => {
                let c = train.num_classes as u32;
                let shift = rng.gen_range(1..c);
                out.labels[i] = (train.labels[i] + shift) % c;
            }
            Task::Noisy => {
                let d = train.dim;
                let row = &mut out.features[i * d..(i + 1) * d];
                for x in row.iter_mut() {
                    *x += rng.sample::<f64, _>(StandardNormal);
                }
                l2_normalize(row);
            }
        }
    }
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str) -> Result<Ingested> {
        ingest_reader(text.as_bytes(), 0)
    }

    #[test]
    fn balanced_power_of_two_is_kept() {
        let got = ingest("f0,f1,label\n1,0,0\n0,1,1\n2,1,0\n1,3,1\n").unwrap();
        assert_eq!(got.data.len(), 4);
        assert_eq!(got.data.labels, vec![0, 1, 0, 1]);
        assert!(got.warnings().is_empty());
        for i in 0..4 {
            let n: f64 = got.data.row(i).iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn five_rows_subsample_to_four_balanced() {
        let got = ingest("f0,f1,label\n1,0,0\n0,1,1\n2,1,0\n1,3,1\n5,2,0\n").unwrap();
        assert_eq!(got.data.len(), 4);
        assert_eq!(got.data.labels.iter().filter(|&&l| l == 0).count(), 2);
        assert_eq!(got.rows_read, 5);
    }

    #[test]
    fn constant_columns_are_dropped() {
        let got = ingest("f0,f1,label\n1,7,0\n2,7,1\n").unwrap();
        assert_eq!(got.dropped_columns, vec![1]);
        assert_eq!(got.data.dim, 1);
        assert_eq!(got.warnings().len(), 1);
        assert!(ingest("f0,label\n1,0\n1,1\n").is_err());
    }

    #[test]
    fn ingest_errors() {
        assert!(ingest("f0,f1,label\n1,0,0\n0,1\n").is_err());
        assert!(ingest("f0,f1,label\n1,0,0\n0,1,1.5\n").is_err());
        assert!(ingest("f0,f1,label\n1,0,1\n0,1,1\n").is_err());
        assert!(ingest("a,b,label\n1,0,0\n0,1,1\n").is_err());
        assert!(ingest("f0,f1,label\n").is_err());
    }

    #[test]
    fn nearest_cosine_label() {
        let anchors = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(nearest_anchor(&anchors, &[0.9, 0.1]), 0);
        assert_eq!(nearest_anchor(&anchors, &[0.1, 0.9]), 1);
    }

    #[test]
    fn synthetic_is_seeded() {
        assert_eq!(synth_gaussian(16, 8, 4, 3, 9).unwrap(), synth_gaussian(16, 8, 4, 3, 9).unwrap());
        assert_ne!(synth_gaussian(16, 8, 4, 3, 9).unwrap(), synth_gaussian(16, 8, 4, 3, 10).unwrap());
        assert!(synth_gaussian(12, 8, 4, 3, 9).is_err());
    }

    #[test]
    fn single_corruption_and_flips() {
        let (train, _) = synth_gaussian(16, 2, 4, 2, 1).unwrap();
        let (bad, mask) = corrupt_dataset(&train, Task::Mislabel, 0.01, 3).unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 1);
        for ((b, t), m) in bad.labels.iter().zip(&train.labels).zip(&mask) {
            assert_eq!(b != t, *m);
        }
        assert_eq!(
            corrupt_dataset(&train, Task::Noisy, 0.25, 5).unwrap(),
            corrupt_dataset(&train, Task::Noisy, 0.25, 5).unwrap()
        );
        assert!(corrupt_dataset(&train, Task::Noisy, 0.0, 5).is_err());
        assert!(corrupt_dataset(&train, Task::Noisy, 0.6, 5).is_err());
    }

    #[test]
    fn prepared_round_trip_is_exact() {
        let (train, _) = synth_gaussian(8, 2, 4, 3, 4).unwrap();
        let dir = std::env::temp_dir().join(format!("zkvalue-prep-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("rows.csv");
        std::fs::write(&p, write_prepared(&train)).unwrap();
        assert_eq!(read_prepared(&p, 3).unwrap(), train);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn padding_keeps_rows() {
        let d = RawDataset::new(3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.6, 0.8], vec![0, 1]).unwrap();
        let p = pad_dimension(&d);
        assert_eq!(p.dim, 4);
        assert_eq!(p.row(1), &[0.0, 0.6, 0.8, 0.0]);
    }
}
