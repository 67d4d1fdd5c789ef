//! AUROC and the append-only metrics log.

use crate::error::{CliError, Result};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use zkvalue_core::valuation::probe::average_ranks;

/// Probability that a random corrupt point scores below a random clean one,
/// ties counting one half.
pub fn auroc(scores: &[f64], corrupt: &[bool]) -> Result<f64> {
    if scores.len() != corrupt.len() {
        return Err(CliError::Metric(format!("{} scores for {} mask bits", scores.len(), corrupt.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(CliError::Metric("NaN score".into()));
    }
    let n1 = corrupt.iter().filter(|&&c| c).count();
    let n0 = corrupt.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(CliError::Metric("mask must flag some but not all points".into()));
    }
    let ranks = average_ranks(scores);
    let clean_rank_sum: f64 = ranks.iter().zip(corrupt).filter(|(_, &c)| !c).map(|(r, _)| r).sum();
    let u = clean_rank_sum - (n0 * (n0 + 1)) as f64 / 2.0;
    Ok(u / (n0 * n1) as f64)
}

/// One `key=value` record; keys keep insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record(pub Vec<(String, String)>);

impl Record {
    pub fn new(kind: &str) -> Self {
        Record(vec![("kind".into(), kind.into())])
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn line(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    }

    pub fn parse(line: &str) -> Result<Self> {
        line.split_whitespace()
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| CliError::Metric(format!("malformed field {kv:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Record)
    }
}

/// Records of one run, each stamped with the config hash.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub config_hash: String,
    pub records: Vec<Record>,
}

impl MetricsReport {
    pub fn new(config_hash: impl Into<String>) -> Self {
        MetricsReport { config_hash: config_hash.into(), records: Vec::new() }
    }

    pub fn push(&mut self, r: Record) {
        let mut fields = vec![("config".to_string(), self.config_hash.clone())];
        fields.extend(r.0);
        self.records.push(Record(fields));
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.get("kind") == Some(kind))
    }

    pub fn lines(&self) -> String {
        self.records.iter().map(|r| r.line() + "\n").collect()
    }

    /// Appends to `path`; earlier records are never rewritten.
    pub fn append_to(&self, path: &Path) -> Result<()> {
        let mut f =
            std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| CliError::io(path, e))?;
        f.write_all(self.lines().as_bytes()).map_err(|e| CliError::io(path, e))
    }

    /// Aligned table, one block per record kind.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let mut kinds: Vec<&str> = Vec::new();
        for r in &self.records {
            let k = r.get("kind").unwrap_or("");
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
        for kind in kinds {
            let rows: Vec<&Record> = self.records.iter().filter(|r| r.get("kind").unwrap_or("") == kind).collect();
            let mut cols: Vec<&str> = Vec::new();
            for r in &rows {
                for (k, _) in &r.0 {
                    if k != "kind" && k != "config" && !cols.contains(&k.as_str()) {
                        cols.push(k);
                    }
                }
            }
            let cell = |r: &Record, c: &str| r.get(c).unwrap_or("-").to_string();
            let widths: Vec<usize> =
                cols.iter().map(|c| rows.iter().map(|r| cell(r, c).len()).max().unwrap_or(0).max(c.len())).collect();
            let _ = writeln!(out, "[{kind}] config {}", self.config_hash);
            let head: Vec<String> = cols.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", head.join("  "));
            for r in rows {
                let cells: Vec<String> = cols.iter().zip(&widths).map(|(c, w)| format!("{:>w$}", cell(r, c))).collect();
                let _ = writeln!(out, "{}", cells.join("  "));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(scores: &[f64], mask: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if mask[i] && !mask[j] {
                    den += 1.0;
                    num += if si < sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.2, 0.9, 0.8], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auroc(&[3.0; 5], &[true, false, false, true, false]).unwrap(), 0.5);
        // corrupt {2, 4} vs clean {1, 3}: only (2, 3) ranks the corrupt point lower
        let hand = auroc(&[1.0, 2.0, 3.0, 4.0], &[false, true, false, true]).unwrap();
        assert_eq!(hand, 0.25);
        assert_eq!(hand, brute(&[1.0, 2.0, 3.0, 4.0], &[false, true, false, true]));
    }

    #[test]
    fn auroc_errors() {
        assert!(auroc(&[1.0, 2.0], &[true, true]).is_err());
        assert!(auroc(&[1.0, 2.0], &[false, false]).is_err());
        assert!(auroc(&[1.0], &[true, false]).is_err());
    }

    #[test]
    fn auroc_matches_pair_count_with_ties() {
        let scores = [0.3, 0.1, 0.3, 0.7, 0.1, 0.5, 0.3];
        let mask = [true, false, false, true, true, false, false];
        assert!((auroc(&scores, &mask).unwrap() - brute(&scores, &mask)).abs() < 1e-12);
    }

    #[test]
    fn records_round_trip_and_table() {
        let mut m = MetricsReport::new("abc");
        m.push(Record::new("quality").with("method", "lsh").with("auroc", 0.75));
        m.push(Record::new("quality").with("method", "knn").with("auroc", 0.8));
        let line = m.records[0].line();
        assert_eq!(line, "config=abc kind=quality method=lsh auroc=0.75");
        assert_eq!(Record::parse(&line).unwrap(), m.records[0]);
        assert_eq!(m.of_kind("quality").count(), 2);
        let t = m.table();
        assert!(t.contains("method") && t.contains("knn"));
    }
}
