//! Flat `key = value` run configuration.

use crate::dataset::Task;
use crate::error::{CliError, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use zkvalue_core::data::DEFAULT_SCALE;
use zkvalue_core::pcs::PcsConfig;
use zkvalue_core::valuation::simhash::HashParams;
use zkvalue_core::valuation::DEFAULT_HARMONIC_SCALE;
use zkvalue_core::witness::{PublicParams, PROTOCOL_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic,
    Csv { train: PathBuf, val: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub workdir: PathBuf,
    pub data: DataSource,
    /// Synthetic sizes; CSV inputs take their sizes from the files.
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub classes: usize,
    pub tables: usize,
    pub depth: usize,
    /// Seeds data generation, hash projections and corruption.
    pub seed: u64,
    /// Seeds commitment salts. Each party would keep its own in a deployment.
    pub salt_seed: u64,
    pub harmonic_scale: u64,
    pub feature_scale: i64,
    pub projection_scale: i64,
    pub providers: usize,
    pub knn_k: usize,
    pub pcs: PcsConfig,
    pub batching: bool,
    pub sparse: bool,
    pub task: Task,
    pub corruption: f64,
    pub bench_seeds: usize,
    pub bench_n_test: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            workdir: PathBuf::from("zkvalue-run"),
            data: DataSource::Synthetic,
            n_train: 2048,
            n_test: 64,
            dim: 16,
            classes: 5,
            tables: 16,
            depth: 8,
            seed: 1,
            salt_seed: 2,
            harmonic_scale: DEFAULT_HARMONIC_SCALE,
            feature_scale: DEFAULT_SCALE,
            projection_scale: DEFAULT_SCALE,
            providers: 4,
            knn_k: 5,
            pcs: PcsConfig::default(),
            batching: true,
            sparse: true,
            task: Task::Mislabel,
            corruption: 0.1,
            bench_seeds: 5,
            bench_n_test: vec![32, 128, 512],
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| CliError::Config { line, msg: format!("{key}: cannot parse {v:?}") })
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(CliError::Config { line, msg: format!("{key}: expected true or false, got {v:?}") }),
    }
}

impl RunConfig {
    /// Parses config text. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        let (mut data_kind, mut train, mut val) = (None, None, None);
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| CliError::Config { line, msg: format!("expected key = value, got {body:?}") })?;
            let (k, v) = (k.trim(), v.trim());
            if seen.insert(k.to_string(), line).is_some() {
                return Err(CliError::Config { line, msg: format!("duplicate key {k}") });
            }
            match k {
                "workdir" => cfg.workdir = resolve(v),
                "data" => data_kind = Some(v.to_string()),
                "train" => train = Some(resolve(v)),
                "val" => val = Some(resolve(v)),
                "n_train" => cfg.n_train = parse_num(line, k, v)?,
                "n_test" => cfg.n_test = parse_num(line, k, v)?,
                "dim" => cfg.dim = parse_num(line, k, v)?,
                "classes" => cfg.classes = parse_num(line, k, v)?,
                "tables" => cfg.tables = parse_num(line, k, v)?,
                "depth" => cfg.depth = parse_num(line, k, v)?,
                "seed" => cfg.seed = parse_num(line, k, v)?,
                "salt_seed" => cfg.salt_seed = parse_num(line, k, v)?,
                "harmonic_scale" => cfg.harmonic_scale = parse_num(line, k, v)?,
                "feature_scale" => cfg.feature_scale = parse_num(line, k, v)?,
                "projection_scale" => cfg.projection_scale = parse_num(line, k, v)?,
                "providers" => cfg.providers = parse_num(line, k, v)?,
                "knn_k" => cfg.knn_k = parse_num(line, k, v)?,
                "pcs_max_vars" => cfg.pcs.max_vars = parse_num(line, k, v)?,
                "pcs_column_checks" => cfg.pcs.num_column_checks = parse_num(line, k, v)?,
                "pcs_log_blowup" => cfg.pcs.log_blowup = parse_num(line, k, v)?,
                "batching" => cfg.batching = parse_bool(line, k, v)?,
                "sparse" => cfg.sparse = parse_bool(line, k, v)?,
                "task" => cfg.task = v.parse().map_err(|msg| CliError::Config { line, msg })?,
                "corruption" => cfg.corruption = parse_num(line, k, v)?,
                "bench_seeds" => cfg.bench_seeds = parse_num(line, k, v)?,
                "bench_n_test" => {
                    cfg.bench_n_test =
                        v.split(',').map(|s| parse_num(line, k, s.trim())).collect::<Result<Vec<usize>>>()?
                }
                _ => return Err(CliError::Config { line, msg: format!("unknown key {k}") }),
            }
        }
        cfg.data = match data_kind.as_deref() {
            None | Some("synthetic") => {
                if train.is_some() || val.is_some() {
                    return Err(CliError::InvalidConfig("train/val paths need data = csv".into()));
                }
                DataSource::Synthetic
            }
            Some("csv") => match (train, val) {
                (Some(train), Some(val)) => DataSource::Csv { train, val },
                _ => return Err(CliError::InvalidConfig("data = csv needs both train and val paths".into())),
            },
            Some(other) => return Err(CliError::InvalidConfig(format!("unknown data source {other:?}"))),
        };
        if !(cfg.corruption > 0.0 && cfg.corruption <= 0.5) {
            return Err(CliError::InvalidConfig(format!("corruption {} outside (0, 0.5]", cfg.corruption)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Canonical text form: every key, fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("workdir", self.workdir.display().to_string());
        match &self.data {
            DataSource::Synthetic => kv("data", "synthetic".into()),
            DataSource::Csv { train, val } => {
                kv("data", "csv".into());
                kv("train", train.display().to_string());
                kv("val", val.display().to_string());
            }
        }
        kv("n_train", self.n_train.to_string());
        kv("n_test", self.n_test.to_string());
        kv("dim", self.dim.to_string());
        kv("classes", self.classes.to_string());
        kv("tables", self.tables.to_string());
        kv("depth", self.depth.to_string());
        kv("seed", self.seed.to_string());
        kv("salt_seed", self.salt_seed.to_string());
        kv("harmonic_scale", self.harmonic_scale.to_string());
        kv("feature_scale", self.feature_scale.to_string());
        kv("projection_scale", self.projection_scale.to_string());
        kv("providers", self.providers.to_string());
        kv("knn_k", self.knn_k.to_string());
        kv("pcs_max_vars", self.pcs.max_vars.to_string());
        kv("pcs_column_checks", self.pcs.num_column_checks.to_string());
        kv("pcs_log_blowup", self.pcs.log_blowup.to_string());
        kv("batching", self.batching.to_string());
        kv("sparse", self.sparse.to_string());
        kv("task", self.task.to_string());
        kv("corruption", self.corruption.to_string());
        kv("bench_seeds", self.bench_seeds.to_string());
        kv("bench_n_test", self.bench_n_test.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
        out
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Public parameters for datasets of the given sizes.
    pub fn public_params(&self, n_train: usize, n_test: usize, dim: usize, classes: usize) -> Result<PublicParams> {
        let hash = HashParams::generate(self.tables, self.depth, dim, self.seed, self.projection_scale)?;
        let pp = PublicParams {
            version: PROTOCOL_VERSION,
            hash,
            harmonic_scale: self.harmonic_scale,
            feature_scale: self.feature_scale,
            num_classes: classes,
            providers: self.providers,
            n_train,
            n_test,
            pcs: self.pcs,
            batching: self.batching,
        };
        pp.validate()?;
        Ok(pp)
    }
}
