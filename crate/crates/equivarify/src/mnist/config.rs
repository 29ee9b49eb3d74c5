//! Key-value run configuration with CLI and file overlays.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mnist::data::RotatePolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub c1: usize,
    pub c2: usize,
    pub c3: usize,
    pub kernel: usize,
    pub pool: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub train_count: usize,
    pub test_count: usize,
    pub rotate_train: RotatePolicy,
    pub rotate_test: RotatePolicy,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            c1: 4,
            c2: 8,
            c3: 8,
            kernel: 3,
            pool: 4,
            lr: 0.05,
            batch: 32,
            epochs: 10,
            seed: 42,
            train_count: 10_000,
            test_count: 2_000,
            rotate_train: RotatePolicy::None,
            rotate_test: RotatePolicy::Random,
        }
    }
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Config::default();
        cfg.apply_pairs(text.lines().filter_map(|l| {
            let l = l.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                return None;
            }
            Some(l.to_string())
        }))?;
        Ok(cfg)
    }

    pub fn apply_pairs(&mut self, pairs: impl IntoIterator<Item = String>) -> Result<()> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("expected key=value, got {pair:?}")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |_: std::num::ParseIntError| Error::Config(format!("bad value {value:?} for {key}"));
        let badf = |_: std::num::ParseFloatError| Error::Config(format!("bad value {value:?} for {key}"));
        match key {
            "c1" => self.c1 = value.parse().map_err(bad)?,
            "c2" => self.c2 = value.parse().map_err(bad)?,
            "c3" => self.c3 = value.parse().map_err(bad)?,
            "kernel" => self.kernel = value.parse().map_err(bad)?,
            "pool" => self.pool = value.parse().map_err(bad)?,
            "lr" => self.lr = value.parse().map_err(badf)?,
            "batch" => self.batch = value.parse().map_err(bad)?,
            "epochs" => self.epochs = value.parse().map_err(bad)?,
            "seed" => self.seed = value.parse().map_err(bad)?,
            "train_count" => self.train_count = value.parse().map_err(bad)?,
            "test_count" => self.test_count = value.parse().map_err(bad)?,
            "rotate_train" => self.rotate_train = value.parse()?,
            "rotate_test" => self.rotate_test = value.parse()?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.c1 == 0 || self.c2 == 0 || self.c3 == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Config("kernel must be odd and positive".into()));
        }
        if self.pool == 0 || 28 % self.pool != 0 {
            return Err(Error::Config("pool must divide 28".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be positive".into()));
        }
        Ok(())
    }

    /// Stable one-line rendering, used in logs and checkpoint headers.
    pub fn render(&self) -> String {
        let items: BTreeMap<&str, String> = BTreeMap::from([
            ("c1", self.c1.to_string()),
            ("c2", self.c2.to_string()),
            ("c3", self.c3.to_string()),
            ("kernel", self.kernel.to_string()),
            ("pool", self.pool.to_string()),
            ("lr", self.lr.to_string()),
            ("batch", self.batch.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("train_count", self.train_count.to_string()),
            ("test_count", self.test_count.to_string()),
            (
                "rotate_train",
                match self.rotate_train {
                    RotatePolicy::None => "none".into(),
                    RotatePolicy::Random => "random".into(),
                },
            ),
            (
                "rotate_test",
                match self.rotate_test {
                    RotatePolicy::None => "none".into(),
                    RotatePolicy::Random => "random".into(),
                },
            ),
        ]);
        items
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
