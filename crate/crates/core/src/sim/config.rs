//! Line-oriented `key = value` configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::code::{load_generator, Code};
use crate::error::{Error, Result};
use crate::selection::SelectionPolicy;

/// Raw configuration: later assignments override earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
            cfg.set(k.trim(), v.trim());
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Config::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad value {v:?} for `{key}`"))),
        }
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| Error::Config(format!("bad value {v:?} for `{key}`")))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// `key = value` lines in key order.
    pub fn echo(&self) -> String {
        self.entries().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Code from `matrix_path` if present, else the built-in named by `code`.
    pub fn code(&self) -> Result<Code> {
        match self.get("matrix_path") {
            Some(p) => load_generator(p),
            None => Code::by_name(self.get("code").unwrap_or("ebch128")),
        }
    }

    /// SNR points from `key`: a single value, a comma-separated list, or an
    /// inclusive `start:stop:step` range.
    pub fn snr_list(&self, key: &str) -> Result<Vec<f64>> {
        parse_snr_list(self.require(key)?)
    }
}

pub fn parse_snr_list(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad SNR list {spec:?}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(Error::Config(format!(
                    "SNR range {spec:?} needs step > 0 and stop >= start"
                )));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // Round to the step grid so 0.1 steps do not accumulate error.
            Ok((0..count)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        [_] => spec.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

/// Parameters of a `simulate` run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub code: Code,
    pub snrs: Vec<f64>,
    pub trials: usize,
    pub l_max: usize,
    pub policies: Vec<SelectionPolicy>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub table_path: Option<PathBuf>,
}

pub const DEFAULT_L_MAX: usize = 2;

impl ExperimentConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let code = cfg.code()?;
        let snrs = cfg.snr_list("ebn0_db")?;
        let trials: usize = cfg.parse_required("trials")?;
        if trials == 0 {
            return Err(Error::Config("`trials` must be at least 1".into()));
        }
        let l_max = cfg.parse_or("l_max", DEFAULT_L_MAX)?;
        if l_max > code.spec.k {
            return Err(Error::Config(format!(
                "l_max = {l_max} exceeds k = {}",
                code.spec.k
            )));
        }
        let tau: Option<f64> = match cfg.get("tau") {
            Some(_) => Some(cfg.parse_required("tau")?),
            None => None,
        };
        let policies = cfg
            .require("policy")?
            .split(',')
            .map(|p| SelectionPolicy::parse(p, tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentConfig {
            code,
            snrs,
            trials,
            l_max,
            policies,
            seed: cfg.parse_or("seed", 1)?,
            output: cfg.get("output").map(PathBuf::from),
            model_path: cfg.get("model_path").map(PathBuf::from),
            table_path: cfg.get("table_path").map(PathBuf::from),
        })
    }
}
