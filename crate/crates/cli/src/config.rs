//! Flat `key = value` experiment configuration.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use itsforge_core::firefly::{FaConfig, Neighbourhood};
use itsforge_core::forecast::{Method, EMBEDDING_ORDER};
use itsforge_core::interval::{ColumnMap, Scale};
use sha2::{Digest, Sha256};

pub const CONFIG_ENV: &str = "ITSFORGE_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Persistence,
    Univariate,
}

impl Baseline {
    pub fn method(self) -> Method {
        match self {
            Baseline::Persistence => Method::Persistence,
            Baseline::Univariate => Method::Univariate,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Baseline::Persistence => "persistence",
            Baseline::Univariate => "univariate",
        }
    }
}

impl FromStr for Baseline {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "persistence" => Ok(Baseline::Persistence),
            "univariate" => Ok(Baseline::Univariate),
            other => bail!("unknown baseline {other:?} (expected persistence or univariate)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// OHLC CSV. `None` selects the bundled synthetic fixture.
    pub data: Option<PathBuf>,
    pub columns: ColumnMap,
    pub scale: Scale,
    pub order: usize,
    pub horizons: Vec<usize>,
    pub population: usize,
    pub gamma: f64,
    pub beta0: f64,
    pub alpha: f64,
    pub generations: usize,
    pub bounds: (f64, f64),
    pub neighbourhood: Neighbourhood,
    pub replications: usize,
    pub k_values: Vec<usize>,
    pub cost: f64,
    pub tukey_alpha: f64,
    pub baselines: Vec<Baseline>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fa = FaConfig::hyper_search(0);
        Self {
            data: None,
            columns: ColumnMap::default(),
            scale: Scale::Log,
            order: EMBEDDING_ORDER,
            horizons: vec![1, 3, 5],
            population: fa.population,
            gamma: fa.gamma,
            beta0: fa.beta0,
            alpha: fa.alpha,
            generations: fa.max_generations,
            bounds: fa.bounds[0],
            neighbourhood: fa.neighbourhood,
            replications: 50,
            k_values: vec![1, 2, 3],
            cost: 0.001,
            tukey_alpha: 0.05,
            baselines: vec![Baseline::Persistence],
            seed: 0,
        }
    }
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("{s:?}: {e}")))
        .collect()
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Reads `path` on top of the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    /// Applies every `key = value` line. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", i + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| v.parse::<f64>().with_context(|| format!("{key}: bad number {v:?}"));
        let count = |v: &str| v.parse::<usize>().with_context(|| format!("{key}: bad count {v:?}"));
        match key {
            "data" => self.data = (!value.is_empty()).then(|| PathBuf::from(value)),
            "date_column" => self.columns.date = value.into(),
            "open_column" => self.columns.open = value.into(),
            "high_column" => self.columns.high = value.into(),
            "low_column" => self.columns.low = value.into(),
            "close_column" => self.columns.close = value.into(),
            "scale" => self.scale = value.parse()?,
            "order" => self.order = count(value)?,
            "horizons" => self.horizons = list(value)?,
            "population" => self.population = count(value)?,
            "gamma" => self.gamma = num(value)?,
            "beta0" => self.beta0 = num(value)?,
            "alpha" => self.alpha = num(value)?,
            "generations" => self.generations = count(value)?,
            "bounds" => {
                let b: Vec<f64> = list(value)?;
                let [lo, hi] = b[..] else {
                    bail!("bounds: expected low,high");
                };
                self.bounds = (lo, hi);
            }
            "neighbourhood" => {
                self.neighbourhood = match value {
                    "all" => Neighbourhood::All,
                    "earlier" => Neighbourhood::Earlier,
                    other => bail!("neighbourhood: expected all or earlier, got {other:?}"),
                }
            }
            "replications" => self.replications = count(value)?,
            "k" => self.k_values = list(value)?,
            "cost" => self.cost = num(value)?,
            "tukey_alpha" => self.tukey_alpha = num(value)?,
            "baselines" => self.baselines = if value == "none" { Vec::new() } else { list(value)? },
            "seed" => self.seed = value.parse().with_context(|| format!("seed: bad value {value:?}"))?,
            other => bail!("unknown key {other:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            bail!("order must be at least 1");
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            bail!("horizons must be a non-empty list of positive steps");
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            bail!("k must be a non-empty list of positive counts");
        }
        if self.replications == 0 {
            bail!("replications must be at least 1");
        }
        if !(0.0..1.0).contains(&self.cost) {
            bail!("cost {} outside [0, 1)", self.cost);
        }
        self.fa_config(0).validate()?;
        Ok(())
    }

    /// Firefly settings for one replicate.
    pub fn fa_config(&self, seed: u64) -> FaConfig {
        FaConfig {
            population: self.population,
            gamma: self.gamma,
            beta0: self.beta0,
            alpha: self.alpha,
            max_generations: self.generations,
            bounds: vec![self.bounds; 3],
            neighbourhood: self.neighbourhood,
            seed,
        }
    }

    /// FA-MSVR followed by the configured baselines, duplicates removed.
    pub fn methods(&self) -> Vec<Method> {
        let mut out = vec![Method::Msvr];
        for b in &self.baselines {
            if !out.contains(&b.method()) {
                out.push(b.method());
            }
        }
        out
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_string().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Canonical form; parsing it back reproduces the config exactly.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let neighbourhood = match self.neighbourhood {
            Neighbourhood::All => "all",
            Neighbourhood::Earlier => "earlier",
        };
        let baselines = if self.baselines.is_empty() {
            "none".to_string()
        } else {
            self.baselines.iter().map(|b| b.name()).collect::<Vec<_>>().join(",")
        };
        writeln!(f, "data = {data}")?;
        writeln!(f, "date_column = {}", self.columns.date)?;
        writeln!(f, "open_column = {}", self.columns.open)?;
        writeln!(f, "high_column = {}", self.columns.high)?;
        writeln!(f, "low_column = {}", self.columns.low)?;
        writeln!(f, "close_column = {}", self.columns.close)?;
        writeln!(f, "scale = {}", self.scale)?;
        writeln!(f, "order = {}", self.order)?;
        writeln!(f, "horizons = {}", join(&self.horizons))?;
        writeln!(f, "population = {}", self.population)?;
        writeln!(f, "gamma = {}", self.gamma)?;
        writeln!(f, "beta0 = {}", self.beta0)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "generations = {}", self.generations)?;
        writeln!(f, "bounds = {},{}", self.bounds.0, self.bounds.1)?;
        writeln!(f, "neighbourhood = {neighbourhood}")?;
        writeln!(f, "replications = {}", self.replications)?;
        writeln!(f, "k = {}", join(&self.k_values))?;
        writeln!(f, "cost = {}", self.cost)?;
        writeln!(f, "tukey_alpha = {}", self.tukey_alpha)?;
        writeln!(f, "baselines = {baselines}")?;
        writeln!(f, "seed = {}", self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("horizons = 2,4\nalpha = 0.1\nbaselines = univariate,persistence\nseed = 99\ndata = x.csv")
            .unwrap();
        let mut back = ExperimentConfig::default();
        back.apply_text(&cfg.to_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.fingerprint(), cfg.fingerprint());
        let mut none = ExperimentConfig::default();
        none.set("baselines", "none").unwrap();
        let mut again = ExperimentConfig::default();
        again.apply_text(&none.to_string()).unwrap();
        assert!(again.baselines.is_empty());
    }

    #[test]
    fn rejects_unknown_keys_with_line_numbers() {
        let err = ExperimentConfig::default().apply_text("# c\n\nbogus = 1").unwrap_err();
        assert!(format!("{err:#}").contains("line 3"));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
