use anyhow::{anyhow, bail, Context};
use cspmi_core::analogy::Metric;
use cspmi_core::synthetic::AnalogyCorpusConfig;
use cspmi_core::{SgnsConfig, Thresholds};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "CSPMI_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CorpusSource {
    /// Whitespace-tokenized text file.
    File { path: PathBuf },
    /// I.i.d. Zipf tokens.
    Zipf {
        vocab_size: usize,
        n_tokens: usize,
        #[serde(default = "default_exponent")]
        exponent: f64,
    },
    /// Templated analogy corpus; its generated set is evaluated unless
    /// `analogy_path` is given.
    Analogy {
        #[serde(flatten)]
        params: AnalogyCorpusConfig,
    },
}

fn default_exponent() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Exact,
    Truncated(usize),
    Sgns,
}

impl FromStr for ModelKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "exact" => Ok(ModelKind::Exact),
            "sgns" => Ok(ModelKind::Sgns),
            _ => {
                let d = s
                    .strip_prefix("truncated:")
                    .ok_or_else(|| anyhow!("unknown model '{s}' (expected exact, truncated:<d> or sgns)"))?;
                let d: usize = d.parse().with_context(|| format!("bad dimension in '{s}'"))?;
                if d == 0 {
                    bail!("truncated dimension must be positive");
                }
                Ok(ModelKind::Truncated(d))
            }
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Exact => f.write_str("exact"),
            ModelKind::Truncated(d) => write!(f, "truncated:{d}"),
            ModelKind::Sgns => f.write_str("sgns"),
        }
    }
}

impl Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    CspmiIdentity,
    EuclidCspmi,
    ShiftedPmi,
    Noise,
    Pennington,
    Analogy,
    SelfCooccurrence,
    Lambda,
}

impl CheckName {
    pub const ALL: [CheckName; 8] = [
        CheckName::CspmiIdentity,
        CheckName::EuclidCspmi,
        CheckName::ShiftedPmi,
        CheckName::Noise,
        CheckName::Pennington,
        CheckName::Analogy,
        CheckName::SelfCooccurrence,
        CheckName::Lambda,
    ];
}

impl FromStr for CheckName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| anyhow!("unknown check '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Declarative description of one run. Nested generator and trainer seeds are
/// replaced by the run seed during resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "one_u64")]
    pub min_count: u64,
    #[serde(default)]
    pub lowercase: bool,
    pub corpus: CorpusSource,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    /// Shift `k` for exact and truncated models; SGNS uses its negative count.
    #[serde(default = "default_shift")]
    pub shift_k: u32,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub sgns: SgnsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analogy_path: Option<PathBuf>,
    #[serde(default)]
    pub metric: Metric,
    /// Candidate pool for analogy solving, by frequency rank.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<usize>,
    #[serde(default = "all_checks")]
    pub checks: Vec<CheckName>,
    #[serde(default = "default_pair_samples")]
    pub pair_samples: usize,
    #[serde(default = "default_noise_bins")]
    pub noise_bins: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn one() -> usize {
    1
}
fn one_u64() -> u64 {
    1
}
fn default_window() -> usize {
    5
}
fn default_model() -> ModelKind {
    ModelKind::Sgns
}
fn default_shift() -> u32 {
    5
}
fn all_checks() -> Vec<CheckName> {
    CheckName::ALL.to_vec()
}
fn default_pair_samples() -> usize {
    10_000
}
fn default_noise_bins() -> usize {
    8
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub window: Option<usize>,
    pub min_count: Option<u64>,
    pub lowercase: bool,
    pub model: Option<ModelKind>,
    pub analogy_path: Option<PathBuf>,
    pub metric: Option<Metric>,
    pub checks: Option<Vec<CheckName>>,
    pub pair_samples: Option<usize>,
}

impl RunConfig {
    /// Reads a TOML config, or the `config` object of a JSON manifest.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            let mut v: serde_json::Value = serde_json::from_str(&text)?;
            let inner = v.get_mut("config").map(serde_json::Value::take).unwrap_or(v);
            serde_json::from_value(inner).with_context(|| format!("invalid manifest {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
        };
        // relative paths are taken from the config's directory
        let base = path.parent().unwrap_or(Path::new("."));
        if let CorpusSource::File { path } = &mut cfg.corpus {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(p) = cfg.analogy_path.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.out_dir {
            self.out_dir = Some(v);
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = o.window {
            self.window = v;
        }
        if let Some(v) = o.min_count {
            self.min_count = v;
        }
        if o.lowercase {
            self.lowercase = true;
        }
        if let Some(v) = o.model {
            self.model = v;
        }
        if let Some(v) = o.analogy_path {
            self.analogy_path = Some(v);
        }
        if let Some(v) = o.metric {
            self.metric = v;
        }
        if let Some(v) = o.checks {
            self.checks = v;
        }
        if let Some(v) = o.pair_samples {
            self.pair_samples = v;
        }
    }

    /// Fills derived fields and validates; errors here belong to the schema stage.
    pub fn resolve(mut self, config_path: Option<&Path>) -> anyhow::Result<Self> {
        if self.out_dir.is_none() {
            let stem = config_path
                .and_then(|p| p.file_stem())
                .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
            let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("cspmi-out"), PathBuf::from);
            self.out_dir = Some(root.join(stem));
        }
        self.sgns.seed = self.seed;
        self.sgns.window = self.window;
        self.sgns.workers = self.workers;
        if self.model == ModelKind::Sgns {
            self.shift_k = self.sgns.negatives;
        }
        if let CorpusSource::Analogy { params } = &mut self.corpus {
            params.seed = self.seed;
        }
        self.checks.sort();
        self.checks.dedup();

        if self.window < 1 {
            bail!("window must be at least 1");
        }
        if self.workers < 1 {
            bail!("workers must be at least 1");
        }
        if self.shift_k < 1 {
            bail!("shift_k must be at least 1");
        }
        if self.noise_bins < 1 {
            bail!("noise_bins must be at least 1");
        }
        if let CorpusSource::File { path } = &self.corpus {
            if !path.is_file() {
                bail!("corpus file not found: {}", path.display());
            }
        }
        if let Some(p) = &self.analogy_path {
            if !p.is_file() {
                bail!("analogy file not found: {}", p.display());
            }
        }
        if self.model == ModelKind::Sgns {
            self.sgns.validate()?;
        }
        Ok(self)
    }

    pub fn out_dir(&self) -> &Path {
        self.out_dir.as_deref().expect("resolved config")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
[corpus]
kind = "zipf"
vocab_size = 50
n_tokens = 1000
"#;

    #[test]
    fn seed_is_mandatory() {
        let err = toml::from_str::<RunConfig>("[corpus]\nkind = \"zipf\"\nvocab_size = 5\nn_tokens = 10\n");
        assert!(err.unwrap_err().to_string().contains("seed"));
    }

    #[test]
    fn defaults_fill_in() {
        let cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.model, ModelKind::Sgns);
        assert_eq!(cfg.pair_samples, 10_000);
        assert_eq!(cfg.checks.len(), CheckName::ALL.len());
    }

    #[test]
    fn model_strings() {
        assert_eq!("truncated:7".parse::<ModelKind>().unwrap(), ModelKind::Truncated(7));
        assert!("truncated:0".parse::<ModelKind>().is_err());
        assert!("svd".parse::<ModelKind>().is_err());
        assert_eq!(ModelKind::Truncated(3).to_string(), "truncated:3");
    }

    #[test]
    fn command_line_wins() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.apply(Overrides { window: Some(2), model: Some(ModelKind::Exact), ..Default::default() });
        assert_eq!(cfg.window, 2);
        assert_eq!(cfg.model, ModelKind::Exact);
    }

    #[test]
    fn missing_analogy_file_names_the_path() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.analogy_path = Some("/nonexistent/questions.txt".into());
        cfg.out_dir = Some("/tmp/x".into());
        let msg = cfg.resolve(None).unwrap_err().to_string();
        assert!(msg.contains("/nonexistent/questions.txt"), "{msg}");
    }

    #[test]
    fn resolved_config_round_trips_as_json() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.out_dir = Some("/tmp/x".into());
        let cfg = cfg.resolve(None).unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
