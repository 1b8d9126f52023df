//! Pipeline configuration: one TOML document with dotted section keys,
//! optionally overridden by `--set key=value` flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use casa_core::audio::{Emotion, NoiseKind};
use casa_core::eval::ExperimentConfig;
use casa_core::mask::MaskConfig;
use casa_core::sid::{TrainConfig, VggConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSection {
    pub speakers: usize,
    pub emotions: Vec<Emotion>,
    pub utterances: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            speakers: 8,
            emotions: Emotion::ALL.to_vec(),
            utterances: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskTrainingSection {
    /// Number of (speech, noise) mixtures built from the manifest.
    pub pairs: usize,
    /// Noise families used in turn.
    pub noise: Vec<String>,
}

impl Default for MaskTrainingSection {
    fn default() -> Self {
        Self {
            pairs: 100,
            noise: vec!["white".into()],
        }
    }
}

impl MaskTrainingSection {
    pub fn kinds(&self) -> Result<Vec<NoiseKind>> {
        Ok(self.noise.iter().map(|n| NoiseKind::parse(n)).collect::<Result<_, _>>()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SidSection {
    pub arch: VggConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    /// Copied into every section's seed.
    pub seed: u64,
    pub corpus: CorpusSection,
    pub mask: MaskConfig,
    pub mask_training: MaskTrainingSection,
    pub sid: SidSection,
    pub experiment: ExperimentConfig,
}

impl PipelineConfig {
    /// Reads `path` (or starts from defaults), applies `key=value` overrides
    /// and the seed flag, rejects unknown keys and validates every section.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                text.parse::<Table>()
                    .map_err(|e| anyhow::anyhow!("{}: {}", p.display(), one_line(&e.to_string())))?
            }
            None => Table::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .with_context(|| format!("override {item:?} is not key=value"))?;
            set_path(&mut table, key.trim(), parse_value(value.trim()))?;
        }
        if let Some(s) = seed {
            table.insert("seed".into(), Value::Integer(s as i64));
        }
        // nested sections fall back to the pipeline defaults, not to each
        // struct's own defaults
        let mut merged = Value::try_from(PipelineConfig::default()).context("cannot serialize defaults")?;
        check_known(&table, &merged, "")?;
        merge(&mut merged, Value::Table(table));
        let mut cfg: PipelineConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| anyhow::anyhow!("invalid config: {}", one_line(&e.to_string())))?;
        cfg.apply_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_seed(&mut self) {
        self.mask.seed = self.seed;
        self.sid.train.seed = self.seed;
        self.experiment.seed = self.seed;
        self.experiment.train.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.speakers < 2 || self.corpus.utterances < 2 || self.corpus.emotions.is_empty() {
            bail!("corpus needs at least two speakers, two utterances per cell and one emotion");
        }
        if self.mask_training.pairs == 0 {
            bail!("mask_training.pairs must be positive");
        }
        if self.mask_training.kinds()?.is_empty() {
            bail!("mask_training.noise must list at least one noise kind");
        }
        self.mask.validate().context("[mask]")?;
        self.sid.arch.validate().context("[sid.arch]")?;
        self.sid.train.validate().context("[sid.train]")?;
        self.experiment.validate().context("[experiment]")?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// TOML literal when it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("malformed key {key:?}");
    }
    let mut t = table;
    for part in &parts[..parts.len() - 1] {
        let entry = t.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = match entry {
            Value::Table(inner) => inner,
            _ => bail!("{key:?}: {part:?} is not a section"),
        };
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn check_known(given: &Table, known: &Value, prefix: &str) -> Result<()> {
    for (k, v) in given {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let Some(reference) = known.get(k) else {
            bail!("unknown config key {path:?}");
        };
        if let (Value::Table(inner), Value::Table(_)) = (v, reference) {
            check_known(inner, reference, &path)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::load(None, &[], None).unwrap();
        assert_eq!(cfg.sid.train.epochs, 25);
        assert_eq!(cfg.sid.train.lr, 4e-5);
        assert_eq!(cfg.mask.lc_db, 0.0);
        let f = write(&cfg.to_toml().unwrap());
        assert_eq!(PipelineConfig::load(Some(f.path()), &[], None).unwrap(), cfg);
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let f = write("seed = 3\nmask.lc_db = -5.0\nsid.train.epochs = 4\n[experiment]\nnoise = \"pink\"\n");
        let cfg = PipelineConfig::load(
            Some(f.path()),
            &["sid.train.lr=0.01".into(), "experiment.noise=none".into()],
            Some(9),
        )
        .unwrap();
        assert_eq!(cfg.mask.lc_db, -5.0);
        assert_eq!(cfg.sid.train.epochs, 4);
        assert_eq!(cfg.sid.train.lr, 0.01);
        assert_eq!(cfg.experiment.noise, "none");
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.mask.seed, 9);
        assert_eq!(cfg.experiment.train.seed, 9);
    }

    #[test]
    fn partial_sections_keep_pipeline_defaults() {
        let cfg = PipelineConfig::load(None, &["mask.svm.c=5".into()], None).unwrap();
        assert_eq!(cfg.mask.svm.c, 5.0);
        assert_eq!(cfg.mask.svm.balanced, MaskConfig::default().svm.balanced);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in ["mask.lcdb = 1.0", "sid.train.epochs = 0", "mask.lc_db = \"high\"", "experiment.noise = \"purple\""] {
            let f = write(text);
            assert!(PipelineConfig::load(Some(f.path()), &[], None).is_err(), "{text}");
        }
        assert!(PipelineConfig::load(None, &["mask.hop".into()], None).is_err());
        assert!(PipelineConfig::load(None, &["mask.lc_db.x=1".into()], None).is_err());
    }
}
