//! Corpus manifest: one CSV row per utterance, `path,speaker,emotion,condition`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Angry,
    Happy,
    Neutral,
    Sad,
    Fearful,
    Disgust,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Angry,
        Emotion::Happy,
        Emotion::Neutral,
        Emotion::Sad,
        Emotion::Fearful,
        Emotion::Disgust,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Angry => "angry",
            Emotion::Happy => "happy",
            Emotion::Neutral => "neutral",
            Emotion::Sad => "sad",
            Emotion::Fearful => "fearful",
            Emotion::Disgust => "disgust",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown emotion label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Clean,
    Noisy,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Clean => "clean",
            Condition::Noisy => "noisy",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub speaker: usize,
    pub emotion: Emotion,
    pub condition: Condition,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_speakers(&self) -> usize {
        self.entries.iter().map(|e| e.speaker + 1).max().unwrap_or(0)
    }

    /// Emotions present, in canonical order.
    pub fn emotions(&self) -> Vec<Emotion> {
        let set: BTreeSet<Emotion> = self.entries.iter().map(|e| e.emotion).collect();
        set.into_iter().collect()
    }

    pub fn with_condition(&self, condition: Condition) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.condition == condition).collect()
    }

    /// Checks dense speaker ids and at least two entries per (speaker, emotion)
    /// cell for every emotion that appears.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Config("manifest has no entries".into()));
        }
        let speakers: BTreeSet<usize> = self.entries.iter().map(|e| e.speaker).collect();
        let k = speakers.len();
        if speakers.iter().copied().ne(0..k) {
            return Err(Error::Config(format!(
                "speaker ids must be dense 0..{k}, found {speakers:?}"
            )));
        }
        let mut cells: BTreeMap<(usize, Emotion), usize> = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.condition == Condition::Clean) {
            *cells.entry((e.speaker, e.emotion)).or_default() += 1;
        }
        for speaker in 0..k {
            for emotion in self.emotions() {
                let n = cells.get(&(speaker, emotion)).copied().unwrap_or(0);
                if n < 2 {
                    return Err(Error::Config(format!(
                        "speaker {speaker} has {n} clean {emotion} entries, need at least 2"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let expected = ["path", "speaker", "emotion", "condition"];
        if headers.iter().map(str::trim).ne(expected) {
            return Err(Error::format(path, format!("expected header {}", expected.join(","))));
        }
        let mut entries = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            let rel = PathBuf::from(field(0));
            let speaker = field(1)
                .parse()
                .map_err(|_| Error::format(path, format!("row {}: bad speaker id", row + 1)))?;
            let emotion = field(2).parse()?;
            let condition = match field(3) {
                "clean" => Condition::Clean,
                "noisy" => Condition::Noisy,
                other => {
                    return Err(Error::format(path, format!("row {}: bad condition {other:?}", row + 1)))
                }
            };
            let path = if rel.is_absolute() { rel } else { base.join(rel) };
            entries.push(ManifestEntry {
                path,
                speaker,
                emotion,
                condition,
            });
        }
        Ok(Self { entries })
    }

    /// Writes the manifest; paths under `base` are stored relative to it.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["path", "speaker", "emotion", "condition"])?;
        for e in &self.entries {
            let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
            writer.write_record([
                rel.to_string_lossy().as_ref(),
                &e.speaker.to_string(),
                e.emotion.as_str(),
                &e.condition.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}
