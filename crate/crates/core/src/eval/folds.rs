use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::audio::synth::shuffled;
use crate::audio::{CorpusManifest, Emotion};
use crate::error::{Error, Result};

/// Fold index of every manifest entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Folds {
    pub k: usize,
    pub assignment: Vec<usize>,
    /// True when every (speaker, emotion) cell was stratified, false when
    /// stratification fell back to speakers only.
    pub by_emotion: bool,
}

impl Folds {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.assignment {
            s[f] += 1;
        }
        s
    }
}

/// Stratified k-fold split. Entries are grouped by (speaker, emotion) when
/// every such cell holds at least `k` entries, otherwise by speaker alone.
/// Each group is shuffled and dealt round-robin, continuing where the
/// previous group stopped, so fold sizes and per-speaker counts differ by at
/// most one.
pub fn kfold_split(manifest: &CorpusManifest, k: usize, seed: u64) -> Result<Folds> {
    if k < 2 {
        return Err(Error::Config(format!("need at least two folds, got {k}")));
    }
    if manifest.len() < k {
        return Err(Error::DegenerateInput(format!(
            "{} entries cannot fill {k} folds",
            manifest.len()
        )));
    }
    let mut cells: BTreeMap<(usize, Emotion), Vec<usize>> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        cells.entry((e.speaker, e.emotion)).or_default().push(i);
    }
    let by_emotion = cells.values().all(|v| v.len() >= k);
    let groups: Vec<Vec<usize>> = if by_emotion {
        cells.into_values().collect()
    } else {
        warn!("some speaker/emotion cells hold fewer than {k} entries; stratifying by speaker only");
        let mut by_speaker: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, e) in manifest.entries.iter().enumerate() {
            by_speaker.entry(e.speaker).or_default().push(i);
        }
        by_speaker.into_values().collect()
    };

    let mut assignment = vec![0; manifest.len()];
    let mut next = 0;
    for (g, members) in groups.iter().enumerate() {
        for i in shuffled(members, seed.wrapping_add(g as u64)) {
            assignment[i] = next % k;
            next += 1;
        }
    }
    Ok(Folds {
        k,
        assignment,
        by_emotion,
    })
}
