use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{Cochleagram, TFMask};

/// Local criterion test for one unit: `10·log10(target / noise) ≥ lc_db`.
/// A unit with noise energy 0 is kept when it has any target energy; a
/// silent unit is dropped.
pub fn unit_decision(target: f64, noise: f64, lc_db: f64) -> bool {
    if noise <= 0.0 {
        return target > 0.0;
    }
    if target <= 0.0 {
        return false;
    }
    10.0 * (target / noise).log10() >= lc_db
}

/// Ideal binary mask from time-aligned target and noise cochleagrams.
pub fn ideal_binary_mask(target: &Cochleagram, noise: &Cochleagram, lc_db: f64) -> Result<TFMask> {
    ibm_from_energies(target.energies(), noise.energies(), lc_db)
}

/// [`ideal_binary_mask`] on raw `channels × frames` energy grids.
pub fn ibm_from_energies(target: &[Vec<f64>], noise: &[Vec<f64>], lc_db: f64) -> Result<TFMask> {
    if !lc_db.is_finite() {
        return Err(Error::Domain(format!("local criterion must be finite, got {lc_db}")));
    }
    if target.len() != noise.len() || target.iter().zip(noise).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::Shape("target and noise grids differ in size".into()));
    }
    let rows: Vec<Vec<u8>> = target
        .iter()
        .zip(noise)
        .map(|(t, n)| t.iter().zip(n).map(|(&t, &n)| unit_decision(t, n, lc_db) as u8).collect())
        .collect();
    TFMask::from_rows(&rows)
}

/// Hit rate, false-alarm rate and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitFa {
    pub hit: f64,
    pub fa: f64,
    pub hit_minus_fa: f64,
}

/// HIT = share of truth-1 units marked 1; FA = share of truth-0 units marked 1.
pub fn hit_fa(estimated: &TFMask, truth: &TFMask) -> Result<HitFa> {
    if estimated.channels() != truth.channels() || estimated.frames() != truth.frames() {
        return Err(Error::Shape("masks differ in size".into()));
    }
    hit_fa_rows(
        (0..truth.channels()).map(|c| (estimated.row(c), truth.row(c))),
    )
}

/// HIT−FA restricted to a subset of channels.
pub fn hit_fa_channels(estimated: &TFMask, truth: &TFMask, channels: &[usize]) -> Result<HitFa> {
    if estimated.channels() != truth.channels() || estimated.frames() != truth.frames() {
        return Err(Error::Shape("masks differ in size".into()));
    }
    hit_fa_rows(channels.iter().map(|&c| (estimated.row(c), truth.row(c))))
}

fn hit_fa_rows<'a>(rows: impl Iterator<Item = (&'a [u8], &'a [u8])>) -> Result<HitFa> {
    let (mut tp, mut pos, mut fp, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (est, truth) in rows {
        for (&e, &t) in est.iter().zip(truth) {
            if t == 1 {
                pos += 1;
                tp += e as usize;
            } else {
                neg += 1;
                fp += e as usize;
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "HIT-FA needs both target-dominant and noise-dominant units in the reference".into(),
        ));
    }
    let hit = tp as f64 / pos as f64;
    let fa = fp as f64 / neg as f64;
    Ok(HitFa {
        hit,
        fa,
        hit_minus_fa: hit - fa,
    })
}

/// Fraction of units on which two masks agree.
pub fn agreement(a: &TFMask, b: &TFMask) -> Result<f64> {
    if a.channels() != b.channels() || a.frames() != b.frames() {
        return Err(Error::Shape("masks differ in size".into()));
    }
    let total = a.channels() * a.frames();
    let same = (0..a.channels())
        .map(|c| a.row(c).iter().zip(b.row(c)).filter(|(x, y)| x == y).count())
        .sum::<usize>();
    Ok(same as f64 / total.max(1) as f64)
}
