//! Wavelet-packet tree with an arbitrary leaf set, analysis into full-rate
//! band components and synthesis back to the time domain.

use serde::{Deserialize, Serialize};

use super::wavelet::Wavelet;
use crate::audio::{AudioSignal, PIPELINE_RATE};
use crate::error::{Error, Result};

/// A leaf addressed by depth and its position in frequency order at that depth
/// (position 0 is the lowest band).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub depth: u32,
    pub band: u32,
}

/// Default 18-channel leaf set, lowest band first: 250 Hz bands up to 2 kHz,
/// 500 Hz bands up to 6 kHz, then two 1 kHz bands (at 16 kHz sampling).
pub const DEFAULT_LEAVES: [Leaf; 18] = [
    Leaf { depth: 5, band: 0 },
    Leaf { depth: 5, band: 1 },
    Leaf { depth: 5, band: 2 },
    Leaf { depth: 5, band: 3 },
    Leaf { depth: 5, band: 4 },
    Leaf { depth: 5, band: 5 },
    Leaf { depth: 5, band: 6 },
    Leaf { depth: 5, band: 7 },
    Leaf { depth: 4, band: 4 },
    Leaf { depth: 4, band: 5 },
    Leaf { depth: 4, band: 6 },
    Leaf { depth: 4, band: 7 },
    Leaf { depth: 4, band: 8 },
    Leaf { depth: 4, band: 9 },
    Leaf { depth: 4, band: 10 },
    Leaf { depth: 4, band: 11 },
    Leaf { depth: 3, band: 6 },
    Leaf { depth: 3, band: 7 },
];

/// Natural (filtering-order) index of the node holding frequency band `band`
/// at `depth`. High-pass branches mirror the spectrum, so the mapping is a
/// Gray-code walk.
fn natural_index(depth: u32, band: u32) -> u32 {
    let mut reversed = 0;
    let mut natural = 0;
    for level in (0..depth).rev() {
        let phys = (band >> level) & 1;
        let bit = phys ^ reversed;
        natural = (natural << 1) | bit;
        reversed ^= bit;
    }
    natural
}

/// Wavelet, leaf set and derived channel geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct WptTree {
    wavelet: Wavelet,
    leaves: Vec<Leaf>,
    /// Natural index for each leaf, same order as `leaves`.
    paths: Vec<u32>,
    max_depth: u32,
    sample_rate: u32,
}

/// The default db4 tree over [`DEFAULT_LEAVES`].
pub fn build_tree() -> WptTree {
    WptTree::new(Wavelet::db4(), DEFAULT_LEAVES.to_vec(), PIPELINE_RATE)
        .expect("default leaf set tiles the spectrum")
}

impl WptTree {
    /// Builds a tree from leaves given in increasing frequency order. The
    /// leaves must tile [0, fs/2] without gaps or overlaps.
    pub fn new(wavelet: Wavelet, leaves: Vec<Leaf>, sample_rate: u32) -> Result<Self> {
        if leaves.is_empty() {
            return Err(Error::Config("leaf set is empty".into()));
        }
        let max_depth = leaves.iter().map(|l| l.depth).max().unwrap_or(0);
        if max_depth > 12 {
            return Err(Error::Config(format!("tree depth {max_depth} is too deep")));
        }
        // walk the tiling on the finest grid
        let mut cursor = 0u64;
        for leaf in &leaves {
            if leaf.band >= 1 << leaf.depth {
                return Err(Error::Config(format!("leaf {leaf:?} outside its level")));
            }
            let scale = 1u64 << (max_depth - leaf.depth);
            let start = leaf.band as u64 * scale;
            if start != cursor {
                return Err(Error::Config(format!(
                    "leaf {leaf:?} leaves a gap or overlaps (expected start {cursor}, got {start})"
                )));
            }
            cursor = start + scale;
        }
        if cursor != 1 << max_depth {
            return Err(Error::Config("leaves do not reach the Nyquist frequency".into()));
        }
        let paths = leaves.iter().map(|l| natural_index(l.depth, l.band)).collect();
        Ok(Self {
            wavelet,
            leaves,
            paths,
            max_depth,
            sample_rate,
        })
    }

    pub fn wavelet(&self) -> &Wavelet {
        &self.wavelet
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn n_channels(&self) -> usize {
        self.leaves.len()
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// (low, high) band edges of each channel in Hz.
    pub fn band_edges(&self) -> Vec<(f64, f64)> {
        let nyquist = self.sample_rate as f64 / 2.0;
        self.leaves
            .iter()
            .map(|l| {
                let width = nyquist / (1u64 << l.depth) as f64;
                (l.band as f64 * width, (l.band + 1) as f64 * width)
            })
            .collect()
    }

    pub fn center_frequencies(&self) -> Vec<f64> {
        self.band_edges().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.band_edges().iter().map(|(lo, hi)| hi - lo).collect()
    }

    /// Length after reflect padding to a multiple of `2^max_depth`.
    pub fn padded_len(&self, len: usize) -> usize {
        let block = 1usize << self.max_depth;
        len.div_ceil(block).max(1) * block
    }

    /// Leaf coefficients (frequency order) of a signal whose length is a
    /// multiple of `2^max_depth`.
    pub fn decompose(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.leaves.len()];
        self.decompose_node(x.to_vec(), 0, 0, &mut out);
        out
    }

    fn decompose_node(&self, x: Vec<f64>, depth: u32, natural: u32, out: &mut [Vec<f64>]) {
        if let Some(slot) = self.slot_of(depth, natural) {
            out[slot] = x;
            return;
        }
        let (lo, hi) = self.wavelet.split(&x);
        drop(x);
        self.decompose_node(lo, depth + 1, natural << 1, out);
        self.decompose_node(hi, depth + 1, (natural << 1) | 1, out);
    }

    fn slot_of(&self, depth: u32, natural: u32) -> Option<usize> {
        self.leaves
            .iter()
            .zip(&self.paths)
            .position(|(l, &p)| l.depth == depth && p == natural)
    }

    /// Inverse of [`WptTree::decompose`].
    pub fn reconstruct(&self, leaves: &[Vec<f64>]) -> Vec<f64> {
        self.reconstruct_node(leaves, 0, 0)
    }

    fn reconstruct_node(&self, leaves: &[Vec<f64>], depth: u32, natural: u32) -> Vec<f64> {
        if let Some(slot) = self.slot_of(depth, natural) {
            return leaves[slot].clone();
        }
        let lo = self.reconstruct_node(leaves, depth + 1, natural << 1);
        let hi = self.reconstruct_node(leaves, depth + 1, (natural << 1) | 1);
        self.wavelet.merge(Some(&lo), Some(&hi))
    }

    /// Coefficients of a single leaf, following only its branch of the tree.
    fn leaf_coefficients(&self, x: &[f64], channel: usize) -> Vec<f64> {
        let depth = self.leaves[channel].depth;
        let path = self.paths[channel];
        let mut cur = x.to_vec();
        for level in (0..depth).rev() {
            cur = self.wavelet.split_one(&cur, (path >> level) & 1 == 1);
        }
        cur
    }

    /// Time-domain signal carried by one leaf's coefficients alone.
    fn leaf_signal(&self, coeffs: &[f64], channel: usize) -> Vec<f64> {
        let depth = self.leaves[channel].depth;
        let path = self.paths[channel];
        let mut cur = coeffs.to_vec();
        for level in 0..depth {
            cur = if (path >> level) & 1 == 1 {
                self.wavelet.merge(None, Some(&cur))
            } else {
                self.wavelet.merge(Some(&cur), None)
            };
        }
        cur
    }
}

fn reflect_pad(x: &[f64], len: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![0.0; len];
    }
    if n == 1 {
        return vec![x[0]; len];
    }
    let period = 2 * (n - 1);
    (0..len)
        .map(|i| {
            let m = i % period;
            x[if m < n { m } else { period - m }]
        })
        .collect()
}

/// Full-rate band components of a signal: `components[c]` is the part of the
/// (padded) input that lives in channel `c`'s leaf. Components are mutually
/// orthogonal and sum to the padded input.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    components: Vec<Vec<f64>>,
    len: usize,
    sample_rate: u32,
}

impl Subbands {
    /// Wraps externally built components. Each must have the padded length.
    pub fn from_components(components: Vec<Vec<f64>>, len: usize, sample_rate: u32) -> Result<Self> {
        let padded = components.first().map_or(0, Vec::len);
        if padded < len || components.iter().any(|c| c.len() != padded) {
            return Err(Error::Shape("subband components must share one padded length".into()));
        }
        Ok(Self {
            components,
            len,
            sample_rate,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.components.len()
    }

    /// Length of the original (unpadded) signal.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn padded_len(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Channel `c` over the original signal span.
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.components[c][..self.len]
    }

    /// Channel `c` including the padded tail.
    pub fn padded_channel(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    pub fn padded_channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.components[c]
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.n_channels())
            .map(|c| self.channel(c).iter().map(|v| v * v).sum())
            .collect()
    }
}

/// Splits `sig` into the tree's band components.
pub fn analyze(sig: &AudioSignal, tree: &WptTree) -> Subbands {
    let padded = reflect_pad(sig.samples(), tree.padded_len(sig.len()));
    let leaves = tree.decompose(&padded);
    let components = leaves
        .iter()
        .enumerate()
        .map(|(c, coeffs)| tree.leaf_signal(coeffs, c))
        .collect();
    Subbands {
        components,
        len: sig.len(),
        sample_rate: sig.sample_rate(),
    }
}

/// Projects every (possibly modified) component back onto its own leaf and
/// runs the synthesis tree over the resulting coefficients.
pub fn synthesize(subbands: &Subbands, tree: &WptTree) -> Result<AudioSignal> {
    if subbands.n_channels() != tree.n_channels() {
        return Err(Error::Shape(format!(
            "expected {} channels, got {}",
            tree.n_channels(),
            subbands.n_channels()
        )));
    }
    let padded = subbands.padded_len();
    if padded != tree.padded_len(subbands.len) {
        return Err(Error::Shape(format!(
            "component length {padded} does not match the tree padding of {}",
            subbands.len
        )));
    }
    let leaves: Vec<Vec<f64>> = (0..tree.n_channels())
        .map(|c| tree.leaf_coefficients(subbands.padded_channel(c), c))
        .collect();
    let mut out = tree.reconstruct(&leaves);
    out.truncate(subbands.len);
    AudioSignal::new(out, subbands.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> AudioSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AudioSignal::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 16_000).unwrap()
    }

    fn tone(freq: f64, len: usize) -> AudioSignal {
        let x = (0..len)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin())
            .collect();
        AudioSignal::new(x, 16_000).unwrap()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = a.iter().map(|x| x * x).sum();
        (num / den).sqrt()
    }

    #[test]
    fn default_tree_has_eighteen_ordered_channels() {
        let tree = build_tree();
        assert_eq!(tree.n_channels(), 18);
        let centers = tree.center_frequencies();
        assert!(centers.windows(2).all(|w| w[1] > w[0]));
        assert!(centers[0] >= 50.0 && centers[0] <= 250.0);
        let edges = tree.band_edges();
        assert_eq!(edges[0].0, 0.0);
        assert_eq!(edges[17].1, 8000.0);
        assert!(edges.windows(2).all(|w| w[0].1 == w[1].0));
        assert!(edges.iter().any(|e| e.1 >= 4000.0));
        let bw = tree.bandwidths();
        assert!(bw.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn gray_walk_matches_spectrum_mirroring() {
        // depth 2: frequency order [LL, LH, HH, HL] in natural indices [0, 1, 3, 2]
        assert_eq!((0..4).map(|b| natural_index(2, b)).collect::<Vec<_>>(), vec![0, 1, 3, 2]);
    }

    #[test]
    fn invalid_leaf_sets_are_rejected() {
        let gap = vec![Leaf { depth: 1, band: 0 }];
        assert!(WptTree::new(Wavelet::db4(), gap, 16_000).is_err());
        let overlap = vec![Leaf { depth: 1, band: 0 }, Leaf { depth: 2, band: 1 }, Leaf { depth: 1, band: 1 }];
        assert!(WptTree::new(Wavelet::db4(), overlap, 16_000).is_err());
    }

    #[test]
    fn zero_signal_gives_zero_subbands() {
        let tree = build_tree();
        let sb = analyze(&AudioSignal::zeros(1000, 16_000), &tree);
        assert_eq!(sb.n_channels(), 18);
        assert!((0..18).all(|c| sb.channel(c).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn energy_is_conserved_for_aligned_lengths() {
        let tree = build_tree();
        let x = noise(4096, 1);
        let total: f64 = analyze(&x, &tree).energies().iter().sum();
        assert!((total - x.energy()).abs() <= 1e-6 * x.energy());
    }

    #[test]
    fn round_trip_with_padding() {
        let tree = build_tree();
        for len in [1usize, 31, 1000, 4097] {
            let x = noise(len, len as u64);
            let y = synthesize(&analyze(&x, &tree), &tree).unwrap();
            assert_eq!(y.len(), len);
            assert!(rel_err(x.samples(), y.samples()) <= 1e-6, "len {len}");
        }
    }

    #[test]
    fn components_sum_to_input() {
        let tree = build_tree();
        let x = noise(2000, 3);
        let sb = analyze(&x, &tree);
        for i in 0..x.len() {
            let s: f64 = (0..18).map(|c| sb.channel(c)[i]).sum();
            assert!((s - x.samples()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn low_tone_lands_in_lowest_channel() {
        let tree = build_tree();
        let e = analyze(&tone(100.0, 16_000), &tree).energies();
        let total: f64 = e.iter().sum();
        assert!(e[0] / total >= 0.9, "fraction {}", e[0] / total);
    }

    #[test]
    fn single_channel_synthesis_matches_component() {
        let tree = build_tree();
        let x = noise(4096, 5);
        let sb = analyze(&x, &tree);
        for c in [0usize, 7, 12, 17] {
            let mut only = sb.clone();
            for k in (0..18).filter(|&k| k != c) {
                only.padded_channel_mut(k).iter_mut().for_each(|v| *v = 0.0);
            }
            let y = synthesize(&only, &tree).unwrap();
            assert!(rel_err(sb.channel(c), y.samples()) < 1e-9);
            let ey: f64 = y.energy();
            assert!((ey - sb.energies()[c]).abs() <= 1e-6 * ey.max(1e-12));
        }
    }

    #[test]
    fn wrong_channel_count_is_a_shape_error() {
        let tree = build_tree();
        let sb = analyze(&noise(64, 1), &tree);
        let trimmed = Subbands::from_components(sb.components[..17].to_vec(), sb.len, 16_000).unwrap();
        assert!(matches!(synthesize(&trimmed, &tree), Err(Error::Shape(_))));
    }
}
