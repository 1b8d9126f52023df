//! Wavelet-packet cochlear filterbank, cochleagram framing, masked
//! re-synthesis and log spectrograms.

mod cochleagram;
pub mod export;
mod spectrogram;
mod tree;
mod wavelet;

pub use cochleagram::{
    apply_mask_and_resynthesize, cochleagram, frame_count, hamming, Cochleagram, TFMask, DEFAULT_FRAME_LEN,
    DEFAULT_HOP,
};
pub use spectrogram::{spectrogram, spectrogram_with, Spectrogram, LOG_FLOOR, SPEC_HOP, SPEC_WINDOW};
pub use tree::{analyze, build_tree, synthesize, Leaf, Subbands, WptTree, DEFAULT_LEAVES};
pub use wavelet::{qmf_highpass, Wavelet, DB4_LOWPASS};
