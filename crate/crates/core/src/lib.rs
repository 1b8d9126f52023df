//! Voice segregation with a wavelet-packet cochleagram and learned binary
//! masks, followed by spectrogram CNN speaker identification.

pub mod audio;
pub mod error;
pub mod eval;
pub mod features;
pub mod filterbank;
pub mod mask;
pub mod neural;
pub mod sid;
mod linalg;

pub use error::{Error, Result};
