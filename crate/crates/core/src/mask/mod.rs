//! Ideal binary masks and their per-channel learned estimate.

mod ibm;
mod model;

pub use ibm::{agreement, hit_fa, hit_fa_channels, ibm_from_energies, ideal_binary_mask, unit_decision, HitFa};
pub use model::{pairs_from_targets, synthetic_training_pairs, tone_training_pairs, train_mask_model, ChannelClassifier, Decision, MaskConfig, MaskModel, Standardizer, CHANNELS};
