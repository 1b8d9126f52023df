//! Learnable building blocks: dense and convolutional layers with
//! backpropagation, Adam, Bernoulli RBMs, a linear SVM, and the binary
//! model container.

mod adam;
mod bundle;
mod cnn;
mod dense;
pub mod gradcheck;
mod rbm;
mod svm;
mod tensor;

pub use adam::Adam;
pub use bundle::{ModelBundle, Persist, MAGIC, VERSION};
pub use cnn::{Conv2d, Layer, Sequential, Trace};
pub use dense::{sigmoid, softmax_rows, softplus, Activation, Dense, DenseGrad, Head, Loss, Mlp, MlpGrad};
pub use rbm::{init_mlp_from_rbms, mlp_from_rbms, Rbm};
pub use svm::{objective as svm_objective, svm_train, LinearSvm, SvmConfig};
pub use tensor::Tensor;
