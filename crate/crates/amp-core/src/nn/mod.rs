//! Neural-network building blocks: MLP forward/backward, stabilized
//! activations, and the SGD optimizer.

pub mod functions;
pub mod mlp;
pub mod optim;

pub use functions::{log_softmax, logsumexp, logsumexp_rows, sigmoid, sigmoid_scalar, softmax};
pub use mlp::{argmax, Activation, Gradients, MlpModel};
pub use optim::{sgd_step, SgdConfig, SgdState};
