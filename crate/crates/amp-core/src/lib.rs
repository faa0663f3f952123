//! Anchored neural networks for out-of-distribution detection, at desk scale.
//!
//! The pieces, bottom to top:
//!
//! - [`tensor`]: dense row-major matrices ([`Tensor2D`]).
//! - [`nn`]: a configurable ReLU MLP with exact backpropagation,
//!   cross-entropy loss, and SGD with momentum / weight decay / step LR.
//! - [`anchoring`]: the coordinate transform `x -> [c, x - c]`, in-batch
//!   anchor shuffling, the consistency transform schedule, and the training
//!   loops.
//! - [`scoring`]: K-anchor marginalized inference, heteroscedastic
//!   temperature scaling, the AMP score, and logit baselines (MSP, entropy,
//!   energy).
//! - [`metrics`]: FPR95, AUROC, AUPR (In/Out), and detection accuracy over
//!   two score populations.
//! - [`ntk`]: the analytic two-layer ReLU tangent kernel, its Monte-Carlo
//!   estimate, infinite-width kernel regression, the anchored kernel with
//!   its correction term, and gram spectra.
//! - [`datasets`]: seeded synthetic generators (two moons, Gaussian blobs,
//!   OOD ring) plus graded corruptions and normalization.
//! - [`checkpoint`]: bit-exact binary model serialization.
//! - [`seeding`]: the single-seed derivation scheme every random stream
//!   hangs off.
//!
//! Everything is deterministic given its seeds: rerunning any pipeline with
//! the same configuration reproduces results bit for bit on one platform.

pub mod anchoring;
pub mod checkpoint;
pub mod datasets;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod ntk;
pub mod scoring;
pub mod seeding;
pub mod tensor;

pub use error::{AmpError, Result};
pub use tensor::Tensor2D;
