//! Probabilistic deep hashing.
//!
//! A network emits per-bit log-likelihood ratios `x`; the bit posteriors are
//! `q = 1 / (1 + e^x)`. Training minimises an N-pair contrastive loss over
//! expected Hamming distances between posterior vectors, and retrieval uses
//! the Hamming distance between codes thresholded at `q >= 0.5`, which is the
//! MAP estimate of the ideal hash distance.
//!
//! Module map:
//!
//! - [`numerics`]: matrices, PRNG, SGD, finite differences.
//! - [`model`]: the likelihood estimator with hand-written backprop and the
//!   `PDHM` checkpoint format.
//! - [`loss`]: expected Hamming distance and the N-pair contrastive loss.
//! - [`trainer`]: datasets (`PDHD`, MNIST IDX), pair sampling, augmentation,
//!   the training loop.
//! - [`codec`]: binarization, packed codes, top-k search, the `PDHC` format.
//! - [`eval`]: mAP and precision@k.
//! - [`oracle`]: ideal hash families, exact Bayes posteriors on discrete
//!   worlds, the MAP-equivalence scan.
//! - [`gradcheck`]: backprop against central finite differences.
//! - [`synth`]: Gaussian-blob datasets with known generating densities.
//! - [`selftest`]: the property suite behind `pdh selftest`.
//! - [`manifest`]: run manifests written beside every output file.
//! - [`cli`]: the `pdh` command line; the binary is a thin wrapper.
//!
//! See the crate's `examples/` for one program per capability.

// index loops read closer to the maths in the kernels
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod codec;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod loss;
pub mod manifest;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod selftest;
pub mod synth;
pub mod trainer;

pub use codec::{binarize, hamming, map_distance, search_topk, CodeBook, CodeEntry, HashCode, Neighbor};
pub use error::{PdhError, Result};
pub use eval::{average_precision, evaluate, precision_at_k, EvalReport};
pub use loss::{expected_hamming, loss_grad_wrt_logits, npair_contrastive_loss, PairBatch};
pub use model::{posteriors, InputShape, Layer, LogitVector, ModelConfig, Parameters, PosteriorVector};
pub use numerics::{stable_sigmoid, Matrix, Rng, SgdConfig};
pub use trainer::{train, LabeledDataset, TrainConfig};
