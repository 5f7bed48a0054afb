//! Belief-propagation decoding of binary linear block codes (BCH, LDPC, Polar)
//! with three decoder variants:
//!
//! - **vanilla BP**: classical sum-product message passing on the Tanner graph,
//! - **weighted BP**: the tanh-domain formulation with learnable per-edge weights,
//! - **hyper BP**: variable nodes computed by a small network `g` whose weights
//!   are generated per iteration by a hypernetwork `f` from the magnitudes of
//!   the current messages, with a Taylor-polynomial check-node activation.
//!
//! The crate also ships the infrastructure needed to train the learned variants
//! on noisy zero codewords (a minimal reverse-mode autodiff engine plus Adam)
//! and to measure bit-error rates by Monte-Carlo simulation.
//!
//! # Layout
//!
//! - [`code`] — parity-check/generator matrices, alist parsing, Tanner-graph
//!   edge indexing
//! - [`channel`] — BPSK over AWGN, SNR/sigma conversion, channel LLRs
//! - [`bp`] — classical decoders and the shared check-node primitives
//! - [`autodiff`] — dense-tensor reverse-mode autodiff and the Adam optimizer
//! - [`hyper`] — the hypernetwork decoder
//! - [`training`] — zero-codeword training loop, multiloss, checkpoints
//! - [`eval`] — Monte-Carlo BER/FER harness, tables and curve export
//!
//! Start with the runnable examples (`cargo run --example decode_single`,
//! `ber_curve`, `train_hyper`, ...) or the `hyperbp` binary.

pub mod alist;
pub mod autodiff;
pub mod bp;
pub mod channel;
pub mod code;
pub mod eval;
pub mod hyper;
pub mod math;
pub mod training;

pub use bp::{decode, DecodeConfig, DecodeOutput, DecoderVariant};
pub use channel::{snr_to_sigma, AwgnChannel, ChannelSample};
pub use code::{EdgeIndex, LinearCode};
pub use eval::{run_curve, run_point, BerRecord, StopRule};
pub use hyper::{hyper_decode, HyperModel};
pub use training::{train, TrainConfig};
