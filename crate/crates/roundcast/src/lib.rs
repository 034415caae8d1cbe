//! Predicting the winner of a two-player fighting-game round from the
//! partial time series of both players' damage percentages.
//!
//! The crate covers the whole pipeline: frame ingestion and round
//! splitting (`data`), an LSTM and a transformer-encoder classifier built
//! from scratch on a small f64 tensor core (`tensor`, `nn`), classical
//! baselines (`baselines`), training with grouped k-fold cross-validation
//! (`optim`), metrics and latency benchmarking (`eval`), bit-exact model
//! checkpoints (`checkpoint`), and the `roundcast` command-line tool
//! (`cli`).
//!
//! Determinism is a design requirement throughout: every source of
//! randomness flows from one explicit seed, so training runs, synthetic
//! datasets, and bootstrap intervals reproduce bit for bit.

pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
