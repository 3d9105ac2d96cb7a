//! Task-oriented semantic communication of speech.
//!
//! A trainable joint semantic-channel codec turns speech spectrograms into
//! power-normalized channel symbols; the receiver recovers a token
//! probability matrix and greedy CTC decoding yields text. The crate also
//! ships flat-fading channel simulation, CER/WER and feature-distance
//! metrics, conventional transceiver baselines (Huffman/binary32 + polar +
//! 64-QAM), and a training/evaluation harness behind the `deepsc-st` CLI.

pub mod baseline;
pub mod channel;
pub mod codec;
pub mod ctc;
pub mod dsp;
pub mod harness;
pub mod metrics;
pub mod nn;
