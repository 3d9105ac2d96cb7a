//! Conventional transceiver baselines: Huffman text coding, binary32
//! feature serialization, polar coding with SCL decoding, Gray 64-QAM, and
//! the assembled text/feature pipelines.

mod bits;
mod huffman;
mod polar;
mod qam;
mod transceiver;

pub use bits::{float_deserialize, float_serialize, BitVector};
pub use huffman::{english_frequencies, HuffmanCodebook};
pub use polar::{polar_encode, polar_sc_decode, polar_scl_decode, polar_transform, PolarConfig};
pub use qam::{qam64_llr, qam64_map, BITS_PER_SYMBOL};
pub use transceiver::{
    run_feature_transceiver, run_text_transceiver, FeatureTransceiverOutput,
    TextTransceiverOutput,
};

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("bit length {len} is not a multiple of {multiple}")]
    BitLength { len: usize, multiple: usize },
    #[error("frequency map has no positive counts")]
    EmptyFrequencies,
    #[error("token {0:?} is not in the codebook")]
    TokenNotInCodebook(char),
    #[error("block length {0} must be a power of two >= 2")]
    BadBlockLength(usize),
    #[error("info length {info} invalid for block length {block}")]
    BadInfoLength { info: usize, block: usize },
    #[error("list size must be >= 1")]
    BadListSize,
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Codec(#[from] crate::codec::CodecError),
    #[error(transparent)]
    Ctc(#[from] crate::ctc::CtcError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}
