//! Trainable encoder mapping embedded question and context to start scores
//! and start-conditioned end scores.

pub mod checkpoint;
mod network;
mod params;
mod wiq;

pub(crate) use network::sigmoid;
pub use network::{
    backward, encode, forward, top_k_indices, Activations, DropoutMasks, EncoderGrads, EndRows,
    ScoreSet,
};
pub use params::*;
pub use wiq::wiq_features;
