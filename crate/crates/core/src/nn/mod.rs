//! Dense recurrent networks with exact backpropagation through time and Adam.

mod adam;
mod lstm;
pub mod matrix;
mod net;

pub use adam::AdamState;
pub use lstm::{LayerState, LstmLayer};
pub use matrix::Matrix;
pub use net::{
    log_softmax, sample_categorical, softmax, ActorParams, CriticParams, HiddenState, Linear, RecurrentNet, Unroll,
    WeightMask, DEFAULT_HIDDEN, INPUT_DIM, IS_WEIGHT, NUM_TENSORS, TENSOR_NAMES,
};
