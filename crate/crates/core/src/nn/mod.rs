//! Recurrent sequence kernel: GRU/LSTM cells, stacked and bidirectional
//! layers, a pooled encoder with classifier or regressor head, hand-written
//! backpropagation through time, Adam and gradient checking.

mod adam;
mod cell;
mod encoder;
mod gradcheck;
mod layout;
pub mod linalg;
mod stack;

pub use adam::{clip_grad_norm, AdamConfig, AdamState};
pub use cell::{gru_step, lstm_step, Cell, CellKind, CellParams};
pub use encoder::{
    cross_entropy, squared_error, Encoded, Encoder, EncoderConfig, Gradients, HeadKind, Mode, PrefixScorer, Tape,
};
pub use gradcheck::{grad_check, BlockError, GradCheckReport, FD_STEP};
pub use layout::{ParamBlock, ParamLayout};
pub use stack::{RecurrentStack, StackConfig, StackState, StackTape};
