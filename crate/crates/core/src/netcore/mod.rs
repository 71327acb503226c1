//! From-scratch recurrent network kernel: LSTM/BLSTM, dropout, batch
//! normalization and dense layers with hand-derived backward passes.

pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod network;
pub mod params;
pub mod spec;

pub use gradcheck::{builtin_fixtures, grad_check, grad_check_with, GradCheckFixture, GradCheckReport};
pub use lstm::{bidirectional_forward, lstm_cell_forward, recurrent_forward, Direction};
pub use network::{backward, forward, mse_loss, predict, ForwardCache, Mode};
pub use params::{LayerParams, LstmParams, ModelParams};
pub use spec::{Activation, Flow, LayerSpec, NetworkSpec};
