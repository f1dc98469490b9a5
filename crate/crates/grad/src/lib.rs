//! Reverse-mode differentiation for models built on relation-set following.

pub mod checkpoint;
pub mod error;
pub mod follow_grad;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, restore_into, save_checkpoint};
pub use error::{GradError, Result};
pub use follow_grad::follow_backward;
pub use layers::{Embedding, Linear, LstmCell, LstmState};
pub use optim::{adam_step, sgd_step, Adam};
pub use params::{glorot_bound, ModelParams, Param, ParamId};
pub use tape::{softmax_rows, Gradients, Tape, Var};
