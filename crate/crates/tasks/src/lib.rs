//! Synthetic grid, event, movie and family KBs; question generators; the
//! chain, template, fixed-hop and completion models; training and Hits@k
//! evaluation.

pub mod data;
pub mod error;
pub mod grid;
pub mod models;
pub mod questions;
pub mod synth;
pub mod train;

pub use data::{read_jsonl, write_jsonl, Example, Vocab};
pub use error::{Result, TaskError};
pub use grid::{cell_name, gen_grid, parse_cell, walk, Direction, GridSpec};
pub use questions::{anchors, gen_chain_questions, grammar_words, question_tokens, ChainQuestion};
pub use train::{batch_loss, batch_loss_grad, evaluate, train, EpochLog, Hits, TrainConfig};
