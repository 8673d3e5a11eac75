//! Synthetic object-detection dataset generation, evaluation and experiment
//! bookkeeping on top of [`palmforge_core`].

pub use palmforge_core as core;

pub mod charts;
pub mod cli;
pub mod config;
pub mod evaluate;
pub mod experiment;
pub mod error;
pub mod generate;
pub mod imageio;
pub mod layout;

pub use error::{Error, Result};
