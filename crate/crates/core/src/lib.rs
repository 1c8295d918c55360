//! Toolkit for warm-starting and pre-training a T5-style model in a new
//! language on modest hardware.
//!
//! - [`vocab`]: subword vocabularies and greedy tokenization
//! - [`translate`]: per-token translation with a persistent cache
//! - [`transplant`]: embedding initialization from translated tokens
//! - [`corpus`]: fixed-length chunking and the sequence store
//! - [`masking`]: keyed, just-in-time span corruption
//! - [`batcher`]: dynamic padding and gradient-accumulation plans
//! - [`schedule`]: warmup + linear-decay learning rate
//! - [`memplan`]: training memory accounting and hardware advice

pub mod batcher;
pub mod corpus;
pub mod masking;
pub mod memplan;
pub mod schedule;
pub mod translate;
pub mod transplant;
pub mod vocab;

/// Version of this library, recorded in run logs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
