//! Translation-equivariant neural decoder.
//!
//! A periodic residual CNN maps the two-channel syndrome image to a logit
//! field with 16 classes per lattice position. Each position stands for the
//! translation that moves it to the origin; pooling re-indexes every
//! position's classes by that translation's twist before averaging, which
//! makes the pooled prediction exactly covariant under translations.

pub mod checkpoint;
mod layers;
pub mod model;
pub mod optim;
pub mod pool;
pub mod tensor;
pub mod train;

pub use model::{cross_entropy, LossOutput, Model, ModelConfig, TensorSpec, INIT_SLOPE};
pub use optim::{learning_rate, AdamW};
pub use pool::{average_pool, twisted_pool, Pooling};
pub use tensor::Tensor4;
pub use train::{accuracy, train, train_from, LogRow, TrainConfig, TrainLog};
