//! Small dense networks: forward and backward passes, Adam, minibatch
//! training with a held-out tail, and text serialization.

mod adam;
mod dataset;
mod io;
mod mlp;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use dataset::{ColumnBounds, Dataset};
pub use io::{load_model, save_model, ModelBundle};
pub use mlp::{cross_entropy, mse_loss, sigmoid, Activation, LossKind, Mlp, MlpSpec, Trace};
pub use train::{mean_loss, split_index, train, LossCurve, TrainConfig};
