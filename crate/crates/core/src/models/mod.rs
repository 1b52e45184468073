//! Datasets, the three network families, training and prediction.

pub mod dataset;
pub mod network;
pub mod normalize;
pub mod train;
pub mod window;

pub use dataset::{make_dataset, Dataset, Direction, SequencePair};
pub use network::{Batch, Network, NetworkKind, NetworkObjective};
pub use normalize::{fit_normalizer, NormParams};
pub use train::{predict_for, predict_series, train, train_with, window_for, TrainConfig, TrainedModel};
pub use window::{make_windows, WindowSpec};
