//! Text file formats for trajectories, trained models and experiment configs.

pub mod config;
pub mod model;
pub mod series;

pub use config::{
    config_reference, load_config, parse_config, EvalConfig, ExcitationConfig, ExperimentConfig, PlantConfig, PlantKind,
    SweepConfig, TrainSettings,
};
pub use model::{load_model, model_from_text, model_to_text, save_model};
pub use series::{load_series, save_series, series_from_csv, series_to_csv};
