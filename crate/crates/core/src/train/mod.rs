//! Optimiser, training loop, patch pipeline and synthetic rain.

pub mod adam;
pub mod dataset;
pub mod patches;
pub mod rain;
pub mod trainer;

pub use adam::AdamState;
pub use patches::{extract_patches, Pair};
pub use rain::{render_rain_layer, synthesize_rain, synthetic_scene, RainSynthesisParams};
pub use trainer::{
    sample_gradients, train, train_from, EpochRecord, SampleResult, StepRecord, TrainOutcome,
    TrainPlan,
};
