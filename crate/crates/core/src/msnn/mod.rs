//! Per-AP-type interval models: ground-truth labels from held-versus-ideal
//! throughput windows, dataset assembly, training and prediction.

mod ablation;
mod bank;
mod collect;
mod window;

pub use ablation::{ablation_variants, quantile, run_variant, AblationResult, AblationVariant};
pub use bank::{interval_spec, train_bank, train_interval_model, IntervalModel, MsnnBank};
pub use collect::{
    build_dataset, collect_range, collect_sample, CollectedSample, CollectionConfig, MsnnInput, MsnnSample, SampleEnv,
    TypeDataset,
};
pub use window::{evaluate_window, scan_label, MovingUe, ScanRule, Trajectory, WindowSpec, WindowTrace};
