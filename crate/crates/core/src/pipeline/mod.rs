//! Dataset ingestion, illuminant pools, batch augmentation and analysis
//! exports.

pub mod analysis;
pub mod augment;
pub mod manifest;
pub mod pool;

pub use analysis::{export_analysis, histogram, AnalysisExport, SaturationHistogram, ScatterPoint};
pub use augment::{
    augment_dataset, image_rng, random_policy_augment, with_workers, AugmentOptions,
    AugmentedPair, AugmentedSetManifest, NoCandidatePolicy, Policy,
};
pub use manifest::{DatasetManifest, ManifestEntry};
pub use pool::{build_pool, Exclusion, PoolReport};
