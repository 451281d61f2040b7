//! Gray World color-constancy augmentation for segmentation datasets.
//!
//! Each image's illuminant is estimated with the Gray World assumption and
//! the image is recast to the illuminant of another dataset image. The
//! target is chosen adaptively: it must sit at a set fraction of the
//! maximum color difference found in the dataset, and the recast image must
//! keep its mean HSV saturation inside a band, which rules out
//! oversaturated, artificial-looking results.
//!
//! Besides the color stage the crate provides paired rigid transforms for
//! images and masks, mask post-processing, segmentation metrics, and a
//! deterministic parallel batch pipeline driven by [`cli`].

pub mod cli;
pub mod color;
pub mod engine;
pub mod error;
pub mod mask;
pub mod pipeline;
pub mod raster;
pub mod spatial;

pub use color::{
    compute_illuminant, illuminant_distance, mean_saturation, recast, rgb_to_hsv_saturation,
    white_balance, IlluminantProfile, SaturationStats,
};
pub use engine::{
    furthest_illuminant, rank_candidates, select_and_augment, AugmentStatus, AugmentationRecord,
    IlluminantPool, PoolEntry, SaturationBand, SelectionConfig,
};
pub use error::{Error, Result};
pub use mask::{compute_metrics, postprocess, SegMetrics};
pub use raster::{BinaryMask, RasterImage};
pub use spatial::{apply_spatial, SpatialParams};
