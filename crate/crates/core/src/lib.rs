//! Batch analytics for block-level housing vulnerability.
//!
//! The library geocodes street-view building detections onto footprint
//! polygons, computes the K3 household-vulnerability index from census
//! microdata (standardize, Gower dissimilarity, 3-medoid partition,
//! ANOVA check, block averaging), scores detections against annotations
//! at an IoU threshold, and correlates image-predicted building
//! attributes with K3 per block.
//!
//! Modules follow the pipeline stages; [`pipeline`] wires them together
//! behind a single config.

pub mod correlate;
pub mod eval;
pub mod geocode;
pub mod k3;
pub mod pipeline;
pub mod report;
pub mod geom;
pub mod ingest;
pub mod taxonomy;
