//! Spatial stratification: k-means over source locations, leakage-aware
//! train/validation/test splits, and randomized training budgets.

mod kmeans;
mod sets;
mod split;

pub use kmeans::{
    assign_cluster, kmeans_fit, nearest, ClusterModel, GeoPoint, KMeansFit, KMeansInit,
    KMeansOptions,
};
pub use sets::{sample_cluster_sets, ClusterDraw, ClusterSet};
pub use split::{build_split_plan, PoolSource, SplitConfig, SplitPlan, TrainingPool};
