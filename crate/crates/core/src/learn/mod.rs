//! Penalized linear solvers and the road/segment model stack.

pub mod descriptor;
pub mod forest;
pub mod knn;
pub mod linear;
pub mod segment;
pub mod tune;

use serde::{Deserialize, Serialize};

pub use descriptor::{descriptor_targets, fit_ordered_descriptor, OrderedDescriptor};
pub use forest::{DecisionTree, FeatureSubset, ForestParams, RandomForest};
pub use knn::{tune_knn, KnnModel};
pub use linear::{fit_l1_logistic, fit_lasso, FitTrace, LinearModel, SolverOptions, Task};
pub use segment::{fit_segment_models, Head, SegmentFitOptions, SegmentModelSet, SegmentPrediction};
pub use tune::{contiguous_folds, tune_linear};

/// Descriptor plus per-segment models of one road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadModel {
    pub road_id: String,
    /// `None` when the segment models were trained without descriptor outputs.
    pub descriptor: Option<OrderedDescriptor>,
    pub segments: Vec<SegmentModelSet>,
}

impl RoadModel {
    pub fn describe(&self, road_x: &[f64]) -> Vec<f64> {
        self.descriptor.as_ref().map(|d| d.predict(road_x)).unwrap_or_default()
    }

    /// Predictions for every segment. `segment_x[i]` is the segment vector
    /// of `segments[i]` without the descriptor columns, which are appended here.
    pub fn predict_day(&self, head: Head, road_x: &[f64], segment_x: &[Vec<f64>], cs_threshold: f64, min_run: u32) -> Vec<SegmentPrediction> {
        let chat = self.describe(road_x);
        self.segments
            .iter()
            .zip(segment_x)
            .map(|(m, xs)| {
                let mut x = xs.clone();
                x.extend(&chat);
                m.predict(head, &x, &chat, cs_threshold, min_run)
            })
            .collect()
    }
}
