use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::linear::{LinearModel, Task};
use super::tune::tune_linear;
use crate::config::LearnConfig;
use crate::error::{Error, Result};

/// Road-level stack of independent binary classifiers for [c > 0], ..., [c > C-2].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedDescriptor {
    pub levels: usize,
    pub classifiers: Vec<LinearModel>,
}

/// Binary targets of a day with ordered label `c`.
pub fn descriptor_targets(c: usize, levels: usize) -> Vec<f64> {
    (0..levels.saturating_sub(1)).map(|l| if c > l { 1.0 } else { 0.0 }).collect()
}

pub fn fit_ordered_descriptor(
    x: ArrayView2<f64>,
    labels: &[usize],
    names: &[String],
    levels: usize,
    cfg: &LearnConfig,
    n_folds: usize,
) -> Result<OrderedDescriptor> {
    if levels < 2 {
        return Err(Error::InvalidConfig(format!("descriptor needs at least 2 levels, got {levels}")));
    }
    if let Some(bad) = labels.iter().find(|c| **c >= levels) {
        return Err(Error::Dimension(format!("label {bad} outside {levels} levels")));
    }
    let mut classifiers = Vec::with_capacity(levels - 1);
    for l in 0..levels - 1 {
        let y: Vec<f64> = labels.iter().map(|c| if *c > l { 1.0 } else { 0.0 }).collect();
        classifiers.push(tune_linear(x, &y, names, Task::Logistic, cfg, n_folds)?.model);
    }
    Ok(OrderedDescriptor { levels, classifiers })
}

impl OrderedDescriptor {
    /// Sigmoid outputs, one per level; monotonicity is not enforced.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.classifiers.iter().map(|m| m.predict(x)).collect()
    }
}
