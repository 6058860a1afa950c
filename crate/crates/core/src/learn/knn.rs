use serde::{Deserialize, Serialize};

use super::linear::Task;
use super::tune::contiguous_folds;
use crate::error::{Error, Result};

/// Uniform-weight nearest neighbours over descriptor outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub k: usize,
    pub task: Task,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

impl KnnModel {
    pub fn fit(points: Vec<Vec<f64>>, targets: Vec<f64>, k: usize, task: Task) -> Result<Self> {
        if points.len() != targets.len() {
            return Err(Error::Dimension(format!("{} points, {} targets", points.len(), targets.len())));
        }
        if points.is_empty() {
            return Err(Error::EmptyInput("knn training set"));
        }
        if k == 0 || k > points.len() {
            return Err(Error::KTooLarge { k, n: points.len() });
        }
        Ok(KnnModel { points, targets, k, task })
    }

    /// Vote share of the positive class, or the neighbour mean for regression.
    pub fn predict(&self, q: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self.points.iter().enumerate().map(|(i, p)| (dist2(p, q), i)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d[..self.k].iter().map(|(_, i)| self.targets[*i]).sum::<f64>() / self.k as f64
    }

    /// Majority vote; a tie counts as positive.
    pub fn classify(&self, q: &[f64]) -> bool {
        self.predict(q) >= 0.5
    }
}

/// K from `grid` with the lowest contiguous-fold validation error
/// (misclassification or squared error), ties to the smaller K.
pub fn tune_knn(points: &[Vec<f64>], targets: &[f64], grid: &[usize], task: Task, n_folds: usize) -> Result<KnnModel> {
    let n = points.len();
    let mut candidates: Vec<usize> = grid.iter().copied().filter(|k| *k >= 1).collect();
    candidates.sort_unstable();
    candidates.dedup();
    let folds = contiguous_folds(n, n_folds);
    let max_train = folds.iter().map(|f| n - f.len()).min().unwrap_or(n);
    candidates.retain(|k| *k <= max_train.max(1));
    if candidates.is_empty() {
        candidates.push(1);
    }
    let mut best = (f64::INFINITY, candidates[0]);
    if folds.len() >= 2 && candidates.len() > 1 {
        for &k in &candidates {
            let mut err = 0.0;
            for f in &folds {
                let train: Vec<usize> = (0..n).filter(|i| !f.contains(i)).collect();
                let m = KnnModel::fit(train.iter().map(|i| points[*i].clone()).collect(), train.iter().map(|i| targets[*i]).collect(), k, task)?;
                for i in f.clone() {
                    err += match task {
                        Task::Logistic => f64::from(m.classify(&points[i]) != (targets[i] >= 0.5)),
                        Task::LeastSquares => (m.predict(&points[i]) - targets[i]).powi(2),
                    };
                }
            }
            if err < best.0 {
                best = (err, k);
            }
        }
    }
    KnnModel::fit(points.to_vec(), targets.to_vec(), best.1.min(n), task)
}
