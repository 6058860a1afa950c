use std::ops::Range;

use ndarray::{ArrayView2, Axis};

use super::linear::{
    lasso_alpha_max, logistic_lambda_max, logit, model_from_path, penalty_path, Design, LinearModel, SolverOptions, Task,
};
use crate::config::LearnConfig;
use crate::error::Result;

/// `k` contiguous blocks over `0..n`; the remainder goes to the last block.
pub fn contiguous_folds(n: usize, k: usize) -> Vec<Range<usize>> {
    let k = k.clamp(1, n.max(1));
    let size = n / k;
    (0..k)
        .map(|i| {
            let end = if i + 1 == k { n } else { (i + 1) * size };
            i * size..end
        })
        .collect()
}

pub fn log_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

pub fn loss(task: Task, pred: f64, y: f64) -> f64 {
    match task {
        Task::Logistic => log_loss(pred, y),
        Task::LeastSquares => (pred - y).powi(2),
    }
}

/// Constant model for a target with a single value, or `None`.
pub fn degenerate_model(y: &[f64], names: &[String], task: Task) -> Option<LinearModel> {
    let first = *y.first()?;
    if y.iter().any(|v| *v != first) {
        return None;
    }
    let bias = match task {
        // Smoothed base rate keeps the output strictly inside (0, 1).
        Task::Logistic => logit((y.iter().sum::<f64>() + 0.5) / (y.len() as f64 + 1.0)),
        Task::LeastSquares => first,
    };
    Some(LinearModel::constant(names.to_vec(), task, bias))
}

pub fn solver_options(task: Task, cfg: &LearnConfig) -> SolverOptions {
    match task {
        Task::Logistic => SolverOptions { tol: cfg.logistic_tol, max_iter: cfg.logistic_max_iter, standardize: true },
        Task::LeastSquares => SolverOptions { tol: cfg.lasso_tol, max_iter: cfg.lasso_max_iter, standardize: true },
    }
}

/// A penalized model whose strength was chosen by inner cross-validation.
#[derive(Debug, Clone)]
pub struct Tuned {
    pub model: LinearModel,
    /// Mean validation loss per grid point (empty when no tuning happened).
    pub cv_loss: Vec<f64>,
    pub chosen: Option<usize>,
}

fn rows(x: ArrayView2<f64>, idx: &[usize]) -> ndarray::Array2<f64> {
    x.select(Axis(0), idx)
}

/// Fits an L1 model over the configured penalty grid and keeps the grid
/// point with the lowest mean loss over contiguous validation folds.
pub fn tune_linear(x: ArrayView2<f64>, y: &[f64], names: &[String], task: Task, cfg: &LearnConfig, n_folds: usize) -> Result<Tuned> {
    if let Some(m) = degenerate_model(y, names, task) {
        log::warn!("single-valued target over {} rows; fitting a constant", y.len());
        return Ok(Tuned { model: m, cv_loss: Vec::new(), chosen: None });
    }
    let opts = solver_options(task, cfg);
    let d = Design::new(x, true);
    let base = match task {
        Task::Logistic => logistic_lambda_max(&d, y),
        Task::LeastSquares => lasso_alpha_max(&d, y),
    };
    let penalties: Vec<f64> = cfg.grid_factors.iter().map(|f| f * cfg.anchor_frac * base).collect();
    let n = y.len();
    let folds = contiguous_folds(n, n_folds);
    let mut cv_loss = vec![0.0; penalties.len()];
    let tunable = folds.len() >= 2 && penalties.len() > 1;
    if tunable {
        for f in &folds {
            let train: Vec<usize> = (0..n).filter(|i| !f.contains(i)).collect();
            let xtr = rows(x, &train);
            let ytr: Vec<f64> = train.iter().map(|i| y[*i]).collect();
            let models: Vec<LinearModel> = match degenerate_model(&ytr, names, task) {
                Some(m) => vec![m; penalties.len()],
                None => {
                    let dtr = Design::new(xtr.view(), true);
                    penalty_path(&dtr, &ytr, task, &penalties, &opts)
                        .iter()
                        .zip(&penalties)
                        .map(|(fit, pen)| model_from_path(&dtr, names, fit, *pen, task))
                        .collect()
                }
            };
            for (k, m) in models.iter().enumerate() {
                for i in f.clone() {
                    let row = x.row(i);
                    cv_loss[k] += loss(task, m.predict(row.as_slice().unwrap_or(&row.to_vec())), y[i]) / n as f64;
                }
            }
        }
    }
    // Ties go to the stronger penalty.
    let mut order: Vec<usize> = (0..penalties.len()).collect();
    order.sort_by(|a, b| penalties[*b].total_cmp(&penalties[*a]));
    let chosen = if tunable {
        order.iter().copied().fold(order[0], |best, k| if cv_loss[k] < cv_loss[best] { k } else { best })
    } else {
        order[order.len() / 2]
    };
    let path = penalty_path(&d, y, task, &penalties, &opts);
    let model = model_from_path(&d, names, &path[chosen], penalties[chosen], task);
    if !model.converged {
        log::warn!("penalized fit at strength {:.3e} did not converge", penalties[chosen]);
    }
    Ok(Tuned { model, cv_loss: if tunable { cv_loss } else { Vec::new() }, chosen: Some(chosen) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fold_arithmetic() {
        let f = contiguous_folds(22, 11);
        assert_eq!(f.len(), 11);
        assert!(f.iter().all(|r| r.len() == 2));
        let f = contiguous_folds(10, 4);
        assert_eq!(f, vec![0..2, 2..4, 4..6, 6..10]);
        assert_eq!(contiguous_folds(2, 4).len(), 2);
    }

    #[test]
    fn degenerate_targets_give_constants() {
        let names = vec!["a".to_string()];
        let x = Array2::from_shape_vec((3, 1), vec![1.0, 2.0, 3.0]).unwrap();
        let t = tune_linear(x.view(), &[1.0, 1.0, 1.0], &names, Task::Logistic, &LearnConfig::default(), 4).unwrap();
        assert!(t.model.degenerate && t.model.predict(&[5.0]) > 0.5);
        let t = tune_linear(x.view(), &[0.0, 0.0, 0.0], &names, Task::Logistic, &LearnConfig::default(), 4).unwrap();
        assert!(t.model.predict(&[5.0]) < 0.5 && t.model.predict(&[5.0]) > 0.0);
    }

    #[test]
    fn tuning_recovers_the_relevant_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, p) = (120, 10);
        let x = Array2::from_shape_fn((n, p), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..n).map(|i| 3.0 * x[[i, 4]] + 0.1 * rng.gen_range(-1.0..1.0)).collect();
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let t = tune_linear(x.view(), &y, &names, Task::LeastSquares, &LearnConfig::default(), 4).unwrap();
        assert_eq!(t.cv_loss.len(), 7);
        let w = &t.model.weights;
        assert!((w[4] - 3.0).abs() < 0.2, "{w:?}");
        assert!((0..p).filter(|j| *j != 4).all(|j| w[j].abs() < 0.1));
    }
}
