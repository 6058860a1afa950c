use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::forest::{ForestParams, RandomForest};
use super::knn::{tune_knn, KnnModel};
use super::linear::{LinearModel, Task};
use super::tune::tune_linear;
use crate::config::LearnConfig;
use crate::congestion::{percentile, CongestionMeasurements, MORNING_SLOTS};
use crate::error::{Error, Result};

/// Regression targets in output order.
pub const TARGETS: [&str; 3] = ["cst", "cd", "pti"];

/// Which learner produces the segment outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Head {
    Linear,
    Knn,
    Forest,
}

impl Head {
    pub fn name(self) -> &'static str {
        match self {
            Head::Linear => "t2t",
            Head::Knn => "t2t_knn",
            Head::Forest => "t2t_rf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnHeads {
    pub classifier: KnnModel,
    pub regressors: Option<Vec<KnnModel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestHeads {
    /// `None` where the companion linear model selected no feature.
    pub classifier: Option<RandomForest>,
    pub regressors: Vec<Option<RandomForest>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentModelSet {
    pub segment_id: String,
    pub classifier: LinearModel,
    /// CST, CD and PTI models trained on congested days.
    pub regressors: Option<Vec<LinearModel>>,
    /// Medians of the congested training days; zeros when there were none.
    pub fallback: [f64; 3],
    pub knn: Option<KnnHeads>,
    pub forest: Option<ForestHeads>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentFitOptions {
    pub n_folds: usize,
    pub knn: bool,
    pub forest: bool,
    pub seed: u64,
}

/// Outputs for one segment-day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPrediction {
    pub prob: f64,
    /// Clamped CST, CD (slots) and PTI, produced whatever the predicted status.
    pub regression: [f64; 3],
    pub measurements: CongestionMeasurements,
}

pub fn regression_targets(m: &CongestionMeasurements) -> Option<[f64; 3]> {
    match (m.cs, m.cd, m.pti) {
        (true, Some(cd), Some(pti)) => Some([m.cst as f64, cd as f64, pti]),
        _ => None,
    }
}

/// Clamps raw outputs to physical ranges: start in [min_run, 72] slots,
/// duration in [min_run, start], PTI nonnegative.
pub fn clamp_regression(raw: [f64; 3], min_run: u32) -> [f64; 3] {
    let lo = min_run.max(1) as f64;
    let cst = raw[0].clamp(lo, MORNING_SLOTS as f64);
    let cd = raw[1].clamp(lo, cst);
    [cst, cd, raw[2].max(0.0)]
}

pub fn measurements_from(cs: bool, reg: [f64; 3]) -> CongestionMeasurements {
    if !cs {
        return CongestionMeasurements::uncongested();
    }
    let cst = reg[0].round() as u32;
    CongestionMeasurements { cs: true, cst, cd: Some((reg[1].round() as u32).min(cst)), pti: Some(reg[2]) }
}

fn sub_rows(x: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

fn median(v: &[f64]) -> f64 {
    percentile(v, 0.5).unwrap_or(0.0)
}

/// Trains the status classifier on all rows and the regressors on the
/// congested rows. `chat` holds the descriptor outputs used by KNN heads.
pub fn fit_segment_models(
    segment_id: &str,
    x: ArrayView2<f64>,
    names: &[String],
    chat: &[Vec<f64>],
    truth: &[CongestionMeasurements],
    cfg: &LearnConfig,
    opts: &SegmentFitOptions,
) -> Result<SegmentModelSet> {
    if x.nrows() != truth.len() || (opts.knn && chat.len() != truth.len()) {
        return Err(Error::Dimension(format!("{} rows, {} labels, {} descriptor rows", x.nrows(), truth.len(), chat.len())));
    }
    let y: Vec<f64> = truth.iter().map(|m| if m.cs { 1.0 } else { 0.0 }).collect();
    let classifier = tune_linear(x, &y, names, Task::Logistic, cfg, opts.n_folds)?.model;

    let congested: Vec<usize> = (0..truth.len()).filter(|i| regression_targets(&truth[*i]).is_some()).collect();
    let targets: Vec<[f64; 3]> = congested.iter().map(|i| regression_targets(&truth[*i]).unwrap()).collect();
    let column = |k: usize| -> Vec<f64> { targets.iter().map(|t| t[k]).collect() };
    let fallback = if targets.is_empty() { [0.0; 3] } else { [median(&column(0)), median(&column(1)), median(&column(2))] };
    let xc = sub_rows(x, &congested);
    let regressors = if congested.is_empty() {
        log::warn!("segment {segment_id}: no congested training days; regression falls back to medians");
        None
    } else {
        let mut v = Vec::with_capacity(3);
        for k in 0..3 {
            v.push(tune_linear(xc.view(), &column(k), names, Task::LeastSquares, cfg, opts.n_folds)?.model);
        }
        Some(v)
    };

    let knn = if opts.knn {
        let clf = tune_knn(chat, &y, &cfg.knn_k_grid, Task::Logistic, opts.n_folds)?;
        let regs = if congested.is_empty() {
            None
        } else {
            let pts: Vec<Vec<f64>> = congested.iter().map(|i| chat[*i].clone()).collect();
            Some((0..3).map(|k| tune_knn(&pts, &column(k), &cfg.knn_k_grid, Task::LeastSquares, opts.n_folds)).collect::<Result<Vec<_>>>()?)
        };
        Some(KnnHeads { classifier: clf, regressors: regs })
    } else {
        None
    };

    let forest = if opts.forest {
        let params = ForestParams { n_trees: cfg.rf_trees, max_depth: cfg.rf_max_depth, min_leaf: cfg.rf_min_leaf, ..Default::default() };
        let grow = |m: &LinearModel, xs: ArrayView2<f64>, ys: &[f64], task: Task, salt: u64| -> Result<Option<RandomForest>> {
            let sel = m.selected();
            if sel.is_empty() {
                log::warn!("segment {segment_id}: no selected features; forest head falls back to the linear model");
                return Ok(None);
            }
            RandomForest::fit(xs, ys, sel, task, &params, opts.seed ^ salt).map(Some)
        };
        let clf = grow(&classifier, x, &y, Task::Logistic, 0x11)?;
        let mut regs = Vec::new();
        if let Some(r) = &regressors {
            for (k, m) in r.iter().enumerate() {
                regs.push(grow(m, xc.view(), &column(k), Task::LeastSquares, 0x20 + k as u64)?);
            }
        }
        Some(ForestHeads { classifier: clf, regressors: regs })
    } else {
        None
    };

    Ok(SegmentModelSet { segment_id: segment_id.to_string(), classifier, regressors, fallback, knn, forest })
}

impl SegmentModelSet {
    fn linear_regression(&self, x: &[f64]) -> [f64; 3] {
        match &self.regressors {
            Some(r) => [r[0].predict(x), r[1].predict(x), r[2].predict(x)],
            None => self.fallback,
        }
    }

    /// Status probability and clamped regression outputs from the chosen head.
    /// Heads that were not trained fall back to the linear models.
    pub fn predict(&self, head: Head, x: &[f64], chat: &[f64], cs_threshold: f64, min_run: u32) -> SegmentPrediction {
        let linear = self.linear_regression(x);
        let (prob, raw) = match (head, &self.knn, &self.forest) {
            (Head::Knn, Some(k), _) => {
                let reg = match &k.regressors {
                    Some(r) => [r[0].predict(chat), r[1].predict(chat), r[2].predict(chat)],
                    None => self.fallback,
                };
                (k.classifier.predict(chat), reg)
            }
            (Head::Forest, _, Some(f)) => {
                let prob = f.classifier.as_ref().map_or_else(|| self.classifier.predict(x), |t| t.predict(x));
                let mut reg = linear;
                for (k, t) in f.regressors.iter().enumerate() {
                    if let Some(t) = t {
                        reg[k] = t.predict(x);
                    }
                }
                (prob, reg)
            }
            _ => (self.classifier.predict(x), linear),
        };
        let regression = clamp_regression(raw, min_run);
        let cs = prob >= cs_threshold;
        SegmentPrediction { prob, regression, measurements: measurements_from(cs, regression) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::linear::Task;

    fn set(bias: f64, reg: [f64; 3]) -> SegmentModelSet {
        let names = vec!["a".to_string()];
        SegmentModelSet {
            segment_id: "s".into(),
            classifier: LinearModel::constant(names.clone(), Task::Logistic, bias),
            regressors: Some(reg.iter().map(|b| LinearModel::constant(names.clone(), Task::LeastSquares, *b)).collect()),
            fallback: [0.0; 3],
            knn: None,
            forest: None,
        }
    }

    #[test]
    fn threshold_and_clamp() {
        let p = set((0.4f64 / 0.6).ln(), [80.0, 30.0, 2.0]).predict(Head::Linear, &[0.0], &[], 0.5, 3);
        assert!((p.prob - 0.4).abs() < 1e-12);
        assert_eq!(p.measurements, CongestionMeasurements::uncongested());
        let p = set(2.0, [80.0, 30.0, 2.0]).predict(Head::Linear, &[0.0], &[], 0.5, 3);
        assert_eq!(p.measurements.cst, 72);
        assert!(p.measurements.is_consistent(3));
        let p = set(2.0, [10.0, 30.0, -1.0]).predict(Head::Linear, &[0.0], &[], 0.5, 3);
        assert_eq!((p.measurements.cst, p.measurements.cd, p.measurements.pti), (10, Some(10), Some(0.0)));
    }

    #[test]
    fn no_congested_days_uses_fallback() {
        let x = ndarray::Array2::from_shape_fn((6, 1), |(i, _)| i as f64);
        let truth = vec![CongestionMeasurements::uncongested(); 6];
        let opts = SegmentFitOptions { n_folds: 2, knn: false, forest: false, seed: 0 };
        let m = fit_segment_models("s", x.view(), &["a".into()], &[], &truth, &LearnConfig::default(), &opts).unwrap();
        assert!(m.regressors.is_none() && m.classifier.degenerate);
        let p = m.predict(Head::Linear, &[1.0], &[], 0.5, 3);
        assert!(!p.measurements.cs);
    }

    #[test]
    fn all_congested_days() {
        let x = ndarray::Array2::from_shape_fn((8, 1), |(i, _)| i as f64);
        let truth: Vec<_> = (0..8)
            .map(|i| CongestionMeasurements { cs: true, cst: 40 + i, cd: Some(10), pti: Some(2.0) })
            .collect();
        let opts = SegmentFitOptions { n_folds: 2, knn: true, forest: true, seed: 0 };
        let chat: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 8.0]).collect();
        let m = fit_segment_models("s", x.view(), &["a".into()], &chat, &truth, &LearnConfig::default(), &opts).unwrap();
        assert!(m.classifier.degenerate && m.classifier.predict(&[0.0]) > 0.5);
        assert!(m.regressors.is_some());
        for head in [Head::Linear, Head::Knn, Head::Forest] {
            assert!(m.predict(head, &[3.0], &[0.4], 0.5, 3).measurements.is_consistent(3));
        }
    }
}
