use serde::{Deserialize, Serialize};

use crate::congestion::slots_to_hours;

pub const METRICS: [&str; 6] = ["accuracy", "precision", "recall", "rmse_cst_h", "rmse_cd_h", "rmse_pti"];

/// One metric value with the number of samples behind it. `value` is `None`
/// when the denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: Option<f64>,
    pub n: usize,
}

impl Metric {
    fn ratio(num: usize, den: usize) -> Self {
        Metric { value: (den > 0).then(|| num as f64 / den as f64), n: den }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: Metric,
    pub precision: Metric,
    pub recall: Metric,
    pub rmse_cst_h: Metric,
    pub rmse_cd_h: Metric,
    pub rmse_pti: Metric,
}

impl MetricSet {
    pub fn get(&self, name: &str) -> Option<Metric> {
        Some(match name {
            "accuracy" => self.accuracy,
            "precision" => self.precision,
            "recall" => self.recall,
            "rmse_cst_h" => self.rmse_cst_h,
            "rmse_cd_h" => self.rmse_cd_h,
            "rmse_pti" => self.rmse_pti,
            _ => return None,
        })
    }

    pub fn values(&self) -> [(&'static str, Metric); 6] {
        [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("rmse_cst_h", self.rmse_cst_h),
            ("rmse_cd_h", self.rmse_cd_h),
            ("rmse_pti", self.rmse_pti),
        ]
    }
}

/// A prediction/truth pair for one segment-day. Regression fields hold
/// CST and CD in slots and PTI; the truth ones are `None` on uncongested days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub truth_cs: bool,
    pub pred_cs: bool,
    pub truth_reg: Option<[f64; 3]>,
    pub pred_reg: [f64; 3],
}

fn rmse(pairs: &[(f64, f64)]) -> Metric {
    let n = pairs.len();
    Metric { value: (n > 0).then(|| (pairs.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt()), n }
}

/// Classification metrics with congested as the positive class; RMSE over
/// truly congested days only, start and duration in hours.
pub fn compute_metrics(outcomes: &[Outcome]) -> MetricSet {
    let correct = outcomes.iter().filter(|o| o.truth_cs == o.pred_cs).count();
    let tp = outcomes.iter().filter(|o| o.truth_cs && o.pred_cs).count();
    let pp = outcomes.iter().filter(|o| o.pred_cs).count();
    let ap = outcomes.iter().filter(|o| o.truth_cs).count();
    let mut cst = Vec::new();
    let mut cd = Vec::new();
    let mut pti = Vec::new();
    for o in outcomes {
        if let Some(t) = o.truth_reg {
            cst.push((slots_to_hours(o.pred_reg[0]), slots_to_hours(t[0])));
            cd.push((slots_to_hours(o.pred_reg[1]), slots_to_hours(t[1])));
            pti.push((o.pred_reg[2], t[2]));
        }
    }
    MetricSet {
        accuracy: Metric::ratio(correct, outcomes.len()),
        precision: Metric::ratio(tp, pp),
        recall: Metric::ratio(tp, ap),
        rmse_cst_h: rmse(&cst),
        rmse_cd_h: rmse(&cd),
        rmse_pti: rmse(&pti),
    }
}

/// Sample-count weighted mean of defined values.
pub fn weighted_mean<'a>(metrics: impl IntoIterator<Item = &'a Metric>) -> Metric {
    let (mut s, mut n) = (0.0, 0usize);
    for m in metrics {
        if let Some(v) = m.value {
            s += v * m.n as f64;
            n += m.n;
        }
    }
    Metric { value: (n > 0).then(|| s / n as f64), n }
}
