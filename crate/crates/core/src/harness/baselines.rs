use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::CongestionParams;
use crate::congestion::{congestion_measurements, planning_time_index, CongestionMeasurements, TtiSeries, DAY_SLOTS, MORNING_OFFSET};
use crate::error::{Error, Result};
use crate::learn::segment::{clamp_regression, measurements_from, regression_targets};
use crate::learn::tune::contiguous_folds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmPrediction {
    pub cs: bool,
    pub regression: [f64; 3],
    pub measurements: CongestionMeasurements,
    /// No same-weekday day in the history; the whole history was used.
    pub global_fallback: bool,
    /// Empty history; predicts no congestion.
    pub no_history: bool,
}

fn mean_targets<'a>(days: impl Iterator<Item = &'a CongestionMeasurements>) -> Option<[f64; 3]> {
    let t: Vec<[f64; 3]> = days.filter_map(regression_targets).collect();
    if t.is_empty() {
        return None;
    }
    let n = t.len() as f64;
    Some([0, 1, 2].map(|k| t.iter().map(|v| v[k]).sum::<f64>() / n))
}

/// Day-of-week historical mean over the last `window` same-weekday days
/// before `date`. Status is a majority vote with ties counted as congested.
pub fn hm_predict(history: &[(NaiveDate, CongestionMeasurements)], date: NaiveDate, window: Option<usize>, min_run: u32) -> HmPrediction {
    let past: Vec<&(NaiveDate, CongestionMeasurements)> = history.iter().filter(|(d, _)| *d < date).collect();
    if past.is_empty() {
        return HmPrediction {
            cs: false,
            regression: [0.0; 3],
            measurements: CongestionMeasurements::uncongested(),
            global_fallback: false,
            no_history: true,
        };
    }
    let mut same: Vec<&(NaiveDate, CongestionMeasurements)> = past.iter().copied().filter(|(d, _)| d.weekday() == date.weekday()).collect();
    same.sort_by_key(|(d, _)| *d);
    let global_fallback = same.is_empty();
    let pool: Vec<&CongestionMeasurements> = if global_fallback {
        past.iter().map(|(_, m)| m).collect()
    } else {
        let k = window.unwrap_or(same.len()).max(1).min(same.len());
        same[same.len() - k..].iter().map(|(_, m)| m).collect()
    };
    let pos = pool.iter().filter(|m| m.cs).count();
    let cs = 2 * pos >= pool.len();
    let raw = mean_targets(pool.iter().copied())
        .or_else(|| mean_targets(past.iter().map(|(_, m)| m)))
        .unwrap_or([0.0; 3]);
    let regression = clamp_regression(raw, min_run);
    HmPrediction { cs, regression, measurements: measurements_from(cs, regression), global_fallback, no_history: false }
}

/// Window with the best rolling one-step status accuracy over the history,
/// ties to the earlier grid entry.
pub fn tune_hm_window(history: &[(NaiveDate, CongestionMeasurements)], windows: &[Option<usize>], min_run: u32) -> Option<usize> {
    let mut best = (usize::MAX, None);
    for w in windows {
        let errors = history
            .iter()
            .filter(|(d, m)| hm_predict(history, *d, *w, min_run).cs != m.cs)
            .count();
        if errors < best.0 {
            best = (errors, *w);
        }
    }
    best.1
}

/// Forward-filled speeds on the 5-min grid from 00:00 to 11:00; NaN before
/// the first observation.
pub fn forward_filled(grid: &[Option<f64>]) -> Vec<f64> {
    let mut carry = f64::NAN;
    grid.iter()
        .map(|s| {
            if let Some(v) = s {
                carry = *v;
            }
            carry
        })
        .collect()
}

/// Seasonal autoregression on 5-min speeds:
/// v_t = c + sum_p w_p v_{t-p} + sum_h g_h v_t^{d-7h}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarModel {
    pub p: usize,
    pub h: usize,
    /// Intercept, P lag weights, then H seasonal weights.
    pub coef: Vec<f64>,
}

/// Least-squares sufficient statistics of one day's regression rows over the
/// widest lag set, with the seasonal depth available on that day.
#[derive(Debug, Clone, PartialEq)]
pub struct SarGram {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub rows: usize,
    pub h_avail: usize,
}

pub type SpeedSeries = BTreeMap<NaiveDate, Vec<f64>>;

fn seasonal_days(series: &SpeedSeries, date: NaiveDate, h_max: usize, from: usize) -> Vec<&Vec<f64>> {
    let mut out = Vec::new();
    for h in 1..=h_max {
        match series.get(&(date - Duration::days(7 * h as i64))) {
            Some(v) if v[from..DAY_SLOTS].iter().all(|x| x.is_finite()) => out.push(v),
            _ => break,
        }
    }
    out
}

/// Rows are the slots from `from` to 11:00.
pub fn day_gram(series: &SpeedSeries, date: NaiveDate, p_max: usize, h_max: usize, from: usize) -> Option<SarGram> {
    let v = series.get(&date)?;
    if from < p_max || v[from - p_max..DAY_SLOTS].iter().any(|x| !x.is_finite()) {
        return None;
    }
    let seas = seasonal_days(series, date, h_max, from);
    let dim = 1 + p_max + h_max;
    let mut xtx = DMatrix::zeros(dim, dim);
    let mut xty = DVector::zeros(dim);
    let mut row = vec![0.0; dim];
    for t in from..DAY_SLOTS {
        row.iter_mut().for_each(|r| *r = 0.0);
        row[0] = 1.0;
        for p in 1..=p_max {
            row[p] = v[t - p];
        }
        for (h, s) in seas.iter().enumerate() {
            row[1 + p_max + h] = s[t];
        }
        for i in 0..dim {
            if row[i] == 0.0 {
                continue;
            }
            xty[i] += row[i] * v[t];
            for j in 0..dim {
                xtx[(i, j)] += row[i] * row[j];
            }
        }
    }
    Some(SarGram { xtx, xty, rows: DAY_SLOTS - from, h_avail: seas.len() })
}

fn columns(p: usize, h: usize, p_max: usize) -> Vec<usize> {
    let mut c = vec![0];
    c.extend(1..=p);
    c.extend((0..h).map(|k| 1 + p_max + k));
    c
}

/// Least-squares fit from per-day statistics; days lacking `h` seasonal lags are skipped.
pub fn fit_sar_from_grams<'a>(grams: impl IntoIterator<Item = &'a SarGram>, p: usize, h: usize, p_max: usize) -> Result<SarModel> {
    let cols = columns(p, h, p_max);
    let k = cols.len();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    let mut rows = 0;
    for g in grams {
        if g.h_avail < h {
            continue;
        }
        rows += g.rows;
        for (i, ci) in cols.iter().enumerate() {
            b[i] += g.xty[*ci];
            for (j, cj) in cols.iter().enumerate() {
                a[(i, j)] += g.xtx[(*ci, *cj)];
            }
        }
    }
    if rows < k {
        return Err(Error::InsufficientHistory(format!("{rows} rows for {k} coefficients")));
    }
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-10)
        .map_err(|e| Error::DegenerateInput(format!("SAR least squares: {e}")))?;
    Ok(SarModel { p, h, coef: coef.iter().copied().collect() })
}

/// Fits a SAR model on the given days.
pub fn fit_sar(series: &SpeedSeries, days: &[NaiveDate], p: usize, h: usize, from: usize) -> Result<SarModel> {
    let grams: Vec<SarGram> = days.iter().filter_map(|d| day_gram(series, *d, p, h, from)).collect();
    fit_sar_from_grams(&grams, p, h, p)
}

impl SarModel {
    /// Recursive forecast of slots `cutoff..11:00`, substituting predictions
    /// for lags past the cutoff. A missing seasonal day is replaced by the
    /// last observed speed.
    pub fn rollout(&self, series: &SpeedSeries, date: NaiveDate, cutoff: usize) -> Result<Vec<f64>> {
        let v = series.get(&date).ok_or_else(|| Error::InsufficientHistory(format!("no speeds on {date}")))?;
        if cutoff < self.p || v[cutoff - self.p..cutoff].iter().any(|x| !x.is_finite()) {
            return Err(Error::InsufficientHistory(format!("missing speeds before the cutoff on {date}")));
        }
        let last = v[cutoff - 1];
        let mut path: Vec<f64> = v[..cutoff].to_vec();
        for t in cutoff..DAY_SLOTS {
            let mut y = self.coef[0];
            for p in 1..=self.p {
                y += self.coef[p] * path[t - p];
            }
            for h in 1..=self.h {
                let s = series
                    .get(&(date - Duration::days(7 * h as i64)))
                    .map(|s| s[t])
                    .filter(|x| x.is_finite())
                    .unwrap_or(last);
                y += self.coef[self.p + h] * s;
            }
            path.push(y);
        }
        Ok(path.split_off(cutoff))
    }
}

/// Quadruple from predicted speeds covering `cutoff..11:00`, plus the
/// regression outputs (CST, CD, PTI) with zero start and duration when no
/// congestion is detected.
pub fn sar_quadruple(pred: &[f64], cutoff: usize, v_ref: f64, params: &CongestionParams) -> (CongestionMeasurements, [f64; 3]) {
    let skip = MORNING_OFFSET.saturating_sub(cutoff);
    let values: Vec<f64> = pred[skip..].iter().map(|v| v_ref / v.max(0.1)).collect();
    let pti = planning_time_index(&values);
    let tti = TtiSeries { segment_id: String::new(), date: NaiveDate::MIN, values };
    let m = congestion_measurements(&tti, params);
    (m, [m.cst as f64, m.cd.unwrap_or(0) as f64, m.pti.unwrap_or(pti)])
}

/// Grid search over (P, H) with forward-chaining validation on the rollout
/// error of morning speeds.
pub fn tune_sar(
    series: &SpeedSeries,
    grams: &BTreeMap<NaiveDate, SarGram>,
    train: &[NaiveDate],
    p_grid: &[usize],
    h_grid: &[usize],
    n_folds: usize,
    cutoff: usize,
) -> Result<SarModel> {
    let p_max = p_grid.iter().copied().max().unwrap_or(1);
    let folds = contiguous_folds(train.len(), n_folds);
    let mut best: Option<(f64, usize, usize)> = None;
    for &p in p_grid {
        for &h in h_grid {
            let mut sse = 0.0;
            let mut count = 0usize;
            for f in 1..folds.len() {
                let fit_days = &train[..folds[f].start];
                let Ok(m) = fit_sar_from_grams(fit_days.iter().filter_map(|d| grams.get(d)), p, h, p_max) else {
                    continue;
                };
                for d in &train[folds[f].clone()] {
                    let Ok(pred) = m.rollout(series, *d, cutoff) else { continue };
                    let obs = &series[d][cutoff..DAY_SLOTS];
                    for (a, b) in pred.iter().zip(obs) {
                        if b.is_finite() {
                            sse += (a - b).powi(2);
                            count += 1;
                        }
                    }
                }
            }
            if count > 0 {
                let mse = sse / count as f64;
                if best.is_none_or(|(b, _, _)| mse < b) {
                    best = Some((mse, p, h));
                }
            }
        }
    }
    let (p, h) = best.map(|(_, p, h)| (p, h)).unwrap_or((p_grid.first().copied().unwrap_or(1), 0));
    let all: Vec<&SarGram> = train.iter().filter_map(|d| grams.get(d)).collect();
    match fit_sar_from_grams(all.iter().copied(), p, h, p_max) {
        Ok(m) => Ok(m),
        Err(_) if h > 0 => fit_sar_from_grams(all, p, 0, p_max),
        Err(e) => Err(e),
    }
}
