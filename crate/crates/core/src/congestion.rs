//! Travel time index series and the per segment-day congestion quadruple
//! (status, start time, duration, planning time index).

use std::collections::BTreeMap;

use chrono::{NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use crate::config::CongestionParams;
use crate::error::{Error, Result};
use crate::ingest::SpeedRecord;

/// Number of 5-minute slots between 05:00 and 11:00.
pub const MORNING_SLOTS: usize = 72;
/// Minutes after midnight at which the morning window starts.
pub const MORNING_START_MIN: u32 = 5 * 60;
pub const SLOT_MIN: u32 = 5;
/// Longest run of missing slots that is forward filled.
pub const MAX_FILL_GAP: usize = 3;

/// Linear-interpolation percentile on order statistics (rank `q * (n - 1)`).
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile of empty list"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(percentile_sorted(&v, q))
}

pub(crate) fn percentile_sorted(v: &[f64], q: f64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    let r = q * (v.len() - 1) as f64;
    let lo = r.floor() as usize;
    let hi = r.ceil() as usize;
    let frac = r - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}

/// Free-flow proxy: the 85th percentile of all observed speeds of a segment.
pub fn reference_speed(speeds: &[f64]) -> Result<f64> {
    percentile(speeds, 0.85)
}

/// Forward-fill runs of at most [`MAX_FILL_GAP`] missing slots. A leading gap
/// is filled from `prev` when given, otherwise back-filled from the first
/// observation. Returns `None` when a longer gap exists.
pub fn fill_gaps(slots: &[Option<f64>], prev: Option<f64>) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(slots.len());
    let mut run = 0usize;
    for s in slots {
        match s {
            Some(v) => {
                run = 0;
                out.push(*v);
            }
            None => {
                run += 1;
                if run > MAX_FILL_GAP {
                    return None;
                }
                out.push(f64::NAN);
            }
        }
    }
    // Fill placeholders: forward from the last seen value, leading ones backwards.
    let first_obs = slots.iter().flatten().next().copied();
    let mut carry = prev;
    for v in out.iter_mut() {
        if v.is_nan() {
            *v = carry.or(first_obs)?;
        } else {
            carry = Some(*v);
        }
    }
    Some(out)
}

/// Morning travel time index values of one segment-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtiSeries {
    pub segment_id: String,
    pub date: NaiveDate,
    pub values: Vec<f64>,
}

/// TTI_t = v_ref / v_t for each morning slot after gap filling.
pub fn tti_series(
    segment_id: &str,
    date: NaiveDate,
    speeds: &[Option<f64>],
    prev: Option<f64>,
    v_ref: f64,
) -> Result<TtiSeries> {
    if speeds.len() != MORNING_SLOTS {
        return Err(Error::Dimension(format!("expected {MORNING_SLOTS} morning slots, got {}", speeds.len())));
    }
    if !(v_ref > 0.0 && v_ref.is_finite()) {
        return Err(Error::DegenerateInput("reference speed must be positive".into()));
    }
    let filled = fill_gaps(speeds, prev).ok_or_else(|| Error::IncompleteDay {
        segment: segment_id.to_string(),
        date: date.to_string(),
    })?;
    Ok(TtiSeries {
        segment_id: segment_id.to_string(),
        date,
        values: filled.iter().map(|v| v_ref / v).collect(),
    })
}

/// Half-open congested periods `[start, end)` in slot units.
///
/// Runs of consecutive slots with TTI >= threshold are kept when at least
/// `t_min / slot` long; kept runs whose gap is shorter than `merge_gap` are merged.
pub fn detect_congested_periods(tti: &[f64], params: &CongestionParams) -> Vec<(usize, usize)> {
    let min_len = params.min_run_slots();
    let gap = params.merge_gap_slots();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (t, v) in tti.iter().enumerate() {
        let hot = *v >= params.tti_thres;
        match (hot, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                if t - s >= min_len {
                    runs.push((s, t));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if tti.len() - s >= min_len {
            runs.push((s, tti.len()));
        }
    }
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(runs.len());
    for r in runs {
        match merged.last_mut() {
            Some(last) if r.0 - last.1 < gap => last.1 = r.1,
            _ => merged.push(r),
        }
    }
    merged
}

/// The prediction quadruple. Start and duration are in slots; the start is
/// reverse-indexed so that congestion at 05:00 gives 72 and none gives 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CongestionMeasurements {
    pub cs: bool,
    pub cst: u32,
    pub cd: Option<u32>,
    pub pti: Option<f64>,
}

impl CongestionMeasurements {
    pub fn uncongested() -> Self {
        Self { cs: false, cst: 0, cd: None, pti: None }
    }

    pub fn cst_hours(&self) -> f64 {
        slots_to_hours(self.cst as f64)
    }

    pub fn cd_hours(&self) -> Option<f64> {
        self.cd.map(|c| slots_to_hours(c as f64))
    }

    /// Checks the status/start/duration consistency rules.
    pub fn is_consistent(&self, min_run_slots: u32) -> bool {
        if !self.cs {
            return self.cst == 0 && self.cd.is_none() && self.pti.is_none();
        }
        (1..=MORNING_SLOTS as u32).contains(&self.cst)
            && self.cd.is_some_and(|c| c >= min_run_slots && c as usize <= MORNING_SLOTS)
            && self.pti.is_some()
    }
}

pub fn slots_to_hours(slots: f64) -> f64 {
    slots * SLOT_MIN as f64 / 60.0
}

/// 95th percentile of the morning TTI values.
pub fn planning_time_index(tti: &[f64]) -> f64 {
    percentile(tti, 0.95).unwrap_or(f64::NAN)
}

pub fn measurements_from_periods(tti: &[f64], periods: &[(usize, usize)]) -> CongestionMeasurements {
    match (periods.first(), periods.last()) {
        (Some(first), Some(last)) => CongestionMeasurements {
            cs: true,
            cst: (tti.len() - first.0) as u32,
            cd: Some((last.1 - first.0) as u32),
            pti: Some(planning_time_index(tti)),
        },
        _ => CongestionMeasurements::uncongested(),
    }
}

pub fn congestion_measurements(tti: &TtiSeries, params: &CongestionParams) -> CongestionMeasurements {
    let periods = detect_congested_periods(&tti.values, params);
    measurements_from_periods(&tti.values, &periods)
}

/// Slots per day kept by [`SpeedTable`]: 00:00 up to 11:00.
pub const DAY_SLOTS: usize = 132;
/// Index of the 05:00 slot inside a [`SpeedTable`] day.
pub const MORNING_OFFSET: usize = 60;

/// Speeds of each segment-day on a 5-min grid from 00:00 to 11:00. Later
/// samples are kept unordered because they only feed the reference speed.
#[derive(Debug, Clone, Default)]
pub struct SpeedTable {
    days: BTreeMap<String, BTreeMap<NaiveDate, SpeedDay>>,
}

#[derive(Debug, Clone)]
struct SpeedDay {
    grid: Vec<Option<f64>>,
    later: Vec<f64>,
}

impl SpeedTable {
    pub fn new(records: &[SpeedRecord]) -> Self {
        let mut days: BTreeMap<String, BTreeMap<NaiveDate, SpeedDay>> = BTreeMap::new();
        for r in records {
            let t = r.timestamp.time();
            let slot = (t.hour() * 12 + t.minute() / 5) as usize;
            let seg = match days.get_mut(&r.segment_id) {
                Some(s) => s,
                None => days.entry(r.segment_id.clone()).or_default(),
            };
            let day = seg
                .entry(r.timestamp.date())
                .or_insert_with(|| SpeedDay { grid: vec![None; DAY_SLOTS], later: Vec::new() });
            if slot < DAY_SLOTS {
                day.grid[slot] = Some(r.speed);
            } else {
                day.later.push(r.speed);
            }
        }
        SpeedTable { days }
    }

    pub fn segment_ids(&self) -> impl Iterator<Item = &String> {
        self.days.keys()
    }

    pub fn day(&self, segment_id: &str, date: NaiveDate) -> Option<&[Option<f64>]> {
        self.days.get(segment_id)?.get(&date).map(|v| v.grid.as_slice())
    }

    /// All observed speeds of a segment on the given days.
    pub fn observed(&self, segment_id: &str, dates: &[NaiveDate]) -> Vec<f64> {
        let Some(seg) = self.days.get(segment_id) else { return Vec::new() };
        dates
            .iter()
            .filter_map(|d| seg.get(d))
            .flat_map(|v| v.grid.iter().flatten().chain(v.later.iter()).copied())
            .collect()
    }

    /// Morning TTI series of one segment-day.
    pub fn tti(&self, segment_id: &str, date: NaiveDate, v_ref: f64) -> Result<TtiSeries> {
        let day = self.day(segment_id, date).ok_or_else(|| Error::IncompleteDay {
            segment: segment_id.to_string(),
            date: date.to_string(),
        })?;
        let prev = day[..MORNING_OFFSET].iter().rev().flatten().next().copied();
        tti_series(segment_id, date, &day[MORNING_OFFSET..], prev, v_ref)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CongestionParams {
        CongestionParams::default()
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[5.0, 5.0, 5.0], 0.85).unwrap(), 5.0);
        assert!((percentile(&[10.0, 20.0], 0.85).unwrap() - 18.5).abs() < 1e-12);
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(&v, 0.85).unwrap() - 85.15).abs() < 1e-9);
        assert!(matches!(percentile(&[], 0.5), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn reference_speed_examples() {
        assert_eq!(reference_speed(&[60.0; 10]).unwrap(), 60.0);
        // Rank 0.85 * 4 = 3.4 sits 40% of the way from 60 to 70.
        assert!((reference_speed(&[30.0, 40.0, 50.0, 60.0, 70.0]).unwrap() - 64.0).abs() < 1e-12);
        assert_eq!(reference_speed(&[55.0]).unwrap(), 55.0);
        assert!(reference_speed(&[]).is_err());
    }

    #[test]
    fn tti_examples() {
        let d = NaiveDate::from_ymd_opt(2014, 3, 4).unwrap();
        let s = tti_series("T", d, &vec![Some(60.0); 72], None, 60.0).unwrap();
        assert!(s.values.iter().all(|v| *v == 1.0));
        let s = tti_series("T", d, &vec![Some(30.0); 72], None, 60.0).unwrap();
        assert_eq!(s.values[0], 2.0);
        let s = tti_series("T", d, &vec![Some(120.0); 72], None, 60.0).unwrap();
        assert_eq!(s.values[0], 0.5);
    }

    #[test]
    fn gap_fill_rules() {
        let d = NaiveDate::from_ymd_opt(2014, 3, 4).unwrap();
        let mut speeds = vec![Some(60.0); 72];
        speeds[10] = Some(30.0);
        for s in speeds.iter_mut().skip(11).take(3) {
            *s = None;
        }
        let s = tti_series("T", d, &speeds, None, 60.0).unwrap();
        assert_eq!(&s.values[10..14], &[2.0, 2.0, 2.0, 2.0]);
        speeds[14] = None;
        assert!(matches!(
            tti_series("T", d, &speeds, None, 60.0),
            Err(Error::IncompleteDay { .. })
        ));
        // leading gap uses the pre-window observation
        let mut lead = vec![Some(60.0); 72];
        lead[0] = None;
        let s = tti_series("T", d, &lead, Some(30.0), 60.0).unwrap();
        assert_eq!(s.values[0], 2.0);
    }

    #[test]
    fn period_examples() {
        let mut tti = vec![1.0; 72];
        tti[..3].fill(2.0);
        assert_eq!(detect_congested_periods(&tti, &params()), vec![(0, 3)]);

        let mut tti = vec![1.0; 72];
        tti[10..12].fill(2.5);
        assert!(detect_congested_periods(&tti, &params()).is_empty());

        let mut tti = vec![1.0; 72];
        tti[10..13].fill(2.5);
        tti[15..18].fill(2.5);
        assert_eq!(detect_congested_periods(&tti, &params()), vec![(10, 18)]);

        // gap of exactly 15 minutes stays split
        let mut tti = vec![1.0; 72];
        tti[10..13].fill(2.5);
        tti[16..19].fill(2.5);
        assert_eq!(detect_congested_periods(&tti, &params()), vec![(10, 13), (16, 19)]);
    }

    #[test]
    fn quadruple_examples() {
        let d = NaiveDate::from_ymd_opt(2014, 3, 4).unwrap();
        let mut vals = vec![1.0; 72];
        vals[..6].fill(2.5);
        let s = TtiSeries { segment_id: "T".into(), date: d, values: vals };
        let m = congestion_measurements(&s, &params());
        assert!(m.cs);
        assert_eq!(m.cst, 72);
        assert_eq!(m.cd, Some(6));
        assert!(m.is_consistent(3));

        let s = TtiSeries { segment_id: "T".into(), date: d, values: vec![1.0; 72] };
        let m = congestion_measurements(&s, &params());
        assert_eq!(m, CongestionMeasurements::uncongested());
        assert_eq!(planning_time_index(&s.values), 1.0);
    }

    #[test]
    fn duration_spans_distinct_periods() {
        let mut tti = vec![1.0; 72];
        tti[12..18].fill(3.0);
        tti[40..44].fill(3.0);
        let periods = detect_congested_periods(&tti, &params());
        assert_eq!(periods.len(), 2);
        let m = measurements_from_periods(&tti, &periods);
        assert_eq!(m.cst, 60);
        assert_eq!(m.cd, Some(32));
        assert!((m.cst_hours() - 5.0).abs() < 1e-12);
    }
}
