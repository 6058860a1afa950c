use chrono::{Duration, NaiveDate, NaiveDateTime};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::ClusteringConfig;
use crate::congestion::MORNING_SLOTS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProfileMatrix {
    pub road_id: String,
    pub segment_ids: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// One row per kept date: segment 0's 72 slots, then segment 1's, ...
    pub rows: Array2<f64>,
    pub dropped: Vec<NaiveDate>,
}

/// Concatenate each day's segment TTI curves in road order. A day missing any
/// segment is dropped for the whole road.
pub fn build_road_profiles<F>(
    road_id: &str,
    segment_ids: &[String],
    dates: &[NaiveDate],
    mut lookup: F,
) -> Result<RoadProfileMatrix>
where
    F: FnMut(&str, NaiveDate) -> Option<Vec<f64>>,
{
    if segment_ids.is_empty() {
        return Err(Error::EmptyRoad(road_id.to_string()));
    }
    let width = segment_ids.len() * MORNING_SLOTS;
    let mut data = Vec::with_capacity(dates.len() * width);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    'day: for &d in dates {
        let mut row = Vec::with_capacity(width);
        for s in segment_ids {
            match lookup(s, d) {
                Some(v) if v.len() == MORNING_SLOTS => row.extend(v),
                _ => {
                    dropped.push(d);
                    continue 'day;
                }
            }
        }
        data.extend(row);
        kept.push(d);
    }
    if !dropped.is_empty() {
        log::info!("road {road_id}: dropped {} incomplete days", dropped.len());
    }
    if kept.is_empty() {
        return Err(Error::EmptyRoad(road_id.to_string()));
    }
    let rows = Array2::from_shape_vec((kept.len(), width), data).expect("row width");
    Ok(RoadProfileMatrix { road_id: road_id.to_string(), segment_ids: segment_ids.to_vec(), dates: kept, rows, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetingProfile {
    pub date: NaiveDate,
    pub bins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetingProfiles {
    pub profiles: Vec<TweetingProfile>,
    /// Days with no tweets inside the window.
    pub empty: Vec<NaiveDate>,
}

impl TweetingProfiles {
    pub fn matrix(&self) -> Array2<f64> {
        let w = self.profiles.first().map_or(0, |p| p.bins.len());
        Array2::from_shape_fn((self.profiles.len(), w), |(i, j)| self.profiles[i].bins[j])
    }
}

/// Raw per-bin counts for day `date`, window starting on the previous day.
pub fn tweet_bin_counts(timestamps: &[NaiveDateTime], date: NaiveDate, cfg: &ClusteringConfig) -> Vec<f64> {
    let start = (date - Duration::days(1)).and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(cfg.profile_start_min as i64);
    let bin = Duration::minutes(cfg.profile_bin_min as i64);
    let end = start + bin * cfg.profile_bins as i32;
    let lo = timestamps.partition_point(|t| *t < start);
    let hi = timestamps.partition_point(|t| *t < end);
    let mut counts = vec![0.0; cfg.profile_bins];
    for t in &timestamps[lo..hi] {
        let i = ((*t - start).num_minutes() / cfg.profile_bin_min as i64) as usize;
        counts[i] += 1.0;
    }
    counts
}

/// Centered moving average with a truncated window at the edges.
pub fn smooth_truncated(x: &[f64], half_width: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Normalized, smoothed tweet-count histograms, one per date. `timestamps`
/// must be sorted.
pub fn build_tweeting_profiles(timestamps: &[NaiveDateTime], dates: &[NaiveDate], cfg: &ClusteringConfig) -> TweetingProfiles {
    debug_assert!(timestamps.windows(2).all(|w| w[0] <= w[1]));
    let half = (cfg.profile_smooth_min / (2 * cfg.profile_bin_min.max(1))) as usize;
    let mut out = TweetingProfiles { profiles: Vec::new(), empty: Vec::new() };
    for &d in dates {
        let counts = tweet_bin_counts(timestamps, d, cfg);
        let smooth = smooth_truncated(&counts, half);
        let total: f64 = smooth.iter().sum();
        if total <= 0.0 {
            log::debug!("no tweets in profile window for {d}");
            out.empty.push(d);
            continue;
        }
        out.profiles.push(TweetingProfile { date: d, bins: smooth.iter().map(|v| v / total).collect() });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn single_segment_day_of_ones() {
        let m = build_road_profiles("r", &["a".into()], &[d("2014-02-03")], |_, _| Some(vec![1.0; 72])).unwrap();
        assert_eq!(m.rows.dim(), (1, 72));
        assert!(m.rows.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn segments_concatenate_in_order() {
        let segs = vec!["a".to_string(), "b".to_string()];
        let m = build_road_profiles("r", &segs, &[d("2014-02-03")], |s, _| {
            Some(vec![if s == "a" { 1.0 } else { 2.0 }; 72])
        })
        .unwrap();
        assert_eq!(m.rows.ncols(), 144);
        assert_eq!(m.rows[[0, 71]], 1.0);
        assert_eq!(m.rows[[0, 72]], 2.0);
    }

    #[test]
    fn incomplete_day_is_dropped() {
        let segs = vec!["a".to_string(), "b".to_string()];
        let days = [d("2014-02-03"), d("2014-02-04")];
        let m = build_road_profiles("r", &segs, &days, |s, day| {
            (s == "a" || day == days[0]).then(|| vec![1.0; 72])
        })
        .unwrap();
        assert_eq!(m.dates, vec![days[0]]);
        assert_eq!(m.dropped, vec![days[1]]);
        assert!(matches!(build_road_profiles("r", &[], &days, |_, _| None), Err(Error::EmptyRoad(_))));
    }

    #[test]
    fn single_bin_spreads_over_neighbours() {
        let cfg = ClusteringConfig::default();
        let day = d("2014-02-04");
        let ts = vec![d("2014-02-03").and_hms_opt(23, 10, 0).unwrap(); 4];
        let p = build_tweeting_profiles(&ts, &[day], &cfg);
        let bins = &p.profiles[0].bins;
        assert_eq!(bins.len(), 19);
        assert!((bins.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // 23:10 falls in bin 10; support is bins 8..=12.
        for (i, b) in bins.iter().enumerate() {
            assert_eq!(*b > 0.0, (8..=12).contains(&i), "bin {i}");
        }
    }

    #[test]
    fn uniform_counts_stay_uniform() {
        let cfg = ClusteringConfig::default();
        let day = d("2014-02-04");
        let start = d("2014-02-03").and_hms_opt(18, 0, 0).unwrap();
        let ts: Vec<_> = (0..19).map(|i| start + Duration::minutes(30 * i + 5)).collect();
        let p = build_tweeting_profiles(&ts, &[day], &cfg);
        for b in &p.profiles[0].bins {
            assert!((b - 1.0 / 19.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_day_is_reported() {
        let cfg = ClusteringConfig::default();
        let p = build_tweeting_profiles(&[], &[d("2014-02-04")], &cfg);
        assert!(p.profiles.is_empty());
        assert_eq!(p.empty, vec![d("2014-02-04")]);
    }
}
