use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::geocode::TractIndex;
use super::sentiment::SentimentLabel;
use crate::config::TweetConfig;
use crate::geo::{BBox, LatLon};
use crate::ingest::{Tweet, TweetKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Period {
    Em,
    Am,
    Da,
    Ev,
    Ln,
    Mn,
}

impl Period {
    pub const ALL: [Period; 6] = [Period::Em, Period::Am, Period::Da, Period::Ev, Period::Ln, Period::Mn];

    pub fn name(self) -> &'static str {
        match self {
            Period::Em => "EM",
            Period::Am => "AM",
            Period::Da => "DA",
            Period::Ev => "EV",
            Period::Ln => "LN",
            Period::Mn => "MN",
        }
    }

    pub fn of_hour(h: u32) -> Period {
        match h {
            3..=4 => Period::Em,
            5..=8 => Period::Am,
            9..=17 => Period::Da,
            18..=20 => Period::Ev,
            21..=23 => Period::Ln,
            _ => Period::Mn,
        }
    }

    /// Start of the period relative to midnight of the prediction day, in
    /// hours. AM, DA, EV and LN belong to the previous calendar day.
    pub fn start_offset(self) -> i64 {
        match self {
            Period::Em => 3,
            Period::Am => -19,
            Period::Da => -15,
            Period::Ev => -6,
            Period::Ln => -3,
            Period::Mn => 0,
        }
    }

    pub fn index(self) -> usize {
        Period::ALL.iter().position(|p| *p == self).unwrap()
    }
}

/// Hour of day to hours relative to midnight of the prediction day (21 -> -3).
pub fn night_offset(hour: u32) -> i64 {
    if hour >= 12 {
        hour as i64 - 24
    } else {
        hour as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetFeatureVector {
    pub date: NaiveDate,
    /// Tract-major: index `tract * sleep_hours.len() + hour_pos`.
    pub sleep_hist: Vec<f64>,
    pub wake_hist: Vec<f64>,
    pub period_counts: [f64; 6],
    pub neutral_pct: [f64; 6],
}

fn window(date: NaiveDate, hours: &[u32]) -> Option<(NaiveDateTime, NaiveDateTime)> {
    let lo = hours.iter().map(|h| night_offset(*h)).min()?;
    let hi = hours.iter().map(|h| night_offset(*h)).max()? + 1;
    let midnight = date.and_hms_opt(0, 0, 0).unwrap();
    Some((midnight + Duration::hours(lo), midnight + Duration::hours(hi)))
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Sleep and wake pulses of day `date` from per-user augmented timelines
/// (each sorted by time). A user's last tweet in the sleep window and first
/// tweet in the wake window each add one count to a tract x hour bin.
pub fn encode_sleep_wake<'a, I>(date: NaiveDate, timelines: I, tracts: &TractIndex, cfg: &TweetConfig) -> (Vec<f64>, Vec<f64>)
where
    I: IntoIterator<Item = &'a [Tweet]>,
{
    let (ns, nw) = (cfg.sleep_hours.len(), cfg.wake_hours.len());
    let mut sleep = vec![0.0; tracts.len() * ns];
    let mut wake = vec![0.0; tracts.len() * nw];
    let sw = window(date, &cfg.sleep_hours);
    let ww = window(date, &cfg.wake_hours);
    let usable = |t: &&Tweet| cfg.include_shared_kinds || matches!(t.kind, TweetKind::Geocoded | TweetKind::Timeline);
    let bin = |t: &Tweet, hours: &[u32]| -> Option<usize> {
        let tract = tracts.locate(t.coord.as_ref()?)?;
        let h = hours.iter().position(|h| *h == t.timestamp.hour())?;
        Some(tract * hours.len() + h)
    };
    for tl in timelines {
        if let Some((a, b)) = sw {
            if let Some(t) = tl.iter().filter(usable).rfind(|t| t.timestamp >= a && t.timestamp < b) {
                if let Some(i) = bin(t, &cfg.sleep_hours) {
                    sleep[i] += 1.0;
                }
            }
        }
        if let Some((a, b)) = ww {
            if let Some(t) = tl.iter().filter(usable).find(|t| t.timestamp >= a && t.timestamp < b) {
                if let Some(i) = bin(t, &cfg.wake_hours) {
                    wake[i] += 1.0;
                }
            }
        }
    }
    normalize(&mut sleep);
    normalize(&mut wake);
    (sleep, wake)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledTweet {
    pub timestamp: NaiveDateTime,
    pub coord: Option<LatLon>,
    pub label: SentimentLabel,
}

/// Start and end of the 24 hours of geocoded activity that feed day `date`.
pub fn event_window(date: NaiveDate) -> (NaiveDateTime, NaiveDateTime) {
    let m = date.and_hms_opt(0, 0, 0).unwrap();
    (m + Duration::hours(Period::Am.start_offset()), m + Duration::hours(5))
}

/// Per-period tweet counts and neutral shares for day `date`.
pub fn encode_event_indicators(date: NaiveDate, tweets: &[LabeledTweet], bbox: &BBox) -> ([f64; 6], [f64; 6]) {
    let (a, b) = event_window(date);
    let mut counts = [0.0; 6];
    let mut neutral = [0.0; 6];
    for t in tweets {
        if t.timestamp < a || t.timestamp >= b || !t.coord.is_some_and(|c| bbox.contains(&c)) {
            continue;
        }
        let p = Period::of_hour(t.timestamp.hour()).index();
        counts[p] += 1.0;
        if t.label == SentimentLabel::Neu {
            neutral[p] += 1.0;
        }
    }
    let pct = std::array::from_fn(|i| if counts[i] > 0.0 { neutral[i] / counts[i] } else { 0.0 });
    (counts, pct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Ring;
    use crate::ingest::TractPolygon;

    fn tracts() -> TractIndex {
        let sq = |id: &str, lon0: f64| TractPolygon {
            tract_id: id.into(),
            ring: Ring::new(vec![
                LatLon::new(40.0, lon0),
                LatLon::new(40.0, lon0 + 0.1),
                LatLon::new(40.1, lon0 + 0.1),
                LatLon::new(40.1, lon0),
            ]),
        };
        TractIndex::new(&[sq("A", -80.0), sq("B", -79.9)])
    }

    fn tw(ts: &str, lon: f64) -> Tweet {
        Tweet {
            tweet_id: String::new(),
            user_id: "u".into(),
            timestamp: ts.parse().unwrap(),
            kind: TweetKind::Timeline,
            coord: Some(LatLon::new(40.05, lon)),
            profile_location: None,
            text: String::new(),
        }
    }

    fn day() -> NaiveDate {
        "2014-02-04".parse().unwrap()
    }

    #[test]
    fn single_last_tweet() {
        let cfg = TweetConfig::default();
        let tl = vec![tw("2014-02-03T22:15:00", -79.95)];
        let (sleep, wake) = encode_sleep_wake(day(), [tl.as_slice()], &tracts(), &cfg);
        assert_eq!(sleep.iter().sum::<f64>(), 1.0);
        assert_eq!(sleep[1], 1.0); // (A, 22)
        assert!(wake.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn only_last_tweet_counts() {
        let cfg = TweetConfig::default();
        let tl = vec![tw("2014-02-03T22:00:00", -79.95), tw("2014-02-03T23:30:00", -79.85)];
        let (sleep, _) = encode_sleep_wake(day(), [tl.as_slice()], &tracts(), &cfg);
        assert_eq!(sleep[6 + 2], 1.0); // (B, 23)
        assert_eq!(sleep.iter().filter(|v| **v > 0.0).count(), 1);
    }

    #[test]
    fn wake_takes_first_early_tweet() {
        let cfg = TweetConfig::default();
        let tl = vec![tw("2014-02-04T03:10:00", -79.95), tw("2014-02-04T04:30:00", -79.85)];
        let (_, wake) = encode_sleep_wake(day(), [tl.as_slice()], &tracts(), &cfg);
        assert_eq!(wake, vec![1.0, 0.0, 0.0, 0.0]);
    }

    fn lt(ts: &str, label: SentimentLabel) -> LabeledTweet {
        LabeledTweet { timestamp: ts.parse().unwrap(), coord: Some(LatLon::new(40.44, -79.99)), label }
    }

    #[test]
    fn period_counts() {
        let bbox = BBox::default();
        let t: Vec<_> = (0..3).map(|_| lt("2014-02-03T19:00:00", SentimentLabel::Neu)).collect();
        let (c, n) = encode_event_indicators(day(), &t, &bbox);
        assert_eq!(c[Period::Ev.index()], 3.0);
        assert_eq!(n[Period::Ev.index()], 1.0);
        assert_eq!(c[Period::Em.index()], 0.0);
        assert_eq!(n[Period::Em.index()], 0.0);
    }

    #[test]
    fn period_table() {
        assert_eq!(Period::of_hour(3), Period::Em);
        assert_eq!(Period::of_hour(5), Period::Am);
        assert_eq!(Period::of_hour(9), Period::Da);
        assert_eq!(Period::of_hour(18), Period::Ev);
        assert_eq!(Period::of_hour(21), Period::Ln);
        assert_eq!(Period::of_hour(0), Period::Mn);
        assert_eq!(night_offset(21), -3);
    }
}
