use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::ingest::WeatherRecord;

pub const CONTINUOUS: [&str; 6] = ["temp", "humidity", "wind", "pressure", "visibility", "precip"];
pub const PER_HOUR: usize = 8;

fn continuous(r: &WeatherRecord) -> [f64; 6] {
    [r.temp, r.humidity, r.wind, r.pressure, r.visibility, r.precip]
}

/// Min-max statistics of the continuous fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherScaler {
    pub min: [f64; 6],
    pub max: [f64; 6],
}

impl WeatherScaler {
    pub fn fit<'a>(records: impl IntoIterator<Item = &'a WeatherRecord>) -> Self {
        let mut min = [f64::INFINITY; 6];
        let mut max = [f64::NEG_INFINITY; 6];
        for r in records {
            for (i, v) in continuous(r).iter().enumerate() {
                min[i] = min[i].min(*v);
                max[i] = max[i].max(*v);
            }
        }
        for i in 0..6 {
            if !min[i].is_finite() {
                min[i] = 0.0;
                max[i] = 0.0;
            }
        }
        WeatherScaler { min, max }
    }

    /// Constant fields map to 0; values outside the fitted range pass through.
    pub fn scale(&self, i: usize, v: f64) -> f64 {
        let span = self.max[i] - self.min[i];
        if span <= 0.0 {
            0.0
        } else {
            (v - self.min[i]) / span
        }
    }
}

/// Sorted weather records with hourly lookup.
#[derive(Debug, Clone, Default)]
pub struct WeatherIndex {
    records: Vec<WeatherRecord>,
}

impl WeatherIndex {
    pub fn new(records: &[WeatherRecord]) -> Self {
        let mut r = records.to_vec();
        r.sort_by_key(|w| w.timestamp);
        WeatherIndex { records: r }
    }

    /// Record for the given hour; a missing hour carries the previous record forward.
    pub fn at(&self, ts: NaiveDateTime) -> Option<&WeatherRecord> {
        let i = self.records.partition_point(|w| w.timestamp <= ts);
        if i > 0 {
            let r = &self.records[i - 1];
            if r.timestamp != ts {
                log::debug!("weather missing at {ts}; carrying {} forward", r.timestamp);
            }
            Some(r)
        } else {
            self.records.first()
        }
    }

    /// Records of hours 0..hours on each date, for fitting scalers.
    pub fn morning_records(&self, dates: &[NaiveDate], hours: u32) -> Vec<&WeatherRecord> {
        dates
            .iter()
            .flat_map(|d| (0..hours as i64).filter_map(move |h| self.at(d.and_hms_opt(0, 0, 0).unwrap() + Duration::hours(h))))
            .collect()
    }
}

pub fn weather_names(hours: u32) -> Vec<String> {
    let mut v = Vec::new();
    for h in 0..hours {
        for c in CONTINUOUS {
            v.push(format!("{c}_{h}"));
        }
        v.push(format!("wet_{h}"));
        v.push(format!("wx_{h}"));
    }
    v
}

/// Scaled hourly weather for hours 0..hours of `date`, hour-major.
pub fn weather_features(idx: &WeatherIndex, date: NaiveDate, scaler: &WeatherScaler, hours: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(hours as usize * PER_HOUR);
    for h in 0..hours as i64 {
        match idx.at(date.and_hms_opt(0, 0, 0).unwrap() + Duration::hours(h)) {
            Some(r) => {
                for (i, v) in continuous(r).iter().enumerate() {
                    out.push(scaler.scale(i, *v));
                }
                out.push(if r.pavement_wet { 1.0 } else { 0.0 });
                out.push(r.wx_severity as f64);
            }
            None => out.extend([0.0; PER_HOUR]),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ts: &str, temp: f64, hum: f64) -> WeatherRecord {
        WeatherRecord {
            timestamp: ts.parse().unwrap(),
            temp,
            humidity: hum,
            wind: 5.0,
            pressure: 30.0,
            visibility: 10.0,
            precip: 0.0,
            pavement_wet: false,
            wx_severity: 0,
        }
    }

    #[test]
    fn min_max_rules() {
        let r = vec![rec("2014-02-03T00:00:00", 10.0, 50.0), rec("2014-02-03T01:00:00", 30.0, 70.0)];
        let s = WeatherScaler::fit(&r);
        assert_eq!(s.scale(0, 10.0), 0.0);
        assert_eq!(s.scale(0, 30.0), 1.0);
        assert_eq!(s.scale(2, 5.0), 0.0);
        assert_eq!(s.scale(0, 40.0), 1.5);
    }

    #[test]
    fn missing_hour_carries_forward() {
        let r = vec![rec("2014-02-03T00:00:00", 10.0, 50.0), rec("2014-02-03T02:00:00", 30.0, 70.0)];
        let idx = WeatherIndex::new(&r);
        let s = WeatherScaler::fit(&r);
        let f = weather_features(&idx, "2014-02-03".parse().unwrap(), &s, 3);
        assert_eq!(f.len(), 3 * PER_HOUR);
        assert_eq!(f[PER_HOUR], f[0]);
        assert_eq!(f[2 * PER_HOUR], 1.0);
        assert_eq!(weather_names(3)[PER_HOUR], "temp_1");
    }
}
