use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

pub fn cyclic_encode(i: f64, period: f64) -> (f64, f64) {
    let a = 2.0 * PI * i / period;
    (a.sin(), a.cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeFeatures {
    pub mon_sin: f64,
    pub mon_cos: f64,
    pub week_sin: f64,
    pub week_cos: f64,
    pub dow_mon: f64,
    pub dow_tue_thu: f64,
    pub dow_fri: f64,
    pub dow_wkd_holiday: f64,
    pub nxt_rest: f64,
    pub lst_rest: f64,
}

pub const TIME_NAMES: [&str; 10] =
    ["mon_sin", "mon_cos", "week_sin", "week_cos", "dow_mon", "dow_tue_thu", "dow_fri", "dow_wkd_holiday", "nxt_rest", "lst_rest"];

impl TimeFeatures {
    pub fn values(&self) -> [f64; 10] {
        [
            self.mon_sin,
            self.mon_cos,
            self.week_sin,
            self.week_cos,
            self.dow_mon,
            self.dow_tue_thu,
            self.dow_fri,
            self.dow_wkd_holiday,
            self.nxt_rest,
            self.lst_rest,
        ]
    }
}

pub fn is_rest_day(d: NaiveDate, holiday: &dyn Fn(NaiveDate) -> bool) -> bool {
    matches!(d.weekday(), Weekday::Sat | Weekday::Sun) || holiday(d)
}

/// Calendar features; `holiday` reports official holidays.
pub fn time_features(date: NaiveDate, holiday: &dyn Fn(NaiveDate) -> bool) -> TimeFeatures {
    let (mon_sin, mon_cos) = cyclic_encode(date.month0() as f64, 12.0);
    let (week_sin, week_cos) = cyclic_encode((date.ordinal0() / 7) as f64, 52.0);
    let rest = is_rest_day(date, holiday);
    let wd = date.weekday();
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let dist = |step: i64| -> f64 {
        (1..=31).find(|k| is_rest_day(date + Duration::days(step * k), holiday)).unwrap_or(31) as f64
    };
    TimeFeatures {
        mon_sin,
        mon_cos,
        week_sin,
        week_cos,
        dow_mon: flag(!rest && wd == Weekday::Mon),
        dow_tue_thu: flag(!rest && matches!(wd, Weekday::Tue | Weekday::Wed | Weekday::Thu)),
        dow_fri: flag(!rest && wd == Weekday::Fri),
        dow_wkd_holiday: flag(rest),
        nxt_rest: dist(1),
        lst_rest: dist(-1),
    }
}
