//! Deterministic synthetic datasets with a ground-truth sidecar.
//!
//! A latent nightly sleep index shifts residents' last-tweet times and drives
//! next-morning demand. Demand, planned incidents and rain set each segment's
//! congestion onset and duration, which are written out as 5-min speeds.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::types::*;
use crate::congestion::{percentile, MORNING_SLOTS};
use crate::error::{Error, Result};
use crate::geo::{haversine_km, offset_m, BBox, LatLon, Ring};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub n_roads: usize,
    pub segments_per_road: usize,
    pub segment_km: f64,
    /// Resident accounts.
    pub n_users: usize,
    pub n_tourists: usize,
    pub n_bots: usize,
    pub n_tracts: usize,
    /// Morning demand per unit of the sleep index, in [0, 3].
    pub sleep_effect: f64,
    /// Hours by which bedtimes move earlier per unit of the sleep index, in [0, 2].
    pub sleep_shift_h: f64,
    /// Demand added on segments behind a full closure, in [0, 3]; half for partial closures.
    pub incident_effect: f64,
    /// Extra congestion duration on rainy mornings, slots in [0, 24].
    pub weather_effect: f64,
    /// Standard deviation of the unexplained daily demand, in [0, 2].
    pub demand_noise: f64,
    /// Probability of planned roadwork per road-day.
    pub incident_rate: f64,
    /// Probability of an unplanned crash per road-day.
    pub crash_rate: f64,
    pub rain_rate: f64,
    pub event_rate: f64,
    /// Share of incidents reported only through agency tweets.
    pub tweet_only_frac: f64,
    /// Share of pre-05:00 speed samples dropped.
    pub missing_rate: f64,
    /// First hour of speed samples written per day.
    pub speed_start_hour: u32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            start_date: NaiveDate::from_ymd_opt(2014, 1, 23).unwrap(),
            n_days: 300,
            n_roads: 4,
            segments_per_road: 10,
            segment_km: 1.5,
            n_users: 160,
            n_tourists: 30,
            n_bots: 6,
            n_tracts: 8,
            sleep_effect: 1.0,
            sleep_shift_h: 0.75,
            incident_effect: 1.5,
            weather_effect: 6.0,
            demand_noise: 0.4,
            incident_rate: 0.15,
            crash_rate: 0.05,
            rain_rate: 0.2,
            event_rate: 0.06,
            tweet_only_frac: 0.3,
            missing_rate: 0.01,
            speed_start_hour: 3,
        }
    }
}

impl SyntheticConfig {
    /// The same generator with every behavioural effect switched off.
    pub fn null_effect(&self) -> Self {
        SyntheticConfig {
            sleep_effect: 0.0,
            incident_effect: 0.0,
            weather_effect: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_days == 0 || self.n_roads == 0 || self.segments_per_road == 0 {
            return bad("n_days, n_roads and segments_per_road must be positive");
        }
        if self.n_users == 0 || self.n_tracts == 0 {
            return bad("n_users and n_tracts must be positive");
        }
        if !(self.segment_km > 0.0 && self.segment_km <= 10.0) {
            return bad("segment_km must be in (0, 10]");
        }
        let ranges = [
            ("sleep_effect", self.sleep_effect, 3.0),
            ("sleep_shift_h", self.sleep_shift_h, 2.0),
            ("incident_effect", self.incident_effect, 3.0),
            ("weather_effect", self.weather_effect, 24.0),
            ("demand_noise", self.demand_noise, 2.0),
            ("incident_rate", self.incident_rate, 1.0),
            ("crash_rate", self.crash_rate, 1.0),
            ("rain_rate", self.rain_rate, 1.0),
            ("event_rate", self.event_rate, 1.0),
            ("tweet_only_frac", self.tweet_only_frac, 1.0),
            ("missing_rate", self.missing_rate, 0.5),
        ];
        for (name, v, hi) in ranges {
            if !(0.0..=hi).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside [0, {hi}]")));
            }
        }
        if self.speed_start_hour > 4 {
            return bad("speed_start_hour must be at most 4");
        }
        Ok(())
    }
}

/// Latent state of one prediction day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayLatent {
    pub date: NaiveDate,
    /// Positive values mean residents went to bed early the night before.
    pub sleep_index: f64,
    pub demand: f64,
    pub rest_day: bool,
    pub rain_start_hour: Option<u32>,
    pub event_night: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDayTruth {
    pub segment_id: String,
    pub date: NaiveDate,
    pub cs: bool,
    pub cst: u32,
    pub cd: Option<u32>,
    pub pti: Option<f64>,
    pub margin: f64,
    pub incident_boost: f64,
    /// Start time the segment would have had without any incident.
    pub cst_without_incidents: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedIncident {
    pub incident_id: String,
    pub road_id: String,
    pub segment_order: u32,
    pub closure_type: ClosureType,
    pub category: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub start_mp: f64,
    pub end_mp: f64,
    pub tweet_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub config: SyntheticConfig,
    pub days: Vec<DayLatent>,
    pub segment_days: Vec<SegmentDayTruth>,
    pub incidents: Vec<InjectedIncident>,
}

pub const TRUTH_FILE: &str = "truth.json";
pub const AGENCY_USER: &str = "511PAPittsburgh";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

impl SyntheticBundle {
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        self.dataset.write_dir(dir)?;
        let text = serde_json::to_string_pretty(&self.truth)?;
        std::fs::write(dir.join(TRUTH_FILE), text + "\n")?;
        Ok(())
    }
}

pub fn read_truth(dir: &Path) -> Result<GroundTruth> {
    let path = dir.join(TRUTH_FILE);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

const ROAD_TEMPLATES: [(&str, (f64, f64), (f64, f64), f64, f64); 4] = [
    ("I-279S", (40.565, -80.085), (40.445, -80.010), 8.0, 62.0),
    ("I-376W", (40.430, -79.840), (40.440, -80.020), 70.0, 58.0),
    ("I-376E", (40.420, -80.180), (40.445, -80.010), 52.0, 60.0),
    ("PA-28S", (40.590, -79.830), (40.460, -79.975), 4.0, 55.0),
];

const RESIDENT_PROFILES: [&str; 13] = [
    "Pittsburgh, PA",
    "pgh",
    "da burgh",
    "Steel City",
    "Shadyside, Pittsburgh",
    "Pittsburgh",
    "412",
    "Oakland",
    "Squirrel Hill",
    "CMU",
    "Lawrenceville",
    "yinzer nation",
    "Pittsburgh, PA 15213",
];

const VISITOR_PROFILES: [&str; 6] = ["New York, NY", "Chicago, IL", "Cleveland, OH", "", "Los Angeles", "Boston"];

const EVENING_TEXTS: [&str; 12] = [
    "what a day",
    "dinner with friends was great",
    "ugh so tired of this",
    "watching the game tonight",
    "love this city",
    "#LetsGoPens",
    "nothing to do lol",
    "stuck in traffic again, worst",
    "happy friday everyone",
    "reading a book",
    "Soooo good lololol",
    "this weather is awful",
];

const BED_TEXTS: [&str; 5] = [
    "going to bed, good night",
    "time to sleep",
    "watching tv on the sofa",
    "in bed already",
    "gn all",
];

const WAKE_TEXTS: [&str; 4] = ["up early, coffee time", "wake up wake up", "morning shift again ugh", "early bath and coffee"];

const DAY_TEXTS: [&str; 6] = [
    "busy day at work",
    "lunch break!",
    "meeting after meeting",
    "great coffee downtown",
    "bad traffic this morning",
    "nice walk in the park",
];

const EVENT_TEXTS: [&str; 4] = ["#LetsGoPens great win!", "amazing game tonight", "love this team", "best night ever lets go"];

fn sub_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (v * f).round() / f
}

fn round_coord(p: LatLon) -> LatLon {
    LatLon::new(round_to(p.lat, 6), round_to(p.lon, 6))
}

fn nth_weekday(year: i32, month: u32, wd: Weekday, n: u32) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, wd, n as u8).unwrap()
}

fn last_weekday(year: i32, month: u32, wd: Weekday) -> NaiveDate {
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .unwrap();
    let mut d = next - Duration::days(1);
    while d.weekday() != wd {
        d -= Duration::days(1);
    }
    d
}

/// US federal holidays observed by the calendar generator.
pub fn federal_holidays(year: i32) -> Vec<NaiveDate> {
    vec![
        NaiveDate::from_ymd_opt(year, 1, 1).unwrap(),
        nth_weekday(year, 1, Weekday::Mon, 3),
        nth_weekday(year, 2, Weekday::Mon, 3),
        last_weekday(year, 5, Weekday::Mon),
        NaiveDate::from_ymd_opt(year, 7, 4).unwrap(),
        nth_weekday(year, 9, Weekday::Mon, 1),
        nth_weekday(year, 11, Weekday::Thu, 4),
        NaiveDate::from_ymd_opt(year, 12, 25).unwrap(),
    ]
}

fn rect(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Ring {
    let r = |v: f64| round_to(v, 6);
    Ring::new(vec![
        LatLon::new(r(min_lat), r(min_lon)),
        LatLon::new(r(min_lat), r(max_lon)),
        LatLon::new(r(max_lat), r(max_lon)),
        LatLon::new(r(max_lat), r(min_lon)),
    ])
}

struct Road {
    id: String,
    segments: Vec<SegmentDescriptor>,
    free_flow: Vec<f64>,
}

impl Road {
    fn name_and_direction(&self) -> (String, &'static str) {
        road_name_direction(&self.id)
    }

    fn point_at_mp(&self, mp: f64) -> LatLon {
        for s in &self.segments {
            if mp >= s.start_mp && mp <= s.end_mp {
                let t = if s.end_mp > s.start_mp { (mp - s.start_mp) / (s.end_mp - s.start_mp) } else { 0.0 };
                return s.start.lerp(&s.end, t);
            }
        }
        self.segments.last().unwrap().end
    }
}

/// Split a road id such as `I-376E` into its name and travel direction.
pub fn road_name_direction(road_id: &str) -> (String, &'static str) {
    let (name, dir) = road_id.split_at(road_id.len().saturating_sub(1));
    let dir = match dir {
        "E" => "eastbound",
        "W" => "westbound",
        "N" => "northbound",
        "S" => "southbound",
        _ => return (road_id.to_string(), ""),
    };
    (name.to_string(), dir)
}

fn build_roads(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Vec<Road> {
    let mut roads = Vec::new();
    for r in 0..cfg.n_roads {
        let (id, a, b, base_mp, vff) = if r < ROAD_TEMPLATES.len() {
            let t = ROAD_TEMPLATES[r];
            (t.0.to_string(), t.1, t.2, t.3, t.4)
        } else {
            let lat = 40.32 + 0.02 * (r - ROAD_TEMPLATES.len()) as f64;
            (format!("SR-{}E", 100 + r), (lat, -80.17), (lat + 0.01, -79.85), 1.0, 50.0)
        };
        let start = LatLon::new(a.0, a.1);
        let north = (b.0 - a.0) * 111.2;
        let east = (b.1 - a.1) * 111.2 * a.0.to_radians().cos();
        let norm = (north * north + east * east).sqrt();
        let (un, ue) = (north / norm, east / norm);
        let mut segments = Vec::new();
        let mut free_flow = Vec::new();
        for k in 0..cfg.segments_per_road {
            let d0 = k as f64 * cfg.segment_km * 1000.0;
            let d1 = (k + 1) as f64 * cfg.segment_km * 1000.0;
            segments.push(SegmentDescriptor {
                segment_id: format!("10{}+{:05}", 4 + r, 1000 + 10 * k),
                road_id: id.clone(),
                order_on_road: k as u32,
                start_mp: round_to(base_mp + k as f64 * cfg.segment_km, 3),
                end_mp: round_to(base_mp + (k + 1) as f64 * cfg.segment_km, 3),
                start: round_coord(offset_m(&start, un * d0, ue * d0)),
                end: round_coord(offset_m(&start, un * d1, ue * d1)),
            });
            free_flow.push(vff * (1.0 - 0.05 * rng.gen::<f64>()));
        }
        roads.push(Road { id, segments, free_flow });
    }
    roads
}

fn build_tracts(cfg: &SyntheticConfig, bbox: &BBox) -> Vec<TractPolygon> {
    let cols = ((cfg.n_tracts as f64).sqrt() * 1.2).ceil().max(1.0) as usize;
    let rows = cfg.n_tracts.div_ceil(cols);
    let dlat = (bbox.max_lat - bbox.min_lat) / rows as f64;
    let dlon = (bbox.max_lon - bbox.min_lon) / cols as f64;
    (0..cfg.n_tracts)
        .map(|i| {
            let (c, r) = (i % cols, i / cols);
            let lat0 = bbox.min_lat + r as f64 * dlat;
            let lon0 = bbox.min_lon + c as f64 * dlon;
            TractPolygon {
                tract_id: format!("42003{:06}", 100 * (i + 1)),
                ring: rect(lat0, lon0, lat0 + dlat, lon0 + dlon),
            }
        })
        .collect()
}

fn build_zones(bbox: &BBox, rng: &mut ChaCha8Rng) -> Vec<ZonePolygon> {
    let (cols, rows) = (12usize, 8usize);
    let dlat = (bbox.max_lat - bbox.min_lat) / rows as f64;
    let dlon = (bbox.max_lon - bbox.min_lon) / cols as f64;
    let mut uses: Vec<LandUse> = (0..cols * rows)
        .map(|_| {
            let u: f64 = rng.gen();
            match u {
                u if u < 0.45 => LandUse::Residence,
                u if u < 0.60 => LandUse::MixedUse,
                u if u < 0.70 => LandUse::Education,
                u if u < 0.78 => LandUse::Downtown,
                u if u < 0.90 => LandUse::Industry,
                _ => LandUse::Amenity,
            }
        })
        .collect();
    for (i, lu) in LandUse::ALL.iter().enumerate() {
        if !uses.contains(lu) {
            uses[i * 7] = *lu;
        }
    }
    uses.iter()
        .enumerate()
        .map(|(i, lu)| {
            let (c, r) = (i % cols, i / cols);
            let lat0 = bbox.min_lat + r as f64 * dlat;
            let lon0 = bbox.min_lon + c as f64 * dlon;
            ZonePolygon { land_use: *lu, ring: rect(lat0, lon0, lat0 + dlat, lon0 + dlon) }
        })
        .collect()
}

fn point_in_zone(z: &ZonePolygon, rng: &mut ChaCha8Rng) -> LatLon {
    let b = z.ring.bbox().unwrap();
    let u: f64 = rng.gen_range(0.15..0.85);
    let v: f64 = rng.gen_range(0.15..0.85);
    LatLon::new(b.min_lat + u * (b.max_lat - b.min_lat), b.min_lon + v * (b.max_lon - b.min_lon))
}

fn jitter(p: &LatLon, meters: f64, rng: &mut ChaCha8Rng) -> LatLon {
    round_coord(offset_m(p, rng.gen_range(-meters..meters), rng.gen_range(-meters..meters)))
}

fn pick<'a, T>(v: &'a [T], rng: &mut ChaCha8Rng) -> &'a T {
    &v[rng.gen_range(0..v.len())]
}

struct Resident {
    id: String,
    profile: String,
    home: LatLon,
    work: LatLon,
    bedtime: f64,
    geo_p: f64,
}

/// Timestamp `hours` after midnight of `date`, at minute resolution.
fn at_hours(date: NaiveDate, hours: f64) -> NaiveDateTime {
    date.and_hms_opt(0, 0, 0).unwrap() + Duration::minutes((hours * 60.0).round() as i64)
}

struct TweetSink {
    tweets: Vec<Tweet>,
}

impl TweetSink {
    fn push(&mut self, user: &str, ts: NaiveDateTime, coord: Option<LatLon>, kind: TweetKind, profile: &str, text: &str) {
        self.tweets.push(Tweet {
            tweet_id: String::new(),
            user_id: user.to_string(),
            timestamp: ts,
            kind,
            coord,
            profile_location: (!profile.is_empty()).then(|| profile.to_string()),
            text: text.to_string(),
        });
    }

    fn personal(&mut self, r: &Resident, ts: NaiveDateTime, place: &LatLon, geo_p: f64, text: &str, rng: &mut ChaCha8Rng) {
        if rng.gen::<f64>() < geo_p {
            let c = jitter(place, 25.0, rng);
            self.push(&r.id, ts, Some(c), TweetKind::Geocoded, &r.profile, text);
        } else {
            let u: f64 = rng.gen();
            let kind = if u < 0.8 {
                TweetKind::Timeline
            } else if u < 0.9 {
                TweetKind::Retweet
            } else {
                TweetKind::Favorite
            };
            self.push(&r.id, ts, None, kind, &r.profile, text);
        }
    }
}

/// Start slot and duration of the designed congestion for a positive margin.
fn design_period(margin: f64, upstream_rank: usize, extra: f64) -> (usize, usize) {
    let start = (30.0 + 2.0 * upstream_rank as f64 - 8.0 * margin).round().clamp(3.0, 60.0) as usize;
    let dur = (6.0 + 10.0 * margin + extra).round().max(3.0) as usize;
    (start, dur.min(MORNING_SLOTS - start))
}

/// Generate a complete dataset bundle. Identical `(cfg, seed)` give identical output.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticBundle> {
    cfg.validate()?;
    let bbox = BBox::default();
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    let mut geo_rng = sub_rng(seed, 1);
    let roads = build_roads(cfg, &mut geo_rng);
    let tracts = build_tracts(cfg, &bbox);
    let zones = build_zones(&bbox, &mut geo_rng);

    let days: Vec<NaiveDate> = (0..cfg.n_days).map(|i| cfg.start_date + Duration::days(i as i64)).collect();
    let mut holidays = Vec::new();
    for y in days[0].year() - 1..=days[days.len() - 1].year() + 1 {
        holidays.extend(federal_holidays(y));
    }
    let calendar: Vec<CalendarInfo> = days
        .iter()
        .map(|d| CalendarInfo { date: *d, is_holiday: holidays.contains(d) })
        .collect();

    // Daily latents.
    let mut lat_rng = sub_rng(seed, 2);
    let noise = Normal::new(0.0, cfg.demand_noise.max(1e-12)).unwrap();
    let latents: Vec<DayLatent> = days
        .iter()
        .map(|d| {
            let s: f64 = std_normal.sample(&mut lat_rng);
            let eps = if cfg.demand_noise > 0.0 { noise.sample(&mut lat_rng) } else { 0.0 };
            let rest = matches!(d.weekday(), Weekday::Sat | Weekday::Sun) || holidays.contains(d);
            let base = match d.weekday() {
                _ if rest => -3.0,
                Weekday::Mon => 0.3,
                Weekday::Fri => 0.0,
                _ => 0.5,
            };
            let rain = (lat_rng.gen::<f64>() < cfg.rain_rate).then(|| lat_rng.gen_range(0..5));
            let event = lat_rng.gen::<f64>() < cfg.event_rate;
            DayLatent {
                date: *d,
                sleep_index: s,
                demand: base + cfg.sleep_effect * s + eps,
                rest_day: rest,
                rain_start_hour: rain,
                event_night: event,
            }
        })
        .collect();

    // Incidents.
    let mut inc_rng = sub_rng(seed, 3);
    let mut injected: Vec<InjectedIncident> = Vec::new();
    for d in &days {
        for road in &roads {
            let n = road.segments.len();
            if inc_rng.gen::<f64>() < cfg.incident_rate {
                let j = inc_rng.gen_range(n / 3..n);
                let full = inc_rng.gen::<f64>() < 0.6;
                let seg = &road.segments[j];
                let len = seg.end_mp - seg.start_mp;
                injected.push(InjectedIncident {
                    incident_id: String::new(),
                    road_id: road.id.clone(),
                    segment_order: j as u32,
                    closure_type: if full { ClosureType::Full } else { ClosureType::Partial },
                    category: "roadwork".into(),
                    start: d.and_hms_opt(4, 30, 0).unwrap(),
                    end: d.and_hms_opt(9, 30, 0).unwrap(),
                    start_mp: round_to(seg.start_mp + 0.2 * len, 1),
                    end_mp: round_to(seg.start_mp + 0.7 * len, 1),
                    tweet_only: inc_rng.gen::<f64>() < cfg.tweet_only_frac,
                });
            }
            if inc_rng.gen::<f64>() < cfg.crash_rate {
                let j = inc_rng.gen_range(0..n);
                let seg = &road.segments[j];
                let start = d.and_hms_opt(6, 0, 0).unwrap() + Duration::minutes(inc_rng.gen_range(0..210));
                let mp = round_to(inc_rng.gen_range(seg.start_mp..seg.end_mp), 1);
                injected.push(InjectedIncident {
                    incident_id: String::new(),
                    road_id: road.id.clone(),
                    segment_order: j as u32,
                    closure_type: if inc_rng.gen::<f64>() < 0.5 { ClosureType::Full } else { ClosureType::Partial },
                    category: "crash".into(),
                    start,
                    end: start + Duration::minutes(inc_rng.gen_range(30..90)),
                    start_mp: mp,
                    end_mp: mp,
                    tweet_only: inc_rng.gen::<f64>() < cfg.tweet_only_frac,
                });
            }
        }
    }
    for (i, inc) in injected.iter_mut().enumerate() {
        inc.incident_id = format!("INC{:05}", i + 1);
    }

    // Speeds and the truth sidecar.
    let mut spd_rng = sub_rng(seed, 4);
    let mut speeds = Vec::new();
    let mut truth_days = Vec::new();
    let first_slot = (cfg.speed_start_hour * 12) as usize;
    let morning0 = 60usize;
    let clamp_z = |z: f64| z.clamp(-3.0, 3.0);
    for (di, d) in days.iter().enumerate() {
        let lat = &latents[di];
        let extra = if lat.rain_start_hour.is_some() { cfg.weather_effect } else { 0.0 };
        for road in &roads {
            let n = road.segments.len();
            let todays: Vec<&InjectedIncident> = injected
                .iter()
                .filter(|x| x.road_id == road.id && x.category == "roadwork" && x.start.date() == *d)
                .collect();
            for (k, seg) in road.segments.iter().enumerate() {
                let upstream_rank = n - 1 - k;
                let theta = if n > 1 { -1.0 + 2.5 * upstream_rank as f64 / (n - 1) as f64 } else { 0.0 };
                let mut boost: f64 = 0.0;
                for inc in &todays {
                    let w = if inc.closure_type == ClosureType::Full { 1.0 } else { 0.5 };
                    let j = inc.segment_order as usize;
                    let b = if j == k {
                        1.0
                    } else if k < j {
                        let a = road.point_at_mp(inc.start_mp);
                        let z = road.point_at_mp(inc.end_mp);
                        let dist = [a, z]
                            .iter()
                            .flat_map(|p| [haversine_km(p, &seg.start), haversine_km(p, &seg.end)])
                            .fold(f64::INFINITY, f64::min);
                        (1.0 - dist / 5.0).max(0.0)
                    } else {
                        0.0
                    };
                    boost = boost.max(cfg.incident_effect * w * b);
                }
                let margin = lat.demand + boost - theta;
                let margin0 = lat.demand - theta;
                let period = (margin > 0.0).then(|| design_period(margin, upstream_rank, extra));
                let cst0 = if margin0 > 0.0 { (MORNING_SLOTS - design_period(margin0, upstream_rank, extra).0) as u32 } else { 0 };

                let vff = road.free_flow[k];
                let mut design = Vec::with_capacity(MORNING_SLOTS);
                let mut dropped_run = 0;
                for slot in first_slot..132 {
                    let z = clamp_z(std_normal.sample(&mut spd_rng));
                    let t = slot as isize - morning0 as isize;
                    let mut tti = 1.0 / (1.0 + 0.03 * z);
                    if let Some((s, l)) = period {
                        let (s, e) = (s as isize, (s + l) as isize);
                        if t >= s && t < e {
                            let phase = std::f64::consts::PI * ((t - s) as f64 + 0.5) / (e - s) as f64;
                            tti = 2.35 + 0.6 * phase.sin() + 0.05 * z.abs();
                        } else if t == s - 1 || t == e {
                            tti = 1.7;
                        } else if t == s - 2 || t == e + 1 {
                            tti = 1.45;
                        }
                    }
                    if t >= 0 {
                        design.push(tti);
                    } else if dropped_run < 2 && spd_rng.gen::<f64>() < cfg.missing_rate {
                        dropped_run += 1;
                        continue;
                    }
                    dropped_run = 0;
                    speeds.push(SpeedRecord {
                        segment_id: seg.segment_id.clone(),
                        timestamp: d.and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(5 * slot as i64),
                        speed: round_to(vff / tti, 1).max(0.1),
                    });
                }
                let (cs, cst, cd, pti) = match period {
                    Some((s, l)) => (
                        true,
                        (MORNING_SLOTS - s) as u32,
                        Some(l as u32),
                        Some(percentile(&design, 0.95)?),
                    ),
                    None => (false, 0, None, None),
                };
                truth_days.push(SegmentDayTruth {
                    segment_id: seg.segment_id.clone(),
                    date: *d,
                    cs,
                    cst,
                    cd,
                    pti,
                    margin,
                    incident_boost: boost,
                    cst_without_incidents: cst0,
                });
            }
        }
    }
    speeds.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.segment_id.cmp(&b.segment_id)));

    // Incident records and agency tweets.
    let mut sink = TweetSink { tweets: Vec::new() };
    let mut incidents = Vec::new();
    for inc in &injected {
        let road = roads.iter().find(|r| r.id == inc.road_id).unwrap();
        if inc.tweet_only {
            let (name, dir) = road.name_and_direction();
            let kind = if inc.category == "crash" { "Multi vehicle crash" } else { "Roadwork" };
            let place = if inc.start_mp == inc.end_mp {
                format!("at Mile Post: {:.1}", inc.start_mp)
            } else {
                format!("between Mile Post: {:.1} and Mile Post: {:.1}", inc.start_mp, inc.end_mp)
            };
            let body = format!("{kind} on {name} {dir} {place}.");
            let p = "Pittsburgh, PA";
            sink.push(AGENCY_USER, inc.start, None, TweetKind::Timeline, p, &format!("{body} There is a lane restriction."));
            if inc.closure_type == ClosureType::Full {
                let ts = inc.start + Duration::minutes(10);
                sink.push(AGENCY_USER, ts, None, TweetKind::Timeline, p, &format!("UPDATE: {body} All lanes closed."));
            }
            sink.push(AGENCY_USER, inc.end, None, TweetKind::Timeline, p, &format!("CLEARED: {body}"));
        } else {
            incidents.push(IncidentRecord {
                incident_id: inc.incident_id.clone(),
                source: IncidentSource::Rcrs,
                road_id: inc.road_id.clone(),
                closure_start: inc.start,
                closure_end: inc.end,
                start: round_coord(road.point_at_mp(inc.start_mp)),
                end: round_coord(road.point_at_mp(inc.end_mp)),
                closure_type: inc.closure_type,
                category: inc.category.clone(),
            });
        }
    }

    // User tweets.
    let mut tw_rng = sub_rng(seed, 5);
    let residences: Vec<&ZonePolygon> = zones.iter().filter(|z| z.land_use == LandUse::Residence).collect();
    let workplaces: Vec<&ZonePolygon> = zones
        .iter()
        .filter(|z| matches!(z.land_use, LandUse::Downtown | LandUse::Education | LandUse::Industry))
        .collect();
    let venues: Vec<&ZonePolygon> =
        zones.iter().filter(|z| matches!(z.land_use, LandUse::Amenity | LandUse::Downtown)).collect();
    let stadium = point_in_zone(zones.iter().find(|z| z.land_use == LandUse::Amenity).unwrap(), &mut geo_rng);
    let bed_dist = Normal::<f64>::new(23.4, 0.9).unwrap();
    let residents: Vec<Resident> = (0..cfg.n_users)
        .map(|i| Resident {
            id: format!("u{:05}", i + 1),
            profile: pick(&RESIDENT_PROFILES, &mut geo_rng).to_string(),
            home: point_in_zone(*pick(&residences, &mut geo_rng), &mut geo_rng),
            work: point_in_zone(*pick(&workplaces, &mut geo_rng), &mut geo_rng),
            bedtime: bed_dist.sample(&mut geo_rng).clamp(21.5, 25.8),
            geo_p: if geo_rng.gen::<f64>() < 0.1 { 0.0 } else { 0.15 },
        })
        .collect();
    let evening_count = Poisson::new(2.0).unwrap();
    let bed_noise = Normal::new(0.0, 0.4).unwrap();
    let wake_noise = Normal::new(6.0, 0.6).unwrap();
    for (di, d) in days.iter().enumerate() {
        let prev = *d - Duration::days(1);
        let lat = &latents[di];
        for r in &residents {
            if tw_rng.gen::<f64>() < 0.6 {
                let t = tw_rng.gen_range(9.0..17.0);
                sink.personal(r, at_hours(prev, t), &r.work, 2.0 * r.geo_p, pick(&DAY_TEXTS, &mut tw_rng), &mut tw_rng);
            }
            if tw_rng.gen::<f64>() < 0.2 {
                let t = tw_rng.gen_range(10.0..18.0);
                let other = point_in_zone(pick(&zones, &mut tw_rng), &mut tw_rng);
                sink.personal(r, at_hours(prev, t), &other, 2.0 * r.geo_p, pick(&DAY_TEXTS, &mut tw_rng), &mut tw_rng);
            }
            if tw_rng.gen::<f64>() >= 0.85 {
                continue;
            }
            let bed = (r.bedtime - cfg.sleep_shift_h * lat.sleep_index + bed_noise.sample(&mut tw_rng)).clamp(20.2, 28.8);
            let n_eve = evening_count.sample(&mut tw_rng) as usize;
            for _ in 0..n_eve {
                let t = tw_rng.gen_range(18.0..bed);
                sink.personal(r, at_hours(prev, t), &r.home, r.geo_p, pick(&EVENING_TEXTS, &mut tw_rng), &mut tw_rng);
            }
            let text = if tw_rng.gen::<f64>() < 0.3 { pick(&BED_TEXTS, &mut tw_rng) } else { pick(&EVENING_TEXTS, &mut tw_rng) };
            sink.personal(r, at_hours(prev, bed), &r.home, r.geo_p, text, &mut tw_rng);
            let wake = bed + wake_noise.sample(&mut tw_rng);
            if (27.0..29.0).contains(&wake) {
                sink.personal(r, at_hours(prev, wake), &r.home, r.geo_p, pick(&WAKE_TEXTS, &mut tw_rng), &mut tw_rng);
            }
        }
        if lat.event_night {
            for _ in 0..120 {
                let r = pick(&residents, &mut tw_rng);
                let t = tw_rng.gen_range(18.5..22.0);
                let c = jitter(&stadium, 100.0, &mut tw_rng);
                sink.push(&r.id, at_hours(prev, t), Some(c), TweetKind::Geocoded, &r.profile, pick(&EVENT_TEXTS, &mut tw_rng));
            }
        }
    }
    for i in 0..cfg.n_tourists {
        let id = format!("v{:05}", i + 1);
        let profile = pick(&VISITOR_PROFILES, &mut tw_rng).to_string();
        let first = tw_rng.gen_range(0..cfg.n_days);
        for d in days.iter().skip(first).take(4) {
            for _ in 0..6 {
                let c = jitter(&point_in_zone(*pick(&venues, &mut tw_rng), &mut tw_rng), 25.0, &mut tw_rng);
                let t = tw_rng.gen_range(10.0..23.5);
                sink.push(&id, at_hours(*d, t), Some(c), TweetKind::Geocoded, &profile, pick(&DAY_TEXTS, &mut tw_rng));
            }
        }
    }
    for i in 0..cfg.n_bots {
        let id = format!("b{:05}", i + 1);
        let spot = round_coord(point_in_zone(pick(&zones, &mut tw_rng), &mut tw_rng));
        let offset = tw_rng.gen_range(0.0..3.0);
        for d in &days {
            let mut h = offset;
            while h < 24.0 {
                sink.push(&id, at_hours(*d, h), Some(spot), TweetKind::Geocoded, "Pittsburgh, PA", "traffic and weather update #pittsburgh");
                h += 3.0;
            }
        }
    }
    let mut tweets = sink.tweets;
    tweets.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.user_id.cmp(&b.user_id)).then_with(|| a.text.cmp(&b.text)));
    for (i, t) in tweets.iter_mut().enumerate() {
        t.tweet_id = format!("{:09}", i + 1);
    }

    // Hourly weather.
    let mut wx_rng = sub_rng(seed, 6);
    let mut weather = Vec::new();
    let mut wx_days = vec![days[0] - Duration::days(1)];
    wx_days.extend(days.iter().copied());
    for d in wx_days {
        let rain = latents.iter().find(|l| l.date == d).and_then(|l| l.rain_start_hour);
        let fog = wx_rng.gen::<f64>() < 0.05;
        let doy = d.ordinal() as f64;
        for h in 0..24u32 {
            let hf = h as f64;
            let raining = rain.is_some_and(|r| h >= r && h < r + 6);
            let wet = rain.is_some_and(|r| h >= r && h < r + 8);
            let foggy = fog && (4..9).contains(&h);
            let temp = 50.0 - 22.0 * (2.0 * std::f64::consts::PI * (doy - 20.0) / 365.25).cos()
                + 8.0 * (2.0 * std::f64::consts::PI * (hf - 9.0) / 24.0).sin()
                + 3.0 * std_normal.sample(&mut wx_rng);
            let humidity = (65.0 + 15.0 * (2.0 * std::f64::consts::PI * hf / 24.0).cos()
                + 8.0 * std_normal.sample(&mut wx_rng)
                + if raining { 20.0 } else { 0.0 })
            .clamp(10.0, 100.0);
            let wind = (7.0 + 4.0 * std_normal.sample(&mut wx_rng)).abs();
            let pressure = 1015.0 + 6.0 * std_normal.sample(&mut wx_rng) - if raining { 8.0 } else { 0.0 };
            let visibility = if raining {
                3.0 + 3.0 * wx_rng.gen::<f64>()
            } else if foggy {
                0.5 + wx_rng.gen::<f64>()
            } else {
                10.0
            };
            let precip = if raining { wx_rng.gen_range(0.02..0.3) } else { 0.0 };
            let severity = if raining {
                if temp < 32.0 { 3 } else { 2 }
            } else if foggy {
                1
            } else {
                0
            };
            weather.push(WeatherRecord {
                timestamp: d.and_hms_opt(h, 0, 0).unwrap(),
                temp: round_to(temp, 1),
                humidity: round_to(humidity, 1),
                wind: round_to(wind, 1),
                pressure: round_to(pressure, 1),
                visibility: round_to(visibility, 1),
                precip: round_to(precip, 2),
                pavement_wet: wet,
                wx_severity: severity,
            });
        }
    }

    incidents.sort_by(|a, b| a.closure_start.cmp(&b.closure_start).then_with(|| a.incident_id.cmp(&b.incident_id)));

    let dataset = Dataset {
        segments: roads.iter().flat_map(|r| r.segments.iter().cloned()).collect(),
        speeds,
        incidents,
        weather,
        tweets,
        tracts,
        zones,
        calendar,
        lexicons: Lexicons::builtin(),
    };
    Ok(SyntheticBundle {
        dataset,
        truth: GroundTruth {
            seed,
            config: cfg.clone(),
            days: latents,
            segment_days: truth_days,
            incidents: injected,
        },
    })
}
