//! CSV and GeoJSON readers/writers for the dataset files.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde_json::{json, Value};

use super::types::*;
use crate::error::{Error, Result};
use crate::geo::{LatLon, Ring};

pub const SPEED_HEADER: &[&str] = &["segment_id", "timestamp", "observed_speed"];
pub const INCIDENT_HEADER: &[&str] = &[
    "incident_id",
    "source",
    "road_id",
    "closure_start",
    "closure_end",
    "start_lat",
    "start_lon",
    "end_lat",
    "end_lon",
    "closure_type",
    "category",
];
pub const WEATHER_HEADER: &[&str] = &[
    "timestamp",
    "temp",
    "humidity",
    "wind",
    "pressure",
    "visibility",
    "precip",
    "pavement_wet",
    "wx_severity",
];
pub const TWEET_HEADER: &[&str] = &[
    "tweet_id",
    "user_id",
    "timestamp",
    "kind",
    "lat",
    "lon",
    "profile_location",
    "text",
];
pub const SEGMENT_HEADER: &[&str] = &[
    "segment_id",
    "road_id",
    "order_on_road",
    "start_mp",
    "end_mp",
    "start_lat",
    "start_lon",
    "end_lat",
    "end_lon",
];
pub const CALENDAR_HEADER: &[&str] = &["date", "is_holiday"];

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M";

pub fn format_ts(ts: &NaiveDateTime) -> String {
    ts.format(TS_FORMAT).to_string()
}

pub fn parse_ts(s: &str) -> std::result::Result<NaiveDateTime, String> {
    let s = s.trim();
    for fmt in ["%Y-%m-%dT%H:%M", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    Err(format!("bad timestamp '{s}'"))
}

fn parse_f64(s: &str, what: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("bad {what} '{s}'"))?;
    if !v.is_finite() {
        return Err(format!("non-finite {what}"));
    }
    Ok(v)
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(format!("bad boolean '{other}'")),
    }
}

fn fmt_f(v: f64) -> String {
    // Shortest representation that round-trips.
    format!("{v}")
}

fn open(path: &Path) -> Result<std::fs::File> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(std::fs::File::open(path)?)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    for (i, col) in expected.iter().enumerate() {
        match found.get(i) {
            Some(f) if f.trim() == *col => {}
            _ => return Err(Error::SchemaMismatch((*col).to_string())),
        }
    }
    if found.len() != expected.len() {
        let extra = found.get(expected.len()).unwrap_or("").to_string();
        return Err(Error::SchemaMismatch(format!("unexpected column '{extra}'")));
    }
    Ok(())
}

/// Iterate data rows with 1-based row numbers after validating the header.
fn read_rows<R: Read>(
    reader: R,
    header: &[&str],
    mut f: impl FnMut(usize, &csv::StringRecord) -> std::result::Result<(), String>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    check_header(rdr.headers()?, header)?;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::ParseError { row, reason: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(Error::ParseError {
                row,
                reason: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        f(row, &rec).map_err(|reason| Error::ParseError { row, reason })?;
    }
    Ok(())
}

pub fn read_speeds<R: Read>(reader: R) -> Result<Vec<SpeedRecord>> {
    let mut out = Vec::new();
    read_rows(reader, SPEED_HEADER, |_, r| {
        let timestamp = parse_ts(&r[1])?;
        if timestamp.minute() % 5 != 0 || timestamp.second() != 0 {
            return Err("timestamp not on 5-min grid".into());
        }
        let speed = parse_f64(&r[2], "speed")?;
        if speed <= 0.0 {
            return Err("nonpositive speed".into());
        }
        out.push(SpeedRecord { segment_id: r[0].trim().to_string(), timestamp, speed });
        Ok(())
    })?;
    out.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.segment_id.cmp(&b.segment_id)));
    Ok(out)
}

pub fn write_speeds<W: Write>(w: W, recs: &[SpeedRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SPEED_HEADER)?;
    for r in recs {
        wr.write_record([r.segment_id.clone(), format_ts(&r.timestamp), fmt_f(r.speed)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_incidents<R: Read>(reader: R) -> Result<Vec<IncidentRecord>> {
    let mut out = Vec::new();
    read_rows(reader, INCIDENT_HEADER, |_, r| {
        let closure_start = parse_ts(&r[3])?;
        let closure_end = parse_ts(&r[4])?;
        if closure_start > closure_end {
            return Err("closure_start after closure_end".into());
        }
        let start = LatLon::new(parse_f64(&r[5], "start_lat")?, parse_f64(&r[6], "start_lon")?);
        let end = LatLon::new(parse_f64(&r[7], "end_lat")?, parse_f64(&r[8], "end_lon")?);
        if !start.is_valid() || !end.is_valid() {
            return Err("coordinate out of range".into());
        }
        out.push(IncidentRecord {
            incident_id: r[0].trim().to_string(),
            source: r[1].parse()?,
            road_id: r[2].trim().to_string(),
            closure_start,
            closure_end,
            start,
            end,
            closure_type: r[9].parse()?,
            category: r[10].trim().to_string(),
        });
        Ok(())
    })?;
    out.sort_by(|a, b| {
        a.closure_start.cmp(&b.closure_start).then_with(|| a.incident_id.cmp(&b.incident_id))
    });
    Ok(out)
}

pub fn write_incidents<W: Write>(w: W, recs: &[IncidentRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(INCIDENT_HEADER)?;
    for r in recs {
        wr.write_record([
            r.incident_id.clone(),
            r.source.to_string(),
            r.road_id.clone(),
            format_ts(&r.closure_start),
            format_ts(&r.closure_end),
            fmt_f(r.start.lat),
            fmt_f(r.start.lon),
            fmt_f(r.end.lat),
            fmt_f(r.end.lon),
            r.closure_type.to_string(),
            r.category.clone(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_weather<R: Read>(reader: R) -> Result<Vec<WeatherRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut dup: Option<String> = None;
    read_rows(reader, WEATHER_HEADER, |_, r| {
        let timestamp = parse_ts(&r[0])?;
        if timestamp.minute() != 0 || timestamp.second() != 0 {
            return Err("weather timestamp not on the hour".into());
        }
        if !seen.insert(timestamp) && dup.is_none() {
            dup = Some(format_ts(&timestamp));
        }
        let sev: u32 = r[8].trim().parse().map_err(|_| format!("bad wx_severity '{}'", &r[8]))?;
        out.push(WeatherRecord {
            timestamp,
            temp: parse_f64(&r[1], "temp")?,
            humidity: parse_f64(&r[2], "humidity")?,
            wind: parse_f64(&r[3], "wind")?,
            pressure: parse_f64(&r[4], "pressure")?,
            visibility: parse_f64(&r[5], "visibility")?,
            precip: parse_f64(&r[6], "precip")?,
            pavement_wet: parse_bool(&r[7])?,
            wx_severity: sev,
        });
        Ok(())
    })?;
    if let Some(ts) = dup {
        return Err(Error::SchemaMismatch(format!("duplicate hourly key {ts}")));
    }
    out.sort_by_key(|w| w.timestamp);
    Ok(out)
}

pub fn write_weather<W: Write>(w: W, recs: &[WeatherRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(WEATHER_HEADER)?;
    for r in recs {
        wr.write_record([
            format_ts(&r.timestamp),
            fmt_f(r.temp),
            fmt_f(r.humidity),
            fmt_f(r.wind),
            fmt_f(r.pressure),
            fmt_f(r.visibility),
            fmt_f(r.precip),
            (r.pavement_wet as u8).to_string(),
            r.wx_severity.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_tweets<R: Read>(reader: R) -> Result<Vec<Tweet>> {
    let mut out = Vec::new();
    read_rows(reader, TWEET_HEADER, |_, r| {
        let kind: TweetKind = r[3].parse()?;
        let coord = match (r[4].trim(), r[5].trim()) {
            ("", "") => None,
            (la, lo) => {
                let c = LatLon::new(parse_f64(la, "lat")?, parse_f64(lo, "lon")?);
                if !c.is_valid() {
                    return Err("coordinate out of range".into());
                }
                Some(c)
            }
        };
        if kind == TweetKind::Geocoded && coord.is_none() {
            return Err("GEOCODED tweet without coordinates".into());
        }
        let profile = r[6].trim();
        out.push(Tweet {
            tweet_id: r[0].trim().to_string(),
            user_id: r[1].trim().to_string(),
            timestamp: parse_ts(&r[2])?,
            kind,
            coord,
            profile_location: (!profile.is_empty()).then(|| profile.to_string()),
            text: r[7].to_string(),
        });
        Ok(())
    })?;
    out.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.tweet_id.cmp(&b.tweet_id)));
    Ok(out)
}

pub fn write_tweets<W: Write>(w: W, recs: &[Tweet]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Necessary).from_writer(w);
    wr.write_record(TWEET_HEADER)?;
    for t in recs {
        let (la, lo) = t.coord.map(|c| (fmt_f(c.lat), fmt_f(c.lon))).unwrap_or_default();
        wr.write_record([
            t.tweet_id.clone(),
            t.user_id.clone(),
            format_ts(&t.timestamp),
            t.kind.to_string(),
            la,
            lo,
            t.profile_location.clone().unwrap_or_default(),
            t.text.clone(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_segments<R: Read>(reader: R) -> Result<Vec<SegmentDescriptor>> {
    let mut out: Vec<SegmentDescriptor> = Vec::new();
    let mut orders = HashSet::new();
    read_rows(reader, SEGMENT_HEADER, |_, r| {
        let order_on_road: u32 =
            r[2].trim().parse().map_err(|_| format!("bad order_on_road '{}'", &r[2]))?;
        let start_mp = parse_f64(&r[3], "start_mp")?;
        let end_mp = parse_f64(&r[4], "end_mp")?;
        if start_mp > end_mp {
            return Err("start_mp greater than end_mp".into());
        }
        let road_id = r[1].trim().to_string();
        if !orders.insert((road_id.clone(), order_on_road)) {
            return Err(format!("duplicate order_on_road {order_on_road} on road {road_id}"));
        }
        out.push(SegmentDescriptor {
            segment_id: r[0].trim().to_string(),
            road_id,
            order_on_road,
            start_mp,
            end_mp,
            start: LatLon::new(parse_f64(&r[5], "start_lat")?, parse_f64(&r[6], "start_lon")?),
            end: LatLon::new(parse_f64(&r[7], "end_lat")?, parse_f64(&r[8], "end_lon")?),
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_segments<W: Write>(w: W, recs: &[SegmentDescriptor]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SEGMENT_HEADER)?;
    for s in recs {
        wr.write_record([
            s.segment_id.clone(),
            s.road_id.clone(),
            s.order_on_road.to_string(),
            fmt_f(s.start_mp),
            fmt_f(s.end_mp),
            fmt_f(s.start.lat),
            fmt_f(s.start.lon),
            fmt_f(s.end.lat),
            fmt_f(s.end.lon),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_calendar<R: Read>(reader: R) -> Result<Vec<CalendarInfo>> {
    let mut out = Vec::new();
    read_rows(reader, CALENDAR_HEADER, |_, r| {
        let date = NaiveDate::parse_from_str(r[0].trim(), "%Y-%m-%d")
            .map_err(|_| format!("bad date '{}'", &r[0]))?;
        out.push(CalendarInfo { date, is_holiday: parse_bool(&r[1])? });
        Ok(())
    })?;
    out.sort_by_key(|c| c.date);
    if let Some(w) = out.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::SchemaMismatch(format!("duplicate date {}", w[0].date)));
    }
    Ok(out)
}

pub fn write_calendar<W: Write>(w: W, recs: &[CalendarInfo]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CALENDAR_HEADER)?;
    for c in recs {
        wr.write_record([c.date.format("%Y-%m-%d").to_string(), (c.is_holiday as u8).to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

fn ring_from_json(v: &Value, feature: usize) -> Result<Ring> {
    let bad = |reason: &str| Error::ParseError { row: feature + 1, reason: reason.to_string() };
    let geom = v.get("geometry").ok_or_else(|| bad("missing geometry"))?;
    if geom.get("type").and_then(Value::as_str) != Some("Polygon") {
        return Err(bad("geometry is not a Polygon"));
    }
    let outer = geom
        .get("coordinates")
        .and_then(|c| c.get(0))
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing polygon coordinates"))?;
    let mut pts = Vec::with_capacity(outer.len());
    for p in outer {
        let lon = p.get(0).and_then(Value::as_f64).ok_or_else(|| bad("bad vertex"))?;
        let lat = p.get(1).and_then(Value::as_f64).ok_or_else(|| bad("bad vertex"))?;
        pts.push(LatLon::new(lat, lon));
    }
    if pts.len() < 4 || pts.first() != pts.last() {
        return Err(bad("ring not closed"));
    }
    let ring = Ring::new(pts);
    if self_intersects(&ring) {
        return Err(bad("ring self-intersects"));
    }
    Ok(ring)
}

fn self_intersects(r: &Ring) -> bool {
    let v = &r.vertices;
    let n = v.len();
    let orient = |a: &LatLon, b: &LatLon, c: &LatLon| {
        let x = (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon);
        if x > 1e-15 {
            1
        } else if x < -1e-15 {
            -1
        } else {
            0
        }
    };
    for i in 0..n {
        let (a, b) = (&v[i], &v[(i + 1) % n]);
        for j in (i + 1)..n {
            // skip adjacent edges
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (&v[j], &v[(j + 1) % n]);
            let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
            if o1 * o2 < 0 && o3 * o4 < 0 {
                return true;
            }
        }
    }
    false
}

fn ring_to_json(r: &Ring) -> Value {
    let mut coords: Vec<Value> = r.vertices.iter().map(|p| json!([p.lon, p.lat])).collect();
    if let Some(first) = r.vertices.first() {
        coords.push(json!([first.lon, first.lat]));
    }
    json!({"type": "Polygon", "coordinates": [coords]})
}

fn features_of(text: &str) -> Result<Vec<Value>> {
    let v: Value = serde_json::from_str(text)?;
    if v.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::SchemaMismatch("type".into()));
    }
    v.get("features")
        .and_then(Value::as_array)
        .cloned()
        .ok_or_else(|| Error::SchemaMismatch("features".into()))
}

pub fn read_tracts<R: Read>(mut reader: R) -> Result<Vec<TractPolygon>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut out = Vec::new();
    for (i, f) in features_of(&text)?.iter().enumerate() {
        let tract_id = f
            .get("properties")
            .and_then(|p| p.get("tract_id"))
            .and_then(|t| t.as_str().map(str::to_string).or_else(|| t.as_i64().map(|x| x.to_string())))
            .ok_or_else(|| Error::SchemaMismatch("tract_id".into()))?;
        out.push(TractPolygon { tract_id, ring: ring_from_json(f, i)? });
    }
    out.sort_by(|a, b| a.tract_id.cmp(&b.tract_id));
    Ok(out)
}

pub fn read_zones<R: Read>(mut reader: R) -> Result<Vec<ZonePolygon>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut out = Vec::new();
    for (i, f) in features_of(&text)?.iter().enumerate() {
        let lu = f
            .get("properties")
            .and_then(|p| p.get("land_use"))
            .and_then(Value::as_str)
            .ok_or_else(|| Error::SchemaMismatch("land_use".into()))?;
        let land_use = lu.parse().map_err(|reason| Error::ParseError { row: i + 1, reason })?;
        out.push(ZonePolygon { land_use, ring: ring_from_json(f, i)? });
    }
    Ok(out)
}

pub fn write_tracts<W: Write>(mut w: W, recs: &[TractPolygon]) -> Result<()> {
    let feats: Vec<Value> = recs
        .iter()
        .map(|t| json!({"type": "Feature", "properties": {"tract_id": t.tract_id}, "geometry": ring_to_json(&t.ring)}))
        .collect();
    serde_json::to_writer(&mut w, &json!({"type": "FeatureCollection", "features": feats}))?;
    Ok(())
}

pub fn write_zones<W: Write>(mut w: W, recs: &[ZonePolygon]) -> Result<()> {
    let feats: Vec<Value> = recs
        .iter()
        .map(|z| json!({"type": "Feature", "properties": {"land_use": z.land_use.to_string()}, "geometry": ring_to_json(&z.ring)}))
        .collect();
    serde_json::to_writer(&mut w, &json!({"type": "FeatureCollection", "features": feats}))?;
    Ok(())
}

/// One entry per nonblank line; `#` starts a comment line.
pub fn read_lines<R: Read>(mut reader: R) -> Result<Vec<String>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// `key<TAB>value` lines.
pub fn read_pairs<R: Read>(reader: R) -> Result<Vec<(String, String)>> {
    read_lines(reader)?
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.split_once('\t')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or(Error::ParseError { row: i + 1, reason: "expected key<TAB>value".into() })
        })
        .collect()
}

pub fn read_sentiment_scores<R: Read>(reader: R) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    read_rows(reader, &["tweet_id", "p"], |_, r| {
        let p = parse_f64(&r[1], "p")?;
        if !(0.0..=1.0).contains(&p) {
            return Err("p outside [0,1]".into());
        }
        out.insert(r[0].trim().to_string(), p);
        Ok(())
    })?;
    Ok(out)
}

pub(crate) fn open_file(path: &Path) -> Result<std::fs::File> {
    open(path)
}
