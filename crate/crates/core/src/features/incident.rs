use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::geo::haversine_km;
use crate::ingest::{ClosureType, IncidentRecord, SegmentDescriptor};
use crate::tweetpipe::MilepostGeocoder;

pub const LOCATIONS: [&str; 3] = ["ds", "in", "us"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocationImpact {
    pub ds: f64,
    pub c: f64,
    pub us: f64,
}

impl LocationImpact {
    pub fn as_array(&self) -> [f64; 3] {
        [self.ds, self.c, self.us]
    }
}

/// Road geometry needed to place incidents relative to segments.
#[derive(Debug, Clone)]
pub struct RoadGeometry {
    pub geocoder: MilepostGeocoder,
    /// +1 when mileposts grow downstream, -1 otherwise, per road.
    pub orientation: std::collections::BTreeMap<String, f64>,
}

impl RoadGeometry {
    pub fn new(segments: &[SegmentDescriptor]) -> Self {
        let mut orientation = std::collections::BTreeMap::new();
        let mut roads: std::collections::BTreeMap<&str, Vec<&SegmentDescriptor>> = Default::default();
        for s in segments {
            roads.entry(s.road_id.as_str()).or_default().push(s);
        }
        for (r, mut v) in roads {
            v.sort_by_key(|s| s.order_on_road);
            let sign = if v.last().unwrap().end_mp >= v[0].start_mp { 1.0 } else { -1.0 };
            orientation.insert(r.to_string(), sign);
        }
        RoadGeometry { geocoder: MilepostGeocoder::new(segments), orientation }
    }
}

/// Linear-decay impact of an incident on a segment of the same road.
/// Incidents on other roads have no impact.
pub fn incident_location_impact(inc: &IncidentRecord, seg: &SegmentDescriptor, geo: &RoadGeometry, d_thres_km: f64) -> LocationImpact {
    if inc.road_id != seg.road_id {
        return LocationImpact::default();
    }
    let (Some(sign), Some((a, _)), Some((b, _))) = (
        geo.orientation.get(&seg.road_id),
        geo.geocoder.milepost_of(&inc.road_id, &inc.start),
        geo.geocoder.milepost_of(&inc.road_id, &inc.end),
    ) else {
        log::warn!("cannot place incident {} relative to {}", inc.incident_id, seg.segment_id);
        return LocationImpact::default();
    };
    let (i_lo, i_hi) = ((sign * a).min(sign * b), (sign * a).max(sign * b));
    let (s_lo, s_hi) = ((sign * seg.start_mp).min(sign * seg.end_mp), (sign * seg.start_mp).max(sign * seg.end_mp));
    if i_hi > s_lo && i_lo < s_hi {
        return LocationImpact { c: 1.0, ..Default::default() };
    }
    let d = [inc.start, inc.end]
        .iter()
        .flat_map(|p| [seg.start, seg.end].map(|q| haversine_km(p, &q)))
        .fold(f64::INFINITY, f64::min);
    let w = distance_weight(d, d_thres_km);
    if i_lo >= s_hi {
        LocationImpact { ds: w, ..Default::default() }
    } else {
        LocationImpact { us: w, ..Default::default() }
    }
}

pub fn distance_weight(d_km: f64, d_thres_km: f64) -> f64 {
    if d_thres_km <= 0.0 {
        return 0.0;
    }
    ((d_thres_km - d_km) / d_thres_km).clamp(0.0, 1.0)
}

/// H_h = 1 when the closure overlaps clock hour h of `date`.
pub fn incident_time_window(inc: &IncidentRecord, date: NaiveDate, hours: u32) -> Vec<f64> {
    let m = date.and_hms_opt(0, 0, 0).unwrap();
    (0..hours as i64)
        .map(|h| {
            let (a, b) = (m + Duration::hours(h), m + Duration::hours(h + 1));
            if inc.closure_start < b && inc.closure_end > a {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Partial and full closure impacts by location and hour, flattened as
/// p_ds_0.., p_in_0.., p_us_0.., f_ds_0.., f_in_0.., f_us_0..
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentImpactFeatures {
    pub hours: usize,
    pub values: Vec<f64>,
}

impl IncidentImpactFeatures {
    pub fn zeros(hours: usize) -> Self {
        IncidentImpactFeatures { hours, values: vec![0.0; 6 * hours] }
    }

    fn idx(&self, full: bool, loc: usize, h: usize) -> usize {
        (if full { 3 } else { 0 } + loc) * self.hours + h
    }

    /// `loc`: 0 downstream, 1 containing, 2 upstream.
    pub fn get(&self, full: bool, loc: usize, h: usize) -> f64 {
        self.values[self.idx(full, loc, h)]
    }

    pub fn names(hours: usize) -> Vec<String> {
        let mut v = Vec::with_capacity(6 * hours);
        for kind in ["p", "f"] {
            for loc in LOCATIONS {
                for h in 0..hours {
                    v.push(format!("{kind}_{loc}_{h}"));
                }
            }
        }
        v
    }
}

/// Outer product of location impact and hour window per incident, routed by
/// closure type and combined across incidents by elementwise maximum.
pub fn incident_features(
    incidents: &[&IncidentRecord],
    seg: &SegmentDescriptor,
    date: NaiveDate,
    geo: &RoadGeometry,
    d_thres_km: f64,
    hours: u32,
) -> IncidentImpactFeatures {
    let mut out = IncidentImpactFeatures::zeros(hours as usize);
    for inc in incidents {
        let h = incident_time_window(inc, date, hours);
        if h.iter().all(|v| *v == 0.0) {
            continue;
        }
        let loc = incident_location_impact(inc, seg, geo, d_thres_km).as_array();
        let full = inc.closure_type == ClosureType::Full;
        for (l, lv) in loc.iter().enumerate() {
            for (t, hv) in h.iter().enumerate() {
                let i = out.idx(full, l, t);
                out.values[i] = out.values[i].max(lv * hv);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{offset_m, LatLon};
    use crate::ingest::IncidentSource;

    fn road() -> Vec<SegmentDescriptor> {
        let origin = LatLon::new(40.4, -80.1);
        (0..4)
            .map(|k| SegmentDescriptor {
                segment_id: format!("s{k}"),
                road_id: "R".into(),
                order_on_road: k,
                start_mp: k as f64,
                end_mp: k as f64 + 1.0,
                start: offset_m(&origin, 0.0, 1000.0 * k as f64),
                end: offset_m(&origin, 0.0, 1000.0 * (k + 1) as f64),
            })
            .collect()
    }

    fn incident(geo: &RoadGeometry, a: f64, b: f64, start: &str, end: &str, full: bool) -> IncidentRecord {
        IncidentRecord {
            incident_id: "i".into(),
            source: IncidentSource::Rcrs,
            road_id: "R".into(),
            closure_start: start.parse().unwrap(),
            closure_end: end.parse().unwrap(),
            start: geo.geocoder.point_at("R", a).unwrap(),
            end: geo.geocoder.point_at("R", b).unwrap(),
            closure_type: if full { ClosureType::Full } else { ClosureType::Partial },
            category: "crash".into(),
        }
    }

    const S: &str = "2014-02-03T06:42:00";
    const E: &str = "2014-02-03T08:02:00";

    #[test]
    fn distance_decay() {
        assert_eq!(distance_weight(0.0, 5.0), 1.0);
        assert_eq!(distance_weight(5.0, 5.0), 0.0);
        assert_eq!(distance_weight(2.5, 5.0), 0.5);
        assert_eq!(distance_weight(7.0, 5.0), 0.0);
    }

    #[test]
    fn relative_positions() {
        let segs = road();
        let geo = RoadGeometry::new(&segs);
        let abut = incident(&geo, 1.0, 1.0, S, E, true);
        let li = incident_location_impact(&abut, &segs[0], &geo, 5.0);
        assert!((li.ds - 1.0).abs() < 1e-9 && li.c == 0.0 && li.us == 0.0);
        let inside = incident(&geo, 2.5, 2.5, S, E, true);
        assert_eq!(incident_location_impact(&inside, &segs[2], &geo, 5.0).c, 1.0);
        let up = incident_location_impact(&inside, &segs[3], &geo, 5.0);
        assert!(up.us > 0.0 && up.ds == 0.0 && up.c == 0.0);
        // 2.5 km between the incident and segment 0's end.
        let far = incident(&geo, 3.5, 3.5, S, E, true);
        let li = incident_location_impact(&far, &segs[0], &geo, 5.0);
        assert!((li.ds - 0.5).abs() < 0.01, "{li:?}");
    }

    #[test]
    fn hour_windows() {
        let geo = RoadGeometry::new(&road());
        let d: NaiveDate = "2014-02-03".parse().unwrap();
        let h = incident_time_window(&incident(&geo, 1.0, 1.0, S, E, true), d, 11);
        assert_eq!(h, vec![0., 0., 0., 0., 0., 0., 1., 1., 1., 0., 0.]);
        let night = incident(&geo, 1.0, 1.0, "2014-02-02T23:00:00", "2014-02-03T01:00:00", true);
        assert_eq!(incident_time_window(&night, d, 11)[..2], [1.0, 0.0]);
        let late = incident(&geo, 1.0, 1.0, "2014-02-03T12:00:00", "2014-02-03T14:00:00", true);
        assert!(incident_time_window(&late, d, 11).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn outer_product_and_max() {
        let segs = road();
        let geo = RoadGeometry::new(&segs);
        let d: NaiveDate = "2014-02-03".parse().unwrap();
        let a = incident(&geo, 3.5, 3.5, "2014-02-03T07:00:00", "2014-02-03T07:30:00", false);
        let f = incident_features(&[&a], &segs[0], d, &geo, 5.0, 11);
        assert!((f.get(false, 0, 7) - 0.5).abs() < 0.01);
        assert!((0..11).all(|h| (0..3).all(|l| f.get(true, l, h) == 0.0)));
        let b = incident(&geo, 1.9, 1.9, "2014-02-03T07:00:00", "2014-02-03T07:30:00", false);
        let g = incident_features(&[&a, &b], &segs[0], d, &geo, 5.0, 11);
        assert!(g.get(false, 0, 7) > 0.8);
        assert!(incident_features(&[], &segs[0], d, &geo, 5.0, 11).values.iter().all(|v| *v == 0.0));
        assert_eq!(IncidentImpactFeatures::names(11)[7], "p_ds_7");
    }
}
