use std::collections::BTreeMap;

use crate::geo::{haversine_km, BBox, LatLon};
use crate::ingest::{LandUse, SegmentDescriptor, TractPolygon, ZonePolygon};

/// Census-tract lookup. Tracts are scanned in ascending id order, so a point
/// on a shared edge resolves to the lowest id.
#[derive(Debug, Clone)]
pub struct TractIndex {
    tracts: Vec<(BBox, TractPolygon)>,
}

impl TractIndex {
    pub fn new(tracts: &[TractPolygon]) -> Self {
        let mut v: Vec<_> = tracts.iter().filter_map(|t| t.ring.bbox().map(|b| (b, t.clone()))).collect();
        v.sort_by(|a, b| a.1.tract_id.cmp(&b.1.tract_id));
        TractIndex { tracts: v }
    }

    pub fn ids(&self) -> Vec<String> {
        self.tracts.iter().map(|t| t.1.tract_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.tracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracts.is_empty()
    }

    /// Position of the containing tract in `ids()`.
    pub fn locate(&self, p: &LatLon) -> Option<usize> {
        self.tracts.iter().position(|(b, t)| b.contains(p) && t.ring.contains(p))
    }

    pub fn geocode(&self, p: &LatLon) -> Option<&str> {
        self.locate(p).map(|i| self.tracts[i].1.tract_id.as_str())
    }
}

/// Land-use lookup; the first zone in file order wins on overlaps.
#[derive(Debug, Clone)]
pub struct ZoneIndex {
    zones: Vec<(BBox, ZonePolygon)>,
}

impl ZoneIndex {
    pub fn new(zones: &[ZonePolygon]) -> Self {
        ZoneIndex { zones: zones.iter().filter_map(|z| z.ring.bbox().map(|b| (b, z.clone()))).collect() }
    }

    pub fn land_use(&self, p: &LatLon) -> Option<LandUse> {
        self.zones.iter().find(|(b, z)| b.contains(p) && z.ring.contains(p)).map(|(_, z)| z.land_use)
    }
}

/// Milepost <-> coordinate conversion along each road's segment chain.
#[derive(Debug, Clone, Default)]
pub struct MilepostGeocoder {
    roads: BTreeMap<String, Vec<SegmentDescriptor>>,
}

impl MilepostGeocoder {
    pub fn new(segments: &[SegmentDescriptor]) -> Self {
        let mut roads: BTreeMap<String, Vec<SegmentDescriptor>> = BTreeMap::new();
        for s in segments {
            roads.entry(s.road_id.clone()).or_default().push(s.clone());
        }
        for v in roads.values_mut() {
            v.sort_by_key(|s| s.order_on_road);
        }
        MilepostGeocoder { roads }
    }

    pub fn has_road(&self, road_id: &str) -> bool {
        self.roads.contains_key(road_id)
    }

    /// Coordinate of a milepost, clamped to the road's covered range.
    pub fn point_at(&self, road_id: &str, mp: f64) -> Option<LatLon> {
        let segs = self.roads.get(road_id)?;
        let mut best: Option<(f64, LatLon)> = None;
        for s in segs {
            let (lo, hi) = (s.start_mp.min(s.end_mp), s.start_mp.max(s.end_mp));
            let span = s.end_mp - s.start_mp;
            if (lo..=hi).contains(&mp) {
                let t = if span == 0.0 { 0.0 } else { (mp - s.start_mp) / span };
                return Some(s.start.lerp(&s.end, t));
            }
            for (m, p) in [(s.start_mp, s.start), (s.end_mp, s.end)] {
                let gap = (m - mp).abs();
                if best.is_none_or(|b| gap < b.0) {
                    best = Some((gap, p));
                }
            }
        }
        best.map(|b| b.1)
    }

    /// Milepost of the closest point on the road and its distance in km.
    pub fn milepost_of(&self, road_id: &str, p: &LatLon) -> Option<(f64, f64)> {
        let segs = self.roads.get(road_id)?;
        let mut best: Option<(f64, f64)> = None;
        for s in segs {
            let t = project(&s.start, &s.end, p);
            let q = s.start.lerp(&s.end, t);
            let d = haversine_km(&q, p);
            if best.is_none_or(|b| d < b.1) {
                best = Some((s.start_mp + t * (s.end_mp - s.start_mp), d));
            }
        }
        best
    }
}

/// Fraction along a-b of the closest point to p, in a local equirectangular frame.
fn project(a: &LatLon, b: &LatLon, p: &LatLon) -> f64 {
    let k = a.lat.to_radians().cos();
    let (bx, by) = ((b.lon - a.lon) * k, b.lat - a.lat);
    let (px, py) = ((p.lon - a.lon) * k, p.lat - a.lat);
    let len2 = bx * bx + by * by;
    if len2 == 0.0 {
        return 0.0;
    }
    ((px * bx + py * by) / len2).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Ring;

    fn square(id: &str, lat0: f64, lon0: f64) -> TractPolygon {
        TractPolygon {
            tract_id: id.into(),
            ring: Ring::new(vec![
                LatLon::new(lat0, lon0),
                LatLon::new(lat0, lon0 + 1.0),
                LatLon::new(lat0 + 1.0, lon0 + 1.0),
                LatLon::new(lat0 + 1.0, lon0),
            ]),
        }
    }

    #[test]
    fn tract_lookup() {
        let idx = TractIndex::new(&[square("B", 0.0, 1.0), square("A", 0.0, 0.0)]);
        assert_eq!(idx.geocode(&LatLon::new(0.5, 0.5)), Some("A"));
        assert_eq!(idx.geocode(&LatLon::new(0.5, 1.5)), Some("B"));
        assert_eq!(idx.geocode(&LatLon::new(5.0, 5.0)), None);
        // Shared edge at lon = 1.
        assert_eq!(idx.geocode(&LatLon::new(0.5, 1.0)), Some("A"));
    }

    fn seg(order: u32, a: f64, b: f64) -> SegmentDescriptor {
        SegmentDescriptor {
            segment_id: format!("s{order}"),
            road_id: "R".into(),
            order_on_road: order,
            start_mp: a,
            end_mp: b,
            start: LatLon::new(40.0, -80.0 + a / 100.0),
            end: LatLon::new(40.0, -80.0 + b / 100.0),
        }
    }

    #[test]
    fn milepost_round_trip() {
        let g = MilepostGeocoder::new(&[seg(0, 0.0, 1.0), seg(1, 1.0, 2.0)]);
        let p = g.point_at("R", 1.5).unwrap();
        let (mp, d) = g.milepost_of("R", &p).unwrap();
        assert!((mp - 1.5).abs() < 1e-9);
        assert!(d < 1e-6);
        assert_eq!(g.point_at("R", 9.0).unwrap(), LatLon::new(40.0, -80.0 + 0.02));
        assert!(g.point_at("X", 1.0).is_none());
    }
}
