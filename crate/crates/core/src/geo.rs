//! WGS-84 coordinates, haversine distances and point-in-polygon tests.

use serde::{Deserialize, Serialize};

const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }

    /// Point a fraction `t` of the way towards `other` (linear in degrees).
    pub fn lerp(&self, other: &LatLon, t: f64) -> LatLon {
        LatLon::new(
            self.lat + (other.lat - self.lat) * t,
            self.lon + (other.lon - self.lon) * t,
        )
    }
}

/// Great-circle distance in kilometers.
pub fn haversine_km(a: &LatLon, b: &LatLon) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Shift a point by metric offsets (small-distance approximation).
pub fn offset_m(p: &LatLon, north_m: f64, east_m: f64) -> LatLon {
    let dlat = north_m / 1000.0 / EARTH_RADIUS_KM;
    let dlon = east_m / 1000.0 / (EARTH_RADIUS_KM * p.lat.to_radians().cos());
    LatLon::new(p.lat + dlat.to_degrees(), p.lon + dlon.to_degrees())
}

/// Axis-aligned lat/lon box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn contains(&self, p: &LatLon) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a LatLon>) -> Option<BBox> {
        let mut it = pts.into_iter();
        let first = it.next()?;
        let mut b = BBox {
            min_lon: first.lon,
            min_lat: first.lat,
            max_lon: first.lon,
            max_lat: first.lat,
        };
        for p in it {
            b.min_lon = b.min_lon.min(p.lon);
            b.max_lon = b.max_lon.max(p.lon);
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lat = b.max_lat.max(p.lat);
        }
        Some(b)
    }
}

impl Default for BBox {
    /// The Pittsburgh collection box.
    fn default() -> Self {
        BBox {
            min_lon: -80.20,
            min_lat: 40.29,
            max_lon: -79.80,
            max_lat: 40.62,
        }
    }
}

/// A simple polygon ring. The closing vertex may or may not be repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub vertices: Vec<LatLon>,
}

impl Ring {
    pub fn new(mut vertices: Vec<LatLon>) -> Self {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Ring { vertices }
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::from_points(self.vertices.iter())
    }

    pub fn centroid(&self) -> LatLon {
        let n = self.vertices.len().max(1) as f64;
        let (la, lo) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(a, b), v| (a + v.lat, b + v.lon));
        LatLon::new(la / n, lo / n)
    }

    /// True if `p` lies on one of the ring's edges.
    pub fn on_boundary(&self, p: &LatLon) -> bool {
        let n = self.vertices.len();
        (0..n).any(|i| {
            let a = &self.vertices[i];
            let b = &self.vertices[(i + 1) % n];
            on_segment(a, b, p)
        })
    }

    /// Ray-casting test; boundary points count as inside.
    pub fn contains(&self, p: &LatLon) -> bool {
        if self.vertices.len() < 3 {
            return false;
        }
        if self.on_boundary(p) {
            return true;
        }
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (vi, vj) = (&self.vertices[i], &self.vertices[j]);
            if (vi.lat > p.lat) != (vj.lat > p.lat) {
                let x = vi.lon + (p.lat - vi.lat) / (vj.lat - vi.lat) * (vj.lon - vi.lon);
                if p.lon < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

fn on_segment(a: &LatLon, b: &LatLon, p: &LatLon) -> bool {
    const EPS: f64 = 1e-12;
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    if cross.abs() > EPS {
        return false;
    }
    p.lon >= a.lon.min(b.lon) - EPS
        && p.lon <= a.lon.max(b.lon) + EPS
        && p.lat >= a.lat.min(b.lat) - EPS
        && p.lat <= a.lat.max(b.lat) + EPS
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Ring {
        Ring::new(vec![
            LatLon::new(0.0, 0.0),
            LatLon::new(0.0, 1.0),
            LatLon::new(1.0, 1.0),
            LatLon::new(1.0, 0.0),
            LatLon::new(0.0, 0.0),
        ])
    }

    #[test]
    fn haversine_known_distance() {
        // One degree of latitude is ~111.2 km.
        let d = haversine_km(&LatLon::new(40.0, -80.0), &LatLon::new(41.0, -80.0));
        assert!((d - 111.195).abs() < 0.01, "{d}");
        assert_eq!(haversine_km(&LatLon::new(1.0, 2.0), &LatLon::new(1.0, 2.0)), 0.0);
    }

    #[test]
    fn offset_roundtrip_distance() {
        let p = LatLon::new(40.44, -79.99);
        let q = offset_m(&p, 300.0, 400.0);
        assert!((haversine_km(&p, &q) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn ring_contains() {
        let r = square();
        assert_eq!(r.vertices.len(), 4);
        assert!(r.contains(&LatLon::new(0.5, 0.5)));
        assert!(!r.contains(&LatLon::new(1.5, 0.5)));
        assert!(r.contains(&LatLon::new(0.0, 0.5)));
        assert!(r.on_boundary(&LatLon::new(1.0, 0.3)));
    }
}
