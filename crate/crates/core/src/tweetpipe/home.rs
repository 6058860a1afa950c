use std::collections::BTreeMap;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::dbscan::{dbscan_cluster, NOISE};
use super::geocode::ZoneIndex;
use crate::config::{LandUseWeights, TweetConfig};
use crate::geo::LatLon;
use crate::ingest::{LandUse, Tweet, TweetKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HomeLabel {
    Unlabeled,
    Candidate,
    NonHome,
    Home,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckinCluster {
    pub user_id: String,
    pub members: Vec<LatLon>,
    /// Share of member points per `LandUse::ALL` entry.
    pub land_use_mix: [f64; 6],
    /// 1 = most check-ins.
    pub checkin_rank: usize,
    pub midnight_activity: bool,
    pub home_tweet: bool,
    pub last_destination: bool,
    pub label: HomeLabel,
}

impl CheckinCluster {
    pub fn work_leisure_share(&self) -> f64 {
        self.land_use_mix[LandUse::Industry.index()] + self.land_use_mix[LandUse::Amenity.index()]
    }
}

/// Activity day a timestamp belongs to; days roll over at 05:00.
fn activity_day(ts: &NaiveDateTime) -> chrono::NaiveDate {
    (*ts - Duration::hours(5)).date()
}

fn has_keyword(text: &str, keywords: &[String]) -> bool {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .any(|w| keywords.iter().any(|k| k == w))
}

/// DBSCAN the user's geocoded tweets and compute per-cluster features.
/// Points outside every zone do not count towards the land-use mix; a cluster
/// with no zoned point gets a uniform mix.
pub fn build_checkin_clusters(user_id: &str, tweets: &[&Tweet], zones: &ZoneIndex, cfg: &TweetConfig) -> Vec<CheckinCluster> {
    let geo: Vec<&Tweet> = tweets.iter().copied().filter(|t| t.kind == TweetKind::Geocoded && t.coord.is_some()).collect();
    if geo.is_empty() {
        return Vec::new();
    }
    let coords: Vec<LatLon> = geo.iter().map(|t| t.coord.unwrap()).collect();
    let labels = dbscan_cluster(&coords, cfg.dbscan_eps_km, cfg.dbscan_min_pts);
    let k = labels.iter().filter(|l| **l != NOISE).max().map_or(0, |m| m + 1);

    let mut last_of_day: BTreeMap<chrono::NaiveDate, (NaiveDateTime, usize)> = BTreeMap::new();
    for (t, l) in geo.iter().zip(&labels) {
        if *l == NOISE {
            continue;
        }
        let e = last_of_day.entry(activity_day(&t.timestamp)).or_insert((t.timestamp, *l));
        if t.timestamp >= e.0 {
            *e = (t.timestamp, *l);
        }
    }

    let mut out: Vec<(usize, NaiveDateTime, CheckinCluster)> = (0..k)
        .map(|c| {
            let idx: Vec<usize> = (0..geo.len()).filter(|i| labels[*i] == c).collect();
            let members: Vec<LatLon> = idx.iter().map(|i| coords[*i]).collect();
            let mut mix = [0.0; 6];
            let mut zoned = 0.0;
            for p in &members {
                if let Some(lu) = zones.land_use(p) {
                    mix[lu.index()] += 1.0;
                    zoned += 1.0;
                }
            }
            if zoned > 0.0 {
                mix.iter_mut().for_each(|m| *m /= zoned);
            } else {
                mix = [1.0 / 6.0; 6];
            }
            let first = idx.iter().map(|i| geo[*i].timestamp).min().unwrap();
            let cluster = CheckinCluster {
                user_id: user_id.to_string(),
                land_use_mix: mix,
                checkin_rank: 0,
                midnight_activity: idx.iter().any(|i| geo[*i].timestamp.hour() < 6),
                home_tweet: idx.iter().any(|i| has_keyword(&geo[*i].text, &cfg.home_keywords)),
                last_destination: last_of_day.values().any(|(_, l)| *l == c),
                label: HomeLabel::Unlabeled,
                members,
            };
            (idx.len(), first, cluster)
        })
        .collect();
    out.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    out.into_iter()
        .enumerate()
        .map(|(r, (_, _, mut c))| {
            c.checkin_rank = r + 1;
            c
        })
        .collect()
}

/// Label one user's clusters with the six home rules, applied in order.
/// At most one cluster ends up `Home`.
pub fn classify_home_cluster(clusters: &mut [CheckinCluster]) {
    // Rule 1.
    for c in clusters.iter_mut() {
        c.label = HomeLabel::NonHome;
    }
    for c in clusters.iter_mut() {
        let quiet_land = c.work_leisure_share() < 0.5;
        // Rule 2.
        if c.checkin_rank == 1 && c.midnight_activity && quiet_land {
            c.label = HomeLabel::Candidate;
        }
        // Rule 3.
        if c.checkin_rank <= 3 && c.midnight_activity && quiet_land && c.home_tweet {
            c.label = HomeLabel::Candidate;
        }
        // Rule 4.
        if !c.last_destination || c.work_leisure_share() > 0.5 {
            c.label = HomeLabel::NonHome;
        }
    }
    // Rule 5.
    let candidate: Vec<bool> = clusters.iter().map(|c| c.label == HomeLabel::Candidate).collect();
    for (i, c) in clusters.iter_mut().enumerate() {
        let other = candidate.iter().enumerate().any(|(j, v)| *v && j != i);
        if c.label == HomeLabel::Candidate && !c.home_tweet && other {
            c.label = HomeLabel::NonHome;
        }
    }
    // Rule 6.
    let best = clusters
        .iter()
        .enumerate()
        .filter(|(_, c)| c.label == HomeLabel::Candidate)
        .min_by_key(|(_, c)| c.checkin_rank)
        .map(|(i, _)| i);
    for (i, c) in clusters.iter_mut().enumerate() {
        if c.label == HomeLabel::Candidate {
            c.label = if Some(i) == best { HomeLabel::Home } else { HomeLabel::NonHome };
        }
    }
}

pub fn land_use_weight(lu: Option<LandUse>, w: &LandUseWeights) -> f64 {
    match lu {
        Some(LandUse::Residence) => w.residence,
        Some(LandUse::MixedUse) => w.mixed_use,
        Some(LandUse::Education) => w.education,
        Some(LandUse::Downtown) => w.downtown,
        Some(LandUse::Industry) => w.industry,
        Some(LandUse::Amenity) => w.amenity,
        None => 0.0,
    }
}

/// Land-use weighted centroid; unweighted when every weight is zero.
pub fn weighted_home_location(points: &[LatLon], zones: &ZoneIndex, w: &LandUseWeights) -> Option<LatLon> {
    if points.is_empty() {
        return None;
    }
    let ws: Vec<f64> = points.iter().map(|p| land_use_weight(zones.land_use(p), w)).collect();
    let total: f64 = ws.iter().sum();
    let (ws, total) = if total > 0.0 { (ws, total) } else { (vec![1.0; points.len()], points.len() as f64) };
    let lat = points.iter().zip(&ws).map(|(p, w)| p.lat * w).sum::<f64>() / total;
    let lon = points.iter().zip(&ws).map(|(p, w)| p.lon * w).sum::<f64>() / total;
    Some(LatLon::new(lat, lon))
}

/// Full home inference for one user.
pub fn infer_home(user_id: &str, tweets: &[&Tweet], zones: &ZoneIndex, cfg: &TweetConfig) -> Option<LatLon> {
    let mut clusters = build_checkin_clusters(user_id, tweets, zones, cfg);
    classify_home_cluster(&mut clusters);
    let home = clusters.iter().find(|c| c.label == HomeLabel::Home)?;
    weighted_home_location(&home.members, zones, &cfg.land_use_weights)
}

/// Fill missing coordinates of night-window tweets with the home location.
pub fn geotag_timeline(tweets: &mut [Tweet], home: &LatLon, start_hour: u32, end_hour: u32) {
    for t in tweets.iter_mut() {
        if t.coord.is_none() && in_night_window(t.timestamp.hour(), start_hour, end_hour) {
            t.coord = Some(*home);
        }
    }
}

/// Hour window [start, end) that may wrap midnight.
pub fn in_night_window(hour: u32, start: u32, end: u32) -> bool {
    if start <= end {
        (start..end).contains(&hour)
    } else {
        hour >= start || hour < end
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Ring;
    use crate::ingest::ZonePolygon;

    fn cluster(rank: usize, midnight: bool, home_tweet: bool, last: bool, ind_amen: f64) -> CheckinCluster {
        let mut mix = [0.0; 6];
        mix[LandUse::Industry.index()] = ind_amen;
        mix[LandUse::Residence.index()] = 1.0 - ind_amen;
        CheckinCluster {
            user_id: "u".into(),
            members: vec![],
            land_use_mix: mix,
            checkin_rank: rank,
            midnight_activity: midnight,
            home_tweet,
            last_destination: last,
            label: HomeLabel::Unlabeled,
        }
    }

    #[test]
    fn rank_one_with_midnight_activity_is_home() {
        let mut c = vec![cluster(1, true, false, true, 0.1)];
        classify_home_cluster(&mut c);
        assert_eq!(c[0].label, HomeLabel::Home);
    }

    #[test]
    fn work_heavy_cluster_is_not_home() {
        let mut c = vec![cluster(1, true, true, true, 0.6)];
        classify_home_cluster(&mut c);
        assert_eq!(c[0].label, HomeLabel::NonHome);
    }

    #[test]
    fn highest_ranked_candidate_wins() {
        let mut c = vec![cluster(1, true, true, true, 0.1), cluster(2, false, false, true, 0.0), cluster(3, true, true, true, 0.0)];
        classify_home_cluster(&mut c);
        let labels: Vec<_> = c.iter().map(|c| c.label).collect();
        assert_eq!(labels, vec![HomeLabel::Home, HomeLabel::NonHome, HomeLabel::NonHome]);
    }

    #[test]
    fn never_last_destination_is_not_home() {
        let mut c = vec![cluster(1, true, true, false, 0.0)];
        classify_home_cluster(&mut c);
        assert_eq!(c[0].label, HomeLabel::NonHome);
    }

    #[test]
    fn candidate_without_home_tweet_yields_to_one_with() {
        let mut c = vec![cluster(1, true, false, true, 0.0), cluster(2, true, true, true, 0.0)];
        classify_home_cluster(&mut c);
        assert_eq!(c[0].label, HomeLabel::NonHome);
        assert_eq!(c[1].label, HomeLabel::Home);
    }

    fn zone(lu: LandUse, lon0: f64) -> ZonePolygon {
        ZonePolygon {
            land_use: lu,
            ring: Ring::new(vec![
                LatLon::new(0.0, lon0),
                LatLon::new(0.0, lon0 + 1.0),
                LatLon::new(1.0, lon0 + 1.0),
                LatLon::new(1.0, lon0),
            ]),
        }
    }

    #[test]
    fn weighted_centroid_rules() {
        let zones = ZoneIndex::new(&[zone(LandUse::Residence, 0.0), zone(LandUse::Industry, 1.0), zone(LandUse::Amenity, 2.0)]);
        let w = LandUseWeights::default();
        let r1 = LatLon::new(0.2, 0.2);
        let r2 = LatLon::new(0.4, 0.6);
        let home = weighted_home_location(&[r1, r2], &zones, &w).unwrap();
        assert!((home.lat - 0.3).abs() < 1e-12 && (home.lon - 0.4).abs() < 1e-12);
        let ind = LatLon::new(0.5, 1.5);
        assert_eq!(weighted_home_location(&[r1, ind], &zones, &w).unwrap(), r1);
        let a1 = LatLon::new(0.2, 2.2);
        let a2 = LatLon::new(0.4, 2.4);
        let c = weighted_home_location(&[a1, a2], &zones, &w).unwrap();
        assert!((c.lat - 0.3).abs() < 1e-12 && (c.lon - 2.3).abs() < 1e-12);
    }

    fn tw(ts: &str, coord: Option<LatLon>) -> Tweet {
        Tweet {
            tweet_id: String::new(),
            user_id: "u".into(),
            timestamp: ts.parse().unwrap(),
            kind: if coord.is_some() { TweetKind::Geocoded } else { TweetKind::Timeline },
            coord,
            profile_location: None,
            text: String::new(),
        }
    }

    #[test]
    fn geotagging_window() {
        let home = LatLon::new(40.0, -80.0);
        let own = LatLon::new(41.0, -80.0);
        let mut t = vec![tw("2014-02-03T23:00:00", None), tw("2014-02-03T23:00:00", Some(own)), tw("2014-02-03T14:00:00", None)];
        geotag_timeline(&mut t, &home, 21, 5);
        assert_eq!(t[0].coord, Some(home));
        assert_eq!(t[1].coord, Some(own));
        assert_eq!(t[2].coord, None);
    }
}
