use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::config::TweetConfig;
use crate::geo::{haversine_km, BBox, LatLon};
use crate::ingest::{Tweet, TweetKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub geocoded_count: usize,
    /// Only evaluated for users with enough geocoded tweets.
    pub is_resident: bool,
    pub bot_score: Option<f64>,
    /// Diagonal of the bounding box of the user's geocoded tweets, meters.
    pub location_range_m: f64,
    pub home: Option<LatLon>,
}

/// Matches profile locations against the resident lexicon.
#[derive(Debug, Clone)]
pub struct ResidentMatcher {
    patterns: Vec<Regex>,
    bbox: BBox,
}

impl ResidentMatcher {
    pub fn new(lexicon: &[String], bbox: BBox) -> Self {
        let mut plain = Vec::new();
        let mut patterns = Vec::new();
        for e in lexicon.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
            match e.strip_prefix("re:") {
                Some(r) => match Regex::new(&format!("(?i){r}")) {
                    Ok(re) => patterns.push(re),
                    Err(err) => log::warn!("bad resident pattern {r:?}: {err}"),
                },
                None => plain.push(regex::escape(&e.to_lowercase())),
            }
        }
        if !plain.is_empty() {
            patterns.push(Regex::new(&format!(r"(?i)\b(?:{})\b", plain.join("|"))).unwrap());
        }
        ResidentMatcher { patterns, bbox }
    }

    pub fn matches(&self, location: &str) -> bool {
        if let Some((a, b)) = location.split_once(',') {
            if let (Ok(lat), Ok(lon)) = (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                return self.bbox.contains(&LatLon::new(lat, lon));
            }
        }
        self.patterns.iter().any(|p| p.is_match(location))
    }
}

fn range_m(coords: &[LatLon]) -> f64 {
    match BBox::from_points(coords.iter()) {
        Some(b) => 1000.0 * haversine_km(&LatLon::new(b.min_lat, b.min_lon), &LatLon::new(b.max_lat, b.max_lon)),
        None => 0.0,
    }
}

/// Summarize every user. Residency is flagged for users with at least
/// `min_geocoded` geocoded tweets whose profile location matches the lexicon.
pub fn filter_influential_users(tweets: &[Tweet], lexicon: &[String], cfg: &TweetConfig) -> BTreeMap<String, UserProfile> {
    let matcher = ResidentMatcher::new(lexicon, cfg.bbox);
    let mut coords: BTreeMap<&str, Vec<LatLon>> = BTreeMap::new();
    let mut location: BTreeMap<&str, &str> = BTreeMap::new();
    for t in tweets {
        let c = coords.entry(t.user_id.as_str()).or_default();
        if t.kind == TweetKind::Geocoded {
            if let Some(p) = t.coord {
                c.push(p);
            }
        }
        if let Some(l) = t.profile_location.as_deref() {
            location.insert(t.user_id.as_str(), l);
        }
    }
    coords
        .into_iter()
        .map(|(u, c)| {
            let n = c.len();
            let is_resident = n >= cfg.min_geocoded && location.get(u).is_some_and(|l| matcher.matches(l));
            let p = UserProfile {
                user_id: u.to_string(),
                geocoded_count: n,
                is_resident,
                bot_score: None,
                location_range_m: range_m(&c),
                home: None,
            };
            (u.to_string(), p)
        })
        .collect()
}

/// Source of bot-likelihood scores.
pub trait BotScoreProvider {
    fn score(&self, user_id: &str) -> std::result::Result<Option<f64>, String>;
}

/// Returns no scores; suspicious users are then all excluded.
pub struct NullProvider;

impl BotScoreProvider for NullProvider {
    fn score(&self, _: &str) -> std::result::Result<Option<f64>, String> {
        Ok(None)
    }
}

impl BotScoreProvider for BTreeMap<String, f64> {
    fn score(&self, user_id: &str) -> std::result::Result<Option<f64>, String> {
        Ok(self.get(user_id).copied())
    }
}

/// Users to exclude among those with enough geocoded tweets: a location range
/// under the threshold, and a score above the bot threshold when one is available.
pub fn detect_bots(
    users: &mut BTreeMap<String, UserProfile>,
    provider: &dyn BotScoreProvider,
    cfg: &TweetConfig,
) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for u in users.values_mut() {
        if u.geocoded_count < cfg.min_geocoded.max(2) || u.location_range_m >= cfg.bot_range_m {
            continue;
        }
        match provider.score(&u.user_id) {
            Ok(Some(s)) => {
                u.bot_score = Some(s);
                if s > cfg.bot_score_thres {
                    out.insert(u.user_id.clone());
                }
            }
            Ok(None) => {
                out.insert(u.user_id.clone());
            }
            Err(e) => log::warn!("bot score lookup failed for {}: {e}; keeping user", u.user_id),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::offset_m;
    use crate::ingest::Lexicons;

    fn tweet(user: &str, coord: Option<LatLon>, loc: &str) -> Tweet {
        Tweet {
            tweet_id: String::new(),
            user_id: user.into(),
            timestamp: "2014-02-03T10:00:00".parse().unwrap(),
            kind: if coord.is_some() { TweetKind::Geocoded } else { TweetKind::Timeline },
            coord,
            profile_location: Some(loc.into()),
            text: String::new(),
        }
    }

    fn spread(user: &str, n: usize, step_m: f64, loc: &str) -> Vec<Tweet> {
        let a = LatLon::new(40.44, -79.99);
        (0..n).map(|i| tweet(user, Some(offset_m(&a, step_m * i as f64, 0.0)), loc)).collect()
    }

    #[test]
    fn resident_lexicon_and_threshold() {
        let lex = Lexicons::builtin().resident;
        let cfg = TweetConfig::default();
        let mut tw = spread("a", 6, 100.0, "Pittsburgh, PA");
        tw.extend(spread("b", 6, 100.0, "da burgh"));
        tw.extend(spread("c", 4, 100.0, "Pittsburgh, PA"));
        tw.extend(spread("d", 6, 100.0, "Chicago, IL"));
        tw.extend(spread("e", 6, 100.0, "15213"));
        let u = filter_influential_users(&tw, &lex, &cfg);
        assert!(u["a"].is_resident);
        assert!(u["b"].is_resident);
        assert!(!u["c"].is_resident);
        assert!(!u["d"].is_resident);
        assert!(u["e"].is_resident);
    }

    #[test]
    fn bot_rules() {
        let cfg = TweetConfig::default();
        let mut tw = spread("still", 6, 0.0, "pgh");
        tw.extend(spread("scored", 6, 0.0, "pgh"));
        tw.extend(spread("low", 6, 0.0, "pgh"));
        tw.extend(spread("mover", 6, 1000.0, "pgh"));
        let mut users = filter_influential_users(&tw, &[], &cfg);
        let scores: BTreeMap<String, f64> =
            [("scored".to_string(), 2.5), ("low".to_string(), 1.0), ("mover".to_string(), 9.0)].into();
        let out = detect_bots(&mut users.clone(), &scores, &cfg);
        assert_eq!(out, BTreeSet::from(["scored".to_string(), "still".to_string()]));
        let out = detect_bots(&mut users, &NullProvider, &cfg);
        assert!(out.contains("still") && out.contains("low") && !out.contains("mover"));
    }
}
