//! Social-media pipeline: resident and bot filtering, home inference,
//! timeline geotagging, text cleaning, agency incident parsing, sentiment,
//! and the per-day sleep-wake and event encoders.

pub mod clean;
pub mod dbscan;
pub mod encode;
pub mod geocode;
pub mod home;
pub mod incidents;
pub mod sentiment;
pub mod users;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate, NaiveDateTime};

pub use clean::TextCleaner;
pub use encode::{encode_event_indicators, encode_sleep_wake, LabeledTweet, Period, TweetFeatureVector};
pub use geocode::{MilepostGeocoder, TractIndex, ZoneIndex};
pub use home::{classify_home_cluster, geotag_timeline, infer_home, CheckinCluster, HomeLabel};
pub use incidents::{assemble_incident_records, IncidentTweetParser, ParsedIncidentTweet};
pub use sentiment::{sentiment_label, LexiconScorer, PrecomputedScores, SentimentLabel, SentimentProvider};
pub use users::{detect_bots, filter_influential_users, BotScoreProvider, NullProvider, UserProfile};

use crate::config::TweetConfig;
use crate::geo::LatLon;
use crate::ingest::{Dataset, IncidentRecord, Tweet, TweetKind};

/// Per-tweet results that do not depend on any training split.
#[derive(Debug, Clone)]
pub struct TweetCorpus {
    pub tweets: Vec<Tweet>,
    /// Sentiment of geocoded tweets, by index into `tweets`.
    pub labels: BTreeMap<usize, SentimentLabel>,
    /// Tweet indices per user, in time order.
    pub by_user: BTreeMap<String, Vec<usize>>,
    pub agency_incidents: Vec<IncidentRecord>,
}

impl TweetCorpus {
    pub fn build(ds: &Dataset, cfg: &TweetConfig) -> TweetCorpus {
        let mut tweets = ds.tweets.clone();
        tweets.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.tweet_id.cmp(&b.tweet_id)));
        let cleaner = TextCleaner::new(&ds.lexicons);
        let lexicon = LexiconScorer::new(&ds.lexicons);
        let provider = PrecomputedScores { scores: &ds.lexicons.sentiment_scores, fallback: Some(&lexicon) };
        let agency: BTreeSet<&str> = cfg.agency_accounts.iter().map(|s| s.as_str()).collect();
        let parser = IncidentTweetParser::default();
        let mut labels = BTreeMap::new();
        let mut by_user: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut parsed = Vec::new();
        for (i, t) in tweets.iter().enumerate() {
            if agency.contains(t.user_id.as_str()) {
                if let Some(p) = parser.parse(&t.text, t.timestamp) {
                    parsed.push(p);
                }
                continue;
            }
            by_user.entry(t.user_id.clone()).or_default().push(i);
            if t.kind == TweetKind::Geocoded && t.coord.is_some() {
                let text = cleaner.clean(&t.text);
                labels.insert(i, sentiment_label(&t.tweet_id, &text, &provider, cfg).1);
            }
        }
        let agency_incidents = assemble_incident_records(&parsed, &MilepostGeocoder::new(&ds.segments)).records;
        TweetCorpus { tweets, labels, by_user, agency_incidents }
    }

    /// Index range of tweets with timestamps in [a, b).
    pub fn range(&self, a: NaiveDateTime, b: NaiveDateTime) -> std::ops::Range<usize> {
        self.tweets.partition_point(|t| t.timestamp < a)..self.tweets.partition_point(|t| t.timestamp < b)
    }
}

/// Users, bots and homes learned from tweets before a cutoff.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserModel {
    pub profiles: BTreeMap<String, UserProfile>,
    pub bots: BTreeSet<String>,
    pub homes: BTreeMap<String, LatLon>,
}

impl UserModel {
    pub fn fit(
        corpus: &TweetCorpus,
        cutoff: NaiveDateTime,
        ds: &Dataset,
        provider: &dyn BotScoreProvider,
        cfg: &TweetConfig,
    ) -> UserModel {
        let end = corpus.tweets.partition_point(|t| t.timestamp < cutoff);
        let agency: BTreeSet<&str> = cfg.agency_accounts.iter().map(|s| s.as_str()).collect();
        let train: Vec<Tweet> =
            corpus.tweets[..end].iter().filter(|t| !agency.contains(t.user_id.as_str())).cloned().collect();
        let mut profiles = filter_influential_users(&train, &ds.lexicons.resident, cfg);
        let bots = detect_bots(&mut profiles, provider, cfg);
        let zones = ZoneIndex::new(&ds.zones);
        let mut homes = BTreeMap::new();
        for (u, p) in profiles.iter_mut() {
            if !p.is_resident || bots.contains(u) {
                continue;
            }
            let mine: Vec<&Tweet> =
                corpus.by_user[u].iter().take_while(|i| **i < end).map(|i| &corpus.tweets[*i]).collect();
            if let Some(h) = infer_home(u, &mine, &zones, cfg) {
                p.home = Some(h);
                homes.insert(u.clone(), h);
            }
        }
        log::debug!("{} residents with homes, {} bots", homes.len(), bots.len());
        UserModel { profiles, bots, homes }
    }
}

/// Tweet features for one prediction day.
pub fn encode_day(date: NaiveDate, corpus: &TweetCorpus, users: &UserModel, tracts: &TractIndex, cfg: &TweetConfig) -> TweetFeatureVector {
    let midnight = date.and_hms_opt(0, 0, 0).unwrap();
    let night_start = midnight - Duration::hours(24 - cfg.geotag_start_hour as i64);
    let night_end = midnight + Duration::hours(cfg.geotag_end_hour as i64);
    let mut timelines: Vec<Vec<Tweet>> = Vec::with_capacity(users.homes.len());
    for (u, home) in &users.homes {
        let idx = &corpus.by_user[u];
        let lo = idx.partition_point(|i| corpus.tweets[*i].timestamp < night_start);
        let hi = idx.partition_point(|i| corpus.tweets[*i].timestamp < night_end);
        let mut tl: Vec<Tweet> = idx[lo..hi].iter().map(|i| corpus.tweets[*i].clone()).collect();
        geotag_timeline(&mut tl, home, cfg.geotag_start_hour, cfg.geotag_end_hour);
        timelines.push(tl);
    }
    let (sleep_hist, wake_hist) = encode_sleep_wake(date, timelines.iter().map(|v| v.as_slice()), tracts, cfg);

    let (a, b) = encode::event_window(date);
    let labeled: Vec<LabeledTweet> = corpus
        .range(a, b)
        .filter_map(|i| {
            let t = &corpus.tweets[i];
            let label = *corpus.labels.get(&i)?;
            (!users.bots.contains(&t.user_id)).then_some(LabeledTweet { timestamp: t.timestamp, coord: t.coord, label })
        })
        .collect();
    let (period_counts, neutral_pct) = encode_event_indicators(date, &labeled, &cfg.bbox);
    TweetFeatureVector { date, sleep_hist, wake_hist, period_counts, neutral_pct }
}
