use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::geocode::MilepostGeocoder;
use crate::ingest::{ClosureType, IncidentRecord, IncidentSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaneStatus {
    Restriction,
    FullClosure,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TweetFlag {
    Occur,
    Update,
    Clear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedIncidentTweet {
    pub timestamp: NaiveDateTime,
    pub road_name: String,
    pub direction: String,
    pub mileposts: Vec<f64>,
    pub incident_type: String,
    pub lane_status: LaneStatus,
    pub flag: TweetFlag,
}

impl ParsedIncidentTweet {
    pub fn road_id(&self) -> String {
        road_id_for(&self.road_name, &self.direction)
    }

    fn key(&self) -> (String, String, String) {
        let mps: Vec<String> = self.mileposts.iter().map(|m| format!("{m:.1}")).collect();
        (self.road_name.clone(), self.direction.clone(), mps.join("-"))
    }
}

/// "I-376" + "eastbound" -> "I-376E".
pub fn road_id_for(name: &str, direction: &str) -> String {
    let d = direction.chars().next().map(|c| c.to_ascii_uppercase()).unwrap_or_default();
    format!("{name}{d}")
}

/// Grammar for the fixed agency tweet format.
#[derive(Debug, Clone)]
pub struct IncidentTweetParser {
    head: Regex,
    milepost: Regex,
}

impl Default for IncidentTweetParser {
    fn default() -> Self {
        IncidentTweetParser {
            head: Regex::new(
                r"(?i)^\s*(?:(UPDATE|CLEARED|CLEAR)\s*:\s*)?(.+?)\s+on\s+([A-Z]{1,3}[- ]?\d+[A-Z]?)\s+(eastbound|westbound|northbound|southbound)\s+(?:at|between|near)\b(.*)$",
            )
            .unwrap(),
            milepost: Regex::new(r"(?i)(?:mile\s*post|exit)\s*:?\s*(\d+(?:\.\d+)?)").unwrap(),
        }
    }
}

fn normalize_type(raw: &str) -> String {
    let l = raw.trim().to_lowercase();
    if ["crash", "accident", "collision"].iter().any(|k| l.contains(k)) {
        "crash".into()
    } else if ["roadwork", "road work", "construction", "maintenance"].iter().any(|k| l.contains(k)) {
        "roadwork".into()
    } else if l.contains("disabled") {
        "disabled vehicle".into()
    } else {
        l
    }
}

impl IncidentTweetParser {
    /// `None` for tweets that are not incident reports.
    pub fn parse(&self, text: &str, timestamp: NaiveDateTime) -> Option<ParsedIncidentTweet> {
        let c = self.head.captures(text)?;
        let flag = match c.get(1).map(|m| m.as_str().to_ascii_uppercase()) {
            Some(f) if f == "UPDATE" => TweetFlag::Update,
            Some(_) => TweetFlag::Clear,
            None => TweetFlag::Occur,
        };
        let tail = &c[5];
        let mileposts: Vec<f64> = self.milepost.captures_iter(tail).filter_map(|m| m[1].parse().ok()).collect();
        if mileposts.is_empty() {
            return None;
        }
        let lower = tail.to_lowercase();
        let lane_status = if lower.contains("all lanes closed") || lower.contains("road closed") {
            LaneStatus::FullClosure
        } else if lower.contains("restriction") {
            LaneStatus::Restriction
        } else if lower.contains("open") || flag == TweetFlag::Clear {
            LaneStatus::Open
        } else {
            LaneStatus::Restriction
        };
        Some(ParsedIncidentTweet {
            timestamp,
            road_name: c[3].to_ascii_uppercase().replace(' ', "-"),
            direction: c[4].to_lowercase(),
            mileposts,
            incident_type: normalize_type(&c[2]),
            lane_status,
            flag,
        })
    }
}

/// Records assembled from parsed tweets, plus the record index of each input tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledIncidents {
    pub records: Vec<IncidentRecord>,
    pub assignment: Vec<usize>,
}

struct Open {
    members: Vec<usize>,
}

/// Group a time-ordered stream into OCCUR ... CLEAR records keyed by road,
/// direction and mileposts. Records the geocoder cannot place are dropped.
pub fn assemble_incident_records(parsed: &[ParsedIncidentTweet], geocoder: &MilepostGeocoder) -> AssembledIncidents {
    let mut order: Vec<usize> = (0..parsed.len()).collect();
    order.sort_by_key(|i| (parsed[*i].timestamp, *i));
    let mut open: BTreeMap<(String, String, String), Open> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let p = &parsed[i];
        let key = p.key();
        match p.flag {
            TweetFlag::Occur => {
                if let Some(prev) = open.remove(&key) {
                    groups.push(prev.members);
                }
                open.insert(key, Open { members: vec![i] });
            }
            TweetFlag::Update | TweetFlag::Clear => {
                let entry = open.entry(key.clone()).or_insert_with(|| {
                    log::warn!("{:?} tweet at {} without an opening report", p.flag, p.timestamp);
                    Open { members: Vec::new() }
                });
                entry.members.push(i);
                if p.flag == TweetFlag::Clear {
                    groups.push(open.remove(&key).unwrap().members);
                }
            }
        }
    }
    groups.extend(open.into_values().map(|o| o.members));
    groups.sort_by_key(|g| (parsed[g[0]].timestamp, g[0]));

    let mut records = Vec::new();
    let mut assignment = vec![usize::MAX; parsed.len()];
    for g in groups {
        let first = &parsed[g[0]];
        let road_id = first.road_id();
        let mps = g.iter().flat_map(|i| parsed[*i].mileposts.iter().copied());
        let lo = mps.clone().fold(f64::INFINITY, f64::min);
        let hi = mps.fold(f64::NEG_INFINITY, f64::max);
        let (Some(start), Some(end)) = (geocoder.point_at(&road_id, lo), geocoder.point_at(&road_id, hi)) else {
            log::warn!("cannot place incident on {road_id} at mileposts {lo}-{hi}");
            continue;
        };
        let full = g.iter().any(|i| parsed[*i].lane_status == LaneStatus::FullClosure);
        for i in &g {
            assignment[*i] = records.len();
        }
        records.push(IncidentRecord {
            incident_id: format!("TW{:05}", records.len() + 1),
            source: IncidentSource::Tweet,
            road_id,
            closure_start: first.timestamp,
            closure_end: g.iter().map(|i| parsed[*i].timestamp).max().unwrap(),
            start,
            end,
            closure_type: if full { ClosureType::Full } else { ClosureType::Partial },
            category: first.incident_type.clone(),
        });
    }
    AssembledIncidents { records, assignment }
}
