use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::geo::{LatLon, Ring};

/// A TMC road segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDescriptor {
    pub segment_id: String,
    pub road_id: String,
    /// 0 is the most upstream segment of the road.
    pub order_on_road: u32,
    pub start_mp: f64,
    pub end_mp: f64,
    pub start: LatLon,
    pub end: LatLon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedRecord {
    pub segment_id: String,
    pub timestamp: NaiveDateTime,
    /// mph
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IncidentSource {
    Rcrs,
    Tweet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClosureType {
    Partial,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub incident_id: String,
    pub source: IncidentSource,
    pub road_id: String,
    pub closure_start: NaiveDateTime,
    pub closure_end: NaiveDateTime,
    pub start: LatLon,
    pub end: LatLon,
    pub closure_type: ClosureType,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub timestamp: NaiveDateTime,
    /// degrees F
    pub temp: f64,
    pub humidity: f64,
    pub wind: f64,
    pub pressure: f64,
    pub visibility: f64,
    pub precip: f64,
    pub pavement_wet: bool,
    /// Ordinal; larger is more adverse.
    pub wx_severity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TweetKind {
    Geocoded,
    Timeline,
    Retweet,
    Favorite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub tweet_id: String,
    pub user_id: String,
    pub timestamp: NaiveDateTime,
    pub kind: TweetKind,
    pub coord: Option<LatLon>,
    pub profile_location: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LandUse {
    Residence,
    Downtown,
    Education,
    Industry,
    MixedUse,
    Amenity,
}

impl LandUse {
    pub const ALL: [LandUse; 6] = [
        LandUse::Residence,
        LandUse::Downtown,
        LandUse::Education,
        LandUse::Industry,
        LandUse::MixedUse,
        LandUse::Amenity,
    ];

    pub fn index(self) -> usize {
        LandUse::ALL.iter().position(|l| *l == self).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractPolygon {
    pub tract_id: String,
    pub ring: Ring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePolygon {
    pub land_use: LandUse,
    pub ring: Ring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarInfo {
    pub date: NaiveDate,
    pub is_holiday: bool,
}

impl CalendarInfo {
    pub fn day_of_week(&self) -> Weekday {
        self.date.weekday()
    }
}

/// Text resources used by the tweet pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicons {
    /// slang -> formal expansion
    pub slang: Vec<(String, String)>,
    /// Resident profile patterns; entries prefixed with `re:` are regexes.
    pub resident: Vec<String>,
    /// Words used for hashtag segmentation.
    pub wordlist: Vec<String>,
    /// token -> valence in [-1, 1]
    pub valence: Vec<(String, f64)>,
    /// Precomputed sentiment probabilities keyed by tweet id.
    pub sentiment_scores: BTreeMap<String, f64>,
}

/// Everything loaded from a dataset directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub segments: Vec<SegmentDescriptor>,
    pub speeds: Vec<SpeedRecord>,
    pub incidents: Vec<IncidentRecord>,
    pub weather: Vec<WeatherRecord>,
    pub tweets: Vec<Tweet>,
    pub tracts: Vec<TractPolygon>,
    pub zones: Vec<ZonePolygon>,
    pub calendar: Vec<CalendarInfo>,
    pub lexicons: Lexicons,
}

impl Dataset {
    /// Road ids in first-seen order of `segments`.
    pub fn road_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.segments {
            if !out.contains(&s.road_id) {
                out.push(s.road_id.clone());
            }
        }
        out
    }

    /// Segments of a road sorted upstream to downstream.
    pub fn road_segments(&self, road_id: &str) -> Vec<&SegmentDescriptor> {
        let mut v: Vec<_> = self.segments.iter().filter(|s| s.road_id == road_id).collect();
        v.sort_by_key(|s| s.order_on_road);
        v
    }

    pub fn holiday(&self, date: NaiveDate) -> bool {
        self.calendar
            .binary_search_by_key(&date, |c| c.date)
            .map(|i| self.calendar[i].is_holiday)
            .unwrap_or(false)
    }
}

macro_rules! text_enum {
    ($t:ty, $( $v:ident => $s:expr ),+ $(,)?) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self { $( <$t>::$v => $s ),+ };
                f.write_str(s)
            }
        }
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $( x if x == $s.to_ascii_lowercase() => Ok(<$t>::$v), )+
                    other => Err(format!("unknown {} '{}'", stringify!($t), other)),
                }
            }
        }
    };
}

text_enum!(IncidentSource, Rcrs => "RCRS", Tweet => "TWEET");
text_enum!(ClosureType, Partial => "PARTIAL", Full => "FULL");
text_enum!(TweetKind, Geocoded => "GEOCODED", Timeline => "TIMELINE", Retweet => "RETWEET", Favorite => "FAVORITE");
text_enum!(
    LandUse,
    Residence => "residence",
    Downtown => "downtown",
    Education => "education",
    Industry => "industry",
    MixedUse => "mixed-use",
    Amenity => "amenity",
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enum_text_roundtrip() {
        for l in LandUse::ALL {
            assert_eq!(l.to_string().parse::<LandUse>().unwrap(), l);
        }
        assert_eq!("full".parse::<ClosureType>().unwrap(), ClosureType::Full);
        assert!("bogus".parse::<TweetKind>().is_err());
    }
}
