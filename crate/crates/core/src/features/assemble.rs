use serde::{Deserialize, Serialize};

use super::incident::IncidentImpactFeatures;
use super::time::{TimeFeatures, TIME_NAMES};
use super::weather::{weather_names, PER_HOUR};
use crate::config::TweetConfig;
use crate::error::{Error, Result};
use crate::tweetpipe::encode::{night_offset, Period, TweetFeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    Tweet,
    Weather,
    Time,
    Incident,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub group: FeatureGroup,
    /// Hour the information refers to, relative to midnight of the prediction day.
    pub hour_offset: Option<i64>,
}

/// Ordered column layout of road- or segment-level vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
}

impl FeatureSchema {
    /// Tweet, weather and time columns.
    pub fn road(tract_ids: &[String], cfg: &TweetConfig, hours: u32) -> Self {
        let mut columns = Vec::new();
        let mut push = |name: String, group, off| columns.push(Column { name, group, hour_offset: off });
        for hrs in [&cfg.sleep_hours, &cfg.wake_hours] {
            for t in tract_ids {
                for h in hrs.iter() {
                    push(format!("{h}_{t}"), FeatureGroup::Tweet, Some(night_offset(*h)));
                }
            }
        }
        for p in Period::ALL {
            push(p.name().to_string(), FeatureGroup::Tweet, Some(p.start_offset()));
        }
        for p in Period::ALL {
            push(format!("Neu_{}", p.name()), FeatureGroup::Tweet, Some(p.start_offset()));
        }
        for (i, n) in weather_names(hours).into_iter().enumerate() {
            push(n, FeatureGroup::Weather, Some((i / PER_HOUR) as i64));
        }
        for n in TIME_NAMES {
            push(n.to_string(), FeatureGroup::Time, None);
        }
        FeatureSchema { columns }
    }

    /// Road columns plus incident impacts and `levels` descriptor outputs.
    pub fn segment(road: &FeatureSchema, hours: u32, levels: usize) -> Self {
        let mut columns = road.columns.clone();
        for (i, n) in IncidentImpactFeatures::names(hours as usize).into_iter().enumerate() {
            columns.push(Column { name: n, group: FeatureGroup::Incident, hour_offset: Some((i % hours as usize) as i64) });
        }
        for c in 1..=levels {
            columns.push(Column { name: format!("c_{c}"), group: FeatureGroup::Cluster, hour_offset: None });
        }
        FeatureSchema { columns }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn count(&self, g: FeatureGroup) -> usize {
        self.columns.iter().filter(|c| c.group == g).count()
    }
}

pub fn road_vector(tweets: &TweetFeatureVector, weather: &[f64], time: &TimeFeatures) -> Vec<f64> {
    let mut v = Vec::with_capacity(tweets.sleep_hist.len() + tweets.wake_hist.len() + 12 + weather.len() + 10);
    v.extend(&tweets.sleep_hist);
    v.extend(&tweets.wake_hist);
    v.extend(tweets.period_counts);
    v.extend(tweets.neutral_pct);
    v.extend(weather);
    v.extend(time.values());
    v
}

/// Road vector extended with incident impacts and, when the schema has
/// cluster columns, the descriptor outputs.
pub fn segment_vector(schema: &FeatureSchema, road: &[f64], incident: &IncidentImpactFeatures, levels: Option<&[f64]>) -> Result<Vec<f64>> {
    let want = schema.count(FeatureGroup::Cluster);
    let mut v = Vec::with_capacity(schema.len());
    v.extend(road);
    v.extend(&incident.values);
    match levels {
        Some(c) if c.len() == want => v.extend(c),
        None if want == 0 => {}
        Some(c) => return Err(Error::Dimension(format!("{} descriptor outputs for {want} columns", c.len()))),
        None => return Err(Error::MissingComponent("descriptor outputs".into())),
    }
    if v.len() != schema.len() {
        return Err(Error::Dimension(format!("segment vector has {} entries, schema {}", v.len(), schema.len())));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tfv(n_tracts: usize) -> TweetFeatureVector {
        TweetFeatureVector {
            date: "2014-02-04".parse().unwrap(),
            sleep_hist: vec![0.0; 6 * n_tracts],
            wake_hist: vec![0.0; 2 * n_tracts],
            period_counts: [0.0; 6],
            neutral_pct: [0.0; 6],
        }
    }

    #[test]
    fn layouts() {
        let cfg = TweetConfig::default();
        let tracts = vec!["A".to_string(), "B".to_string()];
        let road = FeatureSchema::road(&tracts, &cfg, 11);
        assert!(!road.names().iter().any(|n| n.starts_with("p_") || n.starts_with("f_")));
        let t = crate::features::time::time_features("2014-02-04".parse().unwrap(), &|_| false);
        let rv = road_vector(&tfv(2), &vec![0.0; 11 * PER_HOUR], &t);
        assert_eq!(rv.len(), road.len());
        assert_eq!(road.names()[1], "22_A");
        assert_eq!(road.columns[1].hour_offset, Some(-2));

        let seg = FeatureSchema::segment(&road, 11, 3);
        let tail: Vec<_> = seg.names().into_iter().rev().take(3).collect();
        assert_eq!(tail, vec!["c_3", "c_2", "c_1"]);
        let inc = IncidentImpactFeatures::zeros(11);
        assert!(segment_vector(&seg, &rv, &inc, Some(&[0.1, 0.2, 0.3])).is_ok());
        assert!(matches!(segment_vector(&seg, &rv, &inc, None), Err(Error::MissingComponent(_))));
        assert_eq!(FeatureSchema::road(&tracts, &cfg, 11).names(), road.names());
    }
}
