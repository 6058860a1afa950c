use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::pipeline::Prepared;
use crate::clustering::{build_road_profiles, build_tweeting_profiles, chi_squared_cramers_v, fit_profile_clustering, Association, ClusterOrder};
use crate::congestion::reference_speed;
use crate::error::{Error, Result};
use crate::tweetpipe::{NullProvider, UserModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadAssociation {
    pub road_id: String,
    pub traffic_k: usize,
    pub tweet_k: usize,
    /// Rows are traffic clusters, columns tweeting clusters.
    pub association: Association,
    /// P(traffic cluster | tweeting cluster), columns summing to one.
    pub conditional: Array2<f64>,
    pub traffic_curve: Vec<(usize, f64)>,
    pub traffic_centroids: Array2<f64>,
    pub traffic_dates: Vec<NaiveDate>,
    pub traffic_labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveAnalysis {
    pub tweet_dates: Vec<NaiveDate>,
    pub tweet_labels: Vec<usize>,
    pub tweet_centroids: Array2<f64>,
    pub roads: Vec<RoadAssociation>,
}

/// Tweet timestamps of resident accounts with an inferred home, sorted.
pub fn resident_timestamps(prep: &Prepared, users: &UserModel) -> Vec<NaiveDateTime> {
    let mut ts: Vec<NaiveDateTime> = users
        .homes
        .keys()
        .filter_map(|u| prep.corpus.by_user.get(u))
        .flatten()
        .map(|i| prep.corpus.tweets[*i].timestamp)
        .collect();
    ts.sort();
    ts
}

/// Traffic clusters of each road against the evening tweeting clusters over
/// all days, with χ² test and Cramér's V.
pub fn run_descriptive_analysis(prep: &Prepared, seed: u64) -> Result<DescriptiveAnalysis> {
    let cfg = &prep.cfg;
    let dates = &prep.dates;
    let end = (*dates.last().unwrap() + Duration::days(1)).and_hms_opt(0, 0, 0).unwrap();
    let users = UserModel::fit(&prep.corpus, end, &prep.ds, &NullProvider, &cfg.tweets);
    let tweeting = build_tweeting_profiles(&resident_timestamps(prep, &users), dates, &cfg.clustering);
    if tweeting.profiles.is_empty() {
        return Err(Error::EmptyInput("tweeting profiles"));
    }
    let tc = fit_profile_clustering(
        tweeting.matrix().view(),
        &cfg.clustering,
        seed,
        Some(cfg.clustering.tweet_clusters),
        ClusterOrder::CenterOfMass,
    )?;
    let tweet_label: BTreeMap<NaiveDate, usize> = tweeting.profiles.iter().map(|p| p.date).zip(tc.labels().iter().copied()).collect();

    let mut roads = Vec::new();
    for (road_id, segs) in &prep.roads {
        let ids: Vec<String> = segs.iter().map(|s| s.segment_id.clone()).collect();
        let mut v_ref = BTreeMap::new();
        for s in &ids {
            if let Ok(v) = reference_speed(&prep.speeds.observed(s, dates)) {
                v_ref.insert(s.clone(), v);
            }
        }
        let profiles = match build_road_profiles(road_id, &ids, dates, |s, d| prep.speeds.tti(s, d, *v_ref.get(s)?).ok().map(|t| t.values)) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("road {road_id}: skipped in descriptive analysis ({e})");
                continue;
            }
        };
        let rc = fit_profile_clustering(profiles.rows.view(), &cfg.clustering, seed, None, ClusterOrder::MeanValue)?;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (d, l) in profiles.dates.iter().zip(rc.labels()) {
            if let Some(t) = tweet_label.get(d) {
                a.push(*l);
                b.push(*t);
            }
        }
        let association = chi_squared_cramers_v(&a, &b, cfg.clustering.bias_corrected_v)?;
        let mut conditional = association.table.clone();
        for mut col in conditional.columns_mut() {
            let s: f64 = col.sum();
            if s > 0.0 {
                col.mapv_inplace(|v| v / s);
            }
        }
        roads.push(RoadAssociation {
            road_id: road_id.clone(),
            traffic_k: rc.k(),
            tweet_k: tc.k(),
            association,
            conditional,
            traffic_curve: rc.curve.clone(),
            traffic_centroids: rc.centroid_profiles.clone(),
            traffic_dates: profiles.dates.clone(),
            traffic_labels: rc.labels().to_vec(),
        });
    }
    Ok(DescriptiveAnalysis {
        tweet_dates: tweeting.profiles.iter().map(|p| p.date).collect(),
        tweet_labels: tc.labels().to_vec(),
        tweet_centroids: tc.centroid_profiles.clone(),
        roads,
    })
}
