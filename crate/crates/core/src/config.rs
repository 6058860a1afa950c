//! Run configuration. Every tunable constant of the pipeline lives here and
//! round-trips through `config.json`; missing keys take their defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CongestionParams {
    pub tti_thres: f64,
    /// Minutes.
    pub t_min: u32,
    /// Minutes.
    pub merge_gap: u32,
    /// Minutes; fixed at 5.
    pub slot: u32,
}

impl Default for CongestionParams {
    fn default() -> Self {
        Self {
            tti_thres: 2.0,
            t_min: 15,
            merge_gap: 15,
            slot: 5,
        }
    }
}

impl CongestionParams {
    pub fn validate(&self) -> Result<()> {
        if self.slot != 5 {
            return Err(Error::InvalidConfig("slot must be 5 minutes".into()));
        }
        if self.t_min == 0 || self.t_min % self.slot != 0 {
            return Err(Error::InvalidConfig("t_min must be a positive multiple of slot".into()));
        }
        if self.merge_gap == 0 || self.merge_gap % self.slot != 0 {
            return Err(Error::InvalidConfig("merge_gap must be a positive multiple of slot".into()));
        }
        if !(self.tti_thres.is_finite() && self.tti_thres > 0.0) {
            return Err(Error::InvalidConfig("tti_thres must be positive".into()));
        }
        Ok(())
    }

    pub fn min_run_slots(&self) -> usize {
        (self.t_min / self.slot) as usize
    }

    pub fn merge_gap_slots(&self) -> usize {
        (self.merge_gap / self.slot) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub variance_target: f64,
    pub k_min: usize,
    pub k_max: usize,
    /// When set, skip the elbow search and use this K.
    pub fixed_k: Option<usize>,
    pub n_init: usize,
    pub max_iter: usize,
    /// Tweeting-profile window start, minutes after midnight of the previous day.
    pub profile_start_min: u32,
    pub profile_bins: usize,
    pub profile_bin_min: u32,
    pub profile_smooth_min: u32,
    pub tweet_clusters: usize,
    pub bias_corrected_v: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            variance_target: 0.90,
            k_min: 2,
            k_max: 8,
            fixed_k: None,
            n_init: 10,
            max_iter: 300,
            profile_start_min: 18 * 60,
            profile_bins: 19,
            profile_bin_min: 30,
            profile_smooth_min: 120,
            tweet_clusters: 4,
            bias_corrected_v: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TweetConfig {
    pub min_geocoded: usize,
    pub bot_range_m: f64,
    pub bot_score_thres: f64,
    pub dbscan_eps_km: f64,
    pub dbscan_min_pts: usize,
    pub pos_thres: f64,
    pub neg_thres: f64,
    /// Geotagging window, hours [start, end) wrapping midnight.
    pub geotag_start_hour: u32,
    pub geotag_end_hour: u32,
    pub sleep_hours: Vec<u32>,
    pub wake_hours: Vec<u32>,
    /// Count retweets and favorites as timeline activity for sleep/wake pulses.
    pub include_shared_kinds: bool,
    pub home_keywords: Vec<String>,
    pub agency_accounts: Vec<String>,
    pub land_use_weights: LandUseWeights,
    pub bbox: BBox,
}

impl Default for TweetConfig {
    fn default() -> Self {
        Self {
            min_geocoded: 5,
            bot_range_m: 10.0,
            bot_score_thres: 2.0,
            dbscan_eps_km: 0.3,
            dbscan_min_pts: 1,
            pos_thres: 0.7,
            neg_thres: 0.3,
            geotag_start_hour: 21,
            geotag_end_hour: 5,
            sleep_hours: vec![21, 22, 23, 0, 1, 2],
            wake_hours: vec![3, 4],
            include_shared_kinds: true,
            home_keywords: ["sleep", "wake", "tv", "sofa", "bath", "bed", "couch", "home", "pajamas"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            agency_accounts: vec!["511PAPittsburgh".into()],
            land_use_weights: LandUseWeights::default(),
            bbox: BBox::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandUseWeights {
    pub residence: f64,
    pub mixed_use: f64,
    pub education: f64,
    pub downtown: f64,
    pub industry: f64,
    pub amenity: f64,
}

impl Default for LandUseWeights {
    fn default() -> Self {
        Self {
            residence: 1.0,
            mixed_use: 0.5,
            education: 0.2,
            downtown: 0.2,
            industry: 0.0,
            amenity: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub d_thres_km: f64,
    /// Last hour (exclusive) of the incident/weather grid; hours are 0..hour_grid_end.
    pub hour_grid_end: u32,
    /// Incident categories treated as planned (known ahead of time).
    pub planned_categories: Vec<String>,
    /// Weather phrase to severity mapping, informational; loaders read the ordinal.
    pub wx_severity: Vec<(String, u32)>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            d_thres_km: 5.0,
            hour_grid_end: 11,
            planned_categories: ["roadwork", "construction", "bridge", "maintenance", "planned"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            wx_severity: vec![
                ("clear".into(), 0),
                ("fog".into(), 1),
                ("rain".into(), 2),
                ("snow".into(), 3),
                ("flood".into(), 4),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    /// Grid multipliers; the effective penalty is `factor * anchor_frac * lambda_max`.
    pub grid_factors: Vec<f64>,
    pub anchor_frac: f64,
    pub logistic_tol: f64,
    pub logistic_max_iter: usize,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    pub cs_threshold: f64,
    pub knn_k_grid: Vec<usize>,
    pub rf_trees: usize,
    pub rf_max_depth: Option<usize>,
    pub rf_min_leaf: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            grid_factors: vec![0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0],
            anchor_frac: 1.0,
            logistic_tol: 1e-6,
            logistic_max_iter: 10_000,
            lasso_tol: 1e-8,
            lasso_max_iter: 10_000,
            cs_threshold: 0.5,
            knn_k_grid: vec![3, 5, 9],
            rf_trees: 100,
            rf_max_depth: None,
            rf_min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub n_outer: usize,
    pub n_inner: usize,
    /// Information cutoff for evaluation mode, hour of the prediction day.
    pub cutoff_hour: u32,
    pub hm_windows: Vec<Option<usize>>,
    pub sar_p_grid: Vec<usize>,
    pub sar_h_grid: Vec<usize>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            n_outer: 10,
            n_inner: 4,
            cutoff_hour: 5,
            hm_windows: vec![Some(4), Some(8), Some(16), None],
            sar_p_grid: vec![3, 12],
            sar_h_grid: vec![0, 1, 4],
        }
    }
}

/// Top-level configuration (`config.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Declared dataset timezone; timestamps are handled as local clock times.
    pub timezone: String,
    pub congestion: CongestionParams,
    pub clustering: ClusteringConfig,
    pub tweets: TweetConfig,
    pub features: FeatureConfig,
    pub learn: LearnConfig,
    pub harness: HarnessConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            timezone: "America/New_York".into(),
            congestion: CongestionParams::default(),
            clustering: ClusteringConfig::default(),
            tweets: TweetConfig::default(),
            features: FeatureConfig::default(),
            learn: LearnConfig::default(),
            harness: HarnessConfig::default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.congestion.validate()?;
        if self.clustering.k_min < 1 || self.clustering.k_max < self.clustering.k_min {
            return Err(Error::InvalidConfig("invalid k range".into()));
        }
        if !(0.0..=1.0).contains(&self.clustering.variance_target) {
            return Err(Error::InvalidConfig("variance_target must be in [0,1]".into()));
        }
        if self.tweets.neg_thres >= self.tweets.pos_thres {
            return Err(Error::InvalidConfig("neg_thres must be below pos_thres".into()));
        }
        if self.features.d_thres_km <= 0.0 {
            return Err(Error::InvalidConfig("d_thres_km must be positive".into()));
        }
        if self.features.hour_grid_end == 0 || self.features.hour_grid_end > 24 {
            return Err(Error::InvalidConfig("hour_grid_end must be in 1..=24".into()));
        }
        if self.learn.grid_factors.is_empty() || self.learn.grid_factors.iter().any(|g| *g < 0.0) {
            return Err(Error::InvalidConfig("grid_factors must be nonempty and nonnegative".into()));
        }
        if self.harness.n_outer == 0 || self.harness.n_inner < 2 {
            return Err(Error::InvalidConfig("n_outer >= 1 and n_inner >= 2 required".into()));
        }
        if self.harness.cutoff_hour > 24 {
            return Err(Error::InvalidConfig("cutoff_hour must be <= 24".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Config> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Config> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Config::from_json(&std::fs::read_to_string(path)?)
    }
}
