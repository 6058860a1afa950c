use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ablation::{select, AblationSpec, Variant};
use super::baselines::{day_gram, forward_filled, hm_predict, sar_quadruple, tune_hm_window, tune_sar, SarGram, SarModel, SpeedSeries};
use super::cv::TsCvPlan;
use super::metrics::{compute_metrics, weighted_mean, Metric, MetricSet, Outcome, METRICS};
use crate::clustering::{build_road_profiles, fit_profile_clustering, ClusterOrder};
use crate::config::Config;
use crate::congestion::{congestion_measurements, reference_speed, CongestionMeasurements, SpeedTable, DAY_SLOTS};
use crate::error::{Error, Result};
use crate::features::{
    incident_features, road_vector, time_features, weather_features, FeatureSchema, IncidentImpactFeatures, RoadGeometry,
    WeatherIndex, WeatherScaler,
};
use crate::geo::LatLon;
use crate::ingest::{Dataset, IncidentRecord, SegmentDescriptor};
use crate::learn::segment::regression_targets;
use crate::learn::{fit_ordered_descriptor, fit_segment_models, Head, RoadModel, SegmentFitOptions};
use crate::tweetpipe::{encode_day, NullProvider, TractIndex, TweetCorpus, UserModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Only information available at the cutoff of the prediction day.
    Evaluation,
    /// All incidents and weather hours, for inspecting fitted weights.
    Interpretation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    T2t,
    T2tKnn,
    T2tRf,
    Hm,
    Sar,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::T2t, ModelKind::T2tKnn, ModelKind::T2tRf, ModelKind::Hm, ModelKind::Sar];

    pub fn head(self) -> Option<Head> {
        match self {
            ModelKind::T2t => Some(Head::Linear),
            ModelKind::T2tKnn => Some(Head::Knn),
            ModelKind::T2tRf => Some(Head::Forest),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Hm => "hm",
            ModelKind::Sar => "sar",
            m => m.head().unwrap().name(),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub mode: Mode,
    pub variant: Variant,
    pub models: Vec<ModelKind>,
    pub seed: u64,
}

impl RunOptions {
    pub fn evaluation(seed: u64) -> Self {
        RunOptions { mode: Mode::Evaluation, variant: Variant::Base, models: vec![ModelKind::T2t, ModelKind::Hm, ModelKind::Sar], seed }
    }

    pub fn spec(&self, cfg: &Config) -> AblationSpec {
        let cutoff = match self.mode {
            Mode::Evaluation => Some(cfg.harness.cutoff_hour),
            Mode::Interpretation => None,
        };
        AblationSpec::new(self.variant, cutoff)
    }

    fn heads(&self) -> BTreeSet<Head> {
        self.models.iter().filter_map(|m| m.head()).collect()
    }
}

struct SarData {
    series: SpeedSeries,
    grams: BTreeMap<NaiveDate, SarGram>,
}

/// Split-independent indexes over a dataset.
pub struct Prepared {
    pub ds: Dataset,
    pub cfg: Config,
    /// Days with speed observations, ascending.
    pub dates: Vec<NaiveDate>,
    pub speeds: SpeedTable,
    pub corpus: TweetCorpus,
    pub tracts: TractIndex,
    pub weather: WeatherIndex,
    /// Dataset incidents followed by those parsed from agency tweets.
    pub incidents: Vec<IncidentRecord>,
    pub geo: RoadGeometry,
    pub roads: Vec<(String, Vec<SegmentDescriptor>)>,
    pub road_schema: FeatureSchema,
    /// Road columns plus incident columns, without descriptor outputs.
    pub segment_schema: FeatureSchema,
    by_date: BTreeMap<NaiveDate, Vec<usize>>,
    sar: OnceLock<BTreeMap<String, SarData>>,
}

impl Prepared {
    pub fn new(ds: Dataset, cfg: Config) -> Result<Prepared> {
        cfg.validate()?;
        if ds.segments.is_empty() {
            return Err(Error::EmptyInput("segments"));
        }
        let speeds = SpeedTable::new(&ds.speeds);
        let dates: Vec<NaiveDate> = ds.speeds.iter().map(|r| r.timestamp.date()).collect::<BTreeSet<_>>().into_iter().collect();
        if dates.is_empty() {
            return Err(Error::EmptyInput("speed records"));
        }
        let corpus = TweetCorpus::build(&ds, &cfg.tweets);
        let tracts = TractIndex::new(&ds.tracts);
        let weather = WeatherIndex::new(&ds.weather);
        let mut incidents = ds.incidents.clone();
        incidents.extend(corpus.agency_incidents.iter().cloned());
        let mut by_date: BTreeMap<NaiveDate, Vec<usize>> = BTreeMap::new();
        for (i, inc) in incidents.iter().enumerate() {
            let mut d = inc.closure_start.date();
            while d <= inc.closure_end.date() && d - inc.closure_start.date() <= Duration::days(31) {
                by_date.entry(d).or_default().push(i);
                d += Duration::days(1);
            }
        }
        let geo = RoadGeometry::new(&ds.segments);
        let roads = ds.road_ids().into_iter().map(|r| (r.clone(), ds.road_segments(&r).into_iter().cloned().collect())).collect();
        let hours = cfg.features.hour_grid_end;
        let road_schema = FeatureSchema::road(&tracts.ids(), &cfg.tweets, hours);
        let segment_schema = FeatureSchema::segment(&road_schema, hours, 0);
        Ok(Prepared {
            ds,
            cfg,
            dates,
            speeds,
            corpus,
            tracts,
            weather,
            incidents,
            geo,
            roads,
            road_schema,
            segment_schema,
            by_date,
            sar: OnceLock::new(),
        })
    }

    fn hours(&self) -> u32 {
        self.cfg.features.hour_grid_end
    }

    fn cutoff_slot(&self) -> usize {
        (self.cfg.harness.cutoff_hour as usize * 12).min(DAY_SLOTS - 1)
    }

    /// Unmasked road-level vector of one prediction day.
    pub fn road_x(&self, date: NaiveDate, users: &UserModel, scaler: &WeatherScaler) -> Vec<f64> {
        let tw = encode_day(date, &self.corpus, users, &self.tracts, &self.cfg.tweets);
        let w = weather_features(&self.weather, date, scaler, self.hours());
        let t = time_features(date, &|d| self.ds.holiday(d));
        road_vector(&tw, &w, &t)
    }

    fn incident_known(&self, inc: &IncidentRecord, date: NaiveDate, mode: Mode) -> bool {
        match mode {
            Mode::Interpretation => true,
            Mode::Evaluation => {
                let cutoff = date.and_hms_opt(0, 0, 0).unwrap() + Duration::hours(self.cfg.harness.cutoff_hour as i64);
                inc.closure_start < cutoff
                    || self.cfg.features.planned_categories.iter().any(|c| c.eq_ignore_ascii_case(&inc.category))
            }
        }
    }

    pub fn incident_x(&self, seg: &SegmentDescriptor, date: NaiveDate, mode: Mode) -> IncidentImpactFeatures {
        let incs: Vec<&IncidentRecord> = self
            .by_date
            .get(&date)
            .into_iter()
            .flatten()
            .map(|i| &self.incidents[*i])
            .filter(|inc| inc.road_id == seg.road_id && self.incident_known(inc, date, mode))
            .collect();
        incident_features(&incs, seg, date, &self.geo, self.cfg.features.d_thres_km, self.hours())
    }

    fn sar_data(&self) -> &BTreeMap<String, SarData> {
        self.sar.get_or_init(|| {
            let h = &self.cfg.harness;
            let p_max = h.sar_p_grid.iter().copied().max().unwrap_or(1);
            let h_max = h.sar_h_grid.iter().copied().max().unwrap_or(0);
            let from = self.cutoff_slot();
            let mut out = BTreeMap::new();
            for s in &self.ds.segments {
                let series: SpeedSeries = self
                    .dates
                    .iter()
                    .filter_map(|d| self.speeds.day(&s.segment_id, *d).map(|g| (*d, forward_filled(g))))
                    .collect();
                let grams = self.dates.iter().filter_map(|d| day_gram(&series, *d, p_max, h_max, from).map(|g| (*d, g))).collect();
                out.insert(s.segment_id.clone(), SarData { series, grams });
            }
            out
        })
    }

    fn truth(&self, seg: &str, date: NaiveDate, v_ref: f64) -> Option<(Vec<f64>, CongestionMeasurements)> {
        let tti = self.speeds.tti(seg, date, v_ref).ok()?;
        let m = congestion_measurements(&tti, &self.cfg.congestion);
        Some((tti.values, m))
    }

    fn min_run(&self) -> u32 {
        self.cfg.congestion.min_run_slots() as u32
    }
}

/// Copy of `ds` without any record at or after `cutoff`.
pub fn truncate_dataset(ds: &Dataset, cutoff: NaiveDateTime) -> Dataset {
    let mut out = ds.clone();
    out.speeds.retain(|r| r.timestamp < cutoff);
    out.incidents.retain(|r| r.closure_start < cutoff);
    out.weather.retain(|r| r.timestamp < cutoff);
    out.tweets.retain(|r| r.timestamp < cutoff);
    out.calendar.retain(|r| r.date < cutoff.date());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmModel {
    pub window: Option<usize>,
    pub history: Vec<(NaiveDate, CongestionMeasurements)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRoad {
    pub road_id: String,
    /// Number of traffic clusters on the training days.
    pub k: Option<usize>,
    pub centroid_profiles: Option<Array2<f64>>,
    /// Inertia against K from the elbow search.
    pub curve: Vec<(usize, f64)>,
    pub model: Option<RoadModel>,
}

/// Everything fitted on one training span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: String,
    pub seed: u64,
    pub mode: Mode,
    pub spec: AblationSpec,
    pub train_dates: Vec<NaiveDate>,
    pub bots: BTreeSet<String>,
    pub homes: BTreeMap<String, LatLon>,
    pub weather_scaler: WeatherScaler,
    pub v_ref: BTreeMap<String, f64>,
    pub road_columns: Vec<String>,
    pub segment_columns: Vec<String>,
    pub roads: Vec<FittedRoad>,
    pub hm: BTreeMap<String, HmModel>,
    pub sar: BTreeMap<String, SarModel>,
}

impl ModelBundle {
    pub fn users(&self) -> UserModel {
        UserModel { profiles: BTreeMap::new(), bots: self.bots.clone(), homes: self.homes.clone() }
    }

    /// SHA-256 of the JSON serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

/// Fits every requested model on the training days.
pub fn fit_bundle(prep: &Prepared, train: &[NaiveDate], opts: &RunOptions, seed: u64) -> Result<ModelBundle> {
    let cfg = &prep.cfg;
    let last = *train.last().ok_or_else(|| Error::TooFewDays("empty training span".into()))?;
    let spec = opts.spec(cfg);
    let user_cutoff = (last + Duration::days(1)).and_hms_opt(0, 0, 0).unwrap();
    let users = UserModel::fit(&prep.corpus, user_cutoff, &prep.ds, &NullProvider, &cfg.tweets);
    let weather_scaler = WeatherScaler::fit(prep.weather.morning_records(train, prep.hours()));
    let mut v_ref = BTreeMap::new();
    for s in &prep.ds.segments {
        match reference_speed(&prep.speeds.observed(&s.segment_id, train)) {
            Ok(v) if v > 0.0 => {
                v_ref.insert(s.segment_id.clone(), v);
            }
            _ => log::warn!("segment {}: no training speeds", s.segment_id),
        }
    }
    let road_keep = spec.keep(&prep.road_schema);
    let seg_keep = spec.keep(&prep.segment_schema);
    let heads = opts.heads();
    let road_rows: Vec<Vec<f64>> = if heads.is_empty() {
        Vec::new()
    } else {
        train.iter().map(|d| select(&prep.road_x(*d, &users, &weather_scaler), &road_keep)).collect()
    };
    let min_run = prep.min_run();

    let mut roads = Vec::new();
    let mut hm = BTreeMap::new();
    let mut sar = BTreeMap::new();
    for (road_id, segs) in &prep.roads {
        // Per segment, per training day: TTI curve and quadruple.
        let truths: Vec<Vec<Option<(Vec<f64>, CongestionMeasurements)>>> = segs
            .iter()
            .map(|s| train.iter().map(|d| v_ref.get(&s.segment_id).and_then(|v| prep.truth(&s.segment_id, *d, *v))).collect())
            .collect();

        for (si, s) in segs.iter().enumerate() {
            let history: Vec<(NaiveDate, CongestionMeasurements)> =
                train.iter().zip(&truths[si]).filter_map(|(d, t)| t.as_ref().map(|(_, m)| (*d, *m))).collect();
            if opts.models.contains(&ModelKind::Hm) {
                let window = tune_hm_window(&history, &cfg.harness.hm_windows, min_run);
                hm.insert(s.segment_id.clone(), HmModel { window, history: history.clone() });
            }
            if opts.models.contains(&ModelKind::Sar) {
                let data = &prep.sar_data()[&s.segment_id];
                let h = &cfg.harness;
                match tune_sar(&data.series, &data.grams, train, &h.sar_p_grid, &h.sar_h_grid, h.n_inner, prep.cutoff_slot()) {
                    Ok(m) => {
                        sar.insert(s.segment_id.clone(), m);
                    }
                    Err(e) => log::warn!("segment {}: no SAR model ({e})", s.segment_id),
                }
            }
        }

        if heads.is_empty() {
            roads.push(FittedRoad { road_id: road_id.clone(), k: None, centroid_profiles: None, curve: Vec::new(), model: None });
            continue;
        }
        let ids: Vec<String> = segs.iter().map(|s| s.segment_id.clone()).collect();
        let pos: BTreeMap<NaiveDate, usize> = train.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let profiles = build_road_profiles(road_id, &ids, train, |sid, d| {
            let si = ids.iter().position(|x| x == sid)?;
            truths[si][pos[&d]].as_ref().map(|(v, _)| v.clone())
        });
        let clustering = match profiles {
            Ok(p) => fit_profile_clustering(p.rows.view(), &cfg.clustering, seed, None, ClusterOrder::MeanValue).map(|c| (p.dates, c)),
            Err(e) => Err(e),
        };
        let (k, centroids, curve, descriptor) = match clustering {
            Ok((dates, c)) => {
                let descriptor = if spec.uses_cluster() && c.k() >= 2 {
                    let x = Array2::from_shape_fn((dates.len(), road_keep.len()), |(i, j)| road_rows[pos[&dates[i]]][j]);
                    let names: Vec<String> = road_keep.iter().map(|i| prep.road_schema.columns[*i].name.clone()).collect();
                    Some(fit_ordered_descriptor(x.view(), c.labels(), &names, c.k(), &cfg.learn, cfg.harness.n_inner)?)
                } else {
                    None
                };
                (Some(c.k()), Some(c.centroid_profiles.clone()), c.curve.clone(), descriptor)
            }
            Err(e) => {
                log::warn!("road {road_id}: no traffic clustering ({e})");
                (None, None, Vec::new(), None)
            }
        };
        let levels = descriptor.as_ref().map_or(0, |d| d.levels - 1);
        let mut names: Vec<String> = seg_keep.iter().map(|i| prep.segment_schema.columns[*i].name.clone()).collect();
        names.extend((1..=levels).map(|c| format!("c_{c}")));
        let chat: Vec<Vec<f64>> = road_rows.iter().map(|r| descriptor.as_ref().map(|d| d.predict(r)).unwrap_or_default()).collect();

        let mut segments = Vec::new();
        for (si, s) in segs.iter().enumerate() {
            let rows: Vec<usize> = (0..train.len()).filter(|i| truths[si][*i].is_some()).collect();
            if rows.len() < 2 {
                log::warn!("segment {}: too few labeled training days", s.segment_id);
                continue;
            }
            let width = names.len();
            let mut x = Array2::zeros((rows.len(), width));
            for (r, i) in rows.iter().enumerate() {
                let mut full = prep.unmask_road(&road_rows[*i], &road_keep);
                full.extend(prep.incident_x(s, train[*i], opts.mode).values);
                let mut v = select(&full, &seg_keep);
                v.extend(&chat[*i]);
                for (j, val) in v.into_iter().enumerate() {
                    x[[r, j]] = val;
                }
            }
            let truth: Vec<CongestionMeasurements> = rows.iter().map(|i| truths[si][*i].as_ref().unwrap().1).collect();
            let ch: Vec<Vec<f64>> = rows.iter().map(|i| chat[*i].clone()).collect();
            let fit_opts = SegmentFitOptions {
                n_folds: cfg.harness.n_inner,
                knn: heads.contains(&Head::Knn) && descriptor.is_some(),
                forest: heads.contains(&Head::Forest),
                seed: seed ^ (si as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            };
            segments.push(fit_segment_models(&s.segment_id, x.view(), &names, &ch, &truth, &cfg.learn, &fit_opts)?);
        }
        roads.push(FittedRoad {
            road_id: road_id.clone(),
            k,
            centroid_profiles: centroids,
            curve,
            model: Some(RoadModel { road_id: road_id.clone(), descriptor, segments }),
        });
    }

    Ok(ModelBundle {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        mode: opts.mode,
        spec,
        train_dates: train.to_vec(),
        bots: users.bots,
        homes: users.homes,
        weather_scaler,
        v_ref,
        road_columns: road_keep.iter().map(|i| prep.road_schema.columns[*i].name.clone()).collect(),
        segment_columns: seg_keep.iter().map(|i| prep.segment_schema.columns[*i].name.clone()).collect(),
        roads,
        hm,
        sar,
    })
}

impl Prepared {
    /// Re-expands a masked road row to the full road layout with zeros in
    /// dropped columns, so incident columns land at their schema positions.
    fn unmask_road(&self, masked: &[f64], keep: &[usize]) -> Vec<f64> {
        let mut full = vec![0.0; self.road_schema.len()];
        for (v, i) in masked.iter().zip(keep) {
            full[*i] = *v;
        }
        full
    }
}

/// One model's output for a segment-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub model: String,
    pub split: usize,
    pub segment: String,
    pub date: NaiveDate,
    pub truth: Option<CongestionMeasurements>,
    pub prob: f64,
    /// CST, CD in slots and PTI, produced whatever the predicted status.
    pub regression: [f64; 3],
    pub pred: CongestionMeasurements,
    /// Linear head outputs with all incident columns set to zero.
    pub no_incident: Option<(f64, [f64; 3])>,
}

impl PredictionRecord {
    pub fn outcome(&self) -> Option<Outcome> {
        let t = self.truth?;
        Some(Outcome { truth_cs: t.cs, pred_cs: self.pred.cs, truth_reg: regression_targets(&t), pred_reg: self.regression })
    }
}

/// Predictions of every fitted model for the given days.
pub fn predict_days(prep: &Prepared, bundle: &ModelBundle, dates: &[NaiveDate], models: &[ModelKind], split: usize) -> Vec<PredictionRecord> {
    let cfg = &prep.cfg;
    let users = bundle.users();
    let road_keep = bundle.spec.keep(&prep.road_schema);
    let seg_keep = bundle.spec.keep(&prep.segment_schema);
    let min_run = prep.min_run();
    let cutoff = prep.cutoff_slot();
    let segs_by_road: BTreeMap<&str, &Vec<SegmentDescriptor>> = prep.roads.iter().map(|(r, s)| (r.as_str(), s)).collect();
    let has_incidents = prep.segment_schema.columns.iter().enumerate().any(|(i, c)| {
        c.group == crate::features::FeatureGroup::Incident && seg_keep.contains(&i)
    });
    let mut out = Vec::new();
    for &date in dates {
        let need_x = models.iter().any(|m| m.head().is_some());
        let road_full = if need_x { prep.road_x(date, &users, &bundle.weather_scaler) } else { Vec::new() };
        for road in &bundle.roads {
            let segs = segs_by_road[road.road_id.as_str()];
            let truth_of = |sid: &str| bundle.v_ref.get(sid).and_then(|v| prep.truth(sid, date, *v)).map(|(_, m)| m);
            if let Some(rm) = &road.model {
                let road_masked = select(&road_full, &road_keep);
                let by_id: BTreeMap<&str, &SegmentDescriptor> = segs.iter().map(|s| (s.segment_id.as_str(), s)).collect();
                let mut with_inc = Vec::new();
                let mut without = Vec::new();
                for m in &rm.segments {
                    let s = by_id[m.segment_id.as_str()];
                    let mut v = road_full.clone();
                    v.extend(prep.incident_x(s, date, bundle.mode).values);
                    with_inc.push(select(&v, &seg_keep));
                    let mut z = road_full.clone();
                    z.extend(IncidentImpactFeatures::zeros(prep.hours() as usize).values);
                    without.push(select(&z, &seg_keep));
                }
                let cf = rm.predict_day(Head::Linear, &road_masked, &without, cfg.learn.cs_threshold, min_run);
                for kind in models.iter().filter(|m| m.head().is_some()) {
                    let preds = rm.predict_day(kind.head().unwrap(), &road_masked, &with_inc, cfg.learn.cs_threshold, min_run);
                    for ((m, p), c) in rm.segments.iter().zip(preds).zip(&cf) {
                        out.push(PredictionRecord {
                            model: kind.name().to_string(),
                            split,
                            segment: m.segment_id.clone(),
                            date,
                            truth: truth_of(&m.segment_id),
                            prob: p.prob,
                            regression: p.regression,
                            pred: p.measurements,
                            no_incident: (*kind == ModelKind::T2t && has_incidents).then_some((c.prob, c.regression)),
                        });
                    }
                }
            }
            for s in segs.iter() {
                let sid = &s.segment_id;
                if let (true, Some(h)) = (models.contains(&ModelKind::Hm), bundle.hm.get(sid)) {
                    let p = hm_predict(&h.history, date, h.window, min_run);
                    out.push(PredictionRecord {
                        model: "hm".into(),
                        split,
                        segment: sid.clone(),
                        date,
                        truth: truth_of(sid),
                        prob: if p.cs { 1.0 } else { 0.0 },
                        regression: p.regression,
                        pred: p.measurements,
                        no_incident: None,
                    });
                }
                if let (true, Some(m), Some(v)) = (models.contains(&ModelKind::Sar), bundle.sar.get(sid), bundle.v_ref.get(sid)) {
                    let data = &prep.sar_data()[sid];
                    match m.rollout(&data.series, date, cutoff) {
                        Ok(speeds) => {
                            let (q, reg) = sar_quadruple(&speeds, cutoff, *v, &cfg.congestion);
                            out.push(PredictionRecord {
                                model: "sar".into(),
                                split,
                                segment: sid.clone(),
                                date,
                                truth: truth_of(sid),
                                prob: if q.cs { 1.0 } else { 0.0 },
                                regression: reg,
                                pred: q,
                                no_incident: None,
                            });
                        }
                        Err(e) => log::debug!("segment {sid} on {date}: no SAR rollout ({e})"),
                    }
                }
            }
        }
    }
    out
}

/// Metrics of one model on one segment and split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub model: String,
    pub segment: String,
    pub split: usize,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mode: Mode,
    pub variant: Variant,
    pub models: Vec<String>,
    pub rows: Vec<SplitMetrics>,
    pub predictions: Vec<PredictionRecord>,
    pub bundle_hashes: Vec<String>,
    #[serde(skip)]
    pub bundles: Vec<ModelBundle>,
}

impl EvaluationReport {
    pub fn empty(mode: Mode, variant: Variant) -> Self {
        EvaluationReport { mode, variant, models: Vec::new(), rows: Vec::new(), predictions: Vec::new(), bundle_hashes: Vec::new(), bundles: Vec::new() }
    }

    /// Builds per (model, segment, split) metrics from prediction records.
    pub fn from_predictions(mode: Mode, variant: Variant, models: Vec<String>, predictions: Vec<PredictionRecord>) -> Self {
        let mut groups: BTreeMap<(String, usize, String), Vec<Outcome>> = BTreeMap::new();
        for p in &predictions {
            let e = groups.entry((p.model.clone(), p.split, p.segment.clone())).or_default();
            if let Some(o) = p.outcome() {
                e.push(o);
            }
        }
        let order: BTreeMap<&str, usize> = models.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
        let mut rows: Vec<SplitMetrics> = groups
            .into_iter()
            .map(|((model, split, segment), o)| SplitMetrics { model, segment, split, metrics: compute_metrics(&o) })
            .collect();
        rows.sort_by(|a, b| {
            (order.get(a.model.as_str()), a.split, &a.segment).cmp(&(order.get(b.model.as_str()), b.split, &b.segment))
        });
        EvaluationReport { mode, variant, models, rows, predictions, bundle_hashes: Vec::new(), bundles: Vec::new() }
    }

    /// Sample-count weighted aggregate over all segments and splits.
    pub fn aggregate(&self, model: &str, metric: &str) -> Metric {
        weighted_mean(self.rows.iter().filter(|r| r.model == model).filter_map(|r| r.metrics.get(metric)).collect::<Vec<_>>().iter())
    }

    pub fn aggregates(&self) -> Vec<(String, String, Metric)> {
        let mut out = Vec::new();
        for m in &self.models {
            for k in METRICS {
                out.push((m.clone(), k.to_string(), self.aggregate(m, k)));
            }
        }
        out
    }
}

/// Seed of outer split `k`.
pub fn split_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Nested time-series cross-validation: every outer split refits all
/// split-dependent state on its training span and predicts its test fold.
pub fn run_nested_tscv(prep: &Prepared, opts: &RunOptions) -> Result<EvaluationReport> {
    let plan = TsCvPlan::new(prep.dates.len(), prep.cfg.harness.n_outer, prep.cfg.harness.n_inner)?;
    if opts.models.contains(&ModelKind::Sar) {
        prep.sar_data();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<usize, Result<(ModelBundle, Vec<PredictionRecord>)>>> = Mutex::new(BTreeMap::new());
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(plan.n_outer).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= plan.n_outer {
                    break;
                }
                let (train, test) = plan.split(k);
                let r = fit_bundle(prep, &prep.dates[train], opts, split_seed(opts.seed, k)).map(|b| {
                    let preds = predict_days(prep, &b, &prep.dates[test], &opts.models, k);
                    (b, preds)
                });
                log::info!("split {} of {} done", k + 1, plan.n_outer);
                results.lock().unwrap().insert(k, r);
            });
        }
    });
    let mut predictions = Vec::new();
    let mut bundles = Vec::new();
    let mut hashes = Vec::new();
    for (_, r) in results.into_inner().unwrap() {
        let (b, p) = r?;
        hashes.push(b.hash()?);
        bundles.push(b);
        predictions.extend(p);
    }
    let names = opts.models.iter().map(|m| m.name().to_string()).collect();
    let mut report = EvaluationReport::from_predictions(opts.mode, opts.variant, names, predictions);
    report.bundle_hashes = hashes;
    report.bundles = bundles;
    Ok(report)
}
