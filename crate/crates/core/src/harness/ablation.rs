use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::METRICS;
use super::pipeline::{run_nested_tscv, EvaluationReport, ModelKind, Prepared, RunOptions};
use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Base,
    NoTweet,
    NoIncident,
    NoWeather,
    NoCluster,
    Before3am,
    BeforeMidnight,
}

impl Variant {
    pub const ABLATIONS: [Variant; 6] =
        [Variant::NoTweet, Variant::NoIncident, Variant::NoWeather, Variant::NoCluster, Variant::Before3am, Variant::BeforeMidnight];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "BASE",
            Variant::NoTweet => "NO_TWEET",
            Variant::NoIncident => "NO_INCIDENT",
            Variant::NoWeather => "NO_WEATHER",
            Variant::NoCluster => "NO_CLUSTER",
            Variant::Before3am => "BEFORE_3AM",
            Variant::BeforeMidnight => "BEFORE_MIDNIGHT",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase().replace('-', "_");
        std::iter::once(Variant::Base)
            .chain(Variant::ABLATIONS)
            .find(|v| v.name() == up)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Column masks and information cutoff derived from a variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub variant: Variant,
    /// Hour of the prediction day from which tweet and weather columns are
    /// unavailable; `None` keeps them all.
    pub cutoff_hour: Option<u32>,
}

impl AblationSpec {
    /// `cutoff_hour` is the evaluation-mode cutoff, `None` in interpretation mode.
    pub fn new(variant: Variant, cutoff_hour: Option<u32>) -> Self {
        let cutoff_hour = match variant {
            Variant::Before3am => Some(cutoff_hour.map_or(3, |c| c.min(3))),
            Variant::BeforeMidnight => Some(0),
            _ => cutoff_hour,
        };
        AblationSpec { variant, cutoff_hour }
    }

    fn dropped_group(&self) -> Option<FeatureGroup> {
        match self.variant {
            Variant::NoTweet => Some(FeatureGroup::Tweet),
            Variant::NoIncident => Some(FeatureGroup::Incident),
            Variant::NoWeather => Some(FeatureGroup::Weather),
            _ => None,
        }
    }

    pub fn uses_cluster(&self) -> bool {
        self.variant != Variant::NoCluster
    }

    /// Indices of the schema columns kept by this variant. Incident columns
    /// are never subject to the time cutoff.
    pub fn keep(&self, schema: &FeatureSchema) -> Vec<usize> {
        schema
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                if Some(c.group) == self.dropped_group() || (c.group == FeatureGroup::Cluster && !self.uses_cluster()) {
                    return false;
                }
                match (c.group, c.hour_offset, self.cutoff_hour) {
                    (FeatureGroup::Tweet | FeatureGroup::Weather, Some(off), Some(cut)) => off < cut as i64,
                    _ => true,
                }
            })
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn select(v: &[f64], keep: &[usize]) -> Vec<f64> {
    keep.iter().map(|i| v[*i]).collect()
}

/// Relative change `(variant - base) / base`; `None` when either side is
/// undefined or the base is zero.
pub fn relative_delta(base: Option<f64>, variant: Option<f64>) -> Option<f64> {
    match (base, variant) {
        (Some(b), Some(v)) if b != 0.0 => Some((v - b) / b),
        (Some(b), Some(v)) if b == 0.0 && v == 0.0 => Some(0.0),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub variant: Variant,
    pub model: String,
    pub metric: String,
    pub base: Option<f64>,
    pub value: Option<f64>,
    pub delta: Option<f64>,
}

/// Aggregate-metric deltas of `other` against `base` for the models both report.
pub fn paired_deltas(base: &EvaluationReport, other: &EvaluationReport) -> Vec<DeltaRow> {
    let mut out = Vec::new();
    for m in other.models.iter().filter(|m| base.models.contains(m)) {
        for k in METRICS {
            let (b, v) = (base.aggregate(m, k).value, other.aggregate(m, k).value);
            out.push(DeltaRow { variant: other.variant, model: m.clone(), metric: k.to_string(), base: b, value: v, delta: relative_delta(b, v) });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub report: EvaluationReport,
    pub deltas: Vec<DeltaRow>,
}

/// Reruns the cross-validation of the tweet2traffic heads under `variant`
/// and compares aggregates with `base`.
pub fn run_ablation(prep: &Prepared, base: &EvaluationReport, variant: Variant, opts: &RunOptions) -> Result<AblationResult> {
    let models: Vec<ModelKind> = opts.models.iter().copied().filter(|m| m.head().is_some()).collect();
    if models.is_empty() {
        return Err(Error::InvalidConfig("ablation needs at least one tweet2traffic head".into()));
    }
    let run = RunOptions { variant, models, ..opts.clone() };
    let report = run_nested_tscv(prep, &run)?;
    let deltas = paired_deltas(base, &report);
    Ok(AblationResult { report, deltas })
}
