use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use t2t_core::features::{FeatureGroup, IncidentImpactFeatures, WeatherScaler};
use t2t_core::harness::{
    emit_bundle, emit_clusters, emit_deltas, emit_descriptive, emit_report, emit_token_frequencies, fit_bundle, paired_deltas, predict_days,
    run_descriptive_analysis, run_nested_tscv, EvaluationReport, Mode, ModelBundle, ModelKind, Prepared, RunOptions, Variant,
};
use t2t_core::ingest::synthetic::{generate_synthetic, SyntheticConfig};
use t2t_core::ingest::{io as tio, Dataset, DatasetKind};
use t2t_core::tweetpipe::{NullProvider, UserModel};
use t2t_core::Config;

#[derive(Parser)]
#[command(name = "t2t", version, about = "Next-morning highway congestion prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset directory in the canonical file layout.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Evaluation,
    Interpretation,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Evaluation => Mode::Evaluation,
            ModeArg::Interpretation => Mode::Interpretation,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with its ground-truth sidecar.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Switch off every behavioural effect.
        #[arg(long)]
        null_effect: bool,
    },
    /// Load and validate a dataset; writes summary.json.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Traffic and tweeting profile clusterings over all days.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// User filtering, home inference, parsed agency incidents and token counts.
    Tweets {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Road-level and incident feature tables for every day.
    Features {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "evaluation")]
        mode: ModeArg,
    },
    /// Fit a model bundle on all days up to --until.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "evaluation")]
        mode: ModeArg,
        #[arg(long, value_delimiter = ',', default_value = "t2t,hm,sar")]
        models: Vec<String>,
        #[arg(long, default_value = "BASE")]
        variant: String,
        /// Last training day (inclusive); defaults to the last day of data.
        #[arg(long)]
        until: Option<NaiveDate>,
    },
    /// Predict days with a fitted bundle.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "t2t,hm,sar")]
        models: Vec<String>,
        /// First day to predict; defaults to the day after the training span.
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Nested time-series cross-validation.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "evaluation")]
        mode: ModeArg,
        #[arg(long, value_delimiter = ',', default_value = "t2t,hm,sar")]
        models: Vec<String>,
    },
    /// Cross-validated ablations against the base feature set.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_value = "no_tweet,no_incident,no_weather,no_cluster,before_3am,before_midnight")]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "t2t")]
        models: Vec<String>,
    },
    /// Association between traffic and tweeting clusters.
    Describe {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Deserialize, Default)]
struct SynthSection {
    #[serde(default)]
    synthetic: SyntheticConfig,
}

fn load_config(common: &Common) -> Result<Config> {
    match &common.config {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn load_synth_config(common: &Common) -> Result<SyntheticConfig> {
    let Some(p) = &common.config else { return Ok(SyntheticConfig::default()) };
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let s: SynthSection = serde_json::from_str(&text).map_err(t2t_core::Error::from)?;
    s.synthetic.validate()?;
    Ok(s.synthetic)
}

fn prepare(common: &Common, data: &DataArgs) -> Result<Prepared> {
    let cfg = load_config(common)?;
    let ds = Dataset::load_dir(&data.data)?;
    Ok(Prepared::new(ds, cfg)?)
}

fn parse_models(names: &[String]) -> Result<Vec<ModelKind>> {
    let mut out = Vec::new();
    for n in names {
        let m: ModelKind = n.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        bail!(t2t_core::Error::InvalidConfig("no models selected".into()));
    }
    Ok(out)
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    std::fs::create_dir_all(dir)?;
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(File::create(dir.join(name))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn users_all_days(prep: &Prepared) -> UserModel {
    let end = (*prep.dates.last().unwrap() + chrono::Duration::days(1)).and_hms_opt(0, 0, 0).unwrap();
    UserModel::fit(&prep.corpus, end, &prep.ds, &NullProvider, &prep.cfg.tweets)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common, null_effect } => {
            load_config(&common)?;
            let mut sc = load_synth_config(&common)?;
            if null_effect {
                sc = sc.null_effect();
            }
            let bundle = generate_synthetic(&sc, common.seed)?;
            bundle.write_dir(&common.out)?;
            log::info!("wrote {} speed records to {}", bundle.dataset.speeds.len(), common.out.display());
        }
        Command::Ingest { common, data } => {
            let prep = prepare(&common, &data)?;
            let ds = &prep.ds;
            let mut counts = BTreeMap::new();
            for kind in DatasetKind::ALL {
                let n = match kind {
                    DatasetKind::Speed => ds.speeds.len(),
                    DatasetKind::Incidents => ds.incidents.len(),
                    DatasetKind::Weather => ds.weather.len(),
                    DatasetKind::Tweets => ds.tweets.len(),
                    DatasetKind::Tracts => ds.tracts.len(),
                    DatasetKind::Zones => ds.zones.len(),
                    DatasetKind::Calendar => ds.calendar.len(),
                    DatasetKind::Segments => ds.segments.len(),
                };
                counts.insert(kind.file_name(), n);
            }
            let roads: BTreeMap<&str, usize> = prep.roads.iter().map(|(r, s)| (r.as_str(), s.len())).collect();
            let summary = serde_json::json!({
                "records": counts,
                "first_day": prep.dates.first(),
                "last_day": prep.dates.last(),
                "days": prep.dates.len(),
                "roads": roads,
                "agency_incidents": prep.corpus.agency_incidents.len(),
            });
            write_json(&common.out, "summary.json", &summary)?;
        }
        Command::Cluster { common, data } => {
            let prep = prepare(&common, &data)?;
            let a = run_descriptive_analysis(&prep, common.seed)?;
            emit_clusters(&a, &common.out)?;
        }
        Command::Describe { common, data } => {
            let prep = prepare(&common, &data)?;
            let a = run_descriptive_analysis(&prep, common.seed)?;
            emit_descriptive(&a, &common.out)?;
            emit_clusters(&a, &common.out)?;
        }
        Command::Tweets { common, data } => {
            let prep = prepare(&common, &data)?;
            let users = users_all_days(&prep);
            let mut w = csv_writer(&common.out, "users.csv")?;
            w.write_record(["user_id", "geocoded_count", "is_resident", "bot", "home_lat", "home_lon", "home_tract"])?;
            for (u, p) in &users.profiles {
                let home = users.homes.get(u);
                w.write_record([
                    u.clone(),
                    p.geocoded_count.to_string(),
                    p.is_resident.to_string(),
                    users.bots.contains(u).to_string(),
                    home.map(|h| h.lat.to_string()).unwrap_or_default(),
                    home.map(|h| h.lon.to_string()).unwrap_or_default(),
                    home.and_then(|h| prep.tracts.geocode(h)).unwrap_or_default().to_string(),
                ])?;
            }
            w.flush()?;
            let f = BufWriter::new(File::create(common.out.join("agency_incidents.csv"))?);
            tio::write_incidents(f, &prep.corpus.agency_incidents)?;
            emit_token_frequencies(&prep, &common.out)?;
            let scaler = WeatherScaler::fit(prep.weather.morning_records(&prep.dates, prep.cfg.features.hour_grid_end));
            let cols: Vec<usize> = (0..prep.road_schema.len()).filter(|i| prep.road_schema.columns[*i].group == FeatureGroup::Tweet).collect();
            let mut w = csv_writer(&common.out, "tweet_features.csv")?;
            let mut header = vec!["date".to_string()];
            header.extend(cols.iter().map(|i| prep.road_schema.columns[*i].name.clone()));
            w.write_record(&header)?;
            for d in &prep.dates {
                let x = prep.road_x(*d, &users, &scaler);
                let mut row = vec![d.to_string()];
                row.extend(cols.iter().map(|i| x[*i].to_string()));
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        Command::Features { common, data, mode } => {
            let prep = prepare(&common, &data)?;
            let users = users_all_days(&prep);
            let hours = prep.cfg.features.hour_grid_end;
            let scaler = WeatherScaler::fit(prep.weather.morning_records(&prep.dates, hours));
            let mut w = csv_writer(&common.out, "road_features.csv")?;
            let mut header = vec!["date".to_string()];
            header.extend(prep.road_schema.names());
            w.write_record(&header)?;
            for d in &prep.dates {
                let mut row = vec![d.to_string()];
                row.extend(prep.road_x(*d, &users, &scaler).iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
            w.flush()?;
            let mut w = csv_writer(&common.out, "incident_features.csv")?;
            let mut header = vec!["segment".to_string(), "date".to_string()];
            header.extend(IncidentImpactFeatures::names(hours as usize));
            w.write_record(&header)?;
            for (_, segs) in &prep.roads {
                for s in segs {
                    for d in &prep.dates {
                        let f = prep.incident_x(s, *d, mode.into());
                        let mut row = vec![s.segment_id.clone(), d.to_string()];
                        row.extend(f.values.iter().map(|v| v.to_string()));
                        w.write_record(&row)?;
                    }
                }
            }
            w.flush()?;
        }
        Command::Train { common, data, mode, models, variant, until } => {
            let prep = prepare(&common, &data)?;
            let opts = RunOptions { mode: mode.into(), variant: variant.parse::<Variant>()?, models: parse_models(&models)?, seed: common.seed };
            let train: Vec<NaiveDate> = prep.dates.iter().copied().filter(|d| until.map_or(true, |u| *d <= u)).collect();
            if train.is_empty() {
                bail!(t2t_core::Error::TooFewDays("no training days before --until".into()));
            }
            let bundle = fit_bundle(&prep, &train, &opts, common.seed)?;
            write_json(&common.out, "bundle.json", &bundle)?;
            std::fs::write(common.out.join("bundle.sha256"), bundle.hash()? + "\n")?;
            emit_bundle(&bundle, &common.out)?;
        }
        Command::Predict { common, data, bundle, models, from, to } => {
            let prep = prepare(&common, &data)?;
            let text = std::fs::read_to_string(&bundle).with_context(|| format!("reading {}", bundle.display()))?;
            let b: ModelBundle = serde_json::from_str(&text).map_err(t2t_core::Error::from)?;
            let models = parse_models(&models)?;
            let after = b.train_dates.last().copied();
            let dates: Vec<NaiveDate> = prep
                .dates
                .iter()
                .copied()
                .filter(|d| match from {
                    Some(f) => *d >= f,
                    None => after.map_or(true, |a| *d > a),
                })
                .filter(|d| to.map_or(true, |t| *d <= t))
                .collect();
            let preds = predict_days(&prep, &b, &dates, &models, 0);
            let names = models.iter().map(|m| m.name().to_string()).collect();
            let report = EvaluationReport::from_predictions(b.mode, b.spec.variant, names, preds);
            emit_report(&[&report], &common.out)?;
        }
        Command::Evaluate { common, data, mode, models } => {
            let prep = prepare(&common, &data)?;
            let opts = RunOptions { mode: mode.into(), variant: Variant::Base, models: parse_models(&models)?, seed: common.seed };
            let report = run_nested_tscv(&prep, &opts)?;
            emit_report(&[&report], &common.out)?;
            write_hashes(&common.out, &[&report])?;
        }
        Command::Ablate { common, data, variants, models } => {
            let prep = prepare(&common, &data)?;
            let variants: Vec<Variant> = variants.iter().map(|v| v.parse()).collect::<t2t_core::Result<_>>()?;
            let opts = RunOptions { mode: Mode::Evaluation, variant: Variant::Base, models: parse_models(&models)?, seed: common.seed };
            if opts.models.iter().all(|m| m.head().is_none()) {
                bail!(t2t_core::Error::InvalidConfig("ablations need at least one tweet2traffic model".into()));
            }
            let base = run_nested_tscv(&prep, &opts)?;
            let mut reports = vec![base];
            let mut deltas = Vec::new();
            for v in variants.into_iter().filter(|v| *v != Variant::Base) {
                let r = run_nested_tscv(&prep, &RunOptions { variant: v, ..opts.clone() })?;
                deltas.extend(paired_deltas(&reports[0], &r));
                reports.push(r);
            }
            let refs: Vec<&EvaluationReport> = reports.iter().collect();
            emit_report(&refs, &common.out)?;
            emit_deltas(&deltas, &common.out)?;
            write_hashes(&common.out, &refs)?;
        }
    }
    Ok(())
}

fn write_hashes(dir: &Path, reports: &[&EvaluationReport]) -> Result<()> {
    let mut w = csv_writer(dir, "bundle_hashes.csv")?;
    w.write_record(["variant", "split", "sha256"])?;
    for r in reports {
        for (k, h) in r.bundle_hashes.iter().enumerate() {
            w.write_record([r.variant.name(), &k.to_string(), h])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| c.downcast_ref::<t2t_core::Error>().is_some_and(|x| x.is_validation()));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
