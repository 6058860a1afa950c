use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::ablation::DeltaRow;
use super::describe::DescriptiveAnalysis;
use super::metrics::{weighted_mean, METRICS};
use super::pipeline::{EvaluationReport, ModelBundle, Prepared};
use crate::congestion::MORNING_SLOTS;
use crate::error::Result;
use crate::learn::segment::TARGETS;
use crate::learn::LinearModel;
use crate::tweetpipe::TextCleaner;

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    std::fs::create_dir_all(dir)?;
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes metrics.csv (long format), aggregate.csv, segment_summary.csv and
/// predictions.csv for the given reports.
pub fn emit_report(reports: &[&EvaluationReport], out_dir: &Path) -> Result<()> {
    let mut m = writer(out_dir, "metrics.csv")?;
    m.write_record(["model", "variant", "segment", "split", "metric", "value", "n"])?;
    let mut agg = writer(out_dir, "aggregate.csv")?;
    agg.write_record(["model", "variant", "metric", "value", "n"])?;
    let mut summ = writer(out_dir, "segment_summary.csv")?;
    summ.write_record(["model", "variant", "segment", "metric", "value", "n"])?;
    let mut pred = writer(out_dir, "predictions.csv")?;
    pred.write_record([
        "model", "variant", "split", "segment", "date", "truth_cs", "truth_cst", "truth_cd", "truth_pti", "prob", "pred_cs", "pred_cst",
        "pred_cd", "pred_pti", "reg_cst", "reg_cd", "reg_pti",
    ])?;
    for r in reports {
        let v = r.variant.name();
        for row in &r.rows {
            for (k, x) in row.metrics.values() {
                m.write_record([&row.model, v, &row.segment, &row.split.to_string(), k, &opt(x.value), &x.n.to_string()])?;
            }
        }
        for (model, k, x) in r.aggregates() {
            agg.write_record([&model, v, &k, &opt(x.value), &x.n.to_string()])?;
        }
        let mut by_seg: BTreeMap<(usize, &str), Vec<&super::pipeline::SplitMetrics>> = BTreeMap::new();
        for row in &r.rows {
            let mi = r.models.iter().position(|x| *x == row.model).unwrap_or(usize::MAX);
            by_seg.entry((mi, row.segment.as_str())).or_default().push(row);
        }
        for ((_, seg), rows) in by_seg {
            for k in METRICS {
                let x = weighted_mean(rows.iter().filter_map(|r| r.metrics.get(k)).collect::<Vec<_>>().iter());
                summ.write_record([&rows[0].model, v, seg, k, &opt(x.value), &x.n.to_string()])?;
            }
        }
        for p in &r.predictions {
            let t = p.truth;
            pred.write_record([
                p.model.clone(),
                v.to_string(),
                p.split.to_string(),
                p.segment.clone(),
                p.date.to_string(),
                t.map(|t| (t.cs as u8).to_string()).unwrap_or_default(),
                t.map(|t| t.cst.to_string()).unwrap_or_default(),
                t.and_then(|t| t.cd).map(|x| x.to_string()).unwrap_or_default(),
                opt(t.and_then(|t| t.pti)),
                p.prob.to_string(),
                (p.pred.cs as u8).to_string(),
                p.pred.cst.to_string(),
                p.pred.cd.map(|x| x.to_string()).unwrap_or_default(),
                opt(p.pred.pti),
                p.regression[0].to_string(),
                p.regression[1].to_string(),
                p.regression[2].to_string(),
            ])?;
        }
    }
    m.flush()?;
    agg.flush()?;
    summ.flush()?;
    pred.flush()?;
    Ok(())
}

pub fn emit_deltas(rows: &[DeltaRow], out_dir: &Path) -> Result<()> {
    let mut w = writer(out_dir, "ablation_deltas.csv")?;
    w.write_record(["variant", "model", "metric", "base", "value", "delta"])?;
    for r in rows {
        w.write_record([r.variant.name(), &r.model, &r.metric, &opt(r.base), &opt(r.value), &opt(r.delta)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_centroids(w: &mut csv::Writer<BufWriter<File>>, road: &str, c: &ndarray::Array2<f64>) -> Result<()> {
    for (ci, row) in c.rows().into_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            w.write_record([road, &ci.to_string(), &(j / MORNING_SLOTS).to_string(), &(j % MORNING_SLOTS).to_string(), &v.to_string()])?;
        }
    }
    Ok(())
}

fn write_model(w: &mut csv::Writer<BufWriter<File>>, road: &str, segment: &str, target: &str, m: &LinearModel) -> Result<()> {
    w.write_record([road, segment, target, "(bias)", &m.bias.to_string()])?;
    for (n, x) in m.names.iter().zip(&m.weights) {
        if *x != 0.0 {
            w.write_record([road, segment, target, n, &x.to_string()])?;
        }
    }
    Ok(())
}

/// Nonzero weights of every linear model in a bundle, plus clustering curves
/// and centroid profiles for plotting.
pub fn emit_bundle(bundle: &ModelBundle, out_dir: &Path) -> Result<()> {
    let mut w = writer(out_dir, "coefficients.csv")?;
    w.write_record(["road", "segment", "target", "feature", "weight"])?;
    let mut curves = writer(out_dir, "traffic_elbow.csv")?;
    curves.write_record(["road", "k", "inertia"])?;
    let mut cents = writer(out_dir, "traffic_centroids.csv")?;
    cents.write_record(["road", "cluster", "segment_index", "slot", "tti"])?;
    for r in &bundle.roads {
        for (k, i) in &r.curve {
            curves.write_record([&r.road_id, &k.to_string(), &i.to_string()])?;
        }
        if let Some(c) = &r.centroid_profiles {
            write_centroids(&mut cents, &r.road_id, c)?;
        }
        let Some(rm) = &r.model else { continue };
        if let Some(d) = &rm.descriptor {
            for (l, m) in d.classifiers.iter().enumerate() {
                write_model(&mut w, &r.road_id, "", &format!("c_gt_{l}"), m)?;
            }
        }
        for s in &rm.segments {
            write_model(&mut w, &r.road_id, &s.segment_id, "cs", &s.classifier)?;
            if let Some(regs) = &s.regressors {
                for (t, m) in TARGETS.iter().zip(regs) {
                    write_model(&mut w, &r.road_id, &s.segment_id, t, m)?;
                }
            }
        }
    }
    w.flush()?;
    curves.flush()?;
    cents.flush()?;
    Ok(())
}

/// Association statistics and conditional distributions.
pub fn emit_descriptive(a: &DescriptiveAnalysis, out_dir: &Path) -> Result<()> {
    let mut s = writer(out_dir, "association.csv")?;
    s.write_record(["road", "traffic_k", "tweet_k", "n", "chi2", "dof", "p_value", "cramers_v", "bias_corrected"])?;
    let mut c = writer(out_dir, "conditional.csv")?;
    c.write_record(["road", "tweet_cluster", "traffic_cluster", "count", "probability"])?;
    for r in &a.roads {
        let x = &r.association;
        s.write_record([
            &r.road_id,
            &r.traffic_k.to_string(),
            &r.tweet_k.to_string(),
            &x.n.to_string(),
            &x.chi2.to_string(),
            &x.dof.to_string(),
            &x.p_value.to_string(),
            &x.v.to_string(),
            &x.bias_corrected.to_string(),
        ])?;
        for (i, tl) in x.row_labels.iter().enumerate() {
            for (j, wl) in x.col_labels.iter().enumerate() {
                c.write_record([&r.road_id, &wl.to_string(), &tl.to_string(), &x.table[[i, j]].to_string(), &r.conditional[[i, j]].to_string()])?;
            }
        }
    }
    s.flush()?;
    c.flush()?;
    Ok(())
}

/// Day labels, elbow curves and centroid profiles of the traffic and
/// tweeting clusterings.
pub fn emit_clusters(a: &DescriptiveAnalysis, out_dir: &Path) -> Result<()> {
    let mut labels = writer(out_dir, "traffic_clusters.csv")?;
    labels.write_record(["road", "date", "cluster"])?;
    let mut curves = writer(out_dir, "traffic_elbow.csv")?;
    curves.write_record(["road", "k", "inertia"])?;
    let mut cents = writer(out_dir, "traffic_centroids.csv")?;
    cents.write_record(["road", "cluster", "segment_index", "slot", "tti"])?;
    for r in &a.roads {
        for (d, l) in r.traffic_dates.iter().zip(&r.traffic_labels) {
            labels.write_record([r.road_id.clone(), d.to_string(), l.to_string()])?;
        }
        for (k, i) in &r.traffic_curve {
            curves.write_record([&r.road_id, &k.to_string(), &i.to_string()])?;
        }
        write_centroids(&mut cents, &r.road_id, &r.traffic_centroids)?;
    }
    let mut t = writer(out_dir, "tweet_centroids.csv")?;
    t.write_record(["cluster", "bin", "share"])?;
    for (ci, row) in a.tweet_centroids.rows().into_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t.write_record([ci.to_string(), j.to_string(), v.to_string()])?;
        }
    }
    let mut d = writer(out_dir, "tweet_clusters.csv")?;
    d.write_record(["date", "cluster"])?;
    for (date, l) in a.tweet_dates.iter().zip(&a.tweet_labels) {
        d.write_record([date.to_string(), l.to_string()])?;
    }
    labels.flush()?;
    curves.flush()?;
    cents.flush()?;
    t.flush()?;
    d.flush()?;
    Ok(())
}

/// Token counts of cleaned geocoded tweets per sentiment label.
pub fn emit_token_frequencies(prep: &Prepared, out_dir: &Path) -> Result<()> {
    let cleaner = TextCleaner::new(&prep.ds.lexicons);
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (i, label) in &prep.corpus.labels {
        let text = cleaner.clean(&prep.corpus.tweets[*i].text);
        for tok in text.split_whitespace() {
            let tok: String = tok.chars().filter(|c| c.is_alphanumeric() || *c == '\'').collect::<String>().to_lowercase();
            if !tok.is_empty() {
                *counts.entry((format!("{label:?}").to_lowercase(), tok)).or_default() += 1;
            }
        }
    }
    let mut rows: Vec<_> = counts.into_iter().collect();
    rows.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(b.1.cmp(&a.1)).then(a.0 .1.cmp(&b.0 .1)));
    let mut w = writer(out_dir, "token_frequencies.csv")?;
    w.write_record(["label", "token", "count"])?;
    for ((l, t), n) in rows {
        w.write_record([l, t, n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
