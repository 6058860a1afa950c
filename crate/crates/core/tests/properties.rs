use chrono::{Datelike, Duration, NaiveDate};
use ndarray::Array2;
use proptest::prelude::*;

use t2t_core::clustering::{chi_squared_cramers_v, kmeans_fit, pca_fit, pca_transform};
use t2t_core::config::CongestionParams;
use t2t_core::congestion::{detect_congested_periods, measurements_from_periods, planning_time_index, CongestionMeasurements, MORNING_SLOTS};
use t2t_core::features::{incident_features, time_features, RoadGeometry};
use t2t_core::geo::{offset_m, LatLon};
use t2t_core::harness::{compute_metrics, hm_predict, weighted_mean, Metric, Outcome};
use t2t_core::ingest::{ClosureType, IncidentRecord, IncidentSource, Lexicons, SegmentDescriptor};
use t2t_core::learn::segment::{clamp_regression, measurements_from};
use t2t_core::learn::{descriptor_targets, fit_l1_logistic, fit_lasso, SolverOptions};
use t2t_core::tweetpipe::TextCleaner;

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

fn morning() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.8f64..4.0, MORNING_SLOTS)
}

fn measure(tti: &[f64], params: &CongestionParams) -> CongestionMeasurements {
    measurements_from_periods(tti, &detect_congested_periods(tti, params))
}

fn matrix(n: usize, p: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * p).prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn congestion_measurements_are_consistent(tti in morning(), t_min in 1u32..6, gap in 1u32..6) {
        let params = CongestionParams { t_min: 5 * t_min, merge_gap: 5 * gap, ..CongestionParams::default() };
        let m = measure(&tti, &params);
        prop_assert!(m.cst as usize <= MORNING_SLOTS);
        prop_assert!(m.is_consistent(params.min_run_slots() as u32));
    }

    #[test]
    fn raising_threshold_never_lengthens(tti in morning(), lo in 1.2f64..2.5, bump in 0.0f64..1.0) {
        let a = measure(&tti, &CongestionParams { tti_thres: lo, ..CongestionParams::default() });
        let b = measure(&tti, &CongestionParams { tti_thres: lo + bump, ..CongestionParams::default() });
        prop_assert!(b.cst <= a.cst);
        prop_assert!(b.cd.unwrap_or(0) <= a.cd.unwrap_or(0));
    }

    #[test]
    fn pti_ignores_slot_order(mut tti in morning(), seed in any::<u64>()) {
        let before = planning_time_index(&tti);
        let k = (seed % MORNING_SLOTS as u64) as usize;
        tti.rotate_left(k);
        tti.reverse();
        prop_assert_eq!(before, planning_time_index(&tti));
    }

    #[test]
    fn lasso_satisfies_kkt(x in matrix(30, 6), coef in prop::collection::vec(-2.0f64..2.0, 6), frac in 0.01f64..0.9) {
        let y: Vec<f64> = (0..30).map(|i| (0..6).map(|j| x[[i, j]] * coef[j]).sum::<f64>() + 0.1 * (i as f64).sin()).collect();
        let ybar = y.iter().sum::<f64>() / 30.0;
        let lmax = (0..6).map(|j| 2.0 * (0..30).map(|i| x[[i, j]] * (y[i] - ybar)).sum::<f64>().abs()).fold(0.0, f64::max);
        let alpha = frac * lmax.max(1e-3);
        let opts = SolverOptions { standardize: false, ..SolverOptions::lasso() };
        let (m, _) = fit_lasso(x.view(), &y, &names(6), alpha, &opts).unwrap();
        for j in 0..6 {
            let g: f64 = 2.0 * (0..30).map(|i| x[[i, j]] * (y[i] - m.bias - (0..6).map(|k| x[[i, k]] * m.weights[k]).sum::<f64>())).sum::<f64>();
            if m.weights[j] == 0.0 {
                prop_assert!(g.abs() <= alpha + 1e-6);
            } else {
                prop_assert!((g - alpha * m.weights[j].signum()).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn logistic_objective_never_increases(x in matrix(40, 5), flips in prop::collection::vec(any::<bool>(), 40), lambda in 0.01f64..3.0) {
        let y: Vec<f64> = (0..40).map(|i| ((x[[i, 0]] > 0.0) ^ flips[i]) as u8 as f64).collect();
        let (_, trace) = fit_l1_logistic(x.view(), &y, &names(5), lambda, &SolverOptions::logistic()).unwrap();
        prop_assert!(trace.objective.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn descriptor_targets_are_nonincreasing(levels in 2usize..8, c in 0usize..8) {
        let c = c % levels;
        let t = descriptor_targets(c, levels);
        prop_assert_eq!(t.len(), levels - 1);
        prop_assert!(t.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(t.iter().sum::<f64>() as usize, c);
    }

    #[test]
    fn clamped_predictions_are_valid(raw in prop::array::uniform3(-50.0f64..150.0), cs in any::<bool>()) {
        let m = measurements_from(cs, clamp_regression(raw, 3));
        prop_assert!(m.is_consistent(3));
    }

    #[test]
    fn pca_centres_the_training_mean(x in matrix(25, 4)) {
        let p = pca_fit(x.view(), 0.9).unwrap();
        let mean = p.mean.clone().insert_axis(ndarray::Axis(0));
        let z = pca_transform(&p, mean.view());
        prop_assert!(z.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn kmeans_labels_survive_rescaling(x in matrix(30, 3), scale in 0.1f64..20.0) {
        let a = kmeans_fit(x.view(), 3, 5, 4, 100).unwrap();
        let b = kmeans_fit((&x * scale).view(), 3, 5, 4, 100).unwrap();
        // The same seed gives the same restarts, so the partitions coincide.
        prop_assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn cramers_v_is_bounded(a in prop::collection::vec(0usize..3, 20..80), seed in 0usize..3) {
        let b: Vec<usize> = a.iter().enumerate().map(|(i, v)| (v + seed * i) % 4).collect();
        for bias in [false, true] {
            if let Ok(r) = chi_squared_cramers_v(&a, &b, bias) {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&r.v));
            }
        }
        let distinct = a.iter().collect::<std::collections::BTreeSet<_>>().len();
        if distinct >= 2 {
            let r = chi_squared_cramers_v(&a, &a, false).unwrap();
            prop_assert!((r.v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cleaning_is_idempotent(s in "[A-Za-z #@!?.,'()0-9]{0,40}") {
        let c = TextCleaner::new(&Lexicons::builtin());
        let once = c.clean(&s);
        prop_assert_eq!(c.clean(&once), once);
    }

    #[test]
    fn incident_features_shrink_with_threshold(mp in 0.0f64..4.0, seg in 0usize..4, d in 0.5f64..8.0, shrink in 0.1f64..1.0, full in any::<bool>()) {
        let segs = road();
        let geo = RoadGeometry::new(&segs);
        let inc = IncidentRecord {
            incident_id: "i".into(),
            source: IncidentSource::Rcrs,
            road_id: "R".into(),
            closure_start: "2014-02-03T04:10:00".parse().unwrap(),
            closure_end: "2014-02-03T07:30:00".parse().unwrap(),
            start: geo.geocoder.point_at("R", mp).unwrap(),
            end: geo.geocoder.point_at("R", mp).unwrap(),
            closure_type: if full { ClosureType::Full } else { ClosureType::Partial },
            category: "crash".into(),
        };
        let date = NaiveDate::from_ymd_opt(2014, 2, 3).unwrap();
        let wide = incident_features(&[&inc], &segs[seg], date, &geo, d, 11);
        let narrow = incident_features(&[&inc], &segs[seg], date, &geo, d * shrink, 11);
        prop_assert!(wide.values.iter().zip(&narrow.values).all(|(w, n)| n <= w && (0.0..=1.0).contains(w)));
        prop_assert!(incident_features(&[], &segs[seg], date, &geo, d, 11).values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn weighted_aggregate_matches_pooled_mean(splits in prop::collection::vec((0.0f64..1.0, 1usize..500), 1..12)) {
        let metrics: Vec<Metric> = splits.iter().map(|(v, n)| Metric { value: Some(*v), n: *n }).collect();
        let total: usize = splits.iter().map(|s| s.1).sum();
        let want = splits.iter().map(|(v, n)| v * *n as f64).sum::<f64>() / total as f64;
        let got = weighted_mean(&metrics);
        prop_assert_eq!(got.n, total);
        prop_assert!((got.value.unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn metrics_ignore_outcome_order(raw in prop::collection::vec((any::<bool>(), any::<bool>(), 1.0f64..72.0, 1.0f64..72.0), 1..60), seed in any::<u64>()) {
        let mut outcomes: Vec<Outcome> = raw
            .iter()
            .map(|(t, p, a, b)| Outcome { truth_cs: *t, pred_cs: *p, truth_reg: t.then_some([*a, *b, 1.5]), pred_reg: [*b, *a, 1.0] })
            .collect();
        let before = compute_metrics(&outcomes);
        let k = (seed % outcomes.len() as u64) as usize;
        outcomes.rotate_left(k);
        outcomes.reverse();
        let after = compute_metrics(&outcomes);
        for ((_, a), (_, b)) in before.values().iter().zip(after.values().iter()) {
            prop_assert_eq!(a.n, b.n);
            match (a.value, b.value) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }

    #[test]
    fn hm_unbounded_window_is_same_weekday_mean(days in prop::collection::vec((any::<bool>(), 4u32..72, 3u32..4), 15..60)) {
        let start = NaiveDate::from_ymd_opt(2014, 1, 6).unwrap();
        let history: Vec<(NaiveDate, CongestionMeasurements)> = days
            .iter()
            .enumerate()
            .map(|(i, (cs, cst, cd))| {
                let m = if *cs { CongestionMeasurements { cs: true, cst: *cst, cd: Some(*cd), pti: Some(2.0) } } else { CongestionMeasurements::uncongested() };
                (start + Duration::days(i as i64), m)
            })
            .collect();
        let target = start + Duration::days(days.len() as i64);
        let same: Vec<&CongestionMeasurements> = history.iter().filter(|(d, _)| d.weekday() == target.weekday()).map(|(_, m)| m).collect();
        let pos: Vec<&&CongestionMeasurements> = same.iter().filter(|m| m.cs).collect();
        let p = hm_predict(&history, target, None, 3);
        prop_assert_eq!(p.cs, 2 * pos.len() >= same.len());
        if !pos.is_empty() {
            let mean = pos.iter().map(|m| m.cst as f64).sum::<f64>() / pos.len() as f64;
            prop_assert!((p.regression[0] - mean.clamp(3.0, 72.0)).abs() < 1e-9);
        }
    }
}

#[test]
fn december_sits_next_to_january() {
    let enc = |m: u32| {
        let f = time_features(NaiveDate::from_ymd_opt(2014, m, 15).unwrap(), &|_| false);
        (f.mon_sin, f.mon_cos)
    };
    let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    assert!(dist(enc(12), enc(1)) < dist(enc(6), enc(12)));
}

fn road() -> Vec<SegmentDescriptor> {
    let origin = LatLon::new(40.4, -80.1);
    (0..4)
        .map(|k| SegmentDescriptor {
            segment_id: format!("s{k}"),
            road_id: "R".into(),
            order_on_road: k,
            start_mp: k as f64,
            end_mp: k as f64 + 1.0,
            start: offset_m(&origin, 0.0, 1000.0 * k as f64),
            end: offset_m(&origin, 0.0, 1000.0 * (k + 1) as f64),
        })
        .collect()
}
