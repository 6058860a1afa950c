use t2t_core::config::TweetConfig;
use t2t_core::ingest::synthetic::{generate_synthetic, SyntheticConfig};
use t2t_core::ingest::LandUse;
use t2t_core::tweetpipe::{encode_day, NullProvider, TractIndex, TweetCorpus, UserModel, ZoneIndex};

fn bundle() -> t2t_core::ingest::synthetic::SyntheticBundle {
    let cfg = SyntheticConfig { n_days: 60, ..Default::default() };
    generate_synthetic(&cfg, 4).unwrap()
}

#[test]
fn users_bots_and_homes() {
    let b = bundle();
    let cfg = TweetConfig::default();
    let corpus = TweetCorpus::build(&b.dataset, &cfg);
    let end = b.truth.days.last().unwrap().date.and_hms_opt(5, 0, 0).unwrap();
    let users = UserModel::fit(&corpus, end, &b.dataset, &NullProvider, &cfg);

    let bots: Vec<_> = users.profiles.keys().filter(|u| u.starts_with('b')).cloned().collect();
    assert_eq!(bots.len(), 6);
    assert!(bots.iter().all(|u| users.bots.contains(u)));
    assert!(users.bots.iter().all(|u| u.starts_with('b')));
    assert!(users.profiles.values().filter(|p| p.user_id.starts_with('v')).all(|p| !p.is_resident));

    let zones = ZoneIndex::new(&b.dataset.zones);
    let residents = users.profiles.values().filter(|p| p.user_id.starts_with('u') && p.is_resident).count();
    assert!(users.homes.len() as f64 >= 0.8 * residents as f64, "{} homes of {residents}", users.homes.len());
    let in_res = users.homes.values().filter(|h| zones.land_use(h) == Some(LandUse::Residence)).count();
    assert!(in_res as f64 >= 0.95 * users.homes.len() as f64, "{in_res} of {}", users.homes.len());
}

#[test]
fn agency_tweets_recover_injected_incidents() {
    let b = bundle();
    let corpus = TweetCorpus::build(&b.dataset, &TweetConfig::default());
    let injected: Vec<_> = b.truth.incidents.iter().filter(|i| i.tweet_only).collect();
    assert!(!injected.is_empty());
    assert_eq!(corpus.agency_incidents.len(), injected.len());
    for inc in injected {
        let hit = corpus.agency_incidents.iter().find(|r| r.road_id == inc.road_id && r.closure_start == inc.start);
        let r = hit.unwrap_or_else(|| panic!("missing {}", inc.incident_id));
        assert_eq!(r.closure_end, inc.end);
        assert_eq!(r.closure_type, inc.closure_type);
    }
}

#[test]
fn day_features_are_normalized() {
    let b = bundle();
    let cfg = TweetConfig::default();
    let corpus = TweetCorpus::build(&b.dataset, &cfg);
    let end = b.truth.days[30].date.and_hms_opt(5, 0, 0).unwrap();
    let users = UserModel::fit(&corpus, end, &b.dataset, &NullProvider, &cfg);
    let tracts = TractIndex::new(&b.dataset.tracts);
    for d in &b.truth.days[31..40] {
        let f = encode_day(d.date, &corpus, &users, &tracts, &cfg);
        assert!((f.sleep_hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((f.wake_hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(f.neutral_pct.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(f.period_counts.iter().sum::<f64>() > 0.0);
    }
}
