use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::TweetConfig;
use crate::ingest::Lexicons;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SentimentLabel {
    Pos,
    Neu,
    Neg,
}

pub fn label_for(p: f64, cfg: &TweetConfig) -> SentimentLabel {
    if p >= cfg.pos_thres {
        SentimentLabel::Pos
    } else if p <= cfg.neg_thres {
        SentimentLabel::Neg
    } else {
        SentimentLabel::Neu
    }
}

/// Probability that a tweet is positive.
pub trait SentimentProvider {
    fn score(&self, tweet_id: &str, normalized_text: &str) -> std::result::Result<f64, String>;
}

/// Mean token valence in [-1, 1] mapped linearly to [0, 1]; 0.5 when no
/// token is in the lexicon.
#[derive(Debug, Clone, Default)]
pub struct LexiconScorer {
    valence: BTreeMap<String, f64>,
}

impl LexiconScorer {
    pub fn new(lex: &Lexicons) -> Self {
        LexiconScorer { valence: lex.valence.iter().map(|(k, v)| (k.to_lowercase(), v.clamp(-1.0, 1.0))).collect() }
    }
}

impl SentimentProvider for LexiconScorer {
    fn score(&self, _: &str, text: &str) -> std::result::Result<f64, String> {
        let vals: Vec<f64> = text
            .split(|c: char| !(c.is_alphanumeric() || c == '\''))
            .filter_map(|w| self.valence.get(w).copied())
            .collect();
        if vals.is_empty() {
            return Ok(0.5);
        }
        Ok((vals.iter().sum::<f64>() / vals.len() as f64 + 1.0) / 2.0)
    }
}

/// Scores keyed by tweet id, with an optional fallback for unknown ids.
pub struct PrecomputedScores<'a> {
    pub scores: &'a BTreeMap<String, f64>,
    pub fallback: Option<&'a dyn SentimentProvider>,
}

impl SentimentProvider for PrecomputedScores<'_> {
    fn score(&self, tweet_id: &str, text: &str) -> std::result::Result<f64, String> {
        match (self.scores.get(tweet_id), self.fallback) {
            (Some(p), _) => Ok(*p),
            (None, Some(f)) => f.score(tweet_id, text),
            (None, None) => Err(format!("no score for tweet {tweet_id}")),
        }
    }
}

/// Score and label one tweet; provider failures give a neutral 0.5.
pub fn sentiment_label(tweet_id: &str, text: &str, provider: &dyn SentimentProvider, cfg: &TweetConfig) -> (f64, SentimentLabel) {
    let p = match provider.score(tweet_id, text) {
        Ok(p) if p.is_finite() => p.clamp(0.0, 1.0),
        Ok(p) => {
            log::warn!("non-finite sentiment {p} for tweet {tweet_id}");
            0.5
        }
        Err(e) => {
            log::warn!("sentiment provider failed: {e}");
            0.5
        }
    };
    (p, label_for(p, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        let cfg = TweetConfig::default();
        assert_eq!(label_for(0.8, &cfg), SentimentLabel::Pos);
        assert_eq!(label_for(0.7, &cfg), SentimentLabel::Pos);
        assert_eq!(label_for(0.5, &cfg), SentimentLabel::Neu);
        assert_eq!(label_for(0.3, &cfg), SentimentLabel::Neg);
    }

    #[test]
    fn lexicon_scoring() {
        let s = LexiconScorer::new(&Lexicons::builtin());
        assert_eq!(s.score("", "reading a book.").unwrap(), 0.5);
        assert!(s.score("", "love this city.").unwrap() > 0.9);
        assert!(s.score("", "this weather is awful.").unwrap() < 0.2);
    }

    #[test]
    fn precomputed_and_failure() {
        let cfg = TweetConfig::default();
        let scores = BTreeMap::from([("1".to_string(), 0.9)]);
        let p = PrecomputedScores { scores: &scores, fallback: None };
        assert_eq!(sentiment_label("1", "", &p, &cfg), (0.9, SentimentLabel::Pos));
        assert_eq!(sentiment_label("2", "", &p, &cfg), (0.5, SentimentLabel::Neu));
    }
}
