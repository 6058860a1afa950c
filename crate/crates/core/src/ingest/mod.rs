//! Canonical data model, file loaders and the synthetic dataset generator.

pub mod io;
pub mod synthetic;
mod types;

use std::path::Path;
use std::str::FromStr;

pub use types::*;

use crate::error::{Error, Result};

/// File kinds understood by [`load_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Speed,
    Incidents,
    Weather,
    Tweets,
    Tracts,
    Zones,
    Calendar,
    Segments,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 8] = [
        DatasetKind::Segments,
        DatasetKind::Speed,
        DatasetKind::Incidents,
        DatasetKind::Weather,
        DatasetKind::Tweets,
        DatasetKind::Tracts,
        DatasetKind::Zones,
        DatasetKind::Calendar,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            DatasetKind::Speed => "speed.csv",
            DatasetKind::Incidents => "incidents.csv",
            DatasetKind::Weather => "weather.csv",
            DatasetKind::Tweets => "tweets.csv",
            DatasetKind::Tracts => "tracts.geojson",
            DatasetKind::Zones => "zones.geojson",
            DatasetKind::Calendar => "calendar.csv",
            DatasetKind::Segments => "segments.csv",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "speed" => DatasetKind::Speed,
            "incidents" => DatasetKind::Incidents,
            "weather" => DatasetKind::Weather,
            "tweets" => DatasetKind::Tweets,
            "tracts" => DatasetKind::Tracts,
            "zones" => DatasetKind::Zones,
            "calendar" => DatasetKind::Calendar,
            "segments" => DatasetKind::Segments,
            other => return Err(Error::InvalidConfig(format!("unknown dataset kind '{other}'"))),
        })
    }
}

/// A typed record collection returned by [`load_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Speed(Vec<SpeedRecord>),
    Incidents(Vec<IncidentRecord>),
    Weather(Vec<WeatherRecord>),
    Tweets(Vec<Tweet>),
    Tracts(Vec<TractPolygon>),
    Zones(Vec<ZonePolygon>),
    Calendar(Vec<CalendarInfo>),
    Segments(Vec<SegmentDescriptor>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Speed(v) => v.len(),
            Records::Incidents(v) => v.len(),
            Records::Weather(v) => v.len(),
            Records::Tweets(v) => v.len(),
            Records::Tracts(v) => v.len(),
            Records::Zones(v) => v.len(),
            Records::Calendar(v) => v.len(),
            Records::Segments(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Load and validate one file.
pub fn load_dataset(kind: DatasetKind, path: &Path) -> Result<Records> {
    let f = io::open_file(path)?;
    let r = std::io::BufReader::new(f);
    Ok(match kind {
        DatasetKind::Speed => Records::Speed(io::read_speeds(r)?),
        DatasetKind::Incidents => Records::Incidents(io::read_incidents(r)?),
        DatasetKind::Weather => Records::Weather(io::read_weather(r)?),
        DatasetKind::Tweets => Records::Tweets(io::read_tweets(r)?),
        DatasetKind::Tracts => Records::Tracts(io::read_tracts(r)?),
        DatasetKind::Zones => Records::Zones(io::read_zones(r)?),
        DatasetKind::Calendar => Records::Calendar(io::read_calendar(r)?),
        DatasetKind::Segments => Records::Segments(io::read_segments(r)?),
    })
}

pub const SLANG_FILE: &str = "slang.txt";
pub const RESIDENT_FILE: &str = "resident_lexicon.txt";
pub const WORDLIST_FILE: &str = "wordlist.txt";
pub const VALENCE_FILE: &str = "valence.txt";
pub const SENTIMENT_FILE: &str = "sentiment_scores.csv";

impl Dataset {
    /// Load every file of a dataset directory. Lexicon files are optional and
    /// fall back to the built-in defaults.
    pub fn load_dir(dir: &Path) -> Result<Dataset> {
        let mut ds = Dataset::default();
        for kind in DatasetKind::ALL {
            let path = dir.join(kind.file_name());
            match load_dataset(kind, &path)? {
                Records::Speed(v) => ds.speeds = v,
                Records::Incidents(v) => ds.incidents = v,
                Records::Weather(v) => ds.weather = v,
                Records::Tweets(v) => ds.tweets = v,
                Records::Tracts(v) => ds.tracts = v,
                Records::Zones(v) => ds.zones = v,
                Records::Calendar(v) => ds.calendar = v,
                Records::Segments(v) => ds.segments = v,
            }
        }
        ds.lexicons = Lexicons::load_dir(dir)?;
        Ok(ds)
    }

    /// Write the dataset in the canonical file layout.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let create = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
            Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
        };
        io::write_segments(create(DatasetKind::Segments.file_name())?, &self.segments)?;
        io::write_speeds(create(DatasetKind::Speed.file_name())?, &self.speeds)?;
        io::write_incidents(create(DatasetKind::Incidents.file_name())?, &self.incidents)?;
        io::write_weather(create(DatasetKind::Weather.file_name())?, &self.weather)?;
        io::write_tweets(create(DatasetKind::Tweets.file_name())?, &self.tweets)?;
        io::write_tracts(create(DatasetKind::Tracts.file_name())?, &self.tracts)?;
        io::write_zones(create(DatasetKind::Zones.file_name())?, &self.zones)?;
        io::write_calendar(create(DatasetKind::Calendar.file_name())?, &self.calendar)?;
        self.lexicons.write_dir(dir)
    }
}

impl Lexicons {
    pub fn load_dir(dir: &Path) -> Result<Lexicons> {
        let mut lex = Lexicons::builtin();
        let path = dir.join(SLANG_FILE);
        if path.exists() {
            lex.slang = io::read_pairs(io::open_file(&path)?)?;
        }
        let path = dir.join(RESIDENT_FILE);
        if path.exists() {
            lex.resident = io::read_lines(io::open_file(&path)?)?;
        }
        let path = dir.join(WORDLIST_FILE);
        if path.exists() {
            lex.wordlist = io::read_lines(io::open_file(&path)?)?;
        }
        let path = dir.join(VALENCE_FILE);
        if path.exists() {
            lex.valence = io::read_pairs(io::open_file(&path)?)?
                .into_iter()
                .enumerate()
                .map(|(i, (k, v))| {
                    v.parse::<f64>()
                        .map(|x| (k, x))
                        .map_err(|_| Error::ParseError { row: i + 1, reason: "bad valence".into() })
                })
                .collect::<Result<_>>()?;
        }
        let path = dir.join(SENTIMENT_FILE);
        if path.exists() {
            lex.sentiment_scores = io::read_sentiment_scores(io::open_file(&path)?)?;
        }
        Ok(lex)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut s = String::new();
        for (k, v) in &self.slang {
            let _ = writeln!(s, "{k}\t{v}");
        }
        std::fs::write(dir.join(SLANG_FILE), s)?;
        std::fs::write(dir.join(RESIDENT_FILE), self.resident.join("\n") + "\n")?;
        std::fs::write(dir.join(WORDLIST_FILE), self.wordlist.join("\n") + "\n")?;
        let mut s = String::new();
        for (k, v) in &self.valence {
            let _ = writeln!(s, "{k}\t{v}");
        }
        std::fs::write(dir.join(VALENCE_FILE), s)?;
        if !self.sentiment_scores.is_empty() {
            let mut s = String::from("tweet_id,p\n");
            for (k, v) in &self.sentiment_scores {
                let _ = writeln!(s, "{k},{v}");
            }
            std::fs::write(dir.join(SENTIMENT_FILE), s)?;
        }
        Ok(())
    }

    /// Small built-in resources so the pipeline runs without lexicon files.
    pub fn builtin() -> Lexicons {
        let pairs = |v: &[(&str, &str)]| v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let words = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Lexicons {
            slang: pairs(&[
                ("omg", "oh my god"),
                ("idk", "i do not know"),
                ("brb", "be right back"),
                ("tbh", "to be honest"),
                ("gn", "good night"),
                ("u", "you"),
                ("ur", "your"),
                ("pls", "please"),
                ("thx", "thanks"),
            ]),
            resident: words(&[
                "pittsburgh",
                "pgh",
                "da burgh",
                "the burgh",
                "steel city",
                "yinzer",
                "steelers",
                "steeler",
                "penguins",
                "pens",
                "pirates",
                "re:\\b152\\d\\d\\b",
                "re:\\b412\\b",
                "cmu",
                "carnegie mellon",
                "pitt",
                "chatham",
                "duquesne",
                "moon township",
                "robinson",
                "cranberry",
                "shadyside",
                "oakland",
                "squirrel hill",
                "lawrenceville",
                "south side",
                "bloomfield",
            ]),
            wordlist: words(&[
                "lets", "let", "go", "pens", "pen", "steelers", "pirates", "game", "night", "good",
                "morning", "traffic", "love", "this", "city", "pittsburgh", "happy", "monday",
                "friday", "work", "home", "sleep", "time", "day", "great", "bad", "go", "the",
                "a", "is", "on", "in", "we", "win", "to", "at", "up", "tired", "bed", "coffee",
            ]),
            valence: [
                ("love", 0.9), ("great", 0.8), ("good", 0.6), ("happy", 0.8), ("awesome", 0.9),
                ("win", 0.7), ("best", 0.8), ("fun", 0.7), ("amazing", 0.9), ("nice", 0.5),
                ("beautiful", 0.8), ("excited", 0.8), ("thanks", 0.5), ("laughing", 0.5),
                ("hate", -0.9), ("bad", -0.6), ("worst", -0.9), ("sad", -0.7), ("awful", -0.8),
                ("terrible", -0.9), ("angry", -0.8), ("lost", -0.5), ("tired", -0.4), ("sucks", -0.8),
                ("stuck", -0.5), ("ugh", -0.6), ("annoying", -0.7), ("shit", -0.8), ("late", -0.3),
            ]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
            sentiment_scores: Default::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_file_reported() {
        let err = load_dataset(DatasetKind::Speed, Path::new("/nonexistent/speed.csv")).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }

    #[test]
    fn kind_parse() {
        assert_eq!("tweets".parse::<DatasetKind>().unwrap(), DatasetKind::Tweets);
        assert!("nope".parse::<DatasetKind>().is_err());
    }
}
