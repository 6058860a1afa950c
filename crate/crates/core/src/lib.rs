//! Next-morning highway congestion prediction from speed, incident, weather
//! and social-media activity data.

pub mod clustering;
pub mod config;
pub mod congestion;
pub mod error;
pub mod features;
pub mod geo;
pub mod harness;
pub mod ingest;
pub mod learn;
pub mod tweetpipe;

pub use config::Config;
pub use error::{Error, Result};
