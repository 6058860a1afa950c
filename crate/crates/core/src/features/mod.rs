//! Incident, weather and calendar encoders and the named feature layout.

pub mod assemble;
pub mod incident;
pub mod time;
pub mod weather;

pub use assemble::{road_vector, segment_vector, Column, FeatureGroup, FeatureSchema};
pub use incident::{incident_features, incident_location_impact, incident_time_window, IncidentImpactFeatures, RoadGeometry};
pub use time::{cyclic_encode, time_features, TimeFeatures};
pub use weather::{weather_features, WeatherIndex, WeatherScaler};
