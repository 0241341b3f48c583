//! GBFS ingestion: system catalogs, auto-discovery, feed parsing and
//! harvesting live feeds into canonical [`BikeObservation`]s.
//!
//! The parsers are tolerant of the deviations commonly seen in published
//! feeds:
//!
//! * `feeds` listed directly under `data` instead of under a language key,
//! * coordinates (and ids, capacities) given as JSON strings,
//! * missing `is_reserved` / `is_disabled` flags, which default to `false`.
//!
//! Entries that cannot be placed on the map (missing or out-of-range
//! coordinates) are dropped and counted in [`ParseDiagnostics`] instead of
//! failing the whole document.

mod catalog;
mod feeds;
mod harvest;
mod transport;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

pub use catalog::{fetch_system_catalog, parse_system_catalog};
pub use feeds::{
    discover_feeds, normalize_free_bike_status, normalize_station_information,
    parse_discovery, parse_free_bike_status, parse_station_information, parse_station_status,
};
pub use harvest::{
    harvest, observations_from_parts, Clock, DockedCountMode, FixedClock, HarvestOptions,
    HarvestReport, SystemClock, SystemFailure,
};
pub use transport::{resolve_source, HttpTransport, StaticTransport, Transport, TransportError};

/// Well-known feed names consumed by the harvester.
pub const STATION_INFORMATION: &str = "station_information";
pub const STATION_STATUS: &str = "station_status";
pub const FREE_BIKE_STATUS: &str = "free_bike_status";

#[derive(Debug, Error)]
pub enum GbfsError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

pub type Result<T, E = GbfsError> = std::result::Result<T, E>;

/// One row of a system catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemEntry {
    pub system_id: String,
    pub name: String,
    pub country_code: String,
    pub discovery_url: Url,
}

/// The feeds advertised by a system's `gbfs.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedManifest {
    pub system_id: String,
    /// Feed name to URL, including names this crate does not consume.
    pub feeds: std::collections::BTreeMap<String, Url>,
    /// `None` when the document had no language layer.
    pub language: Option<String>,
    pub last_updated: i64,
    pub ttl: u64,
}

impl FeedManifest {
    pub fn feed(&self, name: &str) -> Option<&Url> {
        self.feeds.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub system_id: String,
    pub station_id: String,
    pub name: Option<String>,
    pub lat: f64,
    pub lon: f64,
    pub capacity: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeBike {
    pub system_id: String,
    pub bike_id: String,
    pub lat: f64,
    pub lon: f64,
    pub is_reserved: bool,
    pub is_disabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DockingType {
    Docked,
    Free,
}

impl DockingType {
    pub fn as_str(self) -> &'static str {
        match self {
            DockingType::Docked => "docked",
            DockingType::Free => "free",
        }
    }

    /// Model coding: docked = 1, free = 0.
    pub fn indicator(self) -> u8 {
        match self {
            DockingType::Docked => 1,
            DockingType::Free => 0,
        }
    }
}

impl fmt::Display for DockingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DockingType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "docked" => Ok(DockingType::Docked),
            "free" => Ok(DockingType::Free),
            other => Err(format!("unknown docking type {other:?}")),
        }
    }
}

/// One geolocated station or free bike from one system at one time.
///
/// Field order matches the canonical CSV header
/// `system_id,entity_id,lat,lon,docking_type,observed_at`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BikeObservation {
    pub system_id: String,
    pub entity_id: String,
    pub lat: f64,
    pub lon: f64,
    pub docking_type: DockingType,
    pub observed_at: i64,
}

pub const OBSERVATION_HEADER: [&str; 6] = [
    "system_id",
    "entity_id",
    "lat",
    "lon",
    "docking_type",
    "observed_at",
];

/// Entries dropped while parsing a station or bike document.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseDiagnostics {
    pub missing_coordinates: usize,
    pub out_of_bounds: usize,
    pub missing_id: usize,
    pub duplicate_id: usize,
}

impl ParseDiagnostics {
    pub fn dropped(&self) -> usize {
        self.missing_coordinates + self.out_of_bounds + self.missing_id + self.duplicate_id
    }

    pub fn merge(&mut self, other: &ParseDiagnostics) {
        self.missing_coordinates += other.missing_coordinates;
        self.out_of_bounds += other.out_of_bounds;
        self.missing_id += other.missing_id;
        self.duplicate_id += other.duplicate_id;
    }
}

pub fn coordinates_in_bounds(lat: f64, lon: f64) -> bool {
    lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
}

/// Writes observations as canonical CSV.
pub fn write_observations_csv<W: std::io::Write>(
    writer: W,
    observations: &[BikeObservation],
) -> csv::Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(OBSERVATION_HEADER)?;
    for obs in observations {
        wtr.serialize(obs)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads canonical observation CSV, checking the header exactly.
pub fn read_observations_csv<R: std::io::Read>(reader: R) -> Result<Vec<BikeObservation>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| GbfsError::Schema(format!("observation csv: {e}")))?;
    if header.iter().ne(OBSERVATION_HEADER.iter().copied()) {
        return Err(GbfsError::Schema(format!(
            "observation csv header must be {:?}, found {:?}",
            OBSERVATION_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<BikeObservation>().enumerate() {
        let obs = row.map_err(|e| GbfsError::Schema(format!("observation csv row {}: {e}", i + 1)))?;
        if !coordinates_in_bounds(obs.lat, obs.lon) {
            return Err(GbfsError::Schema(format!(
                "observation csv row {}: coordinates out of bounds",
                i + 1
            )));
        }
        out.push(obs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_csv_header_and_spelling() {
        let obs = vec![
            BikeObservation {
                system_id: "pdx".into(),
                entity_id: "s1".into(),
                lat: 45.5,
                lon: -122.6,
                docking_type: DockingType::Docked,
                observed_at: 1_560_000_000,
            },
            BikeObservation {
                system_id: "pdx".into(),
                entity_id: "b1".into(),
                lat: 45.25,
                lon: -122.125,
                docking_type: DockingType::Free,
                observed_at: 1_560_000_000,
            },
        ];
        let mut buf = Vec::new();
        write_observations_csv(&mut buf, &obs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "system_id,entity_id,lat,lon,docking_type,observed_at\n\
             pdx,s1,45.5,-122.6,docked,1560000000\n\
             pdx,b1,45.25,-122.125,free,1560000000\n"
        );
        assert_eq!(read_observations_csv(&buf[..]).unwrap(), obs);
    }

    #[test]
    fn wrong_header_is_schema_error() {
        let err = read_observations_csv(&b"system,entity\n"[..]).unwrap_err();
        assert!(matches!(err, GbfsError::Schema(_)));
    }
}
