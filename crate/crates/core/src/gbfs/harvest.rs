use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use super::feeds::{discover_feeds, parse_free_bike_status, parse_station_information, parse_station_status};
use super::transport::Transport;
use super::{
    BikeObservation, DockingType, FreeBike, GbfsError, ParseDiagnostics, Station, SystemEntry,
    FREE_BIKE_STATUS, STATION_INFORMATION, STATION_STATUS,
};

/// Source of observation timestamps.
pub trait Clock: Send + Sync {
    /// Seconds since the Unix epoch.
    fn now(&self) -> i64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> i64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub i64);

impl Clock for FixedClock {
    fn now(&self) -> i64 {
        self.0
    }
}

/// How docked supply is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DockedCountMode {
    /// One observation per station.
    #[default]
    Stations,
    /// One observation per bike available at a station, from `station_status`.
    /// Falls back to stations when the status feed is missing or fails.
    AvailableBikes,
}

impl FromStr for DockedCountMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "stations" => Ok(DockedCountMode::Stations),
            "available_bikes" | "available-bikes" => Ok(DockedCountMode::AvailableBikes),
            other => Err(format!(
                "unknown docked count mode {other:?} (expected `stations` or `available_bikes`)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HarvestOptions {
    /// Maximum number of systems fetched at once.
    pub concurrency: usize,
    pub docked_mode: DockedCountMode,
}

impl Default for HarvestOptions {
    fn default() -> Self {
        HarvestOptions {
            concurrency: 8,
            docked_mode: DockedCountMode::Stations,
        }
    }
}

/// A feed (or whole system) that could not be harvested.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemFailure {
    pub system_id: String,
    /// `None` when discovery itself failed.
    pub feed: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct HarvestReport {
    pub observations: Vec<BikeObservation>,
    pub failures: Vec<SystemFailure>,
    pub dropped: ParseDiagnostics,
    /// Reserved or disabled free bikes left out of the observations.
    pub excluded_bikes: usize,
    pub systems_attempted: usize,
    pub systems_with_observations: usize,
    /// Systems that produced nothing and reported at least one failure.
    pub systems_failed: usize,
}

impl HarvestReport {
    pub fn all_failed(&self) -> bool {
        self.systems_attempted > 0 && self.systems_failed == self.systems_attempted
    }
}

/// Canonical observations from parsed stations and free bikes. Reserved and
/// disabled bikes are skipped.
pub fn observations_from_parts(
    stations: &[Station],
    bikes: &[FreeBike],
    observed_at: i64,
) -> Vec<BikeObservation> {
    let docked = stations.iter().map(|s| BikeObservation {
        system_id: s.system_id.clone(),
        entity_id: s.station_id.clone(),
        lat: s.lat,
        lon: s.lon,
        docking_type: DockingType::Docked,
        observed_at,
    });
    let free = bikes
        .iter()
        .filter(|b| !b.is_reserved && !b.is_disabled)
        .map(|b| BikeObservation {
            system_id: b.system_id.clone(),
            entity_id: b.bike_id.clone(),
            lat: b.lat,
            lon: b.lon,
            docking_type: DockingType::Free,
            observed_at,
        });
    docked.chain(free).collect()
}

fn weighted_by_availability(
    stations: &[Station],
    available: &BTreeMap<String, u32>,
    observed_at: i64,
) -> Vec<BikeObservation> {
    stations
        .iter()
        .flat_map(|s| {
            let n = available.get(&s.station_id).copied().unwrap_or(0);
            (1..=n).map(move |k| BikeObservation {
                system_id: s.system_id.clone(),
                entity_id: format!("{}#{k}", s.station_id),
                lat: s.lat,
                lon: s.lon,
                docking_type: DockingType::Docked,
                observed_at,
            })
        })
        .collect()
}

#[derive(Default)]
struct SystemHarvest {
    observations: Vec<BikeObservation>,
    failures: Vec<SystemFailure>,
    dropped: ParseDiagnostics,
    excluded: usize,
}

fn harvest_system(
    entry: &SystemEntry,
    transport: &dyn Transport,
    clock: &dyn Clock,
    mode: DockedCountMode,
) -> SystemHarvest {
    let mut out = SystemHarvest::default();
    let fail = |feed: Option<&str>, err: &dyn std::fmt::Display| SystemFailure {
        system_id: entry.system_id.clone(),
        feed: feed.map(str::to_string),
        message: err.to_string(),
    };

    let manifest = match discover_feeds(entry, transport) {
        Ok(m) => m,
        Err(e) => {
            out.failures.push(fail(None, &e));
            return out;
        }
    };
    let station_url = manifest.feed(STATION_INFORMATION);
    let bike_url = manifest.feed(FREE_BIKE_STATUS);
    if station_url.is_none() && bike_url.is_none() {
        out.failures.push(fail(None, &"system advertises neither station_information nor free_bike_status"));
        return out;
    }
    let observed_at = clock.now();

    let fetch = |url: &url::Url| -> Result<Vec<u8>, GbfsError> { Ok(transport.get(url)?) };

    let mut stations = Vec::new();
    if let Some(url) = station_url {
        match fetch(url).and_then(|body| parse_station_information(&body, &entry.system_id)) {
            Ok((s, diag)) => {
                stations = s;
                out.dropped.merge(&diag);
            }
            Err(e) => out.failures.push(fail(Some(STATION_INFORMATION), &e)),
        }
    }

    let mut bikes = Vec::new();
    if let Some(url) = bike_url {
        match fetch(url).and_then(|body| parse_free_bike_status(&body, &entry.system_id)) {
            Ok((b, diag)) => {
                bikes = b;
                out.dropped.merge(&diag);
            }
            Err(e) => out.failures.push(fail(Some(FREE_BIKE_STATUS), &e)),
        }
    }
    out.excluded = bikes.iter().filter(|b| b.is_reserved || b.is_disabled).count();

    let availability = match (mode, stations.is_empty()) {
        (DockedCountMode::AvailableBikes, false) => match manifest.feed(STATION_STATUS) {
            Some(url) => match fetch(url).and_then(|body| parse_station_status(&body)) {
                Ok(counts) => Some(counts),
                Err(e) => {
                    out.failures.push(fail(Some(STATION_STATUS), &e));
                    None
                }
            },
            None => {
                out.failures.push(fail(
                    Some(STATION_STATUS),
                    &"feed not advertised; counting stations instead",
                ));
                None
            }
        },
        _ => None,
    };

    out.observations = match availability {
        Some(counts) => {
            let mut obs = weighted_by_availability(&stations, &counts, observed_at);
            obs.extend(observations_from_parts(&[], &bikes, observed_at));
            obs
        }
        None => observations_from_parts(&stations, &bikes, observed_at),
    };
    out
}

/// Harvests every system, fetching up to `options.concurrency` systems at
/// once. Output is ordered by `system_id` regardless of completion order,
/// and a failing system never aborts the others.
pub fn harvest(
    entries: &[SystemEntry],
    transport: &dyn Transport,
    clock: &dyn Clock,
    options: &HarvestOptions,
) -> HarvestReport {
    let mut sorted: Vec<&SystemEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| a.system_id.cmp(&b.system_id));

    let slots: Vec<Mutex<Option<SystemHarvest>>> = sorted.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.concurrency.clamp(1, sorted.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(entry) = sorted.get(i) else { break };
                let result = harvest_system(entry, transport, clock, options.docked_mode);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });

    let mut report = HarvestReport {
        systems_attempted: sorted.len(),
        ..Default::default()
    };
    for slot in slots {
        let system = slot.into_inner().expect("slot lock").expect("every system harvested");
        if !system.observations.is_empty() {
            report.systems_with_observations += 1;
        } else if !system.failures.is_empty() {
            report.systems_failed += 1;
        }
        report.observations.extend(system.observations);
        report.failures.extend(system.failures);
        report.dropped.merge(&system.dropped);
        report.excluded_bikes += system.excluded;
    }
    report
}
