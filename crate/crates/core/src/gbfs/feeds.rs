use std::collections::{BTreeMap, HashSet};

use serde_json::{json, Map, Value};
use url::Url;

use super::transport::Transport;
use super::{
    coordinates_in_bounds, FeedManifest, FreeBike, GbfsError, ParseDiagnostics, Result, Station,
    SystemEntry,
};

fn parse_json(document: &[u8]) -> Result<Value> {
    serde_json::from_slice(document).map_err(|e| GbfsError::Parse {
        offset: byte_offset(document, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(document: &[u8], line: usize, column: usize) -> usize {
    let line_start: usize = document
        .split_inclusive(|&b| b == b'\n')
        .take(line.saturating_sub(1))
        .map(<[u8]>::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(document.len())
}

fn lenient_f64(value: Option<&Value>) -> Option<f64> {
    match value? {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    }
}

fn lenient_id(value: Option<&Value>) -> Option<String> {
    match value? {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn lenient_bool(value: Option<&Value>) -> bool {
    match value {
        Some(Value::Bool(b)) => *b,
        Some(Value::Number(n)) => n.as_f64().is_some_and(|x| x != 0.0),
        Some(Value::String(s)) => matches!(s.trim().to_ascii_lowercase().as_str(), "true" | "1"),
        _ => false,
    }
}

fn lenient_count(value: Option<&Value>) -> Option<u32> {
    let x = lenient_f64(value)?;
    (x >= 0.0 && x.fract() == 0.0 && x <= f64::from(u32::MAX)).then_some(x as u32)
}

fn data_array<'a>(root: &'a Value, key: &str, feed: &str) -> Result<&'a Vec<Value>> {
    root.get("data")
        .and_then(|d| d.get(key))
        .and_then(Value::as_array)
        .ok_or_else(|| GbfsError::Schema(format!("{feed} document has no data.{key} array")))
}

/// Shared drop rules: id present and unique, coordinates present and on the globe.
fn locate(
    entry: &Value,
    id_key: &str,
    seen: &mut HashSet<String>,
    diag: &mut ParseDiagnostics,
) -> Option<(String, f64, f64)> {
    let Some(id) = lenient_id(entry.get(id_key)) else {
        diag.missing_id += 1;
        return None;
    };
    let (Some(lat), Some(lon)) = (lenient_f64(entry.get("lat")), lenient_f64(entry.get("lon"))) else {
        diag.missing_coordinates += 1;
        return None;
    };
    if !coordinates_in_bounds(lat, lon) {
        diag.out_of_bounds += 1;
        return None;
    }
    if !seen.insert(id.clone()) {
        diag.duplicate_id += 1;
        return None;
    }
    Some((id, lat, lon))
}

/// Parses a `station_information` payload.
pub fn parse_station_information(
    document: &[u8],
    system_id: &str,
) -> Result<(Vec<Station>, ParseDiagnostics)> {
    let root = parse_json(document)?;
    let entries = data_array(&root, "stations", "station_information")?;
    let mut diag = ParseDiagnostics::default();
    let mut seen = HashSet::new();
    let stations = entries
        .iter()
        .filter_map(|entry| {
            let (station_id, lat, lon) = locate(entry, "station_id", &mut seen, &mut diag)?;
            Some(Station {
                system_id: system_id.to_string(),
                station_id,
                name: entry.get("name").and_then(Value::as_str).map(str::to_string),
                lat,
                lon,
                capacity: lenient_count(entry.get("capacity")),
            })
        })
        .collect();
    Ok((stations, diag))
}

/// Parses a `free_bike_status` payload. Reserved and disabled bikes are
/// returned; filtering them is the harvester's job.
pub fn parse_free_bike_status(
    document: &[u8],
    system_id: &str,
) -> Result<(Vec<FreeBike>, ParseDiagnostics)> {
    let root = parse_json(document)?;
    let entries = data_array(&root, "bikes", "free_bike_status")?;
    let mut diag = ParseDiagnostics::default();
    let mut seen = HashSet::new();
    let bikes = entries
        .iter()
        .filter_map(|entry| {
            let (bike_id, lat, lon) = locate(entry, "bike_id", &mut seen, &mut diag)?;
            Some(FreeBike {
                system_id: system_id.to_string(),
                bike_id,
                lat,
                lon,
                is_reserved: lenient_bool(entry.get("is_reserved")),
                is_disabled: lenient_bool(entry.get("is_disabled")),
            })
        })
        .collect();
    Ok((bikes, diag))
}

/// Parses `station_status` into station id → `num_bikes_available`.
/// Entries without a usable count are skipped.
pub fn parse_station_status(document: &[u8]) -> Result<BTreeMap<String, u32>> {
    let root = parse_json(document)?;
    let entries = data_array(&root, "stations", "station_status")?;
    Ok(entries
        .iter()
        .filter_map(|e| {
            Some((
                lenient_id(e.get("station_id"))?,
                lenient_count(e.get("num_bikes_available"))?,
            ))
        })
        .collect())
}

/// Re-serializes a `station_information` document in canonical form:
/// string ids, numeric coordinates, only well-formed entries.
pub fn normalize_station_information(document: &[u8], system_id: &str) -> Result<Vec<u8>> {
    let (stations, _) = parse_station_information(document, system_id)?;
    let stations: Vec<Value> = stations
        .iter()
        .map(|s| {
            let mut m = Map::new();
            m.insert("station_id".into(), json!(s.station_id));
            if let Some(name) = &s.name {
                m.insert("name".into(), json!(name));
            }
            m.insert("lat".into(), json!(s.lat));
            m.insert("lon".into(), json!(s.lon));
            if let Some(cap) = s.capacity {
                m.insert("capacity".into(), json!(cap));
            }
            Value::Object(m)
        })
        .collect();
    Ok(serde_json::to_vec(&json!({ "data": { "stations": stations } })).expect("serializable"))
}

/// Re-serializes a `free_bike_status` document in canonical form with
/// explicit boolean flags.
pub fn normalize_free_bike_status(document: &[u8], system_id: &str) -> Result<Vec<u8>> {
    let (bikes, _) = parse_free_bike_status(document, system_id)?;
    let bikes: Vec<Value> = bikes
        .iter()
        .map(|b| {
            json!({
                "bike_id": b.bike_id,
                "lat": b.lat,
                "lon": b.lon,
                "is_reserved": b.is_reserved,
                "is_disabled": b.is_disabled,
            })
        })
        .collect();
    Ok(serde_json::to_vec(&json!({ "data": { "bikes": bikes } })).expect("serializable"))
}

fn parse_last_updated(value: Option<&Value>) -> Result<i64> {
    match value {
        None | Some(Value::Null) => Ok(0),
        Some(Value::Number(n)) => n
            .as_i64()
            .or_else(|| n.as_f64().map(|x| x as i64))
            .ok_or_else(|| GbfsError::Schema("last_updated is not an integer".into())),
        Some(Value::String(s)) => s
            .trim()
            .parse::<i64>()
            .ok()
            .or_else(|| {
                chrono::DateTime::parse_from_rfc3339(s.trim())
                    .ok()
                    .map(|t| t.timestamp())
            })
            .ok_or_else(|| GbfsError::Schema(format!("last_updated {s:?} is not a timestamp"))),
        Some(other) => Err(GbfsError::Schema(format!("last_updated has unexpected type: {other}"))),
    }
}

/// Parses a `gbfs.json` auto-discovery document. Relative feed URLs are
/// resolved against `base`.
pub fn parse_discovery(document: &[u8], system_id: &str, base: &Url) -> Result<FeedManifest> {
    let root = parse_json(document)?;
    let data = root
        .get("data")
        .and_then(Value::as_object)
        .ok_or_else(|| GbfsError::Schema("discovery document has no `data` object".into()))?;

    let (language, feeds) = if let Some(feeds) = data.get("feeds") {
        (None, feeds)
    } else {
        data.iter()
            .find_map(|(lang, v)| v.get("feeds").map(|f| (Some(lang.clone()), f)))
            .ok_or_else(|| GbfsError::Schema("discovery document has no `feeds` array".into()))?
    };
    let feeds = feeds
        .as_array()
        .ok_or_else(|| GbfsError::Schema("discovery `feeds` is not an array".into()))?;
    if feeds.is_empty() {
        return Err(GbfsError::Schema("discovery document lists no feeds".into()));
    }

    let mut map = BTreeMap::new();
    for (i, feed) in feeds.iter().enumerate() {
        let name = feed
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| GbfsError::Schema(format!("feed {i} has no name")))?;
        let raw = feed
            .get("url")
            .and_then(Value::as_str)
            .ok_or_else(|| GbfsError::Schema(format!("feed `{name}` has no url")))?;
        let url = base
            .join(raw.trim())
            .map_err(|e| GbfsError::Schema(format!("feed `{name}` has invalid url {raw:?}: {e}")))?;
        map.entry(name.to_string()).or_insert(url);
    }

    let ttl = match root.get("ttl") {
        None | Some(Value::Null) => 0,
        Some(v) => v
            .as_u64()
            .or_else(|| lenient_count(Some(v)).map(u64::from))
            .ok_or_else(|| GbfsError::Schema(format!("ttl must be a non-negative integer, got {v}")))?,
    };

    Ok(FeedManifest {
        system_id: system_id.to_string(),
        feeds: map,
        language,
        last_updated: parse_last_updated(root.get("last_updated"))?,
        ttl,
    })
}

/// Fetches and parses a system's auto-discovery document.
pub fn discover_feeds(entry: &SystemEntry, transport: &dyn Transport) -> Result<FeedManifest> {
    let body = transport.get(&entry.discovery_url)?;
    parse_discovery(&body, &entry.system_id, &entry.discovery_url)
}
