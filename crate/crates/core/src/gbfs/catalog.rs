use std::collections::HashSet;

use url::Url;

use super::transport::{resolve_source, Transport};
use super::{GbfsError, Result, SystemEntry};

const REQUIRED: [&str; 4] = ["system_id", "country_code", "name", "auto_discovery_url"];

/// Maps header spellings such as `System ID` or `Auto-Discovery URL` (as
/// used by the public GBFS `systems.csv`) onto the canonical snake_case
/// names.
fn canonical_column(raw: &str) -> String {
    raw.trim()
        .trim_start_matches('\u{feff}')
        .to_ascii_lowercase()
        .replace([' ', '-'], "_")
}

/// Fetches a catalog CSV from a URL or file path and parses it.
pub fn fetch_system_catalog(
    source: &str,
    country_filter: Option<&str>,
    transport: &dyn Transport,
) -> Result<Vec<SystemEntry>> {
    let url = resolve_source(source)?;
    let body = transport.get(&url)?;
    parse_system_catalog(&body, country_filter)
}

/// Parses a catalog with columns `system_id,country_code,name,auto_discovery_url`
/// (any order, extra columns ignored). Entries come back sorted by
/// `system_id`, restricted to `country_filter` when given.
pub fn parse_system_catalog(body: &[u8], country_filter: Option<&str>) -> Result<Vec<SystemEntry>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(body);
    let header = rdr
        .headers()
        .map_err(|e| GbfsError::Schema(format!("catalog header: {e}")))?
        .clone();
    let names: Vec<String> = header.iter().map(canonical_column).collect();
    let mut index = [0usize; 4];
    for (slot, want) in index.iter_mut().zip(REQUIRED) {
        *slot = names
            .iter()
            .position(|n| n == want)
            .ok_or_else(|| GbfsError::Schema(format!("catalog is missing column `{want}`")))?;
    }
    let [id_col, country_col, name_col, url_col] = index;

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| GbfsError::Schema(format!("catalog row {}: {e}", row_no + 1)))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let system_id = field(id_col);
        if system_id.is_empty() {
            return Err(GbfsError::Schema(format!(
                "catalog row {}: empty system_id",
                row_no + 1
            )));
        }
        if !seen.insert(system_id.to_string()) {
            return Err(GbfsError::Schema(format!(
                "catalog has duplicate system_id `{system_id}`"
            )));
        }
        let raw_url = field(url_col);
        let discovery_url = Url::parse(raw_url).map_err(|e| {
            GbfsError::Schema(format!(
                "catalog row {} (`{system_id}`): invalid auto_discovery_url {raw_url:?}: {e}",
                row_no + 1
            ))
        })?;
        let country_code = field(country_col).to_ascii_uppercase();
        if let Some(filter) = country_filter {
            if !country_code.eq_ignore_ascii_case(filter.trim()) {
                continue;
            }
        }
        entries.push(SystemEntry {
            system_id: system_id.to_string(),
            name: field(name_col).to_string(),
            country_code,
            discovery_url,
        });
    }
    entries.sort_by(|a, b| a.system_id.cmp(&b.system_id));
    Ok(entries)
}
