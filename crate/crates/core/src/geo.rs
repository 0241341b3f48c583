//! Census-tract boundaries and reverse geocoding by point-in-polygon.
//!
//! Containment is evaluated in planar lon/lat degrees with the even-odd
//! rule. A point lying exactly on any ring edge (outer or hole) is inside.
//! [`TractIndex`] buckets polygon bounding boxes into a uniform grid; the
//! candidates for a cell are a superset of the polygons that can contain
//! any point in it, so indexed lookup gives the same answer as scanning
//! every polygon.

use std::collections::HashMap;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::gbfs::BikeObservation;

pub const DEFAULT_CELL_SIZE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("boundary file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("geometry error in tract {geoid}: {message}")]
    Geometry { geoid: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    fn of(points: &[Coord]) -> BBox {
        points.iter().fold(
            BBox {
                min_lon: f64::INFINITY,
                min_lat: f64::INFINITY,
                max_lon: f64::NEG_INFINITY,
                max_lat: f64::NEG_INFINITY,
            },
            |b, p| BBox {
                min_lon: b.min_lon.min(p.lon),
                min_lat: b.min_lat.min(p.lat),
                max_lon: b.max_lon.max(p.lon),
                max_lat: b.max_lat.max(p.lat),
            },
        )
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lon >= self.min_lon && lon <= self.max_lon && lat >= self.min_lat && lat <= self.max_lat
    }
}

/// One polygon part of a census tract.
#[derive(Debug, Clone, PartialEq)]
pub struct TractPolygon {
    tract_geoid: String,
    rings: Vec<Vec<Coord>>,
    bbox: BBox,
}

impl TractPolygon {
    /// Validates and builds a polygon. `rings[0]` is the outer ring, the
    /// rest are holes. Every ring must be closed with at least 4 points.
    pub fn new(tract_geoid: impl Into<String>, rings: Vec<Vec<Coord>>) -> Result<Self, GeoError> {
        let tract_geoid = tract_geoid.into();
        let geometry = |message: String| GeoError::Geometry {
            geoid: tract_geoid.clone(),
            message,
        };
        if tract_geoid.len() != 11 || !tract_geoid.bytes().all(|b| b.is_ascii_digit()) {
            return Err(GeoError::Schema(format!(
                "GEOID {tract_geoid:?} is not an 11-digit tract identifier"
            )));
        }
        if rings.is_empty() {
            return Err(geometry("polygon has no rings".into()));
        }
        for (i, ring) in rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(geometry(format!("ring {i} has {} points, need at least 4", ring.len())));
            }
            if ring.first() != ring.last() {
                return Err(geometry(format!("ring {i} is not closed")));
            }
            if ring.iter().any(|c| !c.lon.is_finite() || !c.lat.is_finite()) {
                return Err(geometry(format!("ring {i} has a non-finite coordinate")));
            }
        }
        let bbox = BBox::of(&rings[0]);
        let bbox = rings[1..].iter().fold(bbox, |b, r| {
            let h = BBox::of(r);
            BBox {
                min_lon: b.min_lon.min(h.min_lon),
                min_lat: b.min_lat.min(h.min_lat),
                max_lon: b.max_lon.max(h.max_lon),
                max_lat: b.max_lat.max(h.max_lat),
            }
        });
        Ok(TractPolygon {
            tract_geoid,
            rings,
            bbox,
        })
    }

    pub fn tract_geoid(&self) -> &str {
        &self.tract_geoid
    }

    /// State + county FIPS prefix.
    pub fn county_geoid(&self) -> &str {
        &self.tract_geoid[..5]
    }

    pub fn rings(&self) -> &[Vec<Coord>] {
        &self.rings
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }
}

fn on_segment(lat: f64, lon: f64, a: Coord, b: Coord) -> bool {
    let cross = (b.lon - a.lon) * (lat - a.lat) - (b.lat - a.lat) * (lon - a.lon);
    cross == 0.0
        && lon >= a.lon.min(b.lon)
        && lon <= a.lon.max(b.lon)
        && lat >= a.lat.min(b.lat)
        && lat <= a.lat.max(b.lat)
}

/// Even-odd ray cast toward +lon. Returns `None` if the point is on an edge.
fn ring_parity(lat: f64, lon: f64, ring: &[Coord]) -> Option<bool> {
    let mut inside = false;
    for edge in ring.windows(2) {
        let (a, b) = (edge[0], edge[1]);
        if on_segment(lat, lon, a, b) {
            return None;
        }
        if (a.lat > lat) != (b.lat > lat) {
            let x = a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if lon < x {
                inside = !inside;
            }
        }
    }
    Some(inside)
}

/// True iff `(lat, lon)` is inside the outer ring and outside every hole,
/// with points on any edge counted as inside.
pub fn point_in_polygon(lat: f64, lon: f64, poly: &TractPolygon) -> bool {
    if !poly.bbox.contains(lat, lon) {
        return false;
    }
    match ring_parity(lat, lon, &poly.rings[0]) {
        None => return true,
        Some(false) => return false,
        Some(true) => {}
    }
    for hole in &poly.rings[1..] {
        match ring_parity(lat, lon, hole) {
            None => return true,
            Some(true) => return false,
            Some(false) => {}
        }
    }
    true
}

/// Polygons plus a uniform grid over their bounding boxes.
#[derive(Debug, Clone)]
pub struct TractIndex {
    polygons: Vec<TractPolygon>,
    grid: HashMap<(i64, i64), Vec<usize>>,
    cell_size: f64,
}

impl TractIndex {
    pub fn new(polygons: Vec<TractPolygon>, cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite(), "cell size must be positive");
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, poly) in polygons.iter().enumerate() {
            let b = poly.bbox;
            let (x0, y0) = cell_of(b.min_lon, b.min_lat, cell_size);
            let (x1, y1) = cell_of(b.max_lon, b.max_lat, cell_size);
            for x in x0..=x1 {
                for y in y0..=y1 {
                    grid.entry((x, y)).or_default().push(i);
                }
            }
        }
        TractIndex {
            polygons,
            grid,
            cell_size,
        }
    }

    pub fn polygons(&self) -> &[TractPolygon] {
        &self.polygons
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Indices of polygons whose bounding box touches the point's cell.
    pub fn candidates(&self, lat: f64, lon: f64) -> &[usize] {
        self.grid
            .get(&cell_of(lon, lat, self.cell_size))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// GEOID of the containing tract; on shared boundaries the smallest
    /// GEOID wins.
    pub fn assign(&self, lat: f64, lon: f64) -> Option<&str> {
        self.candidates(lat, lon)
            .iter()
            .map(|&i| &self.polygons[i])
            .filter(|p| point_in_polygon(lat, lon, p))
            .map(TractPolygon::tract_geoid)
            .min()
    }

    /// Distinct tract GEOIDs, sorted.
    pub fn tract_geoids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.polygons.iter().map(TractPolygon::tract_geoid).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

fn cell_of(lon: f64, lat: f64, cell_size: f64) -> (i64, i64) {
    ((lon / cell_size).floor() as i64, (lat / cell_size).floor() as i64)
}

pub fn assign_tract<'a>(obs: &BikeObservation, index: &'a TractIndex) -> Option<&'a str> {
    index.assign(obs.lat, obs.lon)
}

fn geoid_of(feature: &Value, i: usize) -> Result<String, GeoError> {
    let props = feature.get("properties");
    let raw = props
        .and_then(|p| p.get("GEOID").or_else(|| p.get("geoid")))
        .ok_or_else(|| GeoError::Schema(format!("feature {i} has no GEOID property")))?;
    match raw {
        Value::String(s) => Ok(s.trim().to_string()),
        // numeric GEOIDs lose the leading zero of single-digit state codes
        Value::Number(n) if n.is_u64() => Ok(format!("{:011}", n.as_u64().unwrap_or_default())),
        other => Err(GeoError::Schema(format!("feature {i} has a non-string GEOID: {other}"))),
    }
}

fn parse_ring(value: &Value, geoid: &str) -> Result<Vec<Coord>, GeoError> {
    let bad = |m: &str| GeoError::Geometry {
        geoid: geoid.to_string(),
        message: m.to_string(),
    };
    value
        .as_array()
        .ok_or_else(|| bad("ring is not an array"))?
        .iter()
        .map(|pos| {
            let pos = pos.as_array().ok_or_else(|| bad("position is not an array"))?;
            match (pos.first().and_then(Value::as_f64), pos.get(1).and_then(Value::as_f64)) {
                (Some(lon), Some(lat)) => Ok(Coord { lon, lat }),
                _ => Err(bad("position needs numeric lon, lat")),
            }
        })
        .collect()
}

fn parse_polygon(value: &Value, geoid: &str) -> Result<TractPolygon, GeoError> {
    let rings = value
        .as_array()
        .ok_or_else(|| GeoError::Geometry {
            geoid: geoid.to_string(),
            message: "polygon coordinates are not an array".into(),
        })?
        .iter()
        .map(|r| parse_ring(r, geoid))
        .collect::<Result<Vec<_>, _>>()?;
    TractPolygon::new(geoid, rings)
}

/// Parses a GeoJSON FeatureCollection of Polygon / MultiPolygon tracts.
/// MultiPolygons become one [`TractPolygon`] per part.
pub fn parse_boundaries(document: &[u8], cell_size: f64) -> Result<TractIndex, GeoError> {
    let root: Value = serde_json::from_slice(document)?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| GeoError::Schema("expected a FeatureCollection with a features array".into()))?;
    let mut polygons = Vec::new();
    for (i, feature) in features.iter().enumerate() {
        let geoid = geoid_of(feature, i)?;
        let geometry = feature
            .get("geometry")
            .ok_or_else(|| GeoError::Schema(format!("feature {i} has no geometry")))?;
        let coords = geometry.get("coordinates").unwrap_or(&Value::Null);
        match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => polygons.push(parse_polygon(coords, &geoid)?),
            Some("MultiPolygon") => {
                let parts = coords.as_array().ok_or_else(|| GeoError::Geometry {
                    geoid: geoid.clone(),
                    message: "multipolygon coordinates are not an array".into(),
                })?;
                for part in parts {
                    polygons.push(parse_polygon(part, &geoid)?);
                }
            }
            other => {
                return Err(GeoError::Schema(format!(
                    "feature {i} has unsupported geometry type {other:?}"
                )))
            }
        }
    }
    Ok(TractIndex::new(polygons, cell_size))
}

pub fn load_boundaries(path: impl AsRef<Path>) -> Result<TractIndex, GeoError> {
    load_boundaries_with_cell_size(path, DEFAULT_CELL_SIZE)
}

pub fn load_boundaries_with_cell_size(
    path: impl AsRef<Path>,
    cell_size: f64,
) -> Result<TractIndex, GeoError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| GeoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_boundaries(&bytes, cell_size)
}
