//! Seeded synthetic data with a known generating model.
//!
//! [`simulate_frame`] draws a long-format model frame directly from a
//! coefficient vector. [`synthetic_city`] builds a whole city: a grid of
//! square tracts grouped into counties, raw demographics, and bike
//! observations whose per-tract counts are Poisson draws from the model
//! evaluated on min-max-scaled demographics. Running the pipeline on the
//! city should therefore recover the generating coefficients.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde_json::json;

use crate::aggregate::{write_demographics, DemographicsRow, FrameRow, ModelFrame, MODEL_COLUMNS, MODEL_COLUMN_KEYS};
use crate::geo::{Coord, TractPolygon};
use crate::gbfs::{BikeObservation, DockingType};
use crate::snapshot::SnapshotStore;

/// Generating coefficients used by the bundled fixtures, in model column order.
pub const REFERENCE_BETA: [f64; 12] = [
    0.2, 0.8, 0.4, -0.3, -0.5, 0.6, 0.9, 0.3, -0.2, 0.4, 0.5, -0.4,
];

fn draw_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

fn linear(design: &[f64; 12], beta: &[f64; 12]) -> f64 {
    design.iter().zip(beta).map(|(x, b)| x * b).sum()
}

/// `2 × n_tracts` rows with predictors uniform on `[0, 1]` and responses
/// drawn from `Poisson(exp(xβ))`.
pub fn simulate_frame(n_tracts: usize, beta: &[f64; 12], seed: u64) -> ModelFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_tracts);
    for t in 0..n_tracts {
        let predictors: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
        for indicator in [0u8, 1] {
            let mut row = FrameRow {
                tract_geoid: format!("99001{t:06}"),
                docking_indicator: indicator,
                response: 0,
                predictors,
            };
            row.response = draw_count(&mut rng, linear(&row.design(), beta).exp());
            rows.push(row);
        }
    }
    ModelFrame { rows }
}

#[derive(Debug, Clone)]
pub struct SyntheticCityConfig {
    pub seed: u64,
    /// Tracts per county (one county per grid row).
    pub columns: usize,
    /// Counties that receive bikes.
    pub rows: usize,
    pub origin_lon: f64,
    pub origin_lat: f64,
    /// Side of a square tract in degrees.
    pub tract_size: f64,
    pub beta: [f64; 12],
    pub observed_at: i64,
}

impl Default for SyntheticCityConfig {
    fn default() -> Self {
        SyntheticCityConfig {
            seed: 2019,
            columns: 20,
            rows: 15,
            origin_lon: -122.80,
            origin_lat: 45.40,
            tract_size: 0.01,
            beta: REFERENCE_BETA,
            observed_at: 1_560_000_000,
        }
    }
}

/// A generated city. Besides the modeled counties it contains one county
/// with demographics but no bikes (removed by the zero-county filter), one
/// county with bikes but no demographics (dropped by the join), and a few
/// observations outside every tract.
#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub polygons: Vec<TractPolygon>,
    pub demographics: Vec<DemographicsRow>,
    pub observations: Vec<BikeObservation>,
    pub beta: [f64; 12],
    /// Tracts that enter the model after filtering and joining.
    pub modeled_tracts: usize,
}

fn square(geoid: String, lon: f64, lat: f64, size: f64) -> TractPolygon {
    let ring = [(0., 0.), (1., 0.), (1., 1.), (0., 1.), (0., 0.)]
        .iter()
        .map(|&(dx, dy)| Coord {
            lon: lon + dx * size,
            lat: lat + dy * size,
        })
        .collect();
    TractPolygon::new(geoid, vec![ring]).expect("generated square is valid")
}

fn raw_demographics(rng: &mut ChaCha8Rng, geoid: String) -> DemographicsRow {
    DemographicsRow {
        tract_geoid: geoid,
        pct_college: rng.random_range(0.05..0.85),
        pct_poverty: rng.random_range(0.02..0.45),
        pct_nonwhite: rng.random_range(0.05..0.75),
        pop_density: rng.random_range(500.0..25_000.0),
        job_density: rng.random_range(100.0..40_000.0),
    }
}

pub fn synthetic_city(config: &SyntheticCityConfig) -> SyntheticCity {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let size = config.tract_size;
    let geoid = |county: usize, tract: usize| format!("41{:03}{:06}", 2 * county + 1, 100 * (tract + 1));
    let corner = |row: usize, col: usize| {
        (
            config.origin_lon + col as f64 * size,
            config.origin_lat + row as f64 * size,
        )
    };

    let mut polygons = Vec::new();
    let mut modeled = Vec::new();
    for row in 0..config.rows {
        for col in 0..config.columns {
            let id = geoid(row, col);
            let (lon, lat) = corner(row, col);
            polygons.push(square(id.clone(), lon, lat, size));
            modeled.push((raw_demographics(&mut rng, id), lon, lat));
        }
    }

    // min-max scale over the modeled tracts, exactly as the pipeline will
    let ranges: Vec<(f64, f64)> = (0..5)
        .map(|k| {
            modeled.iter().map(|(d, _, _)| d.values()[k]).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), v| (lo.min(v), hi.max(v)),
            )
        })
        .collect();

    let mut observations = Vec::new();
    let mut next_id = 0usize;
    let mut place = |rng: &mut ChaCha8Rng, lon: f64, lat: f64, kind: DockingType, system: String| {
        next_id += 1;
        BikeObservation {
            system_id: system,
            entity_id: format!("{}{next_id}", if kind == DockingType::Docked { "st" } else { "bk" }),
            lon: lon + size * rng.random_range(0.05..0.95),
            lat: lat + size * rng.random_range(0.05..0.95),
            docking_type: kind,
            observed_at: config.observed_at,
        }
    };

    for (i, (demo, lon, lat)) in modeled.iter().enumerate() {
        let county = i / config.columns;
        let raw = demo.values();
        let scaled: [f64; 5] = std::array::from_fn(|k| (raw[k] - ranges[k].0) / (ranges[k].1 - ranges[k].0));
        for kind in [DockingType::Free, DockingType::Docked] {
            let row = FrameRow {
                tract_geoid: demo.tract_geoid.clone(),
                docking_indicator: kind.indicator(),
                response: 0,
                predictors: scaled,
            };
            let n = draw_count(&mut rng, linear(&row.design(), &config.beta).exp());
            let system = match kind {
                DockingType::Docked => format!("synth_docked_{}", county % 3),
                DockingType::Free => format!("synth_dockless_{}", county % 2),
            };
            for _ in 0..n {
                observations.push(place(&mut rng, *lon, *lat, kind, system.clone()));
            }
        }
    }

    let mut demographics: Vec<DemographicsRow> = modeled.iter().map(|(d, _, _)| d.clone()).collect();

    // a county with demographics but no bikes
    let empty_row = config.rows;
    for col in 0..config.columns {
        let id = geoid(empty_row, col);
        let (lon, lat) = corner(empty_row, col);
        polygons.push(square(id.clone(), lon, lat, size));
        demographics.push(raw_demographics(&mut rng, id));
    }
    // a county with bikes but no demographics
    let orphan_row = config.rows + 1;
    for col in 0..3 {
        let (lon, lat) = corner(orphan_row, col);
        polygons.push(square(geoid(orphan_row, col), lon, lat, size));
        observations.push(place(&mut rng, lon, lat, DockingType::Docked, "synth_docked_0".into()));
    }
    // observations west of the grid, in no tract
    for _ in 0..3 {
        let (lon, lat) = corner(0, 0);
        observations.push(place(&mut rng, lon - 5.0 * size, lat, DockingType::Free, "synth_dockless_0".into()));
    }

    SyntheticCity {
        polygons,
        demographics,
        observations,
        beta: config.beta,
        modeled_tracts: modeled.len(),
    }
}

impl SyntheticCity {
    pub fn boundaries_geojson(&self) -> String {
        let features: Vec<_> = self
            .polygons
            .iter()
            .map(|p| {
                let rings: Vec<Vec<[f64; 2]>> = p
                    .rings()
                    .iter()
                    .map(|r| r.iter().map(|c| [c.lon, c.lat]).collect())
                    .collect();
                json!({
                    "type": "Feature",
                    "properties": { "GEOID": p.tract_geoid() },
                    "geometry": { "type": "Polygon", "coordinates": rings },
                })
            })
            .collect();
        serde_json::to_string(&json!({ "type": "FeatureCollection", "features": features }))
            .expect("serializable")
    }

    /// Writes `boundaries.geojson`, `demographics.csv`, `truth.csv` and a
    /// one-snapshot store under `store/`.
    pub fn write_to_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("boundaries.geojson"), self.boundaries_geojson())?;
        let mut demo = Vec::new();
        write_demographics(&mut demo, &self.demographics).map_err(io::Error::other)?;
        fs::write(dir.join("demographics.csv"), demo)?;
        let mut truth = String::from("column,label,beta\n");
        for ((key, label), b) in MODEL_COLUMN_KEYS.iter().zip(MODEL_COLUMNS).zip(self.beta) {
            truth.push_str(&format!("{key},{label},{b}\n"));
        }
        fs::write(dir.join("truth.csv"), truth)?;
        let store = SnapshotStore::open(dir.join("store")).map_err(io::Error::other)?;
        let observed_at = self.observations.iter().map(|o| o.observed_at).max().unwrap_or(0);
        store
            .append_at(&self.observations, observed_at)
            .map_err(io::Error::other)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_deterministic() {
        let a = simulate_frame(10, &REFERENCE_BETA, 7);
        let b = simulate_frame(10, &REFERENCE_BETA, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
    }

    #[test]
    fn city_layout() {
        let cfg = SyntheticCityConfig {
            columns: 4,
            rows: 3,
            ..Default::default()
        };
        let city = synthetic_city(&cfg);
        assert_eq!(city.modeled_tracts, 12);
        assert_eq!(city.polygons.len(), 12 + 4 + 3);
        assert_eq!(city.demographics.len(), 16);
        assert_eq!(city.polygons[0].tract_geoid(), "41001000100");
        assert_eq!(city.polygons[0].county_geoid(), "41001");
    }
}
