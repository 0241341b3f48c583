//! Tract-level counting, demographic join, the zero-county filter, 0–1
//! predictor scaling, the long-format model frame, and per-system summaries.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::TractIndex;
use crate::gbfs::{BikeObservation, DockingType};
use crate::glm::DesignMatrix;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cannot scale predictor `{0}`: it is constant over the retained tracts")]
    ConstantPredictor(&'static str),
    #[error("no tracts to {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The five neighborhood predictors, in model column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    PctCollege,
    PctPoverty,
    PctNonwhite,
    PopDensity,
    JobDensity,
}

impl Predictor {
    pub const ALL: [Predictor; 5] = [
        Predictor::PctCollege,
        Predictor::PctPoverty,
        Predictor::PctNonwhite,
        Predictor::PopDensity,
        Predictor::JobDensity,
    ];

    /// Column name in CSV files.
    pub fn key(self) -> &'static str {
        match self {
            Predictor::PctCollege => "pct_college",
            Predictor::PctPoverty => "pct_poverty",
            Predictor::PctNonwhite => "pct_nonwhite",
            Predictor::PopDensity => "pop_density",
            Predictor::JobDensity => "job_density",
        }
    }

    /// Human-readable label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Predictor::PctCollege => "% College-Educated",
            Predictor::PctPoverty => "% in Poverty",
            Predictor::PctNonwhite => "% Nonwhite",
            Predictor::PopDensity => "Population Density",
            Predictor::JobDensity => "Job Density",
        }
    }

    fn is_fraction(self) -> bool {
        matches!(
            self,
            Predictor::PctCollege | Predictor::PctPoverty | Predictor::PctNonwhite
        )
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicsRow {
    pub tract_geoid: String,
    pub pct_college: f64,
    pub pct_poverty: f64,
    pub pct_nonwhite: f64,
    pub pop_density: f64,
    pub job_density: f64,
}

impl DemographicsRow {
    pub fn get(&self, p: Predictor) -> f64 {
        match p {
            Predictor::PctCollege => self.pct_college,
            Predictor::PctPoverty => self.pct_poverty,
            Predictor::PctNonwhite => self.pct_nonwhite,
            Predictor::PopDensity => self.pop_density,
            Predictor::JobDensity => self.job_density,
        }
    }

    fn set(&mut self, p: Predictor, value: f64) {
        match p {
            Predictor::PctCollege => self.pct_college = value,
            Predictor::PctPoverty => self.pct_poverty = value,
            Predictor::PctNonwhite => self.pct_nonwhite = value,
            Predictor::PopDensity => self.pop_density = value,
            Predictor::JobDensity => self.job_density = value,
        }
    }

    pub fn values(&self) -> [f64; 5] {
        Predictor::ALL.map(|p| self.get(p))
    }
}

pub const DEMOGRAPHICS_HEADER: [&str; 6] = [
    "tract_geoid",
    "pct_college",
    "pct_poverty",
    "pct_nonwhite",
    "pop_density",
    "job_density",
];

/// Reads and validates a demographics CSV.
pub fn read_demographics<R: Read>(reader: R) -> Result<Vec<DemographicsRow>, AggregateError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    for want in DEMOGRAPHICS_HEADER {
        if !header.iter().any(|h| h.trim() == want) {
            return Err(AggregateError::Schema(format!(
                "demographics table is missing column `{want}`"
            )));
        }
    }
    let mut rows = Vec::new();
    for (i, row) in rdr.deserialize::<DemographicsRow>().enumerate() {
        let row = row.map_err(|e| AggregateError::Schema(format!("demographics row {}: {e}", i + 1)))?;
        for p in Predictor::ALL {
            let v = row.get(p);
            let ok = v.is_finite() && v >= 0.0 && (!p.is_fraction() || v <= 1.0);
            if !ok {
                return Err(AggregateError::Schema(format!(
                    "tract {}: {} = {v} is out of range",
                    row.tract_geoid, p
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_demographics<W: Write>(writer: W, rows: &[DemographicsRow]) -> Result<(), AggregateError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    if rows.is_empty() {
        wtr.write_record(DEMOGRAPHICS_HEADER)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Per-tract counts before the demographic join.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TractCounts {
    pub tract_geoid: String,
    pub count_docked: u64,
    pub count_free: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TractRecord {
    pub tract_geoid: String,
    pub count_docked: u64,
    pub count_free: u64,
    pub demographics: DemographicsRow,
}

/// Anything carrying a tract GEOID and bike counts.
pub trait CountyTotals {
    fn tract_geoid(&self) -> &str;
    fn total(&self) -> u64;

    fn county_geoid(&self) -> &str {
        let id = self.tract_geoid();
        &id[..id.len().min(5)]
    }
}

impl CountyTotals for TractCounts {
    fn tract_geoid(&self) -> &str {
        &self.tract_geoid
    }
    fn total(&self) -> u64 {
        self.count_docked + self.count_free
    }
}

impl CountyTotals for TractRecord {
    fn tract_geoid(&self) -> &str {
        &self.tract_geoid
    }
    fn total(&self) -> u64 {
        self.count_docked + self.count_free
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CountDiagnostics {
    pub assigned: usize,
    pub unassigned: usize,
}

/// Counts docked and free observations per tract. Every tract in the index
/// appears, zero-filled; output is sorted by GEOID.
pub fn count_by_tract(
    observations: &[BikeObservation],
    index: &TractIndex,
) -> (Vec<TractCounts>, CountDiagnostics) {
    let mut counts: BTreeMap<&str, (u64, u64)> =
        index.tract_geoids().into_iter().map(|g| (g, (0, 0))).collect();
    let mut diag = CountDiagnostics::default();
    for obs in observations {
        match index.assign(obs.lat, obs.lon) {
            Some(geoid) => {
                let c = counts.get_mut(geoid).expect("index geoids are pre-seeded");
                match obs.docking_type {
                    DockingType::Docked => c.0 += 1,
                    DockingType::Free => c.1 += 1,
                }
                diag.assigned += 1;
            }
            None => diag.unassigned += 1,
        }
    }
    let counts = counts
        .into_iter()
        .map(|(g, (d, f))| TractCounts {
            tract_geoid: g.to_string(),
            count_docked: d,
            count_free: f,
        })
        .collect();
    (counts, diag)
}

/// Keeps exactly the tracts whose county has a positive total count.
pub fn filter_zero_counties<T: CountyTotals + Clone>(records: &[T]) -> Vec<T> {
    let active: HashSet<&str> = records
        .iter()
        .filter(|r| r.total() > 0)
        .map(|r| r.county_geoid())
        .collect();
    records
        .iter()
        .filter(|r| active.contains(r.county_geoid()))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct JoinDiagnostics {
    /// Counted tracts with no demographics row.
    pub unmatched: usize,
}

/// Inner join of counts with demographics on GEOID.
pub fn join_demographics(
    counts: &[TractCounts],
    demographics: &[DemographicsRow],
) -> Result<(Vec<TractRecord>, JoinDiagnostics), AggregateError> {
    let mut by_geoid: HashMap<&str, &DemographicsRow> = HashMap::with_capacity(demographics.len());
    for row in demographics {
        if by_geoid.insert(row.tract_geoid.as_str(), row).is_some() {
            return Err(AggregateError::Schema(format!(
                "duplicate tract_geoid `{}` in demographics",
                row.tract_geoid
            )));
        }
    }
    let mut diag = JoinDiagnostics::default();
    let records = counts
        .iter()
        .filter_map(|c| match by_geoid.get(c.tract_geoid.as_str()) {
            Some(demo) => Some(TractRecord {
                tract_geoid: c.tract_geoid.clone(),
                count_docked: c.count_docked,
                count_free: c.count_free,
                demographics: (*demo).clone(),
            }),
            None => {
                diag.unmatched += 1;
                None
            }
        })
        .collect();
    Ok((records, diag))
}

/// The observed range of each predictor before scaling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scaling {
    pub ranges: BTreeMap<Predictor, (f64, f64)>,
}

impl Scaling {
    pub fn range(&self, p: Predictor) -> (f64, f64) {
        self.ranges[&p]
    }

    /// Converts a coefficient on the scaled predictor back to raw units.
    pub fn unscale_slope(&self, p: Predictor, coefficient: f64) -> f64 {
        let (min, max) = self.range(p);
        coefficient / (max - min)
    }
}

/// Min-max scales every predictor to `[0, 1]` over `records`.
pub fn scale_predictors(records: &[TractRecord]) -> Result<(Vec<TractRecord>, Scaling), AggregateError> {
    if records.is_empty() {
        return Err(AggregateError::Empty("scale"));
    }
    let mut ranges = BTreeMap::new();
    for p in Predictor::ALL {
        let (min, max) = records.iter().map(|r| r.demographics.get(p)).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), v| (lo.min(v), hi.max(v)),
        );
        if max <= min {
            return Err(AggregateError::ConstantPredictor(p.key()));
        }
        ranges.insert(p, (min, max));
    }
    let scaled = records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            for (&p, &(min, max)) in &ranges {
                let v = r.demographics.get(p);
                r.demographics.set(p, (v - min) / (max - min));
            }
            r
        })
        .collect();
    Ok((scaled, Scaling { ranges }))
}

/// Design column names, in model order.
pub const MODEL_COLUMNS: [&str; 12] = [
    "Intercept",
    "% College-Educated",
    "% in Poverty",
    "% Nonwhite",
    "Population Density",
    "Job Density",
    "Docking Type",
    "% College-Educated * Docking Type",
    "% in Poverty * Docking Type",
    "% Nonwhite * Docking Type",
    "Population Density * Docking Type",
    "Job Density * Docking Type",
];

/// Design column keys for CSV export.
pub const MODEL_COLUMN_KEYS: [&str; 12] = [
    "intercept",
    "pct_college",
    "pct_poverty",
    "pct_nonwhite",
    "pop_density",
    "job_density",
    "docking_type",
    "pct_college_x_docking_type",
    "pct_poverty_x_docking_type",
    "pct_nonwhite_x_docking_type",
    "pop_density_x_docking_type",
    "job_density_x_docking_type",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub tract_geoid: String,
    /// 1 for the docked count, 0 for the free count.
    pub docking_indicator: u8,
    pub response: u64,
    pub predictors: [f64; 5],
}

impl FrameRow {
    /// The 12 design values, intercept first, interactions last.
    pub fn design(&self) -> [f64; 12] {
        let d = f64::from(self.docking_indicator);
        let p = self.predictors;
        [
            1.0, p[0], p[1], p[2], p[3], p[4], d,
            p[0] * d, p[1] * d, p[2] * d, p[3] * d, p[4] * d,
        ]
    }
}

/// Long-format regression data: a free row and a docked row per tract.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFrame {
    pub rows: Vec<FrameRow>,
}

impl ModelFrame {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn design_matrix(&self) -> DesignMatrix {
        let values = self.rows.iter().flat_map(|r| r.design()).collect();
        DesignMatrix::new(
            self.rows.len(),
            MODEL_COLUMNS.len(),
            values,
            MODEL_COLUMNS.iter().map(|s| s.to_string()).collect(),
        )
        .expect("frame rows are finite with an intercept column")
    }

    pub fn responses(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.response).collect()
    }

    /// CSV with `tract_geoid,response` followed by the 12 design columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), AggregateError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["tract_geoid", "response"];
        header.extend(MODEL_COLUMN_KEYS);
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.tract_geoid.clone(), row.response.to_string()];
            rec.extend(row.design().iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn build_model_frame(records: &[TractRecord]) -> Result<ModelFrame, AggregateError> {
    if records.is_empty() {
        return Err(AggregateError::Empty("build a model frame from"));
    }
    let rows = records
        .iter()
        .flat_map(|r| {
            let predictors = r.demographics.values();
            [
                FrameRow {
                    tract_geoid: r.tract_geoid.clone(),
                    docking_indicator: DockingType::Free.indicator(),
                    response: r.count_free,
                    predictors,
                },
                FrameRow {
                    tract_geoid: r.tract_geoid.clone(),
                    docking_indicator: DockingType::Docked.indicator(),
                    response: r.count_docked,
                    predictors,
                },
            ]
        })
        .collect();
    Ok(ModelFrame { rows })
}

/// Sample quantile by linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and non-empty.
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSummary {
    pub docking_type: DockingType,
    pub total_bikes: u64,
    pub n_systems: usize,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

impl SystemSummary {
    /// "Dockless" or "Docked".
    pub fn storage_label(&self) -> &'static str {
        match self.docking_type {
            DockingType::Free => "Dockless",
            DockingType::Docked => "Docked",
        }
    }
}

/// Per docking type: total entities, number of systems, and quartiles of
/// entities per system. Dockless comes first; absent types are omitted.
pub fn summarize_systems(observations: &[BikeObservation]) -> Vec<SystemSummary> {
    let mut per_system: BTreeMap<(DockingType, &str), u64> = BTreeMap::new();
    for obs in observations {
        *per_system.entry((obs.docking_type, obs.system_id.as_str())).or_default() += 1;
    }
    [DockingType::Free, DockingType::Docked]
        .into_iter()
        .filter_map(|kind| {
            let mut counts: Vec<f64> = per_system
                .iter()
                .filter(|((k, _), _)| *k == kind)
                .map(|(_, &n)| n as f64)
                .collect();
            if counts.is_empty() {
                return None;
            }
            counts.sort_by(f64::total_cmp);
            Some(SystemSummary {
                docking_type: kind,
                total_bikes: counts.iter().sum::<f64>() as u64,
                n_systems: counts.len(),
                q25: quantile_linear(&counts, 0.25),
                q50: quantile_linear(&counts, 0.50),
                q75: quantile_linear(&counts, 0.75),
            })
        })
        .collect()
}

/// Table-1-style CSV: `storage_type,bike_count,n_systems,q25,q50,q75`.
pub fn write_system_summary_csv<W: Write>(
    writer: W,
    summaries: &[SystemSummary],
) -> Result<(), AggregateError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["storage_type", "bike_count", "n_systems", "q25", "q50", "q75"])?;
    for s in summaries {
        wtr.write_record([
            s.storage_label().to_string(),
            s.total_bikes.to_string(),
            s.n_systems.to_string(),
            s.q25.to_string(),
            s.q50.to_string(),
            s.q75.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Distinct counties among `records`.
pub fn counties<T: CountyTotals>(records: &[T]) -> BTreeSet<String> {
    records.iter().map(|r| r.county_geoid().to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(geoid: &str, d: u64, f: u64) -> TractCounts {
        TractCounts {
            tract_geoid: geoid.into(),
            count_docked: d,
            count_free: f,
        }
    }

    fn demo(geoid: &str, v: [f64; 5]) -> DemographicsRow {
        DemographicsRow {
            tract_geoid: geoid.into(),
            pct_college: v[0],
            pct_poverty: v[1],
            pct_nonwhite: v[2],
            pop_density: v[3],
            job_density: v[4],
        }
    }

    fn record(geoid: &str, d: u64, f: u64, v: [f64; 5]) -> TractRecord {
        TractRecord {
            tract_geoid: geoid.into(),
            count_docked: d,
            count_free: f,
            demographics: demo(geoid, v),
        }
    }

    #[test]
    fn zero_counties_are_dropped_but_zero_tracts_in_active_counties_kept() {
        let input = vec![
            counts("41001000100", 0, 0),
            counts("41001000200", 2, 1),
            counts("41003000100", 0, 0),
            counts("41003000200", 0, 0),
        ];
        let out = filter_zero_counties(&input);
        assert_eq!(out, input[..2].to_vec());
    }

    #[test]
    fn all_zero_filters_to_empty() {
        assert!(filter_zero_counties(&[counts("41001000100", 0, 0)]).is_empty());
    }

    #[test]
    fn single_positive_tract_is_kept() {
        let one = vec![counts("41001000100", 1, 0)];
        assert_eq!(filter_zero_counties(&one), one);
    }

    #[test]
    fn join_drops_unmatched() {
        let c = vec![
            counts("41001000100", 1, 0),
            counts("41001000200", 0, 1),
            counts("41001000300", 2, 2),
        ];
        let d = vec![demo("41001000100", [0.1; 5]), demo("41001000300", [0.2; 5]), demo("99999999999", [0.3; 5])];
        let (records, diag) = join_demographics(&c, &d).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(diag.unmatched, 1);

        let (_, diag) = join_demographics(&c[..1], &d).unwrap();
        assert_eq!(diag.unmatched, 0);
    }

    #[test]
    fn duplicate_demographics_geoid_is_named() {
        let d = vec![demo("41001000100", [0.1; 5]), demo("41001000100", [0.2; 5])];
        match join_demographics(&[], &d) {
            Err(AggregateError::Schema(m)) => assert!(m.contains("41001000100")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn min_max_scaling() {
        let recs = vec![
            record("41001000100", 1, 0, [0.0, 0.0, 0.0, 100.0, 0.0]),
            record("41001000200", 1, 0, [0.5, 1.0, 0.2, 300.0, 5.0]),
            record("41001000300", 1, 0, [1.0, 0.5, 0.4, 500.0, 10.0]),
        ];
        let (scaled, meta) = scale_predictors(&recs).unwrap();
        let pop: Vec<f64> = scaled.iter().map(|r| r.demographics.pop_density).collect();
        assert_eq!(pop, [0.0, 0.5, 1.0]);
        // already spanning [0, 1]: unchanged
        let college: Vec<f64> = scaled.iter().map(|r| r.demographics.pct_college).collect();
        assert_eq!(college, [0.0, 0.5, 1.0]);
        assert_eq!(meta.range(Predictor::PopDensity), (100.0, 500.0));
        assert_eq!(meta.unscale_slope(Predictor::PopDensity, 400.0), 1.0);
    }

    #[test]
    fn constant_predictor_is_an_error() {
        let recs = vec![
            record("41001000100", 1, 0, [0.4, 0.0, 0.0, 1.0, 1.0]),
            record("41001000200", 1, 0, [0.4, 1.0, 1.0, 2.0, 2.0]),
        ];
        assert!(matches!(
            scale_predictors(&recs),
            Err(AggregateError::ConstantPredictor("pct_college"))
        ));
    }

    #[test]
    fn frame_rows_and_interactions() {
        let recs = vec![record("41001000100", 3, 1, [0.5, 0.0, 0.0, 0.0, 0.0])];
        let frame = build_model_frame(&recs).unwrap();
        assert_eq!(frame.len(), 2);
        let docked = frame.rows.iter().find(|r| r.docking_indicator == 1).unwrap();
        let free = frame.rows.iter().find(|r| r.docking_indicator == 0).unwrap();
        assert_eq!(docked.response, 3);
        assert_eq!(free.response, 1);
        assert_eq!(docked.design()[7], 0.5);
        assert_eq!(free.design()[7], 0.0);
        assert_eq!(free.design()[1], 0.5);
    }

    #[test]
    fn frame_has_two_rows_per_tract_and_zero_interactions_for_zero_predictors() {
        let recs: Vec<_> = (0..7)
            .map(|i| record(&format!("410010001{i:02}"), i, 1, [0.0; 5]))
            .collect();
        let frame = build_model_frame(&recs).unwrap();
        assert_eq!(frame.len(), 14);
        assert!(frame.rows.iter().all(|r| r.design()[7..].iter().all(|&v| v == 0.0)));
        assert!(matches!(build_model_frame(&[]), Err(AggregateError::Empty(_))));
    }

    #[test]
    fn frame_csv_header() {
        let recs = vec![record("41001000100", 3, 1, [0.5, 0.0, 0.0, 0.0, 0.0])];
        let mut buf = Vec::new();
        build_model_frame(&recs).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("tract_geoid,response,intercept,pct_college"));
        assert_eq!(lines.count(), 2);
    }

    fn bikes(system: &str, kind: DockingType, n: usize) -> Vec<BikeObservation> {
        (0..n)
            .map(|i| BikeObservation {
                system_id: system.into(),
                entity_id: format!("{system}-{i}"),
                lat: 0.0,
                lon: 0.0,
                docking_type: kind,
                observed_at: 0,
            })
            .collect()
    }

    #[test]
    fn median_of_four_systems_interpolates() {
        let mut obs = Vec::new();
        for (s, n) in [("a", 2), ("b", 35), ("c", 400), ("d", 8)] {
            obs.extend(bikes(s, DockingType::Free, n));
        }
        let summary = summarize_systems(&obs);
        assert_eq!(summary.len(), 1);
        // sorted {2, 8, 35, 400}: h = 1.5 -> 8 + 0.5 * 27
        assert_eq!(summary[0].q50, 21.5);
        assert_eq!(summary[0].total_bikes, 445);
        assert_eq!(summary[0].n_systems, 4);
        assert_eq!(summary[0].storage_label(), "Dockless");
    }

    #[test]
    fn single_system_quantiles_collapse() {
        let s = summarize_systems(&bikes("a", DockingType::Docked, 7));
        assert_eq!((s[0].q25, s[0].q50, s[0].q75), (7.0, 7.0, 7.0));
    }

    #[test]
    fn demographics_validation() {
        let ok = "tract_geoid,pct_college,pct_poverty,pct_nonwhite,pop_density,job_density\n\
                  41001000100,0.5,0.1,0.2,1000,50\n";
        assert_eq!(read_demographics(ok.as_bytes()).unwrap().len(), 1);
        let bad = "tract_geoid,pct_college,pct_poverty,pct_nonwhite,pop_density,job_density\n\
                   41001000100,1.5,0.1,0.2,1000,50\n";
        assert!(matches!(read_demographics(bad.as_bytes()), Err(AggregateError::Schema(_))));
        let missing = "tract_geoid,pct_college\n41001000100,0.5\n";
        match read_demographics(missing.as_bytes()) {
            Err(AggregateError::Schema(m)) => assert!(m.contains("pct_poverty")),
            other => panic!("{other:?}"),
        }
    }
}
