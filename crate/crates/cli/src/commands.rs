use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use bikeshare_equity::aggregate::{
    build_model_frame, count_by_tract, counties, filter_zero_counties, join_demographics,
    read_demographics, scale_predictors, summarize_systems, write_system_summary_csv, Predictor,
    SystemSummary,
};
use bikeshare_equity::gbfs::{
    fetch_system_catalog, harvest, Clock, HarvestOptions, HarvestReport, SystemEntry, Transport,
};
use bikeshare_equity::geo::load_boundaries;
use bikeshare_equity::glm::{fit_poisson, render_report, CoefficientReport, FitOptions};
use bikeshare_equity::snapshot::{load_snapshot, SnapshotReceipt, SnapshotStore};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::map::render_map;
use crate::{stage, CliError};

/// Files written by `analyze`, in write order.
pub const ANALYSIS_FILES: [&str; 5] = [
    "table1.csv",
    "table2.csv",
    "table2.txt",
    "model_frame.csv",
    "run_manifest.json",
];

fn fetch_catalog(config: &PipelineConfig, transport: &dyn Transport) -> Result<Vec<SystemEntry>, CliError> {
    let source = config.require_catalog()?;
    fetch_system_catalog(source, config.country_filter.as_deref(), transport)
        .map_err(stage("fetch_system_catalog"))
}

pub fn cmd_catalog(config: &PipelineConfig, transport: &dyn Transport) -> Result<Vec<SystemEntry>, CliError> {
    fetch_catalog(config, transport)
}

/// Aligned table followed by an `N systems` line.
pub fn render_catalog(entries: &[SystemEntry]) -> String {
    let header = ["system_id", "country", "name", "auto_discovery_url"];
    let rows: Vec<[String; 4]> = entries
        .iter()
        .map(|e| {
            [
                e.system_id.clone(),
                e.country_code.clone(),
                e.name.clone(),
                e.discovery_url.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: [&str; 4]| {
        let text = format!(
            "{:<w0$}  {:<w1$}  {:<w2$}  {}",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
        );
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(header);
    for row in &rows {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    let noun = if entries.len() == 1 { "system" } else { "systems" };
    let _ = writeln!(out, "{} {noun}", entries.len());
    out
}

#[derive(Debug, Clone, Serialize)]
struct HarvestManifest<'a> {
    snapshot_id: u64,
    observed_at: i64,
    row_count: usize,
    systems_attempted: usize,
    systems_with_observations: usize,
    systems_failed: usize,
    dropped_missing_coordinates: usize,
    dropped_out_of_bounds: usize,
    dropped_missing_id: usize,
    dropped_duplicate_id: usize,
    excluded_bikes: usize,
    failures: &'a [String],
}

#[derive(Debug, Clone)]
pub struct HarvestOutcome {
    pub receipt: SnapshotReceipt,
    pub report: HarvestReport,
    pub warnings: Vec<String>,
}

impl HarvestOutcome {
    pub fn summary(&self) -> String {
        let r = &self.receipt;
        let d = &self.report.dropped;
        format!(
            "snapshot {} written: {} observations from {} systems at {}\n\
             systems: {} attempted, {} failed\n\
             dropped entities: {} missing coordinates, {} out of bounds, {} missing id, {} duplicate id\n\
             excluded reserved or disabled bikes: {}\n",
            r.snapshot_id,
            r.row_count,
            r.systems.len(),
            r.observed_at,
            self.report.systems_attempted,
            self.report.systems_failed,
            d.missing_coordinates,
            d.out_of_bounds,
            d.missing_id,
            d.duplicate_id,
            self.report.excluded_bikes,
        )
    }
}

fn describe_failure(f: &bikeshare_equity::gbfs::SystemFailure) -> String {
    match &f.feed {
        Some(feed) => format!("{}: {feed}: {}", f.system_id, f.message),
        None => format!("{}: {}", f.system_id, f.message),
    }
}

/// Harvests every catalog system and appends the result as one snapshot.
/// With an output directory configured, diagnostics are also written to
/// `harvest_manifest.json` there.
pub fn cmd_harvest(
    config: &PipelineConfig,
    transport: &dyn Transport,
    clock: &dyn Clock,
) -> Result<HarvestOutcome, CliError> {
    let store_path = config.require_store()?;
    let entries = fetch_catalog(config, transport)?;
    if entries.is_empty() {
        let filter = config
            .country_filter
            .as_deref()
            .map(|c| format!(" for country {c}"))
            .unwrap_or_default();
        return Err(CliError::Usage(format!("catalog lists no systems{filter}; nothing to harvest")));
    }
    let options = HarvestOptions {
        docked_mode: config.docked_count_mode,
        ..Default::default()
    };
    let report = harvest(&entries, transport, clock, &options);
    let failures: Vec<String> = report.failures.iter().map(describe_failure).collect();
    if report.all_failed() {
        return Err(CliError::AllSystemsFailed(failures));
    }
    let store = SnapshotStore::open(store_path).map_err(stage("append_snapshot"))?;
    let observed_at = report
        .observations
        .iter()
        .map(|o| o.observed_at)
        .max()
        .unwrap_or_else(|| clock.now());
    let receipt = store
        .append_at(&report.observations, observed_at)
        .map_err(stage("append_snapshot"))?;

    if let Some(out) = &config.output_dir {
        let d = &report.dropped;
        let manifest = HarvestManifest {
            snapshot_id: receipt.snapshot_id,
            observed_at: receipt.observed_at,
            row_count: receipt.row_count,
            systems_attempted: report.systems_attempted,
            systems_with_observations: report.systems_with_observations,
            systems_failed: report.systems_failed,
            dropped_missing_coordinates: d.missing_coordinates,
            dropped_out_of_bounds: d.out_of_bounds,
            dropped_missing_id: d.missing_id,
            dropped_duplicate_id: d.duplicate_id,
            excluded_bikes: report.excluded_bikes,
            failures: &failures,
        };
        write_json(out, "harvest_manifest.json", &manifest).map_err(stage("write_outputs"))?;
    }

    Ok(HarvestOutcome {
        receipt,
        report,
        warnings: failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub observations: usize,
    pub assigned: usize,
    pub unassigned: usize,
    pub tracts_in_boundaries: usize,
    pub tracts_after_zero_county_filter: usize,
    pub counties_dropped: usize,
    pub tracts_without_demographics: usize,
    pub modeled_tracts: usize,
    pub frame_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRange {
    pub min: f64,
    pub max: f64,
}

/// Everything needed to audit or unscale a run. Contains no timestamps or
/// output paths, so repeated runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub snapshot: String,
    pub diagnostics: Diagnostics,
    /// Raw `(min, max)` of each predictor before scaling to `[0, 1]`.
    pub scaling: BTreeMap<&'static str, ScalingRange>,
    pub fit: FitSummary,
    pub outputs: Vec<&'static str>,
}

#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub table1: Vec<SystemSummary>,
    pub report: CoefficientReport,
    pub manifest: RunManifest,
    pub output_dir: PathBuf,
    pub warnings: Vec<String>,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut body = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    body.push('\n');
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, body: &[u8]) -> Result<(), String> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs the modeling pipeline on one snapshot and writes the report files
/// listed in [`ANALYSIS_FILES`].
pub fn cmd_analyze(config: &PipelineConfig) -> Result<AnalysisOutcome, CliError> {
    let store = config.require_store()?;
    let boundaries = config.require_boundaries()?;
    let demographics_path = config.require_demographics()?;
    let out = config.require_out()?;

    let observations = load_snapshot(store, config.snapshot_selector).map_err(stage("load_snapshot"))?;
    log::info!("loaded {} observations", observations.len());
    let index = load_boundaries(boundaries).map_err(stage("load_boundaries"))?;
    let demographics = File::open(demographics_path)
        .map_err(|e| format!("{}: {e}", demographics_path.display()))
        .and_then(|f| read_demographics(f).map_err(|e| e.to_string()))
        .map_err(stage("read_demographics"))?;

    let (counts, count_diag) = count_by_tract(&observations, &index);
    let kept = filter_zero_counties(&counts);
    if kept.is_empty() {
        return Err(CliError::Stage {
            stage: "filter_zero_counties",
            message: "no county has any bikes; nothing to model".into(),
        });
    }
    let counties_dropped = counties(&counts).len() - counties(&kept).len();
    let (joined, join_diag) = join_demographics(&kept, &demographics).map_err(stage("join_demographics"))?;
    if joined.is_empty() {
        return Err(CliError::Stage {
            stage: "join_demographics",
            message: format!("none of the {} counted tracts has a demographics row", kept.len()),
        });
    }
    let (scaled, scaling) = scale_predictors(&joined).map_err(stage("scale_predictors"))?;
    let frame = build_model_frame(&scaled).map_err(stage("build_model_frame"))?;
    let fit = fit_poisson(&frame.design_matrix(), &frame.responses(), &FitOptions::default())
        .map_err(stage("fit_poisson"))?;
    log::info!("fit converged={} after {} iterations", fit.converged, fit.iterations);
    let report = render_report(&fit).map_err(stage("render_report"))?;
    let table1 = summarize_systems(&observations);

    let mut warnings = Vec::new();
    if count_diag.unassigned > 0 {
        warnings.push(format!("{} observations fell outside every tract", count_diag.unassigned));
    }
    if join_diag.unmatched > 0 {
        warnings.push(format!("{} counted tracts have no demographics row", join_diag.unmatched));
    }

    let manifest = RunManifest {
        snapshot: config.snapshot_selector.to_string(),
        diagnostics: Diagnostics {
            observations: observations.len(),
            assigned: count_diag.assigned,
            unassigned: count_diag.unassigned,
            tracts_in_boundaries: counts.len(),
            tracts_after_zero_county_filter: kept.len(),
            counties_dropped,
            tracts_without_demographics: join_diag.unmatched,
            modeled_tracts: joined.len(),
            frame_rows: frame.len(),
        },
        scaling: Predictor::ALL
            .iter()
            .map(|&p| {
                let (min, max) = scaling.range(p);
                (p.key(), ScalingRange { min, max })
            })
            .collect(),
        fit: FitSummary {
            converged: fit.converged,
            iterations: fit.iterations,
            deviance: fit.deviance,
        },
        outputs: ANALYSIS_FILES.to_vec(),
    };

    let write = || -> Result<(), String> {
        fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
        let mut buf = Vec::new();
        write_system_summary_csv(&mut buf, &table1).map_err(|e| e.to_string())?;
        write_file(out, "table1.csv", &buf)?;
        buf.clear();
        report.write_csv(&mut buf).map_err(|e| e.to_string())?;
        write_file(out, "table2.csv", &buf)?;
        write_file(out, "table2.txt", report.to_text().as_bytes())?;
        buf.clear();
        frame.write_csv(&mut buf).map_err(|e| e.to_string())?;
        write_file(out, "model_frame.csv", &buf)?;
        write_json(out, "run_manifest.json", &manifest)
    };
    write().map_err(stage("write_outputs"))?;

    Ok(AnalysisOutcome {
        table1,
        report,
        manifest,
        output_dir: out.to_path_buf(),
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct MapOutcome {
    pub path: PathBuf,
    pub markers: usize,
    pub systems: usize,
    pub warnings: Vec<String>,
}

/// Writes `map.svg`, a lon/lat scatter of the selected snapshot.
pub fn cmd_map(config: &PipelineConfig) -> Result<MapOutcome, CliError> {
    let store = config.require_store()?;
    let out = config.require_out()?;
    let observations = load_snapshot(store, config.snapshot_selector).map_err(stage("load_snapshot"))?;
    let svg = render_map(&observations);
    let path = out.join("map.svg");
    fs::create_dir_all(out)
        .and_then(|_| fs::write(&path, svg))
        .map_err(|e| format!("{}: {e}", path.display()))
        .map_err(stage("write_outputs"))?;
    let mut warnings = Vec::new();
    if observations.is_empty() {
        warnings.push("snapshot has no observations; the map shows axes only".to_string());
    }
    let systems: BTreeSet<&str> = observations.iter().map(|o| o.system_id.as_str()).collect();
    Ok(MapOutcome {
        path,
        markers: observations.len(),
        systems: systems.len(),
        warnings,
    })
}
