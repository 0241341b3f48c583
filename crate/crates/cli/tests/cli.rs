use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bikeshare_cli::*;
use bikeshare_equity::gbfs::{FixedClock, StaticTransport};
use bikeshare_equity::synth::{synthetic_city, SyntheticCityConfig};

fn city_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic_city")
}

fn gbfs_fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/gbfs")
}

fn bikeshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bikeshare"))
        .args(args)
        .env_remove(HTTP_TIMEOUT_ENV)
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files_in(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

/// Set `BIKESHARE_REGENERATE_FIXTURES=1` to rewrite the bundled city.
#[test]
fn bundled_city_matches_generator() {
    let city = synthetic_city(&SyntheticCityConfig::default());
    if std::env::var_os("BIKESHARE_REGENERATE_FIXTURES").is_some() {
        let _ = fs::remove_dir_all(city_dir());
        city.write_to_dir(&city_dir()).unwrap();
    }
    let fresh = tempfile::tempdir().unwrap();
    city.write_to_dir(fresh.path()).unwrap();
    let bundled = files_in(&city_dir());
    let generated = files_in(fresh.path());
    assert_eq!(bundled.len(), generated.len());
    for (a, b) in bundled.iter().zip(&generated) {
        assert_eq!(a.strip_prefix(city_dir()).unwrap(), b.strip_prefix(fresh.path()).unwrap());
        assert!(fs::read(a).unwrap() == fs::read(b).unwrap(), "{} is stale", a.display());
    }
}

fn city_config(out: &Path) -> PipelineConfig {
    PipelineConfig {
        store_path: Some(city_dir().join("store")),
        boundaries_path: Some(city_dir().join("boundaries.geojson")),
        demographics_path: Some(city_dir().join("demographics.csv")),
        output_dir: Some(out.to_path_buf()),
        ..Default::default()
    }
}

#[test]
fn analyze_recovers_the_generating_model() {
    let out = tempfile::tempdir().unwrap();
    let outcome = cmd_analyze(&city_config(out.path())).unwrap();
    let truth = fs::read_to_string(city_dir().join("truth.csv")).unwrap();
    let betas: Vec<f64> = truth.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(outcome.report.rows.len(), 12);
    for (row, beta) in outcome.report.rows.iter().zip(betas) {
        let se = row.estimate / row.z_statistic;
        assert!((row.estimate - beta).abs() < 3.0 * se, "{}: {} vs {beta}", row.predictor, row.estimate);
    }
    let d = &outcome.manifest.diagnostics;
    assert_eq!(d.modeled_tracts, 300);
    assert_eq!(d.frame_rows, 600);
    assert_eq!(d.unassigned, 3);
    assert_eq!(d.counties_dropped, 1);
    assert_eq!(d.tracts_without_demographics, 3);
    assert_eq!(outcome.warnings.len(), 2);
    for name in ANALYSIS_FILES {
        assert!(out.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn analyze_names_the_failing_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let demo = tmp.path().join("demo.csv");
    fs::write(&demo, "tract_geoid,pct_college,pct_poverty,pct_nonwhite,pop_density,job_density\n99999000100,0.1,0.2,0.3,10,20\n").unwrap();
    let mut cfg = city_config(&tmp.path().join("out"));
    cfg.demographics_path = Some(demo);
    let err = cmd_analyze(&cfg).unwrap_err();
    assert_eq!(err.stage(), Some("join_demographics"));
    assert_eq!(err.exit_code(), 1);

    cfg.demographics_path = Some(tmp.path().join("missing.csv"));
    assert_eq!(cmd_analyze(&cfg).unwrap_err().stage(), Some("read_demographics"));

    cfg.store_path = Some(tmp.path().join("no-store"));
    assert_eq!(cmd_analyze(&cfg).unwrap_err().stage(), Some("load_snapshot"));

    let missing = PipelineConfig::default();
    assert!(matches!(cmd_analyze(&missing), Err(CliError::Config(ConfigError::Missing("store")))));
}

fn fixture_transport() -> StaticTransport {
    let mut t = StaticTransport::new();
    for dir in ["conforming", "deviant"] {
        for entry in fs::read_dir(gbfs_fixtures().join(dir)).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_str().unwrap().to_string();
            t.insert(&format!("https://fixtures.test/{dir}/{name}"), fs::read(&path).unwrap());
        }
    }
    t
}

fn catalog_config(store: &Path) -> PipelineConfig {
    PipelineConfig {
        catalog_source: Some(gbfs_fixtures().join("catalog.csv").to_string_lossy().into_owned()),
        store_path: Some(store.to_path_buf()),
        ..Default::default()
    }
}

#[test]
fn harvest_survives_a_dead_system() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = catalog_config(&tmp.path().join("store"));
    cfg.output_dir = Some(tmp.path().join("out"));
    let outcome = cmd_harvest(&cfg, &fixture_transport(), &FixedClock(1_560_000_000)).unwrap();
    assert_eq!(outcome.receipt.row_count, 8);
    assert_eq!(outcome.receipt.systems, ["bridgetown_dockless", "rose_city_bikes"]);
    assert_eq!(outcome.warnings.len(), 1);
    assert!(outcome.warnings[0].starts_with("lac_velo:"), "{}", outcome.warnings[0]);
    let manifest = fs::read_to_string(tmp.path().join("out/harvest_manifest.json")).unwrap();
    assert!(manifest.contains("\"systems_failed\": 1"), "{manifest}");
    assert!(manifest.contains("\"dropped_out_of_bounds\": 1"), "{manifest}");
}

#[test]
fn harvest_refuses_empty_and_dead_catalogs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = catalog_config(&tmp.path().join("store"));
    cfg.country_filter = Some("ZZ".into());
    let err = cmd_harvest(&cfg, &fixture_transport(), &FixedClock(0)).unwrap_err();
    assert!(matches!(err, CliError::Usage(_)), "{err}");
    assert_eq!(err.exit_code(), 2);

    cfg.country_filter = None;
    let err = cmd_harvest(&cfg, &StaticTransport::new(), &FixedClock(0)).unwrap_err();
    assert!(matches!(&err, CliError::AllSystemsFailed(f) if f.len() == 3), "{err}");
    assert_eq!(err.exit_code(), 1);
    assert!(!tmp.path().join("store/manifest.csv").exists());
}

/// A one-system catalog served from `file://` URLs: three stations and two
/// rentable bikes.
fn local_system(dir: &Path) -> PathBuf {
    let feeds = dir.join("feeds");
    fs::create_dir_all(&feeds).unwrap();
    fs::write(
        feeds.join("gbfs.json"),
        r#"{"last_updated":1560000000,"ttl":0,"data":{"en":{"feeds":[
            {"name":"station_information","url":"station_information.json"},
            {"name":"free_bike_status","url":"free_bike_status.json"}]}}}"#,
    )
    .unwrap();
    fs::write(
        feeds.join("station_information.json"),
        r#"{"data":{"stations":[
            {"station_id":"1","name":"A","lat":45.52,"lon":-122.68},
            {"station_id":"2","name":"B","lat":45.53,"lon":-122.66},
            {"station_id":"3","name":"C","lat":45.51,"lon":-122.65}]}}"#,
    )
    .unwrap();
    fs::write(
        feeds.join("free_bike_status.json"),
        r#"{"data":{"bikes":[
            {"bike_id":"x","lat":45.515,"lon":-122.67},
            {"bike_id":"y","lat":45.525,"lon":-122.69,"is_reserved":false},
            {"bike_id":"z","lat":45.535,"lon":-122.64,"is_disabled":true}]}}"#,
    )
    .unwrap();
    let url = url_of(&feeds.join("gbfs.json"));
    let catalog = dir.join("catalog.csv");
    fs::write(
        &catalog,
        format!("system_id,country_code,name,auto_discovery_url\nlocal,US,Local Bikes,{url}\n"),
    )
    .unwrap();
    catalog
}

fn url_of(path: &Path) -> String {
    format!("file://{}", path.canonicalize().unwrap().display())
}

#[test]
fn binary_harvest_then_map() {
    let tmp = tempfile::tempdir().unwrap();
    let catalog = local_system(tmp.path());
    let store = tmp.path().join("store");
    let run = bikeshare(&["harvest", "--catalog", catalog.to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert!(run.status.success(), "{}", text(&run.stderr));
    assert!(text(&run.stdout).contains("snapshot 1 written: 5 observations from 1 systems"), "{}", text(&run.stdout));

    let out = tmp.path().join("out");
    let run = bikeshare(&["map", "--store", store.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", text(&run.stderr));
    let svg = fs::read_to_string(out.join("map.svg")).unwrap();
    assert_eq!(svg.matches("class=\"marker ").count(), 5);
    assert_eq!(svg.matches("class=\"marker docked\"").count(), 3);
    assert_eq!(svg.matches("class=\"marker free\"").count(), 2);
    assert!(svg.contains("5 observations"));
}

#[test]
fn map_of_an_empty_snapshot_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("store");
    bikeshare_equity::snapshot::append_snapshot(&[], &store).unwrap();
    let out = tmp.path().join("out");
    let run = bikeshare(&["map", "--store", store.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success());
    assert!(text(&run.stderr).contains("warning: snapshot has no observations"));
    let svg = fs::read_to_string(out.join("map.svg")).unwrap();
    assert_eq!(svg.matches("class=\"marker ").count(), 0);
    assert!(svg.contains("class=\"axis\""));
}

#[test]
fn binary_catalog_with_config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("run.conf");
    let catalog = gbfs_fixtures().join("catalog.csv");
    fs::write(&conf, format!("catalog = {}\ncountry = CA\n", catalog.display())).unwrap();

    let run = bikeshare(&["catalog", "--config", conf.to_str().unwrap()]);
    assert!(run.status.success(), "{}", text(&run.stderr));
    assert!(text(&run.stdout).ends_with("1 system\n"), "{}", text(&run.stdout));

    let run = bikeshare(&["catalog", "--config", conf.to_str().unwrap(), "--country", "US"]);
    let stdout = text(&run.stdout);
    assert!(stdout.ends_with("2 systems\n"), "{stdout}");
    assert!(stdout.contains("rose_city_bikes") && stdout.contains("bridgetown_dockless"));
    assert!(!stdout.contains("lac_velo"));
}

#[test]
fn binary_failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let run = bikeshare(&["catalog", "--catalog", tmp.path().join("absent.csv").to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(text(&run.stderr).contains("fetch_system_catalog"), "{}", text(&run.stderr));

    let run = bikeshare(&["analyze"]);
    assert_eq!(run.status.code(), Some(2));
    assert!(text(&run.stderr).contains("--store"));

    let run = Command::new(env!("CARGO_BIN_EXE_bikeshare"))
        .args(["catalog", "--catalog", "x.csv"])
        .env(HTTP_TIMEOUT_ENV, "soon")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
    assert!(text(&run.stderr).contains(HTTP_TIMEOUT_ENV));

    let dead = tmp.path().join("dead.csv");
    fs::write(&dead, "system_id,country_code,name,auto_discovery_url\nd,US,D,file:///nonexistent/gbfs.json\n").unwrap();
    let run = bikeshare(&["harvest", "--catalog", dead.to_str().unwrap(), "--store", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(text(&run.stderr).contains("all 1 systems failed"), "{}", text(&run.stderr));
}

#[test]
fn binary_analyze_writes_reports() {
    let out = tempfile::tempdir().unwrap();
    let dir = city_dir();
    let run = bikeshare(&[
        "analyze",
        "--store", dir.join("store").to_str().unwrap(),
        "--boundaries", dir.join("boundaries.geojson").to_str().unwrap(),
        "--demographics", dir.join("demographics.csv").to_str().unwrap(),
        "--out", out.path().to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", text(&run.stderr));
    assert!(text(&run.stdout).contains("300 tracts modeled"));
    assert!(text(&run.stderr).contains("warning: 3 observations fell outside every tract"));
    let table2 = fs::read_to_string(out.path().join("table2.csv")).unwrap();
    assert_eq!(table2.lines().count(), 13);
}
