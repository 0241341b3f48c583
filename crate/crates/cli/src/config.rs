//! Run configuration: a `key=value` file, command-line overrides and the
//! HTTP timeout environment variable.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use bikeshare_equity::gbfs::{DockedCountMode, HttpTransport};
use bikeshare_equity::snapshot::SnapshotSelector;
use thiserror::Error;

/// Seconds; overrides the config file and the built-in 15 s default.
pub const HTTP_TIMEOUT_ENV: &str = "BIKESHARE_HTTP_TIMEOUT_SECS";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Syntax { path: PathBuf, line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("missing required setting `{0}` (pass --{0} or set it in the config file)")]
    Missing(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Catalog CSV location: an http(s) or file URL, or a local path.
    pub catalog_source: Option<String>,
    pub country_filter: Option<String>,
    pub store_path: Option<PathBuf>,
    pub boundaries_path: Option<PathBuf>,
    pub demographics_path: Option<PathBuf>,
    pub snapshot_selector: SnapshotSelector,
    pub docked_count_mode: DockedCountMode,
    pub output_dir: Option<PathBuf>,
    pub http_timeout: Duration,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            catalog_source: None,
            country_filter: None,
            store_path: None,
            boundaries_path: None,
            demographics_path: None,
            snapshot_selector: SnapshotSelector::Latest,
            docked_count_mode: DockedCountMode::Stations,
            output_dir: None,
            http_timeout: HttpTransport::DEFAULT_TIMEOUT,
        }
    }
}

/// Settings given on the command line; `None` leaves the file value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub catalog: Option<String>,
    pub country: Option<String>,
    pub store: Option<PathBuf>,
    pub boundaries: Option<PathBuf>,
    pub demographics: Option<PathBuf>,
    pub snapshot: Option<String>,
    pub docked_mode: Option<String>,
    pub out: Option<PathBuf>,
}

fn non_empty(key: &str, value: &str) -> Result<String, ConfigError> {
    let v = value.trim();
    if v.is_empty() {
        return Err(ConfigError::Value {
            key: key.into(),
            message: "must not be empty".into(),
        });
    }
    Ok(v.to_string())
}

fn parse_timeout(key: &str, value: &str) -> Result<Duration, ConfigError> {
    let secs: f64 = value.trim().parse().map_err(|_| ConfigError::Value {
        key: key.into(),
        message: format!("{value:?} is not a number of seconds"),
    })?;
    if !(secs > 0.0 && secs.is_finite()) {
        return Err(ConfigError::Value {
            key: key.into(),
            message: "timeout must be positive".into(),
        });
    }
    Ok(Duration::from_secs_f64(secs))
}

impl PipelineConfig {
    /// Applies one setting. Relative paths are taken relative to `base`.
    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), ConfigError> {
        let path = |v: &str| -> Result<PathBuf, ConfigError> { Ok(base.join(non_empty(key, v)?)) };
        match key {
            "catalog" => {
                let v = non_empty(key, value)?;
                let is_url = ["http://", "https://", "file://"].iter().any(|p| v.starts_with(p));
                self.catalog_source = Some(if is_url {
                    v
                } else {
                    base.join(v).to_string_lossy().into_owned()
                });
            }
            "country" => self.country_filter = Some(non_empty(key, value)?),
            "store" => self.store_path = Some(path(value)?),
            "boundaries" => self.boundaries_path = Some(path(value)?),
            "demographics" => self.demographics_path = Some(path(value)?),
            "out" => self.output_dir = Some(path(value)?),
            "snapshot" => {
                self.snapshot_selector = value.parse().map_err(|message| ConfigError::Value {
                    key: key.into(),
                    message,
                })?
            }
            "docked_mode" => {
                self.docked_count_mode = value.parse().map_err(|message| ConfigError::Value {
                    key: key.into(),
                    message,
                })?
            }
            "http_timeout_secs" => self.http_timeout = parse_timeout(key, value)?,
            _ => {
                return Err(ConfigError::Value {
                    key: key.into(),
                    message: "unknown setting".into(),
                })
            }
        }
        Ok(())
    }

    /// Parses a config file body. Blank lines and `#` comments are skipped;
    /// keys may use `-` or `_`.
    pub fn from_key_values(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut config = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key=value, got {line:?}")))?;
            let key = key.trim().replace('-', "_");
            config.set(&key, value, base).map_err(|e| syntax(e.to_string()))?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_key_values(&text, path)
    }

    /// Command-line values win over the file; flag paths stay as given.
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        let here = Path::new("");
        let pairs: [(&str, Option<String>); 8] = [
            ("catalog", o.catalog.clone()),
            ("country", o.country.clone()),
            ("store", o.store.as_ref().map(|p| p.to_string_lossy().into_owned())),
            ("boundaries", o.boundaries.as_ref().map(|p| p.to_string_lossy().into_owned())),
            ("demographics", o.demographics.as_ref().map(|p| p.to_string_lossy().into_owned())),
            ("snapshot", o.snapshot.clone()),
            ("docked_mode", o.docked_mode.clone()),
            ("out", o.out.as_ref().map(|p| p.to_string_lossy().into_owned())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                self.set(key, &v, here)?;
            }
        }
        Ok(())
    }

    /// Replaces the HTTP timeout with the environment value, if set.
    pub fn apply_timeout_env(&mut self, value: Option<&str>) -> Result<(), ConfigError> {
        if let Some(v) = value {
            self.http_timeout = parse_timeout(HTTP_TIMEOUT_ENV, v)?;
        }
        Ok(())
    }

    /// File, then flags, then the environment.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut config = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        config.apply(overrides)?;
        config.apply_timeout_env(std::env::var(HTTP_TIMEOUT_ENV).ok().as_deref())?;
        Ok(config)
    }

    pub fn require_catalog(&self) -> Result<&str, ConfigError> {
        self.catalog_source.as_deref().ok_or(ConfigError::Missing("catalog"))
    }

    pub fn require_store(&self) -> Result<&Path, ConfigError> {
        self.store_path.as_deref().ok_or(ConfigError::Missing("store"))
    }

    pub fn require_boundaries(&self) -> Result<&Path, ConfigError> {
        self.boundaries_path.as_deref().ok_or(ConfigError::Missing("boundaries"))
    }

    pub fn require_demographics(&self) -> Result<&Path, ConfigError> {
        self.demographics_path.as_deref().ok_or(ConfigError::Missing("demographics"))
    }

    pub fn require_out(&self) -> Result<&Path, ConfigError> {
        self.output_dir.as_deref().ok_or(ConfigError::Missing("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_resolve_against_its_directory() {
        let cfg = PipelineConfig::from_key_values(
            "# run settings\ncatalog = systems.csv\ncountry=US\nstore=data/store\n\
             docked-mode = available_bikes\nsnapshot = 3\nhttp_timeout_secs = 2.5\n",
            Path::new("/etc/bike/run.conf"),
        )
        .unwrap();
        assert_eq!(cfg.catalog_source.as_deref(), Some("/etc/bike/systems.csv"));
        assert_eq!(cfg.store_path, Some(PathBuf::from("/etc/bike/data/store")));
        assert_eq!(cfg.country_filter.as_deref(), Some("US"));
        assert_eq!(cfg.docked_count_mode, DockedCountMode::AvailableBikes);
        assert_eq!(cfg.snapshot_selector, SnapshotSelector::Id(3));
        assert_eq!(cfg.http_timeout, Duration::from_millis(2500));
    }

    #[test]
    fn urls_are_not_joined() {
        let cfg = PipelineConfig::from_key_values("catalog=https://x.test/c.csv", Path::new("/a/b.conf")).unwrap();
        assert_eq!(cfg.catalog_source.as_deref(), Some("https://x.test/c.csv"));
    }

    #[test]
    fn flags_override_file_and_env_overrides_timeout() {
        let mut cfg = PipelineConfig::from_key_values("country=CA\nstore=s\n", Path::new("c.conf")).unwrap();
        cfg.apply(&Overrides {
            country: Some("US".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.country_filter.as_deref(), Some("US"));
        assert_eq!(cfg.store_path, Some(PathBuf::from("s")));
        cfg.apply_timeout_env(Some("4")).unwrap();
        assert_eq!(cfg.http_timeout, Duration::from_secs(4));
        assert!(cfg.apply_timeout_env(Some("-1")).is_err());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = PipelineConfig::from_key_values("country=US\nnonsense\n", Path::new("c.conf")).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }), "{err}");
        let err = PipelineConfig::from_key_values("colour=red\n", Path::new("c.conf")).unwrap_err();
        assert!(err.to_string().contains("unknown setting"), "{err}");
        let err = PipelineConfig::from_key_values("store=\n", Path::new("c.conf")).unwrap_err();
        assert!(err.to_string().contains("must not be empty"), "{err}");
    }

    #[test]
    fn defaults() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.docked_count_mode, DockedCountMode::Stations);
        assert_eq!(cfg.snapshot_selector, SnapshotSelector::Latest);
        assert_eq!(cfg.http_timeout, Duration::from_secs(15));
        assert_eq!(cfg.require_store(), Err(ConfigError::Missing("store")));
    }
}
