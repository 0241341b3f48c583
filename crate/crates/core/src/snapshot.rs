//! Append-only archive of harvested observations.
//!
//! A store is a directory holding one immutable CSV per snapshot plus a
//! `manifest.csv` index with one line per snapshot:
//! `snapshot_id,observed_at,row_count,filename`. Files are written to a
//! temporary name and renamed into place, so readers never see a partial
//! snapshot.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::gbfs::{read_observations_csv, write_observations_csv, BikeObservation, DockingType};

const MANIFEST: &str = "manifest.csv";
const LOCK: &str = ".append.lock";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no snapshot matches selector `{0}`")]
    NotFound(SnapshotSelector),
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error("store {0} is locked by another writer (remove {LOCK} if no append is running)")]
    Locked(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotReceipt {
    pub snapshot_id: u64,
    pub observed_at: i64,
    pub row_count: usize,
    pub systems: Vec<String>,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub snapshot_id: u64,
    pub observed_at: i64,
    pub row_count: usize,
    pub filename: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotSelector {
    Latest,
    Id(u64),
    /// Snapshots whose `observed_at` lies in `from..=to`.
    TimeRange { from: i64, to: i64 },
}

impl fmt::Display for SnapshotSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotSelector::Latest => f.write_str("latest"),
            SnapshotSelector::Id(id) => write!(f, "{id}"),
            SnapshotSelector::TimeRange { from, to } => write!(f, "{from}..{to}"),
        }
    }
}

impl FromStr for SnapshotSelector {
    type Err = String;

    /// Accepts `latest`, a snapshot id (`7` or `id:7`) or an inclusive
    /// epoch-second range `FROM..TO`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("latest") {
            return Ok(SnapshotSelector::Latest);
        }
        if let Some((from, to)) = s.trim_start_matches("range:").split_once("..") {
            let parse = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("bad range bound {v:?}: {e}"));
            let (from, to) = (parse(from)?, parse(to)?);
            if from > to {
                return Err(format!("empty range {from}..{to}"));
            }
            return Ok(SnapshotSelector::TimeRange { from, to });
        }
        s.trim_start_matches("id:")
            .parse::<u64>()
            .map(SnapshotSelector::Id)
            .map_err(|_| format!("bad snapshot selector {s:?} (expected latest, an id, or FROM..TO)"))
    }
}

/// Handle on a store directory.
#[derive(Debug, Clone)]
pub struct SnapshotStore {
    root: PathBuf,
}

struct AppendLock(PathBuf);

impl Drop for AppendLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

impl SnapshotStore {
    /// Opens (creating if needed) the store at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(SnapshotStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> Result<Vec<ManifestEntry>, StoreError> {
        let path = self.root.join(MANIFEST);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| {
                let bad = || StoreError::Corrupt(format!("manifest line {}: {line:?}", i + 1));
                let mut parts = line.split(',');
                let mut next = || parts.next().map(str::trim).ok_or_else(bad);
                let entry = ManifestEntry {
                    snapshot_id: next()?.parse().map_err(|_| bad())?,
                    observed_at: next()?.parse().map_err(|_| bad())?,
                    row_count: next()?.parse().map_err(|_| bad())?,
                    filename: next()?.to_string(),
                };
                Ok(entry)
            })
            .collect()
    }

    /// Writes `observations` as a new snapshot stamped with the latest
    /// observation time (or the wall clock for an empty list).
    pub fn append(&self, observations: &[BikeObservation]) -> Result<SnapshotReceipt, StoreError> {
        let observed_at = observations
            .iter()
            .map(|o| o.observed_at)
            .max()
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs() as i64)
                    .unwrap_or(0)
            });
        self.append_at(observations, observed_at)
    }

    pub fn append_at(
        &self,
        observations: &[BikeObservation],
        observed_at: i64,
    ) -> Result<SnapshotReceipt, StoreError> {
        let _lock = self.lock()?;
        let manifest = self.manifest()?;
        let snapshot_id = manifest.iter().map(|e| e.snapshot_id).max().unwrap_or(0) + 1;
        let filename = format!("snapshot-{snapshot_id:06}.csv");

        let mut body = Vec::new();
        write_observations_csv(&mut body, observations)
            .map_err(|e| StoreError::Corrupt(format!("serializing snapshot: {e}")))?;
        self.write_atomically(&filename, &body)?;

        let mut index = Vec::new();
        for e in manifest.iter().chain(std::iter::once(&ManifestEntry {
            snapshot_id,
            observed_at,
            row_count: observations.len(),
            filename: filename.clone(),
        })) {
            writeln!(index, "{},{},{},{}", e.snapshot_id, e.observed_at, e.row_count, e.filename)
                .expect("write to vec");
        }
        if let Err(e) = self.write_atomically(MANIFEST, &index) {
            let _ = fs::remove_file(self.root.join(&filename));
            return Err(e);
        }

        let systems: BTreeSet<&str> = observations.iter().map(|o| o.system_id.as_str()).collect();
        Ok(SnapshotReceipt {
            snapshot_id,
            observed_at,
            row_count: observations.len(),
            systems: systems.into_iter().map(str::to_string).collect(),
        })
    }

    /// Loads the rows of the matching snapshot(s). When several snapshots
    /// match, rows are deduplicated on `(system_id, entity_id, docking_type)`
    /// keeping the latest `observed_at`.
    pub fn load(&self, selector: SnapshotSelector) -> Result<Vec<BikeObservation>, StoreError> {
        let mut manifest = self.manifest()?;
        manifest.sort_by_key(|e| e.snapshot_id);
        let selected: Vec<&ManifestEntry> = match selector {
            SnapshotSelector::Latest => manifest.last().into_iter().collect(),
            SnapshotSelector::Id(id) => manifest.iter().filter(|e| e.snapshot_id == id).collect(),
            SnapshotSelector::TimeRange { from, to } => manifest
                .iter()
                .filter(|e| (from..=to).contains(&e.observed_at))
                .collect(),
        };
        if selected.is_empty() {
            return Err(StoreError::NotFound(selector));
        }

        let mut rows: Vec<BikeObservation> = Vec::new();
        let mut position: HashMap<(String, String, DockingType), usize> = HashMap::new();
        for entry in selected {
            let path = self.root.join(&entry.filename);
            let file = File::open(&path).map_err(io_err(&path))?;
            let observations = read_observations_csv(file)
                .map_err(|e| StoreError::Corrupt(format!("{}: {e}", path.display())))?;
            if observations.len() != entry.row_count {
                return Err(StoreError::Corrupt(format!(
                    "{} has {} rows, manifest says {}",
                    entry.filename,
                    observations.len(),
                    entry.row_count
                )));
            }
            for obs in observations {
                let key = (obs.system_id.clone(), obs.entity_id.clone(), obs.docking_type);
                match position.get(&key) {
                    Some(&i) if rows[i].observed_at <= obs.observed_at => rows[i] = obs,
                    Some(_) => {}
                    None => {
                        position.insert(key, rows.len());
                        rows.push(obs);
                    }
                }
            }
        }
        Ok(rows)
    }

    fn lock(&self) -> Result<AppendLock, StoreError> {
        let path = self.root.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(AppendLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(StoreError::Locked(self.root.clone()))
            }
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    fn write_atomically(&self, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        let result = (|| {
            let file = File::create(&tmp)?;
            let mut w = BufWriter::new(file);
            w.write_all(bytes)?;
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            fs::rename(&tmp, &target)
        })();
        result.map_err(|e| {
            let _ = fs::remove_file(&tmp);
            io_err(&target)(e)
        })
    }
}

/// Appends `observations` to the store at `store_path`.
pub fn append_snapshot(
    observations: &[BikeObservation],
    store_path: impl AsRef<Path>,
) -> Result<SnapshotReceipt, StoreError> {
    SnapshotStore::open(store_path)?.append(observations)
}

pub fn load_snapshot(
    store_path: impl AsRef<Path>,
    selector: SnapshotSelector,
) -> Result<Vec<BikeObservation>, StoreError> {
    let path = store_path.as_ref();
    if !path.is_dir() {
        return Err(StoreError::NotFound(selector));
    }
    SnapshotStore { root: path.to_path_buf() }.load(selector)
}
