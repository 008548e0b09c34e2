//! Inspection report schema and the on-disk session store.
//!
//! A session lives in `<root>/<session id>/`: `report.json` is written once
//! and never modified, and human labels are appended to `labels.jsonl`.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::waypoint::{OccupancyCostMap, WaypointCandidate};

pub const NO_FOD: &str = "No FOD";
pub const NOT_SURE: &str = "Not sure";
pub const MIXED_FOD: &str = "Mixed FOD";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFod {
    pub fod_type: String,
    pub centroid: Point3,
}

/// Top-down cost map window around a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapCrop {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u8>,
}

impl MapCrop {
    /// Square window of `half_size` meters around `center`, clipped to the map.
    pub fn around(map: &OccupancyCostMap, center: [f64; 2], half_size: f64) -> Option<Self> {
        let lo = map.to_grid([center[0] - half_size, center[1] - half_size]);
        let hi = map.to_grid([center[0] + half_size, center[1] + half_size]);
        let x0 = lo[0].floor().max(0.0) as usize;
        let y0 = lo[1].floor().max(0.0) as usize;
        let x1 = (hi[0].ceil().max(0.0) as usize).min(map.width);
        let y1 = (hi[1].ceil().max(0.0) as usize).min(map.height);
        if x0 >= x1 || y0 >= y1 {
            return None;
        }
        let mut cells = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 {
            for x in x0..x1 {
                cells.push(map.get(x, y));
            }
        }
        Some(Self {
            origin: [
                map.origin[0] + x0 as f64 * map.resolution,
                map.origin[1] + y0 as f64 * map.resolution,
            ],
            resolution: map.resolution,
            width: x1 - x0,
            height: y1 - y0,
            cells,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCandidate {
    pub id: usize,
    pub centroid: Point3,
    pub point_count: usize,
    pub point_count_weighted: u64,
    pub max_score: f64,
    pub points: Vec<Point3>,
    pub waypoint: Option<WaypointCandidate>,
    #[serde(default)]
    pub crop: Option<MapCrop>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub candidate_id: usize,
    pub labels: Vec<String>,
    pub reviewer: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionReport {
    pub session_id: String,
    pub created_ms: u64,
    /// Configuration the session was produced with.
    pub config: serde_json::Value,
    /// Reviewer label choices besides "No FOD" and "Not sure".
    pub vocabulary: Vec<String>,
    pub candidates: Vec<ReportCandidate>,
    #[serde(default)]
    pub ground_truth: Option<Vec<GroundTruthFod>>,
    #[serde(default)]
    pub labels: Vec<LabelRecord>,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl InspectionReport {
    /// Allowed labels: the vocabulary followed by "No FOD" and "Not sure".
    pub fn label_set(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in self.vocabulary.iter().map(String::as_str).chain([NO_FOD, NOT_SURE]) {
            if !out.iter().any(|o| o == l) {
                out.push(l.to_string());
            }
        }
        out
    }

    pub fn candidate(&self, id: usize) -> Option<&ReportCandidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    /// Checks a label record against this report's candidates and labels.
    pub fn check_label(&self, rec: &LabelRecord) -> Result<()> {
        if self.candidate(rec.candidate_id).is_none() {
            return Err(Error::param(format!("unknown candidate {}", rec.candidate_id)));
        }
        if rec.reviewer.trim().is_empty() {
            return Err(Error::param("reviewer must not be empty"));
        }
        if rec.labels.is_empty() {
            return Err(Error::param("at least one label is required"));
        }
        let allowed = self.label_set();
        for l in &rec.labels {
            if !allowed.contains(l) {
                return Err(Error::param(format!("label '{l}' is not in the session vocabulary")));
            }
        }
        Ok(())
    }

    /// Latest label per (candidate, reviewer), ordered by first submission.
    pub fn current_labels(&self) -> Vec<LabelRecord> {
        dedupe_labels(&self.labels)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Last write wins per (candidate, reviewer); the surviving record keeps the
/// position of the first one.
pub fn dedupe_labels(records: &[LabelRecord]) -> Vec<LabelRecord> {
    let mut slot: HashMap<(usize, &str), usize> = HashMap::new();
    let mut out: Vec<LabelRecord> = Vec::new();
    for r in records {
        match slot.get(&(r.candidate_id, r.reviewer.as_str())) {
            Some(&i) => out[i] = r.clone(),
            None => {
                slot.insert((r.candidate_id, r.reviewer.as_str()), out.len());
                out.push(r.clone());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub created_ms: u64,
    pub candidates: usize,
    pub labeled_candidates: usize,
    pub has_ground_truth: bool,
}

/// Directory of sessions with serialized label appends per session.
#[derive(Debug)]
pub struct ReportStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl ReportStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::MissingArtifact(format!("report store {}", root.display())));
        }
        Ok(Self {
            root,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf> {
        if !valid_id(id) {
            return Err(Error::param(format!("invalid session id '{id}'")));
        }
        Ok(self.root.join(id))
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut m = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        m.entry(id.to_string()).or_default().clone()
    }

    /// Writes a new session. Fails if the session already exists.
    pub fn create(&self, report: &InspectionReport) -> Result<()> {
        let dir = self.dir(&report.session_id)?;
        if dir.join("report.json").exists() {
            return Err(Error::Config(format!("session '{}' already exists", report.session_id)));
        }
        fs::create_dir_all(&dir)?;
        let mut base = report.clone();
        let labels = std::mem::take(&mut base.labels);
        let tmp = dir.join("report.json.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(base.to_json()?.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, dir.join("report.json"))?;
        for l in &labels {
            self.append_label(&report.session_id, l.clone())?;
        }
        Ok(())
    }

    pub fn session_ids(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for e in fs::read_dir(&self.root)? {
            let e = e?;
            let name = e.file_name().to_string_lossy().into_owned();
            if valid_id(&name) && e.path().join("report.json").is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn list(&self) -> Result<Vec<SessionSummary>> {
        self.session_ids()?
            .into_iter()
            .map(|id| {
                let r = self.load(&id)?;
                let labeled: HashSet<usize> = r.labels.iter().map(|l| l.candidate_id).collect();
                Ok(SessionSummary {
                    session_id: id,
                    created_ms: r.created_ms,
                    candidates: r.candidates.len(),
                    labeled_candidates: labeled.len(),
                    has_ground_truth: r.ground_truth.is_some(),
                })
            })
            .collect()
    }

    /// Report with its current (deduplicated) labels.
    pub fn load(&self, id: &str) -> Result<InspectionReport> {
        let dir = self.dir(id)?;
        let path = dir.join("report.json");
        if !path.is_file() {
            return Err(Error::MissingArtifact(format!("session '{id}'")));
        }
        let mut report = InspectionReport::from_json(&fs::read_to_string(&path)?)?;
        report.labels = dedupe_labels(&self.raw_labels(id)?);
        Ok(report)
    }

    /// Every label record ever appended, in order.
    pub fn raw_labels(&self, id: &str) -> Result<Vec<LabelRecord>> {
        let path = self.dir(id)?.join("labels.jsonl");
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line)?);
        }
        Ok(out)
    }

    /// Validates and durably appends a label; returns once it is on disk.
    pub fn append_label(&self, id: &str, record: LabelRecord) -> Result<LabelRecord> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let dir = self.dir(id)?;
        let report_path = dir.join("report.json");
        if !report_path.is_file() {
            return Err(Error::MissingArtifact(format!("session '{id}'")));
        }
        let report = InspectionReport::from_json(&fs::read_to_string(report_path)?)?;
        report.check_label(&record)?;
        let mut f = OpenOptions::new().create(true).append(true).open(dir.join("labels.jsonl"))?;
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.sync_all()?;
        Ok(record)
    }
}
