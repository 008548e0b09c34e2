//! Stage orchestration: reference building, covariance fitting, candidate
//! detection, waypoint planning and report assembly, plus the artifact
//! files that connect the stages.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ReferenceSource};
use crate::covariance::{self, accumulate_scatter, propagate_to_full, smooth_covariances, CovarianceField};
use crate::discrepancy::{score_query, segment_and_cluster, CandidateCluster, Metric, ScoredCloud};
use crate::error::{Error, Result};
use crate::geom::{icp_register, remove_statistical_outliers, sample_mesh, voxel_downsample, Point3, PointCloud, TriangleMesh};
use crate::io;
use crate::reference::{build_from_mesh, build_from_samples, Provenance, ReferenceMap, ReferenceMeta, RegistrationTarget};
use crate::report::{now_ms, GroundTruthFod, InspectionReport, MapCrop, ReportCandidate};
use crate::tuning::{grid_search, CostParams, Trial};
use crate::waypoint::{build_costmap, plan_waypoints, OccupancyCostMap, Waypoint};

/// Sidecar path of a reference cloud: `map.ply` → `map.meta.json`.
pub fn reference_meta_path(cloud_path: &Path) -> PathBuf {
    cloud_path.with_extension("meta.json")
}

pub fn save_reference(path: &Path, reference: &ReferenceMap) -> Result<()> {
    io::write_cloud(path, &reference.cloud().clone().without_weights())?;
    io::write_json(&reference_meta_path(path), &reference.meta())
}

/// Loads a reference cloud and its sidecar. Without a sidecar every point
/// gets count 1.
pub fn load_reference(path: &Path) -> Result<ReferenceMap> {
    let cloud = io::read_cloud(path).map_err(|e| match e {
        Error::MissingArtifact(p) => Error::MissingArtifact(format!("reference {p}")),
        e => e,
    })?;
    let meta_path = reference_meta_path(path);
    if meta_path.exists() {
        ReferenceMap::from_meta(cloud, io::read_json::<ReferenceMeta>(&meta_path)?)
    } else {
        ReferenceMap::from_parts(cloud, None, Provenance::SampleMerge, None)
    }
}

pub fn save_covariance(path: &Path, field: &CovarianceField, config: &covariance::SmoothingConfig) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    covariance::write_field(&mut w, field, Some(config))?;
    w.flush()?;
    Ok(())
}

pub fn load_covariance(path: &Path) -> Result<CovarianceField> {
    let f = File::open(path).map_err(|_| Error::MissingArtifact(format!("covariance {}", path.display())))?;
    Ok(covariance::read_field(&mut BufReader::new(f))?.0)
}

/// Builds the reference from a CAD mesh or from nominal sample scans.
pub fn build_reference(config: &Config, samples: &[PointCloud], cad: Option<&TriangleMesh>) -> Result<ReferenceMap> {
    let rc = &config.reference;
    match rc.source {
        ReferenceSource::Mesh => {
            let mesh = cad.ok_or_else(|| Error::Config("mesh reference needs a CAD mesh".into()))?;
            build_from_mesh(mesh, rc.mesh_points, rc.mesh_seed)
        }
        ReferenceSource::Samples => {
            let cad_cloud = match (rc.target, cad) {
                (RegistrationTarget::Cad, Some(m)) => Some(sample_mesh(m, rc.mesh_points, rc.mesh_seed)?),
                _ => None,
            };
            build_from_samples(samples, rc.target, cad_cloud.as_ref(), &rc.merge_params())
        }
    }
}

/// Fits the covariance field of `reference` from training scans, on a
/// voxel-thinned copy of the reference when configured.
pub fn fit_covariance(config: &Config, reference: &ReferenceMap, training: &[PointCloud]) -> Result<CovarianceField> {
    let cc = &config.covariance;
    let cleaned: Vec<PointCloud> = match cc.training_denoise.params() {
        Some(p) => training
            .iter()
            .map(|t| remove_statistical_outliers(t, p).map(|r| r.0))
            .collect::<Result<_>>()?,
        None => training.to_vec(),
    };
    if cc.reference_voxel > 0.0 {
        let thin = voxel_downsample(&reference.cloud().clone().without_weights(), cc.reference_voxel)?;
        let thin = ReferenceMap::from_parts(thin, None, reference.provenance(), Some(cc.reference_voxel))?;
        let acc = accumulate_scatter(&thin, &cleaned)?;
        let field = smooth_covariances(&thin, &acc, &cc.smoothing)?;
        propagate_to_full(reference.cloud(), &thin, &field)
    } else {
        let acc = accumulate_scatter(reference, &cleaned)?;
        smooth_covariances(reference, &acc, &cc.smoothing)
    }
}

/// Aligns a query scan to the reference with ICP.
pub fn pre_register(config: &Config, query: &PointCloud, reference: &ReferenceMap) -> Result<PointCloud> {
    match config.pipeline.registration.params() {
        Some(p) if config.pipeline.pre_register => {
            let r = icp_register(query, reference.cloud(), p)?;
            Ok(query.transformed(&r.transform))
        }
        _ => Ok(query.clone()),
    }
}

/// Scores a query and clusters it with the configured threshold, cutoff
/// and min count.
pub fn detect_candidates(
    config: &Config,
    reference: &ReferenceMap,
    field: Option<&CovarianceField>,
    query: &PointCloud,
) -> Result<(ScoredCloud, Vec<CandidateCluster>)> {
    let dc = config.discrepancy.to_config();
    let field = match dc.metric {
        Metric::MDistance => field,
        Metric::L2 => None,
    };
    let scored = score_query(query, reference, field, &dc)?;
    let clusters = segment_and_cluster(&scored, dc.threshold, dc.cutoff, dc.min_count)?;
    Ok((scored, clusters))
}

/// Cost maps with and without the query's content, on a shared grid.
pub fn costmaps(config: &Config, reference: &ReferenceMap, query: &PointCloud) -> Result<(OccupancyCostMap, OccupancyCostMap)> {
    let fodless = build_costmap(reference.cloud(), &config.waypoint, None)?;
    let with_query = build_costmap(query, &config.waypoint, Some(&fodless))?;
    Ok((with_query, fodless))
}

fn decimate(points: Vec<Point3>, max: usize) -> Vec<Point3> {
    if max == 0 || points.len() <= max {
        return points;
    }
    let step = points.len() as f64 / max as f64;
    (0..max).map(|i| points[(i as f64 * step) as usize]).collect()
}

/// Everything a run produced before persistence.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scored: ScoredCloud,
    pub clusters: Vec<CandidateCluster>,
    pub waypoints: Vec<Waypoint>,
    pub report: InspectionReport,
}

/// Score → cluster → waypoint on in-memory artifacts.
pub fn run_pipeline(
    config: &Config,
    reference: &ReferenceMap,
    field: Option<&CovarianceField>,
    query: &PointCloud,
    ground_truth: Option<Vec<GroundTruthFod>>,
    session_id: &str,
) -> Result<RunOutput> {
    let aligned = pre_register(config, query, reference).map_err(|e| e.in_stage("registration"))?;
    let (scored, clusters) =
        detect_candidates(config, reference, field, &aligned).map_err(|e| e.in_stage("discrepancy"))?;
    info!("{} candidates from {} scored points", clusters.len(), scored.len());
    let (query_map, fodless) = costmaps(config, reference, &aligned).map_err(|e| e.in_stage("costmap"))?;
    let targets: Vec<Point3> = clusters.iter().map(|c| c.centroid).collect();
    let waypoints =
        plan_waypoints(&query_map, &fodless, &targets, &config.waypoint).map_err(|e| e.in_stage("waypoints"))?;
    let pc = &config.pipeline;
    let candidates = clusters
        .iter()
        .zip(&waypoints)
        .enumerate()
        .map(|(id, (c, w))| ReportCandidate {
            id,
            centroid: c.centroid,
            point_count: c.member_indices.len(),
            point_count_weighted: c.point_count_weighted,
            max_score: c.max_score,
            points: decimate(
                c.member_indices.iter().map(|&i| scored.points[i]).collect(),
                pc.max_points_per_candidate,
            ),
            waypoint: w.waypoint,
            crop: MapCrop::around(&query_map, [c.centroid.x, c.centroid.y], pc.crop_half_size),
        })
        .collect();
    // the snapshot carries a concrete penalty distance so metrics can be
    // recomputed from the report alone
    let mut snapshot = config.clone();
    if snapshot.tuning.penalty_distance <= 0.0 {
        snapshot.tuning.penalty_distance = reference.bbox_diagonal();
    }
    let report = InspectionReport {
        session_id: session_id.to_string(),
        created_ms: now_ms(),
        config: serde_json::to_value(&snapshot)?,
        vocabulary: pc.vocabulary.clone(),
        candidates,
        ground_truth,
        labels: vec![],
    };
    Ok(RunOutput {
        scored,
        clusters,
        waypoints,
        report,
    })
}

/// A labeled validation scan for tuning.
#[derive(Debug, Clone)]
pub struct TuningTrial {
    pub query: PointCloud,
    pub truth: Vec<Point3>,
}

/// Grid-search outcome for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub metric: Metric,
    pub threshold: f64,
    pub cutoff: f64,
    pub min_count: u32,
    pub mean_cost: f64,
    pub lambda: f64,
    pub penalty_distance: f64,
    pub grid_size: usize,
}

impl TuneOutcome {
    /// Copies the tuned parameters into `config`.
    pub fn apply(&self, config: &mut Config) {
        config.discrepancy.metric = self.metric;
        config.discrepancy.threshold = self.threshold;
        config.discrepancy.cutoff = self.cutoff;
        config.discrepancy.min_count = self.min_count;
    }
}

/// Scores every trial once (pre-registered when configured), so the same
/// scores can be tuned repeatedly.
pub fn score_trials(
    config: &Config,
    reference: &ReferenceMap,
    field: Option<&CovarianceField>,
    trials: &[TuningTrial],
) -> Result<Vec<ScoredCloud>> {
    let dc = config.discrepancy.to_config();
    let field = match dc.metric {
        Metric::MDistance => field,
        Metric::L2 => None,
    };
    trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let q = pre_register(config, &t.query, reference)?;
            score_query(&q, reference, field, &dc).map_err(|e| Error::Sample {
                index: i,
                stage: "scoring",
                source: Box::new(e),
            })
        })
        .collect()
}

/// Grid search over pre-scored trials with the grid from `config.tuning`.
pub fn tune_scored(config: &Config, reference: &ReferenceMap, scored: &[ScoredCloud], truth: &[Vec<Point3>]) -> Result<TuneOutcome> {
    let tc = &config.tuning;
    let metric = config.discrepancy.metric;
    let smoothed: Vec<&[f64]> = scored.iter().map(|s| s.smoothed_scores.as_slice()).collect();
    let spec = tc.grid(&smoothed, metric)?;
    let penalty = if tc.penalty_distance > 0.0 {
        tc.penalty_distance
    } else {
        reference.bbox_diagonal()
    };
    let params = CostParams::new(tc.lambda, penalty)?;
    let trials: Vec<Trial<'_>> = scored
        .iter()
        .zip(truth)
        .map(|(s, t)| Trial { scored: s, truth: t })
        .collect();
    let best = grid_search(&trials, &spec, &params)?;
    Ok(TuneOutcome {
        metric,
        threshold: best.threshold,
        cutoff: best.cutoff,
        min_count: best.min_count,
        mean_cost: best.mean_cost,
        lambda: tc.lambda,
        penalty_distance: penalty,
        grid_size: spec.size(),
    })
}

/// Scores the trials and grid-searches threshold, cutoff and min count.
pub fn tune(config: &Config, reference: &ReferenceMap, field: Option<&CovarianceField>, trials: &[TuningTrial]) -> Result<TuneOutcome> {
    let scored = score_trials(config, reference, field, trials)?;
    let truth: Vec<Vec<Point3>> = trials.iter().map(|t| t.truth.clone()).collect();
    tune_scored(config, reference, &scored, &truth)
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::MissingArtifact(format!("{what} (no path configured)")))
}

fn existing<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    let path = required(p, what)?;
    if !path.exists() {
        return Err(Error::MissingArtifact(format!("{what} {}", path.display())));
    }
    Ok(path)
}

/// Full run from the artifact paths in `config.run`; stores the report when
/// a store directory is configured.
pub fn run_from_paths(config: &Config) -> Result<InspectionReport> {
    let paths = &config.run;
    let reference = load_reference(existing(&paths.reference, "reference")?)?;
    let field = match config.discrepancy.metric {
        Metric::MDistance => {
            let f = load_covariance(existing(&paths.covariance, "covariance")?)?;
            if f.len() != reference.len() {
                return Err(Error::Config(format!(
                    "covariance has {} entries but the reference has {} points",
                    f.len(),
                    reference.len()
                )));
            }
            Some(f)
        }
        Metric::L2 => None,
    };
    let query = io::read_cloud(existing(&paths.query, "query")?)?;
    let truth = match &paths.ground_truth {
        Some(p) => Some(io::read_json::<Vec<GroundTruthFod>>(p)?),
        None => None,
    };
    let session = paths.session_id.clone().unwrap_or_else(|| format!("session-{}", now_ms()));
    let out = run_pipeline(config, &reference, field.as_ref(), &query, truth, &session)?;
    if let Some(store) = &paths.store {
        std::fs::create_dir_all(store)?;
        crate::report::ReportStore::open(store)?.create(&out.report)?;
    }
    Ok(out.report)
}

/// Serialized form of one candidate cluster in a candidates file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: usize,
    pub centroid: Point3,
    pub point_count: usize,
    pub point_count_weighted: u64,
    pub max_score: f64,
    pub points: Vec<Point3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatesFile {
    pub metric: Metric,
    pub threshold: f64,
    pub cutoff: f64,
    pub min_count: u32,
    pub candidates: Vec<CandidateRecord>,
}

impl CandidatesFile {
    pub fn new(config: &Config, scored: &ScoredCloud, clusters: &[CandidateCluster]) -> Self {
        let d = &config.discrepancy;
        Self {
            metric: d.metric,
            threshold: d.threshold,
            cutoff: d.cutoff,
            min_count: d.min_count,
            candidates: clusters
                .iter()
                .enumerate()
                .map(|(id, c)| CandidateRecord {
                    id,
                    centroid: c.centroid,
                    point_count: c.member_indices.len(),
                    point_count_weighted: c.point_count_weighted,
                    max_score: c.max_score,
                    points: c.member_indices.iter().map(|&i| scored.points[i]).collect(),
                })
                .collect(),
        }
    }
}

/// Serialized waypoint for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointRecord {
    pub target_cluster_id: usize,
    pub target: [f64; 2],
    pub position: Option<[f64; 2]>,
    pub heading: Option<f64>,
    pub ray_cost: Option<f64>,
}

impl From<&Waypoint> for WaypointRecord {
    fn from(w: &Waypoint) -> Self {
        Self {
            target_cluster_id: w.target_id,
            target: w.target,
            position: w.waypoint.map(|c| c.position),
            heading: w.waypoint.map(|c| c.heading),
            ray_cost: w.waypoint.map(|c| c.ray_cost),
        }
    }
}
