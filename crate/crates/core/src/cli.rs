//! Command-line interface. [`main_with_args`] returns the process exit code:
//! 0 on success, 2 when an input artifact is missing, 1 for other failures.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::discrepancy::Metric;
use crate::error::{Error, Result};
use crate::geom::{PointCloud, Point3};
use crate::io;
use crate::pipeline::{self, CandidatesFile, TuningTrial, WaypointRecord};
use crate::report::{GroundTruthFod, InspectionReport, ReportStore};
use crate::scenegen::{generate_scene, sample_fod_protocol, tank_mesh, FodSpec, SceneSpec};
use crate::tuning::detection_metrics;

#[derive(Debug, Parser)]
#[command(name = "tanksweep", version, about = "Point-cloud FOD detection for confined spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML configuration file
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Parameter profile (sim, physical, physical-l2); overrides the file's
    #[arg(long, short)]
    pub profile: Option<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<Config> {
        match &self.config {
            Some(p) => Config::load(p, self.profile.as_deref()),
            None => Config::profile(self.profile.as_deref().unwrap_or("physical")),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a reference map from a manifest of sample scans or a CAD mesh
    BuildRef {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        manifest: PathBuf,
        /// Output cloud; metadata goes to `<stem>.meta.json`
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fit the per-point covariance field from training scans
    FitCov {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        training: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score a query scan and write candidate clusters
    Query {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        reference: PathBuf,
        /// Required for the M-distance metric
        #[arg(long)]
        covariance: Option<PathBuf>,
        #[arg(long)]
        query: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Plan one viewing waypoint per candidate
    Waypoints {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Also write the query and reference cost maps as PGM images here
        #[arg(long)]
        pgm_dir: Option<PathBuf>,
    },
    /// Grid-search threshold, cutoff and min count on labeled trials
    Tune {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        covariance: Option<PathBuf>,
        /// TOML listing `[[trial]]` entries with `query` and `ground_truth`
        #[arg(long)]
        trials: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Detection metrics and label confusion matrix over stored sessions
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Report JSON files or session directories
        #[arg(long, num_args = 1.., conflicts_with = "store")]
        reports: Vec<PathBuf>,
        /// Evaluate every session in a report store
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Generate a synthetic tank scan with injected FODs
    GenScene {
        /// TOML scene file; defaults are used when absent
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also write the nominal tank geometry as a mesh
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Overrides the scene file's noise seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Full pipeline: score, cluster, plan waypoints and store the report
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        covariance: Option<PathBuf>,
        #[arg(long)]
        query: Option<PathBuf>,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        session: Option<String>,
        /// Also write the report JSON here
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Serve the review API over a report store
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

/// Inputs for `build-ref`. Relative paths resolve against the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceManifest {
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub samples: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialEntry {
    pub query: PathBuf,
    pub ground_truth: PathBuf,
}

/// Inputs for `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialsManifest {
    pub trial: Vec<TrialEntry>,
}

/// Scene file for `gen-scene`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneFile {
    pub scene: SceneSpec,
    /// FODs to inject; drawn from the tool catalog when absent.
    pub fods: Option<Vec<FodSpec>>,
    /// Seed for drawing FODs from the catalog.
    pub protocol_seed: u64,
    /// Seed for sensor noise.
    pub noise_seed: u64,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| Error::MissingArtifact(format!("{}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parent(p: &Path) -> PathBuf {
    p.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn read_clouds(paths: &[PathBuf]) -> Result<Vec<PointCloud>> {
    paths.iter().map(|p| io::read_cloud(p)).collect()
}

fn load_field(config: &Config, path: Option<&PathBuf>) -> Result<Option<crate::covariance::CovarianceField>> {
    match config.discrepancy.metric {
        Metric::L2 => Ok(None),
        Metric::MDistance => {
            let p = path.ok_or_else(|| Error::MissingArtifact("covariance (needed by the M-distance metric)".into()))?;
            Ok(Some(pipeline::load_covariance(p)?))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn load_reports(paths: &[PathBuf], store: Option<&PathBuf>) -> Result<Vec<InspectionReport>> {
    if let Some(s) = store {
        let store = ReportStore::open(s)?;
        return store.session_ids()?.iter().map(|id| store.load(id)).collect();
    }
    paths
        .iter()
        .map(|p| {
            if p.is_dir() {
                let id = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                ReportStore::open(parent(p))?.load(&id)
            } else {
                let text = std::fs::read_to_string(p)
                    .map_err(|_| Error::MissingArtifact(format!("report {}", p.display())))?;
                InspectionReport::from_json(&text)
            }
        })
        .collect()
}

/// Executes one parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildRef { cfg, manifest, out } => {
            let config = cfg.load()?;
            let m: ReferenceManifest = read_toml(&manifest)?;
            let base = parent(&manifest);
            let mesh = match &m.mesh {
                Some(p) => Some(io::read_mesh(&resolve(&base, p))?),
                None => None,
            };
            let samples: Vec<PathBuf> = m.samples.iter().map(|p| resolve(&base, p)).collect();
            let samples = read_clouds(&samples)?;
            let reference = pipeline::build_reference(&config, &samples, mesh.as_ref())?;
            pipeline::save_reference(&out, &reference)?;
            println!("reference: {} points -> {}", reference.len(), out.display());
        }
        Command::FitCov { cfg, reference, training, out } => {
            let config = cfg.load()?;
            let reference = pipeline::load_reference(&reference)?;
            let training = read_clouds(&training)?;
            let field = pipeline::fit_covariance(&config, &reference, &training)?;
            pipeline::save_covariance(&out, &field, &config.covariance.smoothing)?;
            let unsupported = field.unsupported().iter().filter(|u| **u).count();
            println!("covariance: {} points ({unsupported} unsupported) -> {}", field.len(), out.display());
        }
        Command::Query { cfg, reference, covariance, query, out } => {
            let config = cfg.load()?;
            let reference = pipeline::load_reference(&reference)?;
            let field = load_field(&config, covariance.as_ref())?;
            let q = pipeline::pre_register(&config, &io::read_cloud(&query)?, &reference)?;
            let (scored, clusters) = pipeline::detect_candidates(&config, &reference, field.as_ref(), &q)?;
            io::write_json(&out, &CandidatesFile::new(&config, &scored, &clusters))?;
            println!("{} candidates -> {}", clusters.len(), out.display());
        }
        Command::Waypoints { cfg, reference, query, candidates, out, pgm_dir } => {
            let config = cfg.load()?;
            let reference = pipeline::load_reference(&reference)?;
            let q = pipeline::pre_register(&config, &io::read_cloud(&query)?, &reference)?;
            let cands: CandidatesFile = io::read_json(&candidates)?;
            let (query_map, fodless) = pipeline::costmaps(&config, &reference, &q)?;
            let targets: Vec<Point3> = cands.candidates.iter().map(|c| c.centroid).collect();
            let mut wps = crate::waypoint::plan_waypoints(&query_map, &fodless, &targets, &config.waypoint)?;
            for (w, c) in wps.iter_mut().zip(&cands.candidates) {
                w.target_id = c.id;
            }
            let records: Vec<WaypointRecord> = wps.iter().map(WaypointRecord::from).collect();
            io::write_json(&out, &records)?;
            if let Some(dir) = pgm_dir {
                std::fs::create_dir_all(&dir)?;
                for (name, map) in [("query_costmap.pgm", &query_map), ("reference_costmap.pgm", &fodless)] {
                    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
                    map.write_pgm(&mut w)?;
                }
            }
            let planned = records.iter().filter(|r| r.position.is_some()).count();
            println!("{planned}/{} waypoints planned -> {}", records.len(), out.display());
        }
        Command::Tune { cfg, reference, covariance, trials, out } => {
            let config = cfg.load()?;
            let reference = pipeline::load_reference(&reference)?;
            let field = load_field(&config, covariance.as_ref())?;
            let manifest: TrialsManifest = read_toml(&trials)?;
            let base = parent(&trials);
            let trials = manifest
                .trial
                .iter()
                .map(|t| {
                    let truth: Vec<GroundTruthFod> = io::read_json(&resolve(&base, &t.ground_truth))?;
                    Ok(TuningTrial {
                        query: io::read_cloud(&resolve(&base, &t.query))?,
                        truth: truth.iter().map(|g| g.centroid).collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let best = pipeline::tune(&config, &reference, field.as_ref(), &trials)?;
            io::write_json(&out, &best)?;
            println!(
                "best: threshold {:.4} cutoff {:.4} min_count {} (cost {:.4}) -> {}",
                best.threshold,
                best.cutoff,
                best.min_count,
                best.mean_cost,
                out.display()
            );
        }
        Command::Eval { cfg, reports, store, out, confusion } => {
            let config = cfg.load()?;
            let reports = load_reports(&reports, store.as_ref())?;
            let penalty = reports
                .iter()
                .find_map(|r| r.config.get("tuning")?.get("penalty_distance")?.as_f64())
                .filter(|p| *p > 0.0)
                .unwrap_or(config.tuning.penalty_distance);
            let m = detection_metrics(&reports, config.tuning.view_radius, penalty);
            io::write_json(&out, &m)?;
            if let (Some(path), Some(c)) = (confusion, &m.confusion) {
                write_text(&path, &c.to_csv())?;
            }
            println!("{} photos from {} reports -> {}", m.photos, reports.len(), out.display());
        }
        Command::GenScene { scene, out, truth, mesh, seed } => {
            let file: SceneFile = match &scene {
                Some(p) => read_toml(p)?,
                None => SceneFile::default(),
            };
            let fods = file.fods.clone().unwrap_or_else(|| sample_fod_protocol(file.protocol_seed));
            let s = generate_scene(&file.scene, &fods, seed.unwrap_or(file.noise_seed))?;
            io::write_cloud(&out, &s.cloud)?;
            io::write_json(&truth, &s.ground_truth())?;
            if let Some(m) = mesh {
                io::write_mesh(&m, &tank_mesh(&file.scene)?)?;
            }
            println!("{} points, {} FODs -> {}", s.cloud.len(), s.fods.len(), out.display());
        }
        Command::Run { cfg, reference, covariance, query, ground_truth, store, session, out } => {
            let mut config = cfg.load()?;
            let r = &mut config.run;
            for (slot, v) in [
                (&mut r.reference, reference),
                (&mut r.covariance, covariance),
                (&mut r.query, query),
                (&mut r.ground_truth, ground_truth),
                (&mut r.store, store),
            ] {
                if v.is_some() {
                    *slot = v;
                }
            }
            if session.is_some() {
                r.session_id = session;
            }
            let report = pipeline::run_from_paths(&config)?;
            if let Some(o) = out {
                write_text(&o, &report.to_json()?)?;
            }
            println!("session {}: {} candidates", report.session_id, report.candidates.len());
        }
        Command::Serve { store, port, host } => {
            let store = ReportStore::open(&store)?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Error::Config(format!("bad address {host}:{port}: {e}")))?;
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async {
                let listener = crate::service::bind(addr).await?;
                println!("serving {} on http://{addr}", store.root().display());
                crate::service::serve(store, listener).await
            })?;
        }
    }
    Ok(())
}

/// Exit code for an error: 2 for a missing input artifact, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingArtifact(_) => 2,
        Error::Stage { source, .. } | Error::Sample { source, .. } => exit_code(source),
        _ => 1,
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
