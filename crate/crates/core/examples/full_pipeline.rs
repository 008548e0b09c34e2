//! End-to-end inspection: reference and covariance from the tank model,
//! tuning on labeled trials, then one run that detects candidates, plans
//! waypoints, stores the report and scores it against the ground truth.
//!
//! cargo run --release --example full_pipeline [store_dir]

use std::path::PathBuf;

use tanksweep::config::Config;
use tanksweep::pipeline::{build_reference, fit_covariance, run_pipeline, tune, TuningTrial};
use tanksweep::report::ReportStore;
use tanksweep::scenegen::{nominal_scans, synthetic_trial, tank_mesh, SceneSpec};
use tanksweep::tuning::detection_metrics;

fn main() -> tanksweep::Result<()> {
    let store_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tanksweep").join("store"));
    std::fs::create_dir_all(&store_dir)?;

    let mut config = Config::profile("sim")?;
    let spec = SceneSpec::default();
    let reference = build_reference(&config, &[], Some(&tank_mesh(&spec)?))?;
    let field = fit_covariance(&config, &reference, &nominal_scans(&spec, 8, 1000)?)?;
    let trials: Vec<TuningTrial> = (100..105)
        .map(|s| synthetic_trial(&spec, s).map(|sc| TuningTrial { truth: sc.centroids(), query: sc.cloud }))
        .collect::<tanksweep::Result<_>>()?;
    tune(&config, &reference, Some(&field), &trials)?.apply(&mut config);

    let scene = synthetic_trial(&spec, 9)?;
    let session = format!("demo-{}", tanksweep::report::now_ms());
    let run = run_pipeline(&config, &reference, Some(&field), &scene.cloud, Some(scene.ground_truth()), &session)?;
    for (c, w) in run.report.candidates.iter().zip(&run.waypoints) {
        let view = w
            .waypoint
            .map(|v| format!("view from ({:.2}, {:.2})", v.position[0], v.position[1]))
            .unwrap_or_else(|| "no viewpoint".into());
        println!("candidate {} at ({:.2}, {:.2}, {:.2}), {} points, {view}", c.id, c.centroid.x, c.centroid.y, c.centroid.z, c.point_count);
    }

    let store = ReportStore::open(&store_dir)?;
    store.create(&run.report)?;
    let m = detection_metrics(&[run.report], config.tuning.view_radius, reference.bbox_diagonal());
    println!(
        "precision {:.2}, recall {:.2} ({} of {} FODs)",
        m.precision.unwrap_or(0.0),
        m.recall.unwrap_or(0.0),
        m.fods_detected.unwrap_or(0),
        m.fods_total.unwrap_or(0)
    );
    println!("session {session} stored in {}", store_dir.display());
    Ok(())
}
