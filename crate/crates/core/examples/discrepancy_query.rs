//! Scores a query scan against the reference with both metrics and lists
//! the candidate clusters next to the true tool positions.
//!
//! cargo run --release --example discrepancy_query

use tanksweep::config::Config;
use tanksweep::discrepancy::Metric;
use tanksweep::pipeline::{build_reference, detect_candidates, fit_covariance, pre_register};
use tanksweep::scenegen::{nominal_scans, synthetic_trial, tank_mesh, SceneSpec};

fn main() -> tanksweep::Result<()> {
    let mut config = Config::profile("sim")?;
    let spec = SceneSpec::default();
    let reference = build_reference(&config, &[], Some(&tank_mesh(&spec)?))?;
    let field = fit_covariance(&config, &reference, &nominal_scans(&spec, 8, 1000)?)?;

    let scene = synthetic_trial(&spec, 3)?;
    let query = pre_register(&config, &scene.cloud, &reference)?;
    println!("truth:");
    for f in scene.ground_truth() {
        println!("  {:<14} ({:.2}, {:.2}, {:.2})", f.fod_type, f.centroid.x, f.centroid.y, f.centroid.z);
    }

    // L2 parameters in meters, M-distance in standard deviations
    for (metric, threshold, cutoff, min_count) in [(Metric::MDistance, 2.2, 0.35, 5), (Metric::L2, 0.03, 0.3, 5)] {
        config.discrepancy.metric = metric;
        config.discrepancy.threshold = threshold;
        config.discrepancy.cutoff = cutoff;
        config.discrepancy.min_count = min_count;
        let (scored, clusters) = detect_candidates(&config, &reference, Some(&field), &query)?;
        let selected = scored.segment(threshold);
        println!("{metric:?}: {} of {} points above {threshold}, {} clusters", selected.len(), scored.len(), clusters.len());
        for c in &clusters {
            println!(
                "  ({:.2}, {:.2}, {:.2})  {} points  max score {:.2}",
                c.centroid.x, c.centroid.y, c.centroid.z, c.point_count_weighted, c.max_score
            );
        }
    }
    Ok(())
}
