//! Tunes threshold, cluster cutoff and minimum cluster size on labeled
//! synthetic trials, for both metrics.
//!
//! cargo run --release --example grid_search_tuning

use tanksweep::config::Config;
use tanksweep::discrepancy::Metric;
use tanksweep::pipeline::{build_reference, fit_covariance, tune, TuningTrial};
use tanksweep::scenegen::{nominal_scans, synthetic_trial, tank_mesh, SceneSpec};

fn main() -> tanksweep::Result<()> {
    let mut config = Config::profile("sim")?;
    let spec = SceneSpec::default();
    let reference = build_reference(&config, &[], Some(&tank_mesh(&spec)?))?;
    let field = fit_covariance(&config, &reference, &nominal_scans(&spec, 8, 1000)?)?;
    let trials: Vec<TuningTrial> = (100..105)
        .map(|s| {
            let scene = synthetic_trial(&spec, s)?;
            Ok(TuningTrial {
                truth: scene.centroids(),
                query: scene.cloud,
            })
        })
        .collect::<tanksweep::Result<_>>()?;

    for metric in [Metric::MDistance, Metric::L2] {
        config.discrepancy.metric = metric;
        let t = tune(&config, &reference, Some(&field), &trials)?;
        println!(
            "{metric:?}: threshold {:.4}, cutoff {:.3}, min count {} (mean cost {:.4} over {} grid points)",
            t.threshold, t.cutoff, t.min_count, t.mean_cost, t.grid_size
        );
    }
    Ok(())
}
