//! Serves the review API over a report store, seeding it with one inspection
//! if it is empty. Try:
//!
//!   curl localhost:8080/api/sessions
//!   curl localhost:8080/api/sessions/<id>/candidates
//!   curl -X POST -H 'content-type: application/json' \
//!        -d '{"label": "Hammer", "reviewer": "me"}' localhost:8080/api/candidates/<id>/0/label
//!
//! cargo run --release --example review_service [store_dir] [port]

use std::net::SocketAddr;
use std::path::PathBuf;

use tanksweep::config::Config;
use tanksweep::pipeline::{build_reference, fit_covariance, run_pipeline};
use tanksweep::report::ReportStore;
use tanksweep::scenegen::{nominal_scans, synthetic_trial, tank_mesh, SceneSpec};
use tanksweep::service;

fn seed(store: &ReportStore) -> tanksweep::Result<()> {
    let config = Config::profile("sim")?;
    let spec = SceneSpec::default();
    let reference = build_reference(&config, &[], Some(&tank_mesh(&spec)?))?;
    let field = fit_covariance(&config, &reference, &nominal_scans(&spec, 4, 1000)?)?;
    let scene = synthetic_trial(&spec, 2)?;
    let run = run_pipeline(&config, &reference, Some(&field), &scene.cloud, Some(scene.ground_truth()), "example")?;
    store.create(&run.report)
}

#[tokio::main]
async fn main() -> tanksweep::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("tanksweep").join("store"));
    let port: u16 = args.next().and_then(|p| p.parse().ok()).unwrap_or(8080);
    std::fs::create_dir_all(&dir)?;

    let store = ReportStore::open(&dir)?;
    if store.session_ids()?.is_empty() {
        let s = ReportStore::open(&dir)?;
        tokio::task::spawn_blocking(move || seed(&s)).await.expect("seeding panicked")?;
    }
    let listener = service::bind(SocketAddr::from(([127, 0, 0, 1], port))).await?;
    println!("serving {} on http://127.0.0.1:{port} (ctrl-c to stop)", dir.display());
    service::serve(store, listener).await
}
