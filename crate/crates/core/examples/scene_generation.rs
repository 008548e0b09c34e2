//! Generates a synthetic tank scan with a few tools on the floor and writes
//! the cloud, the ground truth and the CAD mesh.
//!
//! cargo run --release --example scene_generation [out_dir]

use std::path::PathBuf;

use tanksweep::io;
use tanksweep::scenegen::{fod_catalog, generate_scene, tank_mesh, SceneSpec};

fn main() -> tanksweep::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("tanksweep"));
    std::fs::create_dir_all(&out)?;

    let spec = SceneSpec::default();
    let catalog = fod_catalog();
    let fods = vec![catalog[0].clone(), catalog[3].clone(), catalog[4].clone()];
    let scene = generate_scene(&spec, &fods, 7)?;

    io::write_cloud(&out.join("scan.ply"), &scene.cloud)?;
    io::write_json(&out.join("truth.json"), &scene.ground_truth())?;
    io::write_mesh(&out.join("tank.ply"), &tank_mesh(&spec)?)?;

    println!("{} points in a {:?} m tank", scene.cloud.len(), spec.dims);
    for f in scene.ground_truth() {
        println!("  {:<14} at ({:.2}, {:.2}, {:.2})", f.fod_type, f.centroid.x, f.centroid.y, f.centroid.z);
    }
    println!("written to {}", out.display());
    Ok(())
}
