//! Builds a reference map by sampling the CAD mesh of the tank, then saves
//! and reloads it.
//!
//! cargo run --release --example reference_from_mesh [out_dir]

use std::path::PathBuf;

use tanksweep::pipeline::{load_reference, save_reference};
use tanksweep::reference::build_from_mesh;
use tanksweep::scenegen::{tank_mesh, SceneSpec};

fn main() -> tanksweep::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("tanksweep"));
    std::fs::create_dir_all(&out)?;

    let mesh = tank_mesh(&SceneSpec::default())?;
    println!("mesh: {} faces, {:.2} m² surface", mesh.faces().len(), mesh.surface_area());

    let reference = build_from_mesh(&mesh, 60_000, 0)?;
    let path = out.join("reference.ply");
    save_reference(&path, &reference)?;
    let back = load_reference(&path)?;
    assert_eq!(back.len(), reference.len());

    println!(
        "reference: {} points, bbox diagonal {:.3} m, provenance {:?}",
        back.len(),
        back.bbox_diagonal(),
        back.provenance()
    );
    println!("saved to {}", path.display());
    Ok(())
}
