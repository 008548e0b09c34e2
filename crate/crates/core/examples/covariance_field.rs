//! Fits the local covariance field from nominal scans and shows how the
//! expected noise differs between floor, walls and ceiling.
//!
//! cargo run --release --example covariance_field [out_dir]

use std::path::PathBuf;

use tanksweep::config::Config;
use tanksweep::pipeline::{build_reference, fit_covariance, save_covariance};
use tanksweep::scenegen::{nominal_scans, tank_mesh, SceneSpec};

fn main() -> tanksweep::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("tanksweep"));
    std::fs::create_dir_all(&out)?;

    let config = Config::profile("sim")?;
    let spec = SceneSpec::default();
    let reference = build_reference(&config, &[], Some(&tank_mesh(&spec)?))?;
    let training = nominal_scans(&spec, 8, 1000)?;
    let field = fit_covariance(&config, &reference, &training)?;

    let logdet = field.log_determinants();
    let pts = reference.cloud().points();
    let mut floor = (0.0, 0usize);
    let mut ceiling = (0.0, 0usize);
    for (p, d) in pts.iter().zip(&logdet) {
        if p.z < 0.01 {
            floor = (floor.0 + d, floor.1 + 1);
        } else if p.z > spec.dims[2] - 0.01 {
            ceiling = (ceiling.0 + d, ceiling.1 + 1);
        }
    }
    println!("{} reference points, {} without training support", field.len(), field.unsupported().iter().filter(|u| **u).count());
    println!("mean ln det Σ  floor {:.2}  ceiling {:.2}", floor.0 / floor.1 as f64, ceiling.0 / ceiling.1 as f64);

    let wall = pts.iter().position(|p| p.x < 0.01 && p.z > 0.3 && p.z < 1.0).expect("wall point");
    let c = field.covariance(wall);
    println!("wall point {:?}\n  σ normal {:.4} m, σ along wall {:.4} m", pts[wall], c[(0, 0)].sqrt(), c[(1, 1)].sqrt());

    let path = out.join("covariance.bin");
    save_covariance(&path, &field, &config.covariance.smoothing)?;
    println!("saved to {}", path.display());
    Ok(())
}
