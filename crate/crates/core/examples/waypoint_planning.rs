//! Builds the query and FOD-free cost maps and plans one camera waypoint
//! per target, writing both maps as PGM images.
//!
//! cargo run --release --example waypoint_planning [out_dir]

use std::fs::File;
use std::path::PathBuf;

use tanksweep::config::Config;
use tanksweep::pipeline::{build_reference, costmaps};
use tanksweep::scenegen::{synthetic_trial, tank_mesh, SceneSpec};
use tanksweep::waypoint::{order_waypoints, plan_waypoints};

fn main() -> tanksweep::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("tanksweep"));
    std::fs::create_dir_all(&out)?;

    let config = Config::profile("sim")?;
    let spec = SceneSpec::default();
    let reference = build_reference(&config, &[], Some(&tank_mesh(&spec)?))?;
    let scene = synthetic_trial(&spec, 5)?;

    let (query_map, fodless) = costmaps(&config, &reference, &scene.cloud)?;
    println!("cost maps {}x{} at {} m", fodless.width, fodless.height, fodless.resolution);

    // plan straight at the true tool positions
    let targets = scene.centroids();
    let plan = plan_waypoints(&query_map, &fodless, &targets, &config.waypoint)?;
    let found: Vec<usize> = (0..plan.len()).filter(|&i| plan[i].waypoint.is_some()).collect();
    let positions: Vec<[f64; 2]> = found.iter().map(|&i| plan[i].waypoint.unwrap().position).collect();
    let order = order_waypoints(fodless.cell_center(fodless.width / 2, fodless.height / 2), &positions);
    for k in order {
        let w = &plan[found[k]];
        let c = w.waypoint.unwrap();
        println!(
            "target {} at ({:.2}, {:.2}): stand at ({:.2}, {:.2}) facing {:.0}°, ray cost {}",
            w.target_id,
            w.target[0],
            w.target[1],
            c.position[0],
            c.position[1],
            c.heading.to_degrees(),
            c.ray_cost
        );
    }
    for w in plan.iter().filter(|w| w.waypoint.is_none()) {
        println!("target {}: no clear viewpoint", w.target_id);
    }

    query_map.write_pgm(&mut File::create(out.join("query_costmap.pgm"))?)?;
    fodless.write_pgm(&mut File::create(out.join("reference_costmap.pgm"))?)?;
    println!("maps written to {}", out.display());
    Ok(())
}
