//! Camera waypoints for FOD candidates on a 2D cost map.

mod grid;
mod ray;
mod select;

pub use grid::{
    flood_fill_reachable, inflate_costmap, inflation_cost, project_occupancy, squared_distance_transform,
    OccupancyCostMap, FREE, INSCRIBED, LETHAL, UNKNOWN,
};
pub use ray::{cast_ray, traverse, RayResult};
pub use select::{
    filter_by_cost, heading_towards, order_waypoints, sample_waypoint_ring, select_waypoint, WaypointCandidate,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaypointConfig {
    pub resolution: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub robot_radius: f64,
    pub inflation_radius: f64,
    pub cost_scaling: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub n_angles: usize,
    pub n_radii: usize,
    pub cost_cutoff: u8,
    /// Robot start position; defaults to the free cell nearest the map center.
    pub seed: Option<[f64; 2]>,
}

impl Default for WaypointConfig {
    fn default() -> Self {
        Self {
            resolution: 0.01,
            z_min: 0.05,
            z_max: 1.0,
            robot_radius: 0.15,
            inflation_radius: 0.4,
            cost_scaling: 10.0,
            r_min: 0.4,
            r_max: 1.2,
            n_angles: 36,
            n_radii: 3,
            cost_cutoff: 128,
            seed: None,
        }
    }
}

impl WaypointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min <= self.r_max) {
            return Err(Error::param("need 0 < r_min <= r_max"));
        }
        if self.n_angles == 0 || self.n_radii == 0 {
            return Err(Error::param("n_angles and n_radii must be >= 1"));
        }
        Ok(())
    }
}

/// Chosen viewpoint for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub target_id: usize,
    pub target: [f64; 2],
    pub waypoint: Option<WaypointCandidate>,
}

/// Free cell nearest to the map center (row-major order breaks ties).
fn default_seed(map: &OccupancyCostMap) -> Result<[f64; 2]> {
    let (cx, cy) = (map.width as f64 / 2.0, map.height as f64 / 2.0);
    let mut best: Option<(f64, usize, usize)> = None;
    for y in 0..map.height {
        for x in 0..map.width {
            if !map.is_free(map.get(x, y)) {
                continue;
            }
            let d = (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2);
            if best.is_none_or(|b| d < b.0) {
                best = Some((d, x, y));
            }
        }
    }
    let (_, x, y) = best.ok_or(Error::SeedBlocked)?;
    Ok(map.cell_center(x, y))
}

/// Occupancy projection, reachable-space fill and inflation of one cloud,
/// optionally onto the grid of `like`.
pub fn build_costmap(cloud: &PointCloud, config: &WaypointConfig, like: Option<&OccupancyCostMap>) -> Result<OccupancyCostMap> {
    let mut occ = project_occupancy(cloud, config.resolution, config.z_min, config.z_max)?;
    if let Some(l) = like {
        let mut m = OccupancyCostMap::new(l.width, l.height, l.resolution, l.origin)?;
        for p in cloud.points() {
            if p.z < config.z_min || p.z > config.z_max {
                continue;
            }
            if let Some((x, y)) = m.world_to_cell([p.x, p.y]) {
                m.set(x, y, LETHAL);
            }
        }
        occ = m;
    }
    let seed = match config.seed {
        Some(s) => s,
        None => default_seed(&occ)?,
    };
    let reach = flood_fill_reachable(&occ, seed)?;
    inflate_costmap(&reach, config.robot_radius, config.inflation_radius, config.cost_scaling)
}

/// For every target: sample the ring, keep candidates below the cost cutoff
/// on the query map, then pick the cheapest clear view on the FOD-less map.
pub fn plan_waypoints(
    query_map: &OccupancyCostMap,
    fodless_map: &OccupancyCostMap,
    targets: &[Point3],
    config: &WaypointConfig,
) -> Result<Vec<Waypoint>> {
    config.validate()?;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(id, t)| {
            let target = [t.x, t.y];
            let ring = sample_waypoint_ring(target, config.r_min, config.r_max, config.n_angles, config.n_radii);
            let kept = filter_by_cost(query_map, &ring, config.cost_cutoff);
            Waypoint {
                target_id: id,
                target,
                waypoint: select_waypoint(fodless_map, &kept, target, config.cost_cutoff),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..=200 {
            let t = i as f64 / 100.0;
            for z in [0.2, 0.5] {
                pts.push(Point3::new(t, 0.0, z));
                pts.push(Point3::new(t, 2.0, z));
                pts.push(Point3::new(0.0, t, z));
                pts.push(Point3::new(2.0, t, z));
            }
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn plans_inside_room() {
        let cfg = WaypointConfig {
            resolution: 0.02,
            robot_radius: 0.05,
            inflation_radius: 0.15,
            r_min: 0.3,
            r_max: 0.5,
            ..Default::default()
        };
        let map = build_costmap(&room(), &cfg, None).unwrap();
        let same = build_costmap(&room(), &cfg, Some(&map)).unwrap();
        assert_eq!(map, same);
        let w = plan_waypoints(&map, &map, &[Point3::new(1.0, 1.0, 0.0)], &cfg).unwrap();
        let wp = w[0].waypoint.unwrap();
        assert!(wp.feasible);
        assert!(map.cost_at(wp.position).unwrap() < cfg.cost_cutoff);
    }
}
