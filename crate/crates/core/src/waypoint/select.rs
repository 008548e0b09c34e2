//! Candidate viewpoints around a target and the choice among them.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::OccupancyCostMap;
use super::ray::cast_ray;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointCandidate {
    pub position: [f64; 2],
    /// Radians, facing the target, in (−π, π].
    pub heading: f64,
    pub ray_cost: f64,
    pub feasible: bool,
}

pub fn heading_towards(from: [f64; 2], to: [f64; 2]) -> f64 {
    let h = (to[1] - from[1]).atan2(to[0] - from[0]);
    if h == -PI {
        PI
    } else {
        h
    }
}

/// Radii linearly spaced in `[r_min, r_max]` times angles evenly spaced in
/// `[0, 2π)`, radius-major.
pub fn sample_waypoint_ring(
    target: [f64; 2],
    r_min: f64,
    r_max: f64,
    n_angles: usize,
    n_radii: usize,
) -> Vec<WaypointCandidate> {
    let mut out = Vec::with_capacity(n_angles * n_radii);
    for ri in 0..n_radii {
        let r = if n_radii == 1 {
            r_min
        } else {
            r_min + (r_max - r_min) * ri as f64 / (n_radii - 1) as f64
        };
        for ai in 0..n_angles {
            let a = 2.0 * PI * ai as f64 / n_angles as f64;
            let position = [target[0] + r * a.cos(), target[1] + r * a.sin()];
            out.push(WaypointCandidate {
                position,
                heading: heading_towards(position, target),
                ray_cost: 0.0,
                feasible: false,
            });
        }
    }
    out
}

/// Drops candidates outside `map` or on cells costing `cost_cutoff` or more.
pub fn filter_by_cost(map: &OccupancyCostMap, candidates: &[WaypointCandidate], cost_cutoff: u8) -> Vec<WaypointCandidate> {
    candidates
        .iter()
        .filter(|c| map.cost_at(c.position).is_some_and(|v| v < cost_cutoff))
        .copied()
        .collect()
}

/// Casts a ray from every admissible candidate to the target and returns the
/// reaching candidate with the lowest cumulative cost (earliest on ties).
pub fn select_waypoint(
    map_fodless: &OccupancyCostMap,
    candidates: &[WaypointCandidate],
    target: [f64; 2],
    cost_cutoff: u8,
) -> Option<WaypointCandidate> {
    if map_fodless.world_to_cell(target).is_none() {
        return None;
    }
    let evaluated: Vec<Option<WaypointCandidate>> = candidates
        .par_iter()
        .map(|c| {
            let v = map_fodless.cost_at(c.position)?;
            if v >= cost_cutoff {
                return None;
            }
            let r = cast_ray(map_fodless, c.position, target).ok()?;
            r.reached.then_some(WaypointCandidate {
                ray_cost: r.cumulative_cost,
                feasible: true,
                ..*c
            })
        })
        .collect();
    evaluated
        .into_iter()
        .flatten()
        .fold(None, |best: Option<WaypointCandidate>, c| match best {
            Some(b) if b.ray_cost <= c.ray_cost => Some(b),
            _ => Some(c),
        })
}

/// Greedy tour: repeatedly visit the nearest remaining waypoint, starting
/// from `start`. Returns indices into `positions`; ties go to the lower
/// index.
pub fn order_waypoints(start: [f64; 2], positions: &[[f64; 2]]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..positions.len()).collect();
    let mut at = start;
    let mut order = Vec::with_capacity(positions.len());
    while !left.is_empty() {
        let (k, _) = left
            .iter()
            .enumerate()
            .map(|(k, &i)| (k, (positions[i][0] - at[0]).powi(2) + (positions[i][1] - at[1]).powi(2)))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        let i = left.remove(k);
        at = positions[i];
        order.push(i);
    }
    order
}
