//! Supercover ray traversal over a cost map.

use serde::{Deserialize, Serialize};

use super::grid::OccupancyCostMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayResult {
    pub reached: bool,
    pub cumulative_cost: f64,
}

/// Every cell the segment touches, in order. When the segment passes exactly
/// through a cell corner both side cells are listed (x-neighbor first)
/// before the diagonal cell.
pub fn traverse(map: &OccupancyCostMap, from: [f64; 2], to: [f64; 2]) -> Result<Vec<(usize, usize)>> {
    let start = map.world_to_cell(from).ok_or(Error::OutOfBounds(from[0], from[1]))?;
    let end = map.world_to_cell(to).ok_or(Error::OutOfBounds(to[0], to[1]))?;
    let g0 = map.to_grid(from);
    let g1 = map.to_grid(to);
    let (dx, dy) = (g1[0] - g0[0], g1[1] - g0[1]);
    let sx: i64 = if end.0 > start.0 { 1 } else { -1 };
    let sy: i64 = if end.1 > start.1 { 1 } else { -1 };
    let mut nx = (end.0 as i64 - start.0 as i64).unsigned_abs();
    let mut ny = (end.1 as i64 - start.1 as i64).unsigned_abs();
    // parameter at which the segment crosses grid line `b`, computed
    // directly (not accumulated) so exact corner crossings compare equal
    let cross = |b: i64, g: f64, d: f64| -> f64 {
        if d == 0.0 {
            f64::INFINITY
        } else {
            (b as f64 - g) / d
        }
    };
    let (mut x, mut y) = (start.0 as i64, start.1 as i64);
    let next_x = |x: i64| if sx > 0 { x + 1 } else { x };
    let next_y = |y: i64| if sy > 0 { y + 1 } else { y };
    let mut cells = vec![start];
    while nx > 0 || ny > 0 {
        let t_x = if nx > 0 { cross(next_x(x), g0[0], dx) } else { f64::INFINITY };
        let t_y = if ny > 0 { cross(next_y(y), g0[1], dy) } else { f64::INFINITY };
        if t_x < t_y {
            x += sx;
            nx -= 1;
        } else if t_y < t_x {
            y += sy;
            ny -= 1;
        } else {
            cells.push(((x + sx) as usize, y as usize));
            cells.push((x as usize, (y + sy) as usize));
            x += sx;
            y += sy;
            nx -= 1;
            ny -= 1;
        }
        cells.push((x as usize, y as usize));
    }
    Ok(cells)
}

/// Sums cell costs along the segment. Stops unreached at the first cell at
/// or above the lethal threshold (unknown cells included) other than the
/// cell containing `to`; that cell's cost is not added.
pub fn cast_ray(map: &OccupancyCostMap, from: [f64; 2], to: [f64; 2]) -> Result<RayResult> {
    let cells = traverse(map, from, to)?;
    let last = cells.len() - 1;
    let mut sum = 0.0;
    for (k, &(x, y)) in cells.iter().enumerate() {
        let v = map.get(x, y);
        if k != last && v >= map.lethal_threshold {
            return Ok(RayResult {
                reached: false,
                cumulative_cost: sum,
            });
        }
        sum += f64::from(v);
    }
    Ok(RayResult {
        reached: true,
        cumulative_cost: sum,
    })
}
